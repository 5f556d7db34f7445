use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use vlc_noma::experiment::{
    self, parse_csi, parse_dimming, parse_snr_grid, ExperimentConfig, Overrides, Rule, Scenario,
    Tolerance,
};

#[derive(Parser)]
#[command(name = "vlc-noma", version, about = "NOMA-VLC BER experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write CSV curves plus metadata.json.
    Run {
        /// TOML config; keys override the scenario preset. `--scenario`
        /// picks that preset and replaces the file's `scenario` key.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<Scenario>,
        /// `105:130:2.5` or `110,115,120`.
        #[arg(long)]
        snr: Option<String>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Monte Carlo bits per user and point.
        #[arg(long)]
        trials: Option<u64>,
        /// `perfect`, `noisy-fixed:VAR`, `noisy-snr:KAPPA`, `outdated:SPEED:SECONDS`.
        #[arg(long)]
        csi: Option<String>,
        /// `none`, `analog:FACTOR`, `vook:FACTOR`.
        #[arg(long)]
        dimming: Option<String>,
        /// Defaults to `$VLC_NOMA_OUT_DIR/<scenario>` or `results/<scenario>`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Compare two curve files point by point.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// `within-stderr:K`, `ratio:F`, `abs:T`, `ge[:K]`.
        #[arg(long, default_value = "within-stderr:3")]
        rule: Rule,
        /// Skip points where the reference curve `b` is at or below this BER.
        #[arg(long, default_value_t = 0.0)]
        min_ber: f64,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// List the built-in scenarios.
    ListScenarios,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    match Cli::parse().command {
        Command::Run {
            config,
            scenario,
            snr,
            rho,
            seed,
            trials,
            csi,
            dimming,
            out_dir,
        } => {
            let base = match &config {
                Some(path) => ExperimentConfig::from_file_as(path, scenario)
                    .with_context(|| format!("reading {}", path.display()))?,
                None => ExperimentConfig::preset(scenario.unwrap_or(Scenario::Fig4)),
            };
            let overrides = Overrides {
                scenario,
                snr_db: snr.as_deref().map(parse_snr_grid).transpose()?,
                rho,
                seed,
                trials,
                csi: csi.as_deref().map(parse_csi).transpose()?,
                dimming: dimming.as_deref().map(parse_dimming).transpose()?,
            };
            let cfg = overrides.apply(base);
            let dir = out_dir.unwrap_or_else(|| experiment::default_out_dir(cfg.scenario));
            let out = experiment::run(&cfg, &dir)?;
            for f in &out.files {
                println!("{}", f.display());
            }
            let d = &out.metadata.diagnostics;
            eprintln!(
                "{} finished in {:.1} s ({} files, {} unreliable MC points, {} estimate clamps, {} fallback terms)",
                cfg.scenario,
                out.metadata.wall_time_s,
                out.files.len(),
                d.unreliable.len(),
                d.mc_clamp_events,
                d.noisy.fallback_terms
            );
            Ok(true)
        }
        Command::Compare {
            a,
            b,
            rule,
            min_ber,
            json,
        } => {
            let report = experiment::compare(&a, &b, Tolerance::new(rule).with_min_ber(min_ber))?;
            let text = serde_json::to_string_pretty(&report)?;
            match json {
                Some(path) => std::fs::write(&path, text + "\n")?,
                None => println!("{text}"),
            }
            eprintln!(
                "{}: {} of {} checked points failed, max |a-b| = {:.3e}, max ratio = {:.3}",
                if report.pass { "PASS" } else { "FAIL" },
                report.failed,
                report.checked,
                report.max_abs_diff,
                report.max_ratio
            );
            Ok(report.pass)
        }
        Command::ListScenarios => {
            for (s, desc) in experiment::list_scenarios() {
                println!("{:<8} {desc}", s.as_str());
            }
            Ok(true)
        }
    }
}
