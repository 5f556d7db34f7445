use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{BoundGain, ExperimentConfig, Scenario};
use super::csv_io::{curve_rows, write_curve_file, CurveRow};
use crate::analytic::{
    chain_ber, conditional_ber_outdated, conditional_ber_perfect, vook_ber, LinkParams, NoisyCsi,
    NoisyDiagnostics, NoisyMethod, QExpFit,
};
use crate::channel::Point3;
use crate::link::{fpa_allocate, DimmingConfig, DimmingScheme};
use crate::mc::{
    run_trials, snr_to_sigma, worst_case_bound, BerCurve, CsiErrorModel, Deployment, MobilityMode,
    MobilitySetup, Provenance, TrialConfig,
};
use crate::oracle::exact_ber;
use crate::{Error, Result};

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "VLC_NOMA_OUT_DIR";

pub const METADATA_FILE: &str = "metadata.json";

/// `$VLC_NOMA_OUT_DIR/<scenario>`, or `results/<scenario>` when unset.
pub fn default_out_dir(scenario: Scenario) -> PathBuf {
    let root =
        std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("results"), PathBuf::from);
    root.join(scenario.as_str())
}

/// One parameter set within a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    /// File-name prefix; empty for single-family scenarios.
    pub label: String,
    pub rho: f64,
    pub csi: CsiErrorModel,
    pub dimming: DimmingConfig,
    pub mobility: MobilityMode,
    /// Emit a user-average row (user 0).
    pub average: bool,
}

pub fn variants(cfg: &ExperimentConfig) -> Result<Vec<Variant>> {
    let base = Variant {
        label: String::new(),
        rho: cfg.rho,
        csi: cfg.csi,
        dimming: cfg.dimming,
        mobility: cfg.mobility.mode,
        average: false,
    };
    let out = match cfg.scenario {
        Scenario::Fig3 => cfg
            .sweep
            .rho
            .iter()
            .map(|&rho| Variant {
                label: format!("rho{rho:.2}"),
                rho,
                average: true,
                ..base.clone()
            })
            .collect(),
        Scenario::Fig6 => {
            let fixed = match cfg.csi {
                m @ CsiErrorModel::NoisyFixed { .. } => m,
                _ => CsiErrorModel::NoisyFixed { variance: 2e-6 },
            };
            vec![
                Variant {
                    label: "fixed".into(),
                    csi: fixed,
                    ..base.clone()
                },
                Variant {
                    label: "snr_dependent".into(),
                    csi: CsiErrorModel::NoisySnrDependent {
                        kappa: cfg.sweep.kappa,
                    },
                    ..base
                },
            ]
        }
        Scenario::Fig10 | Scenario::Fig11 => {
            let scheme = if cfg.scenario == Scenario::Fig10 {
                DimmingScheme::Analog
            } else {
                DimmingScheme::Vook
            };
            cfg.sweep
                .dimming
                .iter()
                // Full-brightness VOOK carries no data.
                .filter(|&&g| {
                    scheme == DimmingScheme::Analog
                        || DimmingConfig::vook(g).is_ok_and(|d| d.data_slots() > 0)
                })
                .map(|&g| {
                    Ok(Variant {
                        label: format!("gamma{g:.2}"),
                        dimming: DimmingConfig::new(scheme, g)?,
                        ..base.clone()
                    })
                })
                .collect::<Result<_>>()?
        }
        Scenario::Fig4 | Scenario::Fig7 | Scenario::Fig8 | Scenario::Fig9 | Scenario::Custom => {
            vec![base]
        }
    };
    Ok(out)
}

/// Users in decoding order with everything the curves need.
#[derive(Debug, Clone)]
pub struct Setup {
    /// True gains, ascending.
    pub gains: Vec<f64>,
    /// Positions matching `gains`.
    pub positions: Vec<Point3>,
    deployment: Option<Deployment>,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let users = cfg.resolve_users()?;
        let mut idx: Vec<usize> = (0..users.gains.len()).collect();
        idx.sort_by(|&a, &b| users.gains[a].total_cmp(&users.gains[b]));
        let gains: Vec<f64> = idx.iter().map(|&i| users.gains[i]).collect();
        let positions: Vec<Point3> = idx.iter().map(|&i| users.positions[i]).collect();
        let deployment = if cfg.csi.is_outdated()
            || cfg.scenario == Scenario::Fig8
            || cfg.scenario == Scenario::Fig9
        {
            let table = cfg.led[2] - cfg.depth;
            if positions.iter().any(|p| (p.z - table).abs() > 1e-9) {
                return Err(Error::InvalidConfig(
                    "mobility needs every user on the table plane (LED height minus depth)".into(),
                ));
            }
            Some(Deployment::new(
                cfg.room,
                cfg.led_point(),
                cfg.depth,
                cfg.frontend,
                positions.clone(),
            )?)
        } else {
            None
        };
        Ok(Setup {
            gains,
            positions,
            deployment,
        })
    }

    pub fn users(&self) -> usize {
        self.gains.len()
    }

    fn deployment(&self) -> Result<&Deployment> {
        self.deployment
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("outdated CSI needs a deployment".into()))
    }
}

/// One CSV worth of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub name: String,
    pub curve: BerCurve,
    pub rows: Vec<CurveRow>,
}

impl Family {
    fn new(variant: &Variant, suffix: &str, curve: BerCurve) -> Self {
        let name = if variant.label.is_empty() {
            suffix.to_string()
        } else {
            format!("{}_{suffix}", variant.label)
        };
        let rows = curve_rows(&curve, variant.average);
        Family { name, curve, rows }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UnreliablePoint {
    pub family: String,
    pub snr_db: f64,
    pub user: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub noisy: NoisyDiagnostics,
    /// Monte Carlo estimates raised to the positive floor.
    pub mc_clamp_events: u64,
    pub mobility_epochs: u64,
    pub order_changes: u64,
    /// Monte Carlo points with too few errors to trust.
    pub unreliable: Vec<UnreliablePoint>,
}

fn link_params(cfg: &ExperimentConfig, v: &Variant, users: usize, snr: f64) -> Result<LinkParams> {
    let mut alloc = fpa_allocate(cfg.total_power, v.rho, users)?;
    if v.dimming.scheme == DimmingScheme::Analog {
        alloc = crate::analytic::apply_analog_dimming(&alloc, v.dimming.factor)?;
    }
    let sigma = snr_to_sigma(snr, cfg.total_power, cfg.responsivity);
    LinkParams::new(alloc, cfg.responsivity, sigma)
}

/// Maps a raw stage error to the delivered BER under the variant's dimming.
fn finisher(v: &Variant) -> Result<impl Fn(f64) -> f64> {
    let slots = match v.dimming.scheme {
        DimmingScheme::Vook => match v.dimming.data_slots() {
            0 => {
                return Err(Error::param(
                    "dimming_factor",
                    v.dimming.factor,
                    "VOOK codeword carries no data",
                ))
            }
            n => Some(n),
        },
        _ => None,
    };
    Ok(move |p: f64| slots.map_or(p, |n| vook_ber(p, n)))
}

/// Closed-form curves of a variant: `analytic` (plus `analytic_quadrature`
/// under noisy CSI) or `bound` under outdated CSI.
pub fn analytic_families(
    cfg: &ExperimentConfig,
    setup: &Setup,
    v: &Variant,
    diag: &mut NoisyDiagnostics,
) -> Result<Vec<Family>> {
    let finish = finisher(v)?;
    let n = setup.users();
    let per_point = |f: &mut dyn FnMut(&LinkParams, usize, f64) -> f64| -> Result<Vec<Vec<f64>>> {
        cfg.snr_db
            .iter()
            .map(|&snr| {
                let link = link_params(cfg, v, n, snr)?;
                Ok((0..n).map(|k| f(&link, k + 1, setup.gains[k])).collect())
            })
            .collect()
    };
    let exact = |ber| BerCurve::exact(cfg.snr_db.clone(), ber, Provenance::Analytic);

    match v.csi {
        CsiErrorModel::Perfect => {
            let ber = per_point(&mut |link, k, h| {
                chain_ber(k, |j, e| conditional_ber_perfect(link, j, h, e), &finish)
            })?;
            Ok(vec![Family::new(v, "analytic", exact(ber))])
        }
        CsiErrorModel::NoisyFixed { .. } | CsiErrorModel::NoisySnrDependent { .. } => {
            let fit = *QExpFit::standard();
            let mut methods = vec![(cfg.modes.noisy_method, "analytic")];
            if cfg.modes.noisy_method == NoisyMethod::ClosedForm {
                methods.push((NoisyMethod::Quadrature, "analytic_quadrature"));
            }
            let mut out = Vec::new();
            for (method, suffix) in methods {
                let ber = cfg
                    .snr_db
                    .iter()
                    .map(|&snr| {
                        let link = link_params(cfg, v, n, snr)?;
                        let var = v.csi.variance_at(snr);
                        if var == 0.0 {
                            return Ok((0..n)
                                .map(|k| {
                                    let h = setup.gains[k];
                                    chain_ber(
                                        k + 1,
                                        |j, e| conditional_ber_perfect(&link, j, h, e),
                                        &finish,
                                    )
                                })
                                .collect());
                        }
                        let model = NoisyCsi::new(var, fit, method)?;
                        Ok((0..n)
                            .map(|k| {
                                let h = setup.gains[k];
                                chain_ber(
                                    k + 1,
                                    |j, e| model.conditional(&link, j, h, e, diag),
                                    &finish,
                                )
                            })
                            .collect())
                    })
                    .collect::<Result<Vec<Vec<f64>>>>()?;
                out.push(Family::new(v, suffix, exact(ber)));
            }
            Ok(out)
        }
        CsiErrorModel::Outdated {
            max_speed,
            interval,
        } => {
            if !cfg.modes.bound {
                return Ok(Vec::new());
            }
            let dep = setup.deployment()?;
            let reach = max_speed * interval;
            let terms: Vec<(f64, f64)> = setup
                .positions
                .iter()
                .map(|p| {
                    let r = dep.radius_of(p);
                    let bound = worst_case_bound(dep, r, reach, cfg.modes.error_bound);
                    let gain = match cfg.modes.bound_gain {
                        BoundGain::Anchor => dep.gain_at_radius(r),
                        BoundGain::WorstCase => {
                            dep.gain_at_radius((r + reach).min(dep.radius_limit()))
                        }
                    };
                    (gain, bound)
                })
                .collect();
            let ber = per_point(&mut |link, k, _| {
                let (h, bound) = terms[k - 1];
                chain_ber(
                    k,
                    |j, e| conditional_ber_outdated(link, j, h, e, bound),
                    &finish,
                )
            })?;
            let curve = BerCurve::exact(cfg.snr_db.clone(), ber, Provenance::Bound);
            Ok(vec![Family::new(v, "bound", curve)])
        }
    }
}

/// Exact BER for perfect CSI without VOOK; `None` where no oracle applies.
pub fn oracle_family(cfg: &ExperimentConfig, setup: &Setup, v: &Variant) -> Result<Option<Family>> {
    if v.csi != CsiErrorModel::Perfect || v.dimming.scheme == DimmingScheme::Vook {
        return Ok(None);
    }
    let n = setup.users();
    let ber = cfg
        .snr_db
        .iter()
        .map(|&snr| {
            let link = link_params(cfg, v, n, snr)?;
            (0..n)
                .map(|k| {
                    let h = setup.gains[k];
                    exact_ber(k + 1, &link.alloc, h, h, cfg.responsivity, link.noise_std)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let curve = BerCurve::exact(cfg.snr_db.clone(), ber, Provenance::Oracle);
    Ok(Some(Family::new(v, "oracle", curve)))
}

pub fn trial_config(cfg: &ExperimentConfig, setup: &Setup, v: &Variant) -> Result<TrialConfig> {
    let mut tc = TrialConfig::new(setup.gains.clone(), v.rho, cfg.snr_db.clone());
    tc.total_power = cfg.total_power;
    tc.responsivity = cfg.responsivity;
    tc.csi = v.csi;
    tc.dimming = v.dimming;
    tc.block_trials = cfg.block_trials;
    if v.csi.is_outdated() {
        tc.mobility = Some(MobilitySetup {
            deployment: setup.deployment()?.clone(),
            mode: v.mobility,
            start: cfg.mobility.start,
        });
    }
    Ok(tc)
}

pub fn mc_family(
    cfg: &ExperimentConfig,
    setup: &Setup,
    v: &Variant,
    diag: &mut RunDiagnostics,
) -> Result<Family> {
    let tc = trial_config(cfg, setup, v)?;
    let run = run_trials(&tc, cfg.seed, cfg.trials)?;
    let family = Family::new(v, "monte_carlo", run.curve);
    let d = run.diagnostics;
    diag.mc_clamp_events += d.clamp_events;
    diag.mobility_epochs += d.epochs;
    diag.order_changes += d.order_changes;
    diag.unreliable
        .extend(d.unreliable.into_iter().map(|(snr, user)| UnreliablePoint {
            family: family.name.clone(),
            snr_db: snr,
            user,
        }));
    Ok(family)
}

/// Computes every family of the scenario, handing each to `sink` as soon
/// as it is ready.
pub fn compute_with(
    cfg: &ExperimentConfig,
    mut sink: impl FnMut(Family) -> Result<()>,
) -> Result<RunDiagnostics> {
    cfg.validate()?;
    let setup = Setup::new(cfg)?;
    let mut diag = RunDiagnostics::default();
    for v in variants(cfg)? {
        if cfg.modes.analytic || (cfg.modes.bound && v.csi.is_outdated()) {
            for f in analytic_families(cfg, &setup, &v, &mut diag.noisy)? {
                sink(f)?;
            }
        }
        if cfg.modes.oracle {
            if let Some(f) = oracle_family(cfg, &setup, &v)? {
                sink(f)?;
            }
        }
        if cfg.modes.mc {
            sink(mc_family(cfg, &setup, &v, &mut diag)?)?;
        }
    }
    Ok(diag)
}

/// All families in memory.
pub fn compute(cfg: &ExperimentConfig) -> Result<(Vec<Family>, RunDiagnostics)> {
    let mut out = Vec::new();
    let diag = compute_with(cfg, |f| {
        out.push(f);
        Ok(())
    })?;
    Ok((out, diag))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Incomplete,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub status: RunStatus,
    pub version: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub files: Vec<String>,
    pub wall_time_s: f64,
    pub diagnostics: RunDiagnostics,
    pub error: Option<String>,
}

/// Crate version with the source revision when it can be determined.
pub fn version_string() -> String {
    let rev = std::process::Command::new("git")
        .args([
            "-C",
            env!("CARGO_MANIFEST_DIR"),
            "describe",
            "--always",
            "--dirty",
        ])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into());
    format!("{}+{rev}", env!("CARGO_PKG_VERSION"))
}

fn write_metadata(dir: &Path, meta: &Metadata) -> Result<()> {
    let tmp = dir.join(format!("{METADATA_FILE}.tmp"));
    std::fs::write(&tmp, serde_json::to_string_pretty(meta)? + "\n")?;
    std::fs::rename(tmp, dir.join(METADATA_FILE))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub metadata: Metadata,
}

/// Validates, computes and writes `<family>.csv` files plus
/// `metadata.json` into `out_dir`. The metadata is written first with
/// status `incomplete` and rewritten once the run finishes or fails.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    std::fs::create_dir_all(out_dir)?;
    let mut meta = Metadata {
        status: RunStatus::Incomplete,
        version: version_string(),
        scenario: cfg.scenario,
        seed: cfg.seed,
        config: cfg.clone(),
        files: Vec::new(),
        wall_time_s: 0.0,
        diagnostics: RunDiagnostics::default(),
        error: None,
    };
    write_metadata(out_dir, &meta)?;

    let mut files = Vec::new();
    let result = compute_with(cfg, |family| {
        let name = format!("{}.csv", family.name);
        let path = out_dir.join(&name);
        write_curve_file(&path, &family.rows)?;
        files.push(path);
        meta.files.push(name);
        write_metadata(out_dir, &meta)
    });
    meta.wall_time_s = start.elapsed().as_secs_f64();
    match result {
        Ok(diag) => {
            meta.status = RunStatus::Complete;
            meta.diagnostics = diag;
            write_metadata(out_dir, &meta)?;
            Ok(RunOutput {
                dir: out_dir.to_path_buf(),
                files,
                metadata: meta,
            })
        }
        Err(e) => {
            meta.status = RunStatus::Failed;
            meta.error = Some(e.to_string());
            write_metadata(out_dir, &meta)?;
            Err(e)
        }
    }
}
