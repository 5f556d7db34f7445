use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::analytic::NoisyMethod;
use crate::channel::{
    anchor_positions, channel_gain, fov_radius, LinkGeometry, Point3, ReceiverFrontEnd,
    DEFAULT_TABLE_DEPTH,
};
use crate::link::{DimmingConfig, DimmingScheme};
use crate::mc::{
    BoundMode, CsiErrorModel, MobilityMode, Room, StartMode, DEFAULT_KAPPA, MIN_TRIALS,
};
use crate::{Error, Result};

/// Gains of the three reference users, weakest first.
pub const TABLE_GAINS: [f64; 3] = [0.2835e-4, 0.4787e-4, 0.5272e-4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Fig3,
    Fig4,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    Fig10,
    Fig11,
    Custom,
}

impl Scenario {
    pub const ALL: [Scenario; 9] = [
        Scenario::Fig3,
        Scenario::Fig4,
        Scenario::Fig6,
        Scenario::Fig7,
        Scenario::Fig8,
        Scenario::Fig9,
        Scenario::Fig10,
        Scenario::Fig11,
        Scenario::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Fig3 => "fig3",
            Scenario::Fig4 => "fig4",
            Scenario::Fig6 => "fig6",
            Scenario::Fig7 => "fig7",
            Scenario::Fig8 => "fig8",
            Scenario::Fig9 => "fig9",
            Scenario::Fig10 => "fig10",
            Scenario::Fig11 => "fig11",
            Scenario::Custom => "custom",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::Fig3 => "average and per-user BER against rho at 110, 115 and 120 dB",
            Scenario::Fig4 => "perfect CSI, analytic against Monte Carlo",
            Scenario::Fig6 => "noisy CSI with fixed and SNR-dependent error variance",
            Scenario::Fig7 => {
                "noisy CSI at variance 2e-6, closed form and quadrature against Monte Carlo"
            }
            Scenario::Fig8 => {
                "outdated CSI under group mobility (ordering preserved), bound against Monte Carlo"
            }
            Scenario::Fig9 => "outdated CSI under independent mobility (ordering may change)",
            Scenario::Fig10 => "analog dimming sweep",
            Scenario::Fig11 => "VOOK digital dimming sweep",
            Scenario::Custom => "single curve family taken from the config as written",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scenario `{s}`")))
    }
}

/// How users are placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UserSpec {
    /// Users at the radii that produce the listed gains on the table plane.
    Anchors { gains: Vec<f64> },
    /// Photodiode positions in room coordinates.
    Positions { positions: Vec<[f64; 3]> },
    /// `count` users uniform over the FOV disc on the table plane.
    Random { count: usize },
}

/// Which curves to produce and how bounds are formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Modes {
    pub analytic: bool,
    pub mc: bool,
    pub oracle: bool,
    pub bound: bool,
    pub error_bound: BoundMode,
    pub bound_gain: BoundGain,
    pub noisy_method: NoisyMethod,
}

impl Default for Modes {
    fn default() -> Self {
        Modes {
            analytic: true,
            mc: true,
            oracle: false,
            bound: true,
            error_bound: BoundMode::GainDifference,
            bound_gain: BoundGain::Anchor,
            noisy_method: NoisyMethod::ClosedForm,
        }
    }
}

/// Gain plugged into the outdated-CSI bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundGain {
    /// The user's gain at its start position (the stale estimate).
    #[default]
    Anchor,
    /// The smallest gain reachable at maximum speed.
    WorstCase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilitySpec {
    pub mode: MobilityMode,
    pub start: StartMode,
}

impl Default for MobilitySpec {
    fn default() -> Self {
        MobilitySpec {
            mode: MobilityMode::Group,
            start: StartMode::Fixed,
        }
    }
}

/// Grids swept by the multi-family scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    /// fig3
    pub rho: Vec<f64>,
    /// fig10 and fig11
    pub dimming: Vec<f64>,
    /// fig6, SNR-dependent family
    pub kappa: f64,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep {
            rho: tenths(1, 9),
            dimming: tenths(1, 10),
            kappa: DEFAULT_KAPPA,
        }
    }
}

fn tenths(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(|i| f64::from(i) / 10.0).collect()
}

/// SNR grid from `start` to `stop` inclusive.
pub fn snr_range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    /// Bits per user and grid point for Monte Carlo curves.
    pub trials: u64,
    pub block_trials: u64,
    pub rho: f64,
    pub snr_db: Vec<f64>,
    pub total_power: f64,
    pub responsivity: f64,
    pub room: Room,
    pub led: [f64; 3],
    /// Vertical LED-to-table distance for anchors and random users.
    pub depth: f64,
    pub frontend: ReceiverFrontEnd,
    pub users: UserSpec,
    pub csi: CsiErrorModel,
    pub dimming: DimmingConfig,
    pub mobility: MobilitySpec,
    pub modes: Modes,
    pub sweep: Sweep,
}

impl ExperimentConfig {
    /// Parameter set of a scenario before any user overrides.
    pub fn preset(scenario: Scenario) -> Self {
        let mut cfg = ExperimentConfig {
            scenario,
            seed: 1,
            trials: 1_000_000,
            block_trials: 1_000,
            rho: 0.3,
            snr_db: snr_range(105.0, 130.0, 2.5),
            total_power: 0.25,
            responsivity: 1.0,
            room: Room::default(),
            led: [2.0, 2.0, 3.0],
            depth: DEFAULT_TABLE_DEPTH,
            frontend: ReceiverFrontEnd::nominal(),
            users: UserSpec::Anchors {
                gains: TABLE_GAINS.to_vec(),
            },
            csi: CsiErrorModel::Perfect,
            dimming: DimmingConfig::default(),
            mobility: MobilitySpec::default(),
            modes: Modes::default(),
            sweep: Sweep::default(),
        };
        match scenario {
            Scenario::Fig3 => {
                cfg.snr_db = vec![110.0, 115.0, 120.0];
                cfg.modes.mc = false;
            }
            Scenario::Fig4 | Scenario::Custom | Scenario::Fig10 | Scenario::Fig11 => {}
            Scenario::Fig6 | Scenario::Fig7 => {
                cfg.csi = CsiErrorModel::NoisyFixed { variance: 2e-6 };
            }
            Scenario::Fig8 | Scenario::Fig9 => {
                cfg.csi = CsiErrorModel::Outdated {
                    max_speed: 2.0,
                    interval: 1.0,
                };
                cfg.mobility.mode = if scenario == Scenario::Fig8 {
                    MobilityMode::Group
                } else {
                    MobilityMode::Independent
                };
            }
        }
        cfg
    }

    /// Reads a TOML file. Keys it sets are laid over the preset named by
    /// its `scenario` key (default `custom`).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_str_as(text, None)
    }

    /// Like [`from_toml_str`](Self::from_toml_str), but `scenario`, when
    /// given, replaces the file's own `scenario` key and picks the preset
    /// the file is merged over.
    pub fn from_toml_str_as(text: &str, scenario: Option<Scenario>) -> Result<Self> {
        let mut user: toml::Table = text.parse()?;
        let scenario = match (scenario, user.get("scenario")) {
            (Some(s), _) => s,
            (None, Some(toml::Value::String(s))) => s.parse()?,
            (None, Some(other)) => {
                return Err(Error::InvalidConfig(format!(
                    "scenario must be a string, got {other}"
                )))
            }
            (None, None) => Scenario::Custom,
        };
        user.insert("scenario".into(), scenario.as_str().into());
        let mut base = toml::Table::try_from(ExperimentConfig::preset(scenario))
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        merge(&mut base, user);
        let cfg: ExperimentConfig = base.try_into()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_file_as(path: &Path, scenario: Option<Scenario>) -> Result<Self> {
        Self::from_toml_str_as(&std::fs::read_to_string(path)?, scenario)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_empty() {
            return Err(Error::InvalidConfig("SNR grid is empty".into()));
        }
        if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::param("snr_db", *s, "must be finite"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::param("rho", self.rho, "must lie in (0, 1)"));
        }
        if self.modes.mc && self.trials < MIN_TRIALS {
            return Err(Error::InvalidConfig(format!(
                "trial budget {} is below the minimum of {MIN_TRIALS}",
                self.trials
            )));
        }
        if self.block_trials == 0 {
            return Err(Error::InvalidConfig("block_trials must be positive".into()));
        }
        if !(self.total_power > 0.0) {
            return Err(Error::param(
                "total_power",
                self.total_power,
                "must be positive",
            ));
        }
        self.frontend.validate()?;
        self.csi.validate()?;
        if !(0.0..=1.0).contains(&self.dimming.factor) {
            return Err(Error::param(
                "dimming_factor",
                self.dimming.factor,
                "must lie in [0, 1]",
            ));
        }
        match self.scenario {
            Scenario::Fig3 if self.sweep.rho.iter().any(|r| !(*r > 0.0 && *r < 1.0)) => {
                return Err(Error::InvalidConfig(
                    "rho sweep values must lie in (0, 1)".into(),
                ))
            }
            Scenario::Fig3 if self.sweep.rho.is_empty() => {
                return Err(Error::InvalidConfig("rho sweep is empty".into()))
            }
            Scenario::Fig10 | Scenario::Fig11 if self.sweep.dimming.is_empty() => {
                return Err(Error::InvalidConfig("dimming sweep is empty".into()))
            }
            Scenario::Fig10 if self.sweep.dimming.iter().any(|g| !(*g > 0.0 && *g <= 1.0)) => {
                return Err(Error::InvalidConfig(
                    "analog dimming levels must lie in (0, 1]".into(),
                ))
            }
            _ => {}
        }
        let users = self.resolve_users()?;
        if users.gains.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::InvalidConfig(
                "every user must sit inside the LED beam and the photodiode FOV".into(),
            ));
        }
        Ok(())
    }

    pub fn led_point(&self) -> Point3 {
        Point3::new(self.led[0], self.led[1], self.led[2])
    }

    /// Positions and true gains of all users, in configuration order.
    pub fn resolve_users(&self) -> Result<ResolvedUsers> {
        let led = self.led_point();
        match &self.users {
            UserSpec::Anchors { gains } => {
                if gains.is_empty() {
                    return Err(Error::InvalidConfig("anchor gain list is empty".into()));
                }
                let positions = anchor_positions(gains, &self.frontend, led, self.depth)?;
                Ok(ResolvedUsers {
                    positions,
                    gains: gains.clone(),
                })
            }
            UserSpec::Positions { positions } => {
                if positions.is_empty() {
                    return Err(Error::InvalidConfig("position list is empty".into()));
                }
                let positions: Vec<Point3> = positions
                    .iter()
                    .map(|p| Point3::new(p[0], p[1], p[2]))
                    .collect();
                let gains = positions
                    .iter()
                    .map(|p| channel_gain(&LinkGeometry::between(led, *p)?, &self.frontend))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ResolvedUsers { positions, gains })
            }
            UserSpec::Random { count } => {
                if *count == 0 {
                    return Err(Error::InvalidConfig(
                        "random user count must be positive".into(),
                    ));
                }
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed ^ 0x7573_6572);
                let limit = 0.999 * fov_radius(&self.frontend, self.depth);
                let positions: Vec<Point3> = (0..*count)
                    .map(|_| {
                        let r = limit * rng.random::<f64>().sqrt();
                        let th = std::f64::consts::TAU * rng.random::<f64>();
                        Point3::new(
                            led.x + r * th.cos(),
                            led.y + r * th.sin(),
                            led.z - self.depth,
                        )
                    })
                    .collect();
                let gains = positions
                    .iter()
                    .map(|p| channel_gain(&LinkGeometry::between(led, *p)?, &self.frontend))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ResolvedUsers { positions, gains })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedUsers {
    pub positions: Vec<Point3>,
    pub gains: Vec<f64>,
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o))
                // Tagged enums are replaced whole so stale fields of another
                // variant cannot leak in.
                if !o.contains_key("kind") =>
            {
                merge(b, o)
            }
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Command-line overrides; every `Some` replaces the config value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub scenario: Option<Scenario>,
    pub snr_db: Option<Vec<f64>>,
    pub rho: Option<f64>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub csi: Option<CsiErrorModel>,
    pub dimming: Option<DimmingConfig>,
}

impl Overrides {
    pub fn apply(&self, mut cfg: ExperimentConfig) -> ExperimentConfig {
        if let Some(s) = self.scenario {
            if s != cfg.scenario {
                // A new scenario brings its own preset; keep the user's
                // placement and run controls.
                let old = cfg;
                cfg = ExperimentConfig::preset(s);
                cfg.users = old.users;
                cfg.seed = old.seed;
                cfg.trials = old.trials;
            }
        }
        if let Some(v) = &self.snr_db {
            cfg.snr_db = v.clone();
        }
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.csi {
            cfg.csi = v;
        }
        if let Some(v) = self.dimming {
            cfg.dimming = v;
        }
        cfg
    }
}

/// Parses `105:130:2.5` (inclusive range) or `110,115,120`.
pub fn parse_snr_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidConfig(format!("cannot parse SNR grid `{s}`"));
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        return Ok(snr_range(start, stop, step));
    }
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

/// Parses `perfect`, `noisy-fixed:VAR`, `noisy-snr:KAPPA` or
/// `outdated:SPEED:INTERVAL`.
pub fn parse_csi(s: &str) -> Result<CsiErrorModel> {
    let bad = || Error::InvalidConfig(format!("cannot parse CSI model `{s}`"));
    let mut parts = s.trim().split(':');
    let kind = parts.next().unwrap_or_default();
    let nums: Vec<f64> = parts
        .map(|p| p.parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let model = match (kind, nums.as_slice()) {
        ("perfect", []) => CsiErrorModel::Perfect,
        ("noisy-fixed", [v]) => CsiErrorModel::NoisyFixed { variance: *v },
        ("noisy-fixed", []) => CsiErrorModel::NoisyFixed { variance: 2e-6 },
        ("noisy-snr", [k]) => CsiErrorModel::NoisySnrDependent { kappa: *k },
        ("noisy-snr", []) => CsiErrorModel::NoisySnrDependent {
            kappa: DEFAULT_KAPPA,
        },
        ("outdated", [v, t]) => CsiErrorModel::Outdated {
            max_speed: *v,
            interval: *t,
        },
        ("outdated", []) => CsiErrorModel::Outdated {
            max_speed: 2.0,
            interval: 1.0,
        },
        _ => return Err(bad()),
    };
    model.validate()?;
    Ok(model)
}

/// Parses `none`, `analog:FACTOR` or `vook:FACTOR`.
pub fn parse_dimming(s: &str) -> Result<DimmingConfig> {
    let bad = || Error::InvalidConfig(format!("cannot parse dimming `{s}`"));
    match s.trim().split_once(':') {
        None if s.trim() == "none" => Ok(DimmingConfig::default()),
        Some(("analog", f)) => {
            DimmingConfig::new(DimmingScheme::Analog, f.parse().map_err(|_| bad())?)
        }
        Some(("vook", f)) => DimmingConfig::new(DimmingScheme::Vook, f.parse().map_err(|_| bad())?),
        _ => Err(bad()),
    }
}
