//! Experiment configuration files.
//!
//! Files are TOML with dotted namespaces (`system.layers = 3`,
//! `solver.inner = "pccp"`). Every key is optional and overrides the chosen
//! profile; unknown keys are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sim_ofdma_core::config::SystemConfig;
use sim_ofdma_core::joint::{AoConfig, ZStep};
use sim_ofdma_core::phase::{InnerSolver, PccpOptions};
use sim_ofdma_core::SPEED_OF_LIGHT;

use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Paper,
    Desk,
}

impl Profile {
    pub fn system(self) -> SystemConfig {
        match self {
            Profile::Paper => SystemConfig::paper(),
            Profile::Desk => SystemConfig::desk(),
        }
    }
}

impl FromStr for Profile {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, RunError> {
        match s {
            "paper" => Ok(Profile::Paper),
            "desk" => Ok(Profile::Desk),
            _ => Err(RunError::Config(format!("unknown profile `{s}` (paper, desk)"))),
        }
    }
}

/// Compared schemes. `joint` is the proposed design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Joint,
    Greedy,
    Random,
    SimSdma,
    SimOfdma,
    DigitalZf,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Joint,
        Scheme::Greedy,
        Scheme::Random,
        Scheme::SimSdma,
        Scheme::SimOfdma,
        Scheme::DigitalZf,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Joint => "joint",
            Scheme::Greedy => "greedy",
            Scheme::Random => "random",
            Scheme::SimSdma => "sim-sdma",
            Scheme::SimOfdma => "sim-ofdma",
            Scheme::DigitalZf => "digital-zf",
        }
    }

    /// Z-step that realizes this scheme, `None` for the digital reference.
    pub fn zstep(self) -> Option<ZStep> {
        match self {
            Scheme::Joint => Some(ZStep::Milp),
            Scheme::Greedy => Some(ZStep::Greedy),
            Scheme::Random => Some(ZStep::Random),
            Scheme::SimSdma => Some(ZStep::FixedSdma),
            Scheme::SimOfdma => Some(ZStep::FixedOfdma),
            Scheme::DigitalZf => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, RunError> {
        if s == "proposed" {
            return Ok(Scheme::Joint);
        }
        Scheme::ALL
            .into_iter()
            .find(|x| x.label() == s)
            .ok_or_else(|| RunError::Config(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Inner {
    #[default]
    Cd,
    Pccp,
}

impl FromStr for Inner {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, RunError> {
        match s {
            "cd" => Ok(Inner::Cd),
            "pccp" => Ok(Inner::Pccp),
            _ => Err(RunError::Config(format!("unknown inner solver `{s}` (cd, pccp)"))),
        }
    }
}

pub fn parse_zstep(s: &str) -> Result<ZStep, RunError> {
    match s {
        "milp" => Ok(ZStep::Milp),
        "random" => Ok(ZStep::Random),
        "greedy" => Ok(ZStep::Greedy),
        "ofdma" | "fixed-ofdma" => Ok(ZStep::FixedOfdma),
        "sdma" | "fixed-sdma" => Ok(ZStep::FixedSdma),
        _ => Err(RunError::Config(format!(
            "unknown z-step `{s}` (milp, random, greedy, ofdma, sdma)"
        ))),
    }
}

macro_rules! system_overrides {
    ($($field:ident: $ty:ty),* $(,)?) => {
        /// `system.*` keys.
        #[derive(Debug, Clone, Default, PartialEq, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct SystemFile {
            $(pub $field: Option<$ty>,)*
        }

        impl SystemFile {
            fn apply(&self, s: &mut SystemConfig) {
                $(if let Some(v) = &self.$field {
                    s.$field = v.clone();
                })*
            }
        }

        /// Fully resolved `system.*` table as written to metadata files.
        #[derive(Debug, Clone, PartialEq, Serialize)]
        pub struct SystemTable {
            $(pub $field: $ty,)*
        }

        impl From<&SystemConfig> for SystemTable {
            fn from(s: &SystemConfig) -> Self {
                Self { $($field: s.$field.clone(),)* }
            }
        }
    };
}

system_overrides! {
    center_frequency: f64,
    bandwidth: f64,
    subcarriers: usize,
    users: usize,
    meta_cols: usize,
    meta_rows: usize,
    layers: usize,
    thickness: f64,
    atom_pitch: f64,
    atom_area: f64,
    bs_height: f64,
    user_range: f64,
    user_spacing: f64,
    scatterers: usize,
    bs_gain_dbi: f64,
    ue_gain_dbi: f64,
    noise_psd_dbm_hz: f64,
    transmit_power_dbm: f64,
    k_c: usize,
    ao_iterations: usize,
    restarts: usize,
    runs: usize,
    ber_trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    /// `K_c` values of the NMSE sweep.
    pub nmse_k_c: Vec<usize>,
    /// Transmit powers of the BER sweep, dBm.
    pub power_dbm: Vec<f64>,
    /// `K_c` values of the sum-rate sweep; empty means `N_c / K ..= N_c`.
    pub sumrate_k_c: Vec<usize>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            nmse_k_c: vec![4, 6, 8, 10, 12],
            power_dbm: (0..9).map(|i| -30.0 + 5.0 * i as f64).collect(),
            sumrate_k_c: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PccpFile {
    pub lambda0: f64,
    pub growth: f64,
    pub lambda_max: f64,
    pub tol: f64,
    pub max_iterations: usize,
    pub inner_sweeps: usize,
}

impl Default for PccpFile {
    fn default() -> Self {
        let o = PccpOptions::default();
        Self {
            lambda0: o.lambda0,
            growth: o.growth,
            lambda_max: o.lambda_max,
            tol: o.tol,
            max_iterations: o.max_iterations,
            inner_sweeps: o.inner_sweeps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub inner: Inner,
    /// Coordinate-descent passes per layer visit.
    pub cd_sweeps: usize,
    /// Z-step of the `single` verb.
    pub zstep: String,
    pub greedy_threshold: f64,
    pub plateau_tol: f64,
    pub plateau_window: usize,
    pub pccp: PccpFile,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let ao = AoConfig::new(1);
        Self {
            inner: Inner::Cd,
            cd_sweeps: 3,
            zstep: "milp".into(),
            greedy_threshold: ao.greedy_threshold,
            plateau_tol: ao.plateau_tol,
            plateau_window: ao.plateau_window,
            pccp: PccpFile::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    profile: Option<Profile>,
    seed: Option<u64>,
    schemes: Option<Vec<String>>,
    #[serde(default)]
    system: SystemFile,
    sweep: Option<SweepSpec>,
    solver: Option<SolverSpec>,
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub seed: u64,
    pub system: SystemConfig,
    pub sweep: SweepSpec,
    pub solver: SolverSpec,
    /// Restricts every sweep to these schemes; empty keeps each sweep's default set.
    pub schemes: Vec<Scheme>,
}

/// Command-line overrides, applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub profile: Option<Profile>,
    pub seed: Option<u64>,
    pub schemes: Option<Vec<Scheme>>,
    pub inner: Option<Inner>,
    pub zstep: Option<String>,
}

impl ExperimentConfig {
    pub fn from_profile(profile: Profile) -> Self {
        Self {
            profile,
            seed: 1,
            system: profile.system(),
            sweep: SweepSpec::default(),
            solver: SolverSpec::default(),
            schemes: Vec::new(),
        }
    }

    /// Parses a config text. The profile comes from `overrides`, then the
    /// file, then defaults to `paper`.
    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self, RunError> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| RunError::Config(e.message().to_string()))?;
        let profile = overrides.profile.or(file.profile).unwrap_or_default();
        let mut cfg = Self::from_profile(profile);
        file.system.apply(&mut cfg.system);
        if file.system.center_frequency.is_some() {
            let pitch = SPEED_OF_LIGHT / (2.0 * cfg.system.center_frequency);
            if file.system.atom_pitch.is_none() {
                cfg.system.atom_pitch = pitch;
            }
        }
        if file.system.atom_area.is_none() {
            cfg.system.atom_area = cfg.system.atom_pitch * cfg.system.atom_pitch;
        }
        if let Some(seed) = file.seed {
            cfg.seed = seed;
        }
        if let Some(s) = file.sweep {
            cfg.sweep = s;
        }
        if let Some(s) = file.solver {
            cfg.solver = s;
        }
        if let Some(list) = file.schemes {
            cfg.schemes = list.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
        }
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, RunError> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| RunError::Config(format!("{}: {e}", p.display())))?;
                Self::parse(&text, overrides)
            }
            None => Self::parse("", overrides),
        }
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(s) = &o.schemes {
            self.schemes = s.clone();
        }
        if let Some(i) = o.inner {
            self.solver.inner = i;
        }
        if let Some(z) = &o.zstep {
            self.solver.zstep = z.clone();
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        self.system
            .validate()
            .map_err(|e| RunError::Config(e.to_string()))?;
        parse_zstep(&self.solver.zstep)?;
        self.pccp()
            .validate()
            .map_err(|e| RunError::Config(e.to_string()))?;
        if self.solver.cd_sweeps == 0 {
            return Err(RunError::Config("solver.cd_sweeps must be positive".into()));
        }
        if self.sweep.power_dbm.iter().any(|p| !p.is_finite()) {
            return Err(RunError::Config("sweep.power_dbm must be finite".into()));
        }
        Ok(())
    }

    fn pccp(&self) -> PccpOptions {
        let p = &self.solver.pccp;
        PccpOptions {
            lambda0: p.lambda0,
            growth: p.growth,
            lambda_max: p.lambda_max,
            tol: p.tol,
            max_iterations: p.max_iterations,
            inner_sweeps: p.inner_sweeps,
        }
    }

    /// AO settings for a scheme at `k_c`.
    pub fn ao_config(&self, k_c: usize, zstep: ZStep) -> AoConfig {
        let mut ao = self.system.ao_config(k_c);
        ao.zstep = zstep;
        ao.inner = match self.solver.inner {
            Inner::Cd => InnerSolver::CoordinateDescent {
                sweeps: self.solver.cd_sweeps,
            },
            Inner::Pccp => InnerSolver::Pccp(self.pccp()),
        };
        ao.greedy_threshold = self.solver.greedy_threshold;
        ao.plateau_tol = self.solver.plateau_tol;
        ao.plateau_window = self.solver.plateau_window;
        ao
    }

    pub fn zstep(&self) -> ZStep {
        parse_zstep(&self.solver.zstep).unwrap_or_default()
    }

    /// Schemes of a sweep: the sweep's defaults, narrowed by the configured list.
    pub fn schemes_for(&self, defaults: &[Scheme]) -> Result<Vec<Scheme>, RunError> {
        if self.schemes.is_empty() {
            return Ok(defaults.to_vec());
        }
        if let Some(s) = self.schemes.iter().find(|s| !defaults.contains(s)) {
            return Err(RunError::Config(format!(
                "scheme `{s}` does not apply to this sweep"
            )));
        }
        Ok(defaults
            .iter()
            .copied()
            .filter(|s| self.schemes.contains(s))
            .collect())
    }

    /// Resolved configuration as TOML; also the input of [`Self::hash`].
    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct Resolved<'a> {
            profile: Profile,
            seed: u64,
            schemes: Vec<&'static str>,
            system: SystemTable,
            sweep: &'a SweepSpec,
            solver: &'a SolverSpec,
        }
        let r = Resolved {
            profile: self.profile,
            seed: self.seed,
            schemes: self.schemes.iter().map(|s| s.label()).collect(),
            system: SystemTable::from(&self.system),
            sweep: &self.sweep,
            solver: &self.solver,
        };
        toml::to_string(&r).expect("resolved config serializes")
    }

    /// SHA-256 of the resolved configuration, hex.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        format!("{:x}", Sha256::digest(self.to_toml().as_bytes()))
    }
}
