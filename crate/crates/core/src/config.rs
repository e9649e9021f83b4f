//! System parameters and the builders that turn them into geometry,
//! frequency grids and link budgets.

use alloc::vec::Vec;

use crate::channel::{subcarrier_frequencies, ChannelRealization, Geometry};
use crate::joint::AoConfig;
use crate::linalg::CMatrix;
use crate::metrics::LinkBudget;
use crate::stack::{SimGeometry, SimStack};
use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Centre frequency `f0`, Hz.
    pub center_frequency: f64,
    /// Total bandwidth `B`, Hz.
    pub bandwidth: f64,
    pub subcarriers: usize,
    /// Users `K`, also the number of feed antennas `S`.
    pub users: usize,
    pub meta_cols: usize,
    pub meta_rows: usize,
    pub layers: usize,
    /// Stack thickness `D_T`, m.
    pub thickness: f64,
    /// Atom pitch `r_T`, m.
    pub atom_pitch: f64,
    /// Atom area `S_T`, m^2.
    pub atom_area: f64,
    pub bs_height: f64,
    pub user_range: f64,
    pub user_spacing: f64,
    pub scatterers: usize,
    pub bs_gain_dbi: f64,
    pub ue_gain_dbi: f64,
    pub noise_psd_dbm_hz: f64,
    /// Transmit power used by single runs and the sum-rate sweep, dBm.
    pub transmit_power_dbm: f64,
    /// Subcarriers per user for single runs and the BER sweep.
    pub k_c: usize,
    /// AO iteration budget `I_AO`.
    pub ao_iterations: usize,
    pub restarts: usize,
    /// Monte-Carlo channel realizations per sweep point.
    pub runs: usize,
    /// BPSK trials per realization and power point.
    pub ber_trials: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl SystemConfig {
    /// Full-scale parameters: 28 GHz, 40 MHz, 16 subcarriers, 4 users,
    /// 10 x 10 atoms on 7 layers.
    pub fn paper() -> Self {
        let f0 = 28e9;
        let pitch = SPEED_OF_LIGHT / (2.0 * f0);
        Self {
            center_frequency: f0,
            bandwidth: 40e6,
            subcarriers: 16,
            users: 4,
            meta_cols: 10,
            meta_rows: 10,
            layers: 7,
            thickness: 0.05,
            atom_pitch: pitch,
            atom_area: pitch * pitch,
            bs_height: 10.0,
            user_range: 250.0,
            user_spacing: 30.0,
            scatterers: 100,
            bs_gain_dbi: 3.0,
            ue_gain_dbi: 0.0,
            noise_psd_dbm_hz: -112.0,
            transmit_power_dbm: 10.0,
            k_c: 10,
            ao_iterations: 50,
            restarts: 1,
            runs: 100,
            ber_trials: 2000,
        }
    }

    /// Laptop-sized variant: 4 x 4 atoms, 3 layers, 10 runs.
    pub fn desk() -> Self {
        Self {
            meta_cols: 4,
            meta_rows: 4,
            layers: 3,
            runs: 10,
            ..Self::paper()
        }
    }

    pub fn atoms(&self) -> usize {
        self.meta_cols * self.meta_rows
    }

    pub fn validate(&self) -> Result<()> {
        if self.subcarriers == 0 || self.users == 0 || self.runs == 0 || self.ber_trials == 0 {
            return Err(Error::Config(
                "subcarriers, users, runs and ber_trials must be positive".into(),
            ));
        }
        if self.users > 32 {
            return Err(Error::Config("at most 32 users are supported".into()));
        }
        for (what, v) in [
            ("center_frequency", self.center_frequency),
            ("bandwidth", self.bandwidth),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain { what, value: v });
            }
        }
        if self.bandwidth >= 2.0 * self.center_frequency {
            return Err(Error::Config("bandwidth must stay below 2 f0".into()));
        }
        for (what, v) in [
            ("bs_gain_dbi", self.bs_gain_dbi),
            ("ue_gain_dbi", self.ue_gain_dbi),
            ("noise_psd_dbm_hz", self.noise_psd_dbm_hz),
            ("transmit_power_dbm", self.transmit_power_dbm),
        ] {
            if !v.is_finite() {
                return Err(Error::Domain { what, value: v });
            }
        }
        self.geometry().validate()?;
        self.sim_geometry().validate()
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            bs_height: self.bs_height,
            user_range: self.user_range,
            user_spacing: self.user_spacing,
            users: self.users,
            meta_cols: self.meta_cols,
            meta_rows: self.meta_rows,
            atom_pitch: self.atom_pitch,
            bs_gain_dbi: self.bs_gain_dbi,
            ue_gain_dbi: self.ue_gain_dbi,
            carrier: self.center_frequency,
            los_blocked: false,
        }
    }

    pub fn sim_geometry(&self) -> SimGeometry {
        SimGeometry {
            layers: self.layers,
            meta_cols: self.meta_cols,
            meta_rows: self.meta_rows,
            atom_pitch: self.atom_pitch,
            atom_area: self.atom_area,
            thickness: self.thickness,
            feeds: self.users,
        }
    }

    pub fn frequencies(&self) -> Result<Vec<f64>> {
        subcarrier_frequencies(self.center_frequency, self.bandwidth, self.subcarriers)
    }

    pub fn link_budget(&self, transmit_power_dbm: f64) -> Result<LinkBudget> {
        LinkBudget::new(
            transmit_power_dbm,
            self.noise_psd_dbm_hz,
            self.bandwidth,
            self.subcarriers,
        )
    }

    pub fn ao_config(&self, k_c: usize) -> AoConfig {
        AoConfig {
            iterations: self.ao_iterations,
            restarts: self.restarts,
            ..AoConfig::new(k_c)
        }
    }

    pub fn build_stack(&self) -> Result<SimStack> {
        self.validate()?;
        SimStack::build(&self.sim_geometry(), &self.frequencies()?)
    }

    pub fn channel(&self, seed: u64) -> Result<ChannelRealization> {
        ChannelRealization::generate(&self.geometry(), &self.frequencies()?, self.scatterers, seed)
    }
}

/// A built stack with one channel realization.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub stack: SimStack,
    pub channel: Vec<CMatrix>,
}

impl Scenario {
    pub fn new(config: &SystemConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            stack: config.build_stack()?,
            channel: config.channel(seed)?.matrices,
        })
    }
}
