//! Deployment geometry, radio constants and channel synthesis.

mod channel;
mod config;

pub use channel::{
    path_loss, rician_channel, steering_vector, synthesize_block, synthesize_channels, ChannelSet, LinkClass, LinkMask,
    LinkStreams,
};
pub use config::ScenarioConfig;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in meters.
pub type Position = [f64; 3];

/// One value per link class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    /// BS → user.
    pub bu: f64,
    /// BS → Eve.
    pub be: f64,
    /// RIS → user.
    pub ru: f64,
    /// RIS → Eve.
    pub re: f64,
    /// BS → RIS.
    pub br: f64,
}

impl LinkParams {
    pub fn get(&self, class: LinkClass) -> f64 {
        match class {
            LinkClass::BsUser => self.bu,
            LinkClass::BsEve => self.be,
            LinkClass::RisUser => self.ru,
            LinkClass::RisEve => self.re,
            LinkClass::BsRis => self.br,
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        LinkParams {
            bu: f(self.bu),
            be: f(self.be),
            ru: f(self.ru),
            re: f(self.re),
            br: f(self.br),
        }
    }
}

/// Experiment geometry and radio parameters. All powers are linear watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub bs_positions: Vec<Position>,
    pub ris_positions: Vec<Position>,
    pub user_positions: Vec<Position>,
    pub eve_position: Position,
    /// Antennas per BS (M).
    pub antennas_per_bs: usize,
    /// Reflecting elements per RIS (N).
    pub elements_per_ris: usize,
    /// Per-BS transmit power budget.
    pub power_budget: Vec<f64>,
    /// Noise power at each user.
    pub noise_user: Vec<f64>,
    pub noise_eve: f64,
    /// Secrecy-rate weights, each in `[0, 1]`.
    pub weights: Vec<f64>,
    pub pathloss_exponents: LinkParams,
    /// Linear Rician K-factors.
    pub rician_factors: LinkParams,
    /// Linear path-loss gain at the reference distance.
    pub reference_gain: f64,
    /// Reference distance in meters.
    pub reference_distance: f64,
    pub antenna_spacing_over_wavelength: f64,
    /// Maximum number of RISs serving one user.
    pub r_assign: usize,
    /// 0 for continuous phases, otherwise a `2^bits`-point alphabet.
    pub phase_bits: u32,
    pub rng_seed: u64,
    /// Draw an independent RIS → Eve channel for every user index instead of
    /// one shared physical channel.
    pub eve_channel_per_user: bool,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl Scenario {
    /// The three-BS, two-RIS, three-user layout used for the headline
    /// experiments: M = 5, N = 50, 0 dBm per BS, −80 dBm noise.
    pub fn baseline() -> Self {
        Scenario {
            bs_positions: vec![[10.0, 0.0, 4.0], [50.0, 0.0, 4.0], [90.0, 0.0, 4.0]],
            ris_positions: vec![[30.0, 60.0, 8.0], [70.0, 60.0, 8.0]],
            user_positions: vec![[30.0, 50.0, 1.5], [35.0, 50.0, 1.5], [40.0, 50.0, 1.5]],
            eve_position: [35.0, 40.0, 1.5],
            antennas_per_bs: 5,
            elements_per_ris: 50,
            power_budget: vec![dbm_to_watts(0.0); 3],
            noise_user: vec![dbm_to_watts(-80.0); 3],
            noise_eve: dbm_to_watts(-80.0),
            weights: vec![1.0; 3],
            pathloss_exponents: LinkParams {
                bu: 3.5,
                be: 3.5,
                ru: 2.5,
                re: 2.5,
                br: 2.0,
            },
            rician_factors: LinkParams {
                bu: 0.0,
                be: 0.0,
                ru: 3.0,
                re: 3.0,
                br: 3.0,
            },
            reference_gain: db_to_linear(-30.0),
            reference_distance: 1.0,
            antenna_spacing_over_wavelength: 0.5,
            r_assign: 1,
            phase_bits: 0,
            rng_seed: 1,
            eve_channel_per_user: false,
        }
    }

    /// Number of BSs (B).
    pub fn num_bs(&self) -> usize {
        self.bs_positions.len()
    }

    /// Number of RISs (R).
    pub fn num_ris(&self) -> usize {
        self.ris_positions.len()
    }

    /// Number of users (K).
    pub fn num_users(&self) -> usize {
        self.user_positions.len()
    }

    /// Length of the stacked beamformer of one user (M·B).
    pub fn stacked_antennas(&self) -> usize {
        self.antennas_per_bs * self.num_bs()
    }

    /// Length of the phase vector μ (N·R + 1).
    pub fn phase_len(&self) -> usize {
        self.elements_per_ris * self.num_ris() + 1
    }

    /// Same scenario with every RIS removed.
    pub fn without_ris(&self) -> Self {
        let mut s = self.clone();
        s.ris_positions.clear();
        s.r_assign = 0;
        s
    }

    /// Sets a uniform per-BS power budget given in dBm.
    pub fn set_power_dbm(&mut self, dbm: f64) {
        let w = dbm_to_watts(dbm);
        self.power_budget = vec![w; self.num_bs()];
    }

    /// Places K users on the line `(30 + k, 50)` m, k = 1..K, resizing the
    /// per-user vectors (new users inherit the first user's noise and weight).
    pub fn set_num_users(&mut self, k: usize) {
        let z = self.user_positions.first().map(|p| p[2]).unwrap_or(1.5);
        let noise = self.noise_user.first().copied().unwrap_or(dbm_to_watts(-80.0));
        let weight = self.weights.first().copied().unwrap_or(1.0);
        self.user_positions = (1..=k).map(|i| [30.0 + i as f64, 50.0, z]).collect();
        self.noise_user = vec![noise; k];
        self.weights = vec![weight; k];
    }

    /// Moves the three-user cluster and Eve along the x axis: users at
    /// `(x-5, 50)`, `(x, 50)`, `(x+5, 50)` and Eve at `(x, 40)`.
    pub fn set_user_line_x(&mut self, x: f64) {
        let z = self.user_positions.first().map(|p| p[2]).unwrap_or(1.5);
        let noise = self.noise_user.first().copied().unwrap_or(dbm_to_watts(-80.0));
        let weight = self.weights.first().copied().unwrap_or(1.0);
        self.user_positions = vec![[x - 5.0, 50.0, z], [x, 50.0, z], [x + 5.0, 50.0, z]];
        self.noise_user = vec![noise; 3];
        self.weights = vec![weight; 3];
        self.eve_position = [x, 40.0, self.eve_position[2]];
    }

    /// Replaces the RISs with `count` surfaces at `(10 + 20(r-1), 60, z)` m.
    pub fn set_ris_line(&mut self, count: usize) {
        let z = self.ris_positions.first().map(|p| p[2]).unwrap_or(8.0);
        self.ris_positions = (0..count).map(|r| [10.0 + 20.0 * r as f64, 60.0, z]).collect();
        self.r_assign = self.r_assign.clamp(1.min(count), count);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        let k = self.num_users();
        if k == 0 {
            return bad("at least one user is required".into());
        }
        if self.power_budget.len() != self.num_bs() {
            return bad(format!(
                "{} power budgets for {} BSs",
                self.power_budget.len(),
                self.num_bs()
            ));
        }
        if self.noise_user.len() != k || self.weights.len() != k {
            return bad(format!(
                "per-user vectors must have {k} entries (noise {}, weights {})",
                self.noise_user.len(),
                self.weights.len()
            ));
        }
        if self.power_budget.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return bad("power budgets must be finite and non-negative".into());
        }
        if self
            .noise_user
            .iter()
            .chain(std::iter::once(&self.noise_eve))
            .any(|n| !n.is_finite() || *n <= 0.0)
        {
            return bad("noise powers must be strictly positive".into());
        }
        if self.weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return bad("weights must lie in [0, 1]".into());
        }
        if self.num_ris() > 0 && !(1..=self.num_ris()).contains(&self.r_assign) {
            return bad(format!(
                "r_assign = {} must lie in 1..={}",
                self.r_assign,
                self.num_ris()
            ));
        }
        if self.reference_gain <= 0.0 || self.reference_distance <= 0.0 {
            return bad("reference gain and distance must be positive".into());
        }
        if self.antenna_spacing_over_wavelength <= 0.0 {
            return bad("antenna spacing must be positive".into());
        }
        if self.phase_bits > 16 {
            return bad("phase_bits above 16 is not supported".into());
        }
        let neg_k = [
            self.rician_factors.bu,
            self.rician_factors.be,
            self.rician_factors.ru,
            self.rician_factors.re,
            self.rician_factors.br,
        ];
        if neg_k.iter().any(|k| *k < 0.0) {
            return bad("Rician factors must be non-negative".into());
        }
        Ok(())
    }

    /// Loads a scenario from a JSON configuration file.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(s)?;
        cfg.into_scenario()
    }
}
