//! JSON configuration format for [`Scenario`].
//!
//! Quantities that have a natural logarithmic form accept either a linear key
//! or the same key with a `_dbm` (absolute power) or `_db` (ratio) suffix,
//! never both. Power budgets may be a scalar (applied to every BS) or a per-BS
//! array; user noise may be a scalar or a per-user array.
//!
//! ```json
//! {
//!   "bs_positions": [[10, 0, 4], [50, 0, 4], [90, 0, 4]],
//!   "ris_positions": [[30, 60, 8], [70, 60, 8]],
//!   "user_positions": [[30, 50, 1.5], [35, 50, 1.5], [40, 50, 1.5]],
//!   "eve_position": [35, 40, 1.5],
//!   "antennas_per_bs": 5,
//!   "elements_per_ris": 50,
//!   "power_budget_dbm": 0,
//!   "noise_user_dbm": -80,
//!   "noise_eve_dbm": -80,
//!   "pathloss_exponents": {"bu": 3.5, "be": 3.5, "ru": 2.5, "re": 2.5, "br": 2.0},
//!   "rician_factors": {"bu": 0, "be": 0, "ru": 3, "re": 3, "br": 3},
//!   "reference_path_loss_db": -30
//! }
//! ```

use serde::{Deserialize, Serialize};

use super::{db_to_linear, dbm_to_watts, LinkParams, Position, Scenario};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn expand(&self, n: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            OneOrMany::One(x) => Ok(vec![*x; n]),
            OneOrMany::Many(v) if v.len() == n => Ok(v.clone()),
            OneOrMany::Many(v) => Err(Error::Config(format!("{what}: expected {n} values, got {}", v.len()))),
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> OneOrMany {
        match self {
            OneOrMany::One(x) => OneOrMany::One(f(*x)),
            OneOrMany::Many(v) => OneOrMany::Many(v.iter().map(|x| f(*x)).collect()),
        }
    }
}

fn pick<T: Clone>(linear: &Option<T>, log: &Option<T>, convert: impl Fn(&T) -> T, key: &str) -> Result<Option<T>> {
    match (linear, log) {
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "both `{key}` and its logarithmic form were given"
        ))),
        (Some(v), None) => Ok(Some(v.clone())),
        (None, Some(v)) => Ok(Some(convert(v))),
        (None, None) => Ok(None),
    }
}

/// On-disk scenario description. Missing optional fields fall back to the
/// baseline values.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub bs_positions: Vec<Position>,
    #[serde(default)]
    pub ris_positions: Vec<Position>,
    pub user_positions: Vec<Position>,
    pub eve_position: Position,
    pub antennas_per_bs: usize,
    #[serde(default)]
    pub elements_per_ris: usize,

    pub power_budget: Option<OneOrMany>,
    pub power_budget_dbm: Option<OneOrMany>,
    pub noise_user: Option<OneOrMany>,
    pub noise_user_dbm: Option<OneOrMany>,
    pub noise_eve: Option<f64>,
    pub noise_eve_dbm: Option<f64>,
    pub weights: Option<Vec<f64>>,

    pub pathloss_exponents: Option<LinkParams>,
    pub rician_factors: Option<LinkParams>,
    pub rician_factors_db: Option<LinkParams>,
    pub reference_path_loss: Option<f64>,
    pub reference_path_loss_db: Option<f64>,
    pub reference_distance: Option<f64>,
    pub antenna_spacing_over_wavelength: Option<f64>,

    pub r_assign: Option<usize>,
    pub phase_bits: Option<u32>,
    pub rng_seed: Option<u64>,
    #[serde(default)]
    pub eve_channel_per_user: bool,

    /// Solver settings, interpreted by the driver.
    pub solver: Option<serde_json::Value>,
}

impl ScenarioConfig {
    pub fn into_scenario(self) -> Result<Scenario> {
        let base = Scenario::baseline();
        let b = self.bs_positions.len();
        let k = self.user_positions.len();

        let power = pick(
            &self.power_budget,
            &self.power_budget_dbm,
            |v| v.map(dbm_to_watts),
            "power_budget",
        )?
        .unwrap_or(OneOrMany::One(base.power_budget[0]))
        .expand(b, "power_budget")?;
        let noise_user = pick(
            &self.noise_user,
            &self.noise_user_dbm,
            |v| v.map(dbm_to_watts),
            "noise_user",
        )?
        .unwrap_or(OneOrMany::One(base.noise_eve))
        .expand(k, "noise_user")?;
        let noise_eve =
            pick(&self.noise_eve, &self.noise_eve_dbm, |v| dbm_to_watts(*v), "noise_eve")?.unwrap_or(base.noise_eve);
        let rician = pick(
            &self.rician_factors,
            &self.rician_factors_db,
            |p| p.map(db_to_linear),
            "rician_factors",
        )?
        .unwrap_or(base.rician_factors);
        let gain = pick(
            &self.reference_path_loss,
            &self.reference_path_loss_db,
            |v| db_to_linear(*v),
            "reference_path_loss",
        )?
        .unwrap_or(base.reference_gain);

        let r = self.ris_positions.len();
        let scenario = Scenario {
            weights: self.weights.unwrap_or_else(|| vec![1.0; k]),
            r_assign: self.r_assign.unwrap_or(if r > 0 { 1 } else { 0 }),
            bs_positions: self.bs_positions,
            ris_positions: self.ris_positions,
            user_positions: self.user_positions,
            eve_position: self.eve_position,
            antennas_per_bs: self.antennas_per_bs,
            elements_per_ris: self.elements_per_ris,
            power_budget: power,
            noise_user,
            noise_eve,
            pathloss_exponents: self.pathloss_exponents.unwrap_or(base.pathloss_exponents),
            rician_factors: rician,
            reference_gain: gain,
            reference_distance: self.reference_distance.unwrap_or(base.reference_distance),
            antenna_spacing_over_wavelength: self
                .antenna_spacing_over_wavelength
                .unwrap_or(base.antenna_spacing_over_wavelength),
            phase_bits: self.phase_bits.unwrap_or(0),
            rng_seed: self.rng_seed.unwrap_or(base.rng_seed),
            eve_channel_per_user: self.eve_channel_per_user,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASELINE: &str = r#"{
        "bs_positions": [[10, 0, 4], [50, 0, 4], [90, 0, 4]],
        "ris_positions": [[30, 60, 8], [70, 60, 8]],
        "user_positions": [[30, 50, 1.5], [35, 50, 1.5], [40, 50, 1.5]],
        "eve_position": [35, 40, 1.5],
        "antennas_per_bs": 5,
        "elements_per_ris": 50,
        "power_budget_dbm": 0,
        "noise_user_dbm": -80,
        "noise_eve_dbm": -80,
        "pathloss_exponents": {"bu": 3.5, "be": 3.5, "ru": 2.5, "re": 2.5, "br": 2.0},
        "rician_factors": {"bu": 0, "be": 0, "ru": 3, "re": 3, "br": 3},
        "reference_path_loss_db": -30
    }"#;

    fn close(a: &Scenario, b: &Scenario) -> bool {
        let rel = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs());
        a.bs_positions == b.bs_positions
            && a.ris_positions == b.ris_positions
            && a.user_positions == b.user_positions
            && a.power_budget.iter().zip(&b.power_budget).all(|(x, y)| rel(*x, *y))
            && a.noise_user.iter().zip(&b.noise_user).all(|(x, y)| rel(*x, *y))
            && rel(a.noise_eve, b.noise_eve)
            && rel(a.reference_gain, b.reference_gain)
            && a.rician_factors == b.rician_factors
            && a.pathloss_exponents == b.pathloss_exponents
    }

    #[test]
    fn parses_baseline_with_db_suffixes() {
        let s = Scenario::from_json_str(BASELINE).unwrap();
        assert!(close(&s, &Scenario::baseline()));
        assert_eq!(s.r_assign, 1);
    }

    #[test]
    fn shipped_baseline_config_matches() {
        let text = include_str!("../../../../configs/baseline.json");
        let s = Scenario::from_json_str(text).unwrap();
        assert!(close(&s, &Scenario::baseline()));
    }

    #[test]
    fn rejects_double_specification() {
        let text = BASELINE.replace(
            "\"power_budget_dbm\": 0,",
            "\"power_budget_dbm\": 0, \"power_budget\": 0.001,",
        );
        assert!(Scenario::from_json_str(&text).is_err());
    }

    #[test]
    fn per_bs_power_array_length_checked() {
        let text = BASELINE.replace("\"power_budget_dbm\": 0,", "\"power_budget\": [0.001, 0.002],");
        assert!(Scenario::from_json_str(&text).is_err());
        let text = BASELINE.replace("\"power_budget_dbm\": 0,", "\"power_budget\": [0.001, 0.002, 0.003],");
        let s = Scenario::from_json_str(&text).unwrap();
        assert_eq!(s.power_budget, vec![0.001, 0.002, 0.003]);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = BASELINE.replace("\"antennas_per_bs\"", "\"antennas\": 3, \"antennas_per_bs\"");
        assert!(Scenario::from_json_str(&text).is_err());
    }
}
