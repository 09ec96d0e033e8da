//! Parameter sweeps over independent (value, seed) cells.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{run_algorithm, AoOutcome, RunConfig};
use crate::error::{Error, Result};
use crate::par;
use crate::scenario::{synthesize_channels, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Uniform per-BS budget in dBm.
    PowerDbm,
    /// Elements per RIS.
    RisElements,
    /// x coordinate of the user cluster and Eve.
    UserLineX,
    /// Number of users on the line `(30 + k, 50)`.
    NumUsers,
    RAssign,
    PhaseBits,
}

impl SweepParam {
    pub const ALL: [SweepParam; 6] = [
        SweepParam::PowerDbm,
        SweepParam::RisElements,
        SweepParam::UserLineX,
        SweepParam::NumUsers,
        SweepParam::RAssign,
        SweepParam::PhaseBits,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::PowerDbm => "power_dbm",
            SweepParam::RisElements => "ris_elements",
            SweepParam::UserLineX => "user_line_x",
            SweepParam::NumUsers => "num_users",
            SweepParam::RAssign => "r_assign",
            SweepParam::PhaseBits => "phase_bits",
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, SweepParam::PowerDbm | SweepParam::UserLineX)
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<&str> = SweepParam::ALL.iter().map(|p| p.name()).collect();
            Error::Config(format!(
                "unknown sweep parameter `{s}` (expected one of {})",
                names.join(", ")
            ))
        })
    }
}

/// Applies one sweep value to a scenario.
pub fn apply_sweep_value(scenario: &mut Scenario, param: SweepParam, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::Config(format!("{} value must be finite", param.name())));
    }
    if param.is_integer() && (value < 0.0 || value.fract() != 0.0) {
        return Err(Error::Config(format!(
            "{} takes non-negative integers, got {value}",
            param.name()
        )));
    }
    match param {
        SweepParam::PowerDbm => scenario.set_power_dbm(value),
        SweepParam::RisElements => scenario.elements_per_ris = value as usize,
        SweepParam::UserLineX => scenario.set_user_line_x(value),
        SweepParam::NumUsers => scenario.set_num_users(value as usize),
        SweepParam::RAssign => scenario.r_assign = value as usize,
        SweepParam::PhaseBits => scenario.phase_bits = value as u32,
    }
    scenario.validate()
}

/// One sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param_value: f64,
    pub seed: u64,
    pub final_wssr: f64,
    pub final_wssr_clamped: f64,
    pub iters: usize,
    pub total_ms: f64,
}

/// Runs one `(value, seed)` cell and returns its row with the full outcome.
pub fn run_sweep_cell(base: &RunConfig, param: SweepParam, value: f64, seed: u64) -> Result<(SweepRow, AoOutcome)> {
    let mut scenario = base.scenario.clone();
    apply_sweep_value(&mut scenario, param, value)?;
    scenario.rng_seed = seed;
    let channels = synthesize_channels(&scenario)?;
    let out = run_algorithm(&scenario, &channels, &base.solver)?;
    let row = SweepRow {
        param_value: value,
        seed,
        final_wssr: out.trace.final_wssr(),
        final_wssr_clamped: out.trace.final_clamped(),
        iters: out.iterations(),
        total_ms: out.trace.total_ms(),
    };
    Ok((row, out))
}

/// Runs the configured algorithm on every `(value, seed)` cell, rows sorted by
/// `(value, seed)`.
pub fn run_sweep(base: &RunConfig, param: SweepParam, values: &[f64], seeds: &[u64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() || seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one value and one seed".into()));
    }
    let mut cells: Vec<(f64, u64)> = values
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for &(v, _) in &cells {
        apply_sweep_value(&mut base.scenario.clone(), param, v)?;
    }
    let rows = par::map(base.solver.mode, &cells, |&(value, seed)| {
        run_sweep_cell(base, param, value, seed).map(|(row, _)| row)
    });
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        for p in SweepParam::ALL {
            assert_eq!(p.name().parse::<SweepParam>().unwrap(), p);
        }
        assert!("bogus".parse::<SweepParam>().is_err());
    }

    #[test]
    fn integer_params_reject_fractions() {
        let mut s = Scenario::baseline();
        assert!(apply_sweep_value(&mut s, SweepParam::NumUsers, 2.5).is_err());
        apply_sweep_value(&mut s, SweepParam::NumUsers, 4.0).unwrap();
        assert_eq!(s.num_users(), 4);
        assert!(apply_sweep_value(&mut s, SweepParam::RAssign, 3.0).is_err());
    }

    #[test]
    fn single_cell() {
        let mut cfg = RunConfig::baseline();
        cfg.scenario.elements_per_ris = 4;
        cfg.scenario.antennas_per_bs = 2;
        let rows = run_sweep(&cfg, SweepParam::PowerDbm, &[0.0], &[7]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].seed, 7);
    }
}
