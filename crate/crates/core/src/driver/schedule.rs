//! Two-timescale operation: the RIS assignment is chosen once per large
//! coherence block from full CSI; each small block then re-optimizes W and μ
//! using only the channels of the selected RIS links.

use rand::seq::index::sample;

use super::{
    algorithm1_from, algorithm2, driver_rng, initialize_for, AoOutcome, PhaseUpdate, SolverConfig, RANDOM_L_STREAM,
};
use crate::assign_lcr::AssignmentMatrix;
use crate::error::{Error, Result};
use crate::network::AggregateChannels;
use crate::scenario::{synthesize_block, synthesize_channels, Scenario};

#[derive(Debug, Clone)]
pub struct ScheduleOutcome {
    pub assignment: AssignmentMatrix,
    /// Assignment run on the large block; `None` when `L` was supplied.
    pub large: Option<AoOutcome>,
    /// One run per small block.
    pub blocks: Vec<AoOutcome>,
    /// Every small-block channel set had zero reflection channels on the
    /// unselected links, i.e. those links were never drawn nor read.
    pub unselected_untouched: bool,
}

impl ScheduleOutcome {
    pub fn mean_block_wssr(&self) -> f64 {
        if self.blocks.is_empty() {
            return 0.0;
        }
        self.blocks.iter().map(|b| b.trace.final_wssr()).sum::<f64>() / self.blocks.len() as f64
    }

    pub fn mean_block_clamped(&self) -> f64 {
        if self.blocks.is_empty() {
            return 0.0;
        }
        self.blocks.iter().map(|b| b.trace.final_clamped()).sum::<f64>() / self.blocks.len() as f64
    }
}

/// Uniformly random assignment with exactly `r_assign` RISs per user.
pub fn random_assignment(scenario: &Scenario) -> AssignmentMatrix {
    let mut rng = driver_rng(scenario.rng_seed, RANDOM_L_STREAM);
    let (rn, kn) = (scenario.num_ris(), scenario.num_users());
    let cols: Vec<Vec<bool>> = (0..kn)
        .map(|_| {
            let mut col = vec![false; rn];
            for r in sample(&mut rng, rn, scenario.r_assign.min(rn)) {
                col[r] = true;
            }
            col
        })
        .collect();
    AssignmentMatrix::from_columns(&cols)
}

/// Large block: full channels and [`algorithm2`] fix `L`. Small blocks
/// `0..n_small_blocks`: masked channels (block 0 shares the large block's
/// small-scale draw), [`algorithm1_from`] warm-started from the previous block.
pub fn run_coherence_schedule(
    scenario: &Scenario,
    config: &SolverConfig,
    n_small_blocks: usize,
) -> Result<ScheduleOutcome> {
    let channels = synthesize_channels(scenario)?;
    let large = algorithm2(scenario, &channels, config)?;
    let l = large.assignment.clone().expect("assignment run returns L");
    let start = (large.w.clone(), large.mu.clone());
    let mut out = run_blocks(scenario, config, n_small_blocks, &l, Some(start))?;
    out.large = Some(large);
    Ok(out)
}

/// Small blocks only, under a given assignment; the first block is
/// initialized as in [`super::algorithm1`].
pub fn run_schedule_with_assignment(
    scenario: &Scenario,
    config: &SolverConfig,
    n_small_blocks: usize,
    l: &AssignmentMatrix,
) -> Result<ScheduleOutcome> {
    run_blocks(scenario, config, n_small_blocks, l, None)
}

fn run_blocks(
    scenario: &Scenario,
    config: &SolverConfig,
    n_small_blocks: usize,
    l: &AssignmentMatrix,
    mut start: Option<(crate::network::BeamformerSet, crate::network::PhaseVector)>,
) -> Result<ScheduleOutcome> {
    if n_small_blocks == 0 {
        return Err(Error::Config("at least one small block is required".into()));
    }
    let mask = l.to_mask();
    let mut blocks = Vec::with_capacity(n_small_blocks);
    let mut untouched = true;
    for block in 0..n_small_blocks {
        let channels = synthesize_block(scenario, block as u32, Some(&mask))?;
        for (r, row) in mask.selected.iter().enumerate() {
            for (k, &sel) in row.iter().enumerate() {
                if !sel {
                    let zero = |v: &crate::CVector| v.iter().all(|z| z.norm() == 0.0);
                    untouched &= zero(&channels.ris_user[r][k]) && zero(&channels.ris_eve[r][k]);
                }
            }
        }
        let agg = AggregateChannels::new(&channels, scenario);
        let (w0, mu0) = match start.take() {
            Some(s) => s,
            None => initialize_for(scenario, &agg),
        };
        let run = algorithm1_from(scenario, &agg, config, w0, mu0, PhaseUpdate::Optimize)?;
        start = Some((run.w.clone(), run.mu.clone()));
        blocks.push(AoOutcome {
            assignment: Some(l.clone()),
            ..run
        });
    }
    Ok(ScheduleOutcome {
        assignment: l.clone(),
        large: None,
        blocks,
        unselected_untouched: untouched,
    })
}
