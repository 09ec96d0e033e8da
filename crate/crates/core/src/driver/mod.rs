//! Alternating-optimization loops, the two-timescale schedule and sweeps.

mod output;
mod schedule;
mod sweep;

pub use output::{
    format_f64, iteration_trace_csv, result_json, schedule_csv, sweep_csv, trace_csv, write_result_json,
    write_schedule_csv, write_sweep_csv, write_trace_csv,
};
pub use schedule::{random_assignment, run_coherence_schedule, run_schedule_with_assignment, ScheduleOutcome};
pub use sweep::{apply_sweep_value, run_sweep, run_sweep_cell, SweepParam, SweepRow};

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assign_lcr::{
    apply_assignment, build_assignment_problem, lift, round_assignment, solve_lcr_sdp, AssignmentMatrix, SdpOptions,
};
use crate::bf_sca::{build_bf_surrogate, solve_bf_qp, BfQpOptions};
use crate::error::{Error, Result};
use crate::network::{
    virtual_wssr, wssr, AggregateChannels, AssignmentChannels, BeamformerSet, PhaseVector, WssrReport,
};
use crate::par::ExecMode;
use crate::phase_admm::{admm_solve, build_phase_quadratic, project_discrete, AdmmOptions};
use crate::scenario::{ChannelSet, Scenario, ScenarioConfig};
use crate::{CVector, Complex64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Beamforming and phases only.
    #[default]
    Ao,
    /// Beamforming, phases and RIS assignment.
    Assign,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ao" => Ok(Algorithm::Ao),
            "assign" => Ok(Algorithm::Assign),
            other => Err(Error::Config(format!(
                "unknown algorithm `{other}` (expected ao or assign)"
            ))),
        }
    }
}

/// Solver settings; read from the `solver` object of a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Stop once the objective gains at most this much (nats) in one iteration.
    pub epsilon: f64,
    pub max_ao_iters: usize,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
    pub admm_tol: f64,
    pub admm_max_iter: usize,
    /// ADMM penalty as a multiple of `λ_max(A)`.
    pub admm_penalty_factor: f64,
    pub sdp_tol: f64,
    /// Record wall-clock times in traces. Off by default so that outputs are
    /// byte-identical across runs.
    pub record_timings: bool,
    #[serde(skip)]
    pub mode: ExecMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            algorithm: Algorithm::Ao,
            epsilon: 1e-3,
            max_ao_iters: 50,
            qp_tol: BfQpOptions::default().tol,
            qp_max_iter: BfQpOptions::default().max_iter,
            admm_tol: AdmmOptions::default().tol,
            admm_max_iter: AdmmOptions::default().max_iter,
            admm_penalty_factor: AdmmOptions::default().penalty_factor,
            sdp_tol: SdpOptions::default().tol,
            record_timings: false,
            mode: ExecMode::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("qp_tol", self.qp_tol),
            ("admm_tol", self.admm_tol),
            ("sdp_tol", self.sdp_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.admm_penalty_factor <= 2.0 {
            return Err(Error::Config(format!(
                "admm_penalty_factor must exceed 2, got {}",
                self.admm_penalty_factor
            )));
        }
        if self.max_ao_iters == 0 || self.qp_max_iter == 0 || self.admm_max_iter == 0 {
            return Err(Error::Config("iteration caps must be at least 1".into()));
        }
        Ok(())
    }

    fn qp_options(&self) -> BfQpOptions {
        BfQpOptions {
            tol: self.qp_tol,
            max_iter: self.qp_max_iter,
        }
    }

    fn admm_options(&self) -> AdmmOptions {
        AdmmOptions {
            penalty_factor: self.admm_penalty_factor,
            tol: self.admm_tol,
            max_iter: self.admm_max_iter,
        }
    }

    fn sdp_options(&self) -> SdpOptions {
        SdpOptions {
            tol: self.sdp_tol,
            ..SdpOptions::default()
        }
    }
}

/// Scenario plus solver settings, as loaded from one configuration file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub solver: SolverConfig,
}

impl RunConfig {
    pub fn baseline() -> Self {
        RunConfig {
            scenario: Scenario::baseline(),
            solver: SolverConfig::default(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let mut cfg: ScenarioConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        let solver = match cfg.solver.take() {
            Some(v) => serde_json::from_value(v).map_err(|e| Error::Config(format!("solver: {e}")))?,
            None => SolverConfig::default(),
        };
        let solver: SolverConfig = solver;
        solver.validate()?;
        Ok(RunConfig {
            scenario: cfg.into_scenario()?,
            solver,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }
}

/// One completed AO iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub wssr: f64,
    pub wssr_clamped: f64,
    pub rates: Vec<f64>,
    pub bs_power: Vec<f64>,
    pub admm_iters: usize,
    pub qp_iters: usize,
    /// Largest assignment-relaxation gap bound this iteration (0 without an
    /// assignment step).
    pub sdp_gap: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IterationTrace {
    /// Objective at the initial point.
    pub initial: Option<WssrReport>,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn initial_wssr(&self) -> f64 {
        self.initial.as_ref().map(|r| r.objective).unwrap_or(0.0)
    }

    pub fn final_wssr(&self) -> f64 {
        self.records
            .last()
            .map(|r| r.wssr)
            .unwrap_or_else(|| self.initial_wssr())
    }

    pub fn final_clamped(&self) -> f64 {
        self.records
            .last()
            .map(|r| r.wssr_clamped)
            .unwrap_or_else(|| self.initial.as_ref().map(|r| r.clamped).unwrap_or(0.0))
    }

    pub fn total_ms(&self) -> f64 {
        self.records.iter().map(|r| r.wall_ms).sum()
    }

    /// Largest single-iteration decrease of the objective, including the step
    /// from the initial point.
    pub fn max_decrease(&self) -> f64 {
        let mut prev = self.initial_wssr();
        let mut worst: f64 = 0.0;
        for r in &self.records {
            worst = worst.max(prev - r.wssr);
            prev = r.wssr;
        }
        worst
    }
}

/// Final state of an AO run.
#[derive(Debug, Clone)]
pub struct AoOutcome {
    pub w: BeamformerSet,
    pub mu: PhaseVector,
    pub assignment: Option<AssignmentMatrix>,
    pub trace: IterationTrace,
}

impl AoOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Stream tags for driver-side randomness, disjoint from channel streams.
pub(crate) const INIT_STREAM: u64 = 15 << 60;
pub(crate) const RANDOM_L_STREAM: u64 = 14 << 60;

pub(crate) fn driver_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Rescales each BS block so that BS `b` transmits exactly `budgets[b]`
/// (blocks with no energy stay zero).
pub fn scale_to_budgets(w: &mut BeamformerSet, budgets: &[f64]) {
    let m = w.antennas_per_bs();
    for (b, cap) in budgets.iter().enumerate() {
        let p = w.bs_power(b);
        let s = if p > 0.0 { (cap / p).sqrt() } else { 0.0 };
        for k in 0..w.num_users() {
            w.user_mut(k).rows_mut(b * m, m).scale_mut(s);
        }
    }
}

/// Random phases (last entry 1) and per-user matched filters `h̃_kᴴ μ0`,
/// scaled so every BS spends its full budget.
pub fn initialize(
    scenario: &Scenario,
    aggregates: &AggregateChannels,
    rng: &mut ChaCha8Rng,
) -> (BeamformerSet, PhaseVector) {
    let mu = PhaseVector::random(aggregates.phase_len() - 1, rng);
    let w = aggregates.h_user.iter().map(|h| h.adjoint() * mu.as_vector()).collect();
    let mut w = BeamformerSet::from_vectors(w, scenario.antennas_per_bs).expect("matched filters have stacked length");
    scale_to_budgets(&mut w, &scenario.power_budget);
    (w, mu)
}

/// Initialization used by [`algorithm1`] and [`algorithm2`] for a scenario.
pub fn initialize_for(scenario: &Scenario, aggregates: &AggregateChannels) -> (BeamformerSet, PhaseVector) {
    let mut rng = driver_rng(scenario.rng_seed, INIT_STREAM);
    initialize(scenario, aggregates, &mut rng)
}

/// How the phase block is treated by the AO loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseUpdate {
    Optimize,
    /// Keep μ as given; only beamformers are optimized.
    Fixed,
}

struct StepStats {
    qp_iters: usize,
    admm_iters: usize,
}

fn update_w(
    scenario: &Scenario,
    agg: &AggregateChannels,
    w: &BeamformerSet,
    mu: &PhaseVector,
    config: &SolverConfig,
) -> Result<(BeamformerSet, usize)> {
    let sur = build_bf_surrogate(agg, w, mu, &scenario.weights);
    let sol = solve_bf_qp(&sur, &scenario.power_budget, &config.qp_options())?;
    // Guard against round-off: never accept a worse true objective.
    let before = wssr(&scenario.weights, agg, w, mu).objective;
    let after = wssr(&scenario.weights, agg, &sol.w, mu).objective;
    if after < before {
        return Ok((w.clone(), sol.iterations));
    }
    Ok((sol.w, sol.iterations))
}

fn update_mu(
    scenario: &Scenario,
    agg: &AggregateChannels,
    w: &BeamformerSet,
    mu: &PhaseVector,
    config: &SolverConfig,
) -> Result<(PhaseVector, usize)> {
    if mu.reflect_len() == 0 {
        return Ok((mu.clone(), 0));
    }
    let q = build_phase_quadratic(agg, w, mu, &scenario.weights);
    let res = admm_solve(&q, mu, &config.admm_options())?;
    if scenario.phase_bits == 0 {
        return Ok((res.mu, res.iterations));
    }
    let snapped = project_discrete(&res.mu, scenario.phase_bits);
    let before = wssr(&scenario.weights, agg, w, mu).objective;
    let after = wssr(&scenario.weights, agg, w, &snapped).objective;
    Ok((if after >= before { snapped } else { mu.clone() }, res.iterations))
}

fn record(
    iter: usize,
    report: WssrReport,
    w: &BeamformerSet,
    stats: StepStats,
    sdp_gap: f64,
    started: Instant,
    config: &SolverConfig,
) -> IterationRecord {
    IterationRecord {
        iter,
        wssr: report.objective,
        wssr_clamped: report.clamped,
        rates: report.per_user,
        bs_power: w.bs_powers(),
        admm_iters: stats.admm_iters,
        qp_iters: stats.qp_iters,
        sdp_gap,
        wall_ms: if config.record_timings {
            started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        },
    }
}

fn aborted(iteration: usize, source: Error, trace: &IterationTrace) -> Error {
    Error::Aborted {
        iteration,
        source: Box::new(source),
        partial: Box::new(trace.clone()),
    }
}

/// Alternates beamforming and phase updates from `(w0, mu0)` on fixed
/// aggregates until the per-iteration gain falls to `epsilon`.
pub fn algorithm1_from(
    scenario: &Scenario,
    agg: &AggregateChannels,
    config: &SolverConfig,
    w0: BeamformerSet,
    mu0: PhaseVector,
    phases: PhaseUpdate,
) -> Result<AoOutcome> {
    config.validate()?;
    let mut w = w0;
    let mut mu = if scenario.phase_bits > 0 && phases == PhaseUpdate::Optimize {
        project_discrete(&mu0, scenario.phase_bits)
    } else {
        mu0
    };
    let initial = wssr(&scenario.weights, agg, &w, &mu);
    let mut prev = initial.objective;
    let mut trace = IterationTrace {
        initial: Some(initial),
        ..Default::default()
    };
    for iter in 1..=config.max_ao_iters {
        let started = Instant::now();
        let (w_next, qp_iters) = update_w(scenario, agg, &w, &mu, config).map_err(|e| aborted(iter, e, &trace))?;
        w = w_next;
        let admm_iters = if phases == PhaseUpdate::Optimize {
            let (mu_next, it) = update_mu(scenario, agg, &w, &mu, config).map_err(|e| aborted(iter, e, &trace))?;
            mu = mu_next;
            it
        } else {
            0
        };
        let report = wssr(&scenario.weights, agg, &w, &mu);
        let gain = report.objective - prev;
        prev = report.objective;
        let stats = StepStats { qp_iters, admm_iters };
        trace
            .records
            .push(record(iter, report, &w, stats, 0.0, started, config));
        if gain <= config.epsilon {
            trace.converged = true;
            break;
        }
    }
    Ok(AoOutcome {
        w,
        mu,
        assignment: None,
        trace,
    })
}

/// Beamforming/phase AO on a channel realization: initialize, then alternate W and μ.
pub fn algorithm1(scenario: &Scenario, channels: &ChannelSet, config: &SolverConfig) -> Result<AoOutcome> {
    let agg = AggregateChannels::new(channels, scenario);
    let (w0, mu0) = initialize_for(scenario, &agg);
    algorithm1_from(scenario, &agg, config, w0, mu0, PhaseUpdate::Optimize)
}

/// Beamforming-only optimization under the random initial phases.
pub fn beamforming_only(scenario: &Scenario, channels: &ChannelSet, config: &SolverConfig) -> Result<AoOutcome> {
    let agg = AggregateChannels::new(channels, scenario);
    let (w0, mu0) = initialize_for(scenario, &agg);
    let mu0 = if scenario.phase_bits > 0 {
        project_discrete(&mu0, scenario.phase_bits)
    } else {
        mu0
    };
    algorithm1_from(scenario, &agg, config, w0, mu0, PhaseUpdate::Fixed)
}

/// Solves the relaxed assignment at the current `(W, μ)` and rounds it.
/// Returns the candidate and the largest gap bound.
pub fn assignment_step(
    scenario: &Scenario,
    asg: &AssignmentChannels,
    w: &BeamformerSet,
    current: &AssignmentMatrix,
    config: &SolverConfig,
) -> Result<(AssignmentMatrix, f64)> {
    let u_t = (0..scenario.num_users()).map(|k| lift(&current.lifted(k))).collect();
    let prob = build_assignment_problem(asg, w, &scenario.weights, scenario.r_assign, u_t)?;
    let sols = solve_lcr_sdp(&prob, &config.sdp_options(), config.mode)?;
    let gap = sols.iter().map(|s| s.gap).fold(0.0, f64::max);
    let cols: Vec<Vec<bool>> = sols
        .iter()
        .map(|s| round_assignment(&s.u, scenario.r_assign).1)
        .collect();
    Ok((AssignmentMatrix::from_columns(&cols), gap))
}

/// Assignment AO: alternates W, μ and the RIS assignment `L`.
///
/// The assignment starts at all-ones with `(W, μ)` initialized on the full
/// channels. Each iteration updates W and μ on the masked channels, then
/// solves the relaxed assignment from the full-channel aggregates. The first
/// feasible candidate replaces an infeasible `L`; afterwards a candidate is
/// accepted only if it does not lower the objective. When every user may use
/// every RIS the assignment step is skipped and the run reduces to
/// [`algorithm1`].
pub fn algorithm2(scenario: &Scenario, channels: &ChannelSet, config: &SolverConfig) -> Result<AoOutcome> {
    config.validate()?;
    let (rn, kn) = (scenario.num_ris(), scenario.num_users());
    if rn == 0 {
        return Err(Error::InvalidScenario(
            "the assignment algorithm needs at least one RIS".into(),
        ));
    }
    if scenario.r_assign >= rn {
        let mut out = algorithm1(scenario, channels, config)?;
        out.assignment = Some(AssignmentMatrix::all_ones(rn, kn));
        return Ok(out);
    }
    let full = AggregateChannels::new(channels, scenario);
    let (mut w, mut mu) = initialize_for(scenario, &full);
    if scenario.phase_bits > 0 {
        mu = project_discrete(&mu, scenario.phase_bits);
    }
    let mut l = AssignmentMatrix::all_ones(rn, kn);
    let mut agg = full;
    let initial = wssr(&scenario.weights, &agg, &w, &mu);
    let mut prev = initial.objective;
    let mut trace = IterationTrace {
        initial: Some(initial),
        ..Default::default()
    };
    for iter in 1..=config.max_ao_iters {
        let started = Instant::now();
        let (w_next, qp_iters) = update_w(scenario, &agg, &w, &mu, config).map_err(|e| aborted(iter, e, &trace))?;
        w = w_next;
        let (mu_next, admm_iters) = update_mu(scenario, &agg, &w, &mu, config).map_err(|e| aborted(iter, e, &trace))?;
        mu = mu_next;

        let asg = AssignmentChannels::new(channels, scenario, &mu);
        let (cand, gap) = assignment_step(scenario, &asg, &w, &l, config).map_err(|e| aborted(iter, e, &trace))?;
        let accept = if !l.is_feasible(scenario.r_assign) {
            true
        } else {
            let now = virtual_wssr(&scenario.weights, &asg, &w, &l.lifted_all()).objective;
            let next = virtual_wssr(&scenario.weights, &asg, &w, &cand.lifted_all()).objective;
            next >= now
        };
        if accept && cand != l {
            l = cand;
            agg = AggregateChannels::new(&apply_assignment(channels, &l), scenario);
        }

        let report = wssr(&scenario.weights, &agg, &w, &mu);
        let gain = report.objective - prev;
        prev = report.objective;
        let stats = StepStats { qp_iters, admm_iters };
        trace
            .records
            .push(record(iter, report, &w, stats, gap, started, config));
        if iter > 1 && gain <= config.epsilon {
            trace.converged = true;
            break;
        }
    }
    Ok(AoOutcome {
        w,
        mu,
        assignment: Some(l),
        trace,
    })
}

/// Runs the configured algorithm.
pub fn run_algorithm(scenario: &Scenario, channels: &ChannelSet, config: &SolverConfig) -> Result<AoOutcome> {
    match config.algorithm {
        Algorithm::Ao => algorithm1(scenario, channels, config),
        Algorithm::Assign => algorithm2(scenario, channels, config),
    }
}

/// Largest violation of the per-BS budgets, unit modulus and assignment cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `max_b (c_b − P_b)⁺`, watts.
    pub power_excess: f64,
    pub unit_modulus: f64,
    pub assignment_ok: bool,
}

impl FeasibilityReport {
    pub fn holds(&self, power_tol: f64, modulus_tol: f64) -> bool {
        self.power_excess <= power_tol && self.unit_modulus <= modulus_tol && self.assignment_ok
    }
}

pub fn feasibility(scenario: &Scenario, out: &AoOutcome) -> FeasibilityReport {
    let power_excess = out
        .w
        .bs_powers()
        .iter()
        .zip(&scenario.power_budget)
        .map(|(p, cap)| (p - cap).max(0.0))
        .fold(0.0, f64::max);
    let assignment_ok = out
        .assignment
        .as_ref()
        .map(|l| l.is_feasible(scenario.r_assign))
        .unwrap_or(true);
    FeasibilityReport {
        power_excess,
        unit_modulus: out.mu.constraint_violation(),
        assignment_ok,
    }
}

/// Flattened complex array with its shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexArray {
    pub dims: Vec<usize>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexArray {
    pub fn from_vectors(rows: &[CVector]) -> Self {
        let cols = rows.first().map(|v| v.len()).unwrap_or(0);
        let all: Vec<Complex64> = rows.iter().flat_map(|v| v.iter().copied()).collect();
        ComplexArray {
            dims: vec![rows.len(), cols],
            re: all.iter().map(|z| z.re).collect(),
            im: all.iter().map(|z| z.im).collect(),
        }
    }
}
