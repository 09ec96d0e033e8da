//! Phase subproblem: quadratic surrogate in μ and its ADMM solver under the
//! unit-modulus constraint.
//!
//! The problem `min μᴴAμ − 2Re{μᴴv}` s.t. `|μᵢ| = 1`, `μ_last = 1` is split
//! as `p = μ` with the augmented Lagrangian
//!
//! ```text
//! G(p, μ, λ) = pᴴAp − 2Re{pᴴv} − Re{λᴴ(p − μ)} + δ/2 ‖p − μ‖²
//! ```
//!
//! Each sweep projects onto the unit-modulus set, solves the smooth block in
//! closed form, then sets the dual from the smooth block's optimality
//! condition (`λ = 2Ap − 2v`, which equals `λ − δ(p − μ)` for the μ just
//! used). With the dual kept consistent this way, one sweep changes `G` by
//! `−Δpᴴ(A + δ/2·I − 4A²/δ)Δp`, which is non-positive whenever `δ ≥ 2λ_max(A)`.

use std::f64::consts::TAU;

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::bf_sca::surrogate_constant;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_max_eigenvalue, max_abs, quad_form, re_dot};
use crate::network::{beam_gains, AggregateChannels, BeamformerSet, PhaseVector};
use crate::{CMatrix, CVector, Complex64};

/// `J(μ) = μᴴAμ − 2Re{μᴴv}`; the surrogate of the negated WSSR is
/// `J(μ) + offset`, and `constant − J(μ) − offset` lower-bounds the WSSR.
#[derive(Debug, Clone)]
pub struct PhaseQuadratic {
    pub a: CMatrix,
    pub v: CVector,
    pub offset: f64,
    pub constant: f64,
}

impl PhaseQuadratic {
    pub fn value(&self, mu: &CVector) -> f64 {
        quad_form(&self.a, mu) - 2.0 * re_dot(mu, &self.v)
    }

    /// Lower bound on the weighted sum secrecy rate at `μ` (W fixed).
    pub fn minorizer(&self, mu: &CVector) -> f64 {
        self.constant - self.value(mu) - self.offset
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Assembles `A` and `v` at `(Wᵗ, μᵗ)`.
pub fn build_phase_quadratic(
    aggregates: &AggregateChannels,
    w: &BeamformerSet,
    mu_t: &PhaseVector,
    weights: &[f64],
) -> PhaseQuadratic {
    let kn = aggregates.num_users();
    let d = aggregates.phase_len();
    let mu = mu_t.as_vector();
    let mut a = CMatrix::zeros(d, d);
    let mut v = CVector::zeros(d);
    let mut offset = 0.0;
    let (mut alpha_t, mut beta_t, mut chi_t, mut omega_t) = (vec![], vec![], vec![], vec![]);
    for k in 0..kn {
        let eta = weights[k];
        let x: Vec<CVector> = w.users().iter().map(|wj| &aggregates.h_user[k] * wj).collect();
        let y: Vec<CVector> = w.users().iter().map(|wj| &aggregates.h_eve[k] * wj).collect();
        let g = beam_gains(&aggregates.h_user[k], mu, w);
        let e = beam_gains(&aggregates.h_eve[k], mu, w);
        let alpha = g[k];
        let beta = 1.0 + (0..kn).filter(|&j| j != k).map(|j| g[j].norm_sqr()).sum::<f64>();
        let chi: f64 = e.iter().map(|z| z.norm_sqr()).sum();
        let omega = chi - e[k].norm_sqr();
        let cu = alpha.norm_sqr() / (beta * (beta + alpha.norm_sqr()));
        let ce = 1.0 / (chi + 1.0);
        let co = omega / (1.0 + omega);
        for j in 0..kn {
            a += &x[j] * x[j].adjoint() * real(eta * cu) + &y[j] * y[j].adjoint() * real(eta * ce);
            if j != k {
                a += &y[j] * y[j].adjoint() * real(eta * co);
                // Ψ Ψᴴ μᵗ, one column at a time: y_j (y_jᴴ μᵗ) = y_j conj(e_j).
                v += &y[j] * (e[j].conj() * real(eta));
            }
        }
        v += &x[k] * (alpha.conj() * (eta / beta));
        offset += eta * cu;
        alpha_t.push(alpha);
        beta_t.push(beta);
        chi_t.push(chi);
        omega_t.push(omega);
    }
    let constant = surrogate_constant(&alpha_t, &beta_t, &chi_t, &omega_t, weights);
    PhaseQuadratic { a, v, offset, constant }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmOptions {
    /// `δ = penalty_factor · λ_max(A)`.
    pub penalty_factor: f64,
    /// Stop once `‖p − μ‖_∞` falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        AdmmOptions {
            penalty_factor: 2.1,
            tol: 1e-7,
            max_iter: 2000,
        }
    }
}

/// Smallest penalty ever used; only reached when `A` is (numerically) zero.
pub const PENALTY_FLOOR: f64 = 1e-6;

/// Penalty parameter for the split, `factor · λ_max(A)` but at least
/// [`PENALTY_FLOOR`].
pub fn select_penalty(a: &CMatrix, factor: f64) -> f64 {
    (factor * hermitian_max_eigenvalue(a).max(0.0)).max(PENALTY_FLOOR)
}

/// Iterate of the split problem.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub p: CVector,
    pub mu: PhaseVector,
    pub lambda: CVector,
}

/// `G(p, μ, λ)` for the split problem.
pub fn augmented_lagrangian(q: &PhaseQuadratic, state: &AdmmState, delta: f64) -> f64 {
    let r = &state.p - state.mu.as_vector();
    q.value(&state.p) - re_dot(&state.lambda, &r) + 0.5 * delta * r.norm_squared()
}

/// ADMM solver with the `(2A + δI)` factorization cached.
pub struct AdmmSolver<'a> {
    q: &'a PhaseQuadratic,
    delta: f64,
    chol: Cholesky<Complex64, nalgebra::Dyn>,
}

impl<'a> AdmmSolver<'a> {
    pub fn new(q: &'a PhaseQuadratic, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Domain(format!("penalty must be positive, got {delta}")));
        }
        let n = q.dim();
        let m = &q.a * real(2.0) + CMatrix::identity(n, n) * real(delta);
        let chol = Cholesky::new(m).ok_or_else(|| Error::solver("admm", "2A + δI is not positive definite"))?;
        Ok(AdmmSolver { q, delta, chol })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `p = (2A + δI)⁻¹ (2v + λ + δμ)`.
    pub fn update_p(&self, mu: &PhaseVector, lambda: &CVector) -> CVector {
        let rhs = &self.q.v * real(2.0) + lambda + mu.as_vector() * real(self.delta);
        self.chol.solve(&rhs)
    }

    /// `μ = proj(p − λ/δ)`.
    pub fn update_mu(&self, p: &CVector, lambda: &CVector, prev: &PhaseVector) -> PhaseVector {
        PhaseVector::project(&(p - lambda * real(1.0 / self.delta)), prev)
    }

    /// `λ = 2Ap − 2v`, the dual that makes the latest p-step stationary.
    pub fn update_lambda(&self, p: &CVector) -> CVector {
        (&self.q.a * p - &self.q.v) * real(2.0)
    }

    /// Dual consistent with `p`, used to start the iteration.
    pub fn initial_state(&self, mu: &PhaseVector) -> AdmmState {
        let p = mu.as_vector().clone();
        let lambda = self.update_lambda(&p);
        AdmmState {
            p,
            mu: mu.clone(),
            lambda,
        }
    }

    /// One full sweep: μ, then p, then λ.
    pub fn step(&self, state: &AdmmState) -> AdmmState {
        let mu = self.update_mu(&state.p, &state.lambda, &state.mu);
        let p = self.update_p(&mu, &state.lambda);
        let lambda = self.update_lambda(&p);
        AdmmState { p, mu, lambda }
    }
}

#[derive(Debug, Clone)]
pub struct AdmmResult {
    /// Best iterate by surrogate value (never worse than the start).
    pub mu: PhaseVector,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final `‖p − μ‖_∞`.
    pub residual: f64,
    pub delta: f64,
}

/// Runs ADMM from `mu_init` with `p = μ` and `λ = 2Ap − 2v`.
pub fn admm_solve(q: &PhaseQuadratic, mu_init: &PhaseVector, opts: &AdmmOptions) -> Result<AdmmResult> {
    if mu_init.len() != q.dim() {
        return Err(Error::Dimension(format!(
            "phase vector of length {} for quadratic of size {}",
            mu_init.len(),
            q.dim()
        )));
    }
    let delta = select_penalty(&q.a, opts.penalty_factor);
    let solver = AdmmSolver::new(q, delta)?;
    let mut state = solver.initial_state(mu_init);
    let mut best = mu_init.clone();
    let mut best_value = q.value(mu_init.as_vector());
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        state = solver.step(&state);
        let value = q.value(state.mu.as_vector());
        if value < best_value {
            best_value = value;
            best = state.mu.clone();
        }
        residual = max_abs(&(&state.p - state.mu.as_vector()));
        if residual <= opts.tol {
            break;
        }
    }
    Ok(AdmmResult {
        mu: best,
        value: best_value,
        iterations,
        converged: residual <= opts.tol,
        residual,
        delta,
    })
}

/// Snaps each reflection coefficient to the nearest of `2^bits` uniformly
/// spaced phases `e^{j2πl/2^bits}` (circular distance); the last entry stays 1.
pub fn project_discrete(mu: &PhaseVector, bits: u32) -> PhaseVector {
    let levels = (1u64 << bits) as f64;
    let step = TAU / levels;
    let angles: Vec<f64> = mu.as_vector().as_slice()[..mu.reflect_len()]
        .iter()
        .map(|z| {
            let a = z.arg().rem_euclid(TAU);
            let l = (a / step).round() % levels;
            l * step
        })
        .collect();
    PhaseVector::from_angles(&angles)
}
