//! Beamforming subproblem: convex SCA surrogate and its ball-constrained QP.
//!
//! At a fixed point `(Wᵗ, μᵗ)` each user's rate is minorized through
//!
//! ```text
//! ln(1 + |a|²/b) ≥ ln(1 + |â|²/b̂) − |â|²/b̂ + 2Re{â* a}/b̂ − |â|²(b + |a|²) / (b̂(b̂ + |â|²))
//! ```
//!
//! and the eavesdropper term `−ln(1 + γᵉ) = ln(1 + ‖Ωᴴ W‖²) − ln(1 + χ)` is
//! bounded with the same inequality (b = 1) and a tangent of `−ln(1 + χ)`.
//! The resulting minimization objective is a convex quadratic in `W` that is
//! block-diagonal across users, coupled only through the per-BS power balls.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_max_eigenvalue, hermitian_min_eigenvalue, quad_form, re_dot};
use crate::network::{AggregateChannels, BeamformerSet, PhaseVector};
use crate::{CMatrix, CVector, Complex64};

/// Frozen coefficients of the beamforming surrogate at `(Wᵗ, μᵗ)`.
#[derive(Debug, Clone)]
pub struct BfSurrogate {
    /// `αₖᵗ = (μᵗ)ᴴ h̃ₖ wₖᵗ`.
    pub alpha_t: Vec<Complex64>,
    /// `βₖᵗ = Σ_{j≠k} |(μᵗ)ᴴ h̃ₖ wⱼᵗ|² + 1`.
    pub beta_t: Vec<f64>,
    /// `χₖᵗ = Σ_j |(μᵗ)ᴴ h̃_{e,k} wⱼᵗ|²`.
    pub chi_t: Vec<f64>,
    /// `‖Ωₖᴴ Wᵗ‖² = Σ_{j≠k} |(μᵗ)ᴴ h̃_{e,k} wⱼᵗ|²`.
    pub omega_t: Vec<f64>,
    /// `h̃ₖᴴ μᵗ`, so that `αₖ = gₖᴴ wₖ`.
    pub user_dir: Vec<CVector>,
    /// `h̃_{e,k}ᴴ μᵗ`; `ξ_{e,k} = eₖ eₖᴴ`.
    pub eve_dir: Vec<CVector>,
    pub weights: Vec<f64>,
    pub fixed_w: BeamformerSet,
    pub fixed_mu: PhaseVector,
}

/// Constant shared by the beamforming and phase surrogates at the same
/// expansion point.
pub(crate) fn surrogate_constant(
    alpha_t: &[Complex64],
    beta_t: &[f64],
    chi_t: &[f64],
    omega_t: &[f64],
    weights: &[f64],
) -> f64 {
    (0..alpha_t.len())
        .map(|k| {
            let (a2, bt, chi, om) = (alpha_t[k].norm_sqr(), beta_t[k], chi_t[k], omega_t[k]);
            let c =
                (a2 / bt).ln_1p() - a2 / bt + om.ln_1p() - om - om / (1.0 + om) - chi.ln_1p() - 1.0 / (1.0 + chi) + 1.0;
            weights[k] * c
        })
        .sum()
}

/// `Σ_j (wⱼᴴ Qⱼ wⱼ − 2Re{wⱼᴴ bⱼ}) + constant`.
#[derive(Debug, Clone)]
pub struct BfQuadratic {
    pub q: Vec<CMatrix>,
    pub b: Vec<CVector>,
    pub constant: f64,
}

impl BfQuadratic {
    pub fn value(&self, w: &BeamformerSet) -> f64 {
        self.constant
            + w.users()
                .iter()
                .enumerate()
                .map(|(j, wj)| quad_form(&self.q[j], wj) - 2.0 * re_dot(wj, &self.b[j]))
                .sum::<f64>()
    }

    /// Gradient with respect to `conj(w)`, scaled by 2 (`2(Qw − b)`).
    pub fn gradient(&self, w: &BeamformerSet) -> Vec<CVector> {
        w.users()
            .iter()
            .enumerate()
            .map(|(j, wj)| (&self.q[j] * wj - &self.b[j]) * Complex64::new(2.0, 0.0))
            .collect()
    }
}

/// Builds the surrogate at `(w_t, mu_t)`.
pub fn build_bf_surrogate(
    aggregates: &AggregateChannels,
    w_t: &BeamformerSet,
    mu_t: &PhaseVector,
    weights: &[f64],
) -> BfSurrogate {
    let kn = aggregates.num_users();
    let mu = mu_t.as_vector();
    let user_dir: Vec<CVector> = aggregates.h_user.iter().map(|h| h.adjoint() * mu).collect();
    let eve_dir: Vec<CVector> = aggregates.h_eve.iter().map(|h| h.adjoint() * mu).collect();
    let mut alpha_t = Vec::with_capacity(kn);
    let mut beta_t = Vec::with_capacity(kn);
    let mut chi_t = Vec::with_capacity(kn);
    let mut omega_t = Vec::with_capacity(kn);
    for k in 0..kn {
        let g: Vec<Complex64> = w_t.users().iter().map(|wj| user_dir[k].dotc(wj)).collect();
        let e: Vec<f64> = w_t.users().iter().map(|wj| eve_dir[k].dotc(wj).norm_sqr()).collect();
        alpha_t.push(g[k]);
        beta_t.push(1.0 + (0..kn).filter(|&j| j != k).map(|j| g[j].norm_sqr()).sum::<f64>());
        let chi: f64 = e.iter().sum();
        chi_t.push(chi);
        omega_t.push(chi - e[k]);
    }
    BfSurrogate {
        alpha_t,
        beta_t,
        chi_t,
        omega_t,
        user_dir,
        eve_dir,
        weights: weights.to_vec(),
        fixed_w: w_t.clone(),
        fixed_mu: mu_t.clone(),
    }
}

impl BfSurrogate {
    pub fn num_users(&self) -> usize {
        self.alpha_t.len()
    }

    fn user_curvature(&self, k: usize) -> f64 {
        let a2 = self.alpha_t[k].norm_sqr();
        a2 / (self.beta_t[k] * (self.beta_t[k] + a2))
    }

    fn eve_curvature(&self, k: usize) -> f64 {
        self.omega_t[k] / (1.0 + self.omega_t[k])
    }

    /// Dense `Ωₖ Ωₖᴴ` on the stacked `(M·B·K)` vector: block-diagonal with
    /// `ξ_{e,k}` everywhere except a zero `k`-th block.
    pub fn omega_gram(&self, k: usize) -> CMatrix {
        let kn = self.num_users();
        let d = self.eve_dir[k].len();
        let xi = &self.eve_dir[k] * self.eve_dir[k].adjoint();
        let mut out = CMatrix::zeros(d * kn, d * kn);
        for j in (0..kn).filter(|&j| j != k) {
            out.view_mut((j * d, j * d), (d, d)).copy_from(&xi);
        }
        out
    }

    /// The minimization objective of the beamforming surrogate, evaluated
    /// term by term.
    pub fn objective(&self, w: &BeamformerSet) -> f64 {
        let kn = self.num_users();
        let mut total = 0.0;
        for k in 0..kn {
            let g: Vec<Complex64> = w.users().iter().map(|wj| self.user_dir[k].dotc(wj)).collect();
            let e: Vec<Complex64> = w.users().iter().map(|wj| self.eve_dir[k].dotc(wj)).collect();
            let e_t: Vec<Complex64> = self.fixed_w.users().iter().map(|wj| self.eve_dir[k].dotc(wj)).collect();
            let alpha = g[k];
            let beta = 1.0 + (0..kn).filter(|&j| j != k).map(|j| g[j].norm_sqr()).sum::<f64>();
            let chi: f64 = e.iter().map(|z| z.norm_sqr()).sum();
            let omega: f64 = chi - e[k].norm_sqr();
            let cross: f64 = (0..kn).filter(|&j| j != k).map(|j| (e[j].conj() * e_t[j]).re).sum();
            let (at, bt) = (self.alpha_t[k], self.beta_t[k]);
            let term = -2.0 * (at.conj() * alpha).re / bt
                + self.user_curvature(k) * (beta + alpha.norm_sqr())
                + chi / (self.chi_t[k] + 1.0)
                - 2.0 * cross
                + self.eve_curvature(k) * omega;
            total += self.weights[k] * term;
        }
        total
    }

    /// Constant dropped from the surrogate objective; `constant() − objective(W)`
    /// is a lower bound on the weighted sum secrecy rate that touches it at `Wᵗ`.
    pub fn constant(&self) -> f64 {
        surrogate_constant(&self.alpha_t, &self.beta_t, &self.chi_t, &self.omega_t, &self.weights)
    }

    /// Lower bound on the weighted sum secrecy rate at `W` (μ fixed at μᵗ).
    pub fn minorizer(&self, w: &BeamformerSet) -> f64 {
        self.constant() - self.objective(w)
    }

    /// Assembles the per-user quadratic form.
    pub fn quadratic(&self) -> BfQuadratic {
        let kn = self.num_users();
        let d = self.user_dir.first().map(|v| v.len()).unwrap_or(0);
        let mut q = vec![CMatrix::zeros(d, d); kn];
        let mut b = vec![CVector::zeros(d); kn];
        let mut constant = 0.0;
        for k in 0..kn {
            let eta = self.weights[k];
            let gg = &self.user_dir[k] * self.user_dir[k].adjoint();
            let ee = &self.eve_dir[k] * self.eve_dir[k].adjoint();
            let cu = eta * self.user_curvature(k);
            let ce = eta / (self.chi_t[k] + 1.0);
            let co = eta * self.eve_curvature(k);
            constant += cu;
            for j in 0..kn {
                q[j] += &gg * Complex64::new(cu, 0.0) + &ee * Complex64::new(ce, 0.0);
                if j != k {
                    q[j] += &ee * Complex64::new(co, 0.0);
                    b[j] += &ee * self.fixed_w.user(j) * Complex64::new(eta, 0.0);
                }
            }
            b[k] += &self.user_dir[k] * (self.alpha_t[k] * (eta / self.beta_t[k]));
        }
        BfQuadratic { q, b, constant }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BfQpOptions {
    /// Relative KKT tolerance.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BfQpOptions {
    fn default() -> Self {
        BfQpOptions {
            tol: 1e-8,
            max_iter: 5000,
        }
    }
}

/// First-order optimality certificate of a beamforming QP solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `‖∇f + Σ_b ν_b ∇c_b‖ / (1 + ‖∇f‖)`.
    pub stationarity: f64,
    /// `max_b |ν_b (c_b − P_b)|`.
    pub complementarity: f64,
    /// `max_b (c_b − P_b)⁺ / P_b`.
    pub feasibility: f64,
    pub multipliers: Vec<f64>,
}

impl KktReport {
    pub fn satisfied(&self, tol: f64) -> bool {
        self.stationarity <= tol && self.complementarity <= tol && self.feasibility <= tol
    }
}

#[derive(Debug, Clone)]
pub struct BfSolution {
    pub w: BeamformerSet,
    pub iterations: usize,
    /// The iteration cap was reached before the KKT tolerance.
    pub cap_hit: bool,
    pub kkt: KktReport,
    pub objective: f64,
}

/// Rescales every BS block onto its power ball.
pub fn project_power(w: &mut BeamformerSet, budgets: &[f64]) {
    let m = w.antennas_per_bs();
    for (b, cap) in budgets.iter().enumerate() {
        let p = w.bs_power(b);
        if p > *cap {
            let s = if p > 0.0 { (cap / p).sqrt() } else { 0.0 };
            for k in 0..w.num_users() {
                w.user_mut(k).rows_mut(b * m, m).scale_mut(s);
            }
        }
    }
}

/// Evaluates the KKT conditions of `min f(W)` s.t. per-BS power balls.
pub fn kkt_report(quad: &BfQuadratic, w: &BeamformerSet, budgets: &[f64]) -> KktReport {
    let grad = quad.gradient(w);
    let m = w.antennas_per_bs();
    let kn = w.num_users();
    let mut multipliers = Vec::with_capacity(budgets.len());
    let mut residual = 0.0;
    let mut grad_norm2 = 0.0;
    let mut complementarity: f64 = 0.0;
    let mut feasibility: f64 = 0.0;
    for (b, cap) in budgets.iter().enumerate() {
        let c = w.bs_power(b);
        let mut inner = 0.0;
        for k in 0..kn {
            inner += w.block(b, k).dotc(&grad[k].rows(b * m, m)).re;
        }
        let nu = if c > 0.0 && c >= cap * (1.0 - 1e-9) {
            (-inner / (2.0 * c)).max(0.0)
        } else {
            0.0
        };
        for k in 0..kn {
            let r = grad[k].rows(b * m, m) + w.block(b, k) * Complex64::new(2.0 * nu, 0.0);
            residual += r.norm_squared();
            grad_norm2 += grad[k].rows(b * m, m).norm_squared();
        }
        complementarity = complementarity.max((nu * (c - cap)).abs());
        feasibility = feasibility.max(((c - cap) / cap.max(f64::MIN_POSITIVE)).max(0.0));
        multipliers.push(nu);
    }
    KktReport {
        stationarity: residual.sqrt() / (1.0 + grad_norm2.sqrt()),
        complementarity,
        feasibility,
        multipliers,
    }
}

/// Solves the KKT system for a fixed active set by Newton's method on the
/// multipliers: `W(ν) = (Q_j + diag(ν))⁻¹ b_j`, `c_b(W(ν)) = P_b` for every
/// `b` with `ν_b > 0`. Returns `None` if the active set is inconsistent or a
/// shifted block is singular.
fn dual_polish(quad: &BfQuadratic, budgets: &[f64], m: usize, nu0: &[f64]) -> Option<BeamformerSet> {
    let active: Vec<usize> = (0..budgets.len()).filter(|&b| nu0[b] > 0.0).collect();
    let mut nu = nu0.to_vec();
    let solve = |nu: &[f64]| -> Option<(BeamformerSet, Vec<Cholesky<Complex64, Dyn>>)> {
        let mut xs = Vec::with_capacity(quad.q.len());
        let mut chols = Vec::with_capacity(quad.q.len());
        for (q, b) in quad.q.iter().zip(&quad.b) {
            let mut shifted = q.clone();
            for (blk, v) in nu.iter().enumerate() {
                for a in 0..m {
                    shifted[(blk * m + a, blk * m + a)] += v;
                }
            }
            let chol = Cholesky::new(shifted)?;
            xs.push(chol.solve(b));
            chols.push(chol);
        }
        Some((BeamformerSet::from_vectors(xs, m).ok()?, chols))
    };
    for _ in 0..60 {
        let (x, chols) = solve(&nu)?;
        let resid: Vec<f64> = active.iter().map(|&b| x.bs_power(b) - budgets[b]).collect();
        let done = active.iter().zip(&resid).all(|(&b, r)| r.abs() <= 1e-13 * budgets[b]);
        if done {
            let feasible = (0..budgets.len()).all(|b| x.bs_power(b) <= budgets[b] * (1.0 + 1e-12));
            return feasible.then_some(x);
        }
        let na = active.len();
        let mut jac = DMatrix::<f64>::zeros(na, na);
        for (j, chol) in chols.iter().enumerate() {
            let xj = x.user(j);
            let masked: Vec<CVector> = active
                .iter()
                .map(|&b| {
                    let mut e = CVector::zeros(xj.len());
                    e.rows_mut(b * m, m).copy_from(&xj.rows(b * m, m));
                    e
                })
                .collect();
            let solved: Vec<CVector> = masked.iter().map(|e| chol.solve(e)).collect();
            for r in 0..na {
                for c in 0..na {
                    jac[(r, c)] -= 2.0 * masked[r].dotc(&solved[c]).re;
                }
            }
        }
        let rhs = DVector::from_iterator(na, resid.iter().map(|r| -r));
        let delta = jac.lu().solve(&rhs)?;
        let mut t = 1.0;
        while active.iter().enumerate().any(|(i, &b)| nu[b] + t * delta[i] <= 0.0) {
            t *= 0.5;
            if t < 1e-12 {
                return None;
            }
        }
        for (i, &b) in active.iter().enumerate() {
            nu[b] += t * delta[i];
        }
    }
    None
}

/// Minimizes the surrogate under the per-BS power budgets by accelerated
/// projected gradient with function-value restart, starting from `Wᵗ`.
/// At a few checkpoints the active set suggested by the current multiplier
/// estimates is handed to a Newton solve of the KKT system; its answer is
/// kept only if it certifies optimality.
pub fn solve_bf_qp(s: &BfSurrogate, budgets: &[f64], opts: &BfQpOptions) -> Result<BfSolution> {
    let quad = s.quadratic();
    solve_ball_qp(&quad, &s.fixed_w, budgets, opts)
}

const POLISH_AT: [usize; 5] = [10, 40, 150, 600, 2500];

/// Ball-constrained convex QP solver shared by [`solve_bf_qp`] and tests.
pub fn solve_ball_qp(
    quad: &BfQuadratic,
    start: &BeamformerSet,
    budgets: &[f64],
    opts: &BfQpOptions,
) -> Result<BfSolution> {
    if budgets.len() != start.num_bs() {
        return Err(Error::Dimension(format!(
            "{} budgets for {} BSs",
            budgets.len(),
            start.num_bs()
        )));
    }
    let mut lmax: f64 = 0.0;
    for (j, q) in quad.q.iter().enumerate() {
        let hi = hermitian_max_eigenvalue(q);
        let lo = hermitian_min_eigenvalue(q);
        if lo < -1e-9 * (1.0 + hi.abs()) {
            return Err(Error::solver(
                "bf-qp",
                format!("quadratic form of user {j} is not PSD: eigenvalues in [{lo:e}, {hi:e}]"),
            ));
        }
        lmax = lmax.max(hi);
    }
    // Step 1/L for f = wᴴQw − 2Re{wᴴb}, whose gradient 2(Qw − b) is 2λmax-Lipschitz.
    let b_norm: f64 = quad.b.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
    let lip = (2.0 * lmax).max(1e-12 * (1.0 + b_norm));
    let step = Complex64::new(1.0 / lip, 0.0);
    let kn = start.num_users();

    let mut x = start.clone();
    project_power(&mut x, budgets);
    let mut fx = quad.value(&x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut iterations = 0;
    let mut kkt = kkt_report(quad, &x, budgets);
    let mut converged = kkt.satisfied(opts.tol);
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let grad = quad.gradient(&y);
        let mut next = y.clone();
        for k in 0..kn {
            *next.user_mut(k) -= &grad[k] * step;
        }
        project_power(&mut next, budgets);
        let f_next = quad.value(&next);
        if f_next > fx {
            // Momentum overshoot: restart from the last accepted point.
            y = x.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = Complex64::new((t - 1.0) / t_next, 0.0);
        let mut y_next = next.clone();
        for k in 0..kn {
            *y_next.user_mut(k) += (next.user(k) - x.user(k)) * beta;
        }
        x = next;
        fx = f_next;
        y = y_next;
        t = t_next;
        kkt = kkt_report(quad, &x, budgets);
        converged = kkt.satisfied(opts.tol);
        if !converged && POLISH_AT.contains(&iterations) {
            if let Some(xp) = dual_polish(quad, budgets, start.antennas_per_bs(), &kkt.multipliers) {
                let kp = kkt_report(quad, &xp, budgets);
                let fp = quad.value(&xp);
                if kp.satisfied(opts.tol) && fp <= fx + 1e-12 * (1.0 + fx.abs()) {
                    x = xp;
                    fx = fp;
                    kkt = kp;
                    converged = true;
                }
            }
        }
    }
    Ok(BfSolution {
        objective: fx,
        w: x,
        iterations,
        cap_hit: !converged,
        kkt,
    })
}
