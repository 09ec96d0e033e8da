//! RIS-to-user assignment through a lifted conic relaxation.
//!
//! For user `k` the selection vector `u = [l_{1,k} … l_{R,k}, 1]` is lifted to
//! `U = u uᵀ`. With `D_{k,j} = b_k w_j w_jᴴ b_kᴴ` the virtual secrecy rate is a
//! difference of concave log-trace terms
//!
//! ```text
//! T1 − T3 + T2 − T4,  T1 = ln(Σ_j Tr(D_{k,j}U) + 1),  T3 = ln(Σ_{j≠k} Tr(D_{k,j}U) + 1),
//!                     T2 = ln(Σ_{j≠k} Tr(D_{e,k,j}U) + 1),  T4 = ln(Σ_j Tr(D_{e,k,j}U) + 1).
//! ```
//!
//! T3 and T4 are replaced by their tangents at `U_t`, the rank-one constraint
//! is dropped, and the resulting convex program (C7–C11 below) is solved by a
//! primal log-barrier Newton method in the real symmetric embedding.
//!
//! Reduced variables: `x = (ũ, Ũ_{ij} for i<j)` where `ũ` holds the reflect
//! entries of `u` and `Ũ` the reflect block of `U`. The equalities
//! `U_ii = u_i` (C7) and `u_{R+1} = 1` (C8) are eliminated; the border of `U`
//! is `u` itself. The Schur block `[[1, uᵀ], [u, U]]` then has a duplicated
//! row, so C11 is imposed on the equivalent `(R+1)×(R+1)` block
//! `[[1, ũᵀ], [ũ, Ũ]]`.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_min_eigenvalue;
use crate::network::{AssignmentChannels, BeamformerSet};
use crate::par::{self, ExecMode};
use crate::scenario::{ChannelSet, LinkMask};
use crate::{CMatrix, Complex64};

/// Binary RIS-to-user assignment, `l[r][k]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentMatrix {
    pub l: Vec<Vec<bool>>,
}

impl AssignmentMatrix {
    pub fn all_ones(num_ris: usize, num_users: usize) -> Self {
        AssignmentMatrix {
            l: vec![vec![true; num_users]; num_ris],
        }
    }

    pub fn zeros(num_ris: usize, num_users: usize) -> Self {
        AssignmentMatrix {
            l: vec![vec![false; num_users]; num_ris],
        }
    }

    /// Builds from per-user columns `cols[k][r]`.
    pub fn from_columns(cols: &[Vec<bool>]) -> Self {
        let rn = cols.first().map(Vec::len).unwrap_or(0);
        AssignmentMatrix {
            l: (0..rn).map(|r| cols.iter().map(|c| c[r]).collect()).collect(),
        }
    }

    pub fn num_ris(&self) -> usize {
        self.l.len()
    }

    pub fn num_users(&self) -> usize {
        self.l.first().map(Vec::len).unwrap_or(0)
    }

    pub fn column(&self, k: usize) -> Vec<bool> {
        self.l.iter().map(|row| row[k]).collect()
    }

    pub fn column_sum(&self, k: usize) -> usize {
        self.l.iter().filter(|row| row[k]).count()
    }

    /// `[l_{1,k} … l_{R,k}, 1]`.
    pub fn lifted(&self, k: usize) -> Vec<f64> {
        let mut u: Vec<f64> = self.l.iter().map(|row| if row[k] { 1.0 } else { 0.0 }).collect();
        u.push(1.0);
        u
    }

    pub fn lifted_all(&self) -> Vec<Vec<f64>> {
        (0..self.num_users()).map(|k| self.lifted(k)).collect()
    }

    /// C5: at most `r_assign` RISs per user.
    pub fn is_feasible(&self, r_assign: usize) -> bool {
        (0..self.num_users()).all(|k| self.column_sum(k) <= r_assign)
    }

    pub fn to_mask(&self) -> LinkMask {
        LinkMask {
            selected: self.l.clone(),
        }
    }
}

/// Per-user data of the assignment subproblem.
#[derive(Debug, Clone)]
pub struct AssignmentProblem {
    /// `d[k][j] = b_k w_j w_jᴴ b_kᴴ`.
    pub d: Vec<Vec<CMatrix>>,
    /// `d_eve[k][j] = b_{e,k} w_j w_jᴴ b_{e,k}ᴴ`.
    pub d_eve: Vec<Vec<CMatrix>>,
    /// Expansion points, real symmetric `(R+1)×(R+1)`.
    pub u_t: Vec<DMatrix<f64>>,
    pub weights: Vec<f64>,
    pub r_assign: usize,
}

impl AssignmentProblem {
    pub fn num_users(&self) -> usize {
        self.d.len()
    }

    pub fn num_ris(&self) -> usize {
        self.d
            .first()
            .and_then(|v| v.first())
            .map(|m| m.nrows() - 1)
            .unwrap_or(0)
    }
}

/// `u uᵀ`.
pub fn lift(u: &[f64]) -> DMatrix<f64> {
    let v = DVector::from_column_slice(u);
    &v * v.transpose()
}

/// Builds `D` and `D_e` from assignment-domain aggregates.
pub fn build_assignment_problem(
    asg: &AssignmentChannels,
    w: &BeamformerSet,
    weights: &[f64],
    r_assign: usize,
    u_t: Vec<DMatrix<f64>>,
) -> Result<AssignmentProblem> {
    let kn = asg.b_user.len();
    if w.num_users() != kn || weights.len() != kn || u_t.len() != kn {
        return Err(Error::Dimension(format!(
            "assignment problem with {kn} users, {} beamformers, {} weights, {} expansion points",
            w.num_users(),
            weights.len(),
            u_t.len()
        )));
    }
    let dim = asg.b_user.first().map(|b| b.nrows()).unwrap_or(1);
    if u_t.iter().any(|u| u.nrows() != dim || u.ncols() != dim) {
        return Err(Error::Dimension(format!("expansion points must be {dim}×{dim}")));
    }
    let outer = |b: &CMatrix| -> Vec<CMatrix> {
        w.users()
            .iter()
            .map(|wj| {
                let v = b * wj;
                &v * v.adjoint()
            })
            .collect()
    };
    Ok(AssignmentProblem {
        d: asg.b_user.iter().map(outer).collect(),
        d_eve: asg.b_eve.iter().map(outer).collect(),
        u_t,
        weights: weights.to_vec(),
        r_assign,
    })
}

/// `Tr(D U)` for Hermitian `D` and real symmetric `U`.
pub fn trace_re(d: &CMatrix, u: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..d.nrows() {
        for j in 0..d.ncols() {
            acc += d[(i, j)].re * u[(j, i)];
        }
    }
    acc
}

fn sum_traces<'a>(ds: impl Iterator<Item = &'a CMatrix>, u: &DMatrix<f64>) -> f64 {
    ds.map(|d| trace_re(d, u)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTerms {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
}

impl TTerms {
    /// `g(U) = −T1 − T2 + T3 + T4`, the negated virtual secrecy rate.
    pub fn g(&self) -> f64 {
        -self.t1 - self.t2 + self.t3 + self.t4
    }
}

fn others(k: usize, n: usize) -> impl Iterator<Item = usize> {
    (0..n).filter(move |&j| j != k)
}

pub fn eval_t_terms(prob: &AssignmentProblem, u: &DMatrix<f64>, k: usize) -> TTerms {
    let n = prob.num_users();
    let d = &prob.d[k];
    let de = &prob.d_eve[k];
    TTerms {
        t1: sum_traces(d.iter(), u).ln_1p(),
        t2: sum_traces(others(k, n).map(|j| &de[j]), u).ln_1p(),
        t3: sum_traces(others(k, n).map(|j| &d[j]), u).ln_1p(),
        t4: sum_traces(de.iter(), u).ln_1p(),
    }
}

/// Tangents of T3 and T4 at `U_t`, in the real symmetric embedding.
#[derive(Debug, Clone)]
pub struct T34Linearization {
    pub grad_t3: DMatrix<f64>,
    pub grad_t4: DMatrix<f64>,
    pub t3_at: f64,
    pub t4_at: f64,
    pub u_t: DMatrix<f64>,
}

impl T34Linearization {
    pub fn t3_tilde(&self, u: &DMatrix<f64>) -> f64 {
        self.t3_at + self.grad_t3.component_mul(&(u - &self.u_t)).sum()
    }

    pub fn t4_tilde(&self, u: &DMatrix<f64>) -> f64 {
        self.t4_at + self.grad_t4.component_mul(&(u - &self.u_t)).sum()
    }
}

fn real_part(m: &CMatrix) -> DMatrix<f64> {
    m.map(|z| z.re)
}

pub fn linearize_t34(prob: &AssignmentProblem, k: usize) -> T34Linearization {
    let n = prob.num_users();
    let dim = prob.u_t[k].nrows();
    let ut = &prob.u_t[k];
    let mut s3 = CMatrix::zeros(dim, dim);
    for j in others(k, n) {
        s3 += &prob.d[k][j];
    }
    let mut s4 = CMatrix::zeros(dim, dim);
    for j in 0..n {
        s4 += &prob.d_eve[k][j];
    }
    let (a3, a4) = (trace_re(&s3, ut), trace_re(&s4, ut));
    T34Linearization {
        grad_t3: real_part(&s3) / (a3 + 1.0),
        grad_t4: real_part(&s4) / (a4 + 1.0),
        t3_at: a3.ln_1p(),
        t4_at: a4.ln_1p(),
        u_t: ut.clone(),
    }
}

/// Weighted surrogate `η_k (−T1 − T2 + T̃3 + T̃4)` at `U`.
pub fn surrogate_value(prob: &AssignmentProblem, lin: &T34Linearization, u: &DMatrix<f64>, k: usize) -> f64 {
    let t = eval_t_terms(prob, u, k);
    prob.weights[k] * (-t.t1 - t.t2 + lin.t3_tilde(u) + lin.t4_tilde(u))
}

/// Constraint residuals of a lifted pair `(u, U)`; all zero or negative means
/// feasible except `c11_min_eig`, which must be nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcrResiduals {
    /// `max_i |U_ii − u_i|`.
    pub c7: f64,
    /// `|u_last − 1|`.
    pub c8: f64,
    /// `1ᵀu − (R_assign + 1)`.
    pub c9: f64,
    /// `max_i (1ᵀU)_i − (R_assign + 1) u_i`.
    pub c10: f64,
    /// Smallest eigenvalue of `[[1, uᵀ], [u, U]]`.
    pub c11_min_eig: f64,
}

impl LcrResiduals {
    pub fn within(&self, tol: f64, eig_tol: f64) -> bool {
        self.c7 <= tol && self.c8 <= tol && self.c9 <= tol && self.c10 <= tol && self.c11_min_eig >= -eig_tol
    }
}

pub fn lcr_residuals(u: &[f64], big_u: &DMatrix<f64>, r_assign: usize) -> LcrResiduals {
    let n = u.len();
    let cap = (r_assign + 1) as f64;
    let c7 = (0..n).map(|i| (big_u[(i, i)] - u[i]).abs()).fold(0.0, f64::max);
    let c10 = (0..n)
        .map(|i| big_u.column(i).sum() - cap * u[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut schur = DMatrix::<f64>::zeros(n + 1, n + 1);
    schur[(0, 0)] = 1.0;
    for i in 0..n {
        schur[(0, i + 1)] = u[i];
        schur[(i + 1, 0)] = u[i];
    }
    schur.view_mut((1, 1), (n, n)).copy_from(big_u);
    LcrResiduals {
        c7,
        c8: (u[n - 1] - 1.0).abs(),
        c9: u.iter().sum::<f64>() - cap,
        c10,
        c11_min_eig: symmetric_min_eigenvalue(&schur),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpOptions {
    /// Target duality gap `m/t`.
    pub tol: f64,
    /// Newton iterations allowed per centering step.
    pub max_newton: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            tol: 1e-9,
            max_newton: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Lifted vector `[ũ, 1]`.
    pub u: Vec<f64>,
    pub big_u: DMatrix<f64>,
    /// Weighted surrogate value at the solution.
    pub objective: f64,
    /// Duality-gap bound `m/t` at exit.
    pub gap: f64,
    pub newton_iters: usize,
    pub residuals: LcrResiduals,
}

/// Affine map `x ↦ Tr(M U(x))` as `(coefficients, constant)`.
struct Affine {
    a: DVector<f64>,
    c: f64,
}

impl Affine {
    fn eval(&self, x: &DVector<f64>) -> f64 {
        self.a.dot(x) + self.c
    }
}

/// Index bookkeeping for the reduced variables.
struct Layout {
    r: usize,
    pairs: Vec<(usize, usize)>,
}

impl Layout {
    fn new(r: usize) -> Self {
        let mut pairs = Vec::new();
        for i in 0..r {
            for j in i + 1..r {
                pairs.push((i, j));
            }
        }
        Layout { r, pairs }
    }

    fn dim(&self) -> usize {
        self.r + self.pairs.len()
    }

    fn affine(&self, m: &DMatrix<f64>) -> Affine {
        let r = self.r;
        let mut a = DVector::zeros(self.dim());
        for i in 0..r {
            a[i] = m[(i, i)] + m[(i, r)] + m[(r, i)];
        }
        for (p, &(i, j)) in self.pairs.iter().enumerate() {
            a[r + p] = m[(i, j)] + m[(j, i)];
        }
        Affine { a, c: m[(r, r)] }
    }

    fn full_u(&self, x: &DVector<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let r = self.r;
        let mut u: Vec<f64> = x.rows(0, r).iter().copied().collect();
        u.push(1.0);
        let mut big = DMatrix::zeros(r + 1, r + 1);
        for i in 0..r {
            big[(i, i)] = x[i];
            big[(i, r)] = x[i];
            big[(r, i)] = x[i];
        }
        for (p, &(i, j)) in self.pairs.iter().enumerate() {
            big[(i, j)] = x[r + p];
            big[(j, i)] = x[r + p];
        }
        big[(r, r)] = 1.0;
        (u, big)
    }

    /// `[[1, ũᵀ], [ũ, Ũ]]`.
    fn schur(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let r = self.r;
        let mut z = DMatrix::zeros(r + 1, r + 1);
        z[(0, 0)] = 1.0;
        for i in 0..r {
            z[(0, i + 1)] = x[i];
            z[(i + 1, 0)] = x[i];
            z[(i + 1, i + 1)] = x[i];
        }
        for (p, &(i, j)) in self.pairs.iter().enumerate() {
            z[(i + 1, j + 1)] = x[r + p];
            z[(j + 1, i + 1)] = x[r + p];
        }
        z
    }

    /// Nonzero entries of `∂Z/∂x_p`.
    fn basis(&self, p: usize) -> Vec<(usize, usize)> {
        if p < self.r {
            vec![(0, p + 1), (p + 1, 0), (p + 1, p + 1)]
        } else {
            let (i, j) = self.pairs[p - self.r];
            vec![(i + 1, j + 1), (j + 1, i + 1)]
        }
    }

    /// Rows `g·x + h > 0` for C9 and the non-degenerate C10 columns.
    fn inequalities(&self, r_assign: usize) -> Vec<Affine> {
        let r = self.r;
        let n = self.dim();
        let mut out = Vec::new();
        let mut c9 = DVector::zeros(n);
        for i in 0..r {
            c9[i] = -1.0;
        }
        out.push(Affine {
            a: c9,
            c: r_assign as f64,
        });
        for i in 0..r {
            let mut a = DVector::zeros(n);
            a[i] = r_assign as f64 - 1.0;
            for (p, &(s, t)) in self.pairs.iter().enumerate() {
                if s == i || t == i {
                    a[r + p] = -1.0;
                }
            }
            if a.iter().any(|v| *v != 0.0) {
                out.push(Affine { a, c: 0.0 });
            }
        }
        out
    }

    fn interior_start(&self) -> DVector<f64> {
        let r = self.r.max(1) as f64;
        let c = 0.5 / r;
        let eps = c / (4.0 * r);
        let mut x = DVector::zeros(self.dim());
        for i in 0..self.r {
            x[i] = c;
        }
        for p in 0..self.pairs.len() {
            x[self.r + p] = -eps;
        }
        x
    }
}

/// Smooth part `η(−ln s1 − ln s2 + lin·x + c)` of the reduced objective.
struct ReducedObjective {
    eta: f64,
    s1: Affine,
    s2: Affine,
    lin: Affine,
}

impl ReducedObjective {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.eta * (-(self.s1.eval(x) + 1.0).ln() - (self.s2.eval(x) + 1.0).ln() + self.lin.eval(x))
    }

    fn grad_hess(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let v1 = self.s1.eval(x) + 1.0;
        let v2 = self.s2.eval(x) + 1.0;
        let g = (&self.s1.a * (-1.0 / v1) + &self.s2.a * (-1.0 / v2) + &self.lin.a) * self.eta;
        let h = (&self.s1.a * self.s1.a.transpose() / (v1 * v1) + &self.s2.a * self.s2.a.transpose() / (v2 * v2))
            * self.eta;
        (g, h)
    }
}

struct Barrier<'a> {
    layout: &'a Layout,
    ineq: Vec<Affine>,
}

impl Barrier<'_> {
    fn param(&self) -> f64 {
        (self.ineq.len() + self.layout.r + 1) as f64
    }

    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let mut acc = 0.0;
        for c in &self.ineq {
            let s = c.eval(x);
            if s <= 0.0 {
                return None;
            }
            acc -= s.ln();
        }
        let chol = Cholesky::new(self.layout.schur(x))?;
        let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        if !logdet.is_finite() {
            return None;
        }
        Some(acc - logdet)
    }

    fn grad_hess(&self, x: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let n = self.layout.dim();
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for c in &self.ineq {
            let s = c.eval(x);
            g -= &c.a / s;
            h += &c.a * c.a.transpose() / (s * s);
        }
        let zinv = Cholesky::new(self.layout.schur(x))?.inverse();
        let bases: Vec<Vec<(usize, usize)>> = (0..n).map(|p| self.layout.basis(p)).collect();
        for p in 0..n {
            g[p] -= bases[p].iter().map(|&(a, b)| zinv[(b, a)]).sum::<f64>();
            for q in p..n {
                let mut acc = 0.0;
                for &(a, b) in &bases[p] {
                    for &(c, d) in &bases[q] {
                        acc += zinv[(b, c)] * zinv[(d, a)];
                    }
                }
                h[(p, q)] += acc;
                if q != p {
                    h[(q, p)] += acc;
                }
            }
        }
        Some((g, h))
    }
}

fn barrier_failure(layout: &Layout, x: &DVector<f64>, message: impl Into<String>) -> Error {
    Error::Barrier {
        message: message.into(),
        last_feasible: layout.full_u(x).0,
    }
}

/// Solves the relaxed assignment program for user `k`.
pub fn solve_lcr_sdp_user(prob: &AssignmentProblem, k: usize, opts: &SdpOptions) -> Result<SdpSolution> {
    let r = prob.num_ris();
    let layout = Layout::new(r);
    let lin = linearize_t34(prob, k);
    let n_users = prob.num_users();
    let dim = r + 1;
    let sum_re = |it: &mut dyn Iterator<Item = &CMatrix>| -> DMatrix<f64> {
        it.fold(DMatrix::zeros(dim, dim), |acc, m| acc + real_part(m))
    };
    let s1 = sum_re(&mut prob.d[k].iter());
    let s2 = sum_re(&mut others(k, n_users).map(|j| &prob.d_eve[k][j]));
    let lin_m = &lin.grad_t3 + &lin.grad_t4;
    let mut lin_aff = layout.affine(&lin_m);
    lin_aff.c +=
        lin.t3_at + lin.t4_at - lin.grad_t3.component_mul(&lin.u_t).sum() - lin.grad_t4.component_mul(&lin.u_t).sum();
    let obj = ReducedObjective {
        eta: prob.weights[k],
        s1: layout.affine(&s1),
        s2: layout.affine(&s2),
        lin: lin_aff,
    };
    let barrier = Barrier {
        layout: &layout,
        ineq: layout.inequalities(prob.r_assign),
    };
    let m = barrier.param();

    let mut x = layout.interior_start();
    let mut t = 1.0f64;
    let mut newton_iters = 0;
    if layout.dim() > 0 {
        loop {
            for _ in 0..opts.max_newton {
                let (gf, hf) = obj.grad_hess(&x);
                let (gb, hb) = barrier
                    .grad_hess(&x)
                    .ok_or_else(|| barrier_failure(&layout, &x, "Schur block lost definiteness"))?;
                let g = gf * t + gb;
                let h = hf * t + hb;
                let step = match Cholesky::new(h.clone()) {
                    Some(c) => c.solve(&(-&g)),
                    None => h
                        .lu()
                        .solve(&(-&g))
                        .ok_or_else(|| barrier_failure(&layout, &x, "singular Newton system"))?,
                };
                let decrement = -g.dot(&step);
                newton_iters += 1;
                if decrement <= 1e-14 {
                    break;
                }
                let phi = |y: &DVector<f64>| barrier.value(y).map(|b| t * obj.value(y) + b);
                let phi0 = phi(&x).ok_or_else(|| barrier_failure(&layout, &x, "iterate left the interior"))?;
                let mut s = 1.0;
                let mut accepted = false;
                for _ in 0..80 {
                    let y = &x + &step * s;
                    if let Some(p) = phi(&y) {
                        if p <= phi0 - 0.25 * s * decrement {
                            x = y;
                            accepted = true;
                            break;
                        }
                    }
                    s *= 0.5;
                }
                if !accepted {
                    // Newton decrement is at round-off level relative to φ.
                    if decrement <= 1e-9 * (1.0 + phi0.abs()) {
                        break;
                    }
                    return Err(barrier_failure(&layout, &x, "line search failed"));
                }
            }
            if m / t < opts.tol {
                break;
            }
            t *= 5.0;
        }
    }
    let (u, big_u) = layout.full_u(&x);
    let residuals = lcr_residuals(&u, &big_u, prob.r_assign);
    Ok(SdpSolution {
        objective: surrogate_value(prob, &lin, &big_u, k),
        u,
        big_u,
        gap: if layout.dim() > 0 { m / t } else { 0.0 },
        newton_iters,
        residuals,
    })
}

/// Solves every user's relaxed program; users are independent.
pub fn solve_lcr_sdp(prob: &AssignmentProblem, opts: &SdpOptions, mode: ExecMode) -> Result<Vec<SdpSolution>> {
    par::map_range(mode, prob.num_users(), |k| solve_lcr_sdp_user(prob, k, opts))
        .into_iter()
        .collect()
}

/// Entries below this are treated as unselected when rounding.
pub const ROUNDING_FLOOR: f64 = 1e-6;

/// Keeps the last entry and the `r_assign` largest reflect entries (ties to
/// the lowest index), skipping entries at or below [`ROUNDING_FLOOR`].
/// Returns the binary lifted vector and the corresponding assignment column.
pub fn round_assignment(u: &[f64], r_assign: usize) -> (Vec<f64>, Vec<bool>) {
    let r = u.len().saturating_sub(1);
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| u[b].total_cmp(&u[a]).then(a.cmp(&b)));
    let mut column = vec![false; r];
    for &i in order.iter().take(r_assign) {
        if u[i] > ROUNDING_FLOOR {
            column[i] = true;
        }
    }
    let mut lifted: Vec<f64> = column.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
    lifted.push(1.0);
    (lifted, column)
}

/// Masks RIS → user and RIS → Eve reflection links by `l[r][k]`.
pub fn apply_assignment(channels: &ChannelSet, l: &AssignmentMatrix) -> ChannelSet {
    let mut out = channels.clone();
    for (r, row) in l.l.iter().enumerate() {
        for (k, &keep) in row.iter().enumerate() {
            if !keep {
                out.ris_user[r][k].fill(Complex64::new(0.0, 0.0));
                out.ris_eve[r][k].fill(Complex64::new(0.0, 0.0));
            }
        }
    }
    out
}

/// Every binary lifted vector with at most `r_assign` selected RISs.
pub fn enumerate_binary(r: usize, r_assign: usize) -> Vec<Vec<f64>> {
    (0u32..(1 << r))
        .filter(|m| m.count_ones() as usize <= r_assign)
        .map(|m| {
            let mut u: Vec<f64> = (0..r).map(|i| if m >> i & 1 == 1 { 1.0 } else { 0.0 }).collect();
            u.push(1.0);
            u
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{virtual_wssr, wssr, AggregateChannels, PhaseVector};
    use crate::scenario::{synthesize_channels, Scenario};
    use crate::CVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn single_problem(d: Vec<f64>, de: Vec<f64>, r_assign: usize) -> AssignmentProblem {
        let n = d.len();
        let dv = CVector::from_iterator(n, d.into_iter().map(c));
        let ev = CVector::from_iterator(n, de.into_iter().map(c));
        AssignmentProblem {
            d: vec![vec![&dv * dv.adjoint()]],
            d_eve: vec![vec![&ev * ev.adjoint()]],
            u_t: vec![lift(&vec![1.0; n])],
            weights: vec![1.0],
            r_assign,
        }
    }

    #[test]
    fn helpful_ris_is_selected() {
        let prob = single_problem(vec![1.0, 1.0], vec![0.0, 0.0], 1);
        let sol = solve_lcr_sdp_user(&prob, 0, &SdpOptions::default()).unwrap();
        assert!((sol.u[0] - 1.0).abs() < 1e-6, "{:?}", sol.u);
        assert!(sol.residuals.within(1e-7, 1e-9));
        let best = enumerate_binary(1, 1)
            .into_iter()
            .map(|u| surrogate_value(&prob, &linearize_t34(&prob, 0), &lift(&u), 0))
            .fold(f64::INFINITY, f64::min);
        assert!(sol.objective <= best + 1e-6);
    }

    #[test]
    fn zero_data_is_degenerate_but_feasible() {
        let prob = single_problem(vec![0.0; 4], vec![0.0; 4], 2);
        let sol = solve_lcr_sdp_user(&prob, 0, &SdpOptions::default()).unwrap();
        assert!(sol.objective.abs() < 1e-12);
        assert!(sol.residuals.within(1e-7, 1e-9), "{:?}", sol.residuals);
    }

    #[test]
    fn t_terms_at_zero_and_unit() {
        let prob = single_problem(vec![1.0, 2.0, 0.5], vec![0.3, 0.0, 1.0], 1);
        let t = eval_t_terms(&prob, &DMatrix::zeros(3, 3), 0);
        assert_eq!((t.t1, t.t2, t.t3, t.t4), (0.0, 0.0, 0.0, 0.0));
        // Tr(D U) = e − 1 with U = s·E_33 and D_33 = 0.25.
        let mut u = DMatrix::zeros(3, 3);
        u[(2, 2)] = (std::f64::consts::E - 1.0) / 0.25;
        assert!((eval_t_terms(&prob, &u, 0).t1 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rounding_rules() {
        let (lifted, col) = round_assignment(&[0.9, 0.1, 0.5, 1.0], 1);
        assert_eq!(col, vec![true, false, false]);
        assert_eq!(lifted, vec![1.0, 0.0, 0.0, 1.0]);
        let (_, col) = round_assignment(&[0.4, 0.4, 0.4, 1.0], 2);
        assert_eq!(col, vec![true, true, false]);
        let (lifted, _) = round_assignment(&[0.0, 1.0, 0.0, 1.0], 2);
        assert_eq!(lifted, vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn enumeration_respects_cap() {
        let all = enumerate_binary(3, 1);
        assert_eq!(all.len(), 4);
        assert!(all.iter().all(|u| u[..3].iter().sum::<f64>() <= 1.0 && u[3] == 1.0));
    }

    fn random_instance(rng: &mut ChaCha8Rng, r: usize, kn: usize, r_assign: usize) -> AssignmentProblem {
        let m = 2;
        let mut rand_c = || Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let b: Vec<CMatrix> = (0..kn)
            .map(|_| CMatrix::from_fn(r + 1, m, |_, _| rand_c() * 3.0))
            .collect();
        let be: Vec<CMatrix> = (0..kn).map(|_| CMatrix::from_fn(r + 1, m, |_, _| rand_c())).collect();
        let w: Vec<CVector> = (0..kn).map(|_| CVector::from_fn(m, |_, _| rand_c())).collect();
        let w = BeamformerSet::from_vectors(w, m).unwrap();
        let asg = AssignmentChannels { b_user: b, b_eve: be };
        let ut: Vec<DMatrix<f64>> = (0..kn)
            .map(|_| {
                let mut u: Vec<f64> = (0..r).map(|_| rng.random::<f64>()).collect();
                u.push(1.0);
                lift(&u)
            })
            .collect();
        build_assignment_problem(&asg, &w, &vec![1.0; kn], r_assign, ut).unwrap()
    }

    #[test]
    fn relaxation_lower_bounds_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let prob = random_instance(&mut rng, 3, 2, 1);
            let sols = solve_lcr_sdp(&prob, &SdpOptions::default(), ExecMode::Sequential).unwrap();
            for (k, sol) in sols.iter().enumerate() {
                let lin = linearize_t34(&prob, k);
                let best = enumerate_binary(3, 1)
                    .into_iter()
                    .map(|u| surrogate_value(&prob, &lin, &lift(&u), k))
                    .fold(f64::INFINITY, f64::min);
                assert!(sol.objective <= best + 1e-6, "{} > {best}", sol.objective);
                assert!(sol.residuals.within(1e-7, 1e-9), "{:?}", sol.residuals);
            }
        }
    }

    #[test]
    fn tangent_touches_and_dominates() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let prob = random_instance(&mut rng, 3, 3, 2);
        for k in 0..3 {
            let lin = linearize_t34(&prob, k);
            let t = eval_t_terms(&prob, &prob.u_t[k], k);
            assert!((lin.t3_tilde(&prob.u_t[k]) - t.t3).abs() < 1e-14);
            assert!((lin.t4_tilde(&prob.u_t[k]) - t.t4).abs() < 1e-14);
            for _ in 0..50 {
                let a = DMatrix::<f64>::from_fn(4, 4, |_, _| rng.random::<f64>() - 0.5);
                let u = &a * a.transpose();
                let t = eval_t_terms(&prob, &u, k);
                assert!(t.t3 <= lin.t3_tilde(&u) + 1e-9);
                assert!(t.t4 <= lin.t4_tilde(&u) + 1e-9);
            }
        }
    }

    #[test]
    fn zero_beamformers_give_zero_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let prob = random_instance(&mut rng, 2, 2, 1);
        let asg = AssignmentChannels {
            b_user: vec![CMatrix::from_element(3, 2, c(1.0)); 2],
            b_eve: vec![CMatrix::from_element(3, 2, c(1.0)); 2],
        };
        let zero =
            build_assignment_problem(&asg, &BeamformerSet::zeros(2, 1, 2), &[1.0, 1.0], 1, prob.u_t.clone()).unwrap();
        assert!(zero.d.iter().flatten().all(|m| m.iter().all(|z| z.norm() == 0.0)));
    }

    #[test]
    fn masked_channels_match_virtual_rate() {
        let mut s = Scenario::baseline();
        s.elements_per_ris = 6;
        s.antennas_per_bs = 2;
        let ch = synthesize_channels(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mu = PhaseVector::random(12, &mut rng);
        let w: Vec<CVector> = (0..3)
            .map(|_| {
                CVector::from_fn(6, |_, _| {
                    Complex64::new(rng.random::<f64>(), rng.random::<f64>()) * 0.01
                })
            })
            .collect();
        let w = BeamformerSet::from_vectors(w, 2).unwrap();
        let l = AssignmentMatrix::from_columns(&[vec![true, false], vec![false, true], vec![false, false]]);
        let masked = apply_assignment(&ch, &l);
        let direct = wssr(&s.weights, &AggregateChannels::new(&masked, &s), &w, &mu).objective;
        let asg = AssignmentChannels::new(&ch, &s, &mu);
        let virt = virtual_wssr(&s.weights, &asg, &w, &l.lifted_all()).objective;
        assert!((direct - virt).abs() < 1e-10 * (1.0 + direct.abs()));
        assert_eq!(apply_assignment(&ch, &AssignmentMatrix::all_ones(2, 3)), ch);
    }
}
