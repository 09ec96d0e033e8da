//! Aggregated channel forms, SINR and weighted sum secrecy rate.
//!
//! With the phase vector `μ = [θᵀ, 1]ᵀ` and the stacked beamformer
//! `w_k = [w_{1,k}ᵀ … w_{B,k}ᵀ]ᵀ`, the signal a user receives from beam `j`
//! is the bilinear form `μᴴ h_k w_j`, where `h_k` stacks one row per RIS
//! element (`conj(F_{r,k}[n]) · G_{b,r}[n, :]` across BS blocks) above a final
//! row holding the direct channels `H_{b,k}ᴴ`. The assignment domain collapses
//! each RIS to one row under fixed phases, so that `uᴴ b_k w_j` with
//! `u = [l_{1,k} … l_{R,k}, 1]ᵀ` switches whole surfaces on or off.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{ChannelSet, Scenario};
use crate::{CMatrix, CVector, Complex64};

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// RIS reflection coefficients followed by a fixed trailing 1.
///
/// Every entry has unit modulus and the last entry is exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector(CVector);

impl PhaseVector {
    /// All reflection coefficients equal to 1.
    pub fn ones(reflect_len: usize) -> Self {
        PhaseVector(CVector::from_element(reflect_len + 1, ONE))
    }

    /// Uniformly random phases in `[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(reflect_len: usize, rng: &mut R) -> Self {
        let mut v = CVector::from_element(reflect_len + 1, ONE);
        for i in 0..reflect_len {
            v[i] = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
        }
        PhaseVector(v)
    }

    /// Builds from reflection phases in radians.
    pub fn from_angles(angles: &[f64]) -> Self {
        let mut v = CVector::from_element(angles.len() + 1, ONE);
        for (i, a) in angles.iter().enumerate() {
            v[i] = Complex64::from_polar(1.0, *a);
        }
        PhaseVector(v)
    }

    /// Wraps a vector that already satisfies the constraints (to `tol`).
    pub fn from_vector(v: CVector, tol: f64) -> Result<Self> {
        let n = v.len();
        if n == 0 {
            return Err(Error::Dimension("phase vector cannot be empty".into()));
        }
        if (v[n - 1] - ONE).norm() > tol {
            return Err(Error::Domain("last phase entry must be 1".into()));
        }
        if v.iter().any(|z| (z.norm() - 1.0).abs() > tol) {
            return Err(Error::Domain("phase entries must have unit modulus".into()));
        }
        let mut v = v;
        v[n - 1] = ONE;
        Ok(PhaseVector(v))
    }

    /// Projects onto the constraint set entrywise: `z / |z|`, keeping the
    /// matching entry of `fallback` where `z = 0`, and forcing the last entry
    /// to 1.
    pub fn project(target: &CVector, fallback: &PhaseVector) -> Self {
        let n = target.len();
        let mut v = CVector::from_element(n, ONE);
        for i in 0..n.saturating_sub(1) {
            let z = target[i];
            let r = z.norm();
            v[i] = if r > 0.0 { z / r } else { fallback.0[i] };
        }
        PhaseVector(v)
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn into_vector(self) -> CVector {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn reflect_len(&self) -> usize {
        self.0.len() - 1
    }

    /// Largest deviation from the constraint set.
    pub fn constraint_violation(&self) -> f64 {
        let n = self.0.len();
        let modulus = self.0.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
        modulus.max((self.0[n - 1] - ONE).norm())
    }
}

/// One stacked beamformer per user; the `b`-th block of length M belongs to BS `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    w: Vec<CVector>,
    antennas_per_bs: usize,
}

impl BeamformerSet {
    pub fn zeros(num_users: usize, num_bs: usize, antennas_per_bs: usize) -> Self {
        BeamformerSet {
            w: vec![CVector::zeros(num_bs * antennas_per_bs); num_users],
            antennas_per_bs,
        }
    }

    pub fn from_vectors(w: Vec<CVector>, antennas_per_bs: usize) -> Result<Self> {
        let len = w.first().map(|v| v.len()).unwrap_or(0);
        if antennas_per_bs == 0 && len > 0 || antennas_per_bs > 0 && !len.is_multiple_of(antennas_per_bs) {
            return Err(Error::Dimension(format!(
                "beamformer length {len} is not a multiple of M = {antennas_per_bs}"
            )));
        }
        if w.iter().any(|v| v.len() != len) {
            return Err(Error::Dimension("beamformers differ in length".into()));
        }
        Ok(BeamformerSet { w, antennas_per_bs })
    }

    pub fn num_users(&self) -> usize {
        self.w.len()
    }

    pub fn num_bs(&self) -> usize {
        if self.antennas_per_bs == 0 {
            0
        } else {
            self.w.first().map(|v| v.len() / self.antennas_per_bs).unwrap_or(0)
        }
    }

    pub fn antennas_per_bs(&self) -> usize {
        self.antennas_per_bs
    }

    pub fn user(&self, k: usize) -> &CVector {
        &self.w[k]
    }

    pub fn user_mut(&mut self, k: usize) -> &mut CVector {
        &mut self.w[k]
    }

    pub fn users(&self) -> &[CVector] {
        &self.w
    }

    /// The M-block `w_{b,k}`.
    pub fn block(&self, b: usize, k: usize) -> nalgebra::DVectorView<'_, Complex64> {
        self.w[k].rows(b * self.antennas_per_bs, self.antennas_per_bs)
    }

    /// `Σ_k ‖w_{b,k}‖²`.
    pub fn bs_power(&self, b: usize) -> f64 {
        (0..self.w.len()).map(|k| self.block(b, k).norm_squared()).sum()
    }

    pub fn bs_powers(&self) -> Vec<f64> {
        (0..self.num_bs()).map(|b| self.bs_power(b)).collect()
    }

    /// All beams stacked user-major into one vector of length M·B·K.
    pub fn stacked(&self) -> CVector {
        let len: usize = self.w.iter().map(|v| v.len()).sum();
        CVector::from_iterator(len, self.w.iter().flat_map(|v| v.iter().copied()))
    }

    pub fn from_stacked(x: &CVector, num_users: usize, antennas_per_bs: usize) -> Self {
        let per = if num_users == 0 { 0 } else { x.len() / num_users };
        let w = (0..num_users).map(|k| x.rows(k * per, per).into_owned()).collect();
        BeamformerSet { w, antennas_per_bs }
    }

    /// Worst relative violation of the per-BS budgets (0 when feasible).
    pub fn power_violation(&self, budgets: &[f64]) -> f64 {
        self.bs_powers()
            .iter()
            .zip(budgets)
            .map(|(p, cap)| ((p - cap) / cap.max(f64::MIN_POSITIVE)).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Stacked raw aggregate for user `k`: `(N·R + 1) × (M·B)`.
pub fn aggregate_user_channel(channels: &ChannelSet, scenario: &Scenario, k: usize) -> CMatrix {
    let reflect: Vec<&CVector> = channels.ris_user.iter().map(|row| &row[k]).collect();
    let direct: Vec<&CVector> = channels.direct_user.iter().map(|row| &row[k]).collect();
    stack_aggregate(channels, scenario, &reflect, &direct)
}

/// Stacked raw aggregate for Eve listening to user `k`.
pub fn aggregate_eve_channel(channels: &ChannelSet, scenario: &Scenario, k: usize) -> CMatrix {
    let reflect: Vec<&CVector> = channels.ris_eve.iter().map(|row| &row[k]).collect();
    let direct: Vec<&CVector> = channels.direct_eve.iter().collect();
    stack_aggregate(channels, scenario, &reflect, &direct)
}

fn stack_aggregate(channels: &ChannelSet, scenario: &Scenario, reflect: &[&CVector], direct: &[&CVector]) -> CMatrix {
    let (m, n) = (scenario.antennas_per_bs, scenario.elements_per_ris);
    let (bn, rn) = (scenario.num_bs(), scenario.num_ris());
    let mut h = CMatrix::zeros(n * rn + 1, m * bn);
    for b in 0..bn {
        for (r, f) in reflect.iter().enumerate() {
            let g = &channels.bs_ris[b][r];
            for e in 0..n {
                let c = f[e].conj();
                for a in 0..m {
                    h[(r * n + e, b * m + a)] = c * g[(e, a)];
                }
            }
        }
        for a in 0..m {
            h[(n * rn, b * m + a)] = direct[b][a].conj();
        }
    }
    h
}

/// Collapses a stacked aggregate to one row per RIS under fixed phases:
/// row `r` is `Σ_n conj(μ_{rN+n}) h[rN+n, :]`, the last row is the direct row.
fn collapse_per_ris(h: &CMatrix, mu: &PhaseVector, n: usize) -> CMatrix {
    let rn = if n == 0 { 0 } else { (h.nrows() - 1) / n };
    let cols = h.ncols();
    let mu = mu.as_vector();
    let mut out = CMatrix::zeros(rn + 1, cols);
    for r in 0..rn {
        for e in 0..n {
            let c = mu[r * n + e].conj();
            for j in 0..cols {
                out[(r, j)] += c * h[(r * n + e, j)];
            }
        }
    }
    for j in 0..cols {
        out[(rn, j)] = h[(h.nrows() - 1, j)];
    }
    out
}

/// Raw assignment-domain aggregates `(b_k, b_{e,k})`, each `(R + 1) × (M·B)`.
pub fn aggregate_assignment_channels(
    channels: &ChannelSet,
    scenario: &Scenario,
    mu: &PhaseVector,
    k: usize,
) -> (CMatrix, CMatrix) {
    let n = scenario.elements_per_ris;
    (
        collapse_per_ris(&aggregate_user_channel(channels, scenario, k), mu, n),
        collapse_per_ris(&aggregate_eve_channel(channels, scenario, k), mu, n),
    )
}

/// Noise-normalized aggregates `h̃_k = h_k / σ_k`, `h̃_{e,k} = h_{e,k} / σ_e`.
#[derive(Debug, Clone)]
pub struct AggregateChannels {
    pub h_user: Vec<CMatrix>,
    pub h_eve: Vec<CMatrix>,
}

impl AggregateChannels {
    pub fn new(channels: &ChannelSet, scenario: &Scenario) -> Self {
        let k = scenario.num_users();
        let se = Complex64::new(1.0 / scenario.noise_eve.sqrt(), 0.0);
        let h_user = (0..k)
            .map(|i| {
                aggregate_user_channel(channels, scenario, i) * Complex64::new(1.0 / scenario.noise_user[i].sqrt(), 0.0)
            })
            .collect();
        let h_eve = (0..k)
            .map(|i| aggregate_eve_channel(channels, scenario, i) * se)
            .collect();
        AggregateChannels { h_user, h_eve }
    }

    pub fn num_users(&self) -> usize {
        self.h_user.len()
    }

    pub fn phase_len(&self) -> usize {
        self.h_user.first().map(|h| h.nrows()).unwrap_or(1)
    }
}

/// Noise-normalized assignment-domain aggregates under fixed phases.
#[derive(Debug, Clone)]
pub struct AssignmentChannels {
    pub b_user: Vec<CMatrix>,
    pub b_eve: Vec<CMatrix>,
}

impl AssignmentChannels {
    pub fn new(channels: &ChannelSet, scenario: &Scenario, mu: &PhaseVector) -> Self {
        let mut b_user = Vec::new();
        let mut b_eve = Vec::new();
        for k in 0..scenario.num_users() {
            let (bu, be) = aggregate_assignment_channels(channels, scenario, mu, k);
            b_user.push(bu * Complex64::new(1.0 / scenario.noise_user[k].sqrt(), 0.0));
            b_eve.push(be * Complex64::new(1.0 / scenario.noise_eve.sqrt(), 0.0));
        }
        AssignmentChannels { b_user, b_eve }
    }
}

/// `vᴴ h w_j` for every user `j`.
pub fn beam_gains(h: &CMatrix, v: &CVector, w: &BeamformerSet) -> Vec<Complex64> {
    let row = h.adjoint() * v; // (vᴴ h)ᴴ
    w.users().iter().map(|wj| row.dotc(wj)).collect()
}

/// `|vᴴ h w_k|² / (Σ_{j≠k} |vᴴ h w_j|² + 1)` for a noise-normalized aggregate.
pub fn sinr(h: &CMatrix, v: &CVector, w: &BeamformerSet, k: usize) -> f64 {
    let gains = beam_gains(h, v, w);
    sinr_from_gains(&gains, k)
}

pub(crate) fn sinr_from_gains(gains: &[Complex64], k: usize) -> f64 {
    let interference: f64 = gains
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, g)| g.norm_sqr())
        .sum();
    gains[k].norm_sqr() / (interference + 1.0)
}

/// `[ln(1 + γ_user) − ln(1 + γ_eve)]⁺` in nats.
pub fn secrecy_rate(gamma_user: f64, gamma_eve: f64) -> f64 {
    (gamma_user.ln_1p() - gamma_eve.ln_1p()).max(0.0)
}

/// Objective and reported metric for one (W, μ) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WssrReport {
    /// `Σ_k η_k (ln(1+γ_k) − ln(1+γ_k^e))`, the optimized quantity.
    pub objective: f64,
    /// `Σ_k η_k [ln(1+γ_k) − ln(1+γ_k^e)]⁺`.
    pub clamped: f64,
    /// Per-user secrecy rate `[·]⁺` (unweighted).
    pub per_user: Vec<f64>,
}

fn report_from_sinrs(weights: &[f64], pairs: impl Iterator<Item = (f64, f64)>) -> WssrReport {
    let mut objective = 0.0;
    let mut clamped = 0.0;
    let mut per_user = Vec::with_capacity(weights.len());
    for ((gu, ge), eta) in pairs.zip(weights) {
        let diff = gu.ln_1p() - ge.ln_1p();
        objective += eta * diff;
        clamped += eta * diff.max(0.0);
        per_user.push(diff.max(0.0));
    }
    WssrReport {
        objective,
        clamped,
        per_user,
    }
}

/// Weighted sum secrecy rate in the phase domain.
pub fn wssr(weights: &[f64], aggregates: &AggregateChannels, w: &BeamformerSet, mu: &PhaseVector) -> WssrReport {
    let v = mu.as_vector();
    report_from_sinrs(
        weights,
        (0..aggregates.num_users()).map(|k| {
            (
                sinr(&aggregates.h_user[k], v, w, k),
                sinr(&aggregates.h_eve[k], v, w, k),
            )
        }),
    )
}

/// Weighted sum secrecy rate in the assignment domain; `u[k]` is the lifted
/// selection vector `[l_{1,k} … l_{R,k}, 1]`.
pub fn virtual_wssr(weights: &[f64], aggregates: &AssignmentChannels, w: &BeamformerSet, u: &[Vec<f64>]) -> WssrReport {
    report_from_sinrs(
        weights,
        (0..aggregates.b_user.len()).map(|k| {
            let v = CVector::from_iterator(u[k].len(), u[k].iter().map(|x| Complex64::new(*x, 0.0)));
            (
                sinr(&aggregates.b_user[k], &v, w, k),
                sinr(&aggregates.b_eve[k], &v, w, k),
            )
        }),
    )
}
