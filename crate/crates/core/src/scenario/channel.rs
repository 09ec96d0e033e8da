//! Path loss, Rician fading and per-link channel synthesis.
//!
//! Every link draws from its own ChaCha8 stream: the 64-bit key is the
//! scenario seed and the 64-bit stream id packs
//! `class (4 bits) | block (20 bits) | a (20 bits) | b (20 bits)`,
//! where `(a, b)` are the endpoint indices of the link (`b` is the RIS index
//! for BS → RIS links and the user index for links ending at a user or, with
//! per-user Eve channels, at Eve). Adding, removing or skipping a link never
//! perturbs the draws of any other link, and block `n > 0` redraws the
//! small-scale fading of the same geometry.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Position, Scenario};
use crate::error::{Error, Result};
use crate::{CMatrix, CVector, Complex64};

/// Large-scale reference path loss `L0 · (d / d0)^(-τ)` as a linear power gain.
pub fn path_loss(distance: f64, exponent: f64, reference_gain: f64, reference_distance: f64) -> Result<f64> {
    if !(distance > 0.0) || !(reference_distance > 0.0) {
        return Err(Error::Domain(format!(
            "path loss needs positive distances (d = {distance}, d0 = {reference_distance})"
        )));
    }
    Ok(reference_gain * (distance / reference_distance).powf(-exponent))
}

/// Uniform linear array response; element `i` is `exp(j 2π s i sin θ)`.
pub fn steering_vector(angle: f64, count: usize, spacing_over_wavelength: f64) -> CVector {
    let phase = 2.0 * PI * spacing_over_wavelength * angle.sin();
    CVector::from_iterator(count, (0..count).map(|i| Complex64::from_polar(1.0, phase * i as f64)))
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Rician small-scale fading `√(K/(K+1)) q(aoa) q(aod)ᴴ + √(1/(K+1)) H_NLoS`
/// with unit-variance circularly-symmetric Gaussian scattering.
pub fn rician_channel<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    k_factor: f64,
    aoa: f64,
    aod: f64,
    spacing_over_wavelength: f64,
    rng: &mut R,
) -> Result<CMatrix> {
    if !(k_factor >= 0.0) {
        return Err(Error::Domain(format!(
            "Rician factor must be non-negative, got {k_factor}"
        )));
    }
    let (los_w, nlos_w) = if k_factor.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k_factor / (k_factor + 1.0)).sqrt(), (1.0 / (k_factor + 1.0)).sqrt())
    };
    let rx = steering_vector(aoa, rows, spacing_over_wavelength);
    let tx = steering_vector(aod, cols, spacing_over_wavelength);
    // Column-major fill keeps the draw order fixed for a given shape.
    let nlos = CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng));
    let los = &rx * tx.adjoint();
    Ok(los * Complex64::new(los_w, 0.0) + nlos * Complex64::new(nlos_w, 0.0))
}

/// Link classes, each with its own path-loss exponent and Rician factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkClass {
    BsUser,
    BsEve,
    RisUser,
    RisEve,
    BsRis,
}

impl LinkClass {
    fn tag(self) -> u64 {
        match self {
            LinkClass::BsUser => 1,
            LinkClass::BsEve => 2,
            LinkClass::RisUser => 3,
            LinkClass::RisEve => 4,
            LinkClass::BsRis => 5,
        }
    }
}

/// Deterministic per-link random streams.
#[derive(Debug, Clone, Copy)]
pub struct LinkStreams {
    pub seed: u64,
    pub block: u32,
}

impl LinkStreams {
    pub fn new(seed: u64, block: u32) -> Self {
        LinkStreams { seed, block }
    }

    pub fn stream_id(&self, class: LinkClass, a: usize, b: usize) -> u64 {
        const MASK20: u64 = (1 << 20) - 1;
        (class.tag() << 60) | ((self.block as u64 & MASK20) << 40) | ((a as u64 & MASK20) << 20) | (b as u64 & MASK20)
    }

    pub fn rng(&self, class: LinkClass, a: usize, b: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id(class, a, b));
        rng
    }
}

/// Raw per-link channels.
///
/// Conventions follow the downlink signal model: a user receives
/// `Σ_b (H_{b,k}ᴴ + Σ_r F_{r,k}ᴴ Θ_rᴴ G_{b,r}) x_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `[b][k]`, M×1.
    pub direct_user: Vec<Vec<CVector>>,
    /// `[b]`, M×1.
    pub direct_eve: Vec<CVector>,
    /// `[b][r]`, N×M.
    pub bs_ris: Vec<Vec<CMatrix>>,
    /// `[r][k]`, N×1.
    pub ris_user: Vec<Vec<CVector>>,
    /// `[r][k]`, N×1. Identical across `k` unless per-user Eve channels are
    /// requested.
    pub ris_eve: Vec<Vec<CVector>>,
}

impl ChannelSet {
    pub fn num_bs(&self) -> usize {
        self.direct_eve.len()
    }

    pub fn num_ris(&self) -> usize {
        self.ris_user.len()
    }

    pub fn num_users(&self) -> usize {
        self.direct_user.first().map(Vec::len).unwrap_or(0)
    }

    pub fn all_finite(&self) -> bool {
        let fin_v = |v: &CVector| v.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        let fin_m = |m: &CMatrix| m.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        self.direct_user.iter().flatten().all(fin_v)
            && self.direct_eve.iter().all(fin_v)
            && self.bs_ris.iter().flatten().all(fin_m)
            && self.ris_user.iter().flatten().all(fin_v)
            && self.ris_eve.iter().flatten().all(fin_v)
    }
}

/// Which RIS → user reflection links to synthesize: `selected[r][k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkMask {
    pub selected: Vec<Vec<bool>>,
}

impl LinkMask {
    pub fn all(num_ris: usize, num_users: usize) -> Self {
        LinkMask {
            selected: vec![vec![true; num_users]; num_ris],
        }
    }

    pub fn ris_in_use(&self, r: usize) -> bool {
        self.selected[r].iter().any(|&s| s)
    }

    /// Selected `(r, k)` pairs in row-major order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (r, row) in self.selected.iter().enumerate() {
            for (k, &s) in row.iter().enumerate() {
                if s {
                    out.push((r, k));
                }
            }
        }
        out
    }
}

fn distance(a: &Position, b: &Position) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Azimuths `(aoa, aod)` for a link from `tx` to `rx`, measured in the x–y plane.
fn azimuths(tx: &Position, rx: &Position) -> (f64, f64) {
    let aod = (rx[1] - tx[1]).atan2(rx[0] - tx[0]);
    let aoa = (tx[1] - rx[1]).atan2(tx[0] - rx[0]);
    (aoa, aod)
}

/// Draws one link as an `rx × tx` matrix including large-scale attenuation.
fn draw_link(
    scenario: &Scenario,
    streams: &LinkStreams,
    class: LinkClass,
    (a, b): (usize, usize),
    (tx, rx): (&Position, &Position),
    (rows, cols): (usize, usize),
) -> Result<CMatrix> {
    let d = distance(tx, rx);
    if d <= 0.0 {
        return Err(Error::Domain(format!(
            "coincident endpoints on {class:?} link ({a}, {b})"
        )));
    }
    let gain = path_loss(
        d,
        scenario.pathloss_exponents.get(class),
        scenario.reference_gain,
        scenario.reference_distance,
    )?;
    let (aoa, aod) = azimuths(tx, rx);
    let mut rng = streams.rng(class, a, b);
    let h = rician_channel(
        rows,
        cols,
        scenario.rician_factors.get(class),
        aoa,
        aod,
        scenario.antenna_spacing_over_wavelength,
        &mut rng,
    )?;
    Ok(h * Complex64::new(gain.sqrt(), 0.0))
}

/// Receive-side row (1 × tx) → channel vector convention (`row = hᴴ`).
fn row_to_vector(row: CMatrix) -> CVector {
    CVector::from_iterator(row.ncols(), row.row(0).iter().map(|z| z.conj()))
}

/// Synthesizes every link of the scenario for the first coherence block.
pub fn synthesize_channels(scenario: &Scenario) -> Result<ChannelSet> {
    synthesize_block(scenario, 0, None)
}

/// Synthesizes coherence block `block`. Geometry (path loss, LoS) is the same
/// for every block; the scattered component is redrawn per block. When a
/// mask is given only the selected RIS → user/Eve links (and the BS → RIS
/// links of surfaces that serve someone) are drawn; the rest stay zero.
pub fn synthesize_block(scenario: &Scenario, block: u32, mask: Option<&LinkMask>) -> Result<ChannelSet> {
    scenario.validate()?;
    let streams = LinkStreams::new(scenario.rng_seed, block);
    let (bn, rn, kn) = (scenario.num_bs(), scenario.num_ris(), scenario.num_users());
    let (m, n) = (scenario.antennas_per_bs, scenario.elements_per_ris);
    if let Some(mask) = mask {
        if mask.selected.len() != rn || mask.selected.iter().any(|row| row.len() != kn) {
            return Err(Error::Dimension(format!("link mask must be {rn}×{kn}")));
        }
    }
    let selected = |r: usize, k: usize| mask.map(|mk| mk.selected[r][k]).unwrap_or(true);
    let ris_used = |r: usize| mask.map(|mk| mk.ris_in_use(r)).unwrap_or(true);

    let mut direct_user = Vec::with_capacity(bn);
    let mut direct_eve = Vec::with_capacity(bn);
    let mut bs_ris = Vec::with_capacity(bn);
    for (b, bs) in scenario.bs_positions.iter().enumerate() {
        let mut row = Vec::with_capacity(kn);
        for (k, user) in scenario.user_positions.iter().enumerate() {
            let h = draw_link(scenario, &streams, LinkClass::BsUser, (b, k), (bs, user), (1, m))?;
            row.push(row_to_vector(h));
        }
        direct_user.push(row);
        let h = draw_link(
            scenario,
            &streams,
            LinkClass::BsEve,
            (b, 0),
            (bs, &scenario.eve_position),
            (1, m),
        )?;
        direct_eve.push(row_to_vector(h));
        let mut g_row = Vec::with_capacity(rn);
        for (r, ris) in scenario.ris_positions.iter().enumerate() {
            if ris_used(r) {
                g_row.push(draw_link(
                    scenario,
                    &streams,
                    LinkClass::BsRis,
                    (b, r),
                    (bs, ris),
                    (n, m),
                )?);
            } else {
                g_row.push(CMatrix::zeros(n, m));
            }
        }
        bs_ris.push(g_row);
    }

    let mut ris_user = Vec::with_capacity(rn);
    let mut ris_eve = Vec::with_capacity(rn);
    for (r, ris) in scenario.ris_positions.iter().enumerate() {
        let mut f_row = Vec::with_capacity(kn);
        for (k, user) in scenario.user_positions.iter().enumerate() {
            if selected(r, k) {
                let f = draw_link(scenario, &streams, LinkClass::RisUser, (r, k), (ris, user), (1, n))?;
                f_row.push(row_to_vector(f));
            } else {
                f_row.push(CVector::zeros(n));
            }
        }
        ris_user.push(f_row);

        let shared = if !scenario.eve_channel_per_user && (0..kn).any(|k| selected(r, k)) {
            let f = draw_link(
                scenario,
                &streams,
                LinkClass::RisEve,
                (r, 0),
                (ris, &scenario.eve_position),
                (1, n),
            )?;
            Some(row_to_vector(f))
        } else {
            None
        };
        let mut e_row = Vec::with_capacity(kn);
        for k in 0..kn {
            if !selected(r, k) {
                e_row.push(CVector::zeros(n));
            } else if let Some(f) = &shared {
                e_row.push(f.clone());
            } else {
                let f = draw_link(
                    scenario,
                    &streams,
                    LinkClass::RisEve,
                    (r, k),
                    (ris, &scenario.eve_position),
                    (1, n),
                )?;
                e_row.push(row_to_vector(f));
            }
        }
        ris_eve.push(e_row);
    }

    Ok(ChannelSet {
        direct_user,
        direct_eve,
        bs_ris,
        ris_user,
        ris_eve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_loss_reference_values() {
        // -30 dB at the reference distance, whatever the exponent.
        for tau in [2.0, 2.5, 3.5] {
            assert!((path_loss(1.0, tau, 1e-3, 1.0).unwrap() - 1e-3).abs() < 1e-18);
        }
        assert_eq!(path_loss(7.5, 3.0, 0.25, 7.5).unwrap(), 0.25);
        // 1e-3 · 10^-2 = 1e-5 (-50 dB).
        assert!((path_loss(10.0, 2.0, 1e-3, 1.0).unwrap() - 1e-5).abs() < 1e-20);
        assert!(path_loss(0.0, 2.0, 1e-3, 1.0).is_err());
        assert!(path_loss(-1.0, 2.0, 1e-3, 1.0).is_err());
        assert!(path_loss(1.0, 2.0, 1e-3, 0.0).is_err());
    }

    #[test]
    fn steering_vector_examples() {
        let one = steering_vector(0.7, 1, 0.5);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0], Complex64::new(1.0, 0.0));
        let flat = steering_vector(0.0, 6, 0.5);
        assert!(flat.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let broadside = steering_vector(PI / 2.0, 2, 0.5);
        assert!((broadside[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((broadside[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rician_zero_factor_is_pure_scattering() {
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        let h = rician_channel(3, 4, 0.0, 0.3, -0.2, 0.5, &mut a).unwrap();
        let nlos = CMatrix::from_fn(3, 4, |_, _| complex_gaussian(&mut b));
        assert!((h - nlos).norm() < 1e-14);
    }

    #[test]
    fn rician_large_factor_is_los() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = rician_channel(4, 3, 1e12, 0.4, 1.1, 0.5, &mut rng).unwrap();
        let los = steering_vector(0.4, 4, 0.5) * steering_vector(1.1, 3, 0.5).adjoint();
        assert!(h.iter().zip(los.iter()).all(|(x, y)| (x - y).norm() < 1e-5));
    }

    #[test]
    fn rician_rejects_negative_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(rician_channel(2, 2, -0.1, 0.0, 0.0, 0.5, &mut rng).is_err());
    }

    #[test]
    fn synthesis_is_deterministic() {
        let s = Scenario::baseline();
        let a = synthesize_channels(&s).unwrap();
        let b = synthesize_channels(&s).unwrap();
        assert_eq!(a, b);
        assert!(a.all_finite());
        let mut s2 = s.clone();
        s2.rng_seed = 2;
        assert_ne!(a, synthesize_channels(&s2).unwrap());
    }

    #[test]
    fn no_ris_keeps_direct_links() {
        let s = Scenario::baseline().without_ris();
        let ch = synthesize_channels(&s).unwrap();
        assert!(ch.bs_ris.iter().all(Vec::is_empty));
        assert!(ch.ris_user.is_empty() && ch.ris_eve.is_empty());
        assert_eq!(ch.direct_user.len(), 3);
        assert!(ch.direct_user[0][0].norm() > 0.0);
        // Direct links are drawn from their own streams, so removing the RISs
        // does not change them.
        let full = synthesize_channels(&Scenario::baseline()).unwrap();
        assert_eq!(ch.direct_user, full.direct_user);
        assert_eq!(ch.direct_eve, full.direct_eve);
    }

    #[test]
    fn shared_eve_channel_by_default() {
        let ch = synthesize_channels(&Scenario::baseline()).unwrap();
        for row in &ch.ris_eve {
            assert!(row.iter().all(|f| f == &row[0]));
        }
        let mut s = Scenario::baseline();
        s.eve_channel_per_user = true;
        let ch = synthesize_channels(&s).unwrap();
        assert_ne!(ch.ris_eve[0][0], ch.ris_eve[0][1]);
    }

    #[test]
    fn coincident_endpoints_rejected() {
        let mut s = Scenario::baseline();
        s.user_positions[0] = s.bs_positions[0];
        assert!(matches!(synthesize_channels(&s), Err(Error::Domain(_))));
    }

    #[test]
    fn masked_block_matches_full_draw_on_selected_links() {
        let s = Scenario::baseline();
        let full = synthesize_block(&s, 0, None).unwrap();
        let mask = LinkMask {
            selected: vec![vec![true, false, true], vec![false, false, false]],
        };
        let masked = synthesize_block(&s, 0, Some(&mask)).unwrap();
        assert_eq!(masked.direct_user, full.direct_user);
        assert_eq!(masked.ris_user[0][0], full.ris_user[0][0]);
        assert_eq!(masked.ris_user[0][2], full.ris_user[0][2]);
        assert_eq!(masked.ris_user[0][1].norm(), 0.0);
        assert_eq!(masked.bs_ris[0][0], full.bs_ris[0][0]);
        assert_eq!(masked.bs_ris[0][1].norm(), 0.0);
        assert_eq!(masked.ris_eve[1][0].norm(), 0.0);
        let next = synthesize_block(&s, 1, None).unwrap();
        assert_ne!(next.direct_user, full.direct_user);
    }

    #[test]
    fn stream_ids_are_distinct() {
        let st = LinkStreams::new(1, 3);
        let mut ids = std::collections::HashSet::new();
        for class in [
            LinkClass::BsUser,
            LinkClass::BsEve,
            LinkClass::RisUser,
            LinkClass::RisEve,
            LinkClass::BsRis,
        ] {
            for a in 0..4 {
                for b in 0..4 {
                    assert!(ids.insert(st.stream_id(class, a, b)));
                }
            }
        }
    }
}
