use std::f64::consts::TAU;

use proptest::prelude::*;

use ris_wssr::assign_lcr::{round_assignment, AssignmentMatrix, ROUNDING_FLOOR};
use ris_wssr::bf_sca::project_power;
use ris_wssr::driver::{apply_sweep_value, format_f64, scale_to_budgets, SweepParam};
use ris_wssr::network::{wssr, AggregateChannels, BeamformerSet, PhaseVector};
use ris_wssr::par::{self, ExecMode};
use ris_wssr::phase_admm::{augmented_lagrangian, project_discrete, select_penalty, AdmmSolver, PhaseQuadratic};
use ris_wssr::scenario::{synthesize_channels, Scenario};
use ris_wssr::{CMatrix, CVector, Complex64};

fn cvec(parts: &[(f64, f64)]) -> CVector {
    CVector::from_iterator(parts.len(), parts.iter().map(|&(re, im)| Complex64::new(re, im)))
}

fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn beamformers(num_bs: usize, m: usize, k: usize) -> impl Strategy<Value = BeamformerSet> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), num_bs * m * k).prop_map(move |xs| {
        let users = xs.chunks(num_bs * m).map(cvec).collect();
        BeamformerSet::from_vectors(users, m).unwrap()
    })
}

fn phase_problem() -> impl Strategy<Value = (PhaseQuadratic, Vec<f64>)> {
    (1usize..8).prop_flat_map(|n| {
        (
            prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * n),
            prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), n),
            prop::collection::vec(0.0..TAU, n - 1),
        )
            .prop_map(move |(g, v, angles)| {
                let g = CMatrix::from_iterator(n, n, g.into_iter().map(|(re, im)| Complex64::new(re, im)));
                let q = PhaseQuadratic {
                    a: &g * g.adjoint(),
                    v: cvec(&v),
                    offset: 0.0,
                    constant: 0.0,
                };
                (q, angles)
            })
    })
}

fn tiny_scenario(seed: u64, k: usize) -> Scenario {
    let mut s = Scenario::baseline();
    s.elements_per_ris = 3;
    s.antennas_per_bs = 2;
    s.set_num_users(k);
    s.rng_seed = seed;
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn continuous_projection_is_nearest_unit_point(parts in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..12)) {
        let target = cvec(&parts);
        let fallback = PhaseVector::ones(parts.len() - 1);
        let mu = PhaseVector::project(&target, &fallback);
        prop_assert!(mu.constraint_violation() <= 1e-12);
        for i in 0..mu.reflect_len() {
            if target[i].norm() > 1e-9 {
                prop_assert!(circ_dist(mu.as_vector()[i].arg(), target[i].arg()) <= 1e-12);
            }
        }
    }

    #[test]
    fn discrete_projection_picks_nearest_level(angles in prop::collection::vec(0.0..TAU, 1..10), bits in 1u32..5) {
        let mu = PhaseVector::from_angles(&angles);
        let q = project_discrete(&mu, bits);
        let step = TAU / f64::from(1u32 << bits);
        prop_assert!(q.constraint_violation() <= 1e-12);
        for (i, &a) in angles.iter().enumerate() {
            let got = q.as_vector()[i].arg().rem_euclid(TAU);
            let level = got / step;
            prop_assert!((level - level.round()).abs() < 1e-9);
            let best = (0..1u32 << bits).map(|l| circ_dist(a, f64::from(l) * step)).fold(f64::INFINITY, f64::min);
            prop_assert!(circ_dist(a, got) <= best + 1e-12);
        }
    }

    #[test]
    fn power_projection_respects_budgets(w in beamformers(3, 2, 2), caps in prop::collection::vec(0.01..4.0f64, 3)) {
        let before = w.bs_powers();
        let mut p = w.clone();
        project_power(&mut p, &caps);
        for (b, cap) in caps.iter().enumerate() {
            prop_assert!(p.bs_power(b) <= cap * (1.0 + 1e-12));
            if before[b] <= *cap {
                prop_assert_eq!(p.block(b, 0), w.block(b, 0));
            }
        }
        let mut s = w.clone();
        scale_to_budgets(&mut s, &caps);
        for (b, cap) in caps.iter().enumerate() {
            if before[b] > 0.0 {
                prop_assert!((s.bs_power(b) - cap).abs() <= 1e-12 * cap);
            }
        }
    }

    #[test]
    fn rounding_keeps_largest_entries(u in prop::collection::vec(0.0..1.0f64, 1..8), r_assign in 0usize..5) {
        let mut lifted = u.clone();
        lifted.push(1.0);
        let (bin, col) = round_assignment(&lifted, r_assign);
        prop_assert_eq!(bin.len(), lifted.len());
        prop_assert_eq!(*bin.last().unwrap(), 1.0);
        let chosen: Vec<f64> = col.iter().zip(&u).filter(|(c, _)| **c).map(|(_, x)| *x).collect();
        let rest: Vec<f64> = col.iter().zip(&u).filter(|(c, _)| !**c).map(|(_, x)| *x).collect();
        prop_assert!(chosen.len() <= r_assign);
        prop_assert!(chosen.iter().all(|x| *x > ROUNDING_FLOOR));
        let min_chosen = chosen.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(rest.iter().all(|x| *x <= min_chosen));
        if chosen.len() < r_assign {
            prop_assert!(rest.iter().all(|x| *x <= ROUNDING_FLOOR));
        }
        let l = AssignmentMatrix::from_columns(std::slice::from_ref(&col));
        prop_assert!(l.is_feasible(r_assign));
        prop_assert_eq!(l.lifted(0), bin);
    }

    #[test]
    fn assignment_feasibility_matches_column_sums(cols in prop::collection::vec(prop::collection::vec(any::<bool>(), 4), 1..5), r in 0usize..5) {
        let l = AssignmentMatrix::from_columns(&cols);
        let want = cols.iter().all(|c| c.iter().filter(|x| **x).count() <= r);
        prop_assert_eq!(l.is_feasible(r), want);
        prop_assert_eq!(l.to_mask().selected, l.l);
    }

    #[test]
    fn admm_cycles_never_raise_the_augmented_lagrangian((q, angles) in phase_problem(), factor in 2.01..6.0f64) {
        let delta = select_penalty(&q.a, factor);
        let solver = AdmmSolver::new(&q, delta).unwrap();
        let mut state = solver.initial_state(&PhaseVector::from_angles(&angles));
        let mut prev = augmented_lagrangian(&q, &state, delta);
        for _ in 0..40 {
            state = solver.step(&state);
            let g = augmented_lagrangian(&q, &state, delta);
            prop_assert!(g <= prev + 1e-9 * (1.0 + prev.abs()), "{} -> {}", prev, g);
            prop_assert!(state.mu.constraint_violation() <= 1e-12);
            prev = g;
        }
    }

    #[test]
    fn clamped_wssr_dominates_objective(seed in 0u64..1000, k in 1usize..4, eta in prop::collection::vec(0.0..=1.0f64, 3), angles in prop::collection::vec(0.0..TAU, 6)) {
        let s = tiny_scenario(seed, k);
        let ch = synthesize_channels(&s).unwrap();
        let agg = AggregateChannels::new(&ch, &s);
        let mut w = BeamformerSet::from_vectors(agg.h_user.iter().map(|h| h.adjoint() * CVector::from_element(7, Complex64::new(1.0, 0.0))).collect(), 2).unwrap();
        scale_to_budgets(&mut w, &s.power_budget);
        let mu = PhaseVector::from_angles(&angles);
        let r = wssr(&eta[..k], &agg, &w, &mu);
        prop_assert!(r.clamped >= r.objective - 1e-15);
        prop_assert!(r.clamped >= 0.0);
        prop_assert!(r.per_user.iter().all(|x| *x >= 0.0));
        let direct: f64 = r.per_user.iter().zip(&eta).map(|(x, e)| x * e).sum();
        prop_assert!((direct - r.clamped).abs() <= 1e-12 * (1.0 + direct));
        let zero = wssr(&vec![0.0; k], &agg, &w, &mu);
        prop_assert_eq!(zero.objective, 0.0);
    }

    #[test]
    fn numbers_round_trip_through_text(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let back: f64 = format_f64(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn execution_modes_agree(xs in prop::collection::vec(any::<i64>(), 0..300)) {
        let f = |x: &i64| x.wrapping_mul(31).rotate_left(7);
        prop_assert_eq!(par::map(ExecMode::Sequential, &xs, f), par::map(ExecMode::Parallel, &xs, f));
    }

    #[test]
    fn integer_sweep_parameters_reject_fractions(v in 0.0..50.0f64) {
        prop_assume!(v.fract() != 0.0);
        for p in [SweepParam::RisElements, SweepParam::NumUsers, SweepParam::RAssign, SweepParam::PhaseBits] {
            prop_assert!(apply_sweep_value(&mut Scenario::baseline(), p, v).is_err());
        }
    }
}

#[test]
fn channel_synthesis_is_seed_deterministic() {
    let s = tiny_scenario(42, 3);
    let a = synthesize_channels(&s).unwrap();
    let b = synthesize_channels(&s).unwrap();
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    let mut t = s.clone();
    t.rng_seed = 43;
    assert_ne!(format!("{a:?}"), format!("{:?}", synthesize_channels(&t).unwrap()));
}
