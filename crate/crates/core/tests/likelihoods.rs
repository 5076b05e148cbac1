use fgts::env::ArmSet;
use fgts::likelihoods::{
    argmax_arm, loss_eval, loss_grad, smoothed_bonus, softplus_smooth, BanditPosterior,
    BetaSchedule, History, LikelihoodKind, LikelihoodSpec,
};
use fgts::linalg::dot;
use fgts::samplers::Target;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, sd: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sd * z
        })
        .collect()
}

fn random_history(rng: &mut ChaCha8Rng, d: usize, arms: usize, n: usize) -> History {
    let mut h = History::new(d);
    for t in 0..n {
        let set: Vec<Vec<f64>> = (0..arms).map(|_| gaussian_vec(rng, d, 1.0)).collect();
        let chosen = rng.random_range(0..arms);
        let r: f64 = StandardNormal.sample(rng);
        h.push(ArmSet::new(set, t + 1).unwrap(), chosen, r).unwrap();
    }
    h
}

fn spec_with(kind: LikelihoodKind, lambda: f64, cap: f64, beta: f64) -> LikelihoodSpec {
    LikelihoodSpec {
        kind,
        lambda_fg: lambda,
        cap,
        ..LikelihoodSpec::ts(BetaSchedule::constant(beta))
    }
}

#[test]
fn softplus_reference_values() {
    assert!((softplus_smooth(0.0, 10.0) - 2f64.ln() / 10.0).abs() < 1e-15);
    assert!((softplus_smooth(0.0, 1.0) - 2f64.ln()).abs() < 1e-15);
    assert!((softplus_smooth(5.0, 10.0) - 5.0).abs() <= 2e-22_f64.max(f64::EPSILON * 5.0));
    // No overflow far out in either tail.
    assert_eq!(softplus_smooth(-1e6, 10.0), 0.0);
    assert_eq!(softplus_smooth(1e6, 10.0), 1e6);
}

#[test]
fn empty_history_at_origin_is_zero() {
    let h = History::new(3);
    for kind in [LikelihoodKind::Ts, LikelihoodKind::Fg, LikelihoodKind::Sfg] {
        let spec = spec_with(kind, 0.5, 1000.0, 1.0);
        assert_eq!(loss_eval(&spec, &[0.0; 3], &h, 1).unwrap(), 0.0);
        assert_eq!(loss_grad(&spec, &[0.0; 3], &h, 1).unwrap(), vec![0.0; 3]);
    }
}

#[test]
fn exact_fit_with_active_bonus() {
    let mut h = History::new(2);
    h.push(ArmSet::new(vec![vec![1.0, 0.0]], 1).unwrap(), 0, 1.0)
        .unwrap();
    let spec = LikelihoodSpec {
        prior_sd: 1e200,
        ..spec_with(LikelihoodKind::Fg, 0.5, 1000.0, 1.0)
    };
    let v = loss_eval(&spec, &[1.0, 0.0], &h, 1).unwrap();
    assert!((v + 0.5).abs() < 1e-12, "{v}");
}

#[test]
fn single_entry_quadratic_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = gaussian_vec(&mut rng, 4, 1.0);
    let theta = gaussian_vec(&mut rng, 4, 1.0);
    let r = 0.7;
    let mut h = History::new(4);
    h.push(ArmSet::new(vec![x.clone()], 1).unwrap(), 0, r)
        .unwrap();
    let beta = 3.0;
    let spec = LikelihoodSpec {
        eta: 2.0,
        ..spec_with(LikelihoodKind::Fg, 0.0, 1000.0, beta)
    };
    let inv_var = 1.0 / (spec.prior_sd * spec.prior_sd);
    let resid = dot(&x, &theta) - r;
    let expected: Vec<f64> = (0..4)
        .map(|i| beta * (2.0 * spec.eta * resid * x[i] + theta[i] * inv_var))
        .collect();
    let got = loss_grad(&spec, &theta, &h, 1).unwrap();
    for (a, b) in got.iter().zip(&expected) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }
}

#[test]
fn beta_schedule_values() {
    let c = BetaSchedule::constant(1000.0);
    assert_eq!(c.beta_at(1).unwrap(), 1000.0);
    assert_eq!(c.beta_at(9999).unwrap(), 1000.0);
    assert_eq!(BetaSchedule::constant(1.0).beta_at(5).unwrap(), 1.0);

    let s = BetaSchedule::d_log_t(1000.0, 20, 10_000);
    let inv = 1.0 / s.beta_at(10_000).unwrap();
    let expected = 20.0 * 10_000f64.ln() / 1000.0;
    assert!((inv - expected).abs() <= 1e-12 * expected);
    // β shrinks as t grows.
    assert!(s.beta_at(1).unwrap() > s.beta_at(100).unwrap());
    assert!(s.beta_at(0).is_err());
    assert!(s.beta_at(10_001).is_err());
    assert!(BetaSchedule::d_log_t(1000.0, 20, 1).validate().is_err());
    assert!(BetaSchedule::constant(0.0).validate().is_err());
}

#[test]
fn unresolved_schedule_takes_run_dimensions() {
    let s = BetaSchedule::d_log_t(1000.0, 0, 0).resolve(20, 500);
    assert_eq!(s, BetaSchedule::d_log_t(1000.0, 20, 500));
    let s = BetaSchedule::d_log_t(1000.0, 8, 0).resolve(20, 500);
    assert_eq!(s, BetaSchedule::d_log_t(1000.0, 8, 500));
}

#[test]
fn fg_at_zero_lambda_is_ts_bit_for_bit() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..100 {
        let d = 1 + case % 7;
        let h = random_history(&mut rng, d, 3, case % 13);
        // Include huge θ so the FG bonus would be capped.
        let sd = if case % 5 == 0 { 1e4 } else { 1.0 };
        let theta = gaussian_vec(&mut rng, d, sd);
        let ts = LikelihoodSpec::ts(BetaSchedule::constant(7.0));
        let fg = LikelihoodSpec::fg(0.0, BetaSchedule::constant(7.0));
        assert_eq!(
            loss_eval(&ts, &theta, &h, 1).unwrap().to_bits(),
            loss_eval(&fg, &theta, &h, 1).unwrap().to_bits()
        );
        let (a, b) = (
            loss_grad(&ts, &theta, &h, 1).unwrap(),
            loss_grad(&fg, &theta, &h, 1).unwrap(),
        );
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn statistics_and_scan_paths_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..40 {
        let h = random_history(&mut rng, 5, 4, 20);
        let theta = gaussian_vec(&mut rng, 5, 1.0);
        let kind = [LikelihoodKind::Ts, LikelihoodKind::Fg][case % 2];
        let spec = spec_with(kind, 0.3, 1000.0, 2.0);
        let post = BanditPosterior::new(&spec, &h, 1).unwrap();
        let (a, b) = (
            post.potential(&theta).unwrap(),
            post.potential_scan(&theta).unwrap(),
        );
        assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        let (ga, gb) = (
            post.gradient(&theta).unwrap(),
            post.gradient_scan(&theta).unwrap(),
        );
        for (x, y) in ga.iter().zip(&gb) {
            assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()));
        }
    }
}

#[test]
fn term_gradients_plus_prior_sum_to_full_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = random_history(&mut rng, 4, 3, 15);
    let theta = gaussian_vec(&mut rng, 4, 1.0);
    for kind in [LikelihoodKind::Ts, LikelihoodKind::Fg, LikelihoodKind::Sfg] {
        let spec = spec_with(kind, 0.4, 0.5, 1.5);
        let post = BanditPosterior::new(&spec, &h, 1).unwrap();
        let mut sum = post.prior_gradient(&theta).unwrap();
        for i in 0..post.num_terms() {
            for (s, g) in sum.iter_mut().zip(post.term_gradient(i, &theta).unwrap()) {
                *s += g;
            }
        }
        let full = post.gradient(&theta).unwrap();
        for (a, b) in sum.iter().zip(&full) {
            assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{kind:?}");
        }
    }
}

/// Central differences on the potential, skipping instances within 1e-3 of a
/// kink (FG cap crossing or a change of SFG maximiser).
fn near_kink(spec: &LikelihoodSpec, h: &History, theta: &[f64]) -> bool {
    h.entries().iter().any(|e| {
        let f = dot(e.chosen_x(), theta);
        let fg_kink = spec.kind == LikelihoodKind::Fg && (f - spec.cap).abs() <= 1e-3;
        let sfg_kink = spec.kind == LikelihoodKind::Sfg && {
            let mut vals: Vec<f64> = (0..e.armset.len())
                .map(|i| dot(e.armset.arm(i).unwrap(), theta))
                .collect();
            vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
            vals.len() > 1 && vals[0] - vals[1] <= 1e-3
        };
        fg_kink || sfg_kink
    })
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 50 {
        let d = rng.random_range(2..6);
        let n = rng.random_range(1..12);
        let h = random_history(&mut rng, d, 3, n);
        let theta = gaussian_vec(&mut rng, d, 1.0);
        let kind = [LikelihoodKind::Ts, LikelihoodKind::Fg, LikelihoodKind::Sfg][checked % 3];
        let cap = if rng.random::<bool>() {
            1000.0
        } else {
            rng.random_range(-1.0..1.0)
        };
        let spec = LikelihoodSpec {
            eta: rng.random_range(0.5..3.0),
            smooth: rng.random_range(1.0..20.0),
            ..spec_with(
                kind,
                rng.random_range(0.0..1.0),
                cap,
                rng.random_range(0.5..3.0),
            )
        };
        if near_kink(&spec, &h, &theta) {
            continue;
        }
        let g = loss_grad(&spec, &theta, &h, 1).unwrap();
        let hstep = 1e-5;
        let mut fd = vec![0.0; d];
        for i in 0..d {
            let (mut up, mut dn) = (theta.clone(), theta.clone());
            up[i] += hstep;
            dn[i] -= hstep;
            fd[i] = (loss_eval(&spec, &up, &h, 1).unwrap() - loss_eval(&spec, &dn, &h, 1).unwrap())
                / (2.0 * hstep);
        }
        let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let err = g
            .iter()
            .zip(&fd)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err / scale <= 1e-5, "{kind:?} rel err {}", err / scale);
        checked += 1;
    }
}

#[test]
fn sfg_gradient_direction_lowers_bonus_weight() {
    // One arm set, θ with f* far below the cap: the bonus slope is ≈ 1 and the
    // SFG gradient should equal TS gradient minus λ·a*.
    let mut h = History::new(2);
    let arms = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    h.push(ArmSet::new(arms, 1).unwrap(), 0, 0.0).unwrap();
    let theta = [0.2, 0.5];
    let ts = spec_with(LikelihoodKind::Ts, 0.0, 10.0, 1.0);
    let sfg = LikelihoodSpec {
        smooth: 10.0,
        ..spec_with(LikelihoodKind::Sfg, 0.5, 10.0, 1.0)
    };
    let gt = loss_grad(&ts, &theta, &h, 1).unwrap();
    let gs = loss_grad(&sfg, &theta, &h, 1).unwrap();
    assert!((gs[0] - gt[0]).abs() < 1e-12);
    assert!((gs[1] - (gt[1] - 0.5)).abs() < 1e-12);
}

#[test]
fn argmax_arm_prefers_lowest_index() {
    let a = ArmSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]], 1).unwrap();
    assert_eq!(argmax_arm(&a, &[1.0, 1.0]), (0, 1.0));
    assert_eq!(argmax_arm(&a, &[0.0, 2.0]).0, 1);
}

#[test]
fn invalid_specs_are_rejected() {
    let h = History::new(2);
    let bad = [
        LikelihoodSpec {
            eta: 0.0,
            ..LikelihoodSpec::ts(BetaSchedule::constant(1.0))
        },
        LikelihoodSpec {
            prior_sd: 0.0,
            ..LikelihoodSpec::ts(BetaSchedule::constant(1.0))
        },
        LikelihoodSpec::fg(-0.1, BetaSchedule::constant(1.0)),
        LikelihoodSpec::sfg(0.5, 0.0, BetaSchedule::constant(1.0)),
    ];
    for spec in bad {
        assert!(loss_eval(&spec, &[0.0, 0.0], &h, 1).is_err(), "{spec:?}");
    }
    let ok = LikelihoodSpec::ts(BetaSchedule::constant(1.0));
    assert!(loss_eval(&ok, &[0.0], &h, 1).is_err());
}

#[test]
fn history_rejects_bad_entries() {
    let mut h = History::new(2);
    let a = ArmSet::new(vec![vec![1.0, 0.0]], 1).unwrap();
    assert!(h.push(a.clone(), 1, 0.0).is_err());
    assert!(h.push(a.clone(), 0, f64::NAN).is_err());
    assert!(h
        .push(ArmSet::new(vec![vec![1.0]], 1).unwrap(), 0, 0.0)
        .is_err());
    h.push(a, 0, 1.0).unwrap();
    assert_eq!(h.len(), 1);
    assert_eq!(h.entries()[0].chosen_x(), &[1.0, 0.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn smoothing_gap_is_within_log2_over_s(fstar in -50.0..50.0f64, cap in -20.0..20.0f64, s in 0.5..2000.0f64) {
        let gap = cap.min(fstar) - smoothed_bonus(fstar, cap, s);
        prop_assert!(gap >= -1e-12);
        prop_assert!(gap <= 2f64.ln() / s + 1e-12);
    }

    #[test]
    fn sharpening_never_lowers_the_bonus(fstar in -50.0..50.0f64, cap in -20.0..20.0f64, s1 in 0.1..500.0f64, ds in 0.0..500.0f64) {
        prop_assert!(smoothed_bonus(fstar, cap, s1 + ds) >= smoothed_bonus(fstar, cap, s1) - 1e-12);
    }

    #[test]
    fn loss_is_additive_over_history(seed in any::<u64>(), n1 in 0usize..10, n2 in 0usize..10, kind_ix in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 3;
        let h1 = random_history(&mut rng, d, 3, n1);
        let h2 = random_history(&mut rng, d, 3, n2);
        let mut both = h1.clone();
        for e in h2.entries() {
            both.push(e.armset.clone(), e.chosen, e.reward).unwrap();
        }
        let kind = [LikelihoodKind::Ts, LikelihoodKind::Fg, LikelihoodKind::Sfg][kind_ix];
        let spec = spec_with(kind, 0.3, 0.8, 2.0);
        let theta = gaussian_vec(&mut rng, d, 1.0);
        let prior = loss_eval(&spec, &theta, &History::new(d), 1).unwrap();
        let lhs = loss_eval(&spec, &theta, &both, 1).unwrap() - prior;
        let rhs = (loss_eval(&spec, &theta, &h1, 1).unwrap() - prior)
            + (loss_eval(&spec, &theta, &h2, 1).unwrap() - prior);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn beta_scales_the_whole_loss(seed in any::<u64>(), beta in 0.01..100.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_history(&mut rng, 3, 2, 5);
        let theta = gaussian_vec(&mut rng, 3, 1.0);
        let one = loss_eval(&spec_with(LikelihoodKind::Sfg, 0.2, 1.0, 1.0), &theta, &h, 1).unwrap();
        let b = loss_eval(&spec_with(LikelihoodKind::Sfg, 0.2, 1.0, beta), &theta, &h, 1).unwrap();
        prop_assert!((b - beta * one).abs() <= 1e-10 * (1.0 + b.abs()));
    }
}
