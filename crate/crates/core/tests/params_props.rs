mod common;

use engage::fixtures::base_case;
use engage::params::*;
use proptest::prelude::*;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
}

/// Same system with every raw rate rescaled so that the limit stays fixed.
fn at_scale(n: f64, fixed_jitter: &[f64]) -> NthSystemParams {
    let mut p = base_case();
    p.scaling_n = n;
    for (a, j) in p.activities.iter_mut().zip(fixed_jitter) {
        a.fixed_cost *= j;
    }
    p
}

#[test]
fn ladder_coefficients_match_hand_computation() {
    // κ and σ² recomputed from the raw fields, α derived through the load identity
    let p = base_case();
    let n = p.scaling_n;
    let sn = n.sqrt();
    let x = p.mix_weights();
    let mut load = 0.0;
    let mut known = 0.0;
    let mut free = 0.0;
    for c in &p.classes {
        let mu = c.service_rate / n;
        let (l, w) = match c.kind {
            ClassKind::Repeat { population, repose_exit_rate } => (population / n * repose_exit_rate / mu, population / n / mu),
            ClassKind::OneTime { arrival_rate } => (arrival_rate / n / mu, 1.0 / mu),
        };
        load += l;
        match c.alpha {
            Some(a) => known += w * a / sn,
            None => free += w / sn,
        }
    }
    let alpha_free = (load - known - 1.0) / free;
    let (mut kappa, mut sigma2) = (0.0, 0.0);
    for (c, xj) in p.classes.iter().zip(&x) {
        let mu = c.service_rate / n;
        let a = c.alpha.unwrap_or(alpha_free);
        match c.kind {
            ClassKind::Repeat { population, repose_exit_rate } => {
                let r = repose_exit_rate - a / sn;
                kappa += (r + c.abandonment_rate) * xj;
                sigma2 += 2.0 * r * population / n / (mu * mu);
            }
            ClassKind::OneTime { arrival_rate } => {
                let lam = arrival_rate / n - a / sn;
                kappa += c.abandonment_rate * xj;
                sigma2 += 2.0 * lam / (mu * mu);
            }
        }
    }
    let l = common::base_ladder();
    assert!(close(l.kappa, kappa, 1e-12));
    assert!(close(l.sigma2, sigma2, 1e-12));
    assert!(balanced_load_check(&scale_to_limit(&p).unwrap()) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unscale_inverts_scaling(n in 5_000.0f64..500_000.0, jit in prop::collection::vec(0.8f64..1.2, 4)) {
        let p = at_scale(n, &jit);
        let lim = scale_to_limit(&p).unwrap();
        let back = unscale(&lim, &p);
        for (a, b) in p.classes.iter().zip(&back.classes) {
            prop_assert!(close(a.base_arrivals(), b.base_arrivals(), 1e-12));
            prop_assert!(close(a.service_rate, b.service_rate, 1e-12));
            prop_assert!(close(a.abandonment_rate, b.abandonment_rate, 1e-12));
        }
        for (a, b) in p.activities.iter().zip(&back.activities) {
            prop_assert!(close(a.fixed_cost, b.fixed_cost, 1e-12));
            for (x, y) in a.repeat_boosts.iter().zip(&b.repeat_boosts) {
                prop_assert!(x.0 == y.0 && close(x.1, y.1, 1e-12));
            }
            for (x, y) in a.onetime_boosts.iter().zip(&b.onetime_boosts) {
                prop_assert!(x.0 == y.0 && close(x.1, y.1, 1e-12));
            }
        }
        prop_assert!(balanced_load_check(&lim) < 1e-9);
    }

    #[test]
    fn ladder_is_well_ordered(jit in prop::collection::vec(0.5f64..1.5, 4), theta0 in -3.0f64..-0.2) {
        let mut p = at_scale(12.0, &jit);
        p.theta0_override = Some(theta0);
        let l = match derive_ladder(&scale_to_limit(&p).unwrap()) {
            Ok(l) => l,
            Err(LadderError::Tie { .. }) | Err(LadderError::AbovePenalty { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert_eq!(l.theta[0], theta0);
        for i in 0..l.len() {
            prop_assert!(l.theta[i + 1] > l.theta[i]);
            prop_assert!(close(l.theta[i + 1] - l.theta[i], l.eta[i], 1e-12));
            prop_assert!(close(l.c_of_theta[i + 1] - l.c_of_theta[i], l.fixed_cost[i], 1e-12));
            prop_assert!(close(l.c_hat[i] * l.eta[i], l.fixed_cost[i], 1e-12));
            if i > 0 {
                prop_assert!(l.c_hat[i] > l.c_hat[i - 1]);
            }
        }
        prop_assert!(*l.c_hat.last().unwrap() < l.p);
        let mut seen = l.order.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, vec![0, 1, 2, 3]);
    }

    #[test]
    fn ladder_ignores_activity_order(perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle()) {
        let p = base_case();
        let mut q = p.clone();
        q.activities = perm.iter().map(|&i| p.activities[i].clone()).collect();
        let a = common::base_ladder();
        let b = derive_ladder(&scale_to_limit(&q).unwrap()).unwrap();
        prop_assert_eq!(&a.c_hat, &b.c_hat);
        prop_assert_eq!(&a.theta, &b.theta);
        let mapped: Vec<usize> = b.order.iter().map(|&k| perm[k]).collect();
        prop_assert_eq!(mapped, a.order);
    }
}
