mod common;

use common::*;
use engage::bellman::*;
use engage::fixtures::BASE_THETA0;
use std::time::Instant;

#[test]
fn base_ladder_uses_fixed_theta0() {
    assert_eq!(base_ladder().theta[0], BASE_THETA0);
}

#[test]
fn closed_form_matches_independent_rk4() {
    let sol = base_solution();
    let l = &sol.ladder;
    let x_end = 1.5 * sol.tau[0];
    let h = 1e-4;
    let traj = rk4_oracle(l, sol.beta_star, x_end, h);
    let mut worst: f64 = 0.0;
    for &(x, v) in traj.iter().skip(1).step_by(10) {
        let u = sol.value(x);
        worst = worst.max((u - v).abs() / v.abs().max(1e-3 * l.p));
    }
    assert!(worst < 1e-6, "max relative deviation {worst:e}");
}

#[test]
fn residual_vanishes_on_grid() {
    let sol = base_solution();
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let x = sol.x_max * (i as f64 + 0.5) / 1000.0;
        worst = worst.max(sol.residual(x).abs());
    }
    assert!(worst < 1e-6, "max residual {worst:e}");
}

#[test]
fn value_function_shape() {
    let t = Instant::now();
    let sol = base_solution();
    assert!(t.elapsed().as_secs_f64() < 5.0);
    assert_eq!(sol.value(0.0), 0.0);
    let mut prev = 0.0;
    for &(x, v) in &sol.v_samples[1..] {
        assert!(v >= prev, "v decreases at {x}");
        prev = v;
    }
    assert!((sol.value(sol.x_max) - sol.ladder.p).abs() < 0.05);
    assert!(sol.tau.iter().all(|&t| t > 0.0));
    assert!(sol.tau.windows(2).all(|w| w[0] > w[1]));
    assert!(sol.beta_star > sol.beta_lower);
}

#[test]
fn drift_rung_steps_down_across_thresholds() {
    let sol = base_solution();
    let nl = sol.ladder.len();
    assert_eq!(sol.rung_at(0.0), nl);
    assert_eq!(sol.rung_at(sol.tau[0] * 1.01), 0);
    for (k, &t) in sol.tau.iter().enumerate() {
        assert_eq!(sol.rung_at(t * 0.999), k + 1);
    }
}

#[test]
fn classification_is_monotone_in_beta() {
    let sol = base_solution();
    let l = &sol.ladder;
    let tol = 1e-3 * l.p;
    let mut seen_unbounded = false;
    for i in 0..=40 {
        let beta = sol.beta_lower + (sol.beta_star - sol.beta_lower) * 2.0 * i as f64 / 40.0;
        if (beta - sol.beta_star).abs() < 1e-6 {
            continue;
        }
        match classify_beta(l, beta, sol.x_max, tol, 1e-3) {
            Ok(BetaClass::D) => {
                assert!(!seen_unbounded, "decreasing set above an unbounded beta at {beta}");
                assert!(beta < sol.beta_star);
            }
            Ok(BetaClass::IUnbounded) => {
                seen_unbounded = true;
                assert!(beta > sol.beta_star);
            }
            other => panic!("unexpected classification {other:?} at {beta}"),
        }
    }
    assert!(seen_unbounded);
    assert!(beta_upper_bound(l).unwrap() > sol.beta_star);
}

#[test]
fn integrator_is_fourth_order() {
    // v at a fixed x for steps h, h/2, h/4; the error ratio of a 4th-order
    // method is 2^4
    let sol = base_solution();
    let l = &sol.ladder;
    let beta = sol.beta_star;
    let x = 0.5 * sol.tau[l.len() - 1];
    let at = |h: f64| rk4_oracle(l, beta, x, h).last().unwrap().1;
    let (a, b, c) = (at(0.04 * x), at(0.02 * x), at(0.01 * x));
    let ratio = (a - b) / (b - c);
    assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    let t = integrate_v(l, beta, x, 0.01 * x).unwrap();
    assert!((t.v.last().unwrap() - c).abs() < 1e-12 * c.abs().max(1.0));
}
