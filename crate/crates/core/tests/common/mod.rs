//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use engage::bellman::{solve_beta_star, BellmanSolution, SolverOptions};
use engage::fixtures::base_case;
use engage::params::{derive_ladder, scale_to_limit, DriftLadder};

pub fn base_ladder() -> DriftLadder {
    derive_ladder(&scale_to_limit(&base_case()).unwrap()).unwrap()
}

pub fn base_solution() -> BellmanSolution {
    solve_beta_star(&base_ladder(), &SolverOptions::default()).unwrap()
}

/// c(x) as a sum of clipped rung contributions.
pub fn cost_sum(l: &DriftLadder, x: f64) -> f64 {
    let mut c = 0.0;
    for i in 0..l.len() {
        c += l.c_hat[i] * (x - l.theta[i]).clamp(0.0, l.eta[i]);
    }
    c
}

/// Grid of x-step `h` over [θ_0, θ_L] with the breakpoints added.
pub fn drift_grid(l: &DriftLadder, h: f64) -> Vec<f64> {
    let lo = l.theta[0];
    let hi = *l.theta.last().unwrap();
    let n = ((hi - lo) / h).floor() as usize;
    let mut g: Vec<f64> = (0..=n).map(|i| lo + i as f64 * h).collect();
    g.extend_from_slice(&l.theta);
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// (max, smallest argmax) of y·x − c(x) over the grid.
pub fn brute_phi_psi(l: &DriftLadder, grid: &[f64], y: f64) -> (f64, f64) {
    let mut best = f64::NEG_INFINITY;
    let mut arg = f64::NAN;
    for &x in grid {
        let val = y * x - cost_sum(l, x);
        if arg.is_nan() || val > best + 1e-12 * best.abs().max(1.0) {
            best = val;
            arg = x;
        }
    }
    (best, arg)
}

/// ∫₀^y ψ for the step function ψ = θ_0 + Σ η_l·1[s > ĉ_l].
pub fn psi_integral(l: &DriftLadder, y: f64) -> f64 {
    let mut v = l.theta[0] * y;
    for i in 0..l.len() {
        let c = l.c_hat[i];
        // ψ steps up on (ĉ_l, ∞); the signed integral from 0 covers negative y too
        v += l.eta[i] * ((y - c).max(0.0) - (0.0 - c).max(0.0));
    }
    v
}

/// φ by exhaustive search over the breakpoints.
pub fn phi_kinks(l: &DriftLadder, y: f64) -> f64 {
    l.theta.iter().map(|&x| y * x - cost_sum(l, x)).fold(f64::NEG_INFINITY, f64::max)
}

/// Plain fixed-step RK4 for v' = (2/σ²)(β − κx(p − v) + φ(p − v)).
pub fn rk4_oracle(l: &DriftLadder, beta: f64, x_end: f64, h: f64) -> Vec<(f64, f64)> {
    let f = |x: f64, v: f64| 2.0 / l.sigma2 * (beta - l.kappa * x * (l.p - v) + phi_kinks(l, l.p - v));
    let n = (x_end / h).round() as usize;
    let mut out = Vec::with_capacity(n + 1);
    let (mut x, mut v) = (0.0, 0.0);
    out.push((x, v));
    for i in 0..n {
        let k1 = f(x, v);
        let k2 = f(x + 0.5 * h, v + 0.5 * h * k1);
        let k3 = f(x + 0.5 * h, v + 0.5 * h * k2);
        let k4 = f(x + h, v + h * k3);
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        x = (i + 1) as f64 * h;
        out.push((x, v));
    }
    out
}
