//! Average-cost Bellman equation for the reflected drift-control problem:
//! shooting for β*, closed-form value pieces and nested thresholds.

use crate::cost::{beta_lower_bound, conjugate_phi, psi_index, CostError};
use crate::params::DriftLadder;
use crate::special::erfcx;
use serde::{Deserialize, Serialize};

const SQRT_PI: f64 = 1.772_453_850_905_516;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BellmanError {
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("trajectory overflowed at x = {x} for beta = {beta}")]
    Overflow { beta: f64, x: f64 },
    #[error("cannot classify beta = {beta} within x_max = {x_max}; raise x_max")]
    Indeterminate { beta: f64, x_max: f64 },
    #[error("no unbounded trajectory found up to beta = {beta_hi}")]
    NoUpperBracket { beta_hi: f64 },
    #[error("lower bracket beta = {beta} is not in the decreasing set")]
    NoLowerBracket { beta: f64 },
    #[error("no root bracket for threshold {piece} below x = {x_max}; tighten the beta tolerance")]
    RootBracket { piece: usize, x_max: f64 },
    #[error("closed-form value overflowed at x = {x} on piece {piece}")]
    PieceOverflow { piece: usize, x: f64 },
    #[error("terminal gap {gap} above tolerance {tol} at x = {x_max}")]
    TerminalGap { gap: f64, tol: f64, x_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Initial classification horizon; `None` uses a pilot run.
    pub x_max: Option<f64>,
    /// RK4 step.
    pub step: f64,
    /// Bisection stops when the bracket is narrower than `tol_beta · p`.
    pub tol_beta: f64,
    /// Largest accepted |v(x_max) − p| as a fraction of p.
    pub tol_terminal: f64,
    /// Absolute tolerance of threshold roots.
    pub root_tol: f64,
    pub max_escalations: u32,
    /// Number of (x, v) samples kept in the solution.
    pub samples: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            x_max: None,
            step: 1e-3,
            tol_beta: 1e-13,
            tol_terminal: 1e-3,
            root_tol: 1e-12,
            max_escalations: 10,
            samples: 2001,
        }
    }
}

/// v' = (2/σ²)(β − κx(p − v) + φ(p − v)).
pub fn ode_rhs(ladder: &DriftLadder, beta: f64, x: f64, v: f64) -> f64 {
    let y = ladder.p - v;
    2.0 / ladder.sigma2 * (beta - ladder.kappa * x * y + conjugate_phi(ladder, y))
}

/// Right-hand side with the drift rung held fixed at `m`.
fn rhs_locked(ladder: &DriftLadder, m: usize, beta: f64, x: f64, v: f64) -> f64 {
    let y = ladder.p - v;
    2.0 / ladder.sigma2 * (beta - ladder.kappa * x * y + ladder.theta[m] * y - ladder.c_of_theta[m])
}

fn rk4_locked(ladder: &DriftLadder, m: usize, beta: f64, x: f64, v: f64, h: f64) -> f64 {
    let k1 = rhs_locked(ladder, m, beta, x, v);
    let k2 = rhs_locked(ladder, m, beta, x + 0.5 * h, v + 0.5 * h * k1);
    let k3 = rhs_locked(ladder, m, beta, x + 0.5 * h, v + 0.5 * h * k2);
    let k4 = rhs_locked(ladder, m, beta, x + h, v + h * k3);
    v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// First x where v < 0 or v' < 0.
    pub crossed_negative_slope_at: Option<f64>,
    /// First x where v ≥ p.
    pub reached_p_at: Option<f64>,
}

impl Trajectory {
    /// Linear interpolation of v at `x` inside the integrated range.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        let i = self.x.partition_point(|&t| t < x);
        if i == 0 {
            return (self.x.first() == Some(&x)).then(|| self.v[0]);
        }
        if i >= self.x.len() {
            return None;
        }
        let (x0, x1) = (self.x[i - 1], self.x[i]);
        let w = (x - x0) / (x1 - x0);
        Some(self.v[i - 1] * (1.0 - w) + self.v[i] * w)
    }

    /// First x where the trajectory reaches `level` from below.
    pub fn first_crossing(&self, level: f64) -> Option<f64> {
        let i = self.v.iter().position(|&v| v >= level)?;
        if i == 0 {
            return Some(self.x[0]);
        }
        let (v0, v1) = (self.v[i - 1], self.v[i]);
        Some(self.x[i - 1] + (level - v0) / (v1 - v0) * (self.x[i] - self.x[i - 1]))
    }
}

/// Integrates IVP(β) from v(0) = 0 with fixed-step RK4.
///
/// The step is split exactly where p − v crosses a kink ĉ_l so each
/// sub-step sees a smooth right-hand side. Integration stops at the first
/// event (negative value or slope, or v ≥ p) or at `x_max`.
pub fn integrate_v(ladder: &DriftLadder, beta: f64, x_max: f64, step: f64) -> Result<Trajectory, BellmanError> {
    integrate(ladder, beta, x_max, step, true)
}

fn integrate(ladder: &DriftLadder, beta: f64, x_max: f64, step: f64, record: bool) -> Result<Trajectory, BellmanError> {
    assert!(x_max > 0.0 && step > 0.0, "x_max and step must be positive");
    let p = ladder.p;
    let mut traj = Trajectory { x: vec![0.0], v: vec![0.0], crossed_negative_slope_at: None, reached_p_at: None };
    let mut x = 0.0;
    let mut v = 0.0;
    if ode_rhs(ladder, beta, 0.0, 0.0) < 0.0 {
        traj.crossed_negative_slope_at = Some(0.0);
        return Ok(traj);
    }
    let mut last = (0.0, 0.0);
    while x < x_max {
        let h = step.min(x_max - x);
        let m = psi_index(ladder, p - v);
        let mut v_new = rk4_locked(ladder, m, beta, x, v, h);
        let mut h_taken = h;
        if v_new.is_finite() && psi_index(ladder, p - v_new) != m {
            // shrink the step to the first point past the kink, judged by
            // the selector itself so rounding cannot strand us on the kink
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if psi_index(ladder, p - rk4_locked(ladder, m, beta, x, v, mid)) == m {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            h_taken = hi;
            v_new = rk4_locked(ladder, m, beta, x, v, hi);
        }
        if !v_new.is_finite() {
            return Err(BellmanError::Overflow { beta, x: x + h_taken });
        }
        x += h_taken;
        v = v_new;
        if record {
            traj.x.push(x);
            traj.v.push(v);
        } else {
            last = (x, v);
        }
        if v >= p {
            traj.reached_p_at = Some(x);
            break;
        }
        if v < 0.0 || ode_rhs(ladder, beta, x, v) < 0.0 {
            traj.crossed_negative_slope_at = Some(x);
            break;
        }
    }
    if !record && last.0 > 0.0 {
        traj.x.push(last.0);
        traj.v.push(last.1);
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BetaClass {
    /// The trajectory turns down or goes negative: β is below β*.
    D,
    /// The trajectory reaches p: β is at or above β*.
    IUnbounded,
    /// Neither event before x_max and the terminal gap is small.
    Boundary,
}

/// Classifies β by the event its IVP trajectory hits first.
pub fn classify_beta(ladder: &DriftLadder, beta: f64, x_max: f64, tol: f64, step: f64) -> Result<BetaClass, BellmanError> {
    let t = integrate(ladder, beta, x_max, step, false)?;
    if t.crossed_negative_slope_at.is_some() {
        return Ok(BetaClass::D);
    }
    if t.reached_p_at.is_some() {
        return Ok(BetaClass::IUnbounded);
    }
    let v_end = *t.v.last().expect("trajectory has a start point");
    if (ladder.p - v_end).abs() < tol {
        Ok(BetaClass::Boundary)
    } else {
        Err(BellmanError::Indeterminate { beta, x_max })
    }
}

/// ∫₀¹ exp(−κ s²/σ²) ds.
pub fn alpha_tilde(ladder: &DriftLadder) -> f64 {
    let a = (ladder.kappa / ladder.sigma2).sqrt();
    let erf_a = 1.0 - (-a * a).exp() * erfcx(a);
    0.5 * SQRT_PI / a * erf_a
}

/// β̲ + σ²p/(2α̃): every β above this reaches p.
pub fn beta_upper_bound(ladder: &DriftLadder) -> Result<f64, BellmanError> {
    Ok(beta_lower_bound(ladder)? + ladder.sigma2 * ladder.p / (2.0 * alpha_tilde(ladder)))
}

/// Per-piece data for the closed-form value function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PieceParams {
    /// Piece index l in 1..=L+1; piece l covers [τ_l, τ_{l-1}].
    pub l: usize,
    pub tau: f64,
    pub theta: f64,
    pub c_theta: f64,
    pub c_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellmanSolution {
    pub beta_star: f64,
    pub beta_lower: f64,
    /// τ_1 > … > τ_L > 0.
    pub tau: Vec<f64>,
    /// Pieces 1..=L+1, outermost first.
    pub pieces: Vec<PieceParams>,
    pub v_samples: Vec<(f64, f64)>,
    pub x_max: f64,
    pub terminal_gap: f64,
    pub ladder: DriftLadder,
}

fn piece_params(ladder: &DriftLadder, l: usize, tau: f64) -> PieceParams {
    let nl = ladder.len();
    assert!((1..=nl + 1).contains(&l), "piece index out of range");
    PieceParams {
        l,
        tau,
        theta: ladder.theta[l - 1],
        c_theta: ladder.c_of_theta[l - 1],
        c_hat: if l <= nl { ladder.c_hat[l - 1] } else { ladder.p },
    }
}

struct PieceTerms {
    s: f64,
    ds: f64,
    e: f64,
    c: f64,
    h: f64,
}

fn piece_terms(ladder: &DriftLadder, pc: &PieceParams, x: f64, beta: f64) -> PieceTerms {
    let sigma = ladder.sigma();
    let sk = ladder.kappa.sqrt();
    let scale = sigma * sk;
    let s = (ladder.kappa * x - pc.theta) / scale;
    let t = (ladder.kappa * pc.tau - pc.theta) / scale;
    let e = (s * s - t * t).exp();
    // H = e^{s²}[Φ(√2 s) − Φ(√2 t)] with e^{z²}Φ(√2 z) = erfcx(−z)/2
    let h = if t >= 0.0 {
        0.5 * (e * erfcx(t) - erfcx(s))
    } else if s <= 0.0 {
        0.5 * (erfcx(-s) - e * erfcx(-t))
    } else {
        (s * s).exp() - 0.5 * erfcx(s) - 0.5 * e * erfcx(-t)
    };
    PieceTerms { s, ds: sk / sigma, e, c: 2.0 * (beta - pc.c_theta) * SQRT_PI / scale, h }
}

/// Closed-form value on piece `l` started from v(τ_l) = p − ĉ_l.
pub fn u_piece(ladder: &DriftLadder, l: usize, x: f64, tau_l: f64, beta: f64) -> Result<f64, BellmanError> {
    let pc = piece_params(ladder, l, tau_l);
    let tm = piece_terms(ladder, &pc, x, beta);
    let u = ladder.p - pc.c_hat * tm.e + tm.c * tm.h;
    if u.is_finite() {
        Ok(u)
    } else {
        Err(BellmanError::PieceOverflow { piece: l, x })
    }
}

/// Analytic x-derivative of [`u_piece`].
pub fn u_piece_derivative(ladder: &DriftLadder, l: usize, x: f64, tau_l: f64, beta: f64) -> Result<f64, BellmanError> {
    let pc = piece_params(ladder, l, tau_l);
    let tm = piece_terms(ladder, &pc, x, beta);
    let two_ssd = 2.0 * tm.s * tm.ds;
    let d = -pc.c_hat * tm.e * two_ssd + tm.c * (two_ssd * tm.h + tm.ds / SQRT_PI);
    if d.is_finite() {
        Ok(d)
    } else {
        Err(BellmanError::PieceOverflow { piece: l, x })
    }
}

/// Bounded solution on the outermost piece: p − (C/2)·erfcx(s).
///
/// Equals [`u_piece`] for l = 1 exactly when β = β*; unlike the general form
/// it carries no growing exp(s² − t²) mode, so it stays accurate for large x.
fn tail_value(ladder: &DriftLadder, beta: f64, x: f64) -> (f64, f64) {
    let pc = piece_params(ladder, 1, 0.0);
    let tm = piece_terms(ladder, &pc, x, beta);
    let g = erfcx(tm.s);
    let v = ladder.p - 0.5 * tm.c * g;
    let dv = -0.5 * tm.c * tm.ds * (2.0 * tm.s * g - 2.0 / SQRT_PI);
    (v, dv)
}

fn find_root(f: impl Fn(f64) -> Result<f64, BellmanError>, lo: f64, x_cap: f64, tol: f64, piece: usize) -> Result<f64, BellmanError> {
    // v rises monotonically up to the root, so a fine forward scan brackets it;
    // a decrease before the crossing means β is off
    const SCAN: f64 = 1e-3;
    let mut a = lo;
    let mut fa = f(a)?;
    let mut b;
    loop {
        b = a + SCAN;
        if b > x_cap {
            return Err(BellmanError::RootBracket { piece, x_max: x_cap });
        }
        let fb = f(b).map_err(|_| BellmanError::RootBracket { piece, x_max: b })?;
        if fb >= 0.0 {
            break;
        }
        if fb < fa {
            return Err(BellmanError::RootBracket { piece, x_max: b });
        }
        a = b;
        fa = fb;
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(m)? >= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Thresholds τ_1 > … > τ_L from the closed-form pieces, innermost first.
pub fn extract_thresholds(ladder: &DriftLadder, beta_star: f64, x_cap: f64, root_tol: f64) -> Result<Vec<f64>, BellmanError> {
    let nl = ladder.len();
    let mut tau = vec![0.0; nl + 2];
    // tau[l] holds τ_l; τ_{L+1} = 0
    for l in (2..=nl + 1).rev() {
        let start = tau[l];
        let target = ladder.p - ladder.c_hat[l - 2];
        let root = find_root(|x| Ok(u_piece(ladder, l, x, start, beta_star)? - target), start, x_cap, root_tol, l - 1)?;
        tau[l - 1] = root;
    }
    Ok(tau[1..=nl].to_vec())
}

impl BellmanSolution {
    fn piece_index(&self, x: f64) -> usize {
        // pieces are outermost first with decreasing τ
        self.pieces.iter().position(|pc| x >= pc.tau).unwrap_or(self.pieces.len() - 1)
    }

    /// v(x) from the closed-form pieces.
    pub fn value(&self, x: f64) -> f64 {
        let k = self.piece_index(x);
        let pc = &self.pieces[k];
        if pc.l == 1 {
            tail_value(&self.ladder, self.beta_star, x).0
        } else {
            u_piece(&self.ladder, pc.l, x, pc.tau, self.beta_star).unwrap_or(f64::NAN)
        }
    }

    /// v'(x) from the analytic derivative of the closed-form pieces.
    pub fn derivative(&self, x: f64) -> f64 {
        let k = self.piece_index(x);
        let pc = &self.pieces[k];
        if pc.l == 1 {
            tail_value(&self.ladder, self.beta_star, x).1
        } else {
            u_piece_derivative(&self.ladder, pc.l, x, pc.tau, self.beta_star).unwrap_or(f64::NAN)
        }
    }

    /// Drift rung index used on the piece containing x.
    pub fn rung_at(&self, x: f64) -> usize {
        self.pieces[self.piece_index(x)].l - 1
    }

    /// β* − [½σ²v' + κx(p − v) − φ(p − v)].
    pub fn residual(&self, x: f64) -> f64 {
        let v = self.value(x);
        let dv = self.derivative(x);
        let l = &self.ladder;
        self.beta_star - (0.5 * l.sigma2 * dv + l.kappa * x * (l.p - v) - conjugate_phi(l, l.p - v))
    }
}

fn classify_escalating(ladder: &DriftLadder, beta: f64, x_max: &mut f64, opts: &SolverOptions) -> Result<BetaClass, BellmanError> {
    let tol = opts.tol_terminal * ladder.p;
    let mut tries = 0;
    loop {
        match classify_beta(ladder, beta, *x_max, tol, opts.step) {
            Err(BellmanError::Indeterminate { .. }) if tries < opts.max_escalations => {
                *x_max *= 2.0;
                tries += 1;
            }
            other => return other,
        }
    }
}

/// Largest x at which a pilot trajectory crosses p − ĉ_1.
fn pilot_horizon(ladder: &DriftLadder, lo: f64, hi: f64, step: f64) -> f64 {
    let level = ladder.p - ladder.c_hat.first().copied().unwrap_or(ladder.p);
    let scale = ladder.sigma() / ladder.kappa.sqrt() + ladder.theta[0].abs() / ladder.kappa;
    let mut best: f64 = 0.0;
    for beta in [hi, 0.5 * (lo + hi)] {
        if let Ok(t) = integrate(ladder, beta, 20.0 * scale, step, true) {
            if let Some(x) = t.first_crossing(level) {
                best = best.max(x);
            }
        }
    }
    if best > 0.0 {
        4.0 * best
    } else {
        4.0 * scale
    }
}

/// Finds β* by bisection between the decreasing and unbounded sets, then
/// extracts thresholds and samples the value function.
pub fn solve_beta_star(ladder: &DriftLadder, opts: &SolverOptions) -> Result<BellmanSolution, BellmanError> {
    let beta_lower = beta_lower_bound(ladder)?;
    let mut hi = beta_upper_bound(ladder)? * 1.01 + 1e-3 * ladder.p;
    let mut x_max = opts.x_max.unwrap_or_else(|| pilot_horizon(ladder, beta_lower, hi, opts.step));

    let mut grow = 0;
    while classify_escalating(ladder, hi, &mut x_max, opts)? != BetaClass::IUnbounded {
        grow += 1;
        if grow > 20 {
            return Err(BellmanError::NoUpperBracket { beta_hi: hi });
        }
        hi = beta_lower + 2.0 * (hi - beta_lower);
    }
    let mut lo = beta_lower;
    if classify_escalating(ladder, lo, &mut x_max, opts)? != BetaClass::D {
        return Err(BellmanError::NoLowerBracket { beta: lo });
    }
    let width_tol = opts.tol_beta * ladder.p;
    while hi - lo > width_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match classify_escalating(ladder, mid, &mut x_max, opts) {
            Ok(BetaClass::D) => lo = mid,
            Ok(BetaClass::IUnbounded) => hi = mid,
            Ok(BetaClass::Boundary) | Err(BellmanError::Indeterminate { .. }) => {
                lo = mid;
                hi = mid;
            }
            Err(e) => return Err(e),
        }
    }
    let beta_star = 0.5 * (lo + hi);

    let nl = ladder.len();
    let tau = extract_thresholds(ladder, beta_star, 64.0 * x_max, opts.root_tol)?;
    let mut pieces = Vec::with_capacity(nl + 1);
    pieces.push(piece_params(ladder, 1, tau.first().copied().unwrap_or(0.0)));
    for l in 2..=nl + 1 {
        pieces.push(piece_params(ladder, l, if l <= nl { tau[l - 1] } else { 0.0 }));
    }
    let mut sol = BellmanSolution {
        beta_star,
        beta_lower,
        tau,
        pieces,
        v_samples: Vec::new(),
        x_max,
        terminal_gap: f64::INFINITY,
        ladder: ladder.clone(),
    };
    let tol = opts.tol_terminal * ladder.p;
    let mut x_end = x_max;
    for _ in 0..=opts.max_escalations {
        sol.terminal_gap = (sol.value(x_end) - ladder.p).abs();
        if sol.terminal_gap < tol {
            break;
        }
        x_end *= 2.0;
    }
    if !(sol.terminal_gap < tol) {
        return Err(BellmanError::TerminalGap { gap: sol.terminal_gap, tol, x_max: x_end });
    }
    sol.x_max = x_end;
    let n = opts.samples.max(2);
    sol.v_samples = (0..n)
        .map(|i| {
            let x = x_end * i as f64 / (n - 1) as f64;
            (x, sol.value(x))
        })
        .collect();
    Ok(sol)
}

/// Queue-count thresholds q*_l = √n·τ_l·μ.
pub fn workload_thresholds(solution: &BellmanSolution, n: f64, mu: f64) -> Vec<f64> {
    solution.tau.iter().map(|&t| n.sqrt() * t * mu).collect()
}
