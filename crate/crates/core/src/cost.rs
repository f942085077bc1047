//! Piecewise-linear control cost, its convex conjugate and the minimal
//! maximizer selector.

use crate::params::DriftLadder;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CostError {
    #[error("drift {x} outside the control range [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("conjugate is unbounded below: theta_0 = {theta0}, theta_L = {theta_l}")]
    Unbounded { theta0: f64, theta_l: f64 },
}

/// c(x): zero at θ_0, slope ĉ_l on (θ_{l-1}, θ_l].
pub fn cost_c(ladder: &DriftLadder, x: f64) -> Result<f64, CostError> {
    let lo = ladder.theta[0];
    let hi = *ladder.theta.last().expect("ladder has theta_0");
    if !(x >= lo && x <= hi) {
        return Err(CostError::OutOfDomain { x, lo, hi });
    }
    if x == lo {
        return Ok(0.0);
    }
    // first rung whose upper end reaches x
    let l = ladder.theta[1..].partition_point(|&t| t < x);
    Ok(ladder.c_of_theta[l] + ladder.c_hat[l] * (x - ladder.theta[l]))
}

/// Index m such that ψ(y) = θ_m.
pub fn psi_index(ladder: &DriftLadder, y: f64) -> usize {
    ladder.c_hat.partition_point(|&c| c < y)
}

/// Smallest maximizer of y·x − c(x) over the ladder rungs.
pub fn psi_min_argmax(ladder: &DriftLadder, y: f64) -> f64 {
    ladder.theta[psi_index(ladder, y)]
}

/// φ(y) = sup_x (y·x − c(x)).
pub fn conjugate_phi(ladder: &DriftLadder, y: f64) -> f64 {
    let m = psi_index(ladder, y);
    ladder.theta[m] * y - ladder.c_of_theta[m]
}

/// −inf φ, attained at one of the kinks ĉ_l.
pub fn beta_lower_bound(ladder: &DriftLadder) -> Result<f64, CostError> {
    let theta0 = ladder.theta[0];
    let theta_l = *ladder.theta.last().expect("ladder has theta_0");
    if theta0 >= 0.0 || theta_l <= 0.0 {
        return Err(CostError::Unbounded { theta0, theta_l });
    }
    let min = ladder
        .c_hat
        .iter()
        .map(|&y| conjugate_phi(ladder, y))
        .fold(f64::INFINITY, f64::min);
    Ok(-min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_rung() -> DriftLadder {
        DriftLadder::new(-1.0, &[2.0], &[4.0], 1.0, 1.0, 10.0).unwrap()
    }

    #[test]
    fn cost_endpoints() {
        let l = two_rung();
        assert_eq!(cost_c(&l, -1.0).unwrap(), 0.0);
        assert_eq!(cost_c(&l, 1.0).unwrap(), 4.0);
        assert_eq!(cost_c(&l, 0.0).unwrap(), 2.0);
        assert!(cost_c(&l, 1.5).is_err());
    }

    #[test]
    fn psi_is_left_continuous() {
        let l = two_rung();
        assert_eq!(psi_min_argmax(&l, 2.0), -1.0);
        assert_eq!(psi_min_argmax(&l, 2.0 + 1e-12), 1.0);
    }

    #[test]
    fn lower_bound_of_unit_ladder() {
        assert_eq!(beta_lower_bound(&two_rung()).unwrap(), 2.0);
    }

    #[test]
    fn unbounded_conjugate_is_an_error() {
        let l = DriftLadder::new(-3.0, &[1.0], &[1.0], 1.0, 1.0, 10.0).unwrap();
        assert!(matches!(beta_lower_bound(&l), Err(CostError::Unbounded { .. })));
    }
}
