//! Rational-expectations fixed point `A0 = phi(A0; b)`.

use crate::demand::DemandSpec;
use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-12;

const MAX_ITERATIONS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReePoint {
    pub a0: f64,
    /// Equilibrium price; equals `a0` since supply equals the forecast price.
    pub p0: f64,
    pub b: f64,
    /// `|A0 - phi(A0; b)|`
    pub residual: f64,
    pub iterations: usize,
}

/// Solves `A - phi(A; b) = 0` on `[0, a_max]` by bisection.
///
/// `A - phi(A)` is negative at zero and strictly increasing, so the root is
/// unique whenever the bracket holds.
pub fn solve_ree(spec: &DemandSpec, b: f64, tol: f64) -> Result<ReePoint> {
    if !(tol > 0.0) {
        return Err(Error::Arg("tolerance must be > 0"));
    }
    let excess = |a: f64| a - spec.price(a, b);
    let mut lo = 0.0;
    let mut hi = spec.a_max();
    let g_lo = excess(lo);
    if !(g_lo < 0.0) {
        return Err(Error::Shape("phi(0; b) must be positive"));
    }
    let g_hi = excess(hi);
    if g_hi < 0.0 {
        return Err(Error::Bracket { a_max: hi });
    }

    let mut iterations = 0;
    let (mut best, mut best_residual) = if g_hi == 0.0 { (hi, 0.0) } else { (lo, -g_lo) };
    while best_residual > tol && iterations < MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let g = excess(mid);
        if libm::fabs(g) < best_residual {
            best = mid;
            best_residual = libm::fabs(g);
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ReePoint {
        a0: best,
        p0: best,
        b,
        residual: best_residual,
        iterations,
    })
}

/// Frictionless comparative statics `dA/db = phi_b / (1 - phi_A)` at `a0`.
pub fn multiplier(spec: &DemandSpec, a0: f64, b: f64) -> Result<f64> {
    let phi_b = spec.d_db(a0, b)?;
    let phi_a = spec.d_da(a0, b)?;
    Ok(phi_b / (1.0 - phi_a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::Family;
    use crate::oracle;

    /// Omega constant, the root of `A = exp(-A)`.
    const OMEGA: f64 = 0.567_143_290_409_783_8;

    #[test]
    fn linear_fixed_point_is_analytic() {
        let spec = DemandSpec::new(Family::Linear { c: 1.0, m: 0.5 }, 4.0).unwrap();
        let ree = solve_ree(&spec, 1.0, DEFAULT_TOL).unwrap();
        assert!((ree.a0 - 4.0 / 3.0).abs() <= 1e-12);
        assert_eq!(ree.a0, ree.p0);
        assert!(ree.residual <= DEFAULT_TOL);
    }

    #[test]
    fn nearly_flat_linear_demand_gives_c() {
        let spec = DemandSpec::new(Family::Linear { c: 1.0, m: 1e-14 }, 4.0).unwrap();
        let ree = solve_ree(&spec, 0.0, DEFAULT_TOL).unwrap();
        assert!((ree.a0 - 1.0).abs() < 1e-12);
        assert!((multiplier(&spec, ree.a0, 0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exp_convex_fixed_point_is_omega() {
        let spec = DemandSpec::new(Family::ExpConvex { c: 1.0, alpha: 1.0 }, 4.0).unwrap();
        let ree = solve_ree(&spec, 0.0, DEFAULT_TOL).unwrap();
        let scan = oracle::find_roots(|a| a - libm::exp(-a), 0.0, 4.0, 1000).unwrap();
        assert_eq!(scan.len(), 1);
        assert!((scan.roots[0] - OMEGA).abs() < 1e-10);
        assert!((ree.a0 - scan.roots[0]).abs() < 1e-10);
    }

    #[test]
    fn multiplier_examples() {
        let spec = DemandSpec::new(Family::Linear { c: 1.0, m: 0.5 }, 4.0).unwrap();
        for b in [0.0, 0.5, 1.0] {
            let ree = solve_ree(&spec, b, DEFAULT_TOL).unwrap();
            assert!((multiplier(&spec, ree.a0, b).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        }
        let exp = DemandSpec::new(Family::ExpConvex { c: 1.0, alpha: 1.0 }, 4.0).unwrap();
        let ree = solve_ree(&exp, 0.0, DEFAULT_TOL).unwrap();
        let m = multiplier(&exp, ree.a0, 0.0).unwrap();
        assert!((m - 1.0 / (1.0 + OMEGA)).abs() < 1e-10);
        assert!((m - 0.63810).abs() < 1e-5);
    }

    #[test]
    fn small_domain_is_a_bracket_error() {
        let spec = DemandSpec::new(Family::Linear { c: 1.0, m: 0.5 }, 1.0).unwrap();
        assert_eq!(solve_ree(&spec, 1.0, DEFAULT_TOL), Err(Error::Bracket { a_max: 1.0 }));
    }

    #[test]
    fn non_positive_price_at_zero_is_rejected() {
        let spec = DemandSpec::new(Family::Linear { c: 1.0, m: 0.5 }, 4.0).unwrap();
        assert!(matches!(solve_ree(&spec, -1.0, DEFAULT_TOL), Err(Error::Shape(_))));
        assert!(solve_ree(&spec, 1.0, 0.0).is_err());
    }
}
