//! Parametric demand families `phi(A; b)`.
//!
//! The shift parameter `b` enters every family additively, so `phi_b == 1`.
//! The families span the curvature cases the equilibrium results distinguish:
//! zero (`Linear`), positive (`ExpConvex`) and negative (`QuadConcave`,
//! `SaturatingConcave`). `SaturatingConcave` is concave with a convex slope
//! `phi_A`, the only shape here under which nearest-point learning can cycle.

use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `b + c - m A`
    Linear { c: f64, m: f64 },
    /// `b + c exp(-alpha A)`
    ExpConvex { c: f64, alpha: f64 },
    /// `b + c - m A - kappa A^2`, meaningful only where the price is positive.
    QuadConcave { c: f64, m: f64, kappa: f64 },
    /// `b + c - m A - kappa (A - (1 - exp(-gamma A)) / gamma)`, meaningful
    /// only where the price is positive.
    SaturatingConcave {
        c: f64,
        m: f64,
        kappa: f64,
        gamma: f64,
    },
}

/// Sign class of `phi_AA` over the whole domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    Zero,
    Convex,
    Concave,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Linear { .. } => "linear",
            Family::ExpConvex { .. } => "exp_convex",
            Family::QuadConcave { .. } => "quad_concave",
            Family::SaturatingConcave { .. } => "saturating_concave",
        }
    }

    pub fn curvature(&self) -> Curvature {
        match self {
            Family::Linear { .. } => Curvature::Zero,
            Family::ExpConvex { .. } => Curvature::Convex,
            Family::QuadConcave { .. } | Family::SaturatingConcave { .. } => Curvature::Concave,
        }
    }

    /// Families whose closed form eventually turns negative; positivity is
    /// then checked over the whole domain instead of only at `A = 0`.
    fn restricted_domain(&self) -> bool {
        matches!(
            self,
            Family::QuadConcave { .. } | Family::SaturatingConcave { .. }
        )
    }

    fn check(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        match *self {
            Family::Linear { c, m } => {
                if !positive(c) {
                    return Err(Error::Shape("linear: c must be > 0"));
                }
                if !positive(m) {
                    return Err(Error::Shape("linear: m must be > 0"));
                }
            }
            Family::ExpConvex { c, alpha } => {
                if !positive(c) {
                    return Err(Error::Shape("exp_convex: c must be > 0"));
                }
                if !positive(alpha) {
                    return Err(Error::Shape("exp_convex: alpha must be > 0"));
                }
            }
            Family::QuadConcave { c, m, kappa } => {
                if !positive(c) {
                    return Err(Error::Shape("quad_concave: c must be > 0"));
                }
                if !positive(m) {
                    return Err(Error::Shape("quad_concave: m must be > 0"));
                }
                if !positive(kappa) {
                    return Err(Error::Shape("quad_concave: kappa must be > 0"));
                }
            }
            Family::SaturatingConcave { c, m, kappa, gamma } => {
                if !positive(c) {
                    return Err(Error::Shape("saturating_concave: c must be > 0"));
                }
                if !positive(m) {
                    return Err(Error::Shape("saturating_concave: m must be > 0"));
                }
                if !positive(kappa) {
                    return Err(Error::Shape("saturating_concave: kappa must be > 0"));
                }
                if !positive(gamma) {
                    return Err(Error::Shape("saturating_concave: gamma must be > 0"));
                }
            }
        }
        Ok(())
    }
}

/// A validated demand family together with its domain `[0, a_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandSpec {
    family: Family,
    a_max: f64,
}

/// One of the shape assumptions every demand function must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// `phi > 0`
    PositivePrice,
    /// `phi_A < 0`
    NegativeSlope,
    /// `phi_b > 0`
    PositiveShift,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub assumption: Assumption,
    /// First grid point at which the assumption fails.
    pub at: f64,
    /// Number of grid points at which it fails.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub grid_n: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violation(&self, assumption: Assumption) -> Option<&Violation> {
        self.violations.iter().find(|v| v.assumption == assumption)
    }
}

impl DemandSpec {
    pub fn new(family: Family, a_max: f64) -> Result<Self> {
        family.check()?;
        if !(a_max.is_finite() && a_max > 0.0) {
            return Err(Error::Shape("domain upper bound a_max must be > 0"));
        }
        Ok(Self { family, a_max })
    }

    /// Builds a spec on `[0, 4 A0]`, with `A0` estimated by bisection on an
    /// expanding bracket.
    pub fn with_default_domain(family: Family, b: f64) -> Result<Self> {
        family.check()?;
        let probe = Self { family, a_max: f64::MAX };
        if probe.price(0.0, b) <= 0.0 {
            return Err(Error::Shape("phi(0; b) must be positive"));
        }
        let excess = |a: f64| a - probe.price(a, b);
        let mut hi = 1.0;
        let mut doublings = 0;
        while excess(hi) < 0.0 {
            hi *= 2.0;
            doublings += 1;
            if doublings > 64 {
                return Err(Error::Bracket { a_max: hi });
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if excess(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Self::new(family, 4.0 * 0.5 * (lo + hi))
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn contains(&self, a: f64) -> bool {
        (0.0..=self.a_max).contains(&a)
    }

    fn check_domain(&self, a: f64) -> Result<()> {
        if self.contains(a) {
            Ok(())
        } else {
            Err(Error::Domain {
                a,
                a_max: self.a_max,
            })
        }
    }

    /// Closed-form price at any real `a`, without the domain check. Used where
    /// a candidate supply has to be priced outside `[0, a_max]`.
    pub fn price(&self, a: f64, b: f64) -> f64 {
        match self.family {
            Family::Linear { c, m } => b + c - m * a,
            Family::ExpConvex { c, alpha } => b + c * libm::exp(-alpha * a),
            Family::QuadConcave { c, m, kappa } => b + c - m * a - kappa * a * a,
            Family::SaturatingConcave { c, m, kappa, gamma } => {
                // (1 - e^{-gA}) / g
                let saturation = -libm::expm1(-gamma * a) / gamma;
                b + c - m * a - kappa * (a - saturation)
            }
        }
    }

    /// `phi_A` at any real `a`.
    pub fn slope(&self, a: f64, _b: f64) -> f64 {
        match self.family {
            Family::Linear { m, .. } => -m,
            Family::ExpConvex { c, alpha } => -c * alpha * libm::exp(-alpha * a),
            Family::QuadConcave { m, kappa, .. } => -m - 2.0 * kappa * a,
            Family::SaturatingConcave { m, kappa, gamma, .. } => {
                -m + kappa * libm::expm1(-gamma * a)
            }
        }
    }

    /// `phi_AA` at any real `a`.
    pub fn curvature(&self, a: f64, _b: f64) -> f64 {
        match self.family {
            Family::Linear { .. } => 0.0,
            Family::ExpConvex { c, alpha } => c * alpha * alpha * libm::exp(-alpha * a),
            Family::QuadConcave { kappa, .. } => -2.0 * kappa,
            Family::SaturatingConcave { kappa, gamma, .. } => {
                -kappa * gamma * libm::exp(-gamma * a)
            }
        }
    }

    /// `phi_b`; the shift enters additively in every family.
    pub fn shift_sensitivity(&self, _a: f64, _b: f64) -> f64 {
        1.0
    }

    pub fn eval(&self, a: f64, b: f64) -> Result<f64> {
        self.check_domain(a)?;
        Ok(self.price(a, b))
    }

    pub fn d_da(&self, a: f64, b: f64) -> Result<f64> {
        self.check_domain(a)?;
        Ok(self.slope(a, b))
    }

    pub fn d2_da2(&self, a: f64, b: f64) -> Result<f64> {
        self.check_domain(a)?;
        Ok(self.curvature(a, b))
    }

    pub fn d_db(&self, a: f64, b: f64) -> Result<f64> {
        self.check_domain(a)?;
        Ok(self.shift_sensitivity(a, b))
    }

    /// Checks the shape assumptions on a uniform grid of `grid_n` points over
    /// the domain. Positivity of the price is required at `A = 0` for every
    /// family and on the whole grid for the concave families.
    pub fn validate(&self, b: f64, grid_n: usize) -> Result<ValidationReport> {
        if grid_n < 2 {
            return Err(Error::Arg("validation grid needs at least 2 points"));
        }
        let mut violations: Vec<Violation> = Vec::new();
        let mut record = |assumption: Assumption, at: f64| {
            match violations.iter_mut().find(|v| v.assumption == assumption) {
                Some(v) => v.count += 1,
                None => violations.push(Violation {
                    assumption,
                    at,
                    count: 1,
                }),
            }
        };
        let step = self.a_max / (grid_n - 1) as f64;
        for i in 0..grid_n {
            let a = if i + 1 == grid_n {
                self.a_max
            } else {
                i as f64 * step
            };
            let check_price = i == 0 || self.family.restricted_domain();
            if check_price && !(self.price(a, b) > 0.0) {
                record(Assumption::PositivePrice, a);
            }
            if !(self.slope(a, b) < 0.0) {
                record(Assumption::NegativeSlope, a);
            }
            if !(self.shift_sensitivity(a, b) > 0.0) {
                record(Assumption::PositiveShift, a);
            }
        }
        Ok(ValidationReport { grid_n, violations })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> DemandSpec {
        DemandSpec::new(Family::Linear { c: 1.0, m: 0.5 }, 4.0).unwrap()
    }

    fn exp_convex() -> DemandSpec {
        DemandSpec::new(Family::ExpConvex { c: 1.0, alpha: 1.0 }, 4.0).unwrap()
    }

    fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-5 * x.abs().max(1.0);
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(linear().eval(0.0, 1.0).unwrap(), 2.0);
        assert_eq!(exp_convex().eval(0.0, 0.0).unwrap(), 1.0);
        let quad = DemandSpec::new(
            Family::QuadConcave {
                c: 2.0,
                m: 0.5,
                kappa: 0.1,
            },
            3.0,
        )
        .unwrap();
        assert!((quad.eval(1.0, 0.0).unwrap() - 1.4).abs() < 1e-15);
    }

    #[test]
    fn derivative_examples() {
        for a in [0.0, 0.7, 3.0] {
            assert_eq!(linear().d_da(a, 0.3).unwrap(), -0.5);
            assert_eq!(linear().d2_da2(a, 0.3).unwrap(), 0.0);
        }
        assert_eq!(exp_convex().d2_da2(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(exp_convex().d_db(1.0, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn out_of_domain_is_rejected() {
        assert!(matches!(linear().eval(-0.1, 0.0), Err(Error::Domain { .. })));
        assert!(matches!(linear().d_da(4.5, 0.0), Err(Error::Domain { .. })));
        assert!(linear().eval(4.0, 0.0).is_ok());
    }

    #[test]
    fn bad_coefficients_are_shape_errors() {
        let bad = [
            Family::Linear { c: 1.0, m: 0.0 },
            Family::Linear { c: -1.0, m: 1.0 },
            Family::ExpConvex { c: 1.0, alpha: 0.0 },
            Family::QuadConcave {
                c: 1.0,
                m: 1.0,
                kappa: -1.0,
            },
            Family::SaturatingConcave {
                c: 1.0,
                m: 0.1,
                kappa: 1.0,
                gamma: f64::NAN,
            },
        ];
        for family in bad {
            assert!(matches!(DemandSpec::new(family, 1.0), Err(Error::Shape(_))));
        }
        assert!(DemandSpec::new(Family::Linear { c: 1.0, m: 1.0 }, 0.0).is_err());
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let specs = [
            linear(),
            exp_convex(),
            DemandSpec::new(
                Family::QuadConcave {
                    c: 2.0,
                    m: 0.5,
                    kappa: 0.1,
                },
                3.0,
            )
            .unwrap(),
            DemandSpec::new(
                Family::SaturatingConcave {
                    c: 1.0,
                    m: 0.1,
                    kappa: 2.0,
                    gamma: 3.0,
                },
                0.7,
            )
            .unwrap(),
        ];
        for spec in specs {
            for i in 0..=20 {
                let a = spec.a_max() * i as f64 / 20.0;
                let b = 0.25;
                let rel = |analytic: f64, numeric: f64| {
                    (analytic - numeric).abs() / analytic.abs().max(1.0)
                };
                let slope = central(|x| spec.price(x, b), a);
                assert!(rel(spec.slope(a, b), slope) < 1e-6, "{spec:?} slope at {a}");
                let curv = central(|x| spec.slope(x, b), a);
                assert!(rel(spec.curvature(a, b), curv) < 1e-6, "{spec:?} curvature at {a}");
                let shift = central(|bb| spec.price(a, bb), b);
                assert!(rel(spec.shift_sensitivity(a, b), shift) < 1e-6);
            }
        }
    }

    #[test]
    fn curvature_signs() {
        let quad = DemandSpec::new(
            Family::QuadConcave {
                c: 2.0,
                m: 0.5,
                kappa: 0.3,
            },
            3.0,
        )
        .unwrap();
        for i in 0..50 {
            let a = i as f64 * 0.08;
            assert!(exp_convex().curvature(a, 0.0) > 0.0);
            assert_eq!(quad.curvature(a, 0.0), -0.6);
        }
    }

    #[test]
    fn validate_examples() {
        let spec = DemandSpec::new(Family::Linear { c: 1.0, m: 0.5 }, 8.0 / 3.0).unwrap();
        assert!(spec.validate(1.0, 100).unwrap().is_ok());

        let quad = DemandSpec::new(
            Family::QuadConcave {
                c: 1.0,
                m: 1.0,
                kappa: 1.0,
            },
            5.0,
        )
        .unwrap();
        let report = quad.validate(0.0, 100).unwrap();
        let v = report.violation(Assumption::PositivePrice).unwrap();
        // first grid point past the root (sqrt(5) - 1) / 2
        let root = (libm::sqrt(5.0) - 1.0) / 2.0;
        assert!(v.at >= root && v.at < root + 5.0 / 99.0);
        assert!(report.violation(Assumption::NegativeSlope).is_none());

        assert!(exp_convex().validate(0.0, 2).unwrap().is_ok());
        assert!(exp_convex().validate(0.0, 1).is_err());
    }

    #[test]
    fn default_domain_is_four_times_fixed_point() {
        let spec = DemandSpec::with_default_domain(Family::Linear { c: 1.0, m: 0.5 }, 1.0).unwrap();
        assert!((spec.a_max() - 16.0 / 3.0).abs() < 1e-12);
        assert!(DemandSpec::with_default_domain(Family::Linear { c: 1.0, m: 0.5 }, -2.0).is_err());
    }
}
