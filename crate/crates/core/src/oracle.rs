//! Independent verification kernel.
//!
//! Roots are enumerated by a uniform sign-change scan refined with bisection,
//! derivatives by central differences, and residuals by direct evaluation of
//! each defining equation. None of this depends on the closed forms it is used
//! to check.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result};

/// Bisection stops once the bracket is narrower than this.
pub const REFINE_WIDTH: f64 = 1e-12;
/// Roots closer than this are merged into one.
pub const MERGE_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub roots: Vec<f64>,
    /// Number of sign changes (or exact grid zeros) detected by the scan.
    pub bracket_count: usize,
    pub grid_n: usize,
    pub interval: (f64, f64),
}

impl RootSet {
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// True when every root here has a partner in `expected` within `tol`
    /// and the counts agree.
    pub fn matches(&self, expected: &[f64], tol: f64) -> bool {
        self.roots.len() == expected.len()
            && self
                .roots
                .iter()
                .all(|r| expected.iter().any(|e| (r - e).abs() <= tol))
            && expected
                .iter()
                .all(|e| self.roots.iter().any(|r| (r - e).abs() <= tol))
    }
}

fn finite(g: &impl Fn(f64) -> f64, x: f64) -> Result<f64> {
    let y = g(x);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::NonFinite { at: x })
    }
}

fn bisect(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut g_lo: f64) -> Result<f64> {
    while hi - lo > REFINE_WIDTH {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = finite(g, mid)?;
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if (g_mid < 0.0) == (g_lo < 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Enumerates the sign-crossing roots of `g` on `[lo, hi]`.
///
/// The interval is sampled at `grid_n` uniform points; each sign change is
/// refined by bisection to [`REFINE_WIDTH`]. Roots where `g` touches zero
/// without crossing are not detected unless they fall exactly on a grid point.
pub fn find_roots(g: impl Fn(f64) -> f64, lo: f64, hi: f64, grid_n: usize) -> Result<RootSet> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Arg("find_roots needs a finite interval with lo < hi"));
    }
    if grid_n < 2 {
        return Err(Error::Arg("find_roots needs at least 2 grid points"));
    }
    let step = (hi - lo) / (grid_n - 1) as f64;
    let node = |i: usize| if i + 1 == grid_n { hi } else { lo + i as f64 * step };

    let mut raw = Vec::new();
    let mut x_prev = node(0);
    let mut g_prev = finite(&g, x_prev)?;
    if g_prev == 0.0 {
        raw.push(x_prev);
    }
    for i in 1..grid_n {
        let x = node(i);
        let gx = finite(&g, x)?;
        if gx == 0.0 {
            raw.push(x);
        } else if g_prev != 0.0 && (g_prev < 0.0) != (gx < 0.0) {
            raw.push(bisect(&g, x_prev, x, g_prev)?);
        }
        x_prev = x;
        g_prev = gx;
    }
    let bracket_count = raw.len();

    let mut roots: Vec<f64> = Vec::with_capacity(raw.len());
    for r in raw {
        match roots.last_mut() {
            Some(last) if r - *last <= MERGE_DISTANCE => {
                if libm::fabs(g(r)) < libm::fabs(g(*last)) {
                    *last = r;
                }
            }
            _ => roots.push(r),
        }
    }
    Ok(RootSet {
        roots,
        bracket_count,
        grid_n,
        interval: (lo, hi),
    })
}

/// Central difference `(g(x+h) - g(x-h)) / 2h`.
pub fn fd_derivative(g: impl Fn(f64) -> f64, x: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Arg("finite-difference step must be > 0"));
    }
    let up = finite(&g, x + h)?;
    let down = finite(&g, x - h)?;
    Ok((up - down) / (2.0 * h))
}

/// Defining equations that equilibria are checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquationId {
    /// First-order expansion with quadratic discount `tau dA^2`.
    E5,
    /// Parameter-change equation, evaluated with `|dA||db|` (elevated branch).
    Ne26Src,
    /// Parameter-change equation, evaluated with `|dA||db|` (depressed branch).
    Ne27Src,
    /// Second-order expansion with cubic discount `tau |dA|^3`.
    A1001,
    /// Max-error discounting when the shift dominates: penalty `db^2`.
    BRegime1,
    /// Max-error discounting when the response dominates: penalty `dA^2`.
    BRegime2,
    /// Learning step around a known point.
    L2,
    /// Dispersed-information forecast of one agent.
    HaAgent,
    /// Aggregate supply of a two-point mixture.
    HdMixture,
}

impl EquationId {
    pub const ALL: [EquationId; 9] = [
        EquationId::E5,
        EquationId::Ne26Src,
        EquationId::Ne27Src,
        EquationId::A1001,
        EquationId::BRegime1,
        EquationId::BRegime2,
        EquationId::L2,
        EquationId::HaAgent,
        EquationId::HdMixture,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EquationId::E5 => "e5",
            EquationId::Ne26Src => "ne26_src",
            EquationId::Ne27Src => "ne27_src",
            EquationId::A1001 => "a1001",
            EquationId::BRegime1 => "b_regime1",
            EquationId::BRegime2 => "b_regime2",
            EquationId::L2 => "l2",
            EquationId::HaAgent => "ha_agent",
            EquationId::HdMixture => "hd_mixture",
        }
    }
}

impl fmt::Display for EquationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EquationId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EquationId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or(Error::UnknownEquation)
    }
}

/// Coefficients an equation may need. Unused fields stay `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Context {
    pub a0: Option<f64>,
    pub phi0: Option<f64>,
    pub phi_a: Option<f64>,
    pub phi_aa: Option<f64>,
    pub phi_b: Option<f64>,
    pub delta_b: Option<f64>,
    pub tau: Option<f64>,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub tau3: Option<f64>,
    pub a_star: Option<f64>,
    pub phi_star: Option<f64>,
    pub phi_a_star: Option<f64>,
    pub a_star2: Option<f64>,
    pub phi_star2: Option<f64>,
    pub phi_a_star2: Option<f64>,
    pub psi: Option<f64>,
}

fn need(value: Option<f64>, name: &'static str) -> Result<f64> {
    value.ok_or(Error::MissingCoefficient(name))
}

/// Supply of agents who expand demand around `point` and discount the squared
/// distance, evaluated at aggregate supply `a`.
fn expanded_supply(a: f64, point: f64, phi: f64, phi_a: f64) -> f64 {
    let eps = a - point;
    phi + phi_a * eps - eps * eps
}

/// Supply side minus demand-estimate side of equation `id` at `candidate`.
///
/// For the static equations the candidate is the deviation `dA` from `A0`;
/// for `l2`, `ha_agent` and `hd_mixture` it is the supply level itself.
pub fn excess(id: EquationId, candidate: f64, ctx: &Context) -> Result<f64> {
    let d = candidate;
    match id {
        EquationId::E5 => {
            let a0 = need(ctx.a0, "a0")?;
            let phi0 = need(ctx.phi0, "phi0")?;
            let phi_a = need(ctx.phi_a, "phi_a")?;
            let tau = need(ctx.tau, "tau")?;
            Ok((a0 + d) - (phi0 + phi_a * d - tau * d * d))
        }
        EquationId::Ne26Src | EquationId::Ne27Src => {
            let a0 = need(ctx.a0, "a0")?;
            let phi0 = need(ctx.phi0, "phi0")?;
            let phi_a = need(ctx.phi_a, "phi_a")?;
            let phi_b = need(ctx.phi_b, "phi_b")?;
            let db = need(ctx.delta_b, "delta_b")?;
            let t1 = need(ctx.tau1, "tau1")?;
            let t2 = need(ctx.tau2, "tau2")?;
            let t3 = need(ctx.tau3, "tau3")?;
            let estimate = phi0 + phi_a * d + phi_b * db
                - t1 * d * d
                - t2 * db * db
                - t3 * libm::fabs(d) * libm::fabs(db);
            Ok((a0 + d) - estimate)
        }
        EquationId::A1001 => {
            let a0 = need(ctx.a0, "a0")?;
            let phi0 = need(ctx.phi0, "phi0")?;
            let phi_a = need(ctx.phi_a, "phi_a")?;
            let phi_aa = need(ctx.phi_aa, "phi_aa")?;
            let tau = need(ctx.tau, "tau")?;
            let abs = libm::fabs(d);
            Ok((a0 + d) + tau * abs * abs * abs - (phi0 + phi_a * d + 0.5 * phi_aa * d * d))
        }
        EquationId::BRegime1 | EquationId::BRegime2 => {
            let a0 = need(ctx.a0, "a0")?;
            let phi0 = need(ctx.phi0, "phi0")?;
            let phi_a = need(ctx.phi_a, "phi_a")?;
            let phi_b = need(ctx.phi_b, "phi_b")?;
            let db = need(ctx.delta_b, "delta_b")?;
            let penalty = if id == EquationId::BRegime1 {
                db * db
            } else {
                d * d
            };
            Ok((a0 + d) - (phi0 + phi_a * d + phi_b * db - penalty))
        }
        EquationId::L2 | EquationId::HaAgent => {
            let x = need(ctx.a_star, "a_star")?;
            let phi = need(ctx.phi_star, "phi_star")?;
            let phi_a = need(ctx.phi_a_star, "phi_a_star")?;
            Ok(candidate - expanded_supply(candidate, x, phi, phi_a))
        }
        EquationId::HdMixture => {
            let psi = need(ctx.psi, "psi")?;
            let x1 = need(ctx.a_star, "a_star")?;
            let phi1 = need(ctx.phi_star, "phi_star")?;
            let phi_a1 = need(ctx.phi_a_star, "phi_a_star")?;
            let x2 = need(ctx.a_star2, "a_star2")?;
            let phi2 = need(ctx.phi_star2, "phi_star2")?;
            let phi_a2 = need(ctx.phi_a_star2, "phi_a_star2")?;
            let supply = psi * expanded_supply(candidate, x1, phi1, phi_a1)
                + (1.0 - psi) * expanded_supply(candidate, x2, phi2, phi_a2);
            Ok(candidate - supply)
        }
    }
}

/// `|LHS - RHS|` of equation `id` at `candidate`.
pub fn residual(id: EquationId, candidate: f64, ctx: &Context) -> Result<f64> {
    excess(id, candidate, ctx).map(libm::fabs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_both_roots_of_parabola() {
        let set = find_roots(|x| x * x - 1.0, -2.0, 2.0, 100).unwrap();
        assert!(set.matches(&[-1.0, 1.0], 1e-10));
        for r in &set.roots {
            assert!((r * r - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn finds_linear_fixed_point() {
        // A - phi(A; b) for phi = 1 + 1 - 0.5 A
        let set = find_roots(|a| a - (2.0 - 0.5 * a), 0.0, 4.0, 100).unwrap();
        assert!(set.matches(&[4.0 / 3.0], 1e-10));
    }

    #[test]
    fn finds_first_order_roots() {
        let set = find_roots(|d| d * d + 1.5 * d, -3.0, 1.0, 100).unwrap();
        assert!(set.matches(&[-1.5, 0.0], 1e-10));
    }

    #[test]
    fn exact_grid_zero_is_reported_once() {
        let set = find_roots(|x| x, -1.0, 1.0, 3).unwrap();
        assert_eq!(set.roots, [0.0]);
    }

    #[test]
    fn near_double_roots_merge() {
        // grid spacing 2e-8 separates the two roots, which sit 4e-7 apart
        let set = find_roots(|x| (x - 0.5) * (x - 0.5 - 4e-7), 0.4999, 0.5001, 10_001).unwrap();
        assert_eq!(set.bracket_count, 2);
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn non_finite_is_an_error() {
        let err = find_roots(|x| 1.0 / x, 0.0, 1.0, 10).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
        assert!(fd_derivative(libm::log, 0.0, 1e-3).is_err());
    }

    #[test]
    fn bad_arguments() {
        assert!(find_roots(|x| x, 1.0, 1.0, 10).is_err());
        assert!(find_roots(|x| x, 0.0, 1.0, 1).is_err());
        assert!(fd_derivative(|x| x, 0.0, 0.0).is_err());
    }

    #[test]
    fn central_difference_of_square() {
        let d = fd_derivative(|x| x * x, 1.0, 1e-5).unwrap();
        assert!((d - 2.0).abs() < 1e-8);
    }

    #[test]
    fn e5_residual_examples() {
        let ctx = Context {
            a0: Some(2.0),
            phi0: Some(2.0),
            phi_a: Some(-0.5),
            tau: Some(1.0),
            ..Default::default()
        };
        assert_eq!(residual(EquationId::E5, 0.0, &ctx).unwrap(), 0.0);
        assert!(residual(EquationId::E5, -1.5, &ctx).unwrap() <= 1e-12);
        assert!(residual(EquationId::E5, -1.0, &ctx).unwrap() > 0.1);
    }

    #[test]
    fn a1001_residual_at_closed_form_root() {
        // phi_A = -0.5, phi_AA = 8, tau = 0.5: positive roots 4 +- sqrt(13)
        let ctx = Context {
            a0: Some(1.0),
            phi0: Some(1.0),
            phi_a: Some(-0.5),
            phi_aa: Some(8.0),
            tau: Some(0.5),
            ..Default::default()
        };
        for root in [4.0 + libm::sqrt(13.0), 4.0 - libm::sqrt(13.0), -4.0 - libm::sqrt(19.0)] {
            assert!(residual(EquationId::A1001, root, &ctx).unwrap() <= 1e-10, "{root}");
        }
    }

    #[test]
    fn ids_round_trip_and_unknown_is_rejected() {
        for id in EquationId::ALL {
            assert_eq!(id.as_str().parse::<EquationId>().unwrap(), id);
        }
        assert_eq!("e99".parse::<EquationId>(), Err(Error::UnknownEquation));
    }

    #[test]
    fn missing_coefficient_is_named() {
        let err = residual(EquationId::E5, 0.0, &Context::default()).unwrap_err();
        assert_eq!(err, Error::MissingCoefficient("a0"));
    }
}
