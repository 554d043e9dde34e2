//! Static polynomial equilibria.
//!
//! Agents know demand only through an expansion at the rational-expectations
//! point `(A0, b0)` and discount their price estimate for the approximation
//! error. Each variant reduces to one or two quadratics in the deviation
//! `dA = A - A0`, derived under a sign assumption on `dA` (or on `|db|` vs
//! `|dA|`). Every candidate is re-checked against that assumption and against
//! the defining equation by direct evaluation.

use alloc::vec::Vec;

use crate::demand::DemandSpec;
use crate::oracle::{self, Context, EquationId};
use crate::ree::ReePoint;
use crate::{Error, Result, ZERO_BAND};

/// Local information agents hold: demand and its derivatives at `(a0, b0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expansion {
    pub a0: f64,
    pub b0: f64,
    pub phi: f64,
    pub phi_a: f64,
    pub phi_aa: f64,
    pub phi_b: f64,
}

impl Expansion {
    pub fn at_ree(spec: &DemandSpec, ree: &ReePoint) -> Result<Self> {
        Ok(Self {
            a0: ree.a0,
            b0: ree.b,
            phi: spec.eval(ree.a0, ree.b)?,
            phi_a: spec.d_da(ree.a0, ree.b)?,
            phi_aa: spec.d2_da2(ree.a0, ree.b)?,
            phi_b: spec.d_db(ree.a0, ree.b)?,
        })
    }

    /// Expansion at an exact fixed point `A0 = phi = 1` with the given slopes;
    /// handy when only the derivatives matter.
    pub fn from_slopes(phi_a: f64, phi_aa: f64, phi_b: f64) -> Self {
        Self {
            a0: 1.0,
            b0: 0.0,
            phi: 1.0,
            phi_a,
            phi_aa,
            phi_b,
        }
    }

    fn context(&self) -> Context {
        Context {
            a0: Some(self.a0),
            phi0: Some(self.phi),
            phi_a: Some(self.phi_a),
            phi_aa: Some(self.phi_aa),
            phi_b: Some(self.phi_b),
            ..Default::default()
        }
    }

    /// `(1 - phi_A) / 2`
    fn half_gap(&self) -> f64 {
        0.5 * (1.0 - self.phi_a)
    }
}

/// Discount coefficients on `dA^2`, `db^2` and `|dA||db|`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Taus {
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
}

impl Taus {
    pub fn new(tau1: f64, tau2: f64, tau3: f64) -> Self {
        Self { tau1, tau2, tau3 }
    }

    fn single(tau: f64) -> Self {
        Self {
            tau1: tau,
            ..Default::default()
        }
    }
}

/// Which side of `|db|` vs `|dA|` a max-error discounting candidate lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AltRegime {
    /// `|db| > |dA|`, penalty `db^2`.
    ShiftDominant,
    /// `|db| < |dA|`, penalty `dA^2`.
    ResponseDominant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    FirstOrder,
    ParamChange,
    SecondOrder,
    AltDiscount(AltRegime),
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::FirstOrder => "first-order",
            Variant::ParamChange => "param-change",
            Variant::SecondOrder => "second-order",
            Variant::AltDiscount(AltRegime::ShiftDominant) => "alt-discount-shift",
            Variant::AltDiscount(AltRegime::ResponseDominant) => "alt-discount-response",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Variant::FirstOrder,
            Variant::ParamChange,
            Variant::SecondOrder,
            Variant::AltDiscount(AltRegime::ShiftDominant),
            Variant::AltDiscount(AltRegime::ResponseDominant),
        ]
        .into_iter()
        .find(|v| v.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    PlusRoot,
    MinusRoot,
    Zero,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::PlusRoot => "plus",
            Branch::MinusRoot => "minus",
            Branch::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Ree,
    Depressed,
    Elevated,
}

impl Regime {
    pub fn of(delta_a: f64) -> Self {
        if libm::fabs(delta_a) <= ZERO_BAND {
            Regime::Ree
        } else if delta_a < 0.0 {
            Regime::Depressed
        } else {
            Regime::Elevated
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Ree => "ree",
            Regime::Depressed => "depressed",
            Regime::Elevated => "elevated",
        }
    }
}

pub const REASON_BOUNDARY: &str = "boundary";
pub const REASON_EXTRAPOLATED: &str = "true price extrapolated";
pub const REASON_DEGENERATE: &str = "degenerate";
pub const REASON_COMPLEX: &str = "complex roots";
pub const REASON_SIGN: &str = "violates sign assumption";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub variant: Variant,
    pub delta_b: f64,
    pub taus: Taus,
    pub branch: Branch,
    pub delta_a: f64,
    pub a: f64,
    /// Agents' price estimate at `a`, before discounting.
    pub forecast_price: f64,
    /// `phi(a; b0 + delta_b)`, once attached from a demand spec.
    pub true_price: Option<f64>,
    pub residual: f64,
    pub equation: EquationId,
    pub regime: Regime,
    pub valid: bool,
    pub reason: Option<&'static str>,
}

/// A candidate root that was discarded, with the reason.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropped {
    pub variant: Variant,
    pub branch: Branch,
    pub delta_a: Option<f64>,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EquilibriumSet {
    pub equilibria: Vec<Equilibrium>,
    pub dropped: Vec<Dropped>,
}

impl EquilibriumSet {
    pub fn len(&self) -> usize {
        self.equilibria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equilibria.is_empty()
    }

    /// Deviations in ascending order.
    pub fn deviations(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.equilibria.iter().map(|e| e.delta_a).collect();
        d.sort_by(f64::total_cmp);
        d
    }

    pub fn max_residual(&self) -> f64 {
        self.equilibria.iter().map(|e| e.residual).fold(0.0, f64::max)
    }

    /// Prices every record with the true demand; records priced outside the
    /// spec's domain get [`REASON_EXTRAPOLATED`].
    pub fn attach_true_prices(&mut self, spec: &DemandSpec, b0: f64) {
        for e in &mut self.equilibria {
            e.true_price = Some(spec.price(e.a, b0 + e.delta_b));
            if !spec.contains(e.a) && e.reason.is_none() {
                e.reason = Some(REASON_EXTRAPOLATED);
            }
        }
    }

    fn push(&mut self, e: Equilibrium) {
        let duplicate = self
            .equilibria
            .iter()
            .any(|o| libm::fabs(o.delta_a - e.delta_a) <= ZERO_BAND);
        if !duplicate {
            self.equilibria.push(e);
        }
    }

    fn drop_candidate(&mut self, variant: Variant, branch: Branch, delta_a: Option<f64>, reason: &'static str) {
        self.dropped.push(Dropped {
            variant,
            branch,
            delta_a,
            reason,
        });
    }

    fn sort(&mut self) {
        self.equilibria.sort_by(|a, b| a.delta_a.total_cmp(&b.delta_a));
    }
}

struct Builder<'a> {
    x: &'a Expansion,
    variant: Variant,
    delta_b: f64,
    taus: Taus,
    equation: EquationId,
    ctx: Context,
}

impl Builder<'_> {
    fn forecast(&self, d: f64) -> f64 {
        let x = self.x;
        match self.variant {
            Variant::FirstOrder => x.phi + x.phi_a * d,
            Variant::SecondOrder => x.phi + x.phi_a * d + 0.5 * x.phi_aa * d * d,
            Variant::ParamChange | Variant::AltDiscount(_) => {
                x.phi + x.phi_a * d + x.phi_b * self.delta_b
            }
        }
    }

    fn build(&self, delta_a: f64, branch: Branch, reason: Option<&'static str>) -> Result<Equilibrium> {
        let regime = Regime::of(delta_a);
        let branch = if regime == Regime::Ree && self.delta_b == 0.0 {
            Branch::Zero
        } else {
            branch
        };
        Ok(Equilibrium {
            variant: self.variant,
            delta_b: self.delta_b,
            taus: self.taus,
            branch,
            delta_a,
            a: self.x.a0 + delta_a,
            forecast_price: self.forecast(delta_a),
            true_price: None,
            residual: oracle::residual(self.equation, delta_a, &self.ctx)?,
            equation: self.equation,
            regime,
            valid: true,
            reason,
        })
    }
}

/// Real roots of `a x^2 + b x + c = 0`, computed without cancellation and
/// returned as `(minus_root, plus_root)` with respect to the `sqrt` sign, or
/// `None` when the discriminant is negative. Requires `a > 0`.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = libm::sqrt(disc);
    if b == 0.0 {
        let r = sq / (2.0 * a);
        return Some((-r, r));
    }
    let q = -0.5 * (b + libm::copysign(sq, b));
    let (r1, r2) = (q / a, if q != 0.0 { c / q } else { 0.0 });
    Some(if r1 <= r2 { (r1, r2) } else { (r2, r1) })
}

fn check_non_negative(value: f64, what: &'static str) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::Arg(what))
    }
}

/// First-order expansion with discount `tau dA^2`: `tau dA^2 + (1 - phi_A) dA = 0`.
///
/// Returns the REE and, for `tau > 0`, the depressed equilibrium
/// `dA = -(1 - phi_A) / tau`.
pub fn first_order_equilibria(x: &Expansion, tau: f64) -> Result<EquilibriumSet> {
    check_non_negative(tau, "tau must be >= 0")?;
    let b = Builder {
        x,
        variant: Variant::FirstOrder,
        delta_b: 0.0,
        taus: Taus::single(tau),
        equation: EquationId::E5,
        ctx: Context {
            tau: Some(tau),
            ..x.context()
        },
    };
    let mut set = EquilibriumSet::default();
    set.push(b.build(0.0, Branch::Zero, None)?);
    if tau > 0.0 {
        set.push(b.build(-(1.0 - x.phi_a) / tau, Branch::MinusRoot, None)?);
    }
    set.sort();
    Ok(set)
}

/// `(phi_b - tau2 db) db / tau1`, the constant term shared by both branches.
fn shift_term(x: &Expansion, delta_b: f64, taus: &Taus) -> f64 {
    (x.phi_b - taus.tau2 * delta_b) * delta_b / taus.tau1
}

fn check_param_change(delta_b: f64, taus: &Taus) -> Result<()> {
    check_non_negative(delta_b, "delta_b must be >= 0")?;
    if !(taus.tau1 > 0.0) || !taus.tau1.is_finite() {
        return Err(Error::Arg("tau1 must be > 0"));
    }
    check_non_negative(taus.tau2, "tau2 must be >= 0")?;
    check_non_negative(taus.tau3, "tau3 must be >= 0")
}

/// Equilibria after a parameter change `db >= 0` with discount
/// `tau1 dA^2 + tau2 db^2 + tau3 |dA||db|`.
///
/// For `dA >= 0` the candidates solve
/// `tau1 dA^2 + (1 - phi_A + tau3 db) dA - (phi_b - tau2 db) db = 0`, for
/// `dA <= 0` the same with `-tau3`. Candidates violating their branch's sign
/// are dropped, as are complex pairs. A zero deviation is an equilibrium only
/// at `db = 0` (the REE); for `db > 0` the elevated branch requires
/// `db < phi_b / tau2`.
pub fn parameter_change_equilibria(x: &Expansion, delta_b: f64, taus: Taus) -> Result<EquilibriumSet> {
    check_param_change(delta_b, &taus)?;
    let ctx = Context {
        delta_b: Some(delta_b),
        tau1: Some(taus.tau1),
        tau2: Some(taus.tau2),
        tau3: Some(taus.tau3),
        ..x.context()
    };
    let mut set = EquilibriumSet::default();
    let variant = Variant::ParamChange;
    let constant = -shift_term(x, delta_b, &taus) * taus.tau1;

    for (equation, elevated) in [(EquationId::Ne26Src, true), (EquationId::Ne27Src, false)] {
        let b = Builder {
            x,
            variant,
            delta_b,
            taus,
            equation,
            ctx,
        };
        let tilt = if elevated { taus.tau3 } else { -taus.tau3 } * delta_b;
        let Some((minus, plus)) = quadratic_roots(taus.tau1, 1.0 - x.phi_a + tilt, constant) else {
            set.drop_candidate(variant, Branch::PlusRoot, None, REASON_COMPLEX);
            set.drop_candidate(variant, Branch::MinusRoot, None, REASON_COMPLEX);
            continue;
        };
        for (root, branch) in [(plus, Branch::PlusRoot), (minus, Branch::MinusRoot)] {
            if delta_b == 0.0 && root == 0.0 {
                set.push(b.build(0.0, Branch::Zero, None)?);
                continue;
            }
            let consistent = if elevated { root > 0.0 } else { root < 0.0 };
            if consistent {
                let reason = (libm::fabs(root) <= ZERO_BAND).then_some(REASON_BOUNDARY);
                set.push(b.build(root, branch, reason)?);
            } else {
                set.drop_candidate(variant, branch, Some(root), REASON_SIGN);
            }
        }
    }
    set.sort();
    Ok(set)
}

/// Elevated deviation `dA_1(db)` of the parameter-change economy, if it
/// exists at `delta_b`.
pub fn elevated_deviation(x: &Expansion, delta_b: f64, taus: Taus) -> Result<Option<f64>> {
    check_param_change(delta_b, &taus)?;
    if delta_b == 0.0 {
        return Ok(Some(0.0));
    }
    let c = shift_term(x, delta_b, &taus);
    if !(c > 0.0) {
        return Ok(None);
    }
    let k = (1.0 - x.phi_a + taus.tau3 * delta_b) / (2.0 * taus.tau1);
    let root = libm::sqrt(c + k * k);
    // -k + root, rewritten to avoid cancellation for small c
    Ok(Some(if k > 0.0 { c / (k + root) } else { root - k }))
}

/// Marginal effect `d(dA_1)/d(db)` of the shift on the elevated equilibrium.
///
/// With `k = (1 - phi_A + tau3 db) / (2 tau1)` and
/// `D = (phi_b - tau2 db) db / tau1 + k^2`:
/// `-tau3 / (2 tau1) + (phi_b / tau1 - 2 tau2 db / tau1 + tau3 k / tau1) / (2 sqrt(D))`.
/// At `db = 0` this is `phi_b / (1 - phi_A)`.
pub fn marginal_multiplier(x: &Expansion, delta_b: f64, taus: Taus) -> Result<f64> {
    if elevated_deviation(x, delta_b, taus)?.is_none() {
        return Err(Error::Existence("no elevated equilibrium at this shift"));
    }
    let Taus { tau1, tau2, tau3 } = taus;
    let k = (1.0 - x.phi_a + tau3 * delta_b) / (2.0 * tau1);
    let disc = shift_term(x, delta_b, &taus) + k * k;
    let d_disc = x.phi_b / tau1 - 2.0 * tau2 * delta_b / tau1 + tau3 * k / tau1;
    Ok(-tau3 / (2.0 * tau1) + d_disc / (2.0 * libm::sqrt(disc)))
}

/// Second-order expansion with cubic discount:
/// `tau |dA|^3 - phi_AA dA^2 / 2 + (1 - phi_A) dA = 0`.
///
/// With `tau = 0` the second root is `(1 - phi_A) / (phi_AA / 2)` (absent when
/// `phi_AA = 0`, noted as degenerate). With `tau > 0` the depressed root
/// `-phi_AA/(4 tau) - sqrt((phi_AA/(4 tau))^2 + (1 - phi_A)/tau)` always exists
/// and up to two elevated roots `phi_AA/(4 tau) +- sqrt(...)` are added.
pub fn second_order_equilibria(x: &Expansion, tau: f64) -> Result<EquilibriumSet> {
    check_non_negative(tau, "tau must be >= 0")?;
    let variant = Variant::SecondOrder;
    let b = Builder {
        x,
        variant,
        delta_b: 0.0,
        taus: Taus::single(tau),
        equation: EquationId::A1001,
        ctx: Context {
            tau: Some(tau),
            ..x.context()
        },
    };
    let gap = 1.0 - x.phi_a;
    let mut set = EquilibriumSet::default();
    set.push(b.build(0.0, Branch::Zero, None)?);

    if tau == 0.0 {
        if x.phi_aa == 0.0 {
            set.drop_candidate(variant, Branch::PlusRoot, None, REASON_DEGENERATE);
        } else {
            set.push(b.build(gap / (0.5 * x.phi_aa), Branch::PlusRoot, None)?);
        }
        return Ok(set);
    }

    // dA < 0: tau dA^2 + phi_AA/2 dA - (1 - phi_A) = 0
    match quadratic_roots(tau, 0.5 * x.phi_aa, -gap) {
        Some((minus, plus)) => {
            for (root, branch) in [(minus, Branch::MinusRoot), (plus, Branch::PlusRoot)] {
                if root < 0.0 {
                    set.push(b.build(root, branch, None)?);
                } else {
                    set.drop_candidate(variant, branch, Some(root), REASON_SIGN);
                }
            }
        }
        None => set.drop_candidate(variant, Branch::MinusRoot, None, REASON_COMPLEX),
    }
    // dA > 0: tau dA^2 - phi_AA/2 dA + (1 - phi_A) = 0
    match quadratic_roots(tau, -0.5 * x.phi_aa, gap) {
        Some((minus, plus)) => {
            for (root, branch) in [(minus, Branch::MinusRoot), (plus, Branch::PlusRoot)] {
                if root > 0.0 {
                    set.push(b.build(root, branch, None)?);
                } else {
                    set.drop_candidate(variant, branch, Some(root), REASON_SIGN);
                }
            }
        }
        None => set.drop_candidate(variant, Branch::PlusRoot, None, REASON_COMPLEX),
    }
    set.sort();
    Ok(set)
}

/// Equilibria under the max-error discount `max(dA^2, db^2)`.
///
/// Shift-dominant candidate: `dA = (phi_b - db) db / (1 - phi_A)`, kept iff
/// `|dA| < |db|`. Response-dominant candidates:
/// `dA = -(1 - phi_A)/2 +- sqrt(phi_b db + ((1 - phi_A)/2)^2)`, each kept iff
/// `|db| < |dA|`. Candidates within the zero band of the regime boundary are
/// kept and labelled boundary.
pub fn alt_discount_equilibria(x: &Expansion, delta_b: f64) -> Result<EquilibriumSet> {
    check_non_negative(delta_b, "delta_b must be >= 0")?;
    let ctx = Context {
        delta_b: Some(delta_b),
        ..x.context()
    };
    let mut set = EquilibriumSet::default();
    let gap = 1.0 - x.phi_a;

    let shift = Builder {
        x,
        variant: Variant::AltDiscount(AltRegime::ShiftDominant),
        delta_b,
        taus: Taus::default(),
        equation: EquationId::BRegime1,
        ctx,
    };
    let response = Builder {
        variant: Variant::AltDiscount(AltRegime::ResponseDominant),
        equation: EquationId::BRegime2,
        ..shift
    };

    // sign of |db| - |dA|, with the zero band mapped to a boundary label
    let margin = |d: f64| libm::fabs(delta_b) - libm::fabs(d);

    let d1 = (x.phi_b - delta_b) / gap * delta_b;
    let m = margin(d1);
    if libm::fabs(m) <= ZERO_BAND {
        set.push(shift.build(d1, Branch::PlusRoot, Some(REASON_BOUNDARY))?);
    } else if m > 0.0 {
        set.push(shift.build(d1, Branch::PlusRoot, None)?);
    } else {
        set.drop_candidate(shift.variant, Branch::PlusRoot, Some(d1), REASON_SIGN);
    }

    let s = 0.5 * gap;
    let root = libm::sqrt(x.phi_b * delta_b + s * s);
    let plus = x.phi_b * delta_b / (s + root);
    let minus = -s - root;
    for (d, branch) in [(minus, Branch::MinusRoot), (plus, Branch::PlusRoot)] {
        let m = margin(d);
        if libm::fabs(m) <= ZERO_BAND {
            set.push(response.build(d, branch, Some(REASON_BOUNDARY))?);
        } else if m < 0.0 {
            set.push(response.build(d, branch, None)?);
        } else {
            set.drop_candidate(response.variant, branch, Some(d), REASON_SIGN);
        }
    }
    set.sort();
    Ok(set)
}

/// Response-dominant deviations `(minus, plus)` at shift `delta_b`.
pub fn response_dominant_deviations(x: &Expansion, delta_b: f64) -> (f64, f64) {
    let s = x.half_gap();
    let root = libm::sqrt(x.phi_b * delta_b + s * s);
    (-s - root, x.phi_b * delta_b / (s + root))
}

fn bisect_decreasing_crossing(h: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-13 * hi.max(1.0) {
            break;
        }
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn expand_until_negative(h: &impl Fn(f64) -> f64) -> Result<f64> {
    let mut hi = 1.0;
    for _ in 0..1100 {
        if h(hi) < 0.0 {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(Error::Existence("regime crossing not bracketed"))
}

/// `db_1`: the shift at which the depressed response-dominant equilibrium
/// leaves its regime, `|dA_1(db_1)| = db_1`.
pub fn lower_regime_bound(x: &Expansion) -> Result<f64> {
    let h = |db: f64| libm::fabs(response_dominant_deviations(x, db).0) - db;
    if !(h(0.0) > 0.0) {
        return Err(Error::Existence("depressed equilibrium absent at db = 0"));
    }
    let hi = expand_until_negative(&h)?;
    Ok(bisect_decreasing_crossing(h, 0.0, hi))
}

/// `db_2`: the shift at which the elevated response-dominant equilibrium
/// leaves its regime, `dA_2(db_2) = db_2`. Requires `phi_b / (1 - phi_A) > 1`.
pub fn upper_regime_bound(x: &Expansion) -> Result<f64> {
    if !(x.phi_b / (1.0 - x.phi_a) > 1.0) {
        return Err(Error::Existence(
            "db_2 requires phi_b / (1 - phi_A) > 1",
        ));
    }
    let h = |db: f64| response_dominant_deviations(x, db).1 - db;
    let hi = expand_until_negative(&h)?;
    let mut lo = 0.5 * hi;
    while !(h(lo) > 0.0) {
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Err(Error::Existence("regime crossing not bracketed"));
        }
    }
    Ok(bisect_decreasing_crossing(h, lo, hi))
}

/// Both regime bounds `(db_1, db_2)`; fails when `db_2` is undefined.
pub fn regime_bounds(x: &Expansion) -> Result<(f64, f64)> {
    Ok((lower_regime_bound(x)?, upper_regime_bound(x)?))
}
