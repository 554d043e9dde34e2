//! Nearest-point learning and the two-point mixture equilibrium.
//!
//! Agents know `phi` and `phi_A` exactly at previously realized supplies.
//! Contemplating supply `A`, they expand demand around the known point `X`
//! nearest to `A` and discount the squared distance (unit discount), which
//! gives `A = X - s +- sqrt(phi(X) - X + s^2)` with `s = (1 - phi_A(X)) / 2`.
//!
//! When expanding around `X` lands nearer another known point `Y` and vice
//! versa, no single expansion point is consistent. Agents then split: a share
//! `psi` expands around `X`, the rest around `Y`, with `psi` chosen so that
//! realized supply sits exactly halfway between the two.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::demand::DemandSpec;
use crate::oracle::{self, Context, EquationId};
use crate::ree::{solve_ree, DEFAULT_TOL};
use crate::{Error, Result, ZERO_BAND};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Root {
    Plus,
    Minus,
}

impl Root {
    pub fn as_str(&self) -> &'static str {
        match self {
            Root::Plus => "plus",
            Root::Minus => "minus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootPolicy {
    AlwaysPlus,
    AlwaysMinus,
    /// Plus on even steps, minus on odd steps.
    Alternate,
    SeededRandom(u64),
}

/// Stateful root selection for one trace.
#[derive(Debug, Clone)]
pub struct RootChooser {
    policy: RootPolicy,
    rng: Option<ChaCha8Rng>,
}

impl RootChooser {
    pub fn new(policy: RootPolicy) -> Self {
        let rng = match policy {
            RootPolicy::SeededRandom(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        Self { policy, rng }
    }

    pub fn choose(&mut self, t: usize) -> Root {
        match self.policy {
            RootPolicy::AlwaysPlus => Root::Plus,
            RootPolicy::AlwaysMinus => Root::Minus,
            RootPolicy::Alternate if t.is_multiple_of(2) => Root::Plus,
            RootPolicy::Alternate => Root::Minus,
            RootPolicy::SeededRandom(_) => {
                let draw = self.rng.as_mut().map_or(0, |rng| rng.next_u32());
                if draw & 1 == 1 {
                    Root::Minus
                } else {
                    Root::Plus
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootUsed {
    Plus,
    Minus,
    Mixture,
}

impl RootUsed {
    pub fn as_str(&self) -> &'static str {
        match self {
            RootUsed::Plus => "plus",
            RootUsed::Minus => "minus",
            RootUsed::Mixture => "mixture",
        }
    }
}

impl From<Root> for RootUsed {
    fn from(r: Root) -> Self {
        match r {
            Root::Plus => RootUsed::Plus,
            Root::Minus => RootUsed::Minus,
        }
    }
}

/// Supply when every agent expands around `x`. Uses the unchecked closed
/// forms; callers decide whether the result must lie in the domain.
pub fn supply_map(spec: &DemandSpec, b: f64, x: f64, root: Root) -> Result<f64> {
    let gap = spec.price(x, b) - x;
    let s = 0.5 * (1.0 - spec.slope(x, b));
    let disc = gap + s * s;
    if !(disc >= 0.0) {
        return Err(Error::ComplexRoot {
            at: x,
            discriminant: disc,
        });
    }
    let root_abs = libm::sqrt(disc);
    Ok(match root {
        // x - s + sqrt(gap + s^2) without cancellation
        Root::Plus if s + root_abs > 0.0 => x + gap / (s + root_abs),
        Root::Plus => x - s + root_abs,
        Root::Minus => x - s - root_abs,
    })
}

fn single_point_context(spec: &DemandSpec, b: f64, x: f64) -> Context {
    Context {
        a_star: Some(x),
        phi_star: Some(spec.price(x, b)),
        phi_a_star: Some(spec.slope(x, b)),
        ..Default::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    /// Expansion point used (the lower point of the pair for a mixture step).
    pub a_star: f64,
    pub a_next: f64,
    /// Undiscounted linear price estimate at `a_next`.
    pub forecast: f64,
    pub true_price: f64,
    /// `a_next - a_star`
    pub epsilon: f64,
    /// Residual of the defining equation at `a_next`.
    pub residual: f64,
    pub root_used: RootUsed,
    /// Share expanding around `a_star` on mixture steps.
    pub psi: Option<f64>,
}

/// Index of the known point nearest to `a`, and a second index when another
/// distinct point is equally near (within the zero band).
fn nearest(known: &[f64], a: f64) -> (usize, Option<usize>) {
    let mut best = 0;
    for (i, &x) in known.iter().enumerate() {
        if libm::fabs(x - a) < libm::fabs(known[best] - a) {
            best = i;
        }
    }
    let d = libm::fabs(known[best] - a);
    let tie = known.iter().position(|&x| {
        libm::fabs(x - known[best]) > ZERO_BAND && libm::fabs(libm::fabs(x - a) - d) <= ZERO_BAND
    });
    (best, tie)
}

/// One learning step from the known points.
///
/// Starts from the most recently realized point, computes the chosen root
/// and re-checks that the expansion point is nearest to the outcome; if not,
/// moves to the nearer point. Revisiting a point (a cycle) or an exact tie
/// hands over to [`mixture_equilibrium`] on the two points involved, which
/// always uses the plus root. A realized supply outside the demand domain is
/// a [`Error::Domain`] error.
pub fn step(spec: &DemandSpec, b: f64, known: &[f64], root: Root) -> Result<StepRecord> {
    if known.is_empty() {
        return Err(Error::Arg("at least one known point is required"));
    }
    if known.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { at: f64::NAN });
    }
    let t = known.len() - 1;
    let mut current = t;
    let mut visited = vec![current];
    loop {
        let x = known[current];
        let next = supply_map(spec, b, x, root)?;
        let (near, tie) = nearest(known, next);
        let pair = match tie {
            Some(other) => Some((known[near], known[other])),
            None if libm::fabs(known[near] - x) <= ZERO_BAND => None,
            None if visited.contains(&near) => Some((x, known[near])),
            None => {
                visited.push(near);
                current = near;
                continue;
            }
        };
        return match pair {
            None => {
                if !spec.contains(next) {
                    return Err(Error::Domain {
                        a: next,
                        a_max: spec.a_max(),
                    });
                }
                let phi = spec.price(x, b);
                let phi_a = spec.slope(x, b);
                let eps = next - x;
                let ctx = single_point_context(spec, b, x);
                Ok(StepRecord {
                    t,
                    a_star: x,
                    a_next: next,
                    forecast: phi + phi_a * eps,
                    true_price: spec.price(next, b),
                    epsilon: eps,
                    residual: oracle::residual(EquationId::L2, next, &ctx)?,
                    root_used: root.into(),
                    psi: None,
                })
            }
            Some((p1, p2)) => {
                let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
                let mix = mixture_equilibrium(spec, b, lo, hi)?;
                let linear = |x: f64| spec.price(x, b) + spec.slope(x, b) * (mix.a_bar - x);
                Ok(StepRecord {
                    t,
                    a_star: lo,
                    a_next: mix.a_bar,
                    forecast: mix.psi * linear(lo) + (1.0 - mix.psi) * linear(hi),
                    true_price: spec.price(mix.a_bar, b),
                    epsilon: mix.a_bar - lo,
                    residual: mix.residual,
                    root_used: RootUsed::Mixture,
                    psi: Some(mix.psi),
                })
            }
        };
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Converged,
    MaxSteps,
    Halted(Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningTrace {
    /// `A_0 = prior, A_1, ..., A_T`
    pub points: Vec<f64>,
    pub steps: Vec<StepRecord>,
    pub converged: bool,
    /// `|A_T - A0|`
    pub final_gap: f64,
    pub a0: f64,
    pub termination: Termination,
}

impl LearningTrace {
    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }
}

/// Iterates [`step`] from a single prior point until `|A_t - phi(A_t)| <= tol`
/// or `t_max` steps. A step error halts the trace and is recorded in
/// `termination`.
pub fn simulate(
    spec: &DemandSpec,
    b: f64,
    prior_mu: f64,
    t_max: usize,
    policy: RootPolicy,
    tol: f64,
) -> Result<LearningTrace> {
    if !prior_mu.is_finite() || !spec.contains(prior_mu) {
        return Err(Error::Domain {
            a: prior_mu,
            a_max: spec.a_max(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::Arg("tolerance must be > 0"));
    }
    let a0 = solve_ree(spec, b, DEFAULT_TOL)?.a0;
    let fixed = |a: f64| libm::fabs(a - spec.price(a, b)) <= tol;

    let mut chooser = RootChooser::new(policy);
    let mut points = vec![prior_mu];
    let mut steps = Vec::new();
    let mut termination = if fixed(prior_mu) {
        Termination::Converged
    } else {
        Termination::MaxSteps
    };
    while termination == Termination::MaxSteps && steps.len() < t_max {
        let root = chooser.choose(steps.len());
        match step(spec, b, &points, root) {
            Ok(rec) => {
                points.push(rec.a_next);
                steps.push(rec);
                if fixed(rec.a_next) {
                    termination = Termination::Converged;
                }
            }
            Err(e) => termination = Termination::Halted(e),
        }
    }
    let last = points[points.len() - 1];
    Ok(LearningTrace {
        converged: termination == Termination::Converged,
        final_gap: libm::fabs(last - a0),
        points,
        steps,
        a0,
        termination,
    })
}

/// Coefficients of `A^2 + p A + q = 0`, the aggregate fixed point when a share
/// `psi` expands around `x1` and `1 - psi` around `x2`.
pub fn mixture_coefficients(spec: &DemandSpec, b: f64, x1: f64, x2: f64, psi: f64) -> (f64, f64) {
    let group = |x: f64| {
        let phi = spec.price(x, b);
        let phi_a = spec.slope(x, b);
        (phi_a + 2.0 * x, phi - phi_a * x - x * x)
    };
    let (lin1, con1) = group(x1);
    let (lin2, con2) = group(x2);
    let p = 1.0 - psi * lin1 - (1.0 - psi) * lin2;
    let q = -(psi * con1 + (1.0 - psi) * con2);
    (p, q)
}

/// Larger root `-p/2 + sqrt(p^2/4 - q)` of the mixture quadratic.
pub fn mixture_supply(spec: &DemandSpec, b: f64, x1: f64, x2: f64, psi: f64) -> Result<f64> {
    let (p, q) = mixture_coefficients(spec, b, x1, x2, psi);
    let half = 0.5 * p;
    let disc = half * half - q;
    if !(disc >= 0.0) {
        return Err(Error::ComplexMixture { psi });
    }
    Ok(-half + libm::sqrt(disc))
}

fn mixture_context(spec: &DemandSpec, b: f64, x1: f64, x2: f64, psi: f64) -> Context {
    Context {
        psi: Some(psi),
        a_star2: Some(x2),
        phi_star2: Some(spec.price(x2, b)),
        phi_a_star2: Some(spec.slope(x2, b)),
        ..single_point_context(spec, b, x1)
    }
}

/// Largest aggregate fixed point of the mixture, found by scanning the
/// defining equation directly rather than through `p` and `q`.
pub fn mixture_supply_direct(spec: &DemandSpec, b: f64, x1: f64, x2: f64, psi: f64) -> Result<f64> {
    let ctx = mixture_context(spec, b, x1, x2, psi);
    let g = |a: f64| oracle::excess(EquationId::HdMixture, a, &ctx).unwrap_or(f64::NAN);
    // every root of a monic quadratic lies within 1 + max|coefficient|
    let (p, q) = mixture_coefficients(spec, b, x1, x2, psi);
    let bound = 2.0 + libm::fmax(libm::fabs(p), libm::fabs(q));
    let roots = oracle::find_roots(g, -bound, bound, 20_000)?;
    roots
        .roots
        .last()
        .copied()
        .ok_or(Error::ComplexMixture { psi })
}

/// Signed margin by which `(x1, x2)` cycles: positive iff plus-root supply
/// from the lower point lands nearer the upper point and vice versa.
pub fn cycle_margin(spec: &DemandSpec, b: f64, x1: f64, x2: f64) -> Result<f64> {
    let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
    let mid = 0.5 * (lo + hi);
    let from_lo = supply_map(spec, b, lo, Root::Plus)?;
    let from_hi = supply_map(spec, b, hi, Root::Plus)?;
    Ok(libm::fmin(from_lo - mid, mid - from_hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureEquilibrium {
    /// Share of agents expanding around `a_star`.
    pub psi: f64,
    /// Realized supply, the midpoint of the two points.
    pub a_bar: f64,
    pub a_star: f64,
    pub a_star2: f64,
    pub p: f64,
    pub q: f64,
    /// Residual of the mixture equation at `a_bar`.
    pub residual: f64,
    /// Same fixed point from the direct scan.
    pub a_direct: f64,
    pub degenerate: bool,
}

const PSI_GRID: usize = 101;

/// Mixture equilibrium on a cycling pair: bisects `psi` in `[0, 1]` until
/// aggregate supply equals the midpoint.
///
/// `A(1)` is plus-root supply from `a_star` alone and `A(0)` from `a_star2`
/// alone; the cycle hypothesis puts them on opposite sides of the midpoint.
pub fn mixture_equilibrium(spec: &DemandSpec, b: f64, a_star: f64, a_star2: f64) -> Result<MixtureEquilibrium> {
    let a_bar = 0.5 * (a_star + a_star2);
    if libm::fabs(a_star - a_star2) <= ZERO_BAND {
        let (p, q) = mixture_coefficients(spec, b, a_star, a_star2, 0.5);
        let ctx = mixture_context(spec, b, a_star, a_star2, 0.5);
        return Ok(MixtureEquilibrium {
            psi: 0.5,
            a_bar,
            a_star,
            a_star2,
            p,
            q,
            residual: oracle::residual(EquationId::HdMixture, a_bar, &ctx)?,
            a_direct: mixture_supply(spec, b, a_star, a_star2, 0.5)?,
            degenerate: true,
        });
    }
    if !(cycle_margin(spec, b, a_star, a_star2)? > 0.0) {
        return Err(Error::Existence("points do not cycle under the plus root"));
    }
    for i in 0..PSI_GRID {
        mixture_supply(spec, b, a_star, a_star2, i as f64 / (PSI_GRID - 1) as f64)?;
    }

    let h = |psi: f64| mixture_supply(spec, b, a_star, a_star2, psi).map(|a| a - a_bar);
    let (mut lo, mut hi) = (0.0, 1.0);
    let h_lo = h(lo)?;
    if h_lo * h(hi)? > 0.0 {
        return Err(Error::Existence("no sign change in psi"));
    }
    let mut best = (f64::INFINITY, 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = h(mid)?;
        if libm::fabs(v) < best.0 {
            best = (libm::fabs(v), mid);
        }
        if v == 0.0 || hi - lo <= f64::EPSILON {
            break;
        }
        if (v < 0.0) == (h_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let psi = best.1;
    let (p, q) = mixture_coefficients(spec, b, a_star, a_star2, psi);
    let ctx = mixture_context(spec, b, a_star, a_star2, psi);
    Ok(MixtureEquilibrium {
        psi,
        a_bar,
        a_star,
        a_star2,
        p,
        q,
        residual: oracle::residual(EquationId::HdMixture, a_bar, &ctx)?,
        a_direct: mixture_supply_direct(spec, b, a_star, a_star2, psi)?,
        degenerate: false,
    })
}

/// Scans pairs `x1 < x2` on a `grid_n`-point grid over `[lo, hi]` for the
/// cycle with the largest margin, among pairs with positive price at both
/// points and `-q > 0` for every `psi`.
pub fn find_cycling_pair(spec: &DemandSpec, b: f64, lo: f64, hi: f64, grid_n: usize) -> Result<Option<(f64, f64)>> {
    if grid_n < 2 || !(hi > lo) {
        return Err(Error::Arg("scan needs grid_n >= 2 and hi > lo"));
    }
    let grid: Vec<f64> = (0..grid_n)
        .map(|i| crate::quadrature::node(lo, hi, grid_n, i))
        .collect();
    let mut best: Option<(f64, (f64, f64))> = None;
    for (i, &x1) in grid.iter().enumerate() {
        for &x2 in &grid[i + 1..] {
            if !(spec.price(x1, b) > 0.0 && spec.price(x2, b) > 0.0) {
                continue;
            }
            // q is affine in psi, so checking both ends covers [0, 1]
            let q_ok = [0.0, 1.0]
                .iter()
                .all(|&psi| mixture_coefficients(spec, b, x1, x2, psi).1 < 0.0);
            if !q_ok {
                continue;
            }
            let Ok(margin) = cycle_margin(spec, b, x1, x2) else {
                continue;
            };
            if margin > 0.0 && best.is_none_or(|(m, _)| margin > m) {
                best = Some((margin, (x1, x2)));
            }
        }
    }
    Ok(best.map(|(_, pair)| pair))
}
