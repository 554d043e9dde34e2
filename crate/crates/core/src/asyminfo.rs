//! Dispersed-information equilibria.
//!
//! Each agent knows demand exactly at its own point `A_i`, drawn from an
//! information density, expands around it and discounts the squared
//! distance. Under a common guess the agent's forecast solves the same
//! quadratic as a single-point learning step, and aggregate supply is the
//! density-weighted integral of individual supplies.

use alloc::vec::Vec;

use crate::demand::{Curvature, DemandSpec};
use crate::learning::{supply_map, Root};
use crate::oracle::{self, Context, EquationId};
use crate::quadrature;
use crate::ree::{solve_ree, DEFAULT_TOL};
use crate::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-8;
const NORMALIZATION_NODES: usize = 20_001;
const MAX_QUAD_ERROR: f64 = 1e-6;
const BELOW_REE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Density {
    Uniform { lo: f64, hi: f64 },
    TruncatedGaussian { mean: f64, sd: f64, lo: f64, hi: f64 },
    PointMass { at: f64 },
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

impl Density {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Density::Uniform { lo, hi } | Density::TruncatedGaussian { lo, hi, .. } => (lo, hi),
            Density::PointMass { at } => (at, at),
        }
    }

    /// Density value; zero outside the support. Point masses have no density.
    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        match *self {
            Density::Uniform { lo, hi } => 1.0 / (hi - lo),
            Density::TruncatedGaussian { mean, sd, lo, hi } => {
                let mass = std_normal_cdf((hi - mean) / sd) - std_normal_cdf((lo - mean) / sd);
                let z = (x - mean) / sd;
                libm::exp(-0.5 * z * z) / (sd * libm::sqrt(2.0 * core::f64::consts::PI) * mass)
            }
            Density::PointMass { .. } => 0.0,
        }
    }

    fn check(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match *self {
            Density::Uniform { lo, hi } => {
                if !finite(&[lo, hi]) || !(hi > lo) {
                    return Err(Error::Arg("uniform density needs lo < hi"));
                }
            }
            Density::TruncatedGaussian { mean, sd, lo, hi } => {
                if !finite(&[mean, sd, lo, hi]) || !(hi > lo) || !(sd > 0.0) {
                    return Err(Error::Arg("truncated gaussian needs sd > 0 and lo < hi"));
                }
            }
            Density::PointMass { at } => {
                if !at.is_finite() {
                    return Err(Error::Arg("point mass location must be finite"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationSpec {
    density: Density,
    quad_n: usize,
}

impl PopulationSpec {
    /// Checks the parameters, the node count (odd, at least 11) and that the
    /// density integrates to one within `1e-8`.
    pub fn new(density: Density, quad_n: usize) -> Result<Self> {
        density.check()?;
        if quad_n < 11 || quad_n.is_multiple_of(2) {
            return Err(Error::Arg("quad_n must be odd and >= 11"));
        }
        if !matches!(density, Density::PointMass { .. }) {
            let (lo, hi) = density.support();
            let n = NORMALIZATION_NODES.max(quad_n);
            let integral = quadrature::simpson(|x| density.pdf(x), lo, hi, n)?;
            if libm::fabs(integral - 1.0) > NORMALIZATION_TOL {
                return Err(Error::Normalization { integral });
            }
        }
        Ok(Self { density, quad_n })
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn quad_n(&self) -> usize {
        self.quad_n
    }
}

fn check_point(spec: &DemandSpec, a_i: f64) -> Result<()> {
    if spec.contains(a_i) {
        Ok(())
    } else {
        Err(Error::Domain {
            a: a_i,
            a_max: spec.a_max(),
        })
    }
}

/// Forecast `A_i - s +- sqrt(phi(A_i) - A_i + s^2)`, `s = (1 - phi_A(A_i)) / 2`,
/// of an agent who knows demand at `a_i`.
pub fn agent_forecast(spec: &DemandSpec, b: f64, a_i: f64, branch: Root) -> Result<f64> {
    check_point(spec, a_i)?;
    supply_map(spec, b, a_i, branch).map_err(|e| match e {
        Error::ComplexRoot { at, .. } => Error::ComplexForecast { at },
        other => other,
    })
}

/// Supply `phi(A_i) + phi_A(A_i) e - e^2` with `e` the forecast error
/// relative to `a_i`; equals the forecast itself.
pub fn agent_supply(spec: &DemandSpec, b: f64, a_i: f64, branch: Root) -> Result<f64> {
    let forecast = agent_forecast(spec, b, a_i, branch)?;
    let e = forecast - a_i;
    Ok(spec.price(a_i, b) + spec.slope(a_i, b) * e - e * e)
}

/// Residual of the agent's defining quadratic at its forecast.
pub fn agent_residual(spec: &DemandSpec, b: f64, a_i: f64, forecast: f64) -> Result<f64> {
    let ctx = Context {
        a_star: Some(a_i),
        phi_star: Some(spec.price(a_i, b)),
        phi_a_star: Some(spec.slope(a_i, b)),
        ..Default::default()
    };
    oracle::residual(EquationId::HaAgent, forecast, &ctx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentNode {
    pub a_i: f64,
    /// Quadrature weight times density (1 for a point mass).
    pub weight: f64,
    pub forecast: f64,
    pub supply: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymEquilibrium {
    pub branch: Root,
    pub aggregate_a: f64,
    pub a0: f64,
    pub nodes: Vec<AgentNode>,
    pub below_ree: bool,
    /// `|A(n) - A(2n - 1)|`
    pub quad_error_est: f64,
}

impl AsymEquilibrium {
    /// `max a_i - min a_i`: producers' marginal costs differ by this much.
    pub fn supply_spread(&self) -> f64 {
        let (lo, hi) = self
            .nodes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), n| {
                (lo.min(n.supply), hi.max(n.supply))
            });
        hi - lo
    }
}

fn nodes(spec: &DemandSpec, b: f64, density: &Density, n: usize, branch: Root) -> Result<Vec<AgentNode>> {
    if let Density::PointMass { at } = *density {
        let forecast = agent_forecast(spec, b, at, branch)?;
        return Ok(alloc::vec![AgentNode {
            a_i: at,
            weight: 1.0,
            forecast,
            supply: agent_supply(spec, b, at, branch)?,
        }]);
    }
    let (lo, hi) = density.support();
    (0..n)
        .map(|i| {
            let a_i = quadrature::node(lo, hi, n, i);
            Ok(AgentNode {
                a_i,
                weight: quadrature::weight(lo, hi, n, i) * density.pdf(a_i),
                forecast: agent_forecast(spec, b, a_i, branch)?,
                supply: agent_supply(spec, b, a_i, branch)?,
            })
        })
        .collect()
}

fn integrate(nodes: &[AgentNode]) -> f64 {
    nodes.iter().fold(0.0, |acc, n| acc + n.weight * n.supply)
}

/// Aggregate supply `int a(x) f(x) dx` over the density's support.
pub fn aggregate(spec: &DemandSpec, b: f64, pop: &PopulationSpec, branch: Root) -> Result<AsymEquilibrium> {
    let (lo, hi) = pop.density.support();
    check_point(spec, lo)?;
    check_point(spec, hi)?;
    let a0 = solve_ree(spec, b, DEFAULT_TOL)?.a0;
    let coarse = nodes(spec, b, &pop.density, pop.quad_n, branch)?;
    let aggregate_a = integrate(&coarse);
    let quad_error_est = if matches!(pop.density, Density::PointMass { .. }) {
        0.0
    } else {
        let fine = nodes(spec, b, &pop.density, 2 * pop.quad_n - 1, branch)?;
        libm::fabs(integrate(&fine) - aggregate_a)
    };
    if !(quad_error_est <= MAX_QUAD_ERROR) {
        return Err(Error::Quadrature {
            estimate: quad_error_est,
        });
    }
    Ok(AsymEquilibrium {
        branch,
        aggregate_a,
        a0,
        nodes: coarse,
        below_ree: aggregate_a <= a0 + BELOW_REE_TOL,
        quad_error_est,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchCheck {
    pub branch: Root,
    pub aggregate_a: f64,
    /// `A0 - a_i` per node.
    pub slacks: Vec<f64>,
    pub supply_spread: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma4Report {
    pub a0: f64,
    pub branches: Vec<BranchCheck>,
    /// Set for weakly convex (linear) demand.
    pub warning: Option<&'static str>,
}

impl Lemma4Report {
    pub fn holds(&self) -> bool {
        self.branches.iter().all(|c| c.holds)
    }
}

/// Checks that with convex demand every agent and the aggregate supply at or
/// below the efficient output `A0`, on both branches.
pub fn lemma4_check(spec: &DemandSpec, b: f64, pop: &PopulationSpec) -> Result<Lemma4Report> {
    let warning = match spec.family().curvature() {
        Curvature::Convex => None,
        Curvature::Zero => Some("linear demand is only weakly convex"),
        Curvature::Concave => return Err(Error::Hypothesis("demand must be convex")),
    };
    let mut a0 = 0.0;
    let mut branches = Vec::new();
    for branch in [Root::Plus, Root::Minus] {
        let eq = aggregate(spec, b, pop, branch)?;
        a0 = eq.a0;
        let slacks: Vec<f64> = eq.nodes.iter().map(|n| eq.a0 - n.supply).collect();
        let holds = slacks.iter().all(|&s| s >= -BELOW_REE_TOL) && eq.below_ree;
        branches.push(BranchCheck {
            branch,
            aggregate_a: eq.aggregate_a,
            supply_spread: eq.supply_spread(),
            slacks,
            holds,
        });
    }
    Ok(Lemma4Report {
        a0,
        branches,
        warning,
    })
}

/// Aggregate supply under the population versus all agents knowing the same
/// point `at`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionComparison {
    pub dispersed: f64,
    pub concentrated: f64,
}

pub fn compare_with_point_mass(
    spec: &DemandSpec,
    b: f64,
    pop: &PopulationSpec,
    at: f64,
    branch: Root,
) -> Result<DispersionComparison> {
    let point = PopulationSpec::new(Density::PointMass { at }, pop.quad_n)?;
    Ok(DispersionComparison {
        dispersed: aggregate(spec, b, pop, branch)?.aggregate_a,
        concentrated: aggregate(spec, b, &point, branch)?.aggregate_a,
    })
}
