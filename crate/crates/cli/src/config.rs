//! Scenario files: one `section.key = value` per line, `#` starts a comment.
//!
//! A [`Scenario`] also serializes to a single `key=value; ...` line that is
//! embedded in every output file so `verify` can rebuild the run.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ccequil_core::asyminfo::{Density, PopulationSpec};
use ccequil_core::demand::{DemandSpec, Family};
use ccequil_core::learning::{Root, RootPolicy};
use ccequil_core::ree::DEFAULT_TOL;

use crate::error::{CliError, Result};

pub const DEFAULT_QUAD_N: usize = 2001;
pub const DEFAULT_LEARN_TOL: f64 = 1e-10;
pub const DEFAULT_TMAX: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyeqKind {
    FirstOrder,
    ParamChange,
    SecondOrder,
    AltDiscount,
    Bounds,
}

impl PolyeqKind {
    const ALL: [PolyeqKind; 5] = [
        PolyeqKind::FirstOrder,
        PolyeqKind::ParamChange,
        PolyeqKind::SecondOrder,
        PolyeqKind::AltDiscount,
        PolyeqKind::Bounds,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolyeqKind::FirstOrder => "first-order",
            PolyeqKind::ParamChange => "param-change",
            PolyeqKind::SecondOrder => "second-order",
            PolyeqKind::AltDiscount => "alt-discount",
            PolyeqKind::Bounds => "bounds",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ree,
    Polyeq(PolyeqKind),
    Learn,
    Asyminfo,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ree => "ree",
            Command::Polyeq(_) => "polyeq",
            Command::Learn => "learn",
            Command::Asyminfo => "asyminfo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    DeltaB,
    Tau,
    Tau2,
    PriorMu,
}

impl SweepParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::DeltaB => "delta_b",
            SweepParam::Tau => "tau",
            SweepParam::Tau2 => "tau2",
            SweepParam::PriorMu => "prior_mu",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        [SweepParam::DeltaB, SweepParam::Tau, SweepParam::Tau2, SweepParam::PriorMu]
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| CliError::config(format!("unknown sweep parameter `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub parameter: SweepParam,
    pub lo: f64,
    pub hi: f64,
    /// Number of grid points, endpoints included.
    pub steps: usize,
}

impl Sweep {
    pub fn grid(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * i as f64 / (self.steps - 1) as f64
                }
            })
            .collect()
    }
}

/// Where a population's knowledge points sit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityConfig {
    Fixed(Density),
    /// Point mass at the rational-expectations quantity.
    PointAtRee,
}

impl DensityConfig {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || CliError::config(format!("bad density `{s}`"));
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        if kind == "point" && args == "ree" {
            return Ok(DensityConfig::PointAtRee);
        }
        let nums = args
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let density = match (kind, nums.as_slice()) {
            ("uniform", &[lo, hi]) => Density::Uniform { lo, hi },
            ("gauss", &[mean, sd, lo, hi]) => Density::TruncatedGaussian { mean, sd, lo, hi },
            ("point", &[at]) => Density::PointMass { at },
            _ => return Err(bad()),
        };
        Ok(DensityConfig::Fixed(density))
    }

    pub fn render(&self) -> String {
        match self {
            DensityConfig::PointAtRee => "point:ree".into(),
            DensityConfig::Fixed(Density::Uniform { lo, hi }) => format!("uniform:{lo},{hi}"),
            DensityConfig::Fixed(Density::TruncatedGaussian { mean, sd, lo, hi }) => {
                format!("gauss:{mean},{sd},{lo},{hi}")
            }
            DensityConfig::Fixed(Density::PointMass { at }) => format!("point:{at}"),
        }
    }
}

pub fn parse_policy(s: &str) -> Result<RootPolicy> {
    match s {
        "plus" => Ok(RootPolicy::AlwaysPlus),
        "minus" => Ok(RootPolicy::AlwaysMinus),
        "alternate" => Ok(RootPolicy::Alternate),
        _ => s
            .strip_prefix("random:")
            .and_then(|seed| seed.parse().ok())
            .map(RootPolicy::SeededRandom)
            .ok_or_else(|| CliError::config(format!("bad root policy `{s}`"))),
    }
}

pub fn render_policy(p: RootPolicy) -> String {
    match p {
        RootPolicy::AlwaysPlus => "plus".into(),
        RootPolicy::AlwaysMinus => "minus".into(),
        RootPolicy::Alternate => "alternate".into(),
        RootPolicy::SeededRandom(seed) => format!("random:{seed}"),
    }
}

pub fn parse_branch(s: &str) -> Result<Root> {
    match s {
        "plus" => Ok(Root::Plus),
        "minus" => Ok(Root::Minus),
        _ => Err(CliError::config(format!("bad branch `{s}`"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyeqParams {
    pub tau: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub delta_b: f64,
}

impl Default for PolyeqParams {
    fn default() -> Self {
        Self {
            tau: 1.0,
            tau1: 1.0,
            tau2: 0.0,
            tau3: 0.0,
            delta_b: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnParams {
    pub prior: f64,
    pub policy: RootPolicy,
    pub tmax: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymParams {
    pub density: DensityConfig,
    pub branch: Root,
    pub quad_n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub command: Command,
    pub family: Family,
    pub a_max: Option<f64>,
    pub b: f64,
    pub solver_tol: f64,
    pub polyeq: PolyeqParams,
    pub learn: Option<LearnParams>,
    pub asyminfo: Option<AsymParams>,
    pub sweep: Option<Sweep>,
}

impl Scenario {
    pub fn new(command: Command, family: Family, b: f64) -> Self {
        Self {
            command,
            family,
            a_max: None,
            b,
            solver_tol: DEFAULT_TOL,
            polyeq: PolyeqParams::default(),
            learn: None,
            asyminfo: None,
            sweep: None,
        }
    }

    pub fn demand(&self) -> Result<DemandSpec> {
        let spec = match self.a_max {
            Some(a_max) => DemandSpec::new(self.family, a_max),
            None => DemandSpec::with_default_domain(self.family, self.b),
        };
        spec.map_err(|e| CliError::config(format!("demand: {e}")))
    }

    /// Copy with the swept parameter set to `value`.
    pub fn at(&self, parameter: SweepParam, value: f64) -> Self {
        let mut s = *self;
        s.sweep = None;
        match parameter {
            SweepParam::DeltaB => s.polyeq.delta_b = value,
            SweepParam::Tau => {
                s.polyeq.tau = value;
                s.polyeq.tau1 = value;
            }
            SweepParam::Tau2 => s.polyeq.tau2 = value,
            SweepParam::PriorMu => {
                if let Some(l) = s.learn.as_mut() {
                    l.prior = value;
                }
            }
        }
        s
    }

    /// Ordered `key=value` pairs that reproduce this scenario.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("scenario.command", self.command.name().to_string())];
        if let Command::Polyeq(kind) = self.command {
            out.push(("polyeq.variant", kind.as_str().to_string()));
        }
        out.push(("demand.family", self.family.name().to_string()));
        let f = |x: f64| x.to_string();
        match self.family {
            Family::Linear { c, m } => {
                out.push(("demand.c", f(c)));
                out.push(("demand.m", f(m)));
            }
            Family::ExpConvex { c, alpha } => {
                out.push(("demand.c", f(c)));
                out.push(("demand.alpha", f(alpha)));
            }
            Family::QuadConcave { c, m, kappa } => {
                out.push(("demand.c", f(c)));
                out.push(("demand.m", f(m)));
                out.push(("demand.kappa", f(kappa)));
            }
            Family::SaturatingConcave { c, m, kappa, gamma } => {
                out.push(("demand.c", f(c)));
                out.push(("demand.m", f(m)));
                out.push(("demand.kappa", f(kappa)));
                out.push(("demand.gamma", f(gamma)));
            }
        }
        if let Some(a_max) = self.a_max {
            out.push(("demand.a_max", f(a_max)));
        }
        out.push(("demand.b", f(self.b)));
        out.push(("solver.tol", f(self.solver_tol)));
        let p = &self.polyeq;
        match self.command {
            Command::Polyeq(PolyeqKind::FirstOrder | PolyeqKind::SecondOrder) => {
                out.push(("polyeq.tau", f(p.tau)));
            }
            Command::Polyeq(PolyeqKind::ParamChange) => {
                out.push(("polyeq.tau1", f(p.tau1)));
                out.push(("polyeq.tau2", f(p.tau2)));
                out.push(("polyeq.tau3", f(p.tau3)));
                out.push(("polyeq.delta_b", f(p.delta_b)));
            }
            Command::Polyeq(PolyeqKind::AltDiscount) => out.push(("polyeq.delta_b", f(p.delta_b))),
            _ => {}
        }
        if let Some(l) = &self.learn {
            out.push(("learn.prior", f(l.prior)));
            out.push(("learn.policy", render_policy(l.policy)));
            out.push(("learn.tmax", l.tmax.to_string()));
            out.push(("learn.tol", f(l.tol)));
        }
        if let Some(a) = &self.asyminfo {
            out.push(("asyminfo.density", a.density.render()));
            out.push(("asyminfo.branch", a.branch.as_str().to_string()));
            out.push(("asyminfo.quad_n", a.quad_n.to_string()));
        }
        if let Some(s) = &self.sweep {
            out.push(("sweep.parameter", s.parameter.as_str().to_string()));
            out.push(("sweep.lo", f(s.lo)));
            out.push(("sweep.hi", f(s.hi)));
            out.push(("sweep.steps", s.steps.to_string()));
        }
        out
    }

    /// Single-line form embedded in output files.
    pub fn config_line(&self) -> String {
        let mut line = String::new();
        for (i, (k, v)) in self.pairs().iter().enumerate() {
            if i > 0 {
                line.push_str("; ");
            }
            let _ = write!(line, "{k}={v}");
        }
        line
    }

    pub fn from_config_line(line: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for item in line.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("bad config item `{item}`")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Self::from_map(map)
    }

    /// Parses a scenario file. `output.path`, if present, is returned apart.
    pub fn parse_file(text: &str) -> Result<(Self, Option<String>)> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {}: expected `key = value`", n + 1)))?;
            if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(CliError::config(format!("line {}: duplicate key `{}`", n + 1, k.trim())));
            }
        }
        let out = map.remove("output.path");
        Ok((Self::from_map(map)?, out))
    }

    fn from_map(mut map: BTreeMap<String, String>) -> Result<Self> {
        let mut take = |k: &str| map.remove(k);
        let command = match take("scenario.command").as_deref() {
            Some("ree") => Command::Ree,
            Some("learn") => Command::Learn,
            Some("asyminfo") => Command::Asyminfo,
            Some("polyeq") => {
                let v = take("polyeq.variant")
                    .ok_or_else(|| CliError::config("polyeq.variant is required"))?;
                let kind = PolyeqKind::ALL
                    .into_iter()
                    .find(|k| k.as_str() == v)
                    .ok_or_else(|| CliError::config(format!("unknown polyeq variant `{v}`")))?;
                Command::Polyeq(kind)
            }
            Some(other) => return Err(CliError::config(format!("unknown command `{other}`"))),
            None => return Err(CliError::config("scenario.command is required")),
        };

        let family_name = take("demand.family").ok_or_else(|| CliError::config("demand.family is required"))?;
        let mut params = [None; 5];
        for (slot, key) in params.iter_mut().zip(FAMILY_KEYS) {
            let full = format!("demand.{key}");
            *slot = opt_f64(take(&full), &full)?;
        }
        let family = build_family(&family_name, params)?;

        let mut s = Scenario::new(command, family, opt_f64(take("demand.b"), "demand.b")?.unwrap_or(0.0));
        s.a_max = opt_f64(take("demand.a_max"), "demand.a_max")?;
        if let Some(tol) = opt_f64(take("solver.tol"), "solver.tol")? {
            s.solver_tol = tol;
        }
        let p = &mut s.polyeq;
        for (key, slot) in [
            ("polyeq.tau", &mut p.tau),
            ("polyeq.tau1", &mut p.tau1),
            ("polyeq.tau2", &mut p.tau2),
            ("polyeq.tau3", &mut p.tau3),
            ("polyeq.delta_b", &mut p.delta_b),
        ] {
            if let Some(v) = opt_f64(take(key), key)? {
                *slot = v;
            }
        }

        if command == Command::Learn {
            s.learn = Some(LearnParams {
                prior: opt_f64(take("learn.prior"), "learn.prior")?
                    .ok_or_else(|| CliError::config("learn.prior is required"))?,
                policy: take("learn.policy")
                    .map(|v| parse_policy(&v))
                    .transpose()?
                    .unwrap_or(RootPolicy::AlwaysPlus),
                tmax: opt_usize(take("learn.tmax"), "learn.tmax")?.unwrap_or(DEFAULT_TMAX),
                tol: opt_f64(take("learn.tol"), "learn.tol")?.unwrap_or(DEFAULT_LEARN_TOL),
            });
        }
        if command == Command::Asyminfo {
            s.asyminfo = Some(AsymParams {
                density: DensityConfig::parse(
                    &take("asyminfo.density").ok_or_else(|| CliError::config("asyminfo.density is required"))?,
                )?,
                branch: take("asyminfo.branch")
                    .map(|v| parse_branch(&v))
                    .transpose()?
                    .unwrap_or(Root::Plus),
                quad_n: opt_usize(take("asyminfo.quad_n"), "asyminfo.quad_n")?.unwrap_or(DEFAULT_QUAD_N),
            });
        }

        let parameter = take("sweep.parameter");
        let lo = opt_f64(take("sweep.lo"), "sweep.lo")?;
        let hi = opt_f64(take("sweep.hi"), "sweep.hi")?;
        let steps = opt_usize(take("sweep.steps"), "sweep.steps")?;
        s.sweep = match (parameter, lo, hi, steps) {
            (None, None, None, None) => None,
            (Some(p), Some(lo), Some(hi), Some(steps)) => Some(Sweep {
                parameter: SweepParam::parse(&p)?,
                lo,
                hi,
                steps,
            }),
            _ => return Err(CliError::config("sweep needs parameter, lo, hi and steps")),
        };

        if let Some(key) = map.keys().next() {
            return Err(CliError::config(format!("unknown or inapplicable key `{key}`")));
        }
        s.validate()?;
        Ok(s)
    }

    /// Checks that do not require solving anything.
    pub fn validate(&self) -> Result<()> {
        if !(self.solver_tol > 0.0) {
            return Err(CliError::config("solver.tol must be > 0"));
        }
        self.check_params()?;
        if let Some(sw) = &self.sweep {
            if sw.steps == 0 || !sw.lo.is_finite() || !sw.hi.is_finite() {
                return Err(CliError::config("sweep needs steps >= 1 and finite bounds"));
            }
            let applies = match (sw.parameter, self.command) {
                (SweepParam::DeltaB, Command::Polyeq(PolyeqKind::ParamChange | PolyeqKind::AltDiscount)) => true,
                (SweepParam::Tau, Command::Polyeq(k)) => k != PolyeqKind::AltDiscount && k != PolyeqKind::Bounds,
                (SweepParam::Tau2, Command::Polyeq(PolyeqKind::ParamChange)) => true,
                (SweepParam::PriorMu, Command::Learn) => true,
                _ => false,
            };
            if !applies {
                return Err(CliError::config(format!(
                    "sweep parameter {} does not apply to {}",
                    sw.parameter.as_str(),
                    self.command.name()
                )));
            }
            // every constraint below is an interval, so the endpoints suffice
            self.at(sw.parameter, sw.lo).check_params()?;
            self.at(sw.parameter, sw.hi).check_params()?;
        }
        if let Some(l) = &self.learn {
            if !(l.tol > 0.0) {
                return Err(CliError::config("learn.tol must be > 0"));
            }
        }
        if let Some(a) = &self.asyminfo {
            if let DensityConfig::Fixed(d) = a.density {
                PopulationSpec::new(d, a.quad_n).map_err(|e| CliError::config(format!("asyminfo: {e}")))?;
            } else if a.quad_n < 11 || a.quad_n.is_multiple_of(2) {
                return Err(CliError::config("asyminfo.quad_n must be odd and >= 11"));
            }
        }
        Ok(())
    }
}

impl Scenario {
    /// Range checks on the parameters a grid point can change.
    fn check_params(&self) -> Result<()> {
        let spec = self.demand()?;
        let p = &self.polyeq;
        let nonneg = |v: f64, key: &str| {
            if v >= 0.0 {
                Ok(())
            } else {
                Err(CliError::config(format!("{key} must be >= 0, got {v}")))
            }
        };
        match self.command {
            Command::Polyeq(PolyeqKind::FirstOrder | PolyeqKind::SecondOrder) => nonneg(p.tau, "polyeq.tau")?,
            Command::Polyeq(PolyeqKind::ParamChange) => {
                if !(p.tau1 > 0.0) {
                    return Err(CliError::config(format!("polyeq.tau1 must be > 0, got {}", p.tau1)));
                }
                nonneg(p.tau2, "polyeq.tau2")?;
                nonneg(p.tau3, "polyeq.tau3")?;
                nonneg(p.delta_b, "polyeq.delta_b")?;
            }
            Command::Polyeq(PolyeqKind::AltDiscount) => nonneg(p.delta_b, "polyeq.delta_b")?,
            _ => {}
        }
        if let Some(l) = &self.learn {
            if !spec.contains(l.prior) {
                return Err(CliError::config(format!(
                    "learn.prior {} lies outside [0, {}]",
                    l.prior,
                    spec.a_max()
                )));
            }
        }
        Ok(())
    }
}

fn opt_f64(v: Option<String>, key: &str) -> Result<Option<f64>> {
    v.map(|s| {
        s.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| CliError::config(format!("{key}: `{s}` is not a finite number")))
    })
    .transpose()
}

fn opt_usize(v: Option<String>, key: &str) -> Result<Option<usize>> {
    v.map(|s| {
        s.parse::<usize>()
            .map_err(|_| CliError::config(format!("{key}: `{s}` is not a count")))
    })
    .transpose()
}

/// Builds a family from named parameters; every parameter the family uses
/// is required and parameters it does not use are rejected.
/// Parameters in the order [`build_family`] takes them.
pub const FAMILY_KEYS: [&str; 5] = ["c", "m", "alpha", "kappa", "gamma"];

pub fn build_family(name: &str, params: [Option<f64>; 5]) -> Result<Family> {
    let needed: &[&str] = match name {
        "linear" => &["c", "m"],
        "exp_convex" => &["c", "alpha"],
        "quad_concave" => &["c", "m", "kappa"],
        "saturating_concave" => &["c", "m", "kappa", "gamma"],
        other => return Err(CliError::config(format!("unknown demand family `{other}`"))),
    };
    let mut vals = BTreeMap::new();
    for (key, v) in FAMILY_KEYS.into_iter().zip(params) {
        let full = format!("demand.{key}");
        match (needed.contains(&key), v) {
            (true, Some(x)) => {
                vals.insert(key, x);
            }
            (true, None) => return Err(CliError::config(format!("{full} is required for {name}"))),
            (false, Some(_)) => return Err(CliError::config(format!("{full} does not apply to {name}"))),
            (false, None) => {}
        }
    }
    let g = |k: &str| vals[k];
    Ok(match name {
        "linear" => Family::Linear { c: g("c"), m: g("m") },
        "exp_convex" => Family::ExpConvex {
            c: g("c"),
            alpha: g("alpha"),
        },
        "quad_concave" => Family::QuadConcave {
            c: g("c"),
            m: g("m"),
            kappa: g("kappa"),
        },
        _ => Family::SaturatingConcave {
            c: g("c"),
            m: g("m"),
            kappa: g("kappa"),
            gamma: g("gamma"),
        },
    })
}
