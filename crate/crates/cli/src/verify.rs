//! Re-checks an emitted CSV file.
//!
//! The embedded config line rebuilds the scenario. Every valid row's
//! defining equation is re-evaluated from its own columns, and the whole
//! file must match a fresh run byte for byte.

use ccequil_core::asyminfo::agent_residual;
use ccequil_core::oracle::{residual, Context, EquationId};
use ccequil_core::polyeq::response_dominant_deviations;
use ccequil_core::RESIDUAL_TOL;

use crate::config::{Command, PolyeqKind, Scenario};
use crate::error::{CliError, Result};
use crate::run::{expansion, run};

const CONFIG_PREFIX: &str = "# config: ";
const BOUND_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub rows: usize,
    pub checked: usize,
    pub max_residual: f64,
}

struct Record<'a> {
    header: &'a csv::StringRecord,
    row: csv::StringRecord,
    index: usize,
}

impl Record<'_> {
    fn get(&self, name: &str) -> Result<&str> {
        let col = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Invariant(format!("missing column `{name}`")))?;
        Ok(self.row.get(col).unwrap_or(""))
    }

    fn num(&self, name: &str) -> Result<f64> {
        let v = self.get(name)?;
        v.parse().map_err(|_| {
            CliError::Invariant(format!("row {}: column `{name}` is not a number: `{v}`", self.index))
        })
    }
}

pub fn verify_text(text: &str) -> Result<VerifyReport> {
    let line = text
        .lines()
        .rev()
        .find_map(|l| l.strip_prefix(CONFIG_PREFIX))
        .ok_or_else(|| CliError::Invariant("no `# config:` line".into()))?;
    let scenario = Scenario::from_config_line(line)?;

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let mut report = VerifyReport {
        rows: 0,
        checked: 0,
        max_residual: 0.0,
    };
    for (index, row) in reader.records().enumerate() {
        let rec = Record {
            header: &header,
            row: row?,
            index,
        };
        report.rows += 1;
        if rec.get("valid")? != "true" {
            continue;
        }
        if let Some(r) = check_row(&scenario, &rec)? {
            report.checked += 1;
            report.max_residual = report.max_residual.max(r);
        }
    }

    let fresh = run(&scenario)?.render()?;
    if fresh != text {
        return Err(CliError::Invariant("file differs from a fresh run of its config".into()));
    }
    Ok(report)
}

fn fail(rec: &Record, what: String) -> CliError {
    CliError::Invariant(format!("row {}: {what}", rec.index))
}

/// Recomputed residual of one valid row, or `None` for summary rows.
fn check_row(s: &Scenario, rec: &Record) -> Result<Option<f64>> {
    let spec = s.demand()?;
    let (r, tol) = match s.command {
        Command::Ree => {
            let a0 = rec.num("a0")?;
            ((a0 - spec.price(a0, s.b)).abs(), s.solver_tol.max(RESIDUAL_TOL))
        }
        Command::Polyeq(PolyeqKind::Bounds) => {
            let x = expansion(s)?;
            let db = rec.num("delta_b")?;
            let (minus, plus) = response_dominant_deviations(&x, db);
            let d = if rec.get("bound")? == "db1" { minus } else { plus };
            ((d.abs() - db).abs(), BOUND_TOL)
        }
        Command::Polyeq(_) => {
            let x = expansion(s)?;
            let id: EquationId = rec.get("equation")?.parse()?;
            let tau1 = rec.num("tau1")?;
            let ctx = Context {
                a0: Some(x.a0),
                phi0: Some(x.phi),
                phi_a: Some(x.phi_a),
                phi_aa: Some(x.phi_aa),
                phi_b: Some(x.phi_b),
                delta_b: Some(rec.num("delta_b")?),
                tau: Some(tau1),
                tau1: Some(tau1),
                tau2: Some(rec.num("tau2")?),
                tau3: Some(rec.num("tau3")?),
                ..Default::default()
            };
            (residual(id, rec.num("delta_a")?, &ctx)?, RESIDUAL_TOL)
        }
        Command::Learn => {
            if rec.get("row")? != "step" {
                return Ok(None);
            }
            let x1 = rec.num("a_star")?;
            let a = rec.num("a_next")?;
            let point = |x: f64| (Some(x), Some(spec.price(x, s.b)), Some(spec.slope(x, s.b)));
            let (a_star, phi_star, phi_a_star) = point(x1);
            let r = if rec.get("root_used")? == "mixture" {
                let (a_star2, phi_star2, phi_a_star2) = point(2.0 * a - x1);
                let ctx = Context {
                    psi: Some(rec.num("psi")?),
                    a_star,
                    phi_star,
                    phi_a_star,
                    a_star2,
                    phi_star2,
                    phi_a_star2,
                    ..Default::default()
                };
                residual(EquationId::HdMixture, a, &ctx)?
            } else {
                let ctx = Context {
                    a_star,
                    phi_star,
                    phi_a_star,
                    ..Default::default()
                };
                residual(EquationId::L2, a, &ctx)?
            };
            (r, RESIDUAL_TOL)
        }
        Command::Asyminfo => {
            if rec.get("row")? != "node" {
                return Ok(None);
            }
            let r = agent_residual(&spec, s.b, rec.num("a_i")?, rec.num("forecast")?)?;
            (r, RESIDUAL_TOL)
        }
    };
    if !(r <= tol) {
        return Err(fail(rec, format!("recomputed residual {r:e} exceeds {tol:e}")));
    }
    Ok(Some(r))
}
