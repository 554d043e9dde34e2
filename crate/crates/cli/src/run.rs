//! Executes scenarios and renders their CSV tables.

use ccequil_core::asyminfo::{aggregate, agent_residual, Density, PopulationSpec};
use ccequil_core::learning::{simulate, Termination};
use ccequil_core::polyeq::{
    alt_discount_equilibria, first_order_equilibria, lower_regime_bound, parameter_change_equilibria,
    response_dominant_deviations, second_order_equilibria, upper_regime_bound, EquilibriumSet, Expansion, Taus,
};
use ccequil_core::ree::{multiplier, solve_ree};
use ccequil_core::RESIDUAL_TOL;
use rayon::prelude::*;

use crate::config::{Command, DensityConfig, PolyeqKind, Scenario};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    fn opt(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }

    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

pub type Row = Vec<Cell>;

const REE_HEADER: &[&str] = &["family", "b", "a0", "p0", "multiplier", "residual", "valid", "reason"];
const POLYEQ_HEADER: &[&str] = &[
    "variant", "branch", "regime", "equation", "tau1", "tau2", "tau3", "delta_b", "delta_a", "a",
    "forecast_price", "true_price", "residual", "valid", "reason",
];
const BOUNDS_HEADER: &[&str] = &["bound", "delta_b", "delta_a", "gap", "valid", "reason"];
const LEARN_HEADER: &[&str] = &[
    "row", "t", "a_star", "a_next", "forecast", "true_price", "epsilon", "residual", "root_used", "psi",
    "a0", "final_gap", "converged", "valid", "reason",
];
const ASYM_HEADER: &[&str] = &[
    "row", "a_i", "weight", "forecast", "supply", "residual", "aggregate_a", "a0", "below_ree",
    "quad_error_est", "supply_spread", "valid", "reason",
];

pub fn base_header(command: Command) -> &'static [&'static str] {
    match command {
        Command::Ree => REE_HEADER,
        Command::Polyeq(PolyeqKind::Bounds) => BOUNDS_HEADER,
        Command::Polyeq(_) => POLYEQ_HEADER,
        Command::Learn => LEARN_HEADER,
        Command::Asyminfo => ASYM_HEADER,
    }
}

/// Column names of the scenario's output, including sweep columns.
pub fn header(s: &Scenario) -> Vec<String> {
    let mut h = Vec::new();
    if let Some(sw) = &s.sweep {
        h.push("grid_index".to_string());
        h.push(sw.parameter.as_str().to_string());
    }
    h.extend(base_header(s.command).iter().map(|c| c.to_string()));
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub header: Vec<String>,
    pub rows: Vec<Row>,
    pub config_line: String,
}

impl Output {
    /// CSV text: header, rows, then the `# config:` line.
    pub fn render(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let mut text = String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.into_error()))?)
            .expect("csv output is utf-8");
        text.push_str("# config: ");
        text.push_str(&self.config_line);
        text.push('\n');
        Ok(text)
    }

    /// Valid rows whose residual column exceeds its tolerance.
    pub fn violations(&self, solver_tol: f64) -> Vec<String> {
        let col = |name: &str| self.header.iter().position(|h| h == name);
        let (Some(res), Some(valid)) = (col("residual"), col("valid")) else {
            return Vec::new();
        };
        let tol = if self.header.iter().any(|h| h == "multiplier") {
            solver_tol.max(RESIDUAL_TOL)
        } else {
            RESIDUAL_TOL
        };
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, row)| match (&row[valid], &row[res]) {
                (Cell::Bool(true), Cell::Num(r)) if !(*r <= tol) => {
                    Some(format!("row {i}: residual {r:e} exceeds {tol:e}"))
                }
                _ => None,
            })
            .collect()
    }
}

/// Runs a scenario. Without a sweep any solver error aborts; within a sweep
/// it becomes a `valid=false` row at that grid point.
pub fn run(s: &Scenario) -> Result<Output> {
    s.validate()?;
    let rows = match &s.sweep {
        None => run_point(s)?,
        Some(sw) => {
            let width = base_header(s.command).len();
            let grid = sw.grid();
            let blocks: Vec<Vec<Row>> = grid
                .par_iter()
                .enumerate()
                .map(|(i, &v)| {
                    let point = s.at(sw.parameter, v);
                    let rows = match run_point(&point) {
                        Ok(rows) => rows,
                        Err(e) => vec![failure_row(width, &e.to_string())],
                    };
                    rows.into_iter()
                        .map(|r| {
                            let mut full = vec![Cell::Int(i), Cell::Num(v)];
                            full.extend(r);
                            full
                        })
                        .collect()
                })
                .collect();
            blocks.into_iter().flatten().collect()
        }
    };
    Ok(Output {
        header: header(s),
        rows,
        config_line: s.config_line(),
    })
}

fn failure_row(width: usize, reason: &str) -> Row {
    let mut row = vec![Cell::Empty; width - 2];
    row.push(Cell::Bool(false));
    row.push(Cell::text(reason));
    row
}

fn run_point(s: &Scenario) -> Result<Vec<Row>> {
    match s.command {
        Command::Ree => run_ree(s),
        Command::Polyeq(PolyeqKind::Bounds) => run_bounds(s),
        Command::Polyeq(kind) => run_polyeq(s, kind),
        Command::Learn => run_learn(s),
        Command::Asyminfo => run_asyminfo(s),
    }
}

fn run_ree(s: &Scenario) -> Result<Vec<Row>> {
    let spec = s.demand()?;
    let ree = solve_ree(&spec, s.b, s.solver_tol)?;
    Ok(vec![vec![
        Cell::text(s.family.name()),
        Cell::Num(s.b),
        Cell::Num(ree.a0),
        Cell::Num(ree.p0),
        Cell::Num(multiplier(&spec, ree.a0, s.b)?),
        Cell::Num(ree.residual),
        Cell::Bool(true),
        Cell::Empty,
    ]])
}

/// Expansion of the scenario's demand at its rational-expectations point.
pub fn expansion(s: &Scenario) -> Result<Expansion> {
    let spec = s.demand()?;
    let ree = solve_ree(&spec, s.b, s.solver_tol)?;
    Ok(Expansion::at_ree(&spec, &ree)?)
}

pub fn equilibria(s: &Scenario, kind: PolyeqKind, x: &Expansion) -> Result<EquilibriumSet> {
    let p = &s.polyeq;
    Ok(match kind {
        PolyeqKind::FirstOrder => first_order_equilibria(x, p.tau)?,
        PolyeqKind::ParamChange => parameter_change_equilibria(x, p.delta_b, Taus::new(p.tau1, p.tau2, p.tau3))?,
        PolyeqKind::SecondOrder => second_order_equilibria(x, p.tau)?,
        PolyeqKind::AltDiscount => alt_discount_equilibria(x, p.delta_b)?,
        PolyeqKind::Bounds => unreachable!("bounds have their own table"),
    })
}

fn run_polyeq(s: &Scenario, kind: PolyeqKind) -> Result<Vec<Row>> {
    let spec = s.demand()?;
    let x = expansion(s)?;
    let mut set = equilibria(s, kind, &x)?;
    set.attach_true_prices(&spec, s.b);
    Ok(set
        .equilibria
        .iter()
        .map(|e| {
            vec![
                Cell::text(e.variant.as_str()),
                Cell::text(e.branch.as_str()),
                Cell::text(e.regime.as_str()),
                Cell::text(e.equation.as_str()),
                Cell::Num(e.taus.tau1),
                Cell::Num(e.taus.tau2),
                Cell::Num(e.taus.tau3),
                Cell::Num(e.delta_b),
                Cell::Num(e.delta_a),
                Cell::Num(e.a),
                Cell::Num(e.forecast_price),
                Cell::opt(e.true_price),
                Cell::Num(e.residual),
                Cell::Bool(e.valid),
                e.reason.map_or(Cell::Empty, Cell::text),
            ]
        })
        .collect())
}

fn run_bounds(s: &Scenario) -> Result<Vec<Row>> {
    let x = expansion(s)?;
    let mut rows = Vec::new();
    for (name, bound) in [("db1", lower_regime_bound(&x)), ("db2", upper_regime_bound(&x))] {
        rows.push(match bound {
            Ok(db) => {
                let (minus, plus) = response_dominant_deviations(&x, db);
                let d = if name == "db1" { minus } else { plus };
                vec![
                    Cell::text(name),
                    Cell::Num(db),
                    Cell::Num(d),
                    Cell::Num(d.abs() - db),
                    Cell::Bool(true),
                    Cell::Empty,
                ]
            }
            Err(e) => {
                let mut row = vec![Cell::text(name)];
                row.extend(failure_row(BOUNDS_HEADER.len() - 1, &e.to_string()));
                row
            }
        });
    }
    Ok(rows)
}

fn run_learn(s: &Scenario) -> Result<Vec<Row>> {
    let spec = s.demand()?;
    let l = s.learn.ok_or_else(|| CliError::config("learn parameters missing"))?;
    let trace = simulate(&spec, s.b, l.prior, l.tmax, l.policy, l.tol)?;
    let mut rows: Vec<Row> = trace
        .steps
        .iter()
        .map(|st| {
            vec![
                Cell::text("step"),
                Cell::Int(st.t),
                Cell::Num(st.a_star),
                Cell::Num(st.a_next),
                Cell::Num(st.forecast),
                Cell::Num(st.true_price),
                Cell::Num(st.epsilon),
                Cell::Num(st.residual),
                Cell::text(st.root_used.as_str()),
                Cell::opt(st.psi),
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Bool(true),
                Cell::Empty,
            ]
        })
        .collect();
    let (valid, reason) = match &trace.termination {
        Termination::Converged => (true, Cell::Empty),
        Termination::MaxSteps => (true, Cell::text("not converged")),
        Termination::Halted(e) => (false, Cell::text(format!("halted: {e}"))),
    };
    let mut summary = vec![Cell::text("summary"), Cell::Int(trace.steps.len())];
    summary.extend(std::iter::repeat_n(Cell::Empty, 8));
    summary.extend([
        Cell::Num(trace.a0),
        Cell::Num(trace.final_gap),
        Cell::Bool(trace.converged),
        Cell::Bool(valid),
        reason,
    ]);
    rows.push(summary);
    Ok(rows)
}

fn run_asyminfo(s: &Scenario) -> Result<Vec<Row>> {
    let spec = s.demand()?;
    let a = s.asyminfo.ok_or_else(|| CliError::config("asyminfo parameters missing"))?;
    let density = match a.density {
        DensityConfig::Fixed(d) => d,
        DensityConfig::PointAtRee => Density::PointMass {
            at: solve_ree(&spec, s.b, s.solver_tol)?.a0,
        },
    };
    let pop = PopulationSpec::new(density, a.quad_n)?;
    let eq = aggregate(&spec, s.b, &pop, a.branch)?;
    let mut rows = Vec::with_capacity(eq.nodes.len() + 1);
    for n in &eq.nodes {
        let mut row = vec![
            Cell::text("node"),
            Cell::Num(n.a_i),
            Cell::Num(n.weight),
            Cell::Num(n.forecast),
            Cell::Num(n.supply),
            Cell::Num(agent_residual(&spec, s.b, n.a_i, n.forecast)?),
        ];
        row.extend(std::iter::repeat_n(Cell::Empty, 5));
        row.extend([Cell::Bool(true), Cell::Empty]);
        rows.push(row);
    }
    let mut summary = vec![Cell::text("summary")];
    summary.extend(std::iter::repeat_n(Cell::Empty, 5));
    summary.extend([
        Cell::Num(eq.aggregate_a),
        Cell::Num(eq.a0),
        Cell::Bool(eq.below_ree),
        Cell::Num(eq.quad_error_est),
        Cell::Num(eq.supply_spread()),
        Cell::Bool(true),
        Cell::text(a.branch.as_str()),
    ]);
    rows.push(summary);
    Ok(rows)
}
