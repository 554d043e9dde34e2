use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{
    build_family, parse_branch, parse_policy, AsymParams, Command, DensityConfig, LearnParams, PolyeqKind, Scenario,
    DEFAULT_LEARN_TOL, DEFAULT_QUAD_N, DEFAULT_TMAX,
};
use crate::error::{CliError, Result};
use crate::run::run;
use crate::verify::verify_text;

#[derive(Debug, Parser)]
#[command(name = "ccequil", version, about = "Equilibria of economies whose firms forecast with local expansions of demand")]
pub struct Cli {
    /// Write CSV here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Solver tolerance (learning: convergence tolerance).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for `--policy random`.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Args)]
pub struct DemandArgs {
    /// linear | exp_convex | quad_concave | saturating_concave
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Upper end of the quantity domain; defaults to four times the REE.
    #[arg(long)]
    pub a_max: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub b: f64,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Rational-expectations fixed point and its multiplier.
    Ree(DemandArgs),
    /// Polynomial-expansion equilibria.
    Polyeq {
        #[command(subcommand)]
        variant: PolyeqCmd,
    },
    /// Nearest-point learning trace.
    Learn {
        #[command(flatten)]
        demand: DemandArgs,
        #[arg(long)]
        prior: f64,
        /// plus | minus | alternate | random | random:<seed>
        #[arg(long, default_value = "plus")]
        policy: String,
        #[arg(long, default_value_t = DEFAULT_TMAX)]
        tmax: usize,
    },
    /// Dispersed-information aggregate equilibrium.
    Asyminfo {
        #[command(flatten)]
        demand: DemandArgs,
        /// uniform:lo,hi | gauss:mean,sd,lo,hi | point:at | point:ree
        #[arg(long)]
        density: String,
        /// plus | minus
        #[arg(long, default_value = "plus")]
        branch: String,
        #[arg(long, default_value_t = DEFAULT_QUAD_N)]
        quad_n: usize,
    },
    /// Re-check an emitted CSV file.
    Verify { file: PathBuf },
    /// Run a scenario file.
    Sweep { scenario: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum PolyeqCmd {
    /// First-order expansion with discount tau dA^2.
    FirstOrder {
        #[command(flatten)]
        demand: DemandArgs,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
    },
    /// Parameter shift with discount tau1 dA^2 + tau2 db^2 + tau3 |dA||db|.
    ParamChange {
        #[command(flatten)]
        demand: DemandArgs,
        #[arg(long)]
        delta_b: f64,
        #[arg(long, default_value_t = 1.0)]
        tau1: f64,
        #[arg(long, default_value_t = 0.0)]
        tau2: f64,
        #[arg(long, default_value_t = 0.0)]
        tau3: f64,
    },
    /// Second-order expansion with discount tau |dA|^3.
    SecondOrder {
        #[command(flatten)]
        demand: DemandArgs,
        #[arg(long, default_value_t = 0.0)]
        tau: f64,
    },
    /// Max-error discounting max(dA^2, db^2).
    AltDiscount {
        #[command(flatten)]
        demand: DemandArgs,
        #[arg(long)]
        delta_b: f64,
    },
    /// Shifts at which max-error equilibria change regime.
    Bounds {
        #[command(flatten)]
        demand: DemandArgs,
    },
}

fn scenario_from(command: Command, d: &DemandArgs, tol: Option<f64>) -> Result<Scenario> {
    let family = build_family(&d.family, [d.c, d.m, d.alpha, d.kappa, d.gamma])?;
    let mut s = Scenario::new(command, family, d.b);
    s.a_max = d.a_max;
    if let Some(tol) = tol {
        s.solver_tol = tol;
    }
    Ok(s)
}

/// Builds the scenario a command line describes, or `None` for `verify`.
pub fn scenario(cli: &Cli) -> Result<Option<(Scenario, Option<PathBuf>)>> {
    let tol = cli.tol;
    let s = match &cli.command {
        Cmd::Ree(d) => scenario_from(Command::Ree, d, tol)?,
        Cmd::Polyeq { variant } => match variant {
            PolyeqCmd::FirstOrder { demand, tau } => {
                let mut s = scenario_from(Command::Polyeq(PolyeqKind::FirstOrder), demand, tol)?;
                s.polyeq.tau = *tau;
                s
            }
            PolyeqCmd::ParamChange {
                demand,
                delta_b,
                tau1,
                tau2,
                tau3,
            } => {
                let mut s = scenario_from(Command::Polyeq(PolyeqKind::ParamChange), demand, tol)?;
                s.polyeq.delta_b = *delta_b;
                s.polyeq.tau1 = *tau1;
                s.polyeq.tau2 = *tau2;
                s.polyeq.tau3 = *tau3;
                s
            }
            PolyeqCmd::SecondOrder { demand, tau } => {
                let mut s = scenario_from(Command::Polyeq(PolyeqKind::SecondOrder), demand, tol)?;
                s.polyeq.tau = *tau;
                s
            }
            PolyeqCmd::AltDiscount { demand, delta_b } => {
                let mut s = scenario_from(Command::Polyeq(PolyeqKind::AltDiscount), demand, tol)?;
                s.polyeq.delta_b = *delta_b;
                s
            }
            PolyeqCmd::Bounds { demand } => scenario_from(Command::Polyeq(PolyeqKind::Bounds), demand, tol)?,
        },
        Cmd::Learn {
            demand,
            prior,
            policy,
            tmax,
        } => {
            // --tol is the convergence tolerance here; the REE keeps its default
            let mut s = scenario_from(Command::Learn, demand, None)?;
            let policy = if policy == "random" {
                format!("random:{}", cli.seed)
            } else {
                policy.clone()
            };
            s.learn = Some(LearnParams {
                prior: *prior,
                policy: parse_policy(&policy)?,
                tmax: *tmax,
                tol: tol.unwrap_or(DEFAULT_LEARN_TOL),
            });
            s
        }
        Cmd::Asyminfo {
            demand,
            density,
            branch,
            quad_n,
        } => {
            let mut s = scenario_from(Command::Asyminfo, demand, tol)?;
            s.asyminfo = Some(AsymParams {
                density: DensityConfig::parse(density)?,
                branch: parse_branch(branch)?,
                quad_n: *quad_n,
            });
            s
        }
        Cmd::Sweep { scenario } => {
            let text = fs::read_to_string(scenario)
                .map_err(|e| CliError::config(format!("{}: {e}", scenario.display())))?;
            let (mut s, out) = Scenario::parse_file(&text)?;
            if let Some(tol) = tol {
                s.solver_tol = tol;
            }
            // output.path is relative to the scenario file
            let out = out.map(|p| scenario.parent().unwrap_or(Path::new(".")).join(p));
            return Ok(Some((s, cli.out.clone().or(out))));
        }
        Cmd::Verify { .. } => return Ok(None),
    };
    s.validate()?;
    Ok(Some((s, cli.out.clone())))
}

fn write_output(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Runs the command; returns the error that decides the exit code.
pub fn execute(cli: &Cli) -> Result<()> {
    if let Cmd::Verify { file } = &cli.command {
        let text = fs::read_to_string(file)?;
        let report = verify_text(&text)?;
        eprintln!(
            "verified {}: {} rows, {} residuals checked, max {:e}",
            file.display(),
            report.rows,
            report.checked,
            report.max_residual
        );
        return Ok(());
    }
    let (s, out) = scenario(cli)?.expect("non-verify commands build a scenario");
    let output = run(&s)?;
    write_output(&output.render()?, out.as_deref())?;
    let violations = output.violations(s.solver_tol);
    if let Some(first) = violations.first() {
        return Err(CliError::Invariant(format!("{} row(s); {first}", violations.len())));
    }
    Ok(())
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ccequil: {e}");
            e.exit_code()
        }
    }
}
