use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ccequil::config::{Command as Cmd, DensityConfig, LearnParams, PolyeqKind, Scenario};
use ccequil::run::run;
use ccequil::verify::verify_text;
use ccequil_core::asyminfo::Density;
use ccequil_core::demand::Family;
use ccequil_core::learning::RootPolicy;
use proptest::prelude::*;

fn ccequil(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccequil")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn ree_to_stdout_verifies() {
    let o = ccequil(&["ree", "--family", "linear", "--c", "1", "--m", "0.5", "--b", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.lines().last().unwrap().starts_with("# config: "));
    let report = verify_text(&text).unwrap();
    assert_eq!(report.rows, 1);
    assert!(report.max_residual <= 1e-12);
}

#[test]
fn out_flag_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fo.csv");
    let args = ["polyeq", "first-order", "--family", "exp_convex", "--c", "1", "--alpha", "1", "--tau", "0.5"];
    let piped = ccequil(&args);
    let mut with_out = args.to_vec();
    let p = path.to_str().unwrap();
    with_out.extend(["--out", p]);
    let written = ccequil(&with_out);
    assert!(piped.status.success() && written.status.success());
    assert!(written.stdout.is_empty());
    assert_eq!(fs::read_to_string(&path).unwrap(), stdout(&piped));
}

#[test]
fn unknown_family_is_a_config_error() {
    let o = ccequil(&["ree", "--family", "cubic", "--c", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn missing_argument_is_a_config_error() {
    assert_eq!(ccequil(&["polyeq", "param-change", "--family", "linear"]).status.code(), Some(2));
}

#[test]
fn complex_learning_start_is_reported_in_the_trace() {
    // A prior far above the fixed point has no real forecast; the trace halts
    // rather than the process failing.
    let o = ccequil(&[
        "learn", "--family", "exp_convex", "--c", "1", "--alpha", "1", "--a-max", "4", "--prior", "3.5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("halted"));
}

#[test]
fn invalid_parameter_exits_with_config_code() {
    let o = ccequil(&["polyeq", "first-order", "--family", "linear", "--c", "1", "--m", "0.5", "--tau=-1"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn tampered_file_fails_verification() {
    let o = ccequil(&["ree", "--family", "exp_convex", "--c", "1", "--alpha", "1"]);
    let text = stdout(&o).replacen("5.67", "5.68", 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    fs::write(&path, text).unwrap();
    assert_eq!(ccequil(&["verify", path.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn sweep_writes_relative_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("s.conf");
    fs::write(
        &conf,
        "scenario.command = polyeq\npolyeq.variant = first-order\ndemand.family = linear\n\
         demand.c = 1\ndemand.m = 0.5\nsweep.parameter = tau\nsweep.lo = 0.5\nsweep.hi = 2\n\
         sweep.steps = 4\noutput.path = s.csv\n",
    )
    .unwrap();
    let o = ccequil(&["sweep", conf.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let report = verify_text(&text).unwrap();
    assert_eq!(report.rows, 8);
    assert!(Path::new(&dir.path().join("s.csv")).exists());
}

#[test]
fn sweep_is_deterministic_across_runs() {
    let conf = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/param_change_db_sweep.conf");
    let conf = conf.to_str().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(ccequil(&["sweep", conf, "--out", a.to_str().unwrap()]).status.success());
    assert!(ccequil(&["sweep", conf, "--out", b.to_str().unwrap()]).status.success());
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

fn scenario() -> impl Strategy<Value = Scenario> {
    let family = prop_oneof![
        (0.2..3.0, 0.05..3.0).prop_map(|(c, m)| Family::Linear { c, m }),
        (0.2..3.0, 0.1..3.0).prop_map(|(c, alpha)| Family::ExpConvex { c, alpha }),
    ];
    (family, 0.0..1.0, 0.05..5.0, 0.0..1.0, 0usize..3).prop_map(|(family, b, tau, t, kind)| {
        let mut s = match kind {
            0 => Scenario::new(Cmd::Polyeq(PolyeqKind::FirstOrder), family, b),
            1 => {
                let mut s = Scenario::new(Cmd::Learn, family, b);
                s.learn = Some(LearnParams {
                    prior: t,
                    policy: RootPolicy::SeededRandom(7),
                    tmax: 20,
                    tol: 1e-10,
                });
                s
            }
            _ => {
                let mut s = Scenario::new(Cmd::Asyminfo, family, b);
                s.asyminfo = Some(ccequil::config::AsymParams {
                    density: DensityConfig::Fixed(Density::Uniform { lo: 0.1 * t, hi: 0.1 * t + 0.2 }),
                    branch: ccequil_core::learning::Root::Plus,
                    quad_n: 101,
                });
                s
            }
        };
        s.a_max = Some(4.0);
        s.polyeq.tau = tau;
        s.polyeq.tau1 = tau;
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_line_round_trips(s in scenario()) {
        let back = Scenario::from_config_line(&s.config_line()).unwrap();
        prop_assert_eq!(back.config_line(), s.config_line());
    }

    #[test]
    fn first_order_output_verifies(s in scenario()) {
        prop_assume!(s.command == Cmd::Polyeq(PolyeqKind::FirstOrder));
        let text = run(&s).unwrap().render().unwrap();
        prop_assert!(verify_text(&text).is_ok());
    }
}
