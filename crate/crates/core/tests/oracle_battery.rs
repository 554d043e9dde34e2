//! Closed-form root sets against brute-force scans of each defining equation,
//! over seeded random coefficient draws.

use ccequil_core::demand::{DemandSpec, Family};
use ccequil_core::learning::{mixture_coefficients, supply_map, Root};
use ccequil_core::oracle::{excess, find_roots, Context, EquationId};
use ccequil_core::polyeq::{
    alt_discount_equilibria, first_order_equilibria, parameter_change_equilibria,
    second_order_equilibria, EquilibriumSet, Expansion, Taus,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DRAWS: usize = 200;
const GRID: usize = 40_000;
const TOL: f64 = 1e-6;

fn context(x: &Expansion) -> Context {
    Context {
        a0: Some(x.a0),
        phi0: Some(x.phi),
        phi_a: Some(x.phi_a),
        phi_aa: Some(x.phi_aa),
        phi_b: Some(x.phi_b),
        ..Default::default()
    }
}

fn span(closed: &[f64]) -> f64 {
    2.0 + 1.5 * closed.iter().fold(0.0_f64, |m, r| m.max(r.abs()))
}

fn assert_same(name: &str, draw: usize, scan: &[f64], closed: &[f64]) {
    assert_eq!(
        scan.len(),
        closed.len(),
        "{name} draw {draw}: scan {scan:?} vs closed {closed:?}"
    );
    for (s, c) in scan.iter().zip(closed) {
        assert!((s - c).abs() <= TOL, "{name} draw {draw}: {s} vs {c}");
    }
}

fn scan(g: impl Fn(f64) -> f64, closed: &[f64]) -> Vec<f64> {
    let l = span(closed);
    find_roots(g, -l, l, GRID).unwrap().roots
}

fn deviations(set: &EquilibriumSet) -> Vec<f64> {
    set.deviations()
}

fn draw_expansion(rng: &mut ChaCha8Rng) -> Expansion {
    let a0 = rng.random_range(0.2..3.0);
    Expansion {
        a0,
        b0: 0.0,
        phi: a0,
        phi_a: rng.random_range(-3.0..-0.05),
        phi_aa: rng.random_range(-4.0..4.0),
        phi_b: rng.random_range(0.2..2.0),
    }
}

#[test]
fn first_order_roots_match_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for draw in 0..DRAWS {
        let x = draw_expansion(&mut rng);
        let tau = rng.random_range(0.05..10.0);
        let closed = deviations(&first_order_equilibria(&x, tau).unwrap());
        let ctx = Context {
            tau: Some(tau),
            ..context(&x)
        };
        let found = scan(|d| excess(EquationId::E5, d, &ctx).unwrap(), &closed);
        assert_same("e5", draw, &found, &closed);
    }
}

#[test]
fn parameter_change_roots_match_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for draw in 0..DRAWS {
        let x = draw_expansion(&mut rng);
        let taus = Taus::new(
            rng.random_range(0.1..5.0),
            rng.random_range(0.0..5.0),
            rng.random_range(0.0..3.0),
        );
        let db = rng.random_range(0.0..1.5);
        let closed = deviations(&parameter_change_equilibria(&x, db, taus).unwrap());
        let ctx = Context {
            delta_b: Some(db),
            tau1: Some(taus.tau1),
            tau2: Some(taus.tau2),
            tau3: Some(taus.tau3),
            ..context(&x)
        };
        // both source forms are the same |dA||db| equation
        let found = scan(|d| excess(EquationId::Ne26Src, d, &ctx).unwrap(), &closed);
        assert_same("ne26/ne27", draw, &found, &closed);
    }
}

#[test]
fn second_order_roots_match_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for draw in 0..DRAWS {
        let x = draw_expansion(&mut rng);
        let tau = if draw % 5 == 0 {
            0.0
        } else {
            rng.random_range(0.05..5.0)
        };
        let closed = deviations(&second_order_equilibria(&x, tau).unwrap());
        let ctx = Context {
            tau: Some(tau),
            ..context(&x)
        };
        let found = scan(|d| excess(EquationId::A1001, d, &ctx).unwrap(), &closed);
        assert_same("a1001", draw, &found, &closed);
    }
}

#[test]
fn alt_discount_roots_match_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for draw in 0..DRAWS {
        let x = draw_expansion(&mut rng);
        let db = rng.random_range(0.001..4.0);
        let closed = deviations(&alt_discount_equilibria(&x, db).unwrap());
        let ctx = Context {
            delta_b: Some(db),
            ..context(&x)
        };
        // the max-error penalty picks its regime from |dA| vs |db|
        let g = |d: f64| {
            let id = if d.abs() > db {
                EquationId::BRegime2
            } else {
                EquationId::BRegime1
            };
            excess(id, d, &ctx).unwrap()
        };
        let found = scan(g, &closed);
        assert_same("b_regime", draw, &found, &closed);
    }
}

fn draw_spec(rng: &mut ChaCha8Rng) -> DemandSpec {
    let family = Family::ExpConvex {
        c: rng.random_range(0.3..3.0),
        alpha: rng.random_range(0.3..3.0),
    };
    DemandSpec::new(family, 10.0).unwrap()
}

#[test]
fn learning_and_agent_roots_match_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut checked = 0;
    while checked < DRAWS {
        let spec = draw_spec(&mut rng);
        let b = rng.random_range(0.0..1.0);
        let x = rng.random_range(0.0..2.0);
        let (Ok(minus), Ok(plus)) = (
            supply_map(&spec, b, x, Root::Minus),
            supply_map(&spec, b, x, Root::Plus),
        ) else {
            continue;
        };
        if (plus - minus).abs() < 1e-4 {
            continue;
        }
        let ctx = Context {
            a_star: Some(x),
            phi_star: Some(spec.price(x, b)),
            phi_a_star: Some(spec.slope(x, b)),
            ..Default::default()
        };
        let closed = [minus, plus];
        for id in [EquationId::L2, EquationId::HaAgent] {
            let found = scan(|a| excess(id, a, &ctx).unwrap(), &closed);
            assert_same(id.as_str(), checked, &found, &closed);
        }
        checked += 1;
    }
}

#[test]
fn mixture_roots_match_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut checked = 0;
    while checked < DRAWS {
        let spec = draw_spec(&mut rng);
        let b = rng.random_range(0.0..1.0);
        let x1 = rng.random_range(0.0..2.0);
        let x2 = rng.random_range(0.0..2.0);
        let psi = rng.random_range(0.0..1.0);
        let (p, q) = mixture_coefficients(&spec, b, x1, x2, psi);
        let disc = 0.25 * p * p - q;
        if disc < 1e-6 {
            continue;
        }
        let r = disc.sqrt();
        let closed = [-0.5 * p - r, -0.5 * p + r];
        let ctx = Context {
            psi: Some(psi),
            a_star: Some(x1),
            phi_star: Some(spec.price(x1, b)),
            phi_a_star: Some(spec.slope(x1, b)),
            a_star2: Some(x2),
            phi_star2: Some(spec.price(x2, b)),
            phi_a_star2: Some(spec.slope(x2, b)),
            ..Default::default()
        };
        let found = scan(|a| excess(EquationId::HdMixture, a, &ctx).unwrap(), &closed);
        assert_same("hd_mixture", checked, &found, &closed);
        checked += 1;
    }
}
