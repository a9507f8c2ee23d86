//! Cross-checks the jet engine against an independent symbolic oracle.
//!
//! The oracle differentiates expression trees with the first-order chain
//! rule and direct substitution; the engine uses the higher-order
//! composition and product rules on elementary jets. Agreement to near
//! machine precision over random expressions validates the combinatorics.

mod support;

use holoflow::jets::{jet_bilinear, jet_compose, Bilinear, Jet};
use holoflow::samplers::rng;
use rand::Rng;
use support::{oracle_jet, random_expr, random_mild_expr, Expr};

const ORACLE_TOL: f64 = 1e-10;
const FD_TOL: f64 = 1e-5;

fn assert_jets_close(engine: &Jet<f64>, oracle: &Jet<f64>, order: usize, context: &str) {
    for out in 0..engine.dim_out() {
        let (a, b) = (engine.value()[out], oracle.value()[out]);
        assert!(
            (a - b).abs() <= ORACLE_TOL * (1.0 + b.abs()),
            "{context}: value[{out}] {a} vs {b}"
        );
    }
    for k in 1..=order {
        let (ta, tb) = (engine.deriv(k), oracle.deriv(k));
        for (i, (a, b)) in ta.data().iter().zip(tb.data()).enumerate() {
            assert!(
                (a - b).abs() <= ORACLE_TOL * (1.0 + b.abs()),
                "{context}: order {k} entry {i}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn composition_matches_symbolic_oracle() {
    let mut r = rng(0x0a11_5eed);
    for trial in 0..60 {
        let d = 1 + trial % 2;
        let m = 1 + (trial / 2) % 2;
        let order = 1 + trial % 4;
        let f: Vec<Expr> = (0..m).map(|_| random_expr(&mut r, d, 2)).collect();
        let g: Vec<Expr> = (0..1).map(|_| random_expr(&mut r, m, 2)).collect();
        let x: Vec<f64> = (0..d).map(|_| r.gen_range(-0.8..0.8)).collect();
        let f_jet = oracle_jet(&f, d, &x, order);
        let g_jet = oracle_jet(&g, m, f_jet.value(), order);
        let engine = jet_compose(&g_jet, &f_jet, order).unwrap();
        let composite: Vec<Expr> = g.iter().map(|e| e.subst(&f)).collect();
        let oracle = oracle_jet(&composite, d, &x, order);
        assert_jets_close(
            &engine,
            &oracle,
            order,
            &format!("trial {trial} d={d} m={m} order={order}"),
        );
    }
}

#[test]
fn product_rule_matches_symbolic_oracle() {
    let mut r = rng(0x0b17_a7e5);
    let b = Bilinear::scalar_product();
    for trial in 0..40 {
        let d = 1 + trial % 2;
        let order = 1 + trial % 4;
        let p = random_expr(&mut r, d, 2);
        let q = random_expr(&mut r, d, 2);
        let x: Vec<f64> = (0..d).map(|_| r.gen_range(-0.8..0.8)).collect();
        let p_jet = oracle_jet(std::slice::from_ref(&p), d, &x, order);
        let q_jet = oracle_jet(std::slice::from_ref(&q), d, &x, order);
        let engine = jet_bilinear(&b, &p_jet, &q_jet, order).unwrap();
        let product = Expr::Mul(Box::new(p), Box::new(q));
        let oracle = oracle_jet(std::slice::from_ref(&product), d, &x, order);
        assert_jets_close(&engine, &oracle, order, &format!("trial {trial} d={d}"));
    }
}

/// Directional finite differences over the composite map agree with the
/// composed jets, confirming the oracle itself tracks the functions.
#[test]
fn finite_differences_confirm_composed_jets() {
    let mut r = rng(0x0fd5_11de);
    for trial in 0..20 {
        let d = 1 + trial % 2;
        let f: Vec<Expr> = (0..d).map(|_| random_mild_expr(&mut r, d, 2)).collect();
        let g: Vec<Expr> = vec![random_mild_expr(&mut r, d, 2)];
        let composite: Vec<Expr> = g.iter().map(|e| e.subst(&f)).collect();
        let x: Vec<f64> = (0..d).map(|_| r.gen_range(-0.6..0.6)).collect();
        let f_jet = oracle_jet(&f, d, &x, 2);
        let g_jet = oracle_jet(&g, d, f_jet.value(), 2);
        let engine = jet_compose(&g_jet, &f_jet, 2).unwrap();
        let mut v: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-6);
        v.iter_mut().for_each(|a| *a /= norm);
        let phi = |t: f64| {
            let y: Vec<f64> = x.iter().zip(&v).map(|(xi, vi)| xi + t * vi).collect();
            composite[0].eval(&y)
        };
        let h = 1e-2;
        // fourth-order central stencils
        let fd1 = (phi(-2.0 * h) - 8.0 * phi(-h) + 8.0 * phi(h) - phi(2.0 * h)) / (12.0 * h);
        let fd2 = (-phi(-2.0 * h) + 16.0 * phi(-h) - 30.0 * phi(0.0) + 16.0 * phi(h)
            - phi(2.0 * h))
            / (12.0 * h * h);
        let d1 = engine.deriv(1).apply(&[&v])[0];
        let d2 = engine.deriv(2).apply(&[&v, &v])[0];
        assert!(
            (fd1 - d1).abs() <= FD_TOL * (1.0 + d1.abs()),
            "trial {trial}: first directional {fd1} vs {d1}"
        );
        assert!(
            (fd2 - d2).abs() <= FD_TOL * (1.0 + d2.abs()),
            "trial {trial}: second directional {fd2} vs {d2}"
        );
    }
}
