//! Symbolic-differentiation oracle for validating the jet engine.
//!
//! Expressions are differentiated by the first-order chain rule only, so
//! agreement with `jet_compose` genuinely cross-checks the higher-order
//! combinatorics rather than re-deriving them.

use std::collections::HashMap;

use holoflow::jets::tensor::Tensor;
use holoflow::jets::Jet;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

use Expr::*;

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Const(c) => *c,
            Var(i) => x[*i],
            Add(a, b) => a.eval(x) + b.eval(x),
            Mul(a, b) => a.eval(x) * b.eval(x),
            Sin(a) => a.eval(x).sin(),
            Cos(a) => a.eval(x).cos(),
            Exp(a) => a.eval(x).exp(),
        }
    }

    /// Partial derivative with respect to variable `v`.
    pub fn diff(&self, v: usize) -> Expr {
        match self {
            Const(_) => Const(0.0),
            Var(i) => Const(if *i == v { 1.0 } else { 0.0 }),
            Add(a, b) => Add(Box::new(a.diff(v)), Box::new(b.diff(v))),
            Mul(a, b) => Add(
                Box::new(Mul(Box::new(a.diff(v)), b.clone())),
                Box::new(Mul(a.clone(), Box::new(b.diff(v)))),
            ),
            Sin(a) => Mul(Box::new(Cos(a.clone())), Box::new(a.diff(v))),
            Cos(a) => Mul(
                Box::new(Mul(Box::new(Const(-1.0)), Box::new(Sin(a.clone())))),
                Box::new(a.diff(v)),
            ),
            Exp(a) => Mul(Box::new(Exp(a.clone())), Box::new(a.diff(v))),
        }
    }

    /// Replaces `Var(i)` with `subs[i]`, forming the composite expression.
    pub fn subst(&self, subs: &[Expr]) -> Expr {
        match self {
            Const(c) => Const(*c),
            Var(i) => subs[*i].clone(),
            Add(a, b) => Add(Box::new(a.subst(subs)), Box::new(b.subst(subs))),
            Mul(a, b) => Mul(Box::new(a.subst(subs)), Box::new(b.subst(subs))),
            Sin(a) => Sin(Box::new(a.subst(subs))),
            Cos(a) => Cos(Box::new(a.subst(subs))),
            Exp(a) => Exp(Box::new(a.subst(subs))),
        }
    }
}

/// Full jet of the map `x -> (exprs[0](x), ..)` at `x`, every mixed
/// partial obtained by repeated symbolic differentiation.
pub fn oracle_jet(exprs: &[Expr], dim_in: usize, x: &[f64], order: usize) -> Jet<f64> {
    let dim_out = exprs.len();
    let mut jet = Jet::zero(dim_in, dim_out, order);
    for (out, e) in exprs.iter().enumerate() {
        jet.value_mut()[out] = e.eval(x);
    }
    for k in 1..=order {
        // cache by sorted index tuple; the tensor is symmetric
        let mut cache: HashMap<(usize, Vec<usize>), f64> = HashMap::new();
        let t = Tensor::from_fn(dim_out, dim_in, k, |out, idx| {
            let mut key: Vec<usize> = idx.to_vec();
            key.sort_unstable();
            *cache.entry((out, key.clone())).or_insert_with(|| {
                let mut e = exprs[out].clone();
                for &v in &key {
                    e = e.diff(v);
                }
                e.eval(x)
            })
        });
        jet.set_deriv(k, t);
    }
    jet
}

/// Random expression over `dim` variables with the given nesting depth.
pub fn random_expr(rng: &mut ChaCha8Rng, dim: usize, depth: usize) -> Expr {
    if depth == 0 {
        return if rng.gen_bool(0.5) {
            Var(rng.gen_range(0..dim))
        } else {
            Const(rng.gen_range(-1.0..1.0))
        };
    }
    match rng.gen_range(0..6) {
        0 => Add(
            Box::new(random_expr(rng, dim, depth - 1)),
            Box::new(random_expr(rng, dim, depth - 1)),
        ),
        1 => Mul(
            Box::new(random_expr(rng, dim, depth - 1)),
            Box::new(random_expr(rng, dim, depth - 1)),
        ),
        2 => Sin(Box::new(random_expr(rng, dim, depth - 1))),
        3 => Cos(Box::new(random_expr(rng, dim, depth - 1))),
        4 => Exp(Box::new(random_expr(rng, dim, depth - 1))),
        _ => Var(rng.gen_range(0..dim)),
    }
}

/// Like [`random_expr`] but without `Exp`, keeping high-order directional
/// derivatives tame for finite-difference comparisons.
pub fn random_mild_expr(rng: &mut ChaCha8Rng, dim: usize, depth: usize) -> Expr {
    if depth == 0 {
        return if rng.gen_bool(0.5) {
            Var(rng.gen_range(0..dim))
        } else {
            Const(rng.gen_range(-1.0..1.0))
        };
    }
    match rng.gen_range(0..5) {
        0 => Add(
            Box::new(random_mild_expr(rng, dim, depth - 1)),
            Box::new(random_mild_expr(rng, dim, depth - 1)),
        ),
        1 => Mul(
            Box::new(random_mild_expr(rng, dim, depth - 1)),
            Box::new(random_mild_expr(rng, dim, depth - 1)),
        ),
        2 => Sin(Box::new(random_mild_expr(rng, dim, depth - 1))),
        3 => Cos(Box::new(random_mild_expr(rng, dim, depth - 1))),
        _ => Var(rng.gen_range(0..dim)),
    }
}
