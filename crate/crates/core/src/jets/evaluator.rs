//! Callable fields: a point-to-jet map together with its support box.
//!
//! Evaluation outside the support box returns the zero jet without calling
//! the underlying closure, so compactly supported fields are exactly zero
//! where they claim to be.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{full_from_chart, jet_compose, Jet};

/// Axis-aligned closed box in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegion<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Real> BoxRegion<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::invalid("box corners must share a positive dimension"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::invalid("box needs lo <= hi per axis"));
        }
        Ok(BoxRegion { lo, hi })
    }

    /// Cube `[-r, r]^d`.
    pub fn centered(radius: T, dim: usize) -> Self {
        BoxRegion {
            lo: vec![-radius; dim],
            hi: vec![radius; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[T] {
        &self.lo
    }

    pub fn hi(&self) -> &[T] {
        &self.hi
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(xi, (lo, hi))| *xi >= *lo && *xi <= *hi)
    }

    pub fn inflate(&self, margin: T) -> Self {
        BoxRegion {
            lo: self.lo.iter().map(|v| *v - margin).collect(),
            hi: self.hi.iter().map(|v| *v + margin).collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        BoxRegion {
            lo: self
                .lo
                .iter()
                .zip(&other.lo)
                .map(|(a, b)| a.min(*b))
                .collect(),
            hi: self
                .hi
                .iter()
                .zip(&other.hi)
                .map(|(a, b)| a.max(*b))
                .collect(),
        }
    }

    pub fn translate(&self, shift: &[T]) -> Self {
        assert_eq!(self.dim(), shift.len());
        BoxRegion {
            lo: self.lo.iter().zip(shift).map(|(a, s)| *a + *s).collect(),
            hi: self.hi.iter().zip(shift).map(|(a, s)| *a + *s).collect(),
        }
    }
}

type EvalFn<T> = dyn Fn(&[T]) -> Jet<T> + Send + Sync;

/// A field `R^d -> R^m` evaluated through jets of a fixed order.
#[derive(Clone)]
pub struct JetEvaluator<T> {
    dim_in: usize,
    dim_out: usize,
    order: usize,
    support: BoxRegion<T>,
    value_bound: T,
    label: String,
    f: Arc<EvalFn<T>>,
}

impl<T: Real> JetEvaluator<T> {
    pub fn new(
        dim_in: usize,
        dim_out: usize,
        order: usize,
        support: BoxRegion<T>,
        value_bound: T,
        label: impl Into<String>,
        f: impl Fn(&[T]) -> Jet<T> + Send + Sync + 'static,
    ) -> Self {
        assert_eq!(support.dim(), dim_in, "support box dimension mismatch");
        JetEvaluator {
            dim_in,
            dim_out,
            order,
            support,
            value_bound,
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn zero(dim_in: usize, dim_out: usize, order: usize) -> Self {
        JetEvaluator::new(
            dim_in,
            dim_out,
            order,
            BoxRegion::centered(T::zero(), dim_in),
            T::zero(),
            "zero",
            move |x: &[T]| Jet::zero(x.len(), dim_out, order),
        )
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn support(&self) -> &BoxRegion<T> {
        &self.support
    }

    /// Upper bound on `|value|` over all of `R^d`, used to inflate support
    /// boxes under composition and inversion.
    pub fn value_bound(&self) -> T {
        self.value_bound
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn eval(&self, x: &[T]) -> Jet<T> {
        assert_eq!(x.len(), self.dim_in, "evaluation point dimension mismatch");
        if !self.support.contains(x) {
            return Jet::zero(self.dim_in, self.dim_out, self.order);
        }
        let jet = (self.f)(x);
        debug_assert_eq!(jet.dim_in(), self.dim_in);
        debug_assert_eq!(jet.dim_out(), self.dim_out);
        debug_assert_eq!(jet.order(), self.order);
        jet
    }

    pub fn sum(&self, other: &JetEvaluator<T>) -> Result<JetEvaluator<T>> {
        if (self.dim_in, self.dim_out) != (other.dim_in, other.dim_out) {
            return Err(Error::invalid("summed fields must share dimensions"));
        }
        let order = self.order.min(other.order);
        let a = self.clone();
        let b = other.clone();
        Ok(JetEvaluator::new(
            self.dim_in,
            self.dim_out,
            order,
            self.support.union(&other.support),
            self.value_bound + other.value_bound,
            format!("{}+{}", self.label, other.label),
            move |x: &[T]| a.eval(x).truncated(order).add(&b.eval(x).truncated(order)),
        ))
    }

    pub fn scale(&self, s: T) -> JetEvaluator<T> {
        let inner = self.clone();
        JetEvaluator::new(
            self.dim_in,
            self.dim_out,
            self.order,
            self.support.clone(),
            self.value_bound * s.abs(),
            format!("{}*{}", s, self.label),
            move |x: &[T]| inner.eval(x).scale(s),
        )
    }

    /// The field moved by `+shift`: result(x) = self(x - shift).
    pub fn translate(&self, shift: &[T]) -> JetEvaluator<T> {
        assert_eq!(shift.len(), self.dim_in);
        let inner = self.clone();
        let shift_owned: Vec<T> = shift.to_vec();
        JetEvaluator::new(
            self.dim_in,
            self.dim_out,
            self.order,
            self.support.translate(shift),
            self.value_bound,
            format!("shift({})", self.label),
            move |x: &[T]| {
                let y: Vec<T> = x.iter().zip(&shift_owned).map(|(a, s)| *a - *s).collect();
                inner.eval(&y)
            },
        )
    }
}

/// The composite `x -> g((Id + f)(x))` as an evaluator, with jets pushed
/// through the chain rule against the full jet of `Id + f`.
pub fn compose_with_chart<T: Real>(
    g: &JetEvaluator<T>,
    f: &JetEvaluator<T>,
) -> Result<JetEvaluator<T>> {
    if f.dim_in != f.dim_out {
        return Err(Error::invalid("inner chart must be square"));
    }
    if g.dim_in != f.dim_out {
        return Err(Error::invalid("outer field must accept the chart's space"));
    }
    let order = g.order.min(f.order);
    let g_owned = g.clone();
    let f_owned = f.clone();
    // x + f(x) can reach supp(g) from anywhere within |f| of it
    let support = f
        .support
        .union(&g.support.inflate(f.value_bound + T::lit(1e-9)));
    Ok(JetEvaluator::new(
        f.dim_in,
        g.dim_out,
        order,
        support,
        g.value_bound,
        format!("{}.(Id+{})", g.label, f.label),
        move |x: &[T]| {
            let chart = f_owned.eval(x).truncated(order);
            let full = full_from_chart(&chart, x);
            let outer = g_owned.eval(full.value()).truncated(order);
            jet_compose(&outer, &full, order).expect("validated dimensions")
        },
    ))
}
