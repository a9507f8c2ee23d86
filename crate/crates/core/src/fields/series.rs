//! Truncated univariate Taylor arithmetic.
//!
//! A [`Series`] is the expansion `sum c_i t^i` of a function of `x0 + t`,
//! truncated at a fixed order. The built-in fields obtain machine-accurate
//! derivatives by composing these series instead of hand-coding k-th
//! derivative formulas for bump functions.

use crate::jets::tensor::Tensor;
use crate::jets::Jet;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Series<T> {
    c: Vec<T>,
}

impl<T: Real> Series<T> {
    pub fn constant(v: T, order: usize) -> Self {
        let mut c = vec![T::zero(); order + 1];
        c[0] = v;
        Series { c }
    }

    /// The expansion of `x` itself around `x0`: `x0 + t`.
    pub fn variable(x0: T, order: usize) -> Self {
        let mut s = Series::constant(x0, order);
        if order >= 1 {
            s.c[1] = T::one();
        }
        s
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn coeff(&self, i: usize) -> T {
        self.c[i]
    }

    /// `k`-th derivative value at the expansion point: `k! c_k`.
    pub fn deriv(&self, k: usize) -> T {
        let mut f = T::one();
        for i in 2..=k {
            f = f * T::from_usize_exact(i);
        }
        self.c[k] * f
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.c.len(), other.c.len(), "series order mismatch");
        Series {
            c: self
                .c
                .iter()
                .zip(&other.c)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-T::one())
    }

    pub fn scale(&self, s: T) -> Self {
        Series {
            c: self.c.iter().map(|a| *a * s).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.c.len(), other.c.len(), "series order mismatch");
        let n = self.c.len();
        let mut c = vec![T::zero(); n];
        for i in 0..n {
            for j in 0..n - i {
                c[i + j] = c[i + j] + self.c[i] * other.c[j];
            }
        }
        Series { c }
    }

    /// Integer power by repeated multiplication.
    pub fn powi(&self, mut e: u32) -> Self {
        let mut acc = Series::constant(T::one(), self.order());
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// Reciprocal; requires a nonzero constant term.
    pub fn recip(&self) -> Self {
        let a0 = self.c[0];
        assert!(a0 != T::zero(), "reciprocal of series with zero constant term");
        let n = self.c.len();
        let mut r = vec![T::zero(); n];
        r[0] = T::one() / a0;
        for k in 1..n {
            let mut acc = T::zero();
            for j in 1..=k {
                acc = acc + self.c[j] * r[k - j];
            }
            r[k] = -acc / a0;
        }
        Series { c: r }
    }

    /// Exponential via the recurrence `e' = a' e`.
    pub fn exp(&self) -> Self {
        let n = self.c.len();
        let mut e = vec![T::zero(); n];
        e[0] = self.c[0].exp();
        for k in 1..n {
            let mut acc = T::zero();
            for j in 1..=k {
                acc = acc + T::from_usize_exact(j) * self.c[j] * e[k - j];
            }
            e[k] = acc / T::from_usize_exact(k);
        }
        Series { c: e }
    }

    /// Logarithm; requires a positive constant term.
    pub fn ln(&self) -> Self {
        let a0 = self.c[0];
        assert!(a0 > T::zero(), "log of series with non-positive constant term");
        let n = self.c.len();
        let mut l = vec![T::zero(); n];
        l[0] = a0.ln();
        for k in 1..n {
            let mut acc = T::from_usize_exact(k) * self.c[k];
            for j in 1..k {
                acc = acc - T::from_usize_exact(j) * l[j] * self.c[k - j];
            }
            l[k] = acc / (T::from_usize_exact(k) * a0);
        }
        Series { c: l }
    }

    /// Real power `a^p` via `exp(p ln a)`; requires a positive constant term.
    pub fn powf(&self, p: T) -> Self {
        self.ln().scale(p).exp()
    }
}

/// Assembles a 1-D jet (`R -> R`) from the value series of the field.
pub fn jet_from_series<T: Real>(s: &Series<T>, order: usize) -> Jet<T> {
    assert!(s.order() >= order);
    let mut jet = Jet::zero(1, 1, order);
    jet.value_mut()[0] = s.coeff(0);
    for k in 1..=order {
        let v = s.deriv(k);
        jet.set_deriv(k, Tensor::from_fn(1, 1, k, |_, _| v));
    }
    jet
}
