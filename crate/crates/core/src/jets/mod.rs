//! Pointwise jets of maps `R^d -> R^m` and the calculus on them.
//!
//! A [`Jet`] holds a value and the derivative tensors `d^1 .. d^n` at one
//! point; derivative tensors are kept symmetric in their input slots.
//! [`jet_compose`] pushes jets through the higher-order chain rule,
//! [`jet_bilinear`] through the higher-order product rule, and
//! [`invert_full_jet`] solves the triangular system that yields inverse-map
//! jets from forward ones.

pub mod composition;
pub mod evaluator;
pub mod tensor;

use crate::error::{Error, Result};
use crate::scalar::Real;

use composition::{compositions_cached, faa_coefficient_scalar, Composition};
use tensor::Tensor;

/// Value and derivative tensors of a map at a single point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet<T> {
    dim_in: usize,
    dim_out: usize,
    order: usize,
    value: Vec<T>,
    derivs: Vec<Tensor<T>>,
}

impl<T: Real> Jet<T> {
    pub fn zero(dim_in: usize, dim_out: usize, order: usize) -> Self {
        Jet {
            dim_in,
            dim_out,
            order,
            value: vec![T::zero(); dim_out],
            derivs: (1..=order)
                .map(|k| Tensor::zeros(dim_out, dim_in, k))
                .collect(),
        }
    }

    /// Jet of the identity map at `x`.
    pub fn identity_at(x: &[T], order: usize) -> Self {
        let d = x.len();
        let mut jet = Jet::zero(d, d, order);
        jet.value.copy_from_slice(x);
        if order >= 1 {
            jet.derivs[0] = Tensor::identity(d);
        }
        jet
    }

    pub fn from_parts(
        dim_in: usize,
        dim_out: usize,
        value: Vec<T>,
        derivs: Vec<Tensor<T>>,
    ) -> Result<Self> {
        if value.len() != dim_out {
            return Err(Error::invalid("jet value length must equal dim_out"));
        }
        for (i, t) in derivs.iter().enumerate() {
            if t.order() != i + 1 || t.dim_in() != dim_in || t.dim_out() != dim_out {
                return Err(Error::invalid(format!(
                    "derivative tensor {} has wrong shape",
                    i + 1
                )));
            }
        }
        Ok(Jet {
            dim_in,
            dim_out,
            order: derivs.len(),
            value,
            derivs,
        })
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

    pub fn value(&self) -> &[T] {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut [T] {
        &mut self.value
    }

    /// Derivative tensor of order `k`, `1 <= k <= order`.
    pub fn deriv(&self, k: usize) -> &Tensor<T> {
        assert!(k >= 1 && k <= self.order, "derivative order out of range");
        &self.derivs[k - 1]
    }

    pub fn set_deriv(&mut self, k: usize, t: Tensor<T>) {
        assert!(k >= 1 && k <= self.order);
        assert_eq!((t.dim_out(), t.dim_in(), t.order()), (self.dim_out, self.dim_in, k));
        self.derivs[k - 1] = t;
    }

    pub fn truncated(&self, order: usize) -> Self {
        assert!(order <= self.order);
        Jet {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            order,
            value: self.value.clone(),
            derivs: self.derivs[..order].to_vec(),
        }
    }

    /// `self + s * other`, the linear structure used by field mixtures and
    /// Runge-Kutta stages.
    pub fn add_scaled(&self, other: &Jet<T>, s: T) -> Self {
        assert_eq!(
            (self.dim_in, self.dim_out, self.order),
            (other.dim_in, other.dim_out, other.order),
            "jet shape mismatch"
        );
        let value = self
            .value
            .iter()
            .zip(&other.value)
            .map(|(a, b)| *a + *b * s)
            .collect();
        let derivs = self
            .derivs
            .iter()
            .zip(&other.derivs)
            .map(|(a, b)| a.add(&b.scale(s)))
            .collect();
        Jet {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            order: self.order,
            value,
            derivs,
        }
    }

    pub fn add(&self, other: &Jet<T>) -> Self {
        self.add_scaled(other, T::one())
    }

    pub fn sub(&self, other: &Jet<T>) -> Self {
        self.add_scaled(other, -T::one())
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.value {
            *v = *v * s;
        }
        for d in &mut out.derivs {
            *d = d.scale(s);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.value.iter().all(|v| v.is_finite()) && self.derivs.iter().all(|d| d.is_finite())
    }

    /// Largest deviation of any derivative tensor from its symmetrization.
    pub fn max_symmetry_defect(&self) -> T {
        self.derivs
            .iter()
            .fold(T::zero(), |acc, d| acc.max(d.max_symmetry_defect()))
    }

    /// Largest entry difference against `other`, over value and all tensors.
    pub fn max_abs_diff(&self, other: &Jet<T>) -> T {
        let mut m = self
            .value
            .iter()
            .zip(&other.value)
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()));
        for (a, b) in self.derivs.iter().zip(&other.derivs) {
            m = m.max(a.sub(b).max_abs_entry());
        }
        m
    }
}

/// Jet of `Phi = Id + phi` at `x` from the jet of the displacement `phi`.
pub fn full_from_chart<T: Real>(chart: &Jet<T>, x: &[T]) -> Jet<T> {
    assert_eq!(chart.dim_in, chart.dim_out, "chart jets are square");
    assert_eq!(x.len(), chart.dim_in);
    let mut full = chart.clone();
    for (v, xi) in full.value.iter_mut().zip(x) {
        *v = *v + *xi;
    }
    if full.order >= 1 {
        full.derivs[0] = full.derivs[0].add(&Tensor::identity(chart.dim_in));
    }
    full
}

/// Displacement jet `Phi - Id` at `x` from the jet of the full map.
pub fn chart_from_full<T: Real>(full: &Jet<T>, x: &[T]) -> Jet<T> {
    assert_eq!(full.dim_in, full.dim_out, "full-map jets are square");
    assert_eq!(x.len(), full.dim_in);
    let mut chart = full.clone();
    for (v, xi) in chart.value.iter_mut().zip(x) {
        *v = *v - *xi;
    }
    if chart.order >= 1 {
        chart.derivs[0] = chart.derivs[0].sub(&Tensor::identity(full.dim_in));
    }
    chart
}

/// One unsymmetrized chain-rule contraction:
/// `out[a][J] = sum_b g_l[a][b_1..b_l] * prod_i f^(gamma_i)[b_i][J_seg_i]`
/// where `J_seg_i` are consecutive slot groups of sizes `gamma_1..gamma_l`.
fn chain_term<T: Real>(g_l: &Tensor<T>, f: &Jet<T>, gamma: &Composition) -> Tensor<T> {
    let k = gamma.order() as usize;
    let l = gamma.len();
    let d = f.dim_in;
    let e = f.dim_out;
    debug_assert_eq!(g_l.dim_in(), e);
    debug_assert_eq!(g_l.order(), l);

    let m = g_l.dim_out();
    let mut out = Tensor::zeros(m, d, k);
    let d_block = d.pow(k as u32);
    let e_block = e.pow(l as u32);

    // Per part: the tensor data, its input block size, and the slot offset.
    let mut part_info = Vec::with_capacity(l);
    let mut offset = 0usize;
    for &p in gamma.parts() {
        let p = p as usize;
        part_info.push((f.deriv(p).data(), d.pow(p as u32), offset, p));
        offset += p;
    }

    let mut j_digits = vec![0usize; k];
    let mut seg_flat = vec![0usize; l];
    let mut b_digits = vec![0usize; l];
    let g_data = g_l.data();
    for _flat_j in 0..d_block {
        // flat index of each slot group of J
        for (i, &(_, _, off, p)) in part_info.iter().enumerate() {
            let mut s = 0usize;
            for t in 0..p {
                s = s * d + j_digits[off + t];
            }
            seg_flat[i] = s;
        }
        for a in 0..m {
            let mut acc = T::zero();
            b_digits.iter_mut().for_each(|b| *b = 0);
            for flat_b in 0..e_block {
                let mut w = g_data[a * e_block + flat_b];
                if w != T::zero() {
                    for (i, &(data, block, _, _)) in part_info.iter().enumerate() {
                        w = w * data[b_digits[i] * block + seg_flat[i]];
                    }
                    acc = acc + w;
                }
                advance_digits(&mut b_digits, e);
            }
            out.add_at(a, &j_digits, acc);
        }
        advance_digits(&mut j_digits, d);
    }
    out
}

fn advance_digits(idx: &mut [usize], base: usize) {
    for j in idx.iter_mut().rev() {
        *j += 1;
        if *j < base {
            return;
        }
        *j = 0;
    }
}

/// Higher-order chain rule: jet of `g . f` to `order`.
///
/// `g` must be a jet at the point `f.value()`. Order `k` output is
/// `sym sum_{l=1}^{k} sum_{gamma in Gamma(l,k)} c_gamma g^(l)(f^(gamma_1), ..., f^(gamma_l))`
/// with exact rational weights `c_gamma`.
pub fn jet_compose<T: Real>(g: &Jet<T>, f: &Jet<T>, order: usize) -> Result<Jet<T>> {
    if f.dim_out != g.dim_in {
        return Err(Error::invalid(format!(
            "compose dimension mismatch: f maps into R^{}, g expects R^{}",
            f.dim_out, g.dim_in
        )));
    }
    if f.order < order || g.order < order {
        return Err(Error::invalid(format!(
            "compose needs jets of order >= {order}, got f: {}, g: {}",
            f.order, g.order
        )));
    }
    let mut out = Jet::zero(f.dim_in, g.dim_out, order);
    out.value.copy_from_slice(&g.value);
    for k in 1..=order {
        let mut acc = Tensor::zeros(g.dim_out, f.dim_in, k);
        for l in 1..=k {
            for gamma in compositions_cached(l as u32, k as u32).iter() {
                let c = faa_coefficient_scalar::<T>(gamma);
                let term = chain_term(g.deriv(l), f, gamma);
                acc = acc.add(&term.scale(c));
            }
        }
        out.derivs[k - 1] = acc.symmetrize();
    }
    Ok(out)
}

/// Bilinear map `b : R^p x R^q -> R^m` in coordinates.
#[derive(Debug, Clone)]
pub struct Bilinear<T> {
    dim_left: usize,
    dim_right: usize,
    dim_out: usize,
    /// layout `[a][p][q]`
    data: Vec<T>,
}

impl<T: Real> Bilinear<T> {
    pub fn from_fn(
        dim_left: usize,
        dim_right: usize,
        dim_out: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let mut data = vec![T::zero(); dim_out * dim_left * dim_right];
        for a in 0..dim_out {
            for p in 0..dim_left {
                for q in 0..dim_right {
                    data[(a * dim_left + p) * dim_right + q] = f(a, p, q);
                }
            }
        }
        Bilinear {
            dim_left,
            dim_right,
            dim_out,
            data,
        }
    }

    /// Scalar multiplication `b(u, v) = u * v` on `R^1 x R^1`.
    pub fn scalar_product() -> Self {
        Bilinear::from_fn(1, 1, 1, |_, _, _| T::one())
    }

    pub fn entry(&self, a: usize, p: usize, q: usize) -> T {
        self.data[(a * self.dim_left + p) * self.dim_right + q]
    }

    pub fn apply(&self, u: &[T], v: &[T]) -> Vec<T> {
        assert_eq!(u.len(), self.dim_left);
        assert_eq!(v.len(), self.dim_right);
        (0..self.dim_out)
            .map(|a| {
                let mut acc = T::zero();
                for p in 0..self.dim_left {
                    for q in 0..self.dim_right {
                        acc = acc + self.entry(a, p, q) * u[p] * v[q];
                    }
                }
                acc
            })
            .collect()
    }
}

/// Higher-order product rule: jet of `x -> b(f(x), g(x))` to `order`.
///
/// Order `k` output is `sym sum_{l=0}^{k} binom(k,l) b(f^(l), g^(k-l))`,
/// where slots `1..l` feed `f` and the rest feed `g`.
pub fn jet_bilinear<T: Real>(
    b: &Bilinear<T>,
    f: &Jet<T>,
    g: &Jet<T>,
    order: usize,
) -> Result<Jet<T>> {
    if f.dim_in != g.dim_in {
        return Err(Error::invalid("bilinear jets must share the input space"));
    }
    if f.dim_out != b.dim_left || g.dim_out != b.dim_right {
        return Err(Error::invalid(format!(
            "bilinear dimension mismatch: b is {}x{} -> {}, f into R^{}, g into R^{}",
            b.dim_left, b.dim_right, b.dim_out, f.dim_out, g.dim_out
        )));
    }
    if f.order < order || g.order < order {
        return Err(Error::invalid(format!(
            "bilinear needs jets of order >= {order}"
        )));
    }
    let d = f.dim_in;
    let mut out = Jet::zero(d, b.dim_out, order);
    out.value = b.apply(&f.value, &g.value);

    // entry of derivative l (or the value for l = 0) at a flat input index
    let entry = |jet: &Jet<T>, l: usize, row: usize, flat: usize| -> T {
        if l == 0 {
            jet.value[row]
        } else {
            let block = d.pow(l as u32);
            jet.derivs[l - 1].data()[row * block + flat]
        }
    };

    for k in 1..=order {
        let mut acc = Tensor::zeros(b.dim_out, d, k);
        let d_block = d.pow(k as u32);
        for l in 0..=k {
            let c = T::from_u64(binomial(k as u64, l as u64)).expect("binomial");
            let right_block = d.pow((k - l) as u32);
            let mut j_digits = vec![0usize; k];
            for flat_j in 0..d_block {
                // first l slots of J feed f, the remaining k - l feed g
                let right_flat = flat_j % right_block;
                let left_flat = flat_j / right_block;
                for a in 0..b.dim_out {
                    let mut sum = T::zero();
                    for p in 0..b.dim_left {
                        let fe = entry(f, l, p, left_flat);
                        if fe == T::zero() {
                            continue;
                        }
                        for q in 0..b.dim_right {
                            let be = b.entry(a, p, q);
                            if be != T::zero() {
                                sum = sum + be * fe * entry(g, k - l, q, right_flat);
                            }
                        }
                    }
                    if sum != T::zero() {
                        acc.add_at(a, &j_digits, sum * c);
                    }
                }
                advance_digits(&mut j_digits, d);
            }
        }
        out.derivs[k - 1] = acc.symmetrize();
    }
    Ok(out)
}

fn binomial(n: u64, r: u64) -> u64 {
    let mut acc = 1u64;
    for i in 0..r.min(n - r) {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Jet of the inverse map from the full jet of `Phi` at base point `y`.
///
/// `f` is the jet of `Phi` at `y` (so `f.value() = Phi(y)`); the result is
/// the jet of `Phi^{-1}` at `Phi(y)` with value `y`. Order `k` is obtained
/// from the identity `d^k(Phi^{-1} . Phi) = 0`: the top term
/// `G^(k)(dPhi, ..., dPhi)` equals minus the symmetrized lower-order sum,
/// and the `k` copies of `dPhi` are peeled off with one linear solve per
/// slot.
pub fn invert_full_jet<T: Real>(f: &Jet<T>, y: &[T]) -> Result<Jet<T>> {
    if f.dim_in != f.dim_out {
        return Err(Error::invalid("only square jets can be inverted"));
    }
    if f.order < 1 {
        return Err(Error::invalid("inversion needs at least first derivatives"));
    }
    let d = f.dim_in;
    if y.len() != d {
        return Err(Error::invalid("base point dimension mismatch"));
    }
    let a_inv = f.deriv(1).matrix_inverse()?;
    let mut g = Jet::zero(d, d, f.order);
    g.value.copy_from_slice(y);
    g.derivs[0] = a_inv.clone();
    for k in 2..=f.order {
        let mut acc = Tensor::zeros(d, d, k);
        for l in 1..k {
            for gamma in compositions_cached(l as u32, k as u32).iter() {
                let c = faa_coefficient_scalar::<T>(gamma);
                let term = chain_term(g.deriv(l), f, gamma);
                acc = acc.add(&term.scale(c));
            }
        }
        let rhs = acc.symmetrize().scale(-T::one());
        g.derivs[k - 1] = rhs.substitute(&a_inv);
    }
    Ok(g)
}
