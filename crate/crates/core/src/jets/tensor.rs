//! Dense multilinear maps `(R^d)^k -> R^m` in coordinates.
//!
//! Storage is a flat row-major array: output index first, then the `k` input
//! indices with slot 0 most significant. Orders stay tiny (`k <= 6`, `d <= 3`
//! in practice), so everything is written for clarity over asymptotics; the
//! only loops that matter are the contraction kernels used per grid point.

use crate::error::{Error, Result};
use crate::scalar::Real;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Conditioning floor for determinants in linear solves.
pub const DET_FLOOR: f64 = 1e-12;

/// Fixed stream for the sampled lower bound in [`Tensor::opnorm_sampled`],
/// so estimates are reproducible regardless of call order or thread count.
const OPNORM_STREAM: u64 = 0x484f_4c4f_464c_4f57;

/// Dense `k`-linear map from `(R^{dim_in})^k` to `R^{dim_out}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    dim_out: usize,
    dim_in: usize,
    order: usize,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(dim_out: usize, dim_in: usize, order: usize) -> Self {
        assert!(dim_out > 0 && dim_in > 0);
        let len = dim_out * dim_in.pow(order as u32);
        Tensor {
            dim_out,
            dim_in,
            order,
            data: vec![T::zero(); len],
        }
    }

    /// Identity matrix as an order-1 tensor.
    pub fn identity(dim: usize) -> Self {
        let mut t = Tensor::zeros(dim, dim, 1);
        for i in 0..dim {
            t.data[i * dim + i] = T::one();
        }
        t
    }

    pub fn from_fn(
        dim_out: usize,
        dim_in: usize,
        order: usize,
        mut f: impl FnMut(usize, &[usize]) -> T,
    ) -> Self {
        let mut t = Tensor::zeros(dim_out, dim_in, order);
        let block = dim_in.pow(order as u32);
        let mut idx = vec![0usize; order];
        for a in 0..dim_out {
            idx.iter_mut().for_each(|j| *j = 0);
            for flat in 0..block {
                t.data[a * block + flat] = f(a, &idx);
                Self::advance(&mut idx, dim_in);
            }
        }
        t
    }

    fn advance(idx: &mut [usize], base: usize) {
        for j in idx.iter_mut().rev() {
            *j += 1;
            if *j < base {
                return;
            }
            *j = 0;
        }
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    fn block(&self) -> usize {
        self.dim_in.pow(self.order as u32)
    }

    fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        let mut f = 0;
        for &j in idx {
            debug_assert!(j < self.dim_in);
            f = f * self.dim_in + j;
        }
        f
    }

    pub fn get(&self, out: usize, idx: &[usize]) -> T {
        self.data[out * self.block() + self.flat(idx)]
    }

    pub fn set(&mut self, out: usize, idx: &[usize], v: T) {
        let f = out * self.block() + self.flat(idx);
        self.data[f] = v;
    }

    pub fn add_at(&mut self, out: usize, idx: &[usize], v: T) {
        let f = out * self.block() + self.flat(idx);
        self.data[f] = self.data[f] + v;
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = *v * s;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(
            (self.dim_out, self.dim_in, self.order),
            (other.dim_out, other.dim_in, other.order),
            "tensor shape mismatch"
        );
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&other.data) {
            *v = f(*v, *w);
        }
        out
    }

    pub fn max_abs_entry(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Average over all permutations of the input slots.
    ///
    /// No-op when there is at most one distinguishable slot arrangement.
    pub fn symmetrize(&self) -> Self {
        if self.order <= 1 || self.dim_in == 1 {
            return self.clone();
        }
        let perms = permutations(self.order);
        let inv_count = T::one() / T::from_usize_exact(perms.len());
        let block = self.block();
        let mut out = Tensor::zeros(self.dim_out, self.dim_in, self.order);
        let mut idx = vec![0usize; self.order];
        let mut pidx = vec![0usize; self.order];
        for a in 0..self.dim_out {
            idx.iter_mut().for_each(|j| *j = 0);
            for flat in 0..block {
                let mut acc = T::zero();
                for perm in &perms {
                    for (slot, &p) in perm.iter().enumerate() {
                        pidx[slot] = idx[p];
                    }
                    acc = acc + self.data[a * block + self.flat_of(&pidx)];
                }
                out.data[a * block + flat] = acc * inv_count;
                Self::advance(&mut idx, self.dim_in);
            }
        }
        out
    }

    fn flat_of(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for &j in idx {
            f = f * self.dim_in + j;
        }
        f
    }

    pub fn max_symmetry_defect(&self) -> T {
        self.sub(&self.symmetrize()).max_abs_entry()
    }

    /// Evaluates the multilinear map on `order` vectors of length `dim_in`.
    pub fn apply(&self, vectors: &[&[T]]) -> Vec<T> {
        assert_eq!(vectors.len(), self.order);
        for v in vectors {
            assert_eq!(v.len(), self.dim_in);
        }
        let block = self.block();
        let mut out = vec![T::zero(); self.dim_out];
        let mut idx = vec![0usize; self.order];
        for (a, o) in out.iter_mut().enumerate() {
            idx.iter_mut().for_each(|j| *j = 0);
            let mut acc = T::zero();
            for flat in 0..block {
                let mut w = self.data[a * block + flat];
                for (slot, v) in vectors.iter().enumerate() {
                    w = w * v[idx[slot]];
                }
                acc = acc + w;
                Self::advance(&mut idx, self.dim_in);
            }
            *o = acc;
        }
        out
    }

    /// Composes every input slot with the square matrix `m` (order-1 tensor):
    /// `result(v_1, ..., v_k) = self(m v_1, ..., m v_k)`.
    pub fn substitute(&self, m: &Tensor<T>) -> Self {
        assert_eq!(m.order, 1);
        assert_eq!(m.dim_out, self.dim_in);
        assert_eq!(m.dim_in, self.dim_in);
        let d = self.dim_in;
        let mut cur = self.clone();
        for slot in 0..self.order {
            let mut next = Tensor::zeros(self.dim_out, d, self.order);
            let block = cur.block();
            let mut idx = vec![0usize; self.order];
            for a in 0..self.dim_out {
                idx.iter_mut().for_each(|j| *j = 0);
                for flat in 0..block {
                    // next[a][.. j_slot ..] = sum_b cur[a][.. b ..] * m[b][j_slot]
                    let j = idx[slot];
                    let mut acc = T::zero();
                    let mut bidx = idx.clone();
                    for b in 0..d {
                        bidx[slot] = b;
                        acc = acc + cur.data[a * block + cur.flat_of(&bidx)] * m.data[b * d + j];
                    }
                    next.data[a * block + flat] = acc;
                    Self::advance(&mut idx, d);
                }
            }
            cur = next;
        }
        cur
    }

    /// Determinant of a square order-1 tensor, `dim <= 3`.
    pub fn det(&self) -> T {
        assert_eq!(self.order, 1);
        assert_eq!(self.dim_out, self.dim_in, "determinant needs a square matrix");
        let d = self.dim_in;
        let m = |i: usize, j: usize| self.data[i * d + j];
        match d {
            1 => m(0, 0),
            2 => m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0),
            3 => {
                m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
                    - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                    + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
            }
            _ => panic!("determinant implemented for dim <= 3, got {d}"),
        }
    }

    /// Adjugate-based inverse of a square order-1 tensor, `dim <= 3`.
    pub fn matrix_inverse(&self) -> Result<Self> {
        assert_eq!(self.order, 1);
        assert_eq!(self.dim_out, self.dim_in);
        let det = self.det();
        if !det.is_finite() || det.abs() <= T::lit(DET_FLOOR) {
            return Err(Error::SingularOrFarFromIdentity {
                det: det.to_f64_lossy(),
                floor: DET_FLOOR,
            });
        }
        let d = self.dim_in;
        let m = |i: usize, j: usize| self.data[i * d + j];
        let inv_det = T::one() / det;
        let mut out = Tensor::zeros(d, d, 1);
        match d {
            1 => out.data[0] = inv_det,
            2 => {
                out.data[0] = m(1, 1) * inv_det;
                out.data[1] = -m(0, 1) * inv_det;
                out.data[2] = -m(1, 0) * inv_det;
                out.data[3] = m(0, 0) * inv_det;
            }
            3 => {
                for i in 0..3 {
                    for j in 0..3 {
                        let r = [(i + 1) % 3, (i + 2) % 3];
                        let c = [(j + 1) % 3, (j + 2) % 3];
                        // transpose of the cofactor matrix
                        out.data[j * 3 + i] =
                            (m(r[0], c[0]) * m(r[1], c[1]) - m(r[0], c[1]) * m(r[1], c[0]))
                                * inv_det;
                    }
                }
            }
            _ => panic!("inverse implemented for dim <= 3, got {d}"),
        }
        Ok(out)
    }

    /// Matrix product `self * rhs` of order-1 tensors.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.order, 1);
        assert_eq!(rhs.order, 1);
        assert_eq!(self.dim_in, rhs.dim_out);
        let mut out = Tensor::zeros(self.dim_out, rhs.dim_in, 1);
        for i in 0..self.dim_out {
            for j in 0..rhs.dim_in {
                let mut acc = T::zero();
                for b in 0..self.dim_in {
                    acc = acc + self.data[i * self.dim_in + b] * rhs.data[b * rhs.dim_in + j];
                }
                out.data[i * rhs.dim_in + j] = acc;
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.order, 1);
        assert_eq!(v.len(), self.dim_in);
        (0..self.dim_out)
            .map(|i| {
                let mut acc = T::zero();
                for j in 0..self.dim_in {
                    acc = acc + self.data[i * self.dim_in + j] * v[j];
                }
                acc
            })
            .collect()
    }

    /// Operator norm `sup_{|v_i| = 1} |T(v_1,...,v_k)|`.
    ///
    /// Exact for `order == 0` (Euclidean norm of the value), for `dim_in == 1`
    /// (single column), and for `order == 1` (largest singular value by power
    /// iteration). Otherwise a sampled lower bound over `budget` random unit
    /// tuples plus all coordinate tuples.
    pub fn opnorm(&self, budget: usize) -> T {
        if self.order == 0 || self.dim_in == 1 {
            return euclidean(&self.columns_norm_source());
        }
        if self.order == 1 {
            return self.singular_value_max();
        }
        self.opnorm_sampled(budget)
    }

    fn columns_norm_source(&self) -> Vec<T> {
        // dim_in == 1 or order == 0: exactly one column of length dim_out.
        self.data.clone()
    }

    /// Largest singular value of an order-1 tensor via power iteration on
    /// `A^T A`, to relative tolerance 1e-12.
    pub fn singular_value_max(&self) -> T {
        assert_eq!(self.order, 1);
        let d = self.dim_in;
        let m = self.dim_out;
        let frob: T = self.data.iter().map(|v| *v * *v).sum::<T>().sqrt();
        if frob == T::zero() {
            return T::zero();
        }
        // v <- A^T A v; the Rayleigh quotient converges even with clustered
        // spectrum because its error is bounded by the eigenvalue gap itself.
        let mut v: Vec<T> = (0..d)
            .map(|i| T::one() + T::lit(1e-3) * T::from_usize_exact(i + 1))
            .collect();
        normalize(&mut v);
        let mut lambda = T::zero();
        for _ in 0..20_000 {
            let mut av = vec![T::zero(); m];
            for i in 0..m {
                let mut acc = T::zero();
                for j in 0..d {
                    acc = acc + self.data[i * d + j] * v[j];
                }
                av[i] = acc;
            }
            let mut w = vec![T::zero(); d];
            for j in 0..d {
                let mut acc = T::zero();
                for i in 0..m {
                    acc = acc + self.data[i * d + j] * av[i];
                }
                w[j] = acc;
            }
            let new_lambda: T = v.iter().zip(&w).map(|(a, b)| *a * *b).sum();
            let diff = (new_lambda - lambda).abs();
            lambda = new_lambda;
            let norm_w = euclidean(&w);
            if norm_w == T::zero() {
                return T::zero();
            }
            v = w;
            normalize(&mut v);
            if diff <= T::lit(1e-12) * lambda.abs().max(T::lit(1e-300)) {
                break;
            }
        }
        lambda.max(T::zero()).sqrt()
    }

    fn opnorm_sampled(&self, budget: usize) -> T {
        let d = self.dim_in;
        let mut best = T::zero();
        // All coordinate tuples: |T(e_{j_1},...,e_{j_k})| is the Euclidean
        // norm of one column.
        let block = self.block();
        for flat in 0..block {
            let mut acc = T::zero();
            for a in 0..self.dim_out {
                let v = self.data[a * block + flat];
                acc = acc + v * v;
            }
            best = best.max(acc.sqrt());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(OPNORM_STREAM);
        let mut vectors = vec![vec![T::zero(); d]; self.order];
        for _ in 0..budget {
            for v in vectors.iter_mut() {
                loop {
                    for x in v.iter_mut() {
                        *x = T::lit(rng.gen_range(-1.0..1.0f64));
                    }
                    if euclidean(v) > T::lit(1e-3) {
                        break;
                    }
                }
                normalize(v);
            }
            let refs: Vec<&[T]> = vectors.iter().map(|v| v.as_slice()).collect();
            let image = self.apply(&refs);
            best = best.max(euclidean(&image));
        }
        best
    }
}

pub fn euclidean<T: Real>(v: &[T]) -> T {
    v.iter().map(|x| *x * *x).sum::<T>().sqrt()
}

fn normalize<T: Real>(v: &mut [T]) {
    let n = euclidean(v);
    if n > T::zero() {
        for x in v.iter_mut() {
            *x = *x / n;
        }
    }
}

/// All permutations of `0..n` (n <= 6 in practice).
fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    heap_permute(&mut items, n, &mut out);
    out
}

fn heap_permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..k {
        heap_permute(items, k - 1, out);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2(entries: [[f64; 2]; 2]) -> Tensor<f64> {
        Tensor::from_fn(2, 2, 1, |a, idx| entries[a][idx[0]])
    }

    #[test]
    fn determinant_and_inverse_2d() {
        let a = t2([[2.0, 1.0], [1.0, 3.0]]);
        assert!((a.det() - 5.0).abs() < 1e-15);
        let inv = a.matrix_inverse().unwrap();
        let id = a.matmul(&inv);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((id.get(i, &[j]) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn determinant_3d_matches_cofactor_expansion() {
        let m = [[2.0, 0.5, -1.0], [0.0, 1.5, 0.25], [-0.5, 0.0, 3.0]];
        let a = Tensor::from_fn(3, 3, 1, |i, idx| m[i][idx[0]]);
        let inv = a.matrix_inverse().unwrap();
        let id = a.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let expect: f64 = if i == j { 1.0 } else { 0.0 };
                assert!((id.get(i, &[j]) - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = t2([[1.0, 2.0], [2.0, 4.0]]);
        assert!(matches!(
            a.matrix_inverse(),
            Err(Error::SingularOrFarFromIdentity { .. })
        ));
    }

    #[test]
    fn symmetrize_averages_slots() {
        let mut t = Tensor::<f64>::zeros(1, 2, 2);
        t.set(0, &[0, 1], 2.0);
        let s = t.symmetrize();
        assert!((s.get(0, &[0, 1]) - 1.0).abs() < 1e-15);
        assert!((s.get(0, &[1, 0]) - 1.0).abs() < 1e-15);
        assert_eq!(s.get(0, &[0, 0]), 0.0);
        assert!(s.max_symmetry_defect() < 1e-15);
    }

    #[test]
    fn substitute_composes_slots_with_matrix() {
        // T(v, w) = v_0 * w_1; M = [[0,1],[1,0]] swaps coordinates.
        let mut t = Tensor::<f64>::zeros(1, 2, 2);
        t.set(0, &[0, 1], 1.0);
        let m = t2([[0.0, 1.0], [1.0, 0.0]]);
        let s = t.substitute(&m);
        // s(v, w) = t(Mv, Mw) = (Mv)_0 (Mw)_1 = v_1 w_0
        assert_eq!(s.get(0, &[1, 0]), 1.0);
        assert_eq!(s.get(0, &[0, 1]), 0.0);
    }

    #[test]
    fn opnorm_matches_hand_computed_singular_value() {
        // diag(3, 1): largest singular value 3.
        let a = t2([[3.0, 0.0], [0.0, 1.0]]);
        assert!((a.singular_value_max() - 3.0).abs() < 1e-11);
        // Rotation by 90 degrees has opnorm 1.
        let r = t2([[0.0, -1.0], [1.0, 0.0]]);
        assert!((r.singular_value_max() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn opnorm_dim_one_is_exact() {
        let mut t = Tensor::<f64>::zeros(2, 1, 3);
        t.set(0, &[0, 0, 0], 3.0);
        t.set(1, &[0, 0, 0], 4.0);
        assert!((t.opnorm(8) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn sampled_opnorm_is_a_lower_bound_close_for_rank_one() {
        // T(v, w) = v_0 w_0, opnorm exactly 1, attained at coordinate tuple.
        let mut t = Tensor::<f64>::zeros(1, 2, 2);
        t.set(0, &[0, 0], 1.0);
        let est = t.opnorm(64);
        assert!(est <= 1.0 + 1e-12);
        assert!(est >= 1.0 - 1e-12, "coordinate tuples make this exact");
    }

    #[test]
    fn apply_contracts_all_slots() {
        let mut t = Tensor::<f64>::zeros(1, 2, 2);
        t.set(0, &[0, 1], 1.0);
        let v = [2.0, 0.0];
        let w = [0.0, 5.0];
        let out = t.apply(&[&v, &w]);
        assert_eq!(out, vec![10.0]);
    }
}
