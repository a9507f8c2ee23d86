//! Deterministic random families for stress tests: bump mixtures, small
//! diffeomorphism charts, and well-conditioned matrices.
//!
//! Everything is driven by a caller-seeded ChaCha8 stream so that test
//! failures replay exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fields::gaussian_bump;
use crate::group::DiffeoField;
use crate::jets::evaluator::JetEvaluator;
use crate::jets::tensor::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sum of `terms` Gaussian bumps with amplitudes in `[-amp, amp]`,
/// centers in `[-1.5, 1.5]^d` and widths in `[0.6, 1.4]`.
pub fn random_bump_mixture(
    rng: &mut ChaCha8Rng,
    dim: usize,
    order: usize,
    terms: usize,
    amp: f64,
) -> Result<JetEvaluator<f64>> {
    let mut field: Option<JetEvaluator<f64>> = None;
    for _ in 0..terms.max(1) {
        let a = rng.gen_range(-amp..amp);
        let center: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let width = rng.gen_range(0.6..1.4);
        let bump = gaussian_bump(dim, a, center, width, order)?;
        field = Some(match field {
            None => bump,
            Some(f) => f.sum(&bump)?,
        });
    }
    Ok(field.expect("at least one term"))
}

/// A univariate near-identity diffeomorphism with a random bump-mixture
/// chart, rescaled by halving until the orientation certificate accepts.
pub fn random_diffeo(rng: &mut ChaCha8Rng, order: usize) -> Result<DiffeoField<f64>> {
    let mut chart = random_bump_mixture(rng, 1, order, 3, 0.25)?;
    for _ in 0..20 {
        match DiffeoField::new(chart.clone()) {
            Ok(d) => return Ok(d),
            Err(_) => chart = chart.scale(0.5),
        }
    }
    DiffeoField::new(chart)
}

/// Random `d x d` matrix with entries in `[-1, 1]`, resampled until
/// `|det| >= 0.1` so inverses stay well-conditioned.
pub fn random_matrix(rng: &mut ChaCha8Rng, dim: usize) -> Tensor<f64> {
    loop {
        let entries: Vec<f64> = (0..dim * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = Tensor::from_fn(dim, dim, 1, |out, idx| entries[out * dim + idx[0]]);
        if m.det().abs() >= 0.1 {
            return m;
        }
    }
}

/// Strictly increasing exponent triple `0 < alpha < mid < gamma <= 1`,
/// with gaps of at least 0.05.
pub fn random_exponent_triple(rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
    loop {
        let mut v = [
            rng.gen_range(0.05..1.0),
            rng.gen_range(0.05..1.0),
            rng.gen_range(0.05..1.0),
        ];
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        if v[1] - v[0] >= 0.05 && v[2] - v[1] >= 0.05 {
            return (v[0], v[1], v[2]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_reproducible() {
        let mut a = rng(7);
        let mut b = rng(7);
        let fa = random_bump_mixture(&mut a, 1, 2, 3, 0.3).unwrap();
        let fb = random_bump_mixture(&mut b, 1, 2, 3, 0.3).unwrap();
        for x in [-1.0, 0.0, 0.5] {
            assert_eq!(fa.eval(&[x]).value()[0], fb.eval(&[x]).value()[0]);
        }
        assert_eq!(
            random_matrix(&mut a, 3).data(),
            random_matrix(&mut b, 3).data()
        );
    }

    #[test]
    fn random_diffeos_certify() {
        let mut r = rng(11);
        for _ in 0..5 {
            let d = random_diffeo(&mut r, 2).unwrap();
            assert!(d.min_det() > 0.0);
        }
    }

    #[test]
    fn random_matrices_are_well_conditioned() {
        let mut r = rng(13);
        for dim in 1..=3 {
            for _ in 0..20 {
                assert!(random_matrix(&mut r, dim).det().abs() >= 0.1);
            }
        }
    }

    #[test]
    fn exponent_triples_are_ordered() {
        let mut r = rng(17);
        for _ in 0..50 {
            let (a, m, g) = random_exponent_triple(&mut r);
            assert!(0.0 < a && a < m && m < g && g <= 1.0);
        }
    }
}
