//! Cross-exponent consistency checks on sampled norm estimates.

use crate::error::{Error, Result};
use crate::hoelder::{
    hoelder_norm_from, FieldTable, NormEstimate, PairScan, DEFAULT_OPNORM_BUDGET,
    DEFAULT_PAIR_BUDGET,
};
use crate::jets::evaluator::JetEvaluator;
use crate::hoelder::SampleGrid;
use crate::scalar::Real;

/// Relative slack for the interpolation inequality. All three norms come
/// from one table and one pair scan, so the bound holds pairwise exactly
/// and only rounding can break it.
pub const INTERPOLATION_SLACK: f64 = 1e-12;

/// Relative slack for the inclusion bound; its right side is a genuine
/// analytic constant, not a per-pair identity, so allow sampling noise.
pub const INCLUSION_SLACK: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct InterpolationCheck<T> {
    pub alpha: T,
    pub beta_mid: T,
    pub gamma: T,
    pub mu: T,
    pub norm_alpha: NormEstimate<T>,
    pub norm_mid: NormEstimate<T>,
    pub norm_gamma: NormEstimate<T>,
    pub lhs: T,
    pub rhs: T,
    pub pass: bool,
}

/// Checks `|f|_{n,b} <= |f|_{n,a}^mu |f|_{n,g}^(1-mu)` with
/// `mu = (g - b) / (g - a)` on one shared sample set.
pub fn verify_interpolation<T: Real>(
    table: &FieldTable<T>,
    scan: &PairScan<T>,
    n: usize,
    alpha: T,
    beta_mid: T,
    gamma: T,
) -> Result<InterpolationCheck<T>> {
    if !(alpha > T::zero() && alpha < beta_mid && beta_mid < gamma && gamma <= T::one()) {
        return Err(Error::invalid(format!(
            "need 0 < a < b < g <= 1, got a={alpha} b={beta_mid} g={gamma}"
        )));
    }
    let na = hoelder_norm_from(table, scan, n, alpha, DEFAULT_OPNORM_BUDGET)?;
    let nb = hoelder_norm_from(table, scan, n, beta_mid, DEFAULT_OPNORM_BUDGET)?;
    let ng = hoelder_norm_from(table, scan, n, gamma, DEFAULT_OPNORM_BUDGET)?;
    let mu = (gamma - beta_mid) / (gamma - alpha);
    let rhs = na.value.powf(mu) * ng.value.powf(T::one() - mu);
    let lhs = nb.value;
    let slack = T::lit(INTERPOLATION_SLACK);
    let pass = lhs <= rhs * (T::one() + slack) + slack;
    Ok(InterpolationCheck {
        alpha,
        beta_mid,
        gamma,
        mu,
        norm_alpha: na,
        norm_mid: nb,
        norm_gamma: ng,
        lhs,
        rhs,
        pass,
    })
}

/// Field-level wrapper building the shared table and scan once.
pub fn verify_interpolation_field<T: Real>(
    field: &JetEvaluator<T>,
    grid: &SampleGrid<T>,
    n: usize,
    alpha: T,
    beta_mid: T,
    gamma: T,
) -> Result<InterpolationCheck<T>> {
    let table = FieldTable::build(field, grid, n)?;
    let scan = PairScan::build(&table, n, DEFAULT_PAIR_BUDGET, DEFAULT_OPNORM_BUDGET)?;
    verify_interpolation(&table, &scan, n, alpha, beta_mid, gamma)
}

#[derive(Debug, Clone)]
pub struct InclusionCheck<T> {
    pub coarse: (usize, T),
    pub fine: (usize, T),
    pub lhs: T,
    pub rhs: T,
    pub pass: bool,
}

/// Checks `|f|_{m,a} <= 2 |f|_{n,b}` for `m + a <= n + b`, `m <= n`.
pub fn verify_inclusion<T: Real>(
    field: &JetEvaluator<T>,
    grid: &SampleGrid<T>,
    coarse: (usize, T),
    fine: (usize, T),
) -> Result<InclusionCheck<T>> {
    let (m, a) = coarse;
    let (n, b) = fine;
    for e in [a, b] {
        if !(e > T::zero() && e <= T::one()) {
            return Err(Error::invalid("exponents must lie in (0, 1]"));
        }
    }
    if m > n || T::from_usize_exact(m) + a > T::from_usize_exact(n) + b {
        return Err(Error::invalid(format!(
            "inclusion needs m <= n and m + a <= n + b, got ({m},{a}) vs ({n},{b})"
        )));
    }
    let table = FieldTable::build(field, grid, n)?;
    let scan_m = PairScan::build(&table, m, DEFAULT_PAIR_BUDGET, DEFAULT_OPNORM_BUDGET)?;
    let scan_n = PairScan::build(&table, n, DEFAULT_PAIR_BUDGET, DEFAULT_OPNORM_BUDGET)?;
    let lhs = hoelder_norm_from(&table, &scan_m, m, a, DEFAULT_OPNORM_BUDGET)?.value;
    let two = T::lit(2.0);
    let rhs = two * hoelder_norm_from(&table, &scan_n, n, b, DEFAULT_OPNORM_BUDGET)?.value;
    let slack = T::lit(INCLUSION_SLACK);
    let pass = lhs <= rhs * (T::one() + slack) + slack;
    Ok(InclusionCheck {
        coarse,
        fine,
        lhs,
        rhs,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{gaussian_bump, psi_field};
    use crate::jets::evaluator::BoxRegion;

    #[test]
    fn interpolation_holds_for_smooth_and_kinked_fields() {
        let grid = SampleGrid::new(BoxRegion::centered(4.0f64, 1), 1001, &[]).unwrap();
        let smooth = gaussian_bump(1, 1.3f64, vec![0.2], 0.9, 2).unwrap();
        let kinked = psi_field(2, 0.5f64, 1.0, 4.0).unwrap();
        for f in [&smooth, &kinked] {
            for n in [0usize, 1] {
                let c =
                    verify_interpolation_field(f, &grid, n, 0.25, 0.5, 0.75).unwrap();
                assert!(c.pass, "lhs {} rhs {}", c.lhs, c.rhs);
            }
        }
    }

    #[test]
    fn interpolation_mu_is_the_right_convex_weight() {
        let grid = SampleGrid::new(BoxRegion::centered(4.0f64, 1), 501, &[]).unwrap();
        let f = gaussian_bump(1, 1.0f64, vec![0.0], 1.0, 1).unwrap();
        let c = verify_interpolation_field(&f, &grid, 1, 0.2, 0.5, 0.8).unwrap();
        assert!((c.mu - 0.5).abs() < 1e-15);
    }

    #[test]
    fn interpolation_rejects_unordered_exponents() {
        let grid = SampleGrid::new(BoxRegion::centered(1.0f64, 1), 11, &[]).unwrap();
        let f = gaussian_bump(1, 1.0f64, vec![0.0], 1.0, 1).unwrap();
        assert!(verify_interpolation_field(&f, &grid, 1, 0.5, 0.5, 0.8).is_err());
        assert!(verify_interpolation_field(&f, &grid, 1, 0.2, 0.9, 0.8).is_err());
    }

    #[test]
    fn inclusion_holds_with_factor_two() {
        let grid = SampleGrid::new(BoxRegion::centered(4.0f64, 1), 1001, &[]).unwrap();
        let f = psi_field(2, 0.75f64, 1.0, 4.0).unwrap();
        let c = verify_inclusion(&f, &grid, (1, 0.9), (2, 0.25), ).unwrap();
        assert!(c.pass, "lhs {} rhs {}", c.lhs, c.rhs);
        let c2 = verify_inclusion(&f, &grid, (2, 0.25), (2, 0.75)).unwrap();
        assert!(c2.pass, "lhs {} rhs {}", c2.lhs, c2.rhs);
    }

    #[test]
    fn inclusion_rejects_wrong_ordering() {
        let grid = SampleGrid::new(BoxRegion::centered(1.0f64, 1), 11, &[]).unwrap();
        let f = gaussian_bump(1, 1.0f64, vec![0.0], 1.0, 2).unwrap();
        assert!(verify_inclusion(&f, &grid, (2, 0.75), (2, 0.25)).is_err());
        assert!(verify_inclusion(&f, &grid, (2, 0.5), (1, 0.9)).is_err());
    }
}
