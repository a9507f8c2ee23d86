//! Counterexample experiments around the kink family
//! `psi(x) = x^n |x|^beta chi(x)`.
//!
//! On the cutoff's plateau the n-th derivative is exactly
//! `C |x|^beta` with `C = (n+beta)(n-1+beta)...(1+beta)`, which makes three
//! failure modes quantitative with closed-form witness pairs:
//! right-translating `psi` by a shrinking chart moves it by `O(1/k)` while
//! the pulled-back distance stays above `2C`; the second difference of the
//! translated family diverges like `s^(beta-alpha-gamma)`; and distinct
//! translates of `psi` keep seminorm distance at least `2C` from each
//! other.

use crate::error::{Error, Result};
use crate::fields::{bump_chi, kink_constant, psi_field, CHI_PLATEAU, CHI_SUPPORT};
use crate::flow::least_squares_slope;
use crate::group::orientation_check;
use crate::hoelder::{
    hoelder_norm, FieldTable, PairScan, SampleGrid, DEFAULT_OPNORM_BUDGET,
};
use crate::jets::evaluator::{compose_with_chart, JetEvaluator};
use crate::scalar::Real;

/// Slack absorbing floating-point evaluation of witness quotients.
pub const PATHOLOGY_SLACK: f64 = 1e-9;

/// The kink field together with its cutoff and the plateau constant.
#[derive(Clone)]
pub struct PsiFamily<T> {
    n: usize,
    beta: T,
    constant: T,
    chi: JetEvaluator<T>,
    psi: JetEvaluator<T>,
}

impl<T: Real> PsiFamily<T> {
    /// Builds the family and verifies the plateau identity
    /// `psi^(n)(x) = C |x|^beta` both exactly against the jets (1e-12) and
    /// against central finite differences of `psi^(n-1)` (1e-6 relative).
    pub fn new(n: usize, beta: T) -> Result<Self> {
        if n == 0 || n > 4 {
            return Err(Error::invalid("kink order n must be in 1..=4"));
        }
        if !(beta > T::zero() && beta <= T::one()) {
            return Err(Error::invalid("kink exponent beta must be in (0, 1]"));
        }
        let chi = bump_chi(T::lit(CHI_PLATEAU), T::lit(CHI_SUPPORT), n)?;
        let psi = psi_field(n, beta, T::lit(CHI_PLATEAU), T::lit(CHI_SUPPORT))?;
        let constant = kink_constant(n, beta);
        let family = PsiFamily {
            n,
            beta,
            constant,
            chi,
            psi,
        };
        family.validate()?;
        Ok(family)
    }

    fn validate(&self) -> Result<()> {
        let c = self.constant;
        if !(c > T::zero()) {
            return Err(Error::invalid("plateau constant must be positive"));
        }
        let exact_tol = T::lit(1e-12) * c.max(T::one());
        let fd_tol = T::lit(1e-6);
        let h = T::lit(1e-5);
        for i in 0..100 {
            // odd multiples of 0.01: stays away from the kink at 0
            let x = T::lit(-0.99) + T::lit(0.02) * T::from_usize_exact(i);
            let expected = c * x.abs().powf(self.beta);
            let got = self.nth_deriv(x);
            if (got - expected).abs() > exact_tol {
                return Err(Error::invalid(format!(
                    "plateau identity violated at x = {x}: {got} vs {expected}"
                )));
            }
            let fd = (self.deriv_at(self.n - 1, x + h) - self.deriv_at(self.n - 1, x - h))
                / (h + h);
            if ((fd - got) / expected).abs() > fd_tol {
                return Err(Error::invalid(format!(
                    "finite-difference check failed at x = {x}: {fd} vs {got}"
                )));
            }
        }
        Ok(())
    }

    fn deriv_at(&self, k: usize, x: T) -> T {
        let jet = self.psi.eval(&[x]);
        if k == 0 {
            jet.value()[0]
        } else {
            jet.deriv(k).data()[0]
        }
    }

    fn nth_deriv(&self, x: T) -> T {
        self.deriv_at(self.n, x)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    /// `C = (n+beta)(n-1+beta)...(1+beta)`.
    pub fn constant(&self) -> T {
        self.constant
    }

    pub fn chi(&self) -> &JetEvaluator<T> {
        &self.chi
    }

    pub fn psi(&self) -> &JetEvaluator<T> {
        &self.psi
    }
}

impl<T: Real> std::fmt::Debug for PsiFamily<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PsiFamily")
            .field("n", &self.n)
            .field("beta", &self.beta)
            .field("constant", &self.constant)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct DiscRow<T> {
    pub k: usize,
    /// `|chart_k|_{n,beta} = |chi|_{n,beta} / k`.
    pub chart_norm: T,
    /// Sampled lower bound of `|psi o Phi_k - psi|_{n,beta}` with the
    /// witness pair `(-1/k, 0)` forced into the scan.
    pub witness_bound: T,
    pub pass: bool,
    /// Set when `Id + chi/k` failed its orientation certificate and the
    /// row was not evaluated.
    pub skipped: bool,
}

#[derive(Debug, Clone)]
pub struct DiscReport<T> {
    /// `2 C`, the translation-discontinuity threshold.
    pub threshold: T,
    pub chi_norm: T,
    pub rows: Vec<DiscRow<T>>,
    /// Log-log slope of the chart norm against `k` (exactly -1 by
    /// homogeneity).
    pub chart_slope: Option<T>,
}

/// Moves `psi` by the shrinking charts `Phi_k = Id + chi/k` and tabulates
/// how the pulled-back distance refuses to follow the chart size down.
pub fn disc_experiment<T: Real>(
    family: &PsiFamily<T>,
    k_list: &[usize],
    base_grid: &SampleGrid<T>,
) -> Result<DiscReport<T>> {
    if k_list.is_empty() {
        return Err(Error::invalid("need at least one chart size k"));
    }
    if k_list.iter().any(|&k| k == 0) {
        return Err(Error::invalid("chart sizes must be positive"));
    }
    if base_grid.dim() != 1 {
        return Err(Error::invalid("disc experiment is univariate"));
    }
    let n = family.n();
    let beta = family.beta();
    let threshold = T::lit(2.0) * family.constant();
    let slack = T::lit(PATHOLOGY_SLACK);
    let chi_norm = hoelder_norm(family.chi(), base_grid, n, beta)?.value;
    let cert_grid = SampleGrid::for_field(family.chi())?;
    let mut rows = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let inv_k = T::one() / T::from_usize_exact(k);
        let chart = family.chi().scale(inv_k);
        let chart_norm = chi_norm * inv_k;
        match orientation_check(&chart, &cert_grid) {
            Ok(_) => {}
            Err(Error::NotADiffeomorphism { .. }) => {
                rows.push(DiscRow {
                    k,
                    chart_norm,
                    witness_bound: T::nan(),
                    pass: false,
                    skipped: true,
                });
                continue;
            }
            Err(e) => return Err(e),
        }
        let moved = compose_with_chart(family.psi(), &chart)?;
        let diff = moved.sum(&family.psi().scale(-T::one()))?;
        let pair = (vec![-inv_k], vec![T::zero()]);
        let grid = SampleGrid::new(
            base_grid.box_region().clone(),
            base_grid.points_per_axis(),
            std::slice::from_ref(&pair),
        )?;
        let witness_bound = hoelder_norm(&diff, &grid, n, beta)?.value;
        rows.push(DiscRow {
            k,
            chart_norm,
            witness_bound,
            pass: witness_bound >= threshold - slack,
            skipped: false,
        });
    }
    let fit: Vec<(T, T)> = rows
        .iter()
        .filter(|r| !r.skipped && r.chart_norm > T::zero())
        .map(|r| (T::from_usize_exact(r.k).ln(), r.chart_norm.ln()))
        .collect();
    Ok(DiscReport {
        threshold,
        chi_norm,
        rows,
        chart_slope: least_squares_slope(&fit),
    })
}

#[derive(Debug, Clone)]
pub struct OptimalRow<T> {
    pub s: T,
    /// Witness second-difference quotient
    /// `|th_s^(n)(0) - th_s^(n)(-s) - th_0^(n)(0) + th_0^(n)(-s)| / s^(alpha+gamma)`
    /// for `th_t = psi o (Id + t chi)`.
    pub q: T,
    /// `2 C s^(beta-alpha-gamma)`.
    pub closed_form: T,
    pub rel_err: T,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct OptimalReport<T> {
    /// `beta - alpha - gamma`; negative means the quotient diverges and no
    /// power modulus `t^gamma` can hold.
    pub exponent: T,
    pub rows: Vec<OptimalRow<T>>,
    pub slope: Option<T>,
}

/// Tests a candidate modulus exponent `gamma` for translation continuity:
/// the quotient follows `2C s^(beta-alpha-gamma)` exactly on the plateau.
pub fn optimal_experiment<T: Real>(
    family: &PsiFamily<T>,
    alpha: T,
    gamma: T,
    s_list: &[T],
) -> Result<OptimalReport<T>> {
    let n = family.n();
    let beta = family.beta();
    if !(alpha > T::zero() && alpha < beta) {
        return Err(Error::invalid("need 0 < alpha < beta"));
    }
    if !(gamma > T::zero()) {
        return Err(Error::invalid("need gamma > 0"));
    }
    if s_list.is_empty() {
        return Err(Error::invalid("need at least one offset s"));
    }
    let plateau = T::lit(CHI_PLATEAU);
    let two_c = T::lit(2.0) * family.constant();
    let exponent = beta - alpha - gamma;
    let rel_tol = T::lit(1e-10);
    let mut rows = Vec::with_capacity(s_list.len());
    for &s in s_list {
        if !(s > T::zero() && s < plateau) {
            return Err(Error::invalid(format!(
                "offset s = {s} must lie strictly inside (0, {plateau})"
            )));
        }
        let shifted = compose_with_chart(family.psi(), &family.chi().scale(s))?;
        let a0 = shifted.eval(&[T::zero()]).deriv(n).data()[0];
        let a1 = shifted.eval(&[-s]).deriv(n).data()[0];
        let b0 = family.nth_deriv(T::zero());
        let b1 = family.nth_deriv(-s);
        let q = (a0 - a1 - b0 + b1).abs() / s.powf(alpha + gamma);
        let closed_form = two_c * s.powf(exponent);
        let rel_err = (q - closed_form).abs() / closed_form;
        rows.push(OptimalRow {
            s,
            q,
            closed_form,
            rel_err,
            pass: rel_err <= rel_tol,
        });
    }
    let fit: Vec<(T, T)> = rows
        .iter()
        .filter(|r| r.q > T::zero())
        .map(|r| (r.s.ln(), r.q.ln()))
        .collect();
    Ok(OptimalReport {
        exponent,
        rows,
        slope: least_squares_slope(&fit),
    })
}

#[derive(Debug, Clone)]
pub struct SeparabilityRow<T> {
    pub t: T,
    pub s: T,
    /// Sampled lower bound of `[psi(.-t) - psi(.-s)]_{n,beta}` with the
    /// witness pair `(t, s)` forced into the scan.
    pub bound: T,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct SeparabilityReport<T> {
    pub threshold: T,
    pub rows: Vec<SeparabilityRow<T>>,
    /// Smallest pairwise bound; `None` for fewer than two translates.
    pub min_bound: Option<T>,
}

/// Pairwise seminorm distances along the translation curve
/// `t -> psi(. - t)`: every pair stays at least `2C` apart, so the curve
/// is uniformly discrete.
pub fn separability_gap<T: Real>(
    family: &PsiFamily<T>,
    t_list: &[T],
) -> Result<SeparabilityReport<T>> {
    let plateau = T::lit(CHI_PLATEAU);
    for &t in t_list {
        if !(t >= T::zero() && t <= plateau) {
            return Err(Error::invalid(format!(
                "translation t = {t} must lie in [0, {plateau}]"
            )));
        }
    }
    for (i, &t) in t_list.iter().enumerate() {
        if t_list[i + 1..].iter().any(|&s| s == t) {
            return Err(Error::invalid("translations must be distinct"));
        }
    }
    let n = family.n();
    let beta = family.beta();
    let threshold = T::lit(2.0) * family.constant();
    let slack = T::lit(PATHOLOGY_SLACK);
    // the certified lower bound comes from the forced witness pair; the
    // grid is exploration on top, so a moderate density keeps the full
    // pairwise sweep affordable without weakening any claim
    let ppa = 2001;
    let pair_budget = 20_000;
    let mut rows = Vec::new();
    let mut min_bound: Option<T> = None;
    for i in 0..t_list.len() {
        for j in (i + 1)..t_list.len() {
            let (t, s) = (t_list[i], t_list[j]);
            let diff = family
                .psi()
                .translate(&[t])
                .sum(&family.psi().translate(&[s]).scale(-T::one()))?;
            let pair = (vec![t], vec![s]);
            let grid =
                SampleGrid::new(diff.support().clone(), ppa, std::slice::from_ref(&pair))?;
            let table = FieldTable::build(&diff, &grid, n)?;
            let scan = PairScan::build(&table, n, pair_budget, DEFAULT_OPNORM_BUDGET)?;
            let bound = scan.seminorm(beta, grid.points())?.value;
            min_bound = Some(match min_bound {
                None => bound,
                Some(m) => m.min(bound),
            });
            rows.push(SeparabilityRow {
                t,
                s,
                bound,
                pass: bound >= threshold - slack,
            });
        }
    }
    Ok(SeparabilityReport {
        threshold,
        rows,
        min_bound,
    })
}
