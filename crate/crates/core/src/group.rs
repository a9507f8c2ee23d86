//! Near-identity diffeomorphisms `Phi = Id + phi` with positive Jacobian
//! determinant: sampled membership certificates, composition, and inversion
//! with exact jet propagation.
//!
//! Membership is a certificate, not a proof: we verify `det dPhi > 0` on a
//! grid over the chart's support plus the exact limit value 1 outside, and
//! rely on compact support for behavior at infinity.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hoelder::{default_points_per_axis, SampleGrid};
use crate::jets::evaluator::{compose_with_chart, JetEvaluator};
use crate::jets::tensor::Tensor;
use crate::jets::{chart_from_full, full_from_chart, invert_full_jet, Jet};
use crate::scalar::Real;

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
const NEWTON_MAX_HALVINGS: usize = 30;

/// `Phi = Id + phi` with a cached sampled infimum of `det dPhi`.
#[derive(Clone)]
pub struct DiffeoField<T> {
    phi: JetEvaluator<T>,
    min_det: T,
}

impl<T: Real> std::fmt::Debug for DiffeoField<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiffeoField")
            .field("phi", &self.phi.label())
            .field("min_det", &self.min_det)
            .finish()
    }
}

/// Minimum of `det(I + d phi)` over the grid, with the exact value 1
/// verified at a point beyond the support box.
pub fn orientation_check<T: Real>(
    phi: &JetEvaluator<T>,
    grid: &SampleGrid<T>,
) -> Result<T> {
    if phi.dim_in() != phi.dim_out() {
        return Err(Error::invalid("charts must map a space to itself"));
    }
    if phi.order() < 1 {
        return Err(Error::invalid("orientation needs first derivatives"));
    }
    let outside: Vec<T> = phi
        .support()
        .hi()
        .iter()
        .map(|&h| h + T::one())
        .collect();
    let det_outside = jacobian_det(phi, &outside);
    if (det_outside - T::one()).abs() > T::lit(1e-12) {
        return Err(Error::invalid(
            "chart does not vanish outside its support box".to_string(),
        ));
    }
    let best = grid
        .points()
        .par_iter()
        .map(|p| (jacobian_det(phi, p), p.clone()))
        .reduce(
            || (T::infinity(), Vec::new()),
            |a, b| {
                if a.0 < b.0 || (a.0 == b.0 && lex_key_less(&a.1, &b.1)) {
                    a
                } else {
                    b
                }
            },
        );
    if !(best.0 > T::zero()) {
        return Err(Error::NotADiffeomorphism {
            min_det: best.0.to_f64_lossy(),
            witness: best.1.iter().map(|v| v.to_f64_lossy()).collect(),
        });
    }
    Ok(best.0)
}

fn jacobian_det<T: Real>(phi: &JetEvaluator<T>, x: &[T]) -> T {
    let d = phi.dim_in();
    let jet = phi.eval(x);
    jet.deriv(1).add(&Tensor::identity(d)).det()
}

fn lex_key_less<T: Real>(a: &[T], b: &[T]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    a.len() < b.len()
}

impl<T: Real> DiffeoField<T> {
    /// Certifies orientation on a default-density grid over the support.
    pub fn new(phi: JetEvaluator<T>) -> Result<Self> {
        let grid = SampleGrid::new(
            phi.support().clone(),
            default_points_per_axis(phi.dim_in()),
            &[],
        )?;
        DiffeoField::with_grid(phi, &grid)
    }

    pub fn with_grid(phi: JetEvaluator<T>, grid: &SampleGrid<T>) -> Result<Self> {
        let min_det = orientation_check(&phi, grid)?;
        Ok(DiffeoField { phi, min_det })
    }

    pub fn identity(dim: usize, order: usize) -> Self {
        DiffeoField {
            phi: JetEvaluator::zero(dim, dim, order).with_label("id"),
            min_det: T::one(),
        }
    }

    /// The chart `phi = Phi - Id`.
    pub fn phi(&self) -> &JetEvaluator<T> {
        &self.phi
    }

    pub fn dim(&self) -> usize {
        self.phi.dim_in()
    }

    pub fn order(&self) -> usize {
        self.phi.order()
    }

    pub fn min_det(&self) -> T {
        self.min_det
    }

    /// `Phi(x)` as a point.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let jet = self.phi.eval(x);
        x.iter().zip(jet.value()).map(|(a, b)| *a + *b).collect()
    }

    /// Full jet of `Phi` at `x` (value `Phi(x)`, first derivative `I + d phi`).
    pub fn full_jet(&self, x: &[T]) -> Jet<T> {
        full_from_chart(&self.phi.eval(x), x)
    }

    /// `Psi . Phi` via the chart identity `xi = phi + psi(Id + phi)`.
    pub fn compose(outer: &DiffeoField<T>, inner: &DiffeoField<T>) -> Result<DiffeoField<T>> {
        if outer.dim() != inner.dim() {
            return Err(Error::invalid("composition needs matching dimensions"));
        }
        if outer.order() != inner.order() {
            return Err(Error::invalid("composition needs matching jet orders"));
        }
        let pulled = compose_with_chart(&outer.phi, &inner.phi)?;
        let chart = inner.phi.sum(&pulled)?;
        DiffeoField::new(chart)
    }

    pub fn invert(&self) -> Result<DiffeoField<T>> {
        self.invert_with(T::lit(NEWTON_TOL), NEWTON_MAX_ITER)
    }

    /// `Phi^{-1} = Id + tau`: the value of `tau` at `x` comes from a damped
    /// Newton solve of `y + phi(y) = x`, the jets from inverting the full
    /// jet of `Phi` at `y`.
    pub fn invert_with(&self, newton_tol: T, max_iter: usize) -> Result<DiffeoField<T>> {
        let phi = self.phi.clone();
        let order = phi.order();
        // Phi moves points by at most sup|phi|, so the preimage of any x in
        // the inflated box lies in the original support
        let support = phi.support().inflate(phi.value_bound() + T::lit(1e-9));
        // certify the solver where norms will sample it; later closure
        // failures degrade to non-finite jets that table builders reject
        let cert_grid = SampleGrid::new(
            support.clone(),
            default_points_per_axis(phi.dim_in()),
            &[],
        )?;
        let failures: Vec<Error> = cert_grid
            .points()
            .par_iter()
            .filter_map(|x| newton_preimage(&phi, x, newton_tol, max_iter).err())
            .collect();
        if let Some(e) = failures.into_iter().next() {
            return Err(e);
        }
        let phi_for_closure = phi.clone();
        let inverse_chart = JetEvaluator::new(
            phi.dim_in(),
            phi.dim_out(),
            order,
            support,
            phi.value_bound(),
            format!("inv({})", phi.label()),
            move |x: &[T]| {
                inverse_chart_jet(&phi_for_closure, x, newton_tol, max_iter)
                    .unwrap_or_else(|_| {
                        let mut bad = Jet::zero(
                            phi_for_closure.dim_in(),
                            phi_for_closure.dim_out(),
                            order,
                        );
                        bad.value_mut().fill(T::nan());
                        bad
                    })
            },
        );
        DiffeoField::new(inverse_chart)
    }
}

/// Solves `y + phi(y) = x` for `y` (seed `y = x`, step halving on residual
/// growth).
fn newton_preimage<T: Real>(
    phi: &JetEvaluator<T>,
    x: &[T],
    tol: T,
    max_iter: usize,
) -> Result<Vec<T>> {
    let d = phi.dim_in();
    let mut y = x.to_vec();
    let mut res = residual(phi, &y, x);
    let mut res_norm = norm(&res);
    for _ in 0..max_iter {
        if res_norm <= tol {
            return Ok(y);
        }
        let jet = phi.eval(&y);
        let jac = jet.deriv(1).add(&Tensor::identity(d));
        let inv = jac
            .matrix_inverse()
            .map_err(|_| Error::IllConditioned(format!(
                "Jacobian nearly singular near {:?}",
                y.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>()
            )))?;
        let mut step = inv.matvec(&res);
        for _ in 0..NEWTON_MAX_HALVINGS {
            let cand: Vec<T> = y.iter().zip(&step).map(|(a, s)| *a - *s).collect();
            let cand_res = residual(phi, &cand, x);
            let cand_norm = norm(&cand_res);
            if cand_norm < res_norm || res_norm <= tol {
                y = cand;
                res = cand_res;
                res_norm = cand_norm;
                break;
            }
            for s in step.iter_mut() {
                *s = *s * T::lit(0.5);
            }
        }
    }
    if res_norm <= tol {
        Ok(y)
    } else {
        Err(Error::NoConvergence {
            residual: res_norm.to_f64_lossy(),
            iterations: max_iter,
            point: x.iter().map(|v| v.to_f64_lossy()).collect(),
        })
    }
}

fn residual<T: Real>(phi: &JetEvaluator<T>, y: &[T], x: &[T]) -> Vec<T> {
    let v = phi.eval(y);
    y.iter()
        .zip(v.value())
        .zip(x)
        .map(|((a, b), c)| *a + *b - *c)
        .collect()
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|x| *x * *x).sum::<T>().sqrt()
}

fn inverse_chart_jet<T: Real>(
    phi: &JetEvaluator<T>,
    x: &[T],
    tol: T,
    max_iter: usize,
) -> Result<Jet<T>> {
    let y = newton_preimage(phi, x, tol, max_iter)?;
    let full = full_from_chart(&phi.eval(&y), &y);
    let inv_full = invert_full_jet(&full, &y)?;
    // the inverse jet sits at Phi(y); anchor the chart at the requested x
    // (|Phi(y) - x| <= tol) so downstream tables stay grid-aligned
    Ok(chart_from_full(&inv_full, x))
}

/// One instance of the determinant-based bound on the inverse operator
/// norm: `|A^{-1}| <= |det A|^{-1} |A|^{d-1}`.
#[derive(Debug, Clone)]
pub struct MatrixBoundCheck<T> {
    pub dim: usize,
    pub det: T,
    pub lhs: T,
    pub rhs: T,
    pub pass: bool,
}

pub const MATRIX_BOUND_SLACK: f64 = 1e-10;

pub fn inverse_matrix_bound<T: Real>(a: &Tensor<T>) -> Result<MatrixBoundCheck<T>> {
    if a.order() != 1 || a.dim_in() != a.dim_out() {
        return Err(Error::invalid("expected a square matrix"));
    }
    let d = a.dim_in();
    let det = a.det();
    let inv = a
        .matrix_inverse()
        .map_err(|_| Error::invalid(format!("singular matrix, det = {det}")))?;
    let lhs = inv.singular_value_max();
    let norm_a = a.singular_value_max();
    let mut rhs = T::one() / det.abs();
    for _ in 0..d.saturating_sub(1) {
        rhs = rhs * norm_a;
    }
    let pass = lhs <= rhs * (T::one() + T::lit(MATRIX_BOUND_SLACK));
    Ok(MatrixBoundCheck {
        dim: d,
        det,
        lhs,
        rhs,
        pass,
    })
}

/// One instance of the left-translation growth bound
/// `|g(Id+f)|_{1,a} <= 2 |g|_{1,a} (1 + |f|_{1,a})^{1+a}`.
#[derive(Debug, Clone)]
pub struct CompositionBoundCheck<T> {
    pub alpha: T,
    pub norm_f: T,
    pub norm_g: T,
    pub lhs: T,
    pub rhs: T,
    pub pass: bool,
}

pub const COMPOSITION_BOUND_SLACK: f64 = 1e-6;

/// Checks the growth bound at first order. `f` must be a chart (square),
/// `g` any field on the same space.
pub fn composition_bound_check<T: Real>(
    g: &JetEvaluator<T>,
    f: &JetEvaluator<T>,
    alpha: T,
) -> Result<CompositionBoundCheck<T>> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(Error::invalid("exponent must lie in (0, 1]"));
    }
    let composed = compose_with_chart(g, f)?;
    let grid_c = SampleGrid::new(
        composed.support().clone(),
        default_points_per_axis(composed.dim_in()),
        &[],
    )?;
    let lhs = crate::hoelder::hoelder_norm(&composed, &grid_c, 1, alpha)?.value;
    let grid_g = SampleGrid::new(
        g.support().clone(),
        default_points_per_axis(g.dim_in()),
        &[],
    )?;
    let norm_g = crate::hoelder::hoelder_norm(g, &grid_g, 1, alpha)?.value;
    let grid_f = SampleGrid::new(
        f.support().clone(),
        default_points_per_axis(f.dim_in()),
        &[],
    )?;
    let norm_f = crate::hoelder::hoelder_norm(f, &grid_f, 1, alpha)?.value;
    let rhs = T::lit(2.0) * norm_g * (T::one() + norm_f).powf(T::one() + alpha);
    let slack = T::lit(COMPOSITION_BOUND_SLACK);
    let pass = lhs <= rhs * (T::one() + slack) + slack;
    Ok(CompositionBoundCheck {
        alpha,
        norm_f,
        norm_g,
        lhs,
        rhs,
        pass,
    })
}

#[derive(Debug, Clone)]
pub struct InvContinuityRow<T> {
    pub eps: T,
    /// `|inv(phi0) - inv(phi0 + eps w)|_{n,alpha}`.
    pub distance: T,
    /// `|eps w|_{n,alpha}^{beta - alpha}`.
    pub denom: T,
    pub ratio: T,
}

#[derive(Debug, Clone)]
pub struct InvContinuityReport<T> {
    pub w_norm: T,
    pub rows: Vec<InvContinuityRow<T>>,
    pub max_ratio: T,
}

/// How fast inverses drift when the chart is perturbed: for each `eps`
/// the inverse charts of `Id + phi0` and `Id + phi0 + eps w` are compared
/// in the `(n, alpha)` norm against `|eps w|_{n,alpha}^{beta-alpha}`.
/// Boundedness of the ratio across dyadic `eps` is the interesting output.
pub fn inversion_continuity_experiment<T: Real>(
    phi0: &JetEvaluator<T>,
    w: &JetEvaluator<T>,
    eps_list: &[T],
    n: usize,
    alpha: T,
    beta: T,
    grid: &SampleGrid<T>,
) -> Result<InvContinuityReport<T>> {
    if !(alpha > T::zero() && alpha < beta && beta <= T::one()) {
        return Err(Error::invalid("need 0 < alpha < beta <= 1"));
    }
    if eps_list.is_empty() {
        return Err(Error::invalid("need at least one perturbation size"));
    }
    let grid_w = SampleGrid::new(
        w.support().clone(),
        default_points_per_axis(w.dim_in()),
        &[],
    )?;
    let w_norm = crate::hoelder::hoelder_norm(w, &grid_w, n, alpha)?.value;
    let base = DiffeoField::new(phi0.clone())?.invert()?;
    let mut rows = Vec::with_capacity(eps_list.len());
    let mut max_ratio = T::zero();
    for &eps in eps_list {
        let perturbed = DiffeoField::new(phi0.sum(&w.scale(eps))?)?.invert()?;
        let diff = base.phi().sum(&perturbed.phi().scale(-T::one()))?;
        let table = crate::hoelder::FieldTable::build(&diff, grid, n)?;
        let scan = crate::hoelder::PairScan::build(
            &table,
            n,
            crate::hoelder::DEFAULT_PAIR_BUDGET,
            crate::hoelder::DEFAULT_OPNORM_BUDGET,
        )?;
        let distance = crate::hoelder::hoelder_norm_from(
            &table,
            &scan,
            n,
            alpha,
            crate::hoelder::DEFAULT_OPNORM_BUDGET,
        )?
        .value;
        let denom = (eps * w_norm).powf(beta - alpha);
        let ratio = if denom == T::zero() {
            T::zero()
        } else {
            distance / denom
        };
        if ratio > max_ratio {
            max_ratio = ratio;
        }
        rows.push(InvContinuityRow {
            eps,
            distance,
            denom,
            ratio,
        });
    }
    Ok(InvContinuityReport {
        w_norm,
        rows,
        max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{gaussian_bump, plateau_shift};
    use crate::hoelder::{sup_norm, FieldTable};

    fn shift_diffeo(c: f64, order: usize) -> DiffeoField<f64> {
        DiffeoField::new(plateau_shift(c, order).unwrap()).unwrap()
    }

    #[test]
    fn identity_has_unit_determinant_and_trivial_inverse() {
        let id = DiffeoField::<f64>::identity(1, 2);
        assert_eq!(id.min_det(), 1.0);
        let inv = id.invert().unwrap();
        assert_eq!(inv.phi().eval(&[0.3]).value()[0], 0.0);
    }

    #[test]
    fn plateau_shift_certificate_and_inverse_value() {
        let p = shift_diffeo(0.05, 2);
        // min over the support of 1 + 0.05 chi'; |chi'| < 1 so well positive
        assert!(p.min_det() > 0.9 && p.min_det() < 1.0);
        let inv = p.invert().unwrap();
        // on the plateau Phi(x) = x + c, so tau = -c and dtau = 0
        let jet = inv.phi().eval(&[0.0]);
        assert!((jet.value()[0] + 0.05).abs() < 1e-12);
        assert!(jet.deriv(1).data()[0].abs() < 1e-12);
    }

    #[test]
    fn orientation_rejects_folding_charts() {
        // narrow tall bump: max |phi'| = 1.2 sqrt(2/e) / 0.5 > 2, so
        // 1 + phi' changes sign and x + phi(x) folds
        let steep = gaussian_bump(1, 1.2f64, vec![0.0], 0.5, 1).unwrap();
        let err = DiffeoField::new(steep).unwrap_err();
        assert!(matches!(err, Error::NotADiffeomorphism { .. }));
    }

    #[test]
    fn compose_adds_plateau_shifts() {
        let a = shift_diffeo(0.04, 2);
        let b = shift_diffeo(0.03, 2);
        let c = DiffeoField::compose(&a, &b).unwrap();
        // inner region: both bumps are flat 1, so the shifts add
        let v = c.phi().eval(&[0.1]);
        assert!((v.value()[0] - 0.07).abs() < 1e-14);
        assert!(v.deriv(1).data()[0].abs() < 1e-14);
    }

    #[test]
    fn determinant_is_multiplicative_under_composition() {
        let a = DiffeoField::new(gaussian_bump(1, 0.2f64, vec![0.4], 1.0, 2).unwrap()).unwrap();
        let b = DiffeoField::new(gaussian_bump(1, -0.15f64, vec![-0.3], 0.8, 2).unwrap()).unwrap();
        let c = DiffeoField::compose(&a, &b).unwrap();
        for i in 0..50 {
            let x = [-2.5 + 0.1 * i as f64];
            let lhs = c.full_jet(&x).deriv(1).det();
            let bx = b.apply(&x);
            let rhs = a.full_jet(&bx).deriv(1).det() * b.full_jet(&x).deriv(1).det();
            assert!((lhs - rhs).abs() < 1e-10, "at {:?}: {} vs {}", x, lhs, rhs);
        }
    }

    #[test]
    fn inverse_round_trip_is_identity() {
        let phi = gaussian_bump(1, 0.3f64, vec![0.2], 1.1, 3).unwrap();
        let p = DiffeoField::new(phi).unwrap();
        let inv = p.invert().unwrap();
        let round = DiffeoField::compose(&p, &inv).unwrap();
        let grid = SampleGrid::new(round.phi().support().clone(), 601, &[]).unwrap();
        let table = FieldTable::build(round.phi(), &grid, 1).unwrap();
        let resid = sup_norm(&table, 0, 8).unwrap().value;
        assert!(resid < 1e-9, "round trip residual {resid}");
    }

    #[test]
    fn double_inversion_returns_the_original() {
        let phi = gaussian_bump(1, 0.25f64, vec![-0.1], 0.9, 2).unwrap();
        let p = DiffeoField::new(phi.clone()).unwrap();
        let back = p.invert().unwrap().invert().unwrap();
        for i in 0..40 {
            let x = [-3.0 + 0.15 * i as f64];
            let a = phi.eval(&x);
            let b = back.phi().eval(&x);
            assert!(a.max_abs_diff(&b) < 1e-8, "at {:?}", x);
        }
    }

    #[test]
    fn matrix_bound_identity_and_diagonal() {
        let id = Tensor::<f64>::identity(2);
        let c = inverse_matrix_bound(&id).unwrap();
        assert!(c.pass);
        assert!((c.lhs - 1.0).abs() < 1e-10 && (c.rhs - 1.0).abs() < 1e-10);
        let mut diag = Tensor::<f64>::zeros(2, 2, 1);
        diag.set(0, &[0], 2.0);
        diag.set(1, &[1], 0.5);
        let c = inverse_matrix_bound(&diag).unwrap();
        // |A^{-1}| = 2 and |det|^{-1} |A| = 1 * 2: equality case
        assert!((c.lhs - 2.0).abs() < 1e-9);
        assert!((c.rhs - 2.0).abs() < 1e-9);
        assert!(c.pass);
    }

    #[test]
    fn matrix_bound_rejects_singular_input() {
        let z = Tensor::<f64>::zeros(2, 2, 1);
        assert!(inverse_matrix_bound(&z).is_err());
    }

    #[test]
    fn composition_bound_holds_on_sample_pairs() {
        let g = gaussian_bump(1, 0.8f64, vec![0.3], 1.0, 1).unwrap();
        let f = gaussian_bump(1, 0.4f64, vec![-0.2], 1.2, 1).unwrap();
        let c = composition_bound_check(&g, &f, 0.5).unwrap();
        assert!(c.pass, "lhs {} rhs {}", c.lhs, c.rhs);
        assert!(c.lhs > 0.0 && c.rhs >= 2.0 * c.norm_g);
    }

    #[test]
    fn inversion_continuity_zero_perturbation_gives_zero_ratios() {
        let phi0 = gaussian_bump(1, 0.2f64, vec![0.0], 1.0, 1).unwrap();
        let w = JetEvaluator::zero(1, 1, 1);
        let grid = SampleGrid::new(phi0.support().inflate(0.5), 301, &[]).unwrap();
        let rep =
            inversion_continuity_experiment(&phi0, &w, &[0.5, 0.25], 1, 0.3, 0.9, &grid)
                .unwrap();
        assert_eq!(rep.max_ratio, 0.0);
        assert!(rep.rows.iter().all(|r| r.distance == 0.0 && r.ratio == 0.0));
    }

    #[test]
    fn inversion_continuity_smooth_ratios_decay() {
        let phi0 = gaussian_bump(1, 0.15f64, vec![0.1], 1.0, 1).unwrap();
        let w = gaussian_bump(1, 0.1f64, vec![-0.2], 0.9, 1).unwrap();
        let grid = SampleGrid::new(phi0.support().inflate(0.5), 401, &[]).unwrap();
        let eps = [0.5, 0.25, 0.125, 0.0625];
        let rep = inversion_continuity_experiment(&phi0, &w, &eps, 1, 0.3, 0.9, &grid).unwrap();
        assert!(rep.max_ratio.is_finite() && rep.max_ratio > 0.0);
        // smooth perturbations beat the beta - alpha exponent, so the
        // ratios shrink with eps
        assert!(rep.rows.last().unwrap().ratio < rep.rows[0].ratio);
    }

    #[test]
    fn newton_solver_finds_preimages_off_grid() {
        let phi = gaussian_bump(1, 0.3f64, vec![0.0], 1.0, 1).unwrap();
        let x = [0.123456];
        let y = newton_preimage(&phi, &x, 1e-13, 50).unwrap();
        let v = phi.eval(&y);
        assert!((y[0] + v.value()[0] - x[0]).abs() < 1e-12);
    }

    #[test]
    fn inverse_support_box_is_inflated() {
        let phi = gaussian_bump(1, 0.3f64, vec![0.0], 1.0, 1).unwrap();
        let p = DiffeoField::new(phi.clone()).unwrap();
        let inv = p.invert().unwrap();
        let hi = inv.phi().support().hi()[0];
        assert!(hi >= phi.support().hi()[0] + 0.3 - 1e-9);
    }
}
