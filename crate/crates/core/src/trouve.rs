//! Reconstruction of time-dependent fields whose flows reproduce given
//! near-identity diffeomorphisms.
//!
//! For a target chart `phi`, the straight path `gamma(t) = Id + t phi`
//! stays invertible whenever `det(I + t dphi) > 0` throughout, and the
//! field that flows along it is `u(t, x) = phi(gamma(t)^{-1}(x))`. The
//! inverse point is found from the implicit equation
//! `tau + t phi(x + tau) = 0`, and the inverse jets come from the full-jet
//! inversion machinery. A path through several diffeomorphisms is a
//! time-rescaled concatenation of straight segments between consecutive
//! relative charts.

use crate::error::{Error, Result};
use crate::flow::{chart_table, integrate_flow, TimeField};
use crate::group::{orientation_check, DiffeoField};
use crate::hoelder::{
    hoelder_norm_from, FieldTable, PairScan, SampleGrid, DEFAULT_OPNORM_BUDGET,
    DEFAULT_PAIR_BUDGET,
};
use crate::jets::evaluator::JetEvaluator;
use crate::jets::tensor::Tensor;
use crate::jets::{full_from_chart, invert_full_jet, jet_compose, Jet};
use crate::scalar::Real;

const IMPLICIT_NEWTON_TOL: f64 = 1e-12;
const IMPLICIT_NEWTON_MAX_ITER: usize = 50;

/// Evenly spaced admissibility sample times in `[0, 1]`.
pub fn default_t_grid<T: Real>() -> Vec<T> {
    let count = 21usize;
    (0..count)
        .map(|i| T::from_usize_exact(i) / T::from_usize_exact(count - 1))
        .collect()
}

/// A straight path `gamma(t) = Id + t phi` certified to stay inside the
/// diffeomorphism group.
#[derive(Clone)]
pub struct SegmentPath<T> {
    phi: JetEvaluator<T>,
    certificate: T,
}

impl<T: Real> SegmentPath<T> {
    /// Certifies `min det(I + t dphi) > 0` over `t_grid` and the default
    /// sample grid of `phi`'s support.
    pub fn new(phi: JetEvaluator<T>, t_grid: &[T]) -> Result<Self> {
        if phi.dim_in() != phi.dim_out() {
            return Err(Error::invalid("segment target must be a square chart"));
        }
        if phi.order() == 0 {
            return Err(Error::invalid("segment target needs jets of order >= 1"));
        }
        if t_grid.is_empty() {
            return Err(Error::invalid("admissibility needs at least one sample time"));
        }
        let grid = SampleGrid::for_field(&phi)?;
        let mut certificate = T::infinity();
        for &t in t_grid {
            if !(T::zero()..=T::one()).contains(&t) {
                return Err(Error::invalid("sample times must lie in [0, 1]"));
            }
            match orientation_check(&phi.scale(t), &grid) {
                Ok(min_det) => {
                    if min_det < certificate {
                        certificate = min_det;
                    }
                }
                Err(Error::NotADiffeomorphism { min_det, .. }) => {
                    return Err(Error::SegmentNotAdmissible {
                        min_det,
                        time: t.to_f64_lossy(),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        Ok(SegmentPath { phi, certificate })
    }

    pub fn phi(&self) -> &JetEvaluator<T> {
        &self.phi
    }

    /// `min det(I + t dphi)` over the sampled times and points.
    pub fn certificate(&self) -> T {
        self.certificate
    }

    /// The reconstruction field `u(t, x) = phi(gamma(t)^{-1}(x))`, smooth
    /// in time.
    pub fn field(&self) -> TimeField<T> {
        let phi = self.phi.clone();
        let dim = phi.dim_in();
        let order = phi.order();
        let bound = phi.value_bound();
        let support = phi.support().inflate(bound + T::lit(1e-9));
        let label = format!("segment({})", phi.label());
        TimeField::time_varying(label, dim, order, support, bound, move |t: T| {
            segment_evaluator(&phi, t)
        })
    }
}

impl<T: Real> std::fmt::Debug for SegmentPath<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SegmentPath")
            .field("phi", &self.phi.label())
            .field("certificate", &self.certificate)
            .finish()
    }
}

/// The field at one fixed time, packaged as a spatial evaluator.
fn segment_evaluator<T: Real>(phi: &JetEvaluator<T>, t: T) -> JetEvaluator<T> {
    let dim = phi.dim_in();
    let order = phi.order();
    let bound = phi.value_bound();
    let support = phi.support().inflate(bound + T::lit(1e-9));
    let phi_inner = phi.clone();
    JetEvaluator::new(
        dim,
        dim,
        order,
        support,
        bound,
        format!("segment({})@{t}", phi.label()),
        move |x: &[T]| match segment_jet(&phi_inner, t, x) {
            Ok(jet) => jet,
            Err(_) => {
                // construction-time certificates make this unreachable for
                // admissible targets; a poisoned jet trips the callers'
                // finiteness checks instead of panicking mid-reduction
                let mut bad = Jet::zero(x.len(), phi_inner.dim_out(), order);
                bad.value_mut().fill(T::nan());
                bad
            }
        },
    )
}

/// Jet of `phi(gamma(t)^{-1}(x))` at `x`.
fn segment_jet<T: Real>(phi: &JetEvaluator<T>, t: T, x: &[T]) -> Result<Jet<T>> {
    let order = phi.order();
    let tau = solve_tau(phi, t, x)?;
    let y: Vec<T> = x.iter().zip(&tau).map(|(xi, ti)| *xi + *ti).collect();
    let phi_at_y = phi.eval(&y);
    // full jet of gamma(t) at y, inverted to the jet of gamma(t)^{-1} at x
    let chart = phi_at_y.scale(t);
    let full = full_from_chart(&chart, &y);
    let inv = invert_full_jet(&full, &y)?;
    jet_compose(&phi_at_y, &inv, order)
}

/// Newton iteration for `tau + t phi(x + tau) = 0`, seeded at
/// `tau = -t phi(x)`.
fn solve_tau<T: Real>(phi: &JetEvaluator<T>, t: T, x: &[T]) -> Result<Vec<T>> {
    let dim = x.len();
    let tol = T::lit(IMPLICIT_NEWTON_TOL);
    let mut tau: Vec<T> = phi.eval(x).value().iter().map(|v| -(*v) * t).collect();
    for _ in 0..IMPLICIT_NEWTON_MAX_ITER {
        let y: Vec<T> = x.iter().zip(&tau).map(|(xi, ti)| *xi + *ti).collect();
        let jet = phi.eval(&y);
        let residual: Vec<T> = tau
            .iter()
            .zip(jet.value())
            .map(|(ti, vi)| *ti + t * *vi)
            .collect();
        let size = residual.iter().map(|r| *r * *r).sum::<T>().sqrt();
        if size <= tol {
            return Ok(tau);
        }
        let mut jac = Tensor::identity(dim);
        let dphi = jet.deriv(1);
        for i in 0..dim {
            for j in 0..dim {
                let v = jac.get(i, &[j]) + t * dphi.get(i, &[j]);
                jac.set(i, &[j], v);
            }
        }
        let step = jac.matrix_inverse()?.matvec(&residual);
        for i in 0..dim {
            tau[i] = tau[i] - step[i];
        }
    }
    Err(Error::NoConvergence {
        residual: {
            let y: Vec<T> = x.iter().zip(&tau).map(|(xi, ti)| *xi + *ti).collect();
            let jet = phi.eval(&y);
            tau.iter()
                .zip(jet.value())
                .map(|(ti, vi)| (*ti + t * *vi) * (*ti + t * *vi))
                .sum::<T>()
                .sqrt()
                .to_f64_lossy()
        },
        iterations: IMPLICIT_NEWTON_MAX_ITER,
        point: x.iter().map(|v| v.to_f64_lossy()).collect(),
    })
}

/// Reconstruction field for one target chart; see [`SegmentPath`].
pub fn segment_field<T: Real>(phi: &JetEvaluator<T>, t_grid: &[T]) -> Result<TimeField<T>> {
    Ok(SegmentPath::new(phi.clone(), t_grid)?.field())
}

/// A path `Id -> vertices[0] -> ... -> vertices[last]` as straight
/// segments between consecutive relative charts, time-rescaled onto
/// `[j/m, (j+1)/m]`. The flow of the result at time 1 targets the last
/// vertex.
pub fn polygon_field<T: Real>(vertices: &[DiffeoField<T>]) -> Result<TimeField<T>> {
    if vertices.is_empty() {
        return Err(Error::invalid("polygon needs at least one vertex"));
    }
    let dim = vertices[0].dim();
    if vertices.iter().any(|v| v.dim() != dim) {
        return Err(Error::invalid("polygon vertices must share dimension"));
    }
    let t_grid = default_t_grid::<T>();
    let mut parts = Vec::with_capacity(vertices.len());
    let mut previous: Option<&DiffeoField<T>> = None;
    for (j, vertex) in vertices.iter().enumerate() {
        let relative = match previous {
            None => vertex.phi().clone(),
            Some(prev) => {
                let step = DiffeoField::compose(vertex, &prev.invert()?)?;
                step.phi().clone()
            }
        };
        let segment = SegmentPath::new(relative, &t_grid).map_err(|e| {
            Error::PolygonNotAdmissible {
                segment: j,
                source: Box::new(e),
            }
        })?;
        parts.push(segment.field());
        previous = Some(vertex);
    }
    TimeField::concat(parts)
}

/// `|Phi_u(1) - (Id + phi)|_{n, alpha}` for the reconstruction field of
/// `phi`, flowed from the grid points with the given step count.
pub fn roundtrip_error<T: Real>(
    phi: &JetEvaluator<T>,
    n: usize,
    alpha: T,
    steps: usize,
    grid: &SampleGrid<T>,
) -> Result<T> {
    let u = segment_field(phi, &default_t_grid())?;
    let traj = integrate_flow(&u, grid.points(), n, steps)?;
    let flowed = chart_table(&traj, grid, n)?;
    let target = FieldTable::build(phi, grid, n)?;
    let diff = flowed.sub(&target)?;
    let scan = PairScan::build(&diff, n, DEFAULT_PAIR_BUDGET, DEFAULT_OPNORM_BUDGET)?;
    Ok(hoelder_norm_from(&diff, &scan, n, alpha, DEFAULT_OPNORM_BUDGET)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{gaussian_bump, plateau_shift};
    use crate::jets::evaluator::BoxRegion;

    #[test]
    fn zero_target_gives_zero_field() {
        let zero = JetEvaluator::<f64>::zero(1, 1, 2);
        let u = segment_field(&zero, &default_t_grid()).unwrap();
        assert_eq!(u.l1_majorant(), 0.0);
        let grid = SampleGrid::new(BoxRegion::centered(1.0, 1), 101, &[]).unwrap();
        let err = roundtrip_error(&zero, 1, 0.5, 16, &grid).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn plateau_shift_segment_is_constant_inside() {
        let c = 0.05f64;
        let phi = plateau_shift(c, 2).unwrap();
        let u = segment_field(&phi, &default_t_grid()).unwrap();
        for t in [0.0, 0.3, 0.7, 1.0] {
            let jet = u.at(t).eval(&[0.2]);
            // gamma(t)^{-1}(x) = x - t c inside the plateau, so u = c there
            assert!((jet.value()[0] - c).abs() < 1e-12, "t={t}");
            assert!(jet.deriv(1).data()[0].abs() < 1e-12);
            assert!(jet.deriv(2).data()[0].abs() < 1e-12);
        }
    }

    #[test]
    fn certificate_matches_orientation_scan() {
        let phi = gaussian_bump(1, 0.3f64, vec![0.1], 1.0, 2).unwrap();
        let t_grid = default_t_grid::<f64>();
        let path = SegmentPath::new(phi.clone(), &t_grid).unwrap();
        let grid = SampleGrid::for_field(&phi).unwrap();
        let manual = t_grid
            .iter()
            .map(|&t| orientation_check(&phi.scale(t), &grid).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!((path.certificate() - manual).abs() <= 1e-12);
        assert!(path.certificate() > 0.0);
    }

    #[test]
    fn steep_target_is_rejected() {
        // amp 1.2 at width 0.5 drives dphi below -1 somewhere
        let phi = gaussian_bump(1, 1.2f64, vec![0.0], 0.5, 1).unwrap();
        let err = SegmentPath::new(phi, &default_t_grid::<f64>()).unwrap_err();
        match err {
            Error::SegmentNotAdmissible { min_det, time } => {
                assert!(min_det <= 0.0);
                assert!(time > 0.0);
            }
            other => panic!("expected inadmissible segment, got {other:?}"),
        }
    }

    #[test]
    fn plateau_shift_roundtrip_is_exact() {
        let phi = plateau_shift(0.05f64, 2).unwrap();
        let grid = SampleGrid::new(BoxRegion::centered(0.5, 1), 101, &[]).unwrap();
        let err = roundtrip_error(&phi, 1, 0.3, 64, &grid).unwrap();
        assert!(err <= 1e-10, "roundtrip error {err}");
    }

    #[test]
    fn gaussian_roundtrip_error_is_small_and_scales() {
        let grid = SampleGrid::new(BoxRegion::centered(2.0f64, 1), 201, &[]).unwrap();
        // coarse stepping keeps truncation error above the fp noise floor
        // so the dependence on the target size is visible
        let mut errs = Vec::new();
        for c in [0.02f64, 0.05, 0.1] {
            let phi = gaussian_bump(1, c, vec![0.0], 1.0, 1).unwrap();
            errs.push(roundtrip_error(&phi, 1, 0.3, 8, &grid).unwrap());
        }
        assert!(errs.iter().all(|e| *e < 1e-4), "errors {errs:?}");
        assert!(errs[0] < errs[1] && errs[1] < errs[2], "errors {errs:?}");
        // refining the step count sharpens the reconstruction
        let phi = gaussian_bump(1, 0.1f64, vec![0.0], 1.0, 1).unwrap();
        let fine = roundtrip_error(&phi, 1, 0.3, 32, &grid).unwrap();
        assert!(fine < errs[2], "fine {fine} vs coarse {}", errs[2]);
    }

    #[test]
    fn polygon_of_two_shifts_lands_on_the_sum() {
        let a = DiffeoField::new(plateau_shift(0.04f64, 2).unwrap()).unwrap();
        let total = DiffeoField::new(plateau_shift(0.07f64, 2).unwrap()).unwrap();
        let u = polygon_field(&[a, total]).unwrap();
        assert_eq!(u.breakpoints(), &[0.5]);
        let seeds: Vec<Vec<f64>> = (0..9).map(|i| vec![-0.4 + 0.1 * i as f64]).collect();
        let traj = integrate_flow(&u, &seeds, 2, 256).unwrap();
        for (state, seed) in traj.final_states().iter().zip(traj.seeds()) {
            assert!(
                (state.value()[0] - seed[0] - 0.07).abs() < 1e-9,
                "endpoint {} from {}",
                state.value()[0],
                seed[0]
            );
        }
    }

    #[test]
    fn polygon_matches_composed_segment_flows() {
        let a = DiffeoField::new(gaussian_bump(1, 0.2f64, vec![0.2], 1.0, 2).unwrap()).unwrap();
        let b = DiffeoField::new(gaussian_bump(1, 0.15f64, vec![-0.3], 0.9, 2).unwrap()).unwrap();
        let ab = DiffeoField::compose(&b, &a).unwrap();
        let u = polygon_field(&[a.clone(), ab]).unwrap();
        let seeds: Vec<Vec<f64>> = (0..9).map(|i| vec![-1.0 + 0.25 * i as f64]).collect();
        let joint = integrate_flow(&u, &seeds, 2, 512).unwrap();
        let first = integrate_flow(&segment_field(a.phi(), &default_t_grid()).unwrap(), &seeds, 2, 256)
            .unwrap();
        let mid: Vec<Vec<f64>> = first
            .final_states()
            .iter()
            .map(|s| s.value().to_vec())
            .collect();
        let second = integrate_flow(
            &segment_field(b.phi(), &default_t_grid()).unwrap(),
            &mid,
            2,
            256,
        )
        .unwrap();
        for i in 0..seeds.len() {
            let composed =
                jet_compose(&second.final_states()[i], &first.final_states()[i], 2).unwrap();
            let gap = composed.max_abs_diff(&joint.final_states()[i]);
            assert!(gap < 1e-8, "seed {i} semigroup gap {gap}");
        }
    }

    #[test]
    fn single_identity_vertex_is_the_zero_field() {
        let id = DiffeoField::<f64>::identity(1, 2);
        let u = polygon_field(&[id]).unwrap();
        assert_eq!(u.l1_majorant(), 0.0);
        assert!(u.breakpoints().is_empty());
    }

    #[test]
    fn polygon_rejects_mismatched_vertices() {
        let a = DiffeoField::<f64>::identity(1, 2);
        let b = DiffeoField::<f64>::identity(2, 2);
        assert!(polygon_field(&[a, b]).is_err());
        assert!(polygon_field::<f64>(&[]).is_err());
    }
}
