//! Built-in analytic fields.
//!
//! The zoo understood by [`parse_field`]:
//!
//! * `zero` - the zero field
//! * `chi` - smooth cutoff, identically 1 on `[-1, 1]`, supported in `[-4, 4]`
//! * `plateau-shift:c` - `c * chi(x)`, a constant shift on the inner plateau
//! * `gaussian:a` - `a * exp(-x^2)` (product form in higher dimension)
//! * `psi:n:beta` - `x^n |x|^beta chi(x)`, the minimal-regularity kink field
//!
//! Mixtures are sums joined with `+`, e.g. `gaussian:0.1+psi:1:0.5`.
//!
//! All jets come from truncated Taylor arithmetic ([`series`]) or, for the
//! kink family on its plateau, from the closed form
//! `psi^(k)(x) = (n+b)(n-1+b)...(n-k+1+b) x^(n-k) |x|^b`.

pub mod series;

use crate::error::{Error, Result};
use crate::jets::evaluator::{BoxRegion, JetEvaluator};
use crate::jets::tensor::Tensor;
use crate::jets::Jet;
use crate::scalar::Real;

use series::{jet_from_series, Series};

/// Inner plateau radius of the default cutoff.
pub const CHI_PLATEAU: f64 = 1.0;
/// Support radius of the default cutoff. The transition width 3 keeps the
/// slope certificate `max |chi'| < 1` comfortably satisfied (it is 2/3).
pub const CHI_SUPPORT: f64 = 4.0;

/// `prod_{i=0}^{k-1} (n + beta - i)`, the coefficient in the closed-form
/// plateau derivatives of the kink field.
pub fn falling_product<T: Real>(n: usize, beta: T, k: usize) -> T {
    let mut acc = T::one();
    for i in 0..k {
        acc = acc * (T::from_usize_exact(n) + beta - T::from_usize_exact(i));
    }
    acc
}

/// `C_{n,beta} = (n+beta)(n-1+beta)...(1+beta)`, the plateau value of the
/// n-th derivative of `psi` divided by `|x|^beta`.
pub fn kink_constant<T: Real>(n: usize, beta: T) -> T {
    falling_product(n, beta, n)
}

/// Smooth-step value series: `h(tau) / (h(tau) + h(1 - tau))` with
/// `h(u) = exp(-1/u)`; 0 at `tau <= 0`, 1 at `tau >= 1`.
fn smooth_step<T: Real>(tau: &Series<T>) -> Series<T> {
    let h = tau.recip().neg().exp();
    let one = Series::constant(T::one(), tau.order());
    let hbar = one.sub(tau).recip().neg().exp();
    h.mul(&h.add(&hbar).recip())
}

/// Smooth cutoff: 1 on `[-plateau, plateau]`, 0 outside `[-support, support]`.
///
/// Construction fails if the numerically certified `max |chi'|` reaches 1,
/// which keeps `Id + t * chi` orientation-preserving for all `|t| <= 1`.
pub fn bump_chi<T: Real>(plateau: T, support: T, order: usize) -> Result<JetEvaluator<T>> {
    if !(plateau > T::zero() && support > plateau) {
        return Err(Error::invalid(
            "cutoff needs 0 < plateau < support".to_string(),
        ));
    }
    let eval = move |x: &[T]| chi_jet(x[0], plateau, support, order);
    let field = JetEvaluator::new(
        1,
        1,
        order,
        BoxRegion::centered(support, 1),
        T::one(),
        "chi",
        eval,
    );
    // slope certificate on a fine scan
    let n_scan = 4001;
    let mut max_slope = T::zero();
    for i in 0..n_scan {
        let x = -support
            + T::from_usize_exact(i) * (support + support) / T::from_usize_exact(n_scan - 1);
        let slope = chi_jet(x, plateau, support, 1).deriv(1).data()[0].abs();
        max_slope = max_slope.max(slope);
    }
    if max_slope >= T::one() {
        return Err(Error::invalid(format!(
            "cutoff slope certificate failed: max |chi'| = {max_slope} >= 1"
        )));
    }
    Ok(field)
}

/// Value series of the cutoff at `x`; constant 0 or 1 on the flats.
fn chi_series<T: Real>(x: T, plateau: T, support: T, order: usize) -> Series<T> {
    let ax = x.abs();
    // tau in (0, 1) on the open transition; clamp the exponentially flat
    // tails where exp(-1/tau) underflows anyway
    let guard = T::lit(1e-9);
    let tau0 = (support - ax) / (support - plateau);
    if tau0 <= guard {
        return Series::constant(T::zero(), order);
    }
    if tau0 >= T::one() - guard {
        return Series::constant(T::one(), order);
    }
    let sign = if x >= T::zero() { T::one() } else { -T::one() };
    // |x + t| = sign * (x + t) on the transition (bounded away from 0)
    let abs_series = Series::variable(x, order).scale(sign);
    let tau = Series::constant(support, order)
        .sub(&abs_series)
        .scale(T::one() / (support - plateau));
    smooth_step(&tau)
}

fn chi_jet<T: Real>(x: T, plateau: T, support: T, order: usize) -> Jet<T> {
    jet_from_series(&chi_series(x, plateau, support, order), order)
}

/// `amp * exp(-sum_i ((x_i - c_i)/w)^2)` on `R^d`, with jets exact to
/// rounding. Support is truncated at `7 w` from the center per axis, where
/// the tail is below 1e-21 relative.
pub fn gaussian_bump<T: Real>(
    dim: usize,
    amp: T,
    center: Vec<T>,
    width: T,
    order: usize,
) -> Result<JetEvaluator<T>> {
    if center.len() != dim {
        return Err(Error::invalid("gaussian center must have length d"));
    }
    if !(width > T::zero()) {
        return Err(Error::invalid("gaussian width must be positive"));
    }
    let radius = T::lit(7.0) * width;
    let lo: Vec<T> = center.iter().map(|c| *c - radius).collect();
    let hi: Vec<T> = center.iter().map(|c| *c + radius).collect();
    let support = BoxRegion::new(lo, hi)?;
    let center_for_eval = center.clone();
    let eval = move |x: &[T]| {
        // separable: every mixed partial is a product of per-axis derivatives
        let mut axis_derivs: Vec<Vec<T>> = Vec::with_capacity(dim);
        for i in 0..dim {
            let u = Series::variable(x[i], order)
                .sub(&Series::constant(center_for_eval[i], order))
                .scale(T::one() / width);
            let mut g = u.mul(&u).neg().exp();
            if i == 0 {
                g = g.scale(amp);
            }
            axis_derivs.push((0..=order).map(|k| g.deriv(k)).collect());
        }
        let mut jet = Jet::zero(dim, 1, order);
        jet.value_mut()[0] = axis_derivs.iter().map(|a| a[0]).fold(T::one(), |p, v| p * v);
        for k in 1..=order {
            let t = Tensor::from_fn(1, dim, k, |_, idx| {
                let mut counts = vec![0usize; dim];
                for &j in idx {
                    counts[j] += 1;
                }
                counts
                    .iter()
                    .enumerate()
                    .map(|(axis, &m)| axis_derivs[axis][m])
                    .fold(T::one(), |p, v| p * v)
            });
            jet.set_deriv(k, t);
        }
        jet
    };
    Ok(JetEvaluator::new(
        dim,
        1,
        order,
        support,
        amp.abs(),
        format!("gaussian:{amp}"),
        eval,
    ))
}

/// The kink field `psi(x) = x^n |x|^beta chi(x)` with jets of order exactly
/// `n`; higher orders do not exist for this regularity class.
pub fn psi_field<T: Real>(n: usize, beta: T, plateau: T, support: T) -> Result<JetEvaluator<T>> {
    if n == 0 || !(beta > T::zero() && beta <= T::one()) {
        return Err(Error::invalid(format!(
            "kink field needs n >= 1 and 0 < beta <= 1, got n = {n}, beta = {beta}"
        )));
    }
    if !(plateau > T::zero() && support > plateau) {
        return Err(Error::invalid("kink field needs 0 < plateau < support"));
    }
    let order = n;
    let eval = move |x: &[T]| {
        let x = x[0];
        let ax = x.abs();
        let mut jet = Jet::zero(1, 1, order);
        if ax <= plateau {
            // closed form: psi^(k)(x) = falling_product(n, beta, k) x^(n-k) |x|^beta
            if ax > T::zero() {
                let pow_beta = ax.powf(beta);
                jet.value_mut()[0] = x.powi(n as i32) * pow_beta;
                for k in 1..=order {
                    let v = falling_product(n, beta, k) * x.powi((n - k) as i32) * pow_beta;
                    jet.set_deriv(k, Tensor::from_fn(1, 1, k, |_, _| v));
                }
            }
            return jet;
        }
        // transition region: series product x^n * |x|^beta * chi(x)
        let sign = if x >= T::zero() { T::one() } else { -T::one() };
        let var = Series::variable(x, order);
        let abs_series = var.scale(sign);
        let cutoff = chi_series(x, plateau, support, order);
        let s = var.powi(n as u32).mul(&abs_series.powf(beta)).mul(&cutoff);
        jet_from_series(&s, order)
    };
    Ok(JetEvaluator::new(
        1,
        1,
        order,
        BoxRegion::centered(support, 1),
        support.powf(T::from_usize_exact(n) + beta),
        format!("psi:{n}:{beta}"),
        eval,
    ))
}

/// `c * chi(x)`: equal to the constant `c` on the inner plateau.
pub fn plateau_shift<T: Real>(c: T, order: usize) -> Result<JetEvaluator<T>> {
    let chi = bump_chi(T::lit(CHI_PLATEAU), T::lit(CHI_SUPPORT), order)?;
    Ok(chi.scale(c).with_label(format!("plateau-shift:{c}")))
}

/// `a * x * chi(x)`: the linear field `a x` on the inner plateau, tapered
/// to zero outside. Useful as an exactly solvable flow (exponential
/// stretching) while staying compactly supported.
pub fn linear_plateau_field<T: Real>(a: T, order: usize) -> Result<JetEvaluator<T>> {
    let plateau = T::lit(CHI_PLATEAU);
    let support = T::lit(CHI_SUPPORT);
    let eval = move |x: &[T]| {
        let s = Series::variable(x[0], order)
            .mul(&chi_series(x[0], plateau, support, order))
            .scale(a);
        jet_from_series(&s, order)
    };
    Ok(JetEvaluator::new(
        1,
        1,
        order,
        BoxRegion::centered(support, 1),
        a.abs() * support,
        format!("linear:{a}"),
        eval,
    ))
}

/// Parses a field description from the zoo grammar; see the module docs.
pub fn parse_field<T: Real>(spec: &str, dim: usize, order: usize) -> Result<JetEvaluator<T>> {
    if !(1..=3).contains(&dim) {
        return Err(Error::invalid(format!("d must be 1, 2 or 3, got {dim}")));
    }
    let mut terms = Vec::new();
    for raw in spec.split('+') {
        terms.push(parse_term(raw.trim(), dim, order)?);
    }
    let mut iter = terms.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::invalid("empty field description"))?;
    let mut acc = first;
    for t in iter {
        acc = acc.sum(&t)?;
    }
    Ok(acc.with_label(spec.to_string()))
}

fn parse_term<T: Real>(term: &str, dim: usize, order: usize) -> Result<JetEvaluator<T>> {
    let parts: Vec<&str> = term.split(':').collect();
    let name = parts[0];
    let num = |s: &str| -> Result<T> {
        s.parse::<f64>()
            .map(T::lit)
            .map_err(|_| Error::invalid(format!("bad numeric parameter '{s}' in '{term}'")))
    };
    let arity = |want: usize| -> Result<()> {
        if parts.len() != want + 1 {
            return Err(Error::invalid(format!(
                "field '{name}' takes {want} parameter(s), got {}",
                parts.len() - 1
            )));
        }
        Ok(())
    };
    let require_1d = || -> Result<()> {
        if dim != 1 {
            return Err(Error::invalid(format!("field '{name}' is univariate")));
        }
        Ok(())
    };
    match name {
        "zero" => {
            arity(0)?;
            Ok(JetEvaluator::zero(dim, 1, order))
        }
        "chi" => {
            arity(0)?;
            require_1d()?;
            bump_chi(T::lit(CHI_PLATEAU), T::lit(CHI_SUPPORT), order)
        }
        "plateau-shift" => {
            arity(1)?;
            require_1d()?;
            plateau_shift(num(parts[1])?, order)
        }
        "gaussian" => {
            arity(1)?;
            gaussian_bump(dim, num(parts[1])?, vec![T::zero(); dim], T::one(), order)
        }
        "psi" => {
            arity(2)?;
            require_1d()?;
            let n: usize = parts[1]
                .parse()
                .map_err(|_| Error::invalid(format!("bad kink order '{}'", parts[1])))?;
            if order > n {
                return Err(Error::invalid(format!(
                    "psi:{n}:... has jets only to order {n}, but order {order} was requested"
                )));
            }
            let f = psi_field(n, num(parts[2])?, T::lit(CHI_PLATEAU), T::lit(CHI_SUPPORT))?;
            Ok(f)
        }
        other => Err(Error::invalid(format!("unknown field '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_is_one_on_plateau_and_zero_outside() {
        let chi = bump_chi(1.0f64, 4.0, 3).unwrap();
        for x in [-1.0, -0.3, 0.0, 0.99, 1.0] {
            let j = chi.eval(&[x]);
            assert_eq!(j.value()[0], 1.0, "x={x}");
            for k in 1..=3 {
                assert_eq!(j.deriv(k).data()[0], 0.0, "x={x} k={k}");
            }
        }
        for x in [-4.0, -5.0, 4.0, 7.5] {
            assert_eq!(chi.eval(&[x]).value()[0], 0.0);
        }
        // strictly between 0 and 1 on the open transition
        let v = chi.eval(&[2.5]).value()[0];
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn chi_slope_stays_below_one() {
        let chi = bump_chi(1.0f64, 4.0, 1).unwrap();
        let mut max_slope: f64 = 0.0;
        for i in 0..=8000 {
            let x = -4.0 + (i as f64) * 0.001;
            max_slope = max_slope.max(chi.eval(&[x]).deriv(1).data()[0].abs());
        }
        // transition width 3 puts the peak slope at 2/3
        assert!(max_slope < 0.7, "max slope {max_slope}");
        assert!(max_slope > 0.6, "max slope {max_slope}");
    }

    #[test]
    fn narrow_cutoff_fails_slope_certificate() {
        // transition width 0.5 forces slope ~4
        assert!(bump_chi(1.0f64, 1.5, 1).is_err());
    }

    #[test]
    fn gaussian_derivative_sup_is_sqrt_2_over_e() {
        // max_x |d/dx exp(-x^2)| = sqrt(2/e) at x = 1/sqrt(2)
        let g = gaussian_bump(1, 1.0f64, vec![0.0], 1.0, 1).unwrap();
        let x = 1.0 / 2.0f64.sqrt();
        let got = g.eval(&[x]).deriv(1).data()[0].abs();
        assert!((got - (2.0 / std::f64::consts::E).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn gaussian_2d_mixed_partial() {
        // f = exp(-x^2 - y^2): d^2 f / dx dy = 4 x y f
        let g = gaussian_bump(2, 1.0f64, vec![0.0, 0.0], 1.0, 2).unwrap();
        let (x, y) = (0.4, -0.7);
        let j = g.eval(&[x, y]);
        let f = (-x * x - y * y as f64).exp();
        assert!((j.value()[0] - f).abs() < 1e-14);
        assert!((j.deriv(2).get(0, &[0, 1]) - 4.0 * x * y * f).abs() < 1e-13);
        assert!((j.deriv(2).get(0, &[0, 0]) - (4.0 * x * x - 2.0) * f).abs() < 1e-13);
    }

    #[test]
    fn psi_plateau_derivatives_match_closed_form() {
        let n = 2usize;
        let beta = 0.5f64;
        let psi = psi_field(n, beta, 1.0, 4.0).unwrap();
        for x in [-0.9f64, -0.25, 0.1, 0.75] {
            let j = psi.eval(&[x]);
            assert!((j.value()[0] - x.powi(2) * x.abs().powf(beta)).abs() < 1e-15);
            let p1 = (2.0 + beta) * x * x.abs().powf(beta);
            assert!((j.deriv(1).data()[0] - p1).abs() < 1e-14, "x={x}");
            let p2 = (2.0 + beta) * (1.0 + beta) * x.abs().powf(beta);
            assert!((j.deriv(2).data()[0] - p2).abs() < 1e-14, "x={x}");
        }
        // n-th derivative at 0 vanishes with |x|^beta
        let j0 = psi.eval(&[0.0]);
        assert_eq!(j0.value()[0], 0.0);
        assert_eq!(j0.deriv(2).data()[0], 0.0);
    }

    #[test]
    fn psi_transition_matches_finite_differences() {
        let psi = psi_field(1, 0.7f64, 1.0, 4.0).unwrap();
        let x = 2.3f64;
        let h = 1e-6;
        let val = |x: f64| psi.eval(&[x]).value()[0];
        let fd = (val(x + h) - val(x - h)) / (2.0 * h);
        let got = psi.eval(&[x]).deriv(1).data()[0];
        assert!((fd - got).abs() < 1e-8, "fd={fd} got={got}");
    }

    #[test]
    fn kink_constant_products() {
        assert!((kink_constant(1, 0.5f64) - 1.5).abs() < 1e-15);
        assert!((kink_constant(2, 1.0f64) - 6.0).abs() < 1e-15);
        assert!((kink_constant(3, 0.5f64) - 3.5 * 2.5 * 1.5).abs() < 1e-15);
    }

    #[test]
    fn parse_field_mixtures_and_errors() {
        let f = parse_field::<f64>("gaussian:0.5+plateau-shift:-0.25", 1, 2).unwrap();
        let v = f.eval(&[0.0]).value()[0];
        assert!((v - (0.5 - 0.25)).abs() < 1e-14);
        assert!(parse_field::<f64>("nope", 1, 1).is_err());
        assert!(parse_field::<f64>("psi:1:0.5", 1, 2).is_err(), "order above regularity");
        assert!(parse_field::<f64>("psi:1", 1, 1).is_err(), "missing parameter");
        assert!(parse_field::<f64>("chi", 2, 1).is_err(), "chi is univariate");
        assert!(parse_field::<f64>("zero", 2, 3).is_ok());
    }
}
