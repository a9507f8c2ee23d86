//! Randomized checks of the algebraic identities behind the jet engine.
//!
//! Composition associativity, the product rule, and inversion are polynomial
//! identities in the tensor entries, so they must hold for arbitrary
//! symmetric jets, not only jets sampled from smooth fields. Feeding raw
//! random tensors here exercises the combinatorics on inputs no field
//! evaluator would produce.

use holoflow::fields::gaussian_bump;
use holoflow::hoelder::{hoelder_norm, SampleGrid};
use holoflow::jets::{invert_full_jet, jet_bilinear, jet_compose, Bilinear};
use holoflow::{Jet64, Tensor64};
use proptest::prelude::*;

const ALGEBRA_TOL: f64 = 1e-10;
const HOMOGENEITY_TOL: f64 = 1e-12;

fn magnitude(j: &Jet64) -> f64 {
    j.max_abs_diff(&Jet64::zero(j.dim_in(), j.dim_out(), j.order()))
}

/// Jet with the given shape, entries drawn from `[-2, 2] * scale`, and every
/// derivative tensor symmetrized so it is a valid jet.
fn raw_jet(
    dim_in: usize,
    dim_out: usize,
    order: usize,
    scale: f64,
) -> impl Strategy<Value = Jet64> {
    let len = dim_out
        * (1..=order)
            .map(|k| dim_in.pow(k as u32))
            .sum::<usize>()
        + dim_out;
    prop::collection::vec(-2.0f64..2.0, len).prop_map(move |entries| {
        let value: Vec<f64> = entries[..dim_out].iter().map(|e| e * scale).collect();
        let mut pos = dim_out;
        let mut derivs = Vec::with_capacity(order);
        for k in 1..=order {
            let block = dim_in.pow(k as u32);
            let base = pos;
            let t = Tensor64::from_fn(dim_out, dim_in, k, |a, idx| {
                let mut flat = 0usize;
                for &i in idx {
                    flat = flat * dim_in + i;
                }
                entries[base + a * block + flat] * scale
            });
            derivs.push(t.symmetrize());
            pos += dim_out * block;
        }
        Jet64::from_parts(dim_in, dim_out, value, derivs).expect("consistent shapes")
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composition_is_associative(
        (f, g, h) in (1usize..=2, 1usize..=2, 1usize..=2, 1usize..=2, 1usize..=4)
            .prop_flat_map(|(d0, d1, d2, d3, order)| {
                (
                    raw_jet(d0, d1, order, 1.0),
                    raw_jet(d1, d2, order, 1.0),
                    raw_jet(d2, d3, order, 1.0),
                )
            })
    ) {
        let order = f.order();
        let left = jet_compose(&jet_compose(&h, &g, order).unwrap(), &f, order).unwrap();
        let right = jet_compose(&h, &jet_compose(&g, &f, order).unwrap(), order).unwrap();
        let gap = left.max_abs_diff(&right);
        let tol = ALGEBRA_TOL * (1.0 + magnitude(&left));
        prop_assert!(gap <= tol, "associativity defect {gap:.3e} > {tol:.3e}");
    }

    #[test]
    fn product_rule_commutes_for_scalar_factors(
        (f, g) in (1usize..=2, 1usize..=4).prop_flat_map(|(d, order)| {
            (raw_jet(d, 1, order, 1.0), raw_jet(d, 1, order, 1.0))
        })
    ) {
        let order = f.order();
        let b = Bilinear::scalar_product();
        let fg = jet_bilinear(&b, &f, &g, order).unwrap();
        let gf = jet_bilinear(&b, &g, &f, order).unwrap();
        let gap = fg.max_abs_diff(&gf);
        let tol = ALGEBRA_TOL * (1.0 + magnitude(&fg));
        prop_assert!(gap <= tol, "commutativity defect {gap:.3e} > {tol:.3e}");
    }

    #[test]
    fn product_rule_is_linear_in_the_left_slot(
        (f1, f2, g, c) in (1usize..=2, 1usize..=3).prop_flat_map(|(d, order)| {
            (
                raw_jet(d, 1, order, 1.0),
                raw_jet(d, 1, order, 1.0),
                raw_jet(d, 1, order, 1.0),
                -2.0f64..2.0,
            )
        })
    ) {
        let order = f1.order();
        let b = Bilinear::scalar_product();
        let combined = jet_bilinear(&b, &f1.add_scaled(&f2, c), &g, order).unwrap();
        let split = jet_bilinear(&b, &f1, &g, order)
            .unwrap()
            .add_scaled(&jet_bilinear(&b, &f2, &g, order).unwrap(), c);
        let gap = combined.max_abs_diff(&split);
        let tol = ALGEBRA_TOL * (1.0 + magnitude(&combined));
        prop_assert!(gap <= tol, "linearity defect {gap:.3e} > {tol:.3e}");
    }

    #[test]
    fn inversion_cancels_to_the_identity(
        (x, pert) in (1usize..=2, 1usize..=3).prop_flat_map(|(d, order)| {
            (
                prop::collection::vec(-1.0f64..1.0, d),
                // contraction-sized perturbation: first derivative I + 0.3 B
                // stays invertible for every draw
                raw_jet(d, d, order, 0.3),
            )
        })
    ) {
        let order = pert.order();
        let full = Jet64::identity_at(&x, order).add(&pert);
        let inv = invert_full_jet(&full, &x).unwrap();
        let round = jet_compose(&inv, &full, order).unwrap();
        let gap = round.max_abs_diff(&Jet64::identity_at(&x, order));
        prop_assert!(gap <= ALGEBRA_TOL, "round trip defect {gap:.3e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sampled_norm_is_absolutely_homogeneous(
        amp in 0.3f64..2.0,
        center in -1.0f64..1.0,
        width in 0.5f64..1.5,
        c in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0],
        n in 0usize..=2,
        alpha in 0.15f64..0.95,
    ) {
        let f = gaussian_bump(1, amp, vec![center], width, n).unwrap();
        let grid = SampleGrid::new(f.support().clone(), 41, &[]).unwrap();
        let plain = hoelder_norm(&f, &grid, n, alpha).unwrap().value;
        let scaled = hoelder_norm(&f.scale(c), &grid, n, alpha).unwrap().value;
        let gap = (scaled - c.abs() * plain).abs();
        let tol = HOMOGENEITY_TOL * (1.0 + plain.abs());
        prop_assert!(gap <= tol, "homogeneity defect {gap:.3e} > {tol:.3e}");
    }
}
