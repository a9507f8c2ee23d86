//! Group-side batteries: composition growth, inversion round trips, the
//! inverse-chart continuity experiment, and the matrix determinant bound.

use holoflow::fields::{gaussian_bump, parse_field, psi_field};
use holoflow::group::{
    composition_bound_check, inverse_matrix_bound, inversion_continuity_experiment, DiffeoField,
};
use holoflow::hoelder::{sup_norm, FieldTable, SampleGrid, DEFAULT_OPNORM_BUDGET};
use holoflow::samplers::{random_bump_mixture, random_diffeo, random_matrix, rng};
use holoflow::Box64;

use crate::config::{self, core_error, CliError, Overlay};
use crate::csvout::{num, truth, Sink};
use crate::{ComposeBoundArgs, InvHolderArgs, InvertArgs, MatrixBoundArgs};

use super::{
    dyadic_eps, fold_max, fold_min, Summary, INVERSE_JET_TOL, INVERSE_VALUE_TOL, RATIO_BAND_FACTOR,
};

pub fn run_compose_bound(args: &ComposeBoundArgs) -> Result<Summary, CliError> {
    let ov = Overlay::load(args.common.config.as_deref())?;
    let alpha = config::check_unit("alpha", ov.get("alpha", args.common.alpha, 0.5)?)?;
    let seed = ov.get("seed", args.common.seed, 1505u64)?;
    let out = ov.out_path(&args.common.out)?;
    let mut r = rng(seed);
    let mut csv = Sink::open(out.as_deref())?;
    csv.row(["pair", "alpha", "norm_f", "norm_g", "lhs", "rhs", "pass"])?;
    let mut failures = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..100usize {
        let f = random_bump_mixture(&mut r, 1, 1, 3, 1.0).map_err(core_error)?;
        let g = random_bump_mixture(&mut r, 1, 1, 3, 1.5).map_err(core_error)?;
        let check = composition_bound_check(&g, &f, alpha).map_err(core_error)?;
        csv.row([
            i.to_string(),
            num(check.alpha),
            num(check.norm_f),
            num(check.norm_g),
            num(check.lhs),
            num(check.rhs),
            truth(check.pass),
        ])?;
        if !check.pass {
            failures += 1;
            eprintln!(
                "compose-bound: pair {i}: lhs {:.6e} > rhs {:.6e}",
                check.lhs, check.rhs
            );
        }
        worst = worst.max(check.lhs / check.rhs - 1.0);
    }
    csv.finish()?;
    Ok(Summary {
        pass: failures == 0,
        line: format!(
            "compose-bound: 100 pairs at alpha = {alpha}, {failures} failures; \
             worst lhs/rhs - 1 = {worst:.3e}"
        ),
    })
}

pub fn run_invert(args: &InvertArgs) -> Result<Summary, CliError> {
    let ov = Overlay::load(args.common.config.as_deref())?;
    let seed = ov.get("seed", args.common.seed, 1707u64)?;
    let fixed_order = match ov.get_opt("n", args.common.n)? {
        Some(n) => Some(config::check_level(n)?),
        None => None,
    };
    let out = ov.out_path(&args.common.out)?;
    let mut r = rng(seed);
    let mut csv = Sink::open(out.as_deref())?;
    csv.row(["index", "order", "value_gap", "jet_gap", "pass"])?;
    let mut failures = 0usize;
    let mut worst_value = 0.0f64;
    let mut worst_jet = 0.0f64;
    for i in 0..20usize {
        let order = fixed_order.unwrap_or(1 + i % 3);
        let phi = random_diffeo(&mut r, order).map_err(core_error)?;
        let inv = phi.invert().map_err(core_error)?;
        let round = DiffeoField::compose(&phi, &inv).map_err(core_error)?;
        let grid = SampleGrid::for_field(round.phi()).map_err(core_error)?;
        let table = FieldTable::build(round.phi(), &grid, order).map_err(core_error)?;
        let value = sup_norm(&table, 0, DEFAULT_OPNORM_BUDGET)
            .map_err(core_error)?
            .value;
        let mut jet = 0.0f64;
        for level in 0..=order {
            jet = jet.max(
                sup_norm(&table, level, DEFAULT_OPNORM_BUDGET)
                    .map_err(core_error)?
                    .value,
            );
        }
        let ok = value <= INVERSE_VALUE_TOL && jet <= INVERSE_JET_TOL;
        csv.row([
            i.to_string(),
            order.to_string(),
            num(value),
            num(jet),
            truth(ok),
        ])?;
        if !ok {
            failures += 1;
            eprintln!(
                "invert: diffeo {i} (order {order}): position gap {value:.3e}, jet gap {jet:.3e}"
            );
        }
        worst_value = worst_value.max(value);
        worst_jet = worst_jet.max(jet);
    }
    csv.finish()?;
    Ok(Summary {
        pass: failures == 0,
        line: format!(
            "invert: 20 round trips, {failures} failures; worst position gap {worst_value:.3e} \
             (tol {INVERSE_VALUE_TOL:.0e}), worst jet gap {worst_jet:.3e} (tol {INVERSE_JET_TOL:.0e})"
        ),
    })
}

pub fn run_inv_holder(args: &InvHolderArgs) -> Result<Summary, CliError> {
    let ov = Overlay::load(args.common.config.as_deref())?;
    config::univariate(ov.get("d", args.common.d, 1)?, "inv-holder")?;
    let n = config::check_level(ov.get("n", args.common.n, 1)?)?;
    let alpha = config::check_unit("alpha", ov.get("alpha", args.common.alpha, 0.3)?)?;
    let beta = config::check_unit("beta", ov.get("beta", args.common.beta, 0.9)?)?;
    config::check_strictly_ordered(alpha, beta)?;
    let pscale = config::check_positive("pscale", ov.get("pscale", args.pscale, 0.05f64)?)?;
    // the default chart sits off-center so the kink at the origin stays in
    // the region where the inverse actually moves
    let phi0 = match ov.get_opt("phi", args.phi.clone())? {
        Some(spec) => parse_field::<f64>(&spec, 1, n).map_err(core_error)?,
        None => gaussian_bump(1, 0.1f64, vec![0.5], 1.0, n).map_err(core_error)?,
    };
    let w = match ov.get_opt("perturbation", args.perturbation.clone())? {
        Some(spec) => parse_field::<f64>(&spec, 1, n).map_err(core_error)?,
        None => psi_field(n, beta, 1.0, 4.0).map_err(core_error)?,
    }
    .scale(pscale);
    let eps = dyadic_eps(8);
    let radius = ov.get("box", args.common.box_radius, 5.0f64)?;
    let ppa = ov.get("grid", args.common.grid, 1001usize)?;
    let grid = SampleGrid::new(Box64::centered(radius, 1), ppa, &[]).map_err(core_error)?;
    let report = inversion_continuity_experiment(&phi0, &w, &eps, n, alpha, beta, &grid)
        .map_err(core_error)?;

    let out = ov.out_path(&args.common.out)?;
    let mut csv = Sink::open(out.as_deref())?;
    csv.row(["eps", "distance", "denom", "ratio"])?;
    for row in &report.rows {
        csv.row([num(row.eps), num(row.distance), num(row.denom), num(row.ratio)])?;
    }
    csv.finish()?;

    let tail = &report.rows[report.rows.len().saturating_sub(4)..];
    let tail_max = fold_max(tail.iter().map(|r| r.ratio));
    let tail_min = fold_min(tail.iter().map(|r| r.ratio));
    let spread = tail_max / tail_min;
    let pass = report.max_ratio.is_finite() && tail_min > 0.0 && spread <= RATIO_BAND_FACTOR;
    if !pass {
        eprintln!(
            "inv-holder: ratio spread {spread:.2}x across the {} smallest eps exceeds \
             {RATIO_BAND_FACTOR}x (max ratio {:.4})",
            tail.len(),
            report.max_ratio
        );
    }
    Ok(Summary {
        pass,
        line: format!(
            "inv-holder: max ratio {:.4} over {} eps; tail spread {spread:.2}x \
             (band {RATIO_BAND_FACTOR}x)",
            report.max_ratio,
            report.rows.len()
        ),
    })
}

pub fn run_matrix_bound(args: &MatrixBoundArgs) -> Result<Summary, CliError> {
    let ov = Overlay::load(args.common.config.as_deref())?;
    let seed = ov.get("seed", args.common.seed, 1606u64)?;
    let dims: Vec<usize> = match ov.get_opt("d", args.common.d)? {
        Some(d) => vec![config::check_dim(d)?],
        None => vec![1, 2, 3],
    };
    let out = ov.out_path(&args.common.out)?;
    let mut r = rng(seed);
    let mut csv = Sink::open(out.as_deref())?;
    csv.row(["index", "d", "det", "lhs", "rhs", "pass"])?;
    let mut violations = 0usize;
    let mut worst = f64::NEG_INFINITY;
    let mut idx = 0usize;
    for &d in &dims {
        for _ in 0..1000 {
            let m = random_matrix(&mut r, d);
            let check = inverse_matrix_bound(&m).map_err(core_error)?;
            csv.row([
                idx.to_string(),
                d.to_string(),
                num(check.det),
                num(check.lhs),
                num(check.rhs),
                truth(check.pass),
            ])?;
            if !check.pass {
                violations += 1;
                eprintln!(
                    "matrix-bound: matrix {idx} (d = {d}): lhs {:.6e} > rhs {:.6e}",
                    check.lhs, check.rhs
                );
            }
            worst = worst.max(check.lhs / check.rhs - 1.0);
            idx += 1;
        }
    }
    csv.finish()?;
    Ok(Summary {
        pass: violations == 0,
        line: format!(
            "matrix-bound: {idx} matrices over d in {dims:?}, {violations} violations; \
             worst lhs/rhs - 1 = {worst:.3e}"
        ),
    })
}
