//! Norm tabulation and the sampled-inequality checks built on it.

use holoflow::fields::parse_field;
use holoflow::hoelder::verify::{verify_inclusion, verify_interpolation};
use holoflow::hoelder::{
    default_points_per_axis, hoelder_norm_from, sup_norm, FieldTable, PairScan, SampleGrid,
    Witness, DEFAULT_OPNORM_BUDGET, DEFAULT_PAIR_BUDGET,
};
use holoflow::samplers::{random_bump_mixture, random_exponent_triple, rng};
use holoflow::Box64;

use crate::config::{self, core_error, CliError, Overlay};
use crate::csvout::{num, truth, Sink};
use crate::{InclusionArgs, InterpolationArgs, NormsArgs};

use super::Summary;

fn witness_cells(w: &Witness<f64>) -> (String, String) {
    let join = |p: &[f64]| p.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" ");
    match w {
        Witness::None => (String::new(), String::new()),
        Witness::Point(p) => (join(p), String::new()),
        Witness::Pair(a, b) => (join(a), join(b)),
    }
}

pub fn run_norms(args: &NormsArgs) -> Result<Summary, CliError> {
    let ov = Overlay::load(args.common.config.as_deref())?;
    let d = config::check_dim(ov.get("d", args.common.d, 1)?)?;
    let n = config::check_level(ov.get("n", args.common.n, 1)?)?;
    let alpha = config::check_unit("alpha", ov.get("alpha", args.common.alpha, 0.5)?)?;
    let spec = ov.get("field", args.field.clone(), "gaussian:1".to_string())?;
    let field = parse_field::<f64>(&spec, d, n).map_err(core_error)?;
    let ppa = ov.get("grid", args.common.grid, default_points_per_axis(d))?;
    let pairs = ov.get("pairs", args.common.pairs, DEFAULT_PAIR_BUDGET)?;
    let region = match ov.get_opt("box", args.common.box_radius)? {
        Some(r) => Box64::centered(r, d),
        None => field.support().clone(),
    };
    let grid = SampleGrid::new(region, ppa, &[]).map_err(core_error)?;
    let table = FieldTable::build(&field, &grid, n).map_err(core_error)?;
    let scan = PairScan::build(&table, n, pairs, DEFAULT_OPNORM_BUDGET).map_err(core_error)?;

    let out = ov.out_path(&args.common.out)?;
    let mut csv = Sink::open(out.as_deref())?;
    csv.row(["kind", "level", "alpha", "value", "witness_x", "witness_y"])?;
    for level in 0..=n {
        let est = sup_norm(&table, level, DEFAULT_OPNORM_BUDGET).map_err(core_error)?;
        let (wx, wy) = witness_cells(&est.witness);
        csv.row([
            "sup".to_string(),
            level.to_string(),
            String::new(),
            num(est.value),
            wx,
            wy,
        ])?;
    }
    let semi = scan.seminorm(alpha, grid.points()).map_err(core_error)?;
    let (sx, sy) = witness_cells(&semi.witness);
    csv.row([
        "seminorm".to_string(),
        n.to_string(),
        num(alpha),
        num(semi.value),
        sx,
        sy,
    ])?;
    let norm =
        hoelder_norm_from(&table, &scan, n, alpha, DEFAULT_OPNORM_BUDGET).map_err(core_error)?;
    let (nx, ny) = witness_cells(&norm.witness);
    csv.row([
        "norm".to_string(),
        n.to_string(),
        num(alpha),
        num(norm.value),
        nx,
        ny,
    ])?;
    csv.finish()?;

    Ok(Summary {
        pass: true,
        line: format!(
            "norms: {spec}: ({n}, {alpha}) norm {:.6e}, top seminorm {:.6e} on {}",
            norm.value,
            semi.value,
            grid.describe()
        ),
    })
}

pub fn run_interpolation(args: &InterpolationArgs) -> Result<Summary, CliError> {
    let ov = Overlay::load(args.common.config.as_deref())?;
    let out = ov.out_path(&args.common.out)?;
    let pairs = ov.get("pairs", args.common.pairs, DEFAULT_PAIR_BUDGET)?;
    let mut csv = Sink::open(out.as_deref())?;
    csv.row([
        "field", "n", "alpha", "beta_mid", "gamma", "mu", "lhs", "rhs", "pass",
    ])?;

    if let Some(spec) = ov.get_opt("field", args.field.clone())? {
        let d = config::check_dim(ov.get("d", args.common.d, 1)?)?;
        let n = config::check_level(ov.get("n", args.common.n, 1)?)?;
        let alpha = config::check_unit("alpha", ov.get("alpha", args.common.alpha, 0.25)?)?;
        let mid = config::check_unit("beta", ov.get("beta", args.common.beta, 0.5)?)?;
        let gamma = config::check_unit("gamma", ov.get("gamma", args.common.gamma, 0.75)?)?;
        if !(alpha < mid && mid < gamma) {
            return Err(CliError::usage(format!(
                "need alpha < beta < gamma, got {alpha}, {mid}, {gamma}"
            )));
        }
        let field = parse_field::<f64>(&spec, d, n).map_err(core_error)?;
        let ppa = ov.get("grid", args.common.grid, default_points_per_axis(d))?;
        let region = match ov.get_opt("box", args.common.box_radius)? {
            Some(r) => Box64::centered(r, d),
            None => field.support().clone(),
        };
        let grid = SampleGrid::new(region, ppa, &[]).map_err(core_error)?;
        let table = FieldTable::build(&field, &grid, n).map_err(core_error)?;
        let scan = PairScan::build(&table, n, pairs, DEFAULT_OPNORM_BUDGET).map_err(core_error)?;
        let check =
            verify_interpolation(&table, &scan, n, alpha, mid, gamma).map_err(core_error)?;
        csv.row([
            spec.clone(),
            n.to_string(),
            num(alpha),
            num(mid),
            num(gamma),
            num(check.mu),
            num(check.lhs),
            num(check.rhs),
            truth(check.pass),
        ])?;
        csv.finish()?;
        if !check.pass {
            eprintln!(
                "interpolation: {spec} at ({alpha}, {mid}, {gamma}): lhs {:.6e} > rhs {:.6e}",
                check.lhs, check.rhs
            );
        }
        return Ok(Summary {
            pass: check.pass,
            line: format!(
                "interpolation: {spec}: lhs {:.6e} vs rhs {:.6e} at ({alpha}, {mid}, {gamma})",
                check.lhs, check.rhs
            ),
        });
    }

    // battery: random mixtures at levels 0..=2, ten exponent triples each
    let seed = ov.get("seed", args.common.seed, 1404u64)?;
    let ppa = ov.get("grid", args.common.grid, 201usize)?;
    let mut r = rng(seed);
    let mut failures = 0usize;
    let mut checks = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for fi in 0..100usize {
        let n = fi % 3;
        let field = random_bump_mixture(&mut r, 1, n, 3, 1.0).map_err(core_error)?;
        let grid = SampleGrid::new(field.support().clone(), ppa, &[]).map_err(core_error)?;
        let table = FieldTable::build(&field, &grid, n).map_err(core_error)?;
        let scan = PairScan::build(&table, n, pairs, DEFAULT_OPNORM_BUDGET).map_err(core_error)?;
        for _ in 0..10 {
            let (alpha, mid, gamma) = random_exponent_triple(&mut r);
            let check =
                verify_interpolation(&table, &scan, n, alpha, mid, gamma).map_err(core_error)?;
            checks += 1;
            csv.row([
                fi.to_string(),
                n.to_string(),
                num(alpha),
                num(mid),
                num(gamma),
                num(check.mu),
                num(check.lhs),
                num(check.rhs),
                truth(check.pass),
            ])?;
            if !check.pass {
                failures += 1;
                eprintln!(
                    "interpolation: field {fi} (level {n}) at ({alpha:.4}, {mid:.4}, {gamma:.4}): \
                     lhs {:.6e} > rhs {:.6e}",
                    check.lhs, check.rhs
                );
            }
            if check.rhs > 0.0 {
                worst = worst.max(check.lhs / check.rhs - 1.0);
            }
        }
    }
    csv.finish()?;
    Ok(Summary {
        pass: failures == 0,
        line: format!(
            "interpolation: {checks} checks, {failures} failures; worst lhs/rhs - 1 = {worst:.3e}"
        ),
    })
}

pub fn run_inclusion(args: &InclusionArgs) -> Result<Summary, CliError> {
    let ov = Overlay::load(args.common.config.as_deref())?;
    let d = config::check_dim(ov.get("d", args.common.d, 1)?)?;
    let n = config::check_level(ov.get("n", args.common.n, 1)?)?;
    let beta = config::check_unit("beta", ov.get("beta", args.common.beta, 0.8)?)?;
    let m = ov.get("m", args.m, n)?;
    let alpha = config::check_unit("alpha", ov.get("alpha", args.common.alpha, 0.3)?)?;
    config::check_ordered(alpha, beta)?;
    if m > n {
        return Err(CliError::usage(format!(
            "coarse level m = {m} must not exceed n = {n}"
        )));
    }
    if m as f64 + alpha > n as f64 + beta {
        return Err(CliError::usage(format!(
            "need m + alpha <= n + beta, got {m} + {alpha} > {n} + {beta}"
        )));
    }
    let spec = ov.get("field", args.field.clone(), "gaussian:1".to_string())?;
    let field = parse_field::<f64>(&spec, d, n).map_err(core_error)?;
    let ppa = ov.get("grid", args.common.grid, default_points_per_axis(d))?;
    let region = match ov.get_opt("box", args.common.box_radius)? {
        Some(r) => Box64::centered(r, d),
        None => field.support().clone(),
    };
    let grid = SampleGrid::new(region, ppa, &[]).map_err(core_error)?;
    let check = verify_inclusion(&field, &grid, (m, alpha), (n, beta)).map_err(core_error)?;

    let out = ov.out_path(&args.common.out)?;
    let mut csv = Sink::open(out.as_deref())?;
    csv.row(["m", "alpha", "n", "beta", "lhs", "rhs", "pass"])?;
    csv.row([
        m.to_string(),
        num(alpha),
        n.to_string(),
        num(beta),
        num(check.lhs),
        num(check.rhs),
        truth(check.pass),
    ])?;
    csv.finish()?;
    if !check.pass {
        eprintln!(
            "inclusion: {spec}: ({m}, {alpha}) norm {:.6e} exceeds twice the ({n}, {beta}) \
             norm {:.6e}",
            check.lhs, check.rhs
        );
    }
    Ok(Summary {
        pass: check.pass,
        line: format!(
            "inclusion: {spec}: ({m}, {alpha}) vs ({n}, {beta}): lhs {:.6e}, rhs {:.6e}",
            check.lhs, check.rhs
        ),
    })
}
