//! Kink-family subcommands: the shrinking-chart transport bound, the
//! closed-form modulus exponent, translation separability, and the
//! slowly-vanishing modulus test.

use holoflow::hoelder::modulus::{modulus_check, Modulus};
use holoflow::hoelder::SampleGrid;
use holoflow::pathology::{disc_experiment, optimal_experiment, separability_gap, PsiFamily};
use holoflow::Box64;

use crate::config::{self, CliError, Overlay, core_error};
use crate::csvout::{num, truth, Sink};
use crate::{DiscArgs, ModulusArgs, OptimalArgs, SeparabilityArgs};

use super::{fold_min, Summary, SLOPE_BAND};

/// Geometric test sequence for `modulus`: t0, shrink ratio, length.
const MODULUS_T0: f64 = 0.5;
const MODULUS_RATIO: f64 = 0.5;
const MODULUS_COUNT: usize = 40;

pub fn run_disc(args: &DiscArgs) -> Result<Summary, CliError> {
    let ov = Overlay::load(args.common.config.as_deref())?;
    config::univariate(ov.get("d", args.common.d, 1)?, "disc")?;
    let n = config::check_level(ov.get("n", args.common.n, 1)?)?;
    let beta = config::check_unit("beta", ov.get("beta", args.common.beta, 0.5)?)?;
    let raw = ov.get("k", args.k.clone(), "10,100,1000,10000".to_string())?;
    let k_list = config::parse_list_usize(&raw, "k")?;
    let radius = ov.get("box", args.common.box_radius, 4.2f64)?;
    let ppa = ov.get("grid", args.common.grid, 2001usize)?;

    let family = PsiFamily::new(n, beta).map_err(core_error)?;
    let grid = SampleGrid::new(Box64::centered(radius, 1), ppa, &[]).map_err(core_error)?;
    let report = disc_experiment(&family, &k_list, &grid).map_err(core_error)?;

    let out = ov.out_path(&args.common.out)?;
    let mut csv = Sink::open(out.as_deref())?;
    csv.row(["k", "chart_norm", "witness_bound", "threshold", "pass", "skipped"])?;
    let mut failures = 0usize;
    for row in &report.rows {
        if !row.pass || row.skipped {
            failures += 1;
            eprintln!(
                "disc: k = {}: witness bound {:.6} below threshold {:.6}{}",
                row.k,
                row.witness_bound,
                report.threshold,
                if row.skipped { " (chart skipped)" } else { "" }
            );
        }
        csv.row([
            row.k.to_string(),
            num(row.chart_norm),
            num(row.witness_bound),
            num(report.threshold),
            truth(row.pass),
            truth(row.skipped),
        ])?;
    }
    csv.finish()?;

    let slope = report.chart_slope;
    let slope_ok = slope.map_or(true, |s| (s + 1.0).abs() <= SLOPE_BAND);
    if !slope_ok {
        eprintln!(
            "disc: chart norm slope {:.6} outside -1 +- {SLOPE_BAND}",
            slope.expect("checked")
        );
    }
    let min_witness = fold_min(
        report
            .rows
            .iter()
            .filter(|r| !r.skipped)
            .map(|r| r.witness_bound),
    );
    Ok(Summary {
        pass: failures == 0 && slope_ok,
        line: format!(
            "disc: n = {n}, beta = {beta}: min witness {min_witness:.6} vs threshold {:.2} \
             over {} chart sizes; chart slope {}",
            report.threshold,
            report.rows.len(),
            slope.map_or("n/a".to_string(), |s| format!("{s:.6}"))
        ),
    })
}

pub fn run_optimal(args: &OptimalArgs) -> Result<Summary, CliError> {
    let ov = Overlay::load(args.common.config.as_deref())?;
    config::univariate(ov.get("d", args.common.d, 1)?, "optimal")?;
    let n = config::check_level(ov.get("n", args.common.n, 1)?)?;
    let beta = config::check_unit("beta", ov.get("beta", args.common.beta, 0.9)?)?;
    let alpha = config::check_unit("alpha", ov.get("alpha", args.common.alpha, 0.3)?)?;
    config::check_strictly_ordered(alpha, beta)?;
    let gamma = config::check_positive("gamma", ov.get("gamma", args.common.gamma, 0.7)?)?;
    let s_list = match ov.get_opt("s", args.s.clone())? {
        Some(raw) => config::parse_list_f64(&raw, "s")?,
        None => (4..=12).map(|e| 0.5f64.powi(e)).collect(),
    };

    let family = PsiFamily::new(n, beta).map_err(core_error)?;
    let report = optimal_experiment(&family, alpha, gamma, &s_list).map_err(core_error)?;

    let out = ov.out_path(&args.common.out)?;
    let mut csv = Sink::open(out.as_deref())?;
    csv.row(["s", "q", "closed_form", "rel_err", "pass"])?;
    let mut failures = 0usize;
    for row in &report.rows {
        if !row.pass {
            failures += 1;
            eprintln!(
                "optimal: s = {:.6e}: quotient {:.12e} off closed form {:.12e} by {:.3e}",
                row.s, row.q, row.closed_form, row.rel_err
            );
        }
        csv.row([
            num(row.s),
            num(row.q),
            num(row.closed_form),
            num(row.rel_err),
            truth(row.pass),
        ])?;
    }
    csv.finish()?;

    let slope = report.slope;
    let slope_ok = slope.map_or(true, |s| (s - report.exponent).abs() <= SLOPE_BAND);
    if !slope_ok {
        eprintln!(
            "optimal: quotient slope {:.6} outside {:.2} +- {SLOPE_BAND}",
            slope.expect("checked"),
            report.exponent
        );
    }
    Ok(Summary {
        pass: failures == 0 && slope_ok,
        line: format!(
            "optimal: alpha = {alpha}, beta = {beta}, gamma = {gamma}: {} scales follow \
             2C s^{:.2}; slope {}",
            report.rows.len(),
            report.exponent,
            slope.map_or("n/a".to_string(), |s| format!("{s:.6}"))
        ),
    })
}

pub fn run_separability(args: &SeparabilityArgs) -> Result<Summary, CliError> {
    let ov = Overlay::load(args.common.config.as_deref())?;
    config::univariate(ov.get("d", args.common.d, 1)?, "separability")?;
    let t_list = match ov.get_opt("t", args.t.clone())? {
        Some(raw) => config::parse_list_f64(&raw, "t")?,
        None => (0..10).map(|i| 0.1 * i as f64).collect(),
    };
    let ns: Vec<usize> = match ov.get_opt("n", args.common.n)? {
        Some(n) => vec![config::check_level(n)?],
        None => vec![1, 2],
    };
    let betas: Vec<f64> = match ov.get_opt("beta", args.common.beta)? {
        Some(b) => vec![config::check_unit("beta", b)?],
        None => vec![0.5, 1.0],
    };

    let out = ov.out_path(&args.common.out)?;
    let mut csv = Sink::open(out.as_deref())?;
    csv.row(["n", "beta", "t", "s", "bound", "threshold", "pass"])?;
    let mut pairs = 0usize;
    let mut failures = 0usize;
    let mut min_margin = f64::INFINITY;
    for &n in &ns {
        for &beta in &betas {
            let family = PsiFamily::new(n, beta).map_err(core_error)?;
            let report = separability_gap(&family, &t_list).map_err(core_error)?;
            pairs += report.rows.len();
            if let Some(min_bound) = report.min_bound {
                min_margin = min_margin.min(min_bound - report.threshold);
            }
            for row in &report.rows {
                if !row.pass {
                    failures += 1;
                    eprintln!(
                        "separability: n = {n}, beta = {beta}, (t, s) = ({}, {}): \
                         bound {:.6} below threshold {:.6}",
                        row.t, row.s, row.bound, report.threshold
                    );
                }
                csv.row([
                    n.to_string(),
                    num(beta),
                    num(row.t),
                    num(row.s),
                    num(row.bound),
                    num(report.threshold),
                    truth(row.pass),
                ])?;
            }
        }
    }
    csv.finish()?;

    Ok(Summary {
        pass: failures == 0,
        line: format!(
            "separability: {pairs} translate pairs across {} (n, beta) classes; \
             worst bound-minus-threshold margin {min_margin:.3e}",
            ns.len() * betas.len()
        ),
    })
}

fn parse_modulus(spec: &str) -> Result<Modulus<f64>, CliError> {
    if spec == "slow-log" {
        return Ok(Modulus::slow_log());
    }
    if let Some(raw) = spec.strip_prefix("power:") {
        let p: f64 = raw
            .parse()
            .map_err(|_| CliError::usage(format!("power exponent '{raw}' is not a number")))?;
        if !(p > 0.0) {
            return Err(CliError::usage(format!(
                "power exponent must be positive, got {p}"
            )));
        }
        return Ok(Modulus::power(p));
    }
    Err(CliError::usage(format!(
        "unknown modulus '{spec}'; expected slow-log or power:<p>"
    )))
}

pub fn run_modulus(args: &ModulusArgs) -> Result<Summary, CliError> {
    let ov = Overlay::load(args.common.config.as_deref())?;
    let spec = ov.get("omega", args.omega.clone(), "slow-log".to_string())?;
    let omega = parse_modulus(&spec)?;
    let gammas: Vec<f64> = match ov.get_opt("gamma", args.common.gamma)? {
        Some(g) => vec![config::check_positive("gamma", g)?],
        None => vec![0.05, 0.1, 0.5, 1.0],
    };
    let rows = modulus_check(&omega, &gammas, MODULUS_T0, MODULUS_RATIO, MODULUS_COUNT)
        .map_err(core_error)?;

    let out = ov.out_path(&args.common.out)?;
    let mut csv = Sink::open(out.as_deref())?;
    csv.row([
        "omega",
        "gamma",
        "first_ratio",
        "mid_ratio",
        "last_ratio",
        "min_ratio",
        "argmin_t",
        "tail_nondecreasing",
        "pass",
    ])?;
    let mut failures = 0usize;
    for row in &rows {
        if !row.pass {
            failures += 1;
            eprintln!(
                "modulus: {spec} at gamma = {}: ratio falls from {:.6e} to {:.6e}; \
                 omega(t)/t^gamma does not climb",
                row.gamma, row.mid_ratio, row.last_ratio
            );
        }
        csv.row([
            spec.clone(),
            num(row.gamma),
            num(row.first_ratio),
            num(row.mid_ratio),
            num(row.last_ratio),
            num(row.min_ratio),
            num(row.argmin_t),
            truth(row.tail_nondecreasing),
            truth(row.pass),
        ])?;
    }
    csv.finish()?;

    Ok(Summary {
        pass: failures == 0,
        line: format!(
            "modulus: {spec} beats t^gamma for {} of {} tested gammas \
             (sequence t = {MODULUS_T0} * {MODULUS_RATIO}^k, {MODULUS_COUNT} terms)",
            rows.len() - failures,
            rows.len()
        ),
    })
}
