//! Flow subcommands: trajectory export with monitors attached, the
//! integrator correctness battery, and the perturbation-exponent study.

use std::path::Path;

use holoflow::fields::{gaussian_bump, linear_plateau_field, parse_field, plateau_shift, psi_field};
use holoflow::flow::{flowmap_exponent, gronwall_monitor, integrate_flow, TimeField};
use holoflow::hoelder::{default_points_per_axis, SampleGrid};
use holoflow::jets::jet_compose;
use holoflow::{Box64, Jet64};

use crate::config::{self, core_error, CliError, Overlay};
use crate::csvout::{num, truth, Sink};
use crate::{FlowArgs, FlowmapArgs, GronwallArgs};

use super::{
    dyadic_eps, fold_max, fold_min, Summary, EXACT_SHIFT_TOL, MONITOR_EQUALITY_TOL, ORDER_BAND,
    RATIO_BAND_FACTOR, REVERSAL_TOL, SEMIGROUP_TOL,
};

fn seeds_per_axis(d: usize) -> usize {
    match d {
        1 => 9,
        2 => 5,
        _ => 3,
    }
}

/// Seeds default to the field's support; a degenerate support (the zero
/// field) falls back to a unit box so there is still a trajectory to show.
fn seed_box(support: &Box64, flag: Option<f64>, d: usize) -> Box64 {
    match flag {
        Some(r) => Box64::centered(r, d),
        None => {
            let degenerate = support.lo().iter().zip(support.hi()).all(|(a, b)| a == b);
            if degenerate {
                Box64::centered(1.0, d)
            } else {
                support.clone()
            }
        }
    }
}

fn lattice(region: &Box64, per_axis: usize) -> Result<Vec<Vec<f64>>, CliError> {
    Ok(SampleGrid::new(region.clone(), per_axis, &[])
        .map_err(core_error)?
        .points()
        .to_vec())
}

pub fn run_flow(args: &FlowArgs) -> Result<Summary, CliError> {
    let ov = Overlay::load(args.common.config.as_deref())?;
    let out = ov.out_path(&args.common.out)?;
    match ov.get_opt("field", args.field.clone())? {
        Some(spec) => flow_single(args, &ov, out.as_deref(), &spec),
        None => flow_battery(out.as_deref()),
    }
}

fn flow_single(
    args: &FlowArgs,
    ov: &Overlay,
    out: Option<&Path>,
    spec: &str,
) -> Result<Summary, CliError> {
    let d = config::check_dim(ov.get("d", args.common.d, 1)?)?;
    let n = config::check_level(ov.get("n", args.common.n, 1)?)?;
    let steps = ov.get("steps", args.common.steps, 64usize)?;
    let field = parse_field::<f64>(spec, d, n).map_err(core_error)?;
    let u = TimeField::autonomous(field);
    let region = seed_box(u.support(), ov.get_opt("box", args.common.box_radius)?, d);
    let seeds = lattice(&region, seeds_per_axis(d))?;
    let traj = integrate_flow(&u, &seeds, n, steps).map_err(core_error)?;
    let ppa = ov.get("grid", args.common.grid, default_points_per_axis(d))?;
    let norm_grid = SampleGrid::new(region.clone(), ppa, &[]).map_err(core_error)?;
    let monitors = gronwall_monitor(&u, &traj, &norm_grid).map_err(core_error)?;

    let mut csv = Sink::open(out)?;
    let mut header = vec!["t".to_string(), "seed".to_string()];
    for i in 0..d {
        header.push(format!("x{}", i + 1));
    }
    header.push("det_w1".to_string());
    header.push("disp_margin".to_string());
    header.push("growth_margin".to_string());
    csv.row(&header)?;

    let mut min_det = f64::INFINITY;
    for (ti, &t) in traj.times().iter().enumerate() {
        let mrow = &monitors.rows[ti];
        let disp_margin = mrow.amp_integral - mrow.displacement;
        let growth_margin = mrow.growth_bound - mrow.w1_opnorm;
        for (si, state) in traj.states()[ti].iter().enumerate() {
            let det = state.deriv(1).det();
            min_det = min_det.min(det);
            let mut row = vec![num(t), si.to_string()];
            row.extend(state.value().iter().map(|v| num(*v)));
            row.push(num(det));
            row.push(num(disp_margin));
            row.push(num(growth_margin));
            csv.row(&row)?;
        }
    }
    csv.finish()?;

    let pass = min_det > 0.0;
    if !pass {
        eprintln!("flow: det W1 reached {min_det:.3e} <= 0 along the trajectory");
    }
    Ok(Summary {
        pass,
        line: format!(
            "flow: {spec}: {steps} steps, {} seeds, {} snapshots; min det W1 {min_det:.6e}; \
             monitors held",
            seeds.len(),
            traj.times().len()
        ),
    })
}

/// Every exactly solvable flow, the convergence order, and the breakpoint
/// semigroup identity, in one run.
fn flow_battery(out: Option<&Path>) -> Result<Summary, CliError> {
    let seeds: Vec<Vec<f64>> = (0..9).map(|i| vec![-0.5 + 0.125 * i as f64]).collect();

    let zero_traj =
        integrate_flow(&TimeField::<f64>::zero(1, 2), &seeds, 2, 16).map_err(core_error)?;
    let zero_defect = fold_max(
        zero_traj
            .final_chart_jets()
            .iter()
            .map(|j| j.max_abs_diff(&Jet64::zero(1, 1, 2))),
    );

    let shift = TimeField::autonomous(plateau_shift(0.25f64, 2).map_err(core_error)?);
    let shift_traj = integrate_flow(&shift, &seeds, 2, 64).map_err(core_error)?;
    let shift_defect = fold_max(shift_traj.final_states().iter().zip(shift_traj.seeds()).map(
        |(s, seed)| {
            (s.value()[0] - seed[0] - 0.25)
                .abs()
                .max((s.deriv(1).data()[0] - 1.0).abs())
                .max(s.deriv(2).data()[0].abs())
        },
    ));

    let u = TimeField::autonomous(gaussian_bump(1, 0.3f64, vec![0.2], 1.0, 2).map_err(core_error)?);
    let round = TimeField::concat(vec![u.clone(), u.time_reversed()]).map_err(core_error)?;
    let wide: Vec<Vec<f64>> = (0..21).map(|i| vec![-1.5 + 0.15 * i as f64]).collect();
    let round_traj = integrate_flow(&round, &wide, 1, 2048).map_err(core_error)?;
    let reversal_defect = fold_max(
        round_traj
            .final_states()
            .iter()
            .zip(&wide)
            .map(|(s, seed)| (s.value()[0] - seed[0]).abs()),
    );

    let pulsing = TimeField::time_varying(
        "pulsing bump",
        1,
        2,
        Box64::centered(7.2, 1),
        0.6,
        |t: f64| gaussian_bump(1, 0.4 * (1.0 + 0.5 * t), vec![0.1], 1.0, 2).unwrap(),
    );
    let mut errs = Vec::new();
    for &nsteps in &[32usize, 64, 128] {
        let a = integrate_flow(&pulsing, &seeds, 1, nsteps).map_err(core_error)?;
        let b = integrate_flow(&pulsing, &seeds, 1, 2 * nsteps).map_err(core_error)?;
        errs.push(fold_max(
            a.final_states()
                .iter()
                .zip(b.final_states())
                .map(|(x, y)| (x.value()[0] - y.value()[0]).abs()),
        ));
    }
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();

    let f1 = gaussian_bump(1, 0.3f64, vec![0.3], 1.0, 2).map_err(core_error)?;
    let f2 = gaussian_bump(1, -0.2f64, vec![-0.4], 0.8, 2).map_err(core_error)?;
    let pieces = TimeField::piecewise_constant(vec![f1.clone(), f2.clone()]).map_err(core_error)?;
    let joint = integrate_flow(&pieces, &seeds, 2, 512).map_err(core_error)?;
    let first = integrate_flow(&TimeField::autonomous(f1), &seeds, 2, 256).map_err(core_error)?;
    let mids: Vec<Vec<f64>> = first
        .final_states()
        .iter()
        .map(|s| s.value().to_vec())
        .collect();
    let second = integrate_flow(&TimeField::autonomous(f2), &mids, 2, 256).map_err(core_error)?;
    let mut semigroup_defect = 0.0f64;
    for i in 0..seeds.len() {
        let composed = jet_compose(&second.final_states()[i], &first.final_states()[i], 2)
            .map_err(core_error)?;
        semigroup_defect = semigroup_defect.max(composed.max_abs_diff(&joint.final_states()[i]));
    }

    let rows: Vec<(&str, f64, f64, f64)> = vec![
        ("identity-defect", zero_defect, 0.0, 0.0),
        ("plateau-shift-defect", shift_defect, 0.0, EXACT_SHIFT_TOL),
        ("reversal-defect", reversal_defect, 0.0, REVERSAL_TOL),
        ("step-order-32-vs-64", orders[0], 4.0, ORDER_BAND),
        ("step-order-64-vs-128", orders[1], 4.0, ORDER_BAND),
        ("breakpoint-semigroup-defect", semigroup_defect, 0.0, SEMIGROUP_TOL),
    ];
    let mut csv = Sink::open(out)?;
    csv.row(["check", "value", "target", "tolerance", "pass"])?;
    let mut failures = 0usize;
    for (name, value, target, tol) in &rows {
        let ok = (value - target).abs() <= *tol;
        csv.row([
            name.to_string(),
            num(*value),
            num(*target),
            num(*tol),
            truth(ok),
        ])?;
        if !ok {
            failures += 1;
            eprintln!("flow: check '{name}': value {value:.6e} not within {tol:.1e} of {target}");
        }
    }
    csv.finish()?;
    Ok(Summary {
        pass: failures == 0,
        line: format!(
            "flow battery: {} checks, {failures} failures; identity {zero_defect:.1e}, \
             shift {shift_defect:.1e}, reversal {reversal_defect:.1e}, orders {orders:.3?}, \
             breakpoint {semigroup_defect:.1e}",
            rows.len()
        ),
    })
}

pub fn run_gronwall(args: &GronwallArgs) -> Result<Summary, CliError> {
    let ov = Overlay::load(args.common.config.as_deref())?;
    let out = ov.out_path(&args.common.out)?;
    match ov.get_opt("field", args.field.clone())? {
        Some(spec) => gronwall_single(args, &ov, out.as_deref(), &spec),
        None => gronwall_battery(out.as_deref()),
    }
}

fn gronwall_single(
    args: &GronwallArgs,
    ov: &Overlay,
    out: Option<&Path>,
    spec: &str,
) -> Result<Summary, CliError> {
    let d = config::check_dim(ov.get("d", args.common.d, 1)?)?;
    let n = config::check_level(ov.get("n", args.common.n, 1)?)?;
    let steps = ov.get("steps", args.common.steps, 64usize)?;
    let field = parse_field::<f64>(spec, d, n).map_err(core_error)?;
    let u = TimeField::autonomous(field);
    let region = seed_box(u.support(), ov.get_opt("box", args.common.box_radius)?, d);
    let seeds = lattice(&region, seeds_per_axis(d))?;
    let traj = integrate_flow(&u, &seeds, n, steps).map_err(core_error)?;
    let ppa = ov.get("grid", args.common.grid, default_points_per_axis(d))?;
    let norm_grid = SampleGrid::new(region, ppa, &[]).map_err(core_error)?;
    // a violated bound surfaces as an error here and exits with code 1
    let report = gronwall_monitor(&u, &traj, &norm_grid).map_err(core_error)?;

    let mut csv = Sink::open(out)?;
    csv.row([
        "t",
        "displacement",
        "amp_integral",
        "disp_margin",
        "w1_opnorm",
        "growth_bound",
        "growth_margin",
    ])?;
    for row in &report.rows {
        csv.row([
            num(row.t),
            num(row.displacement),
            num(row.amp_integral),
            num(row.amp_integral - row.displacement),
            num(row.w1_opnorm),
            num(row.growth_bound),
            num(row.growth_bound - row.w1_opnorm),
        ])?;
    }
    csv.finish()?;
    let last = report.rows.last().expect("snapshots exist");
    Ok(Summary {
        pass: true,
        line: format!(
            "gronwall: {spec}: both bounds held over {} snapshots; final margins \
             {:.3e} (displacement), {:.3e} (growth)",
            report.rows.len(),
            last.amp_integral - last.displacement,
            last.growth_bound - last.w1_opnorm
        ),
    })
}

/// Monitors across the standard flow set, with the plateau cases checked
/// for equality: constant fields make both bounds exact, linear-on-plateau
/// fields make the growth bound exact.
fn gronwall_battery(out: Option<&Path>) -> Result<Summary, CliError> {
    let seeds: Vec<Vec<f64>> = (0..9).map(|i| vec![-0.5 + 0.125 * i as f64]).collect();
    let wide: Vec<Vec<f64>> = (0..21).map(|i| vec![-1.5 + 0.15 * i as f64]).collect();
    let wide_grid = SampleGrid::new(Box64::centered(2.0, 1), 201, &[]).map_err(core_error)?;

    let shift = TimeField::autonomous(plateau_shift(0.25f64, 1).map_err(core_error)?);
    let shift_traj = integrate_flow(&shift, &seeds, 1, 128).map_err(core_error)?;
    let shift_grid = SampleGrid::new(Box64::centered(0.8, 1), 101, &[]).map_err(core_error)?;
    let shift_report = gronwall_monitor(&shift, &shift_traj, &shift_grid).map_err(core_error)?;

    let lin = TimeField::autonomous(linear_plateau_field(0.3f64, 1).map_err(core_error)?);
    let lin_traj = integrate_flow(&lin, &seeds, 1, 256).map_err(core_error)?;
    // the grid must reach past the largest displacement while staying on
    // the plateau, so both integrands are sampled exactly
    let lin_grid = SampleGrid::new(Box64::centered(0.7, 1), 101, &[]).map_err(core_error)?;
    let lin_report = gronwall_monitor(&lin, &lin_traj, &lin_grid).map_err(core_error)?;

    let smooth = TimeField::autonomous(gaussian_bump(1, 0.3f64, vec![0.2], 1.0, 1).map_err(core_error)?);
    let smooth_traj = integrate_flow(&smooth, &wide, 1, 256).map_err(core_error)?;
    let smooth_report = gronwall_monitor(&smooth, &smooth_traj, &wide_grid).map_err(core_error)?;

    let pieces = TimeField::piecewise_constant(vec![
        gaussian_bump(1, 0.3f64, vec![0.3], 1.0, 1).map_err(core_error)?,
        gaussian_bump(1, -0.2f64, vec![-0.4], 0.8, 1).map_err(core_error)?,
    ])
    .map_err(core_error)?;
    let piece_traj = integrate_flow(&pieces, &seeds, 1, 256).map_err(core_error)?;
    let piece_report = gronwall_monitor(&pieces, &piece_traj, &wide_grid).map_err(core_error)?;

    let mut csv = Sink::open(out)?;
    csv.row([
        "case",
        "t",
        "displacement",
        "amp_integral",
        "w1_opnorm",
        "growth_bound",
    ])?;
    let cases = [
        ("plateau-shift", &shift_report),
        ("linear-plateau", &lin_report),
        ("smooth", &smooth_report),
        ("breakpoint", &piece_report),
    ];
    for (name, report) in &cases {
        for row in &report.rows {
            csv.row([
                name.to_string(),
                num(row.t),
                num(row.displacement),
                num(row.amp_integral),
                num(row.w1_opnorm),
                num(row.growth_bound),
            ])?;
        }
    }
    csv.finish()?;

    let last = shift_report.rows.last().expect("snapshots exist");
    let disp_gap = (last.displacement - last.amp_integral).abs();
    let growth_gap = (last.w1_opnorm - last.growth_bound).abs();
    let lin_gap = lin_report
        .rows
        .last()
        .map(|r| (r.w1_opnorm - r.growth_bound).abs())
        .expect("snapshots exist");
    let mut failures = 0usize;
    for (name, gap) in [
        ("plateau-shift displacement", disp_gap),
        ("plateau-shift growth", growth_gap),
        ("linear-plateau growth", lin_gap),
    ] {
        if gap > MONITOR_EQUALITY_TOL {
            failures += 1;
            eprintln!(
                "gronwall: {name} gap {gap:.3e} exceeds the equality slack \
                 {MONITOR_EQUALITY_TOL:.0e}"
            );
        }
    }
    Ok(Summary {
        pass: failures == 0,
        line: format!(
            "gronwall battery: 4 cases held; plateau gaps {disp_gap:.1e}/{growth_gap:.1e}, \
             linear growth gap {lin_gap:.1e} (slack {MONITOR_EQUALITY_TOL:.0e})"
        ),
    })
}

pub fn run_flowmap(args: &FlowmapArgs) -> Result<Summary, CliError> {
    let ov = Overlay::load(args.common.config.as_deref())?;
    config::univariate(ov.get("d", args.common.d, 1)?, "flowmap-exponent")?;
    let n = config::check_level(ov.get("n", args.common.n, 2)?)?;
    let alpha = config::check_unit("alpha", ov.get("alpha", args.common.alpha, 0.3)?)?;
    let beta = config::check_unit("beta", ov.get("beta", args.common.beta, 0.9)?)?;
    config::check_strictly_ordered(alpha, beta)?;
    let steps = ov.get("steps", args.common.steps, 64usize)?;
    let pscale = config::check_positive("pscale", ov.get("pscale", args.pscale, 0.05f64)?)?;
    let u_field = match ov.get_opt("field", args.field.clone())? {
        Some(spec) => parse_field::<f64>(&spec, 1, n).map_err(core_error)?,
        None => gaussian_bump(1, 0.2f64, vec![0.1], 1.0, n).map_err(core_error)?,
    };
    let u = TimeField::autonomous(u_field);
    let rough = match ov.get_opt("perturbation", args.perturbation.clone())? {
        Some(spec) => parse_field::<f64>(&spec, 1, n).map_err(core_error)?,
        None => psi_field(n, beta, 1.0, 4.0).map_err(core_error)?,
    }
    .scale(pscale);
    let smooth = gaussian_bump(1, 0.15f64, vec![-0.2], 0.9, n).map_err(core_error)?;
    let eps = dyadic_eps(8);
    let radius = ov.get("box", args.common.box_radius, 2.0f64)?;
    let ppa = ov.get("grid", args.common.grid, 201usize)?;
    let grid = SampleGrid::new(Box64::centered(radius, 1), ppa, &[]).map_err(core_error)?;

    let rough_report =
        flowmap_exponent(&u, &rough, &eps, n, alpha, beta, steps, &grid).map_err(core_error)?;
    let smooth_report =
        flowmap_exponent(&u, &smooth, &eps, n, alpha, beta, steps, &grid).map_err(core_error)?;

    let out = ov.out_path(&args.common.out)?;
    let mut csv = Sink::open(out.as_deref())?;
    csv.row(["study", "eps", "distance", "perturbation_size", "ratio"])?;
    for (study, report) in [("rough", &rough_report), ("smooth", &smooth_report)] {
        for row in &report.rows {
            csv.row([
                study.to_string(),
                num(row.eps),
                num(row.distance),
                num(row.perturbation_size),
                num(row.ratio),
            ])?;
        }
    }
    csv.finish()?;

    let ratio_max = fold_max(rough_report.rows.iter().map(|r| r.ratio));
    let ratio_min = fold_min(rough_report.rows.iter().map(|r| r.ratio));
    let spread = ratio_max / ratio_min;
    let band_ok = ratio_min > 0.0 && spread <= RATIO_BAND_FACTOR;
    let slope = smooth_report.slope.unwrap_or(f64::NEG_INFINITY);
    let slope_ok = slope >= beta - alpha;
    if !band_ok {
        eprintln!(
            "flowmap-exponent: rough ratio spread {spread:.2}x exceeds {RATIO_BAND_FACTOR}x"
        );
    }
    if !slope_ok {
        eprintln!(
            "flowmap-exponent: smooth slope {slope:.4} below the floor {:.1}",
            beta - alpha
        );
    }
    Ok(Summary {
        pass: band_ok && slope_ok,
        line: format!(
            "flowmap-exponent: rough ratio spread {spread:.2}x over {} eps \
             (band {RATIO_BAND_FACTOR}x); smooth slope {slope:.4} vs floor {:.1}",
            rough_report.rows.len(),
            beta - alpha
        ),
    })
}
