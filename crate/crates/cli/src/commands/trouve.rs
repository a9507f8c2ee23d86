//! Reconstruction subcommands: the log-flow round trip and polygonal
//! interpolation through chained shifts.

use holoflow::fields::{parse_field, plateau_shift};
use holoflow::flow::integrate_flow;
use holoflow::group::DiffeoField;
use holoflow::hoelder::SampleGrid;
use holoflow::trouve::{polygon_field, roundtrip_error};
use holoflow::Box64;

use crate::config::{self, core_error, CliError, Overlay};
use crate::csvout::{num, truth, Sink};
use crate::{PolygonArgs, TrouveArgs};

use super::{Summary, POLYGON_TOL, RECONSTRUCTION_TOL};

pub fn run_trouve_roundtrip(args: &TrouveArgs) -> Result<Summary, CliError> {
    let ov = Overlay::load(args.common.config.as_deref())?;
    let d = config::check_dim(ov.get("d", args.common.d, 1)?)?;
    let n = config::check_level(ov.get("n", args.common.n, 1)?)?;
    let alpha = config::check_unit("alpha", ov.get("alpha", args.common.alpha, 0.3)?)?;
    let steps = ov.get("steps", args.common.steps, 4096usize)?;
    let spec = ov.get("phi", args.phi.clone(), "gaussian:0.1".to_string())?;
    let phi = parse_field::<f64>(&spec, d, n).map_err(core_error)?;

    let region = match ov.get_opt("box", args.common.box_radius)? {
        Some(r) => Box64::centered(r, d),
        None => phi.support().clone(),
    };
    let ppa = ov.get("grid", args.common.grid, 201usize)?;
    let grid = SampleGrid::new(region, ppa, &[]).map_err(core_error)?;
    let err = roundtrip_error(&phi, n, alpha, steps, &grid).map_err(core_error)?;
    let pass = err <= RECONSTRUCTION_TOL;

    let out = ov.out_path(&args.common.out)?;
    let mut csv = Sink::open(out.as_deref())?;
    csv.row(["phi", "n", "alpha", "steps", "error", "tolerance", "pass"])?;
    csv.row([
        spec.clone(),
        n.to_string(),
        num(alpha),
        steps.to_string(),
        num(err),
        num(RECONSTRUCTION_TOL),
        truth(pass),
    ])?;
    csv.finish()?;

    if !pass {
        eprintln!(
            "trouve-roundtrip: reconstruction error {err:.3e} exceeds {RECONSTRUCTION_TOL:.0e}"
        );
    }
    Ok(Summary {
        pass,
        line: format!(
            "trouve-roundtrip: {spec}: log-then-flow error {err:.3e} \
             (tolerance {RECONSTRUCTION_TOL:.0e}, {steps} steps)"
        ),
    })
}

pub fn run_polygon(args: &PolygonArgs) -> Result<Summary, CliError> {
    let ov = Overlay::load(args.common.config.as_deref())?;
    config::univariate(ov.get("d", args.common.d, 1)?, "polygon")?;
    let n = config::check_level(ov.get("n", args.common.n, 1)?)?;
    let steps = ov.get("steps", args.common.steps, 512usize)?;
    let raw = ov.get("shifts", args.shifts.clone(), "0.04,0.07".to_string())?;
    let shifts = config::parse_list_f64(&raw, "shifts")?;
    if shifts.is_empty() {
        return Err(CliError::usage("shifts must contain at least one value"));
    }

    // vertices are the running compositions of the plateau shifts, so the
    // polygon walks from the identity to the total shift
    let mut vertices: Vec<DiffeoField<f64>> = Vec::with_capacity(shifts.len());
    for &c in &shifts {
        let leg = DiffeoField::new(plateau_shift(c, n).map_err(core_error)?).map_err(core_error)?;
        let vertex = match vertices.last() {
            None => leg,
            Some(prev) => DiffeoField::compose(&leg, prev).map_err(core_error)?,
        };
        vertices.push(vertex);
    }
    let poly = polygon_field(&vertices).map_err(core_error)?;
    let seeds: Vec<Vec<f64>> = (0..9).map(|i| vec![-0.85 + 0.2125 * i as f64]).collect();
    let traj = integrate_flow(&poly, &seeds, n, steps).map_err(core_error)?;
    let total: f64 = shifts.iter().sum();

    let out = ov.out_path(&args.common.out)?;
    let mut csv = Sink::open(out.as_deref())?;
    csv.row(["seed", "endpoint", "target", "defect", "pass"])?;
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    for (seed, state) in seeds.iter().zip(traj.final_states()) {
        let endpoint = state.value()[0];
        let target = seed[0] + total;
        let defect = (endpoint - target).abs();
        worst = worst.max(defect);
        let ok = defect <= POLYGON_TOL;
        if !ok {
            failures += 1;
            eprintln!(
                "polygon: seed {s0}: endpoint {endpoint:.12} misses {target:.12} by {defect:.3e}",
                s0 = seed[0]
            );
        }
        csv.row([num(seed[0]), num(endpoint), num(target), num(defect), truth(ok)])?;
    }
    csv.finish()?;

    Ok(Summary {
        pass: failures == 0,
        line: format!(
            "polygon: {} legs into one field; worst endpoint defect {worst:.3e} \
             over {} seeds (tolerance {POLYGON_TOL:.0e})",
            shifts.len(),
            seeds.len()
        ),
    })
}
