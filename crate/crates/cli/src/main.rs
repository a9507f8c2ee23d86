//! Batch front door: every experiment in the library runs as one
//! subcommand, writes CSV (stdout or `--out`), and prints a one-line
//! verdict on stderr. Exit codes: 0 all assertions passed, 1 an assertion
//! failed (the failing row is identified on stderr), 2 usage or
//! configuration error.

mod commands;
mod config;
mod csvout;

use std::path::PathBuf;
use std::process;

use clap::{Args, Parser, Subcommand};

use config::CliError;

#[derive(Parser)]
#[command(
    name = "holoflow",
    version,
    about = "Hoelder-space experiments: norms, diffeomorphism groups, and flows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. A `--config` file of key=value pairs
/// (keys named like the long flags) can supply any of them; explicit flags
/// win. Fields are addressed by the zoo grammar
/// `zero | chi | plateau-shift:c | gaussian:a | psi:n:beta`, joined with `+`.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Key=value defaults file, one pair per line, `#` starts a comment.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// CSV destination; stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Seed for the randomized batteries.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Differentiability level, 1..=4.
    #[arg(long)]
    pub n: Option<usize>,
    /// Upper Hoelder exponent in (0, 1].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Lower Hoelder exponent in (0, 1].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Modulus exponent, positive.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Ambient dimension, 1..=3.
    #[arg(long)]
    pub d: Option<usize>,
    /// Sample points per axis.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Half-width of the centered sample box.
    #[arg(long = "box", value_name = "RADIUS")]
    pub box_radius: Option<f64>,
    /// Point-pair budget for seminorm scans.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Integrator step count over [0, 1].
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate sup norms, the top seminorm, and the full norm of a field.
    Norms(NormsArgs),
    /// Check the three-exponent norm interpolation inequality.
    Interpolation(InterpolationArgs),
    /// Check the norm comparison between two smoothness classes.
    Inclusion(InclusionArgs),
    /// Check the first-order norm growth bound under composition.
    ComposeBound(ComposeBoundArgs),
    /// Round-trip random diffeomorphisms through numerical inversion.
    Invert(InvertArgs),
    /// Response of inverse charts to rough chart perturbations.
    InvHolder(InvHolderArgs),
    /// Check the determinant bound on inverse matrix norms.
    MatrixBound(MatrixBoundArgs),
    /// Integrate a flow (or, without --field, run the correctness battery).
    Flow(FlowArgs),
    /// Displacement and Jacobian-growth monitors along a flow.
    Gronwall(GronwallArgs),
    /// Response of the time-1 flow map to field perturbations.
    FlowmapExponent(FlowmapArgs),
    /// Flow the field reconstructed from a chart back onto that chart.
    TrouveRoundtrip(TrouveArgs),
    /// Run a polygon of plateau shifts and check the composite endpoint.
    Polygon(PolygonArgs),
    /// Transport the kink by shrinking charts; the distance refuses to drop.
    Disc(DiscArgs),
    /// Translation quotient of the kink against its closed form.
    Optimal(OptimalArgs),
    /// Pairwise gaps between translates of the kink.
    Separability(SeparabilityArgs),
    /// Classify a modulus of continuity as slowly vanishing or not.
    Modulus(ModulusArgs),
}

#[derive(Args)]
pub struct NormsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Field description, e.g. `gaussian:0.5 + psi:1:0.7`.
    #[arg(long)]
    pub field: Option<String>,
}

#[derive(Args)]
pub struct InterpolationArgs {
    #[command(flatten)]
    pub common: Common,
    /// Check this one field with --alpha/--beta/--gamma instead of the
    /// 100-field random battery (which fixes its own levels and triples).
    #[arg(long)]
    pub field: Option<String>,
}

#[derive(Args)]
pub struct InclusionArgs {
    #[command(flatten)]
    pub common: Common,
    /// Field description.
    #[arg(long)]
    pub field: Option<String>,
    /// Coarse differentiability level; defaults to n.
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Args)]
pub struct ComposeBoundArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args)]
pub struct InvertArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args)]
pub struct InvHolderArgs {
    #[command(flatten)]
    pub common: Common,
    /// Base chart; defaults to an off-center gaussian bump of height 0.1.
    #[arg(long)]
    pub phi: Option<String>,
    /// Perturbation direction; defaults to the kink `psi:n:beta`.
    #[arg(long)]
    pub perturbation: Option<String>,
    /// Perturbation amplitude.
    #[arg(long)]
    pub pscale: Option<f64>,
}

#[derive(Args)]
pub struct MatrixBoundArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args)]
pub struct FlowArgs {
    #[command(flatten)]
    pub common: Common,
    /// Velocity field; without it the correctness battery runs (the
    /// battery fixes its own fields and step counts).
    #[arg(long)]
    pub field: Option<String>,
}

#[derive(Args)]
pub struct GronwallArgs {
    #[command(flatten)]
    pub common: Common,
    /// Velocity field; without it the monitor battery runs, including the
    /// plateau cases where both bounds are exact.
    #[arg(long)]
    pub field: Option<String>,
}

#[derive(Args)]
pub struct FlowmapArgs {
    #[command(flatten)]
    pub common: Common,
    /// Base velocity field; defaults to an off-center gaussian bump.
    #[arg(long)]
    pub field: Option<String>,
    /// Rough perturbation direction; defaults to the kink `psi:n:beta`.
    #[arg(long)]
    pub perturbation: Option<String>,
    /// Perturbation amplitude.
    #[arg(long)]
    pub pscale: Option<f64>,
}

#[derive(Args)]
pub struct TrouveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Target chart to reconstruct and reach.
    #[arg(long)]
    pub phi: Option<String>,
}

#[derive(Args)]
pub struct PolygonArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated plateau shifts, one polygon leg each.
    #[arg(long)]
    pub shifts: Option<String>,
}

#[derive(Args)]
pub struct DiscArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated chart sizes k.
    #[arg(long)]
    pub k: Option<String>,
}

#[derive(Args)]
pub struct OptimalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated translation scales s.
    #[arg(long)]
    pub s: Option<String>,
}

#[derive(Args)]
pub struct SeparabilityArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated translations in [0, 1].
    #[arg(long)]
    pub t: Option<String>,
}

#[derive(Args)]
pub struct ModulusArgs {
    #[command(flatten)]
    pub common: Common,
    /// Modulus of continuity: `slow-log` or `power:p`.
    #[arg(long)]
    pub omega: Option<String>,
}

/// `HOLOFLOW_THREADS` caps the worker pool; inner loops parallelize, the
/// command layer itself is sequential.
fn cap_threads() -> Result<(), CliError> {
    match std::env::var("HOLOFLOW_THREADS") {
        Ok(raw) => {
            let k: usize = raw.parse().map_err(|_| {
                CliError::usage(format!(
                    "HOLOFLOW_THREADS must be a positive integer, got '{raw}'"
                ))
            })?;
            if k == 0 {
                return Err(CliError::usage(
                    "HOLOFLOW_THREADS must be a positive integer",
                ));
            }
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            Ok(())
        }
        Err(_) => Ok(()),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            process::exit(code);
        }
    };
    if let Err(e) = cap_threads() {
        eprintln!("error: {}", e.message);
        process::exit(e.code);
    }
    let result = match &cli.command {
        Command::Norms(a) => commands::norms::run_norms(a),
        Command::Interpolation(a) => commands::norms::run_interpolation(a),
        Command::Inclusion(a) => commands::norms::run_inclusion(a),
        Command::ComposeBound(a) => commands::groups::run_compose_bound(a),
        Command::Invert(a) => commands::groups::run_invert(a),
        Command::InvHolder(a) => commands::groups::run_inv_holder(a),
        Command::MatrixBound(a) => commands::groups::run_matrix_bound(a),
        Command::Flow(a) => commands::flows::run_flow(a),
        Command::Gronwall(a) => commands::flows::run_gronwall(a),
        Command::FlowmapExponent(a) => commands::flows::run_flowmap(a),
        Command::TrouveRoundtrip(a) => commands::trouve::run_trouve_roundtrip(a),
        Command::Polygon(a) => commands::trouve::run_polygon(a),
        Command::Disc(a) => commands::pathologies::run_disc(a),
        Command::Optimal(a) => commands::pathologies::run_optimal(a),
        Command::Separability(a) => commands::pathologies::run_separability(a),
        Command::Modulus(a) => commands::pathologies::run_modulus(a),
    };
    match result {
        Ok(summary) => {
            let tag = if summary.pass { "PASS" } else { "FAIL" };
            eprintln!("[{tag}] {}", summary.line);
            process::exit(if summary.pass { 0 } else { 1 });
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            process::exit(e.code);
        }
    }
}
