//! One function per subcommand. Each resolves its parameters, runs the
//! experiment, writes CSV, identifies failing rows on stderr, and returns
//! a verdict summary.

pub mod flows;
pub mod groups;
pub mod norms;
pub mod pathologies;
pub mod trouve;

pub struct Summary {
    pub pass: bool,
    pub line: String,
}

/// Window around the expected log-log slopes.
pub const SLOPE_BAND: f64 = 0.01;
/// Allowed spread of perturbation-response ratios across dyadic eps.
pub const RATIO_BAND_FACTOR: f64 = 10.0;
/// Position agreement for a diffeomorphism composed with its inverse.
pub const INVERSE_VALUE_TOL: f64 = 1e-9;
/// Whole-jet agreement for the same round trip.
pub const INVERSE_JET_TOL: f64 = 1e-6;
/// Plateau translation against its closed form.
pub const EXACT_SHIFT_TOL: f64 = 1e-12;
/// Forward-then-reversed flow against the identity.
pub const REVERSAL_TOL: f64 = 1e-6;
/// Window around the integrator's theoretical convergence order 4.
pub const ORDER_BAND: f64 = 0.5;
/// Joint flow against composed per-segment flows across a breakpoint.
pub const SEMIGROUP_TOL: f64 = 1e-10;
/// Monitor equality slack on fields where the bounds are sharp.
pub const MONITOR_EQUALITY_TOL: f64 = 1e-10;
/// Time-1 flow of a reconstructed field against its prescribed chart.
pub const RECONSTRUCTION_TOL: f64 = 1e-4;
/// Polygon endpoint against the composed shift.
pub const POLYGON_TOL: f64 = 1e-8;

pub fn dyadic_eps(count: usize) -> Vec<f64> {
    (1..=count).map(|e| 0.5f64.powi(e as i32)).collect()
}

pub fn fold_max(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(f64::NEG_INFINITY, f64::max)
}

pub fn fold_min(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(f64::INFINITY, f64::min)
}
