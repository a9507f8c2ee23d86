//! Flows of time-dependent vector fields on `[0, 1]`, with simultaneous
//! transport of all spatial derivative jets of the flow map.
//!
//! The state for one seed is a full jet of the flow map at that seed:
//! value = position, first derivative = the Jacobian transport matrix,
//! higher derivatives = the higher variational tensors. Its time derivative
//! is exactly the jet of `u(t, .)` composed with the state, so one chain
//! rule evaluation advances everything at once.
//!
//! Fields may jump at finitely many time breakpoints. Steps are aligned so
//! every breakpoint is a step boundary, and stage evaluations at a segment's
//! right endpoint use the left limit, keeping each segment integration
//! untouched by its successor.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hoelder::{
    hoelder_norm_from, FieldTable, NormEstimate, PairScan, SampleGrid, DEFAULT_OPNORM_BUDGET,
    DEFAULT_PAIR_BUDGET,
};
use crate::jets::evaluator::{BoxRegion, JetEvaluator};
use crate::jets::{jet_compose, Jet};
use crate::scalar::Real;

/// Most step-boundary snapshots kept per trajectory (breakpoints and the
/// endpoints are always kept).
const MAX_OPTIONAL_SNAPSHOTS: usize = 64;

/// A time-dependent field `u(t, .)` on `t` in `[0, 1]`, possibly jumping at
/// finitely many interior breakpoints.
#[derive(Clone)]
pub struct TimeField<T> {
    dim: usize,
    order: usize,
    breakpoints: Vec<T>,
    autonomous: bool,
    /// `side = false` requests the left limit at a breakpoint.
    eval: Arc<dyn Fn(T, bool) -> JetEvaluator<T> + Send + Sync>,
    /// Pointwise amplitude cap: `sup_x |u(t, x)| <= majorant(t)`.
    majorant: Arc<dyn Fn(T) -> T + Send + Sync>,
    /// Numeric integral of the majorant over `[0, 1]`.
    l1_majorant: T,
    support: BoxRegion<T>,
    label: String,
}

impl<T: Real> TimeField<T> {
    pub fn zero(dim: usize, order: usize) -> Self {
        TimeField::autonomous(JetEvaluator::zero(dim, dim, order))
    }

    /// A field constant in time.
    pub fn autonomous(field: JetEvaluator<T>) -> Self {
        let bound = field.value_bound();
        let label = format!("const({})", field.label());
        let support = field.support().clone();
        let (dim, order) = (field.dim_in(), field.order());
        TimeField {
            dim,
            order,
            breakpoints: Vec::new(),
            autonomous: true,
            eval: Arc::new(move |_, _| field.clone()),
            majorant: Arc::new(move |_| bound),
            l1_majorant: bound,
            support,
            label,
        }
    }

    /// A field smooth in time on all of `[0, 1]`.
    pub fn time_varying(
        label: impl Into<String>,
        dim: usize,
        order: usize,
        support: BoxRegion<T>,
        amp_bound: T,
        eval: impl Fn(T) -> JetEvaluator<T> + Send + Sync + 'static,
    ) -> Self {
        TimeField {
            dim,
            order,
            breakpoints: Vec::new(),
            autonomous: false,
            eval: Arc::new(move |t, _| eval(t)),
            majorant: Arc::new(move |_| amp_bound),
            l1_majorant: amp_bound,
            support,
            label: label.into(),
        }
    }

    /// Concatenation: part `j` of `m` is compressed onto
    /// `[j/m, (j+1)/m]` and scaled by `m`, so flowing the result over
    /// `[0, 1]` runs each part's full flow in turn. Junctions become
    /// breakpoints.
    pub fn concat(parts: Vec<TimeField<T>>) -> Result<TimeField<T>> {
        if parts.is_empty() {
            return Err(Error::invalid("concatenation needs at least one part"));
        }
        let m = parts.len();
        let dim = parts[0].dim;
        let order = parts[0].order;
        if parts.iter().any(|p| p.dim != dim || p.order != order) {
            return Err(Error::invalid("concatenation parts must share shape"));
        }
        if m == 1 {
            return Ok(parts.into_iter().next().expect("nonempty"));
        }
        let scale = T::from_usize_exact(m);
        let mut breakpoints = Vec::new();
        for (j, p) in parts.iter().enumerate() {
            if j > 0 {
                breakpoints.push(T::from_usize_exact(j) / scale);
            }
            for &b in &p.breakpoints {
                breakpoints.push((T::from_usize_exact(j) + b) / scale);
            }
        }
        breakpoints.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        let support = parts
            .iter()
            .skip(1)
            .fold(parts[0].support.clone(), |acc, p| acc.union(&p.support));
        let l1 = parts
            .iter()
            .fold(T::zero(), |acc, p| acc + p.l1_majorant);
        let label = format!(
            "concat({})",
            parts
                .iter()
                .map(|p| p.label.as_str())
                .collect::<Vec<_>>()
                .join(";")
        );
        let parts = Arc::new(parts);
        let parts_for_m = Arc::clone(&parts);
        let eval = move |t: T, right: bool| {
            let (j, local) = segment_local(m, t, right);
            parts[j].eval_side(local, right).scale(scale)
        };
        let majorant = move |t: T| {
            let (j, local) = segment_local(m, t, true);
            scale * (parts_for_m[j].majorant)(local)
        };
        Ok(TimeField {
            dim,
            order,
            breakpoints,
            autonomous: false,
            eval: Arc::new(eval),
            majorant: Arc::new(majorant),
            l1_majorant: l1,
            support,
            label,
        })
    }

    /// Piecewise constant in time with uniform segments.
    pub fn piecewise_constant(fields: Vec<JetEvaluator<T>>) -> Result<TimeField<T>> {
        TimeField::concat(fields.into_iter().map(TimeField::autonomous).collect())
    }

    /// `t -> -u(1 - t)`; flowing it undoes the flow of `u`.
    pub fn time_reversed(&self) -> TimeField<T> {
        let inner = self.clone();
        let inner_m = self.clone();
        let mut breakpoints: Vec<T> = self
            .breakpoints
            .iter()
            .map(|&b| T::one() - b)
            .collect();
        breakpoints.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        TimeField {
            dim: self.dim,
            order: self.order,
            breakpoints,
            autonomous: self.autonomous,
            eval: Arc::new(move |t, right| {
                inner
                    .eval_side(T::one() - t, !right)
                    .scale(-T::one())
            }),
            majorant: Arc::new(move |t| (inner_m.majorant)(T::one() - t)),
            l1_majorant: self.l1_majorant,
            support: self.support.clone(),
            label: format!("reverse({})", self.label),
        }
    }

    /// `u + c w` for an autonomous perturbation `w`.
    pub fn add_autonomous(&self, w: &JetEvaluator<T>, c: T) -> Result<TimeField<T>> {
        if w.dim_in() != self.dim || w.dim_out() != self.dim {
            return Err(Error::invalid("perturbation dimension mismatch"));
        }
        let inner = self.clone();
        let w_owned = w.scale(c);
        let w_bound = w_owned.value_bound();
        let inner_m = self.clone();
        Ok(TimeField {
            dim: self.dim,
            order: self.order.min(w.order()),
            breakpoints: self.breakpoints.clone(),
            autonomous: self.autonomous,
            eval: Arc::new(move |t, right| {
                inner
                    .eval_side(t, right)
                    .sum(&w_owned)
                    .expect("validated shapes")
            }),
            majorant: Arc::new(move |t| (inner_m.majorant)(t) + w_bound),
            l1_majorant: self.l1_majorant + w_bound,
            support: self.support.union(w.support()),
            label: format!("{}+{}", self.label, w.label()),
        })
    }

    /// The field at time `t` (right limit at breakpoints).
    pub fn at(&self, t: T) -> JetEvaluator<T> {
        self.eval_side(t, true)
    }

    fn eval_side(&self, t: T, right: bool) -> JetEvaluator<T> {
        (self.eval)(t, right)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn support(&self) -> &BoxRegion<T> {
        &self.support
    }

    pub fn l1_majorant(&self) -> T {
        self.l1_majorant
    }

    pub fn majorant(&self, t: T) -> T {
        (self.majorant)(t)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn validate(&self) -> Result<()> {
        for w in self.breakpoints.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::invalid("breakpoints must be strictly increasing"));
            }
        }
        if self
            .breakpoints
            .iter()
            .any(|&b| b <= T::zero() || b >= T::one())
        {
            return Err(Error::invalid("breakpoints must lie strictly inside (0, 1)"));
        }
        Ok(())
    }
}

/// Which part of a concatenation owns time `t`, and the part-local time.
fn segment_local<T: Real>(m: usize, t: T, right: bool) -> (usize, T) {
    let scale = T::from_usize_exact(m);
    let mut scaled = t * scale;
    // snap to junctions so stored breakpoints like 1/3 hit them exactly
    let nearest = scaled.round();
    if (scaled - nearest).abs() <= T::lit(1e-12) {
        scaled = nearest;
    }
    let mut j = scaled.floor().to_f64_lossy() as usize;
    // left limits at junction j/m belong to part j-1
    if !right && scaled == scaled.floor() && j > 0 {
        j -= 1;
    }
    if j >= m {
        j = m - 1;
    }
    (j, scaled - T::from_usize_exact(j))
}

impl<T> std::fmt::Debug for TimeField<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TimeField").field("label", &self.label).finish()
    }
}

/// Snapshots of the flow of one field: `states[i][s]` is the full jet of
/// the flow map at `times[i]`, seed `s` (value = position, derivatives =
/// variational tensors).
#[derive(Debug, Clone)]
pub struct FlowTrajectory<T> {
    seeds: Vec<Vec<T>>,
    times: Vec<T>,
    states: Vec<Vec<Jet<T>>>,
    steps: usize,
    label: String,
}

impl<T: Real> FlowTrajectory<T> {
    pub fn seeds(&self) -> &[Vec<T>] {
        &self.seeds
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<Jet<T>>] {
        &self.states
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn final_states(&self) -> &[Jet<T>] {
        self.states.last().expect("nonempty trajectory")
    }

    /// Chart jets `Phi - Id` at the final time, one per seed.
    pub fn final_chart_jets(&self) -> Vec<Jet<T>> {
        self.final_states()
            .iter()
            .zip(&self.seeds)
            .map(|(state, seed)| crate::jets::chart_from_full(state, seed))
            .collect()
    }

    /// Largest distance any seed moved by the final time.
    pub fn max_displacement(&self) -> T {
        self.final_states()
            .iter()
            .zip(&self.seeds)
            .map(|(state, seed)| {
                state
                    .value()
                    .iter()
                    .zip(seed)
                    .map(|(a, b)| (*a - *b) * (*a - *b))
                    .sum::<T>()
                    .sqrt()
            })
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }
}

/// One integration step shared by all seeds: start time, step size, and the
/// three stage fields (start, midpoint, end; the end honors left limits at
/// segment boundaries).
struct StepPlan<T> {
    t: T,
    h: T,
    at_start: JetEvaluator<T>,
    at_mid: JetEvaluator<T>,
    at_end: JetEvaluator<T>,
}

fn build_step_plans<T: Real>(u: &TimeField<T>, steps: usize) -> Vec<StepPlan<T>> {
    let mut bounds = vec![T::zero()];
    bounds.extend_from_slice(u.breakpoints());
    bounds.push(T::one());
    let mut plans = Vec::new();
    let half = T::lit(0.5);
    for w in bounds.windows(2) {
        let len = w[1] - w[0];
        let n = (T::from_usize_exact(steps) * len)
            .round()
            .to_f64_lossy()
            .max(1.0) as usize;
        let h = len / T::from_usize_exact(n);
        for i in 0..n {
            let t = w[0] + T::from_usize_exact(i) * h;
            let t_end = if i + 1 == n {
                w[1]
            } else {
                w[0] + T::from_usize_exact(i + 1) * h
            };
            plans.push(StepPlan {
                t,
                h,
                at_start: u.eval_side(t, true),
                at_mid: u.eval_side(t + h * half, true),
                // last step of a segment: use the left limit at the boundary
                at_end: u.eval_side(t_end, i + 1 != n),
            });
        }
    }
    plans
}

/// `d/dt` of the state jet: the field's jet at the current position,
/// chained with the state.
fn flow_rhs<T: Real>(field: &JetEvaluator<T>, state: &Jet<T>, order: usize) -> Jet<T> {
    let g = field.eval(state.value());
    jet_compose(&g, state, order).expect("shapes fixed by integrator")
}

/// Integrates the flow of `u` from every seed over `[0, 1]`, transporting
/// jets to `order`. `steps` is the nominal step count for the whole
/// interval; each breakpoint segment gets its proportional share.
pub fn integrate_flow<T: Real>(
    u: &TimeField<T>,
    seeds: &[Vec<T>],
    order: usize,
    steps: usize,
) -> Result<FlowTrajectory<T>> {
    if steps == 0 {
        return Err(Error::invalid("need at least one step"));
    }
    if order == 0 || order > u.order() {
        return Err(Error::invalid(format!(
            "transport order {} must be in 1..={}",
            order,
            u.order()
        )));
    }
    if seeds.is_empty() {
        return Err(Error::invalid("need at least one seed"));
    }
    if seeds.iter().any(|s| s.len() != u.dim()) {
        return Err(Error::invalid("seed dimension mismatch"));
    }
    u.validate()?;
    if u.l1_majorant() == T::zero() {
        // zero field: the flow is the identity at every time
        let mut times = vec![T::zero()];
        times.extend_from_slice(u.breakpoints());
        times.push(T::one());
        let states: Vec<Vec<Jet<T>>> = times
            .iter()
            .map(|_| {
                seeds
                    .iter()
                    .map(|s| Jet::identity_at(s, order))
                    .collect()
            })
            .collect();
        return Ok(FlowTrajectory {
            seeds: seeds.to_vec(),
            times,
            states,
            steps,
            label: u.label().to_string(),
        });
    }
    let plans = build_step_plans(u, steps);
    let total = plans.len();
    let snapshot_after = snapshot_steps(u, &plans, total);
    let per_seed: Result<Vec<Vec<Jet<T>>>> = seeds
        .par_iter()
        .enumerate()
        .map(|(si, seed)| {
            let mut state = Jet::identity_at(seed, order);
            let mut snaps: Vec<Jet<T>> = vec![state.clone()];
            let sixth = T::lit(1.0 / 6.0);
            let half = T::lit(0.5);
            let two = T::lit(2.0);
            for (pi, plan) in plans.iter().enumerate() {
                let h = plan.h;
                let k1 = flow_rhs(&plan.at_start, &state, order);
                let k2 = flow_rhs(&plan.at_mid, &state.add_scaled(&k1, h * half), order);
                let k3 = flow_rhs(&plan.at_mid, &state.add_scaled(&k2, h * half), order);
                let k4 = flow_rhs(&plan.at_end, &state.add_scaled(&k3, h), order);
                let mut incr = k1;
                incr = incr.add_scaled(&k2, two);
                incr = incr.add_scaled(&k3, two);
                incr = incr.add(&k4);
                state = state.add_scaled(&incr, h * sixth);
                if !state.is_finite() {
                    return Err(Error::NumericalBlowup(format!(
                        "non-finite state at t = {} from seed {:?}",
                        (plan.t + h).to_f64_lossy(),
                        seed.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>()
                    )));
                }
                let det = state.deriv(1).det();
                if !(det > T::zero()) {
                    return Err(Error::FlowDegeneracy {
                        det: det.to_f64_lossy(),
                        time: (plan.t + h).to_f64_lossy(),
                        seed: si,
                    });
                }
                if snapshot_after.binary_search(&pi).is_ok() {
                    snaps.push(state.clone());
                }
            }
            Ok(snaps)
        })
        .collect();
    let per_seed = per_seed?;
    let mut times = vec![T::zero()];
    for &pi in &snapshot_after {
        times.push(plans[pi].t + plans[pi].h);
    }
    let snap_count = times.len();
    let mut states = vec![Vec::with_capacity(seeds.len()); snap_count];
    for seed_snaps in per_seed {
        for (ti, jet) in seed_snaps.into_iter().enumerate() {
            states[ti].push(jet);
        }
    }
    Ok(FlowTrajectory {
        seeds: seeds.to_vec(),
        times,
        states,
        steps,
        label: u.label().to_string(),
    })
}

/// Step indices after which to keep a snapshot: every segment end (these
/// cover all breakpoints and the final time) plus up to
/// `MAX_OPTIONAL_SNAPSHOTS` evenly spaced boundaries.
fn snapshot_steps<T: Real>(u: &TimeField<T>, plans: &[StepPlan<T>], total: usize) -> Vec<usize> {
    let mut keep = std::collections::BTreeSet::new();
    keep.insert(total - 1);
    let mut idx = 0usize;
    let bps = u.breakpoints();
    for (pi, plan) in plans.iter().enumerate() {
        let end = plan.t + plan.h;
        if idx < bps.len() && (end - bps[idx]).abs() <= T::lit(1e-14) {
            keep.insert(pi);
            idx += 1;
        }
    }
    let stride = (total / MAX_OPTIONAL_SNAPSHOTS).max(1);
    for pi in (0..total).step_by(stride) {
        if pi > 0 {
            keep.insert(pi - 1);
        }
    }
    keep.into_iter().collect()
}

/// Per-snapshot margins of the two a-priori bounds: displacement against
/// the integrated amplitude, and Jacobian growth against the exponential of
/// the integrated first-derivative norm.
#[derive(Debug, Clone)]
pub struct GronwallRow<T> {
    pub t: T,
    pub displacement: T,
    pub amp_integral: T,
    pub w1_opnorm: T,
    pub growth_bound: T,
}

#[derive(Debug, Clone)]
pub struct GronwallReport<T> {
    pub rows: Vec<GronwallRow<T>>,
}

pub const MONITOR_SLACK: f64 = 1e-6;

/// Checks, at every snapshot time `t`:
/// (a) `max_seed |Phi(t,x) - x| <= int_0^t sup|u(s)| ds`,
/// (b) `max_seed |W1(t)| <= exp(int_0^t sup|du(s)| ds)`.
/// Sup norms are sampled on `norm_grid`; time integrals use composite
/// Simpson with four panels per flow step. Bound (b) deliberately uses only
/// the first-derivative sup: that is what the linear variational equation
/// feeds on, and it is exact for fields linear on a plateau.
pub fn gronwall_monitor<T: Real>(
    u: &TimeField<T>,
    traj: &FlowTrajectory<T>,
    norm_grid: &SampleGrid<T>,
) -> Result<GronwallReport<T>> {
    let plans = build_step_plans(u, traj.steps());
    // cumulative integrals of the two integrands at step boundaries
    let mut cum_amp = vec![T::zero()];
    let mut cum_d1 = vec![T::zero()];
    let amp_d1 = |field: &JetEvaluator<T>| -> (T, T) {
        let mut amp = T::zero();
        let mut d1 = T::zero();
        for p in norm_grid.points() {
            let jet = field.eval(p);
            let a = jet
                .value()
                .iter()
                .map(|v| *v * *v)
                .sum::<T>()
                .sqrt();
            if a > amp {
                amp = a;
            }
            let n1 = jet.deriv(1).opnorm(DEFAULT_OPNORM_BUDGET);
            if n1 > d1 {
                d1 = n1;
            }
        }
        (amp, d1)
    };
    if u.is_autonomous() && u.l1_majorant() > T::zero() {
        let (amp, d1) = amp_d1(&u.at(T::zero()));
        let mut t_acc = T::zero();
        for plan in &plans {
            t_acc = t_acc + plan.h;
            cum_amp.push(amp * t_acc);
            cum_d1.push(d1 * t_acc);
        }
    } else if u.l1_majorant() == T::zero() {
        for _ in &plans {
            cum_amp.push(T::zero());
            cum_d1.push(T::zero());
        }
    } else {
        let amp_d1_ref = &amp_d1;
        let node_vals: Vec<(T, T)> = plans
            .par_iter()
            .flat_map_iter(|plan| {
                let q = plan.h * T::lit(0.25);
                (0..5).map(move |j| {
                    let tj = plan.t + T::from_usize_exact(j) * q;
                    let right = j < 4 || !is_segment_end(u, plan);
                    amp_d1_ref(&u.eval_side(tj.min(plan.t + plan.h), right))
                })
            })
            .collect();
        let w = [1.0, 4.0, 2.0, 4.0, 1.0];
        for (pi, plan) in plans.iter().enumerate() {
            let mut ia = T::zero();
            let mut id = T::zero();
            for j in 0..5 {
                let (a, d) = node_vals[pi * 5 + j];
                ia = ia + T::lit(w[j]) * a;
                id = id + T::lit(w[j]) * d;
            }
            let scale = plan.h / T::lit(12.0);
            cum_amp.push(cum_amp[pi] + ia * scale);
            cum_d1.push(cum_d1[pi] + id * scale);
        }
    }
    // map snapshot times to step-boundary indices
    let mut boundary_times = vec![T::zero()];
    for plan in &plans {
        boundary_times.push(plan.t + plan.h);
    }
    let slack = T::lit(MONITOR_SLACK);
    let mut rows = Vec::with_capacity(traj.times().len());
    for (ti, &t) in traj.times().iter().enumerate() {
        let bi = boundary_times
            .iter()
            .position(|&b| (b - t).abs() <= T::lit(1e-14))
            .ok_or_else(|| {
                Error::invalid("snapshot time is not a step boundary of this field")
            })?;
        let displacement = traj.states()[ti]
            .iter()
            .zip(traj.seeds())
            .map(|(s, seed)| {
                s.value()
                    .iter()
                    .zip(seed)
                    .map(|(a, b)| (*a - *b) * (*a - *b))
                    .sum::<T>()
                    .sqrt()
            })
            .fold(T::zero(), T::max);
        let w1 = traj.states()[ti]
            .iter()
            .map(|s| s.deriv(1).opnorm(DEFAULT_OPNORM_BUDGET))
            .fold(T::zero(), T::max);
        let amp_integral = cum_amp[bi];
        let growth_bound = cum_d1[bi].exp();
        if displacement > amp_integral + slack * (T::one() + amp_integral) {
            return Err(Error::MonitorFailure(format!(
                "displacement {} exceeds integrated amplitude {} at t = {}",
                displacement.to_f64_lossy(),
                amp_integral.to_f64_lossy(),
                t.to_f64_lossy()
            )));
        }
        if w1 > growth_bound + slack * (T::one() + growth_bound) {
            return Err(Error::MonitorFailure(format!(
                "Jacobian norm {} exceeds growth bound {} at t = {}",
                w1.to_f64_lossy(),
                growth_bound.to_f64_lossy(),
                t.to_f64_lossy()
            )));
        }
        rows.push(GronwallRow {
            t,
            displacement,
            amp_integral,
            w1_opnorm: w1,
            growth_bound,
        });
    }
    Ok(GronwallReport { rows })
}

fn is_segment_end<T: Real>(u: &TimeField<T>, plan: &StepPlan<T>) -> bool {
    let end = plan.t + plan.h;
    u.breakpoints()
        .iter()
        .any(|&b| (b - end).abs() <= T::lit(1e-14))
        || (end - T::one()).abs() <= T::lit(1e-14)
}

/// Builds a chart table (`Phi - Id` jets at the seeds) from a finished
/// trajectory whose seeds are exactly `grid.points()`.
pub fn chart_table<T: Real>(
    traj: &FlowTrajectory<T>,
    grid: &SampleGrid<T>,
    order: usize,
) -> Result<FieldTable<T>> {
    if traj.seeds() != grid.points() {
        return Err(Error::invalid("trajectory seeds must equal grid points"));
    }
    FieldTable::from_jets(grid, traj.final_chart_jets(), order)
}

/// `|Phi_u(1) - Phi_v(1)|_{n,alpha}` over the grid, via the transported
/// jets at the shared seeds.
pub fn flowmap_distance<T: Real>(
    u: &TimeField<T>,
    v: &TimeField<T>,
    n: usize,
    alpha: T,
    steps: usize,
    grid: &SampleGrid<T>,
) -> Result<NormEstimate<T>> {
    let seeds = grid.points().to_vec();
    let tu = integrate_flow(u, &seeds, n, steps)?;
    let tv = integrate_flow(v, &seeds, n, steps)?;
    flow_difference_norm(&tu, &tv, grid, n, alpha)
}

fn flow_difference_norm<T: Real>(
    a: &FlowTrajectory<T>,
    b: &FlowTrajectory<T>,
    grid: &SampleGrid<T>,
    n: usize,
    alpha: T,
) -> Result<NormEstimate<T>> {
    let ta = chart_table(a, grid, n)?;
    let tb = chart_table(b, grid, n)?;
    let diff = ta.sub(&tb)?;
    let scan = PairScan::build(&diff, n, DEFAULT_PAIR_BUDGET, DEFAULT_OPNORM_BUDGET)?;
    hoelder_norm_from(&diff, &scan, n, alpha, DEFAULT_OPNORM_BUDGET)
}

#[derive(Debug, Clone)]
pub struct FlowmapExponentRow<T> {
    pub eps: T,
    /// `|Phi_u(1) - Phi_{u+eps w}(1)|_{n,alpha}`.
    pub distance: T,
    /// `|eps w|` in the time-integrated `(n, beta)` norm.
    pub perturbation_size: T,
    /// `distance / perturbation_size^(beta - alpha)`.
    pub ratio: T,
}

#[derive(Debug, Clone)]
pub struct FlowmapExponentReport<T> {
    pub rows: Vec<FlowmapExponentRow<T>>,
    /// Least-squares slope of `log distance` against `log perturbation`;
    /// `None` when every distance vanishes.
    pub slope: Option<T>,
    pub max_ratio: T,
}

/// Perturbation study of the flow map: distances between the flows of `u`
/// and `u + eps w` against the perturbation size, for dyadic `eps`.
pub fn flowmap_exponent<T: Real>(
    u: &TimeField<T>,
    w: &JetEvaluator<T>,
    eps_list: &[T],
    n: usize,
    alpha: T,
    beta: T,
    steps: usize,
    grid: &SampleGrid<T>,
) -> Result<FlowmapExponentReport<T>> {
    if eps_list.len() < 3 {
        return Err(Error::invalid("need at least 3 perturbation sizes"));
    }
    if !(alpha > T::zero() && alpha < beta && beta <= T::one()) {
        return Err(Error::invalid("need 0 < alpha < beta <= 1"));
    }
    let grid_w = SampleGrid::new(
        w.support().clone(),
        crate::hoelder::default_points_per_axis(w.dim_in()),
        &[],
    )?;
    let w_norm = crate::hoelder::hoelder_norm(w, &grid_w, n, beta)?.value;
    let seeds = grid.points().to_vec();
    let base = integrate_flow(u, &seeds, n, steps)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    let mut max_ratio = T::zero();
    for &eps in eps_list {
        let perturbed = integrate_flow(&u.add_autonomous(w, eps)?, &seeds, n, steps)?;
        let distance = flow_difference_norm(&base, &perturbed, grid, n, alpha)?.value;
        let size = eps * w_norm;
        let ratio = if size == T::zero() {
            T::zero()
        } else {
            distance / size.powf(beta - alpha)
        };
        if ratio > max_ratio {
            max_ratio = ratio;
        }
        rows.push(FlowmapExponentRow {
            eps,
            distance,
            perturbation_size: size,
            ratio,
        });
    }
    let fit: Vec<(T, T)> = rows
        .iter()
        .filter(|r| r.distance > T::zero() && r.perturbation_size > T::zero())
        .map(|r| (r.perturbation_size.ln(), r.distance.ln()))
        .collect();
    let slope = least_squares_slope(&fit);
    Ok(FlowmapExponentReport {
        rows,
        slope,
        max_ratio,
    })
}

/// Slope of the least-squares line through `(x, y)` samples.
pub fn least_squares_slope<T: Real>(xy: &[(T, T)]) -> Option<T> {
    if xy.len() < 2 {
        return None;
    }
    let n = T::from_usize_exact(xy.len());
    let mx = xy.iter().map(|p| p.0).sum::<T>() / n;
    let my = xy.iter().map(|p| p.1).sum::<T>() / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for &(x, y) in xy {
        sxx = sxx + (x - mx) * (x - mx);
        sxy = sxy + (x - mx) * (y - my);
    }
    if sxx == T::zero() {
        None
    } else {
        Some(sxy / sxx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{gaussian_bump, plateau_shift};

    fn seeds_1d(lo: f64, hi: f64, count: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|i| vec![lo + (hi - lo) * i as f64 / (count - 1) as f64])
            .collect()
    }

    #[test]
    fn zero_field_flows_identically() {
        let u = TimeField::<f64>::zero(1, 2);
        let traj = integrate_flow(&u, &seeds_1d(-1.0, 1.0, 5), 2, 16).unwrap();
        assert_eq!(traj.times().first().copied(), Some(0.0));
        assert_eq!(traj.times().last().copied(), Some(1.0));
        for states in traj.states() {
            for (s, seed) in states.iter().zip(traj.seeds()) {
                assert_eq!(s.value(), &seed[..]);
                assert_eq!(s.deriv(1).data(), &[1.0]);
                assert_eq!(s.deriv(2).data(), &[0.0]);
            }
        }
    }

    #[test]
    fn plateau_constant_field_translates_exactly() {
        let u = TimeField::autonomous(plateau_shift(0.25f64, 2).unwrap());
        let traj = integrate_flow(&u, &seeds_1d(-0.5, 0.5, 9), 2, 64).unwrap();
        for (s, seed) in traj.final_states().iter().zip(traj.seeds()) {
            // within the plateau u = 0.25 and du = 0: straight translation
            assert!((s.value()[0] - seed[0] - 0.25).abs() < 1e-12);
            assert!((s.deriv(1).data()[0] - 1.0).abs() < 1e-12);
            assert!(s.deriv(2).data()[0].abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_transport_matches_linear_field() {
        // u(x) = a x on the plateau: Phi(t, x) = e^{at} x, W1 = e^{at}
        let a = 0.3f64;
        let lin = crate::fields::linear_plateau_field(a, 2).unwrap();
        let u = TimeField::autonomous(lin);
        let traj = integrate_flow(&u, &seeds_1d(-0.5, 0.5, 9), 2, 256).unwrap();
        for (s, seed) in traj.final_states().iter().zip(traj.seeds()) {
            let expect = a.exp() * seed[0];
            assert!(
                (s.value()[0] - expect).abs() < 1e-10,
                "position {} vs {}",
                s.value()[0],
                expect
            );
            assert!((s.deriv(1).data()[0] - a.exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn reversal_returns_to_seeds() {
        let u = TimeField::autonomous(gaussian_bump(1, 0.3f64, vec![0.2], 1.0, 2).unwrap());
        let fwd = integrate_flow(&u, &seeds_1d(-1.5, 1.5, 21), 2, 512).unwrap();
        let back_seeds: Vec<Vec<f64>> = fwd
            .final_states()
            .iter()
            .map(|s| s.value().to_vec())
            .collect();
        let back = integrate_flow(&u.time_reversed(), &back_seeds, 2, 512).unwrap();
        for (endpoint, seed) in back.final_states().iter().zip(fwd.seeds()) {
            assert!(
                (endpoint.value()[0] - seed[0]).abs() < 1e-8,
                "returned to {} from {}",
                endpoint.value()[0],
                seed[0]
            );
        }
    }

    #[test]
    fn empirical_convergence_order_is_four() {
        let u = TimeField::time_varying(
            "pulsing bump",
            1,
            2,
            BoxRegion::centered(7.2, 1),
            0.6,
            |t: f64| {
                gaussian_bump(1, 0.4 * (1.0 + 0.5 * t), vec![0.1], 1.0, 2).unwrap()
            },
        );
        let seeds = seeds_1d(-1.0, 1.0, 7);
        let errs: Vec<f64> = [32usize, 64, 128]
            .iter()
            .map(|&n| {
                let a = integrate_flow(&u, &seeds, 1, n).unwrap();
                let b = integrate_flow(&u, &seeds, 1, 2 * n).unwrap();
                a.final_states()
                    .iter()
                    .zip(b.final_states())
                    .map(|(x, y)| (x.value()[0] - y.value()[0]).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(
                (order - 4.0).abs() < 0.5,
                "empirical order {order} from errors {errs:?}"
            );
        }
    }

    #[test]
    fn breakpoint_concatenation_matches_composed_flows() {
        let f1 = gaussian_bump(1, 0.3f64, vec![0.3], 1.0, 2).unwrap();
        let f2 = gaussian_bump(1, -0.2f64, vec![-0.4], 0.8, 2).unwrap();
        let seeds = seeds_1d(-1.0, 1.0, 9);
        let w = TimeField::piecewise_constant(vec![f1.clone(), f2.clone()]).unwrap();
        assert_eq!(w.breakpoints(), &[0.5]);
        let joint = integrate_flow(&w, &seeds, 2, 512).unwrap();
        let a = integrate_flow(&TimeField::autonomous(f1), &seeds, 2, 256).unwrap();
        let a_ends: Vec<Vec<f64>> = a
            .final_states()
            .iter()
            .map(|s| s.value().to_vec())
            .collect();
        let b = integrate_flow(&TimeField::autonomous(f2), &a_ends, 2, 256).unwrap();
        for i in 0..seeds.len() {
            let composed =
                crate::jets::jet_compose(&b.final_states()[i], &a.final_states()[i], 2)
                    .unwrap();
            let direct = &joint.final_states()[i];
            assert!(
                composed.max_abs_diff(direct) < 1e-10,
                "seed {i}: semigroup defect {}",
                composed.max_abs_diff(direct)
            );
        }
    }

    #[test]
    fn monitors_pass_with_equality_on_plateau_fields() {
        let u = TimeField::autonomous(plateau_shift(0.25f64, 1).unwrap());
        let seeds = seeds_1d(-0.5, 0.5, 9);
        let traj = integrate_flow(&u, &seeds, 1, 128).unwrap();
        let grid = SampleGrid::new(BoxRegion::centered(0.5, 1), 101, &[]).unwrap();
        let report = gronwall_monitor(&u, &traj, &grid).unwrap();
        let last = report.rows.last().unwrap();
        // constant field: displacement equals the integral exactly
        assert!((last.displacement - last.amp_integral).abs() < 1e-10);
        assert!((last.displacement - 0.25).abs() < 1e-12);
        // du = 0 on the plateau: growth bound exactly 1
        assert!((last.growth_bound - 1.0).abs() < 1e-12);
        assert!((last.w1_opnorm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monitor_growth_equality_for_linear_field() {
        let a = 0.3f64;
        let lin = crate::fields::linear_plateau_field(a, 1).unwrap();
        let u = TimeField::autonomous(lin);
        let seeds = seeds_1d(-0.5, 0.5, 9);
        let traj = integrate_flow(&u, &seeds, 1, 256).unwrap();
        // grid must stay inside the plateau (du = a exactly there) but
        // reach past the largest displacement so bound (a) is honest
        let grid = SampleGrid::new(BoxRegion::centered(0.7, 1), 101, &[]).unwrap();
        let report = gronwall_monitor(&u, &traj, &grid).unwrap();
        let last = report.rows.last().unwrap();
        assert!(
            (last.w1_opnorm - last.growth_bound).abs() < 1e-10,
            "W1 {} vs bound {}",
            last.w1_opnorm,
            last.growth_bound
        );
    }

    #[test]
    fn flowmap_distance_vanishes_for_equal_fields() {
        let u = TimeField::autonomous(gaussian_bump(1, 0.2f64, vec![0.0], 1.0, 2).unwrap());
        let grid = SampleGrid::new(BoxRegion::centered(2.0, 1), 201, &[]).unwrap();
        let d = flowmap_distance(&u, &u.clone(), 1, 0.5, 64, &grid).unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn flowmap_exponent_smooth_slope_near_one() {
        let u = TimeField::autonomous(gaussian_bump(1, 0.2f64, vec![0.1], 1.0, 2).unwrap());
        let w = gaussian_bump(1, 0.15f64, vec![-0.2], 0.9, 2).unwrap();
        let grid = SampleGrid::new(BoxRegion::centered(2.0, 1), 201, &[]).unwrap();
        let eps = [0.5, 0.25, 0.125, 0.0625];
        let rep = flowmap_exponent(&u, &w, &eps, 1, 0.3, 0.9, 64, &grid).unwrap();
        let slope = rep.slope.expect("nonzero distances");
        assert!((slope - 1.0).abs() < 0.1, "slope {slope}");
        assert!(rep.max_ratio.is_finite());
    }

    #[test]
    fn degenerate_arguments_are_rejected() {
        let u = TimeField::<f64>::zero(1, 2);
        assert!(integrate_flow(&u, &[], 1, 16).is_err());
        assert!(integrate_flow(&u, &seeds_1d(0.0, 1.0, 3), 0, 16).is_err());
        assert!(integrate_flow(&u, &seeds_1d(0.0, 1.0, 3), 3, 16).is_err());
        assert!(integrate_flow(&u, &seeds_1d(0.0, 1.0, 3), 1, 0).is_err());
        let grid = SampleGrid::new(BoxRegion::centered(1.0f64, 1), 11, &[]).unwrap();
        let w = gaussian_bump(1, 0.1f64, vec![0.0], 1.0, 2).unwrap();
        assert!(flowmap_exponent(&u, &w, &[0.5, 0.25], 1, 0.3, 0.9, 16, &grid).is_err());
    }
}
