//! Method-of-lines integration on a 1-D interval with zero-flux ends.
//!
//! Space: second-order central differences, boundary nodes closed with
//! mirror ghost nodes. Time: classical RK4 under an explicit stability
//! bound. [`ode_reference`] integrates the homogeneous reduction with an
//! adaptive Dormand–Prince pair and serves as the oracle for homogeneous
//! runs.

use crate::error::{Error, Result};
use crate::model::{derived, reaction_unchecked, DerivedQuantities, InitialBounds, ModelParams, PointState};

/// Uniform node-centred grid on `[0, length]`, ends included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub length: f64,
    pub n_cells: usize,
}

impl Grid1D {
    pub fn new(length: f64, n_cells: usize) -> Result<Self> {
        if n_cells < 3 {
            return Err(Error::Grid(format!("need at least 3 nodes, got {n_cells}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Grid(format!("length must be positive, got {length}")));
        }
        Ok(Self { length, n_cells })
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.n_cells - 1) as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_cells).map(|k| k as f64 * h).collect()
    }

    /// Trapezoid rule over the nodes.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_cells);
        let n = values.len();
        let inner: f64 = values[1..n - 1].iter().sum();
        self.spacing() * (inner + 0.5 * (values[0] + values[n - 1]))
    }
}

/// The three density fields at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub h: Vec<f64>,
    pub i: Vec<f64>,
    pub v: Vec<f64>,
}

impl FieldState {
    pub fn constant(grid: &Grid1D, s: PointState) -> Self {
        let n = grid.n_cells;
        Self {
            t: 0.0,
            h: vec![s.h; n],
            i: vec![s.i; n],
            v: vec![s.v; n],
        }
    }

    pub fn from_fn(grid: &Grid1D, f: impl Fn(f64) -> PointState) -> Self {
        let pts: Vec<PointState> = grid.positions().into_iter().map(f).collect();
        Self {
            t: 0.0,
            h: pts.iter().map(|s| s.h).collect(),
            i: pts.iter().map(|s| s.i).collect(),
            v: pts.iter().map(|s| s.v).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn point(&self, k: usize) -> PointState {
        PointState::new(self.h[k], self.i[k], self.v[k])
    }

    pub fn points(&self) -> impl Iterator<Item = PointState> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }

    /// Smallest value over all three fields.
    pub fn min_value(&self) -> f64 {
        self.h
            .iter()
            .chain(&self.i)
            .chain(&self.v)
            .fold(f64::INFINITY, |m, &x| m.min(x))
    }

    /// `max_x (H + I)` and `max_x V`.
    pub fn maxima(&self) -> (f64, f64) {
        let cells = self
            .h
            .iter()
            .zip(&self.i)
            .fold(f64::NEG_INFINITY, |m, (h, i)| m.max(h + i));
        let virions = self.v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        (cells, virions)
    }

    pub fn initial_bounds(&self) -> InitialBounds {
        let (cells_max, virions_max) = self.maxima();
        InitialBounds { cells_max, virions_max }
    }

    /// Largest spatial variation of any field.
    pub fn spatial_variation(&self) -> f64 {
        [&self.h, &self.i, &self.v]
            .iter()
            .map(|f| {
                let (lo, hi) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                    (lo.min(x), hi.max(x))
                });
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    /// Sup-norm distance to a homogeneous state.
    pub fn distance_to(&self, s: PointState) -> f64 {
        self.points().map(|q| (q - s).sup_norm()).fold(0.0, f64::max)
    }

    fn validate(&self, grid: &Grid1D, scale: f64) -> Result<()> {
        let n = grid.n_cells;
        if self.h.len() != n || self.i.len() != n || self.v.len() != n {
            return Err(Error::Grid(format!(
                "field lengths ({}, {}, {}) do not match {n} nodes",
                self.h.len(),
                self.i.len(),
                self.v.len()
            )));
        }
        check_finite(self)?;
        let floor = -1e-12 * scale;
        if self.min_value() < floor {
            return Err(Error::Domain(format!(
                "initial data has a value below {floor:e}: {}",
                self.min_value()
            )));
        }
        Ok(())
    }
}

fn check_finite(s: &FieldState) -> Result<()> {
    for (field, values) in [("H", &s.h), ("I", &s.i), ("V", &s.v)] {
        if let Some(node) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::IntegrationFailure { t: s.t, node, field });
        }
    }
    Ok(())
}

/// Discrete Neumann Laplacian, written into `out`.
pub fn laplacian_neumann_into(field: &[f64], spacing: f64, out: &mut [f64]) -> Result<()> {
    let n = field.len();
    if n < 3 {
        return Err(Error::Grid(format!("Laplacian needs at least 3 nodes, got {n}")));
    }
    debug_assert_eq!(out.len(), n);
    let inv = 1.0 / (spacing * spacing);
    out[0] = 2.0 * (field[1] - field[0]) * inv;
    for k in 1..n - 1 {
        out[k] = (field[k - 1] - 2.0 * field[k] + field[k + 1]) * inv;
    }
    out[n - 1] = 2.0 * (field[n - 2] - field[n - 1]) * inv;
    Ok(())
}

pub fn laplacian_neumann(field: &[f64], spacing: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; field.len()];
    laplacian_neumann_into(field, spacing, &mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    /// Largest stable step times the safety factor.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: TimeStep,
    pub t_end: f64,
    /// Steps between snapshots; `None` targets about 200 snapshots.
    pub snapshot_stride: Option<usize>,
    pub positivity_clamp: bool,
    pub cfl_safety: f64,
    /// Abort the run on the first monitor violation instead of recording it.
    pub fail_on_violation: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: TimeStep::Auto,
            t_end: 10.0,
            snapshot_stride: None,
            positivity_clamp: false,
            cfl_safety: 0.5,
            fail_on_violation: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid("t_end", format!("must be > 0 (got {})", self.t_end)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::invalid(
                "cfl_safety",
                format!("must lie in (0, 1] (got {})", self.cfl_safety),
            ));
        }
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::invalid("dt", format!("must be > 0 (got {dt})")));
            }
        }
        if self.snapshot_stride == Some(0) {
            return Err(Error::invalid("snapshot_stride", "must be >= 1"));
        }
        Ok(())
    }
}

/// Rate bound used for the reaction part of the step restriction.
pub fn stiffest_reaction_rate(p: &ModelParams, dq: &DerivedQuantities) -> f64 {
    p.healthy_death
        + p.infected_removal()
        + p.clearance
        + p.effective_transmission() * dq.virions_bound / p.saturation[0]
}

/// Largest explicit step allowed by diffusion and reaction, scaled by `safety`.
pub fn stable_dt(p: &ModelParams, grid: &Grid1D, dq: &DerivedQuantities, safety: f64) -> f64 {
    let h = grid.spacing();
    let d_max = p.diffusion.iter().copied().fold(0.0, f64::max);
    let diffusive = h * h / (2.0 * d_max);
    let reactive = 1.0 / stiffest_reaction_rate(p, dq);
    safety * diffusive.min(reactive)
}

#[derive(Clone)]
struct Triple {
    h: Vec<f64>,
    i: Vec<f64>,
    v: Vec<f64>,
}

impl Triple {
    fn zeros(n: usize) -> Self {
        Self {
            h: vec![0.0; n],
            i: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// RK4 stepper with preallocated stage buffers.
pub struct Stepper {
    params: ModelParams,
    grid: Grid1D,
    stages: [Triple; 4],
    scratch: Triple,
    lap: Vec<f64>,
}

impl Stepper {
    pub fn new(params: ModelParams, grid: Grid1D) -> Self {
        let n = grid.n_cells;
        Self {
            params,
            grid,
            stages: [Triple::zeros(n), Triple::zeros(n), Triple::zeros(n), Triple::zeros(n)],
            scratch: Triple::zeros(n),
            lap: vec![0.0; n],
        }
    }

    fn rhs(params: &ModelParams, spacing: f64, lap: &mut [f64], h: &[f64], i: &[f64], v: &[f64], out: &mut Triple) {
        let [d1, d2, d3] = params.diffusion;
        laplacian_neumann_into(h, spacing, lap).expect("grid has >= 3 nodes");
        for (o, l) in out.h.iter_mut().zip(lap.iter()) {
            *o = d1 * l;
        }
        laplacian_neumann_into(i, spacing, lap).expect("grid has >= 3 nodes");
        for (o, l) in out.i.iter_mut().zip(lap.iter()) {
            *o = d2 * l;
        }
        laplacian_neumann_into(v, spacing, lap).expect("grid has >= 3 nodes");
        for (o, l) in out.v.iter_mut().zip(lap.iter()) {
            *o = d3 * l;
        }
        for k in 0..h.len() {
            let f = reaction_unchecked(params, PointState::new(h[k], i[k], v[k]));
            out.h[k] += f.h;
            out.i[k] += f.i;
            out.v[k] += f.v;
        }
    }

    /// Advances `s` by `dt` in place. Returns the total magnitude removed by
    /// the positivity clamp (zero when clamping is off).
    pub fn step(&mut self, s: &mut FieldState, dt: f64, clamp: bool) -> Result<f64> {
        let spacing = self.grid.spacing();
        let p = self.params;
        let n = s.len();
        let weights = [0.5 * dt, 0.5 * dt, dt];

        Self::rhs(&p, spacing, &mut self.lap, &s.h, &s.i, &s.v, &mut self.stages[0]);
        for stage in 1..4 {
            let w = weights[stage - 1];
            let prev = &self.stages[stage - 1];
            for k in 0..n {
                self.scratch.h[k] = s.h[k] + w * prev.h[k];
                self.scratch.i[k] = s.i[k] + w * prev.i[k];
                self.scratch.v[k] = s.v[k] + w * prev.v[k];
            }
            Self::rhs(
                &p,
                spacing,
                &mut self.lap,
                &self.scratch.h,
                &self.scratch.i,
                &self.scratch.v,
                &mut self.stages[stage],
            );
        }

        let c = dt / 6.0;
        let [k1, k2, k3, k4] = &self.stages;
        for k in 0..n {
            s.h[k] += c * (k1.h[k] + 2.0 * k2.h[k] + 2.0 * k3.h[k] + k4.h[k]);
            s.i[k] += c * (k1.i[k] + 2.0 * k2.i[k] + 2.0 * k3.i[k] + k4.i[k]);
            s.v[k] += c * (k1.v[k] + 2.0 * k2.v[k] + 2.0 * k3.v[k] + k4.v[k]);
        }
        s.t += dt;
        check_finite(s)?;

        let mut clamped = 0.0;
        if clamp {
            for x in s.h.iter_mut().chain(s.i.iter_mut()).chain(s.v.iter_mut()) {
                if *x < 0.0 {
                    clamped -= *x;
                    *x = 0.0;
                }
            }
        }
        Ok(clamped)
    }
}

/// One RK4 step of the semi-discrete system.
pub fn step(p: &ModelParams, grid: &Grid1D, s: &FieldState, dt: f64) -> Result<FieldState> {
    let mut next = s.clone();
    Stepper::new(*p, *grid).step(&mut next, dt, false)?;
    Ok(next)
}

/// Context handed to monitors at each snapshot.
pub struct MonitorContext<'a> {
    pub params: &'a ModelParams,
    pub grid: &'a Grid1D,
    pub derived: &'a DerivedQuantities,
    pub initial: &'a InitialBounds,
}

/// Observation of one monitor at one snapshot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonitorSample {
    /// One value per column reported by [`Monitor::columns`]; NaN when
    /// the quantity is undefined at this snapshot.
    pub values: Vec<f64>,
    pub violation: Option<String>,
}

/// A diagnostic evaluated along a trajectory.
pub trait Monitor {
    fn name(&self) -> &str;
    fn columns(&self) -> Vec<String>;
    fn observe(&mut self, s: &FieldState, ctx: &MonitorContext<'_>) -> MonitorSample;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub monitor: String,
    pub snapshot: usize,
    pub t: f64,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<FieldState>,
    pub derived: DerivedQuantities,
    pub dt: f64,
    pub steps: usize,
    pub stride: usize,
    pub monitor_columns: Vec<String>,
    /// One row per snapshot, aligned with `monitor_columns`.
    pub monitor_rows: Vec<Vec<f64>>,
    pub violations: Vec<Violation>,
    pub clamped_total: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &FieldState {
        self.snapshots.last().expect("at least the initial snapshot")
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.monitor_columns.iter().position(|c| c == name)?;
        Some(self.monitor_rows.iter().map(|r| r[idx]).collect())
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }
}

/// Integrates from `init` to `cfg.t_end`, evaluating every monitor at
/// each snapshot. The step count is `ceil(t_end / dt)` with the step
/// shrunk uniformly to land on `t_end`.
pub fn run(
    p: &ModelParams,
    grid: &Grid1D,
    init: &FieldState,
    cfg: &SolverConfig,
    monitors: &mut [Box<dyn Monitor>],
) -> Result<Trajectory> {
    cfg.validate()?;
    let initial = init.initial_bounds();
    let dq = derived(p, initial);
    let scale = dq.cells_bound.max(dq.virions_bound);
    init.validate(grid, scale)?;

    let bound = stable_dt(p, grid, &dq, cfg.cfl_safety);
    let dt_req = match cfg.dt {
        TimeStep::Auto => bound,
        TimeStep::Fixed(dt) if dt <= bound => dt,
        TimeStep::Fixed(dt) => return Err(Error::UnstableTimeStep { dt, bound }),
    };
    let steps = ((cfg.t_end / dt_req) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let dt = cfg.t_end / steps as f64;
    let stride = cfg.snapshot_stride.unwrap_or_else(|| (steps / 200).max(1));

    let monitor_columns: Vec<String> = monitors.iter().flat_map(|m| m.columns()).collect();
    let ctx = MonitorContext {
        params: p,
        grid,
        derived: &dq,
        initial: &initial,
    };

    let mut traj = Trajectory {
        snapshots: Vec::new(),
        derived: dq,
        dt,
        steps,
        stride,
        monitor_columns,
        monitor_rows: Vec::new(),
        violations: Vec::new(),
        clamped_total: 0.0,
    };

    let mut state = init.clone();
    state.t = 0.0;
    record(&mut traj, &state, monitors, &ctx, cfg.fail_on_violation)?;

    let mut stepper = Stepper::new(*p, *grid);
    for n in 1..=steps {
        traj.clamped_total += stepper.step(&mut state, dt, cfg.positivity_clamp)?;
        if n == steps {
            state.t = cfg.t_end;
        } else {
            state.t = n as f64 * dt;
        }
        if n % stride == 0 || n == steps {
            record(&mut traj, &state, monitors, &ctx, cfg.fail_on_violation)?;
        }
    }
    Ok(traj)
}

fn record(
    traj: &mut Trajectory,
    state: &FieldState,
    monitors: &mut [Box<dyn Monitor>],
    ctx: &MonitorContext<'_>,
    fail_fast: bool,
) -> Result<()> {
    let snapshot = traj.snapshots.len();
    let mut row = Vec::with_capacity(traj.monitor_columns.len());
    for m in monitors.iter_mut() {
        let sample = m.observe(state, ctx);
        row.extend(sample.values);
        if let Some(detail) = sample.violation {
            if fail_fast {
                return Err(Error::MonitorViolation {
                    monitor: m.name().to_string(),
                    t: state.t,
                    detail,
                });
            }
            traj.violations.push(Violation {
                monitor: m.name().to_string(),
                snapshot,
                t: state.t,
                detail,
            });
        }
    }
    traj.monitor_rows.push(row);
    traj.snapshots.push(state.clone());
    Ok(())
}

/// Tolerances of the adaptive reference integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeTolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for OdeTolerance {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-12,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn axpy(s: [f64; 3], w: f64, k: [f64; 3]) -> [f64; 3] {
    [s[0] + w * k[0], s[1] + w * k[1], s[2] + w * k[2]]
}

fn eval(p: &ModelParams, y: [f64; 3]) -> [f64; 3] {
    reaction_unchecked(p, PointState::from_array(y)).to_array()
}

/// Solves `dS/dt = reaction(S)` and returns the state at each requested
/// time (nondecreasing, starting at or after 0).
pub fn ode_solve_at(p: &ModelParams, s0: PointState, times: &[f64], tol: OdeTolerance) -> Result<Vec<PointState>> {
    if !s0.is_finite() || s0.h < 0.0 || s0.i < 0.0 || s0.v < 0.0 {
        return Err(Error::Domain(format!(
            "initial state must be finite and nonnegative: {s0:?}"
        )));
    }
    let mut y = s0.to_array();
    let mut t = 0.0;
    let mut h = 1e-3;
    let mut out = Vec::with_capacity(times.len());
    let mut k = [[0.0; 3]; 7];
    k[0] = eval(p, y);

    for &target in times {
        if target < t {
            return Err(Error::Domain(format!(
                "output times must be nondecreasing ({target} < {t})"
            )));
        }
        while t < target {
            let last = target - t <= h;
            let step = if last { target - t } else { h };
            for s in 1..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    ys = axpy(ys, step * DP_A[s][j], *kj);
                }
                k[s] = eval(p, ys);
            }
            let mut y5 = y;
            let mut y4 = y;
            for s in 0..7 {
                y5 = axpy(y5, step * DP_B5[s], k[s]);
                y4 = axpy(y4, step * DP_B4[s], k[s]);
            }
            let err = (0..3)
                .map(|c| {
                    let sc = tol.atol + tol.rtol * y[c].abs().max(y5[c].abs());
                    ((y5[c] - y4[c]) / sc).abs()
                })
                .fold(0.0, f64::max);
            if !err.is_finite() || y5.iter().any(|x| !x.is_finite()) {
                return Err(Error::IntegrationFailure {
                    t,
                    node: 0,
                    field: "ODE state",
                });
            }
            let accepted = err <= 1.0;
            if accepted {
                t = if last { target } else { t + step };
                y = y5;
                // first-same-as-last
                k[0] = k[6];
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // a step truncated to hit an output time says little about h
            if !(accepted && last) {
                h = step * factor;
            }
            if h < 1e-14 * target.abs().max(1.0) {
                return Err(Error::IntegrationFailure {
                    t,
                    node: 0,
                    field: "ODE step size",
                });
            }
        }
        out.push(PointState::from_array(y));
    }
    Ok(out)
}

/// Homogeneous reference solution sampled every `dt` up to `t_end`
/// (the last sample lands exactly on `t_end`).
pub fn ode_reference(p: &ModelParams, s0: PointState, t_end: f64, dt: f64) -> Result<Vec<(f64, PointState)>> {
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(Error::Domain(format!(
            "need dt > 0 and t_end >= 0 (dt={dt}, t_end={t_end})"
        )));
    }
    let n = (t_end / dt).round() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| (k as f64 * dt).min(t_end)).collect();
    if *times.last().unwrap() < t_end {
        times.push(t_end);
    }
    let states = ode_solve_at(p, s0, &times, OdeTolerance::default())?;
    Ok(times.into_iter().zip(states).collect())
}

/// Comparison solutions bounding `max_x (H + I)` and `max_x V`:
/// `S(t) = (lambda/delta2)(1 - e^{-delta2 t}) + S0max e^{-delta2 t}` and
/// `V(t) = ((1-eps) k Hm / mu)(1 - e^{-mu t}) + V0max e^{-mu t}`.
pub fn comparison_bounds(
    p: &ModelParams,
    dq: &DerivedQuantities,
    cells0_max: f64,
    virions0_max: f64,
    t: f64,
) -> (f64, f64) {
    let es = (-dq.cell_decay * t).exp();
    let ev = (-p.clearance * t).exp();
    let cells = p.production / dq.cell_decay * (1.0 - es) + cells0_max * es;
    let virions = p.effective_yield() * dq.cells_bound / p.clearance * (1.0 - ev) + virions0_max * ev;
    (cells, virions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn grid_basics() {
        let g = Grid1D::new(1.0, 101).unwrap();
        assert_relative_eq!(g.spacing(), 0.01, max_relative = 1e-15);
        assert_eq!(g.positions().len(), 101);
        assert_relative_eq!(g.integrate(&vec![2.0; 101]), 2.0, max_relative = 1e-14);
        assert!(Grid1D::new(1.0, 2).is_err());
        assert!(Grid1D::new(0.0, 10).is_err());
    }

    #[test]
    fn laplacian_of_constant_and_linear() {
        let lap = laplacian_neumann(&[3.0; 7], 0.1).unwrap();
        assert!(lap.iter().all(|&x| x == 0.0));

        let g = Grid1D::new(1.0, 11).unwrap();
        let f = g.positions();
        let lap = laplacian_neumann(&f, g.spacing()).unwrap();
        assert!(lap[1..10].iter().all(|x| x.abs() < 1e-9));
        assert!(lap[0] > 0.0 && lap[10] < 0.0);
        assert!(laplacian_neumann(&[1.0, 2.0], 0.1).is_err());
    }

    #[test]
    fn laplacian_of_cosine() {
        let g = Grid1D::new(1.0, 101).unwrap();
        let f: Vec<f64> = g.positions().iter().map(|x| (PI * x).cos()).collect();
        let lap = laplacian_neumann(&f, g.spacing()).unwrap();
        let err = g
            .positions()
            .iter()
            .zip(&lap)
            .map(|(x, l)| (l + PI * PI * (PI * x).cos()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "max error {err}");
    }

    #[test]
    fn equilibrium_is_a_fixed_point_of_step() {
        let g = Grid1D::new(1.0, 21).unwrap();
        let p = presets::set1();
        let s = FieldState::constant(&g, PointState::new(10.0, 0.0, 0.0));
        let next = step(&p, &g, &s, 1e-3).unwrap();
        assert!(next.distance_to(PointState::new(10.0, 0.0, 0.0)) <= 1e-12);
    }

    #[test]
    fn non_finite_step_is_reported_with_node() {
        let g = Grid1D::new(1.0, 5).unwrap();
        let p = presets::set1();
        let mut s = FieldState::constant(&g, PointState::new(1.0, 1.0, 1.0));
        s.v[3] = f64::INFINITY;
        match step(&p, &g, &s, 1e-3) {
            Err(Error::IntegrationFailure { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn clamp_records_magnitude() {
        let g = Grid1D::new(1.0, 5).unwrap();
        let p = presets::set1();
        let mut s = FieldState::constant(&g, PointState::new(1.0, 0.0, 0.0));
        // healthy cells drain the tiny negative I through the cure term only
        s.i[2] = -1e-3;
        let mut stepper = Stepper::new(p, g);
        let clamped = stepper.step(&mut s, 1e-4, true).unwrap();
        assert!(clamped > 0.0);
        assert!(s.min_value() >= 0.0);
    }

    #[test]
    fn fixed_dt_above_bound_is_rejected() {
        let g = Grid1D::new(1.0, 101).unwrap();
        let p = presets::set1();
        let init = FieldState::constant(&g, PointState::new(5.0, 5.0, 5.0));
        let cfg = SolverConfig {
            dt: TimeStep::Fixed(0.01),
            t_end: 0.1,
            ..Default::default()
        };
        assert!(matches!(
            run(&p, &g, &init, &cfg, &mut []),
            Err(Error::UnstableTimeStep { .. })
        ));
    }

    #[test]
    fn ode_reference_stays_at_equilibrium() {
        let p = presets::set1();
        let traj = ode_reference(&p, PointState::new(10.0, 0.0, 0.0), 5.0, 0.5).unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj.iter().all(|(_, s)| *s == PointState::new(10.0, 0.0, 0.0)));
        assert_eq!(traj.last().unwrap().0, 5.0);
    }

    #[test]
    fn ode_reference_decays_to_uninfected_state() {
        let p = presets::set1();
        // slowest rate is about 3e-3 per day since R0 is close to 1
        let traj = ode_reference(&p, PointState::new(5.0, 5.0, 5.0), 10000.0, 1000.0).unwrap();
        let last = traj.last().unwrap().1;
        assert!((last - PointState::new(10.0, 0.0, 0.0)).sup_norm() < 1e-6, "{last:?}");
    }

    #[test]
    fn ode_reference_rejects_negative_start() {
        assert!(ode_reference(&presets::set1(), PointState::new(-1.0, 0.0, 0.0), 1.0, 0.1).is_err());
    }

    #[test]
    fn comparison_bound_limits() {
        let p = presets::set1();
        let dq = derived(
            &p,
            InitialBounds {
                cells_max: 10.0,
                virions_max: 5.0,
            },
        );
        assert_eq!(comparison_bounds(&p, &dq, 10.0, 5.0, 0.0), (10.0, 5.0));
        let (s, v) = comparison_bounds(&p, &dq, 10.0, 5.0, 1e6);
        assert_relative_eq!(s, 1000.0, max_relative = 1e-12);
        assert_relative_eq!(v, 50.0, max_relative = 1e-12);
        for t in [0.0, 0.1, 1.0, 10.0, 100.0] {
            let (s, _) = comparison_bounds(&p, &dq, 10.0, 5.0, t);
            assert!(s <= 1000.0_f64.max(10.0) + 1e-9);
        }
    }

    #[test]
    fn snapshot_times_hit_t_end() {
        let g = Grid1D::new(1.0, 11).unwrap();
        let p = presets::set1();
        let init = FieldState::constant(&g, PointState::new(5.0, 5.0, 5.0));
        let cfg = SolverConfig {
            t_end: 0.37,
            snapshot_stride: Some(7),
            ..Default::default()
        };
        let traj = run(&p, &g, &init, &cfg, &mut []).unwrap();
        assert_eq!(traj.final_state().t, 0.37);
        assert_eq!(traj.snapshots[0].t, 0.0);
        assert!(traj.times().windows(2).all(|w| w[0] < w[1]));
    }
}
