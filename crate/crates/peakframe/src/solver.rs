//! Time integration of the moving-frame perturbation system.
//!
//! Two modes share one scheme:
//!
//! * **Nonlinear** — the full system for the perturbations `(u, v)` around
//!   the traveling profile, advected at speeds `1 - xdot` (rightward, for
//!   `u`) and `-(1 + xdot)` (leftward, for `v`), with the peak velocity
//!   `xdot` recomputed from the state at every stage.
//! * **Linearized** — the first-order system in which the advection speeds
//!   are exactly `+1`/`-1` and the frame coupling enters only through the
//!   linearized velocity functional.
//!
//! The scheme is first-order upwind in space (a monotone flux: the
//! `sign(y)` coefficients kink every profile at the origin, and a centered
//! flux would oscillate there) with two-stage Heun time stepping and zero
//! inflow at both ends of the truncated domain, where the solution is below
//! the weight tail budget anyway.  `xdot` is evaluated explicitly from each
//! stage's field; the coupling error this lags by is O(dt), the same order
//! as the flux error.
//!
//! Three guards can stop a run early, each mapped to an [`AbortKind`]:
//! the physical speed limit `|xdot| >= 0.9` (the advection speeds must not
//! change sign), non-finite state values, and — for nonlinear runs with
//! screening — a watchdog that re-solves the attractant equation and checks
//! that its profile still has a single critical point.  Aborts preserve the
//! partial diagnostics series; they are data, not panics.

use crate::characteristics::XdotPath;
use crate::chemo::{check_single_peak, peak_velocity, peak_velocity_lin, solve_chemo};
use crate::diagnostics::{fill_dissipation_slopes, record_state, DiagnosticsSeries, RecordInputs};
use crate::error::{AbortKind, ModelError, Result};
use crate::grid::{Grid, PairField, ScalarField};
use crate::operators::DiscreteOperators;
use crate::params::ModelParams;

/// Which right-hand side the integrator advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Full perturbation system, self-consistent peak velocity.
    Nonlinear,
    /// Linearized system: unit advection speeds, linearized velocity.
    Linearized,
}

/// Mutable integration state.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Perturbation pair `(u, v)` on the grid.
    pub w: PairField,
    /// Current time.
    pub t: f64,
    /// Lab-frame peak position: the time integral of `xdot`, starting at 0.
    pub x: f64,
    /// Velocity used in the most recent accepted stage.
    pub xdot_last: f64,
    /// Right-hand-side selector.
    pub mode: Mode,
}

impl SolverState {
    /// Fresh state at `t = 0`, peak at the origin.
    pub fn new(w: PairField, mode: Mode) -> Self {
        SolverState { w, t: 0.0, x: 0.0, xdot_last: 0.0, mode }
    }
}

/// Step-size and cadence knobs for a run.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepConfig {
    /// Courant number in (0, 1]: `dt = cfl * h / (1 + |xdot|)` in nonlinear
    /// mode, `dt = cfl * h` in linearized mode (speeds are exactly one).
    pub cfl: f64,
    /// Integration horizon.
    pub t_final: f64,
    /// Record diagnostics every this many steps (plus first and last).
    pub diag_stride: usize,
    /// Check the single-peak watchdog every this many steps (nonlinear
    /// runs with screening only).
    pub watchdog_stride: usize,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig { cfl: 0.4, t_final: 10.0, diag_stride: 1, watchdog_stride: 25 }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(ModelError::Config(format!(
                "cfl must lie in (0, 1], got {}",
                self.cfl
            )));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(ModelError::Config(format!(
                "t_final must be finite and nonnegative, got {}",
                self.t_final
            )));
        }
        if self.diag_stride == 0 || self.watchdog_stride == 0 {
            return Err(ModelError::Config(
                "diag_stride and watchdog_stride must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Optional run outputs and overrides beyond the scalar series.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Times at which to keep full state snapshots (recorded at the first
    /// step whose time passes each request; requests beyond the horizon are
    /// served by the final state).
    pub snapshot_times: Vec<f64>,
    /// Keep a dense state history every this many steps (0 = none).  The
    /// integral-equation cross-checks interpolate in this history.
    pub history_stride: usize,
    /// Drive the run with a prescribed velocity path instead of the
    /// self-consistent functional (used to compare against the
    /// integral-equation solver on identical frame motion).
    pub frozen_path: Option<XdotPath>,
    /// Entropy mixing weight used in the recorded functionals.
    pub delta: f64,
    /// Screened-regime mixing weight (used for the screened entropy column
    /// when `alpha > 0`).
    pub delta_alpha: f64,
}

/// Full state at one instant, kept for snapshots and dense history.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub x: f64,
    pub xdot: f64,
    pub w: PairField,
}

/// Everything a run produces besides the scalar diagnostics series.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// States at the requested snapshot times (same order as requested).
    pub snapshots: Vec<Snapshot>,
    /// Dense strided history (empty unless requested).
    pub history: Vec<Snapshot>,
    /// `(t, xdot)` at every accepted step plus the final time; exactly the
    /// velocity sequence the integrator used.
    pub xdot_samples: Vec<(f64, f64)>,
    /// State after the last accepted step.
    pub final_state: SolverState,
}

/// Why and when a run stopped early.
#[derive(Debug, Clone)]
pub struct AbortInfo {
    pub kind: AbortKind,
    pub t: f64,
    pub detail: String,
}

/// Run result: trajectory data, the diagnostics series, and the abort
/// information if the run stopped before the horizon.  The series is always
/// the valid prefix — an abort never discards recorded rows.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub series: DiagnosticsSeries,
    pub abort: Option<AbortInfo>,
}

/// Non-advective tendency of the nonlinear system: bias damping against the
/// frame motion, tumbling exchange, and the inhomogeneous drive, per
/// component
///
/// `du/dt |_rhs = -2 xdot chi s u - (1 - chi s)(u - v) - 2 xdot chi s`,
/// `dv/dt |_rhs = -2 xdot chi s v + (1 + chi s)(u - v) - 2 xdot chi s`,
///
/// with `s = sign(y)`.  Advection is applied by the flux step, not here.
pub fn rhs_nonlinear(w: &PairField, xdot: f64, params: &ModelParams, grid: &Grid) -> PairField {
    let chi = params.chi;
    let mid = grid.n_cells / 2;
    let mut out = PairField::zeros(grid);
    for i in 0..grid.n_cells {
        let s = if i >= mid { 1.0 } else { -1.0 };
        let drive = 2.0 * xdot * chi * s;
        let diff = w.u.values[i] - w.v.values[i];
        out.u.values[i] = -drive * w.u.values[i] - (1.0 - chi * s) * diff - drive;
        out.v.values[i] = -drive * w.v.values[i] + (1.0 + chi * s) * diff - drive;
    }
    out
}

/// Non-advective tendency of the linearized system: the frame coupling is
/// reduced to the constant-in-`y` drive `-2 xdot_lin chi sign(y)` and the
/// exchange terms keep only the linear part.
pub fn rhs_linear(w: &PairField, xdot_lin: f64, params: &ModelParams, grid: &Grid) -> PairField {
    let chi = params.chi;
    let mid = grid.n_cells / 2;
    let mut out = PairField::zeros(grid);
    for i in 0..grid.n_cells {
        let s = if i >= mid { 1.0 } else { -1.0 };
        let drive = 2.0 * xdot_lin * chi * s;
        let diff = w.u.values[i] - w.v.values[i];
        out.u.values[i] = -drive - (1.0 - chi * s) * diff;
        out.v.values[i] = -drive + (1.0 + chi * s) * diff;
    }
    out
}

/// Complete semi-discrete tendency of the nonlinear system: first-order
/// upwind advection at speeds `1 - xdot` / `-(1 + xdot)` (zero inflow) plus
/// [`rhs_nonlinear`].  The steady state `w = 0` is an exact root for
/// `xdot = 0`, which is what makes it an exact discrete fixed point.
pub fn full_tendency_nonlinear(
    w: &PairField,
    xdot: f64,
    params: &ModelParams,
    grid: &Grid,
) -> PairField {
    tendency(w, xdot, Mode::Nonlinear, params, grid)
}

fn tendency(w: &PairField, xdot: f64, mode: Mode, params: &ModelParams, grid: &Grid) -> PairField {
    let mut out = match mode {
        Mode::Nonlinear => rhs_nonlinear(w, xdot, params, grid),
        Mode::Linearized => rhs_linear(w, xdot, params, grid),
    };
    let (speed_u, speed_v) = match mode {
        Mode::Nonlinear => (1.0 - xdot, 1.0 + xdot),
        Mode::Linearized => (1.0, 1.0),
    };
    let n = grid.n_cells;
    let h = grid.h;
    for i in 0..n {
        // u moves rightward: backward difference, zero inflow on the left.
        let left = if i > 0 { w.u.values[i - 1] } else { 0.0 };
        out.u.values[i] -= speed_u * (w.u.values[i] - left) / h;
        // v moves leftward: forward difference, zero inflow on the right.
        let right = if i + 1 < n { w.v.values[i + 1] } else { 0.0 };
        out.v.values[i] += speed_v * (right - w.v.values[i]) / h;
    }
    out
}

/// Peak velocity the integrator should use at time `t` for field `w`:
/// the frozen path when one is prescribed, otherwise the mode's velocity
/// functional.  A collapse of the nonlinear functional's denominator is
/// reported as a speed-limit abort (the perturbative frame is gone).
fn current_xdot(
    w: &PairField,
    t: f64,
    mode: Mode,
    params: &ModelParams,
    grid: &Grid,
    frozen: Option<&XdotPath>,
) -> std::result::Result<f64, AbortInfo> {
    if let Some(path) = frozen {
        return Ok(path.eval(t));
    }
    match mode {
        Mode::Nonlinear => peak_velocity(w, params, grid).map_err(|err| AbortInfo {
            kind: AbortKind::SpeedLimit,
            t,
            detail: err.to_string(),
        }),
        Mode::Linearized => Ok(peak_velocity_lin(w, params, grid)),
    }
}

fn speed_guard(xdot: f64, t: f64) -> std::result::Result<(), AbortInfo> {
    if !xdot.is_finite() {
        return Err(AbortInfo {
            kind: AbortKind::BlowUp,
            t,
            detail: format!("non-finite peak velocity {xdot}"),
        });
    }
    if xdot.abs() >= 0.9 {
        return Err(AbortInfo {
            kind: AbortKind::SpeedLimit,
            t,
            detail: format!("|xdot| = {} reached the 0.9 guard", xdot.abs()),
        });
    }
    Ok(())
}

/// Advances the state by one Heun step of size `cfl * h / (1 + |xdot|)`
/// (nonlinear) or `cfl * h` (linearized), capped so the step never
/// overshoots `t_final`.  Both stages re-evaluate the velocity from the
/// stage field; `x` advances with the stage-averaged velocity.
///
/// Aborts surface as [`ModelError::Abort`]; the state is left at the last
/// consistent time.
pub fn step(
    state: &mut SolverState,
    params: &ModelParams,
    grid: &Grid,
    cfg: &StepConfig,
    frozen: Option<&XdotPath>,
) -> Result<()> {
    let to_err = |a: AbortInfo| ModelError::Abort { kind: a.kind, t: a.t, detail: a.detail };

    let xdot1 =
        current_xdot(&state.w, state.t, state.mode, params, grid, frozen).map_err(to_err)?;
    speed_guard(xdot1, state.t).map_err(to_err)?;

    let dt_cfl = match state.mode {
        Mode::Nonlinear => cfg.cfl * grid.h / (1.0 + xdot1.abs()),
        Mode::Linearized => cfg.cfl * grid.h,
    };
    let dt = dt_cfl.min(cfg.t_final - state.t).max(0.0);

    let k1 = tendency(&state.w, xdot1, state.mode, params, grid);
    let predictor = state.w.add_scaled(&k1, dt);
    if !predictor.is_finite() {
        return Err(ModelError::Abort {
            kind: AbortKind::BlowUp,
            t: state.t + dt,
            detail: "non-finite predictor stage".into(),
        });
    }

    let xdot2 =
        current_xdot(&predictor, state.t + dt, state.mode, params, grid, frozen).map_err(to_err)?;
    speed_guard(xdot2, state.t + dt).map_err(to_err)?;
    let k2 = tendency(&predictor, xdot2, state.mode, params, grid);

    let mut next = state.w.add_scaled(&k1, 0.5 * dt);
    next = next.add_scaled(&k2, 0.5 * dt);
    if !next.is_finite() {
        return Err(ModelError::Abort {
            kind: AbortKind::BlowUp,
            t: state.t + dt,
            detail: "non-finite corrector stage".into(),
        });
    }

    state.w = next;
    state.x += dt * 0.5 * (xdot1 + xdot2);
    state.t += dt;
    state.xdot_last = xdot2;
    Ok(())
}

/// Density the state induces, for the watchdog's attractant re-solve:
/// `rho = eta (1 + (u + v) / 2)`.
fn induced_density(w: &PairField, grid: &Grid) -> ScalarField {
    let mut rho = ScalarField::zeros(grid);
    for i in 0..grid.n_cells {
        rho.values[i] = grid.w_2chi[i] * (1.0 + 0.5 * (w.u.values[i] + w.v.values[i]));
    }
    rho
}

/// Integrates from `t = 0` to `cfg.t_final`, recording diagnostics every
/// `diag_stride` steps (always including the first and last instants),
/// snapshots at the requested times, and a strided dense history.
///
/// Early stops (speed limit, blow-up, lost single-peak structure) are
/// returned in [`RunOutput::abort`] with the series recorded so far; real
/// errors (bad configuration, singular operator assembly) propagate as
/// `Err`.  For watchdog and speed aborts the offending state is appended to
/// the snapshot list as a dump — blow-up states are not, since their values
/// are no longer meaningful.
pub fn run(
    initial: &PairField,
    mode: Mode,
    params: &ModelParams,
    grid: &Grid,
    ops: &DiscreteOperators,
    cfg: &StepConfig,
    opts: &RunOptions,
) -> Result<RunOutput> {
    cfg.validate()?;
    if initial.len() != grid.n_cells {
        return Err(ModelError::Config(format!(
            "initial data has {} cells, grid has {}",
            initial.len(),
            grid.n_cells
        )));
    }
    let mut state = SolverState::new(initial.clone(), mode);
    run_loop(&mut state, params, grid, ops, cfg, opts)
}

fn run_loop(
    state: &mut SolverState,
    params: &ModelParams,
    grid: &Grid,
    ops: &DiscreteOperators,
    cfg: &StepConfig,
    opts: &RunOptions,
) -> Result<RunOutput> {
    let t_eps = 1e-9 * cfg.t_final.max(1.0);
    let mut series: DiagnosticsSeries = Vec::new();
    let mut snapshots: Vec<Snapshot> = Vec::new();
    let mut history: Vec<Snapshot> = Vec::new();
    let mut xdot_samples: Vec<(f64, f64)> = Vec::new();
    let mut abort: Option<AbortInfo> = None;

    let mut pending: Vec<f64> = opts.snapshot_times.clone();
    pending.sort_by(|a, b| a.partial_cmp(b).expect("snapshot times must not be NaN"));
    let mut pending = std::collections::VecDeque::from(pending);

    if !state.w.is_finite() {
        abort = Some(AbortInfo {
            kind: AbortKind::BlowUp,
            t: state.t,
            detail: "initial data contains non-finite values".into(),
        });
    }

    let mut steps_done: usize = 0;
    while abort.is_none() {
        let at_end = state.t >= cfg.t_final - t_eps;

        // Velocity of the current state: used by the diagnostics row and by
        // the next step's first stage alike.
        let xdot_now =
            match current_xdot(&state.w, state.t, state.mode, params, grid, opts.frozen_path.as_ref()) {
                Ok(x) if x.is_finite() => x,
                Ok(x) => {
                    abort = Some(AbortInfo {
                        kind: AbortKind::BlowUp,
                        t: state.t,
                        detail: format!("non-finite peak velocity {x}"),
                    });
                    break;
                }
                Err(info) => {
                    abort = Some(info);
                    break;
                }
            };

        if steps_done % cfg.diag_stride == 0 || at_end {
            series.push(record_state(
                grid,
                ops,
                params,
                &RecordInputs {
                    mode: state.mode,
                    w: &state.w,
                    t: state.t,
                    x: state.x,
                    xdot: xdot_now,
                    delta: opts.delta,
                    delta_alpha: opts.delta_alpha,
                },
            ));
        }
        if opts.history_stride > 0 && (steps_done % opts.history_stride == 0 || at_end) {
            history.push(Snapshot { t: state.t, x: state.x, xdot: xdot_now, w: state.w.clone() });
        }
        while let Some(&t_req) = pending.front() {
            if state.t >= t_req - 1e-9 || at_end {
                snapshots.push(Snapshot {
                    t: state.t,
                    x: state.x,
                    xdot: xdot_now,
                    w: state.w.clone(),
                });
                pending.pop_front();
            } else {
                break;
            }
        }

        if let Err(info) = speed_guard(xdot_now, state.t) {
            // The diagnostics row above already holds the offending value;
            // keep the state itself as a dump.
            snapshots.push(Snapshot { t: state.t, x: state.x, xdot: xdot_now, w: state.w.clone() });
            abort = Some(info);
            break;
        }

        xdot_samples.push((state.t, xdot_now));
        if at_end {
            break;
        }

        if let Err(err) = step(state, params, grid, cfg, opts.frozen_path.as_ref()) {
            match err {
                ModelError::Abort { kind, t, detail } => {
                    abort = Some(AbortInfo { kind, t, detail });
                    break;
                }
                other => return Err(other),
            }
        }
        steps_done += 1;

        // Watchdog: nonlinear screened runs must keep a single-peak
        // attractant; that hypothesis is what defines the moving frame.
        if state.mode == Mode::Nonlinear
            && params.alpha > 0.0
            && steps_done % cfg.watchdog_stride == 0
        {
            let field = solve_chemo(&induced_density(&state.w, grid), params, grid)?;
            let (ok, _) = check_single_peak(&field, grid);
            if !ok {
                series.push(record_state(
                    grid,
                    ops,
                    params,
                    &RecordInputs {
                        mode: state.mode,
                        w: &state.w,
                        t: state.t,
                        x: state.x,
                        xdot: state.xdot_last,
                        delta: opts.delta,
                        delta_alpha: opts.delta_alpha,
                    },
                ));
                snapshots.push(Snapshot {
                    t: state.t,
                    x: state.x,
                    xdot: state.xdot_last,
                    w: state.w.clone(),
                });
                abort = Some(AbortInfo {
                    kind: AbortKind::MultiPeak,
                    t: state.t,
                    detail: "attractant profile lost its single critical point".into(),
                });
                break;
            }
        }
    }

    fill_dissipation_slopes(&mut series);
    Ok(RunOutput {
        trajectory: Trajectory {
            snapshots,
            history,
            xdot_samples,
            final_state: state.clone(),
        },
        series,
        abort,
    })
}
