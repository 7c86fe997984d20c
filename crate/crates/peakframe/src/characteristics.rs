//! Integral-equation cross-checks built on the method of characteristics.
//!
//! Everything here is independent of the grid solver's flux discretization.
//! The model is recast in tilded variables `tu = e^t eta u`, `tv = e^t eta v`
//! (with `eta(y) = e^{-2 chi |y|}` the equilibrium weight), in which the
//! transport-relaxation dynamics becomes a pair of Volterra integral
//! equations along the characteristics `y ± s + x(t) - x(t-s)`:
//!
//! * [`duhamel_solve`] iterates those equations to a fixed point (windowed
//!   Picard) and returns the solution at a requested time — a second solver
//!   for the same initial-value problem, sharing nothing with the upwind
//!   scheme except the grid used for sampling.
//! * [`jump_representation`] evaluates the closed formulas expressing the
//!   one-sided origin averages of `u_y`, `v_y` at time `t` through the
//!   history of the solution along the incoming characteristics — the
//!   quantity the entropy estimates need to control.
//!
//! Both consume an [`XdotPath`]: the frame velocity as a sampled function
//! of time. Extracting the path from a grid run and feeding it to these
//! routines compares the two solvers on *identical* frame motion, isolating
//! discretization error from the velocity feedback loop.

use crate::error::{ModelError, Result};
use crate::grid::{Grid, PairField, ScalarField};
use crate::params::ModelParams;
use crate::solver::Snapshot;

/// Frame velocity as a function of time: uniform samples with linear
/// interpolation, plus the cumulative displacement for evaluating
/// characteristics.
#[derive(Debug, Clone)]
pub struct XdotPath {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
    /// Trapezoidal cumulative integral of `values`, same length.
    cumulative: Vec<f64>,
    sup_abs: f64,
}

impl XdotPath {
    /// Constant velocity on `[0, t_end]`.
    pub fn constant(xdot: f64, t_end: f64) -> Self {
        assert!(t_end > 0.0, "path must have positive extent");
        XdotPath {
            t0: 0.0,
            dt: t_end,
            values: vec![xdot, xdot],
            cumulative: vec![0.0, xdot * t_end],
            sup_abs: xdot.abs(),
        }
    }

    /// Resamples `(t, xdot)` pairs (strictly increasing times) onto a
    /// uniform grid of spacing at most `dt_max`.
    pub fn from_samples(samples: &[(f64, f64)], dt_max: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(ModelError::Config("velocity path needs samples".into()));
        }
        if !(dt_max > 0.0) {
            return Err(ModelError::Config("path resolution must be positive".into()));
        }
        for pair in samples.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(ModelError::Config(
                    "velocity samples must have strictly increasing times".into(),
                ));
            }
        }
        let t0 = samples[0].0;
        let span = samples[samples.len() - 1].0 - t0;
        if span == 0.0 {
            let v = samples[0].1;
            return Ok(XdotPath {
                t0,
                dt: dt_max,
                values: vec![v, v],
                cumulative: vec![0.0, v * dt_max],
                sup_abs: v.abs(),
            });
        }
        let segments = (span / dt_max).ceil().max(1.0) as usize;
        let dt = span / segments as f64;
        let mut values = Vec::with_capacity(segments + 1);
        let mut cursor = 0usize;
        for j in 0..=segments {
            let t = t0 + j as f64 * dt;
            while cursor + 1 < samples.len() && samples[cursor + 1].0 < t {
                cursor += 1;
            }
            let v = if cursor + 1 == samples.len() {
                samples[cursor].1
            } else {
                let (ta, va) = samples[cursor];
                let (tb, vb) = samples[cursor + 1];
                let frac = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
                va + frac * (vb - va)
            };
            values.push(v);
        }
        let mut cumulative = vec![0.0; values.len()];
        for j in 1..values.len() {
            cumulative[j] = cumulative[j - 1] + 0.5 * dt * (values[j - 1] + values[j]);
        }
        let sup_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(XdotPath { t0, dt, values, cumulative, sup_abs })
    }

    /// Largest recorded speed; the representations require this below 1.
    pub fn sup_abs(&self) -> f64 {
        self.sup_abs
    }

    /// End of the sampled range.
    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.values.len() - 1) as f64
    }

    /// Velocity at `t` (clamped to the sampled range).
    pub fn eval(&self, t: f64) -> f64 {
        let s = (t - self.t0) / self.dt;
        if s <= 0.0 {
            return self.values[0];
        }
        let last = self.values.len() - 1;
        if s >= last as f64 {
            return self.values[last];
        }
        let j = s.floor() as usize;
        let frac = s - j as f64;
        self.values[j] + frac * (self.values[j + 1] - self.values[j])
    }

    /// Displacement `x(t) - x(t0)`; constant-velocity extension outside the
    /// sampled range.
    pub fn x_offset(&self, t: f64) -> f64 {
        let s = (t - self.t0) / self.dt;
        if s <= 0.0 {
            return (t - self.t0) * self.values[0];
        }
        let last = self.values.len() - 1;
        if s >= last as f64 {
            return self.cumulative[last] + (t - self.t_end()) * self.values[last];
        }
        let j = s.floor() as usize;
        let frac = s - j as f64;
        let v_t = self.values[j] + frac * (self.values[j + 1] - self.values[j]);
        // Partial trapezoid from node j to t.
        self.cumulative[j] + 0.5 * (frac * self.dt) * (self.values[j] + v_t)
    }

    /// Rightward characteristic offset `z_+(s, t) = s + x(t) - x(t-s)`.
    pub fn z_plus(&self, s: f64, t: f64) -> f64 {
        s + self.x_offset(t) - self.x_offset(t - s)
    }

    /// Leftward characteristic offset `z_-(s, t) = -s + x(t) - x(t-s)`.
    pub fn z_minus(&self, s: f64, t: f64) -> f64 {
        -s + self.x_offset(t) - self.x_offset(t - s)
    }
}

/// Pointwise sign with the measure-zero convention `sgn(0) = 0` (f64's
/// `signum` maps 0 to 1, which would bias the origin cell).
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Equilibrium weight evaluated analytically (off-grid arguments occur
/// along characteristics).
fn eta_at(chi: f64, y: f64) -> f64 {
    (-2.0 * chi * y.abs()).exp()
}

/// Linear interpolation of grid samples at an off-grid point; zero outside
/// the cell-center range (the solution is below the weight tail there).
fn interp(values: &[f64], grid: &Grid, y: f64) -> f64 {
    let pos = (y - grid.centers[0]) / grid.h;
    if pos < 0.0 || pos > (values.len() - 1) as f64 {
        return 0.0;
    }
    let j = (pos.floor() as usize).min(values.len() - 2);
    let frac = pos - j as f64;
    values[j] + frac * (values[j + 1] - values[j])
}

/// One-sided linear interpolation: evaluates the branch of a kinked field
/// on the given side of the origin, extrapolating from the two nearest
/// same-side cells when `y` falls inside the half-cell gap at 0.  The jump
/// formulas evaluate one-sided limits, so crossing the kink would smear
/// exactly the quantity being measured.
fn interp_side(values: &[f64], grid: &Grid, y: f64, side: f64) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (lo, hi) = if side < 0.0 { (0usize, mid - 1) } else { (mid, n - 1) };
    let pos = (y - grid.centers[0]) / grid.h;
    if pos < lo as f64 - 1.0 || pos > hi as f64 + 1.0 {
        return 0.0;
    }
    let j = (pos.floor() as usize).clamp(lo, hi.saturating_sub(1).max(lo));
    let j = j.min(hi - 1).max(lo);
    let frac = pos - j as f64;
    values[j] + frac * (values[j + 1] - values[j])
}

/// Statistics of one Picard window: the successive sup-norm differences.
pub type PicardDiffs = Vec<f64>;

/// Solves the perturbation system by Picard iteration on its integral
/// representation, windowed in time, and returns the state at `t_final`.
///
/// Independent of the upwind solver: space is handled by linear
/// interpolation along exact characteristics, time by trapezoidal
/// quadrature of the memory integrals, and the affine frame source
/// `2 xdot e^t eta` is evaluated analytically.  Accuracy is first order in
/// `(h, window slice)`; the slice spacing is tied to `h` so joint
/// refinement studies see a single rate.
pub fn duhamel_solve(
    w0: &PairField,
    path: &XdotPath,
    t_final: f64,
    tol: f64,
    params: &ModelParams,
    grid: &Grid,
) -> Result<PairField> {
    duhamel_solve_with_stats(w0, path, t_final, tol, params, grid).map(|(w, _)| w)
}

/// [`duhamel_solve`] plus the per-window Picard difference sequences (for
/// contraction checks; each sequence must decay to `tol`).
pub fn duhamel_solve_with_stats(
    w0: &PairField,
    path: &XdotPath,
    t_final: f64,
    tol: f64,
    params: &ModelParams,
    grid: &Grid,
) -> Result<(PairField, Vec<PicardDiffs>)> {
    if path.sup_abs() >= 1.0 {
        return Err(ModelError::Oracle(format!(
            "velocity path reaches |xdot| = {} >= 1",
            path.sup_abs()
        )));
    }
    if t_final <= 0.0 {
        return Ok((w0.clone(), Vec::new()));
    }
    let n = grid.n_cells;
    let chi = params.chi;

    // Tilded initial data at t = 0 (e^0 = 1).
    let mut win_u: Vec<f64> = (0..n).map(|i| grid.w_2chi[i] * w0.u.values[i]).collect();
    let mut win_v: Vec<f64> = (0..n).map(|i| grid.w_2chi[i] * w0.v.values[i]).collect();

    let mut stats: Vec<PicardDiffs> = Vec::new();
    let max_window = 0.5;
    let max_sweeps = 300;
    let mut t_start = 0.0f64;

    while t_start < t_final - 1e-12 * t_final.max(1.0) {
        let t_stop = (t_start + max_window).min(t_final);
        let span = t_stop - t_start;
        // Slice spacing tied to the grid scale, capped for memory.
        let slices = ((span / grid.h).ceil() as usize).clamp(4, 400);
        let ds = span / slices as f64;

        // Iterate on the whole window: slice 0 is pinned to the window's
        // initial data.
        let mut cur_u: Vec<Vec<f64>> = (0..=slices).map(|_| win_u.clone()).collect();
        let mut cur_v: Vec<Vec<f64>> = (0..=slices).map(|_| win_v.clone()).collect();
        let mut diffs: PicardDiffs = Vec::new();
        let mut converged = false;

        for _sweep in 0..max_sweeps {
            let mut new_u = cur_u.clone();
            let mut new_v = cur_v.clone();
            let mut diff = 0.0f64;
            for j in 1..=slices {
                let tau = t_start + j as f64 * ds;
                let off_tau = path.x_offset(tau);
                for i in 0..n {
                    let y = grid.centers[i];
                    // Feet of the two characteristics at the window start.
                    let foot_u = y - (tau - t_start) + off_tau - path.x_offset(t_start);
                    let foot_v = y + (tau - t_start) + off_tau - path.x_offset(t_start);
                    let mut acc_u = interp(&win_u, grid, foot_u);
                    let mut acc_v = interp(&win_v, grid, foot_v);
                    for k in 0..=j {
                        let s = k as f64 * ds;
                        let weight = if k == 0 || k == j { 0.5 * ds } else { ds };
                        let tau_back = tau - s;
                        let shift = off_tau - path.x_offset(tau_back);
                        let slice = j - k;
                        let drive = 2.0 * path.eval(tau_back) * tau_back.exp();

                        // u-equation: integrate v - chi sgn (u + v + drive eta)
                        // along the rightward characteristic.
                        let arg = y - s + shift;
                        let tu = interp(&cur_u[slice], grid, arg);
                        let tv = interp(&cur_v[slice], grid, arg);
                        acc_u +=
                            weight * (tv - chi * sgn(arg) * (tu + tv + drive * eta_at(chi, arg)));

                        // v-equation: integrate u + chi sgn (u + v - drive eta)
                        // along the leftward characteristic.
                        let arg = y + s + shift;
                        let tu = interp(&cur_u[slice], grid, arg);
                        let tv = interp(&cur_v[slice], grid, arg);
                        acc_v +=
                            weight * (tu + chi * sgn(arg) * (tu + tv - drive * eta_at(chi, arg)));
                    }
                    diff = diff.max((acc_u - new_u[j][i]).abs()).max((acc_v - new_v[j][i]).abs());
                    new_u[j][i] = acc_u;
                    new_v[j][i] = acc_v;
                }
            }
            cur_u = new_u;
            cur_v = new_v;
            diffs.push(diff);
            if diff < tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(ModelError::Oracle(format!(
                "Picard iteration did not reach {tol:.1e} on window [{t_start}, {t_stop}] \
                 (last difference {:.3e})",
                diffs.last().copied().unwrap_or(f64::NAN)
            )));
        }
        stats.push(diffs);
        win_u = cur_u.pop().expect("window has slices");
        win_v = cur_v.pop().expect("window has slices");
        t_start = t_stop;
    }

    // Back to plain variables: u = e^{-t} eta^{-1} tu.
    let decay = (-t_final).exp();
    let mut out = PairField::zeros(grid);
    for i in 0..n {
        let inv_eta = 1.0 / grid.w_2chi[i];
        out.u.values[i] = decay * inv_eta * win_u[i];
        out.v.values[i] = decay * inv_eta * win_v[i];
    }
    Ok((out, stats))
}

/// State history sampled at one instant, with the derivative made once.
struct HistorySlice<'a> {
    t: f64,
    u: &'a ScalarField,
    v: &'a ScalarField,
    uy: ScalarField,
    vy: ScalarField,
}

/// Evaluates the closed-form representations of the origin jump averages
/// `(<<u_y>>(t), <<v_y>>(t))` from the run history and the velocity path.
///
/// Each formula is: an initial-trace term carried along the characteristic
/// through the full history, two memory integrals over the incoming
/// characteristic (evaluated here as one combined trapezoidal quadrature
/// over the history's own sample times), the affine frame source, and the
/// boundary term from the characteristic grazing the origin.  The
/// characteristic offsets must satisfy `z_+ > 0 > z_-`; a violation means
/// the bounded-speed assumption broke and is reported as an error.
pub fn jump_representation(
    history: &[Snapshot],
    path: &XdotPath,
    t: f64,
    params: &ModelParams,
    grid: &Grid,
) -> Result<(f64, f64)> {
    if path.sup_abs() >= 1.0 {
        return Err(ModelError::Oracle(format!(
            "velocity path reaches |xdot| = {} >= 1",
            path.sup_abs()
        )));
    }
    if history.is_empty() {
        return Err(ModelError::Oracle("empty history".into()));
    }
    let t_eps = 1e-9 * t.max(1.0);
    if history[0].t > t_eps {
        return Err(ModelError::Oracle("history must start at t = 0".into()));
    }
    if history.last().unwrap().t < t - t_eps {
        return Err(ModelError::Oracle(format!(
            "history ends at {} but the representation is requested at {t}",
            history.last().unwrap().t
        )));
    }
    let chi = params.chi;

    // Slices at or before t, newest last; precompute derivatives once.
    let mut slices: Vec<HistorySlice> = Vec::new();
    for snap in history.iter().filter(|s| s.t <= t + t_eps) {
        let wy = snap.w.derivative(grid);
        slices.push(HistorySlice { t: snap.t, u: &snap.w.u, v: &snap.w.v, uy: wy.u, vy: wy.v });
    }
    if slices.len() < 2 && t > t_eps {
        return Err(ModelError::Oracle("history too sparse for the memory integrals".into()));
    }

    // Current-state traces for the boundary term: take the slice closest
    // to t (the run always records the final instant).
    let last = slices.last().unwrap();
    let u0 = grid.jump_average(last.u);
    let v0 = grid.jump_average(last.v);
    let xdot_t = path.eval(t);

    // Initial-trace terms along the full characteristics.
    let z_m = if t > 0.0 { path.z_minus(t, t) } else { 0.0 };
    let z_p = if t > 0.0 { path.z_plus(t, t) } else { 0.0 };
    if t > t_eps && (z_m >= 0.0 || z_p <= 0.0) {
        return Err(ModelError::Oracle(format!(
            "characteristic offsets have the wrong sign: z- = {z_m}, z+ = {z_p}"
        )));
    }
    let first = &slices[0];
    let decay_t = (-t).exp();
    let mut jump_u = decay_t
        * eta_at(chi, z_m)
        * (interp_side(&first.uy.values, grid, z_m, -1.0)
            + 2.0 * chi * interp_side(&first.u.values, grid, z_m, -1.0));
    let mut jump_v = decay_t
        * eta_at(chi, z_p)
        * (interp_side(&first.vy.values, grid, z_p, 1.0)
            - 2.0 * chi * interp_side(&first.v.values, grid, z_p, 1.0));

    // Memory integrals: trapezoid in s over the history's own sample
    // times (s = t - tau runs from t down to 0 as tau increases).
    let integrand = |slice: &HistorySlice| -> (f64, f64) {
        let s = t - slice.t;
        let es = (-s).exp();
        let xdot_back = path.eval(slice.t);

        let zm = if s > 0.0 { path.z_minus(s, t) } else { 0.0 };
        let zp = if s > 0.0 { path.z_plus(s, t) } else { 0.0 };
        let vy = interp_side(&slice.vy.values, grid, zm, -1.0);
        let v = interp_side(&slice.v.values, grid, zm, -1.0);
        let uy_m = interp_side(&slice.uy.values, grid, zm, -1.0);
        let u_m = interp_side(&slice.u.values, grid, zm, -1.0);
        let f_u = es
            * eta_at(chi, zm)
            * ((vy + 2.0 * chi * v)
                + chi * ((uy_m + vy) + 2.0 * chi * (u_m + v))
                + 4.0 * chi * chi * xdot_back);

        let uy = interp_side(&slice.uy.values, grid, zp, 1.0);
        let u = interp_side(&slice.u.values, grid, zp, 1.0);
        let vy_p = interp_side(&slice.vy.values, grid, zp, 1.0);
        let v_p = interp_side(&slice.v.values, grid, zp, 1.0);
        let f_v = es
            * eta_at(chi, zp)
            * ((uy - 2.0 * chi * u)
                + chi * ((uy + vy_p) - 2.0 * chi * (u + v_p))
                + 4.0 * chi * chi * xdot_back);
        (f_u, f_v)
    };

    for pair in slices.windows(2) {
        let (a_u, a_v) = integrand(&pair[0]);
        let (b_u, b_v) = integrand(&pair[1]);
        let ds = pair[1].t - pair[0].t;
        if ds <= 0.0 {
            return Err(ModelError::Oracle("history times must strictly increase".into()));
        }
        // Sign sanity along the curve (skip the s = 0 endpoint).
        let s_mid = t - pair[0].t;
        if s_mid > t_eps && (path.z_minus(s_mid, t) >= 0.0 || path.z_plus(s_mid, t) <= 0.0) {
            return Err(ModelError::Oracle(
                "characteristic offsets changed sign along the history".into(),
            ));
        }
        jump_u += 0.5 * ds * (a_u + b_u);
        jump_v += 0.5 * ds * (a_v + b_v);
    }

    // Boundary terms from the characteristic grazing the origin.
    jump_u -= chi / (1.0 - xdot_t) * (u0 + v0 + 2.0 * xdot_t);
    jump_v += chi / (1.0 + xdot_t) * (u0 + v0 - 2.0 * xdot_t);

    Ok((jump_u, jump_v))
}
