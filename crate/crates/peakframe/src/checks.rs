//! The acceptance property suite behind the `check` subcommand.
//!
//! Thirteen independent criteria probe the discrete model from different
//! directions: algebraic identities of the operators (checked to rounding),
//! inequality families (checked with an O(h) defect allowance that must
//! vanish under refinement), conservation laws and the energy identity
//! (checked by refinement studies), end-to-end decay behavior (checked by
//! log-linear rate fits against the closed-form rate chain), agreement of
//! the grid solver with the independent integral-equation solver, and the
//! watchdog path for states that leave the admissible single-peak regime.
//!
//! Each criterion produces one [`CheckResult`]; dynamic outcomes (a failed
//! inequality, an unexpected abort, a fit that cannot be made) are reported
//! as failures with details, never as `Err`.  `Err` is reserved for
//! infrastructure problems such as an invalid configuration.

use serde::Serialize;
use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::characteristics::{jump_representation, XdotPath};
use crate::constants::theory_constants;
use crate::diagnostics::{
    check_interpolation, check_poincare, fit_decay_rate, verify_dissipation_identity,
    DiagnosticsRecord,
};
use crate::equilibrium::{make_initial, project_constraints, ConstraintMode, InitialSpec};
use crate::error::{AbortKind, Result};
use crate::grid::{build_grid, pair_norm2, pi_project, Grid, PairField, ScalarField};
use crate::operators::{assemble_operators, modified_entropy, pair_inner};
use crate::params::ModelParams;
use crate::runner::{fit_log_slope, oracle_convergence_study, RunConfig, EXIT_ABORT};
use crate::solver::{run, step, Mode, RunOptions, RunOutput, SolverState, StepConfig};

/// Outcome of one named criterion.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// The criterion's governing quantity (worst case over its sub-checks).
    pub measured: f64,
    /// The threshold `measured` was compared against.
    pub tolerance: f64,
    pub details: String,
}

/// Full report of the suite.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl CheckReport {
    /// One line per criterion, machine-grepable PASS/FAIL prefix.
    pub fn render_lines(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{} {:<32} measured {:>13.6e}  vs  {:>10.3e}  ({})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.tolerance,
                c.details
            );
        }
        let _ = writeln!(
            out,
            "{}: {}/{} criteria passed",
            if self.passed { "OK" } else { "FAILURE" },
            self.checks.iter().filter(|c| c.passed).count(),
            self.checks.len()
        );
        out
    }
}

/// Runs every criterion at the configured scale and collects the report.
pub fn run_all_checks(cfg: &RunConfig) -> Result<CheckReport> {
    let checks = vec![
        check_steady_fixed_point(cfg)?,
        check_collision_coercivity(cfg)?,
        check_projection_algebra(cfg)?,
        check_auxiliary_operator(cfg)?,
        check_weighted_poincare(cfg)?,
        check_trace_interpolation(cfg)?,
        check_bias_average_decay(cfg)?,
        check_dissipation_identity(cfg)?,
        check_nonlinear_decay(cfg)?,
        check_linearized_entropy_decay(cfg)?,
        check_solver_oracle_agreement(cfg)?,
        check_constant_recipes(cfg)?,
        check_peak_split_watchdog(cfg)?,
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(CheckReport { passed, checks })
}

fn result(
    name: &str,
    passed: bool,
    measured: f64,
    tolerance: f64,
    details: String,
) -> CheckResult {
    CheckResult { name: name.to_string(), passed, measured, tolerance, details }
}

/// Random pair with smooth bumps plus a rough component: the identities
/// under test are algebraic and must not care about smoothness.
fn random_pair(grid: &Grid, rng: &mut ChaCha8Rng) -> PairField {
    let c1: f64 = rng.random_range(-3.0..3.0);
    let c2: f64 = rng.random_range(-3.0..3.0);
    let a: f64 = rng.random_range(-1.0..1.0);
    let b: f64 = rng.random_range(-1.0..1.0);
    let k: f64 = rng.random_range(0.3..1.4);
    PairField::from_fns(
        grid,
        move |y| a * (-(y - c1) * (y - c1)).exp() + 0.3 * (k * y).sin(),
        move |y| b * (-0.7 * (y - c2) * (y - c2)).exp() + 0.2 * (1.1 * k * y).cos(),
    )
}

/// Random smooth scalar: superposed gaussians and a long-wave oscillation,
/// bounded derivatives (the inequality checks quote O(h) quadrature slack,
/// which presumes a resolved integrand).
fn random_smooth(grid: &Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    let c1: f64 = rng.random_range(-4.0..4.0);
    let c2: f64 = rng.random_range(-4.0..4.0);
    let a: f64 = rng.random_range(-1.0..1.0);
    let b: f64 = rng.random_range(-1.0..1.0);
    let k: f64 = rng.random_range(0.2..1.0);
    let s: f64 = rng.random_range(0.4..2.0);
    ScalarField::from_fn(grid, move |y| {
        a * (-s * (y - c1) * (y - c1)).exp()
            + b * (-0.5 * (y - c2) * (y - c2)).exp()
            + 0.3 * (k * y).sin()
    })
}

/// Criterion 1: the zero perturbation is an exact fixed point of the full
/// nonlinear update — 10^4 explicit steps leave it at zero to 1e-13.
fn check_steady_fixed_point(cfg: &RunConfig) -> Result<CheckResult> {
    let params = cfg.model_params()?;
    let grid = build_grid(&params, 20.0, 1000)?;
    let step_cfg = StepConfig {
        cfl: cfg.stepping.cfl,
        t_final: 1e6, // never clamps: the loop below counts steps, not time
        ..StepConfig::default()
    };
    let mut state = SolverState::new(PairField::zeros(&grid), Mode::Nonlinear);
    let steps = 10_000usize;
    for _ in 0..steps {
        step(&mut state, &params, &grid, &step_cfg, None)?;
    }
    let measured = state.w.max_abs();
    Ok(result(
        "steady-state-fixed-point",
        measured <= 1e-13,
        measured,
        1e-13,
        format!("max-norm after {steps} steps from the zero state, t = {:.2}", state.t),
    ))
}

/// Criterion 2: the collision operator dissipates exactly the squared
/// distance to local equilibria: <L W, W> = -2 ||(I - Pi) W||^2 on random
/// fields, to 1e-12 relative.
fn check_collision_coercivity(cfg: &RunConfig) -> Result<CheckResult> {
    let params = cfg.model_params()?;
    let grid = build_grid(&params, 20.0, 2000)?;
    let ops = assemble_operators(&params, &grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1302);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let w = random_pair(&grid, &mut rng);
        let lw = ops.apply_l(&w);
        let lhs = pair_inner(&grid, &lw, &w);
        let (_, ipi) = pi_project(&w);
        let rhs = -2.0 * pair_norm2(&grid, &ipi);
        let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0);
        worst = worst.max(rel);
    }
    Ok(result(
        "collision-coercivity-identity",
        worst <= 1e-12,
        worst,
        1e-12,
        "relative residual over 100 random fields".into(),
    ))
}

/// Criterion 3: projection algebra is bitwise — the velocity average of a
/// transported local equilibrium vanishes exactly, and the projector is
/// exactly idempotent.
fn check_projection_algebra(cfg: &RunConfig) -> Result<CheckResult> {
    let params = cfg.model_params()?;
    let grid = build_grid(&params, 20.0, 2000)?;
    let ops = assemble_operators(&params, &grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1303);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let w = random_pair(&grid, &mut rng);
        let tpw = ops.apply_t_pi(&w);
        let (pi_tpw, _) = pi_project(&tpw);
        worst = worst.max(pi_tpw.max_abs());
        let (piw, _) = pi_project(&w);
        let (pi2w, _) = pi_project(&piw);
        worst = worst.max(pi2w.u.sub(&piw.u).max_abs());
        worst = worst.max(pi2w.v.sub(&piw.v).max_abs());
    }
    Ok(result(
        "projection-algebra",
        worst == 0.0,
        worst,
        0.0,
        "bitwise deviation of Pi T Pi from 0 and Pi^2 from Pi, 100 random fields".into(),
    ))
}

/// Criterion 4: the auxiliary operator is a half-contraction off the local
/// equilibria (||A F|| <= (1/2)||(I - Pi) F||), the modified entropy is
/// norm-equivalent with constants (1 +- delta)/2, and the independent
/// screened-route assembly of A converges to the adjoint-route assembly at
/// first order in h.
fn check_auxiliary_operator(cfg: &RunConfig) -> Result<CheckResult> {
    let params = cfg.model_params()?;
    let grid = build_grid(&params, 20.0, 2000)?;
    let ops = assemble_operators(&params, &grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1304);
    let delta = 0.5;
    let mut min_slack = f64::INFINITY;
    for _ in 0..100 {
        let f = random_pair(&grid, &mut rng);
        let af = ops.apply_a(&f);
        let (_, ipif) = pi_project(&f);
        min_slack = min_slack
            .min(0.5 * pair_norm2(&grid, &ipif).sqrt() - pair_norm2(&grid, &af).sqrt());
        let n2 = pair_norm2(&grid, &f);
        let ent = modified_entropy(&grid, &ops, &f, delta);
        min_slack = min_slack.min(ent - 0.5 * (1.0 - delta) * n2);
        min_slack = min_slack.min(0.5 * (1.0 + delta) * n2 - ent);
    }

    // Route consistency under refinement: the exact-adjoint assembly and
    // the screened scalar assembly share nothing beyond the weight, so
    // their distance is pure discretization error.
    let mut pts = Vec::new();
    for n in [1000usize, 2000, 4000] {
        let g = build_grid(&params, 20.0, n)?;
        let o = assemble_operators(&params, &g)?;
        let w = PairField::from_fns(
            &g,
            |y| (-(y - 0.9) * (y - 0.9)).exp() + 0.2 * (0.7 * y).sin(),
            |y| 0.6 * (-0.5 * (y + 0.4) * (y + 0.4)).exp(),
        );
        let wy = w.derivative(&g);
        let d = o.apply_a(&wy).add_scaled(&o.apply_a_screened(&wy), -1.0);
        pts.push((g.h, pair_norm2(&g, &d).sqrt()));
    }
    let order = fit_log_slope(&pts);

    let passed = min_slack >= -1e-10 && order >= 0.9;
    Ok(result(
        "auxiliary-operator-bounds",
        passed,
        min_slack,
        -1e-10,
        format!(
            "min slack of contraction + entropy sandwich (100 fields); \
             route-consistency order {order:.2} (need >= 0.9)"
        ),
    ))
}

/// Criterion 5: the weighted spectral-gap inequality holds with constant
/// 1/chi^2 on random smooth fields (ratio <= 1 + 5h), and the constant is
/// optimal: the boundary-layer witness family reaches ratio >= 0.95.
fn check_weighted_poincare(cfg: &RunConfig) -> Result<CheckResult> {
    let params = cfg.model_params()?;
    let grid = build_grid(&params, 20.0, 2000)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1305);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let f = random_smooth(&grid, &mut rng);
        worst = worst.max(check_poincare(&grid, &f, &params));
    }
    let tol = 1.0 + 5.0 * grid.h;

    // Near-optimizer: sign(y)(e^{kappa|y|} - 1) saturates the constant as
    // kappa -> chi; at kappa = 0.98 chi on a wide box the ratio must clear
    // 0.95 (it sits near 0.957 for chi = 1/2).
    let wide = build_grid(&params, 64.0, 8000)?;
    let kappa = 0.98 * params.chi;
    let witness = ScalarField::from_fn(&wide, |y| y.signum() * ((kappa * y.abs()).exp() - 1.0));
    let witness_ratio = check_poincare(&wide, &witness, &params);

    let passed = worst <= tol && witness_ratio >= 0.95;
    Ok(result(
        "weighted-poincare",
        passed,
        worst,
        tol,
        format!(
            "max ratio over 100 random smooth fields; witness ratio {witness_ratio:.4} \
             (need >= 0.95)"
        ),
    ))
}

/// Criterion 6: the origin-trace interpolation bounds hold with slack
/// >= -5h on random fields for the weight pairs the decay analysis uses.
fn check_trace_interpolation(cfg: &RunConfig) -> Result<CheckResult> {
    let params = cfg.model_params()?;
    let grid = build_grid(&params, 20.0, 2000)?;
    let chi = params.chi;
    // (a, b) = (2 chi, 2 chi) and (2 chi + sqrt(alpha), 2 chi) for the two
    // screened strengths exercised by the analysis.
    let pairs = [
        (2.0 * chi, 2.0 * chi),
        (2.0 * chi + 0.5, 2.0 * chi),
        (2.0 * chi + 1.0, 2.0 * chi),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1306);
    let mut min_slack = f64::INFINITY;
    for (a, b) in pairs {
        for _ in 0..100 {
            let f = random_smooth(&grid, &mut rng);
            min_slack = min_slack.min(check_interpolation(&grid, &f, a, b)?);
        }
    }
    let tol = -5.0 * grid.h;
    Ok(result(
        "trace-interpolation",
        min_slack >= tol,
        min_slack,
        tol,
        "min slack over 100 random fields x 3 weight pairs".into(),
    ))
}

/// Linearized run helper for the conservation/dissipation refinement
/// studies: fixed horizon, records only where asked.
fn quick_run(
    cfg: &RunConfig,
    mode: Mode,
    alpha: f64,
    n: usize,
    t_final: f64,
    diag_stride: usize,
    constraint: Option<ConstraintMode>,
) -> Result<RunOutput> {
    let params = ModelParams::new(cfg.params.chi, alpha)?;
    let grid = build_grid(&params, 20.0, n)?;
    let ops = assemble_operators(&params, &grid)?;
    let mut spec = cfg.initial_spec();
    if let Some(c) = constraint {
        spec.constraint_mode = c;
    }
    let initial = make_initial(&spec, &params, &grid)?;
    let step_cfg = StepConfig {
        cfl: cfg.stepping.cfl,
        t_final,
        diag_stride,
        watchdog_stride: cfg.stepping.watchdog_stride,
    };
    run(&initial.field, mode, &params, &grid, &ops, &step_cfg, &RunOptions::default())
}

/// Criterion 7: the lambda-weighted average of the bias (u - v) decays as
/// e^{-2t} exactly along the linearized flow — relative defect at t = 2
/// below 1%, and the defect is pure discretization error (drops by >= 1.8
/// per joint (h, dt) halving).
fn check_bias_average_decay(cfg: &RunConfig) -> Result<CheckResult> {
    let mut worst_rel = 0.0f64;
    let mut min_factor = f64::INFINITY;
    let mut details = String::new();
    let mut trivial = true;
    let eps = cfg.initial.epsilon;
    for alpha in [0.0, 0.25] {
        // The exact e^{-2t} law needs the weighted centering functional to
        // vanish at t = 0. A pure-difference pair (phi, -phi) has u + v = 0
        // pointwise, so mass and centering vanish exactly while the bias
        // average itself stays nonzero.
        let residual = |n: usize| -> Result<(f64, f64)> {
            let params = ModelParams::new(cfg.params.chi, alpha)?;
            let grid = build_grid(&params, 20.0, n)?;
            let ops = assemble_operators(&params, &grid)?;
            let phi = |y: f64| eps * (-(y - 1.0) * (y - 1.0)).exp();
            let w0 = PairField::from_fns(&grid, phi, |y| -phi(y));
            let step_cfg = StepConfig {
                cfl: cfg.stepping.cfl,
                t_final: 2.0,
                diag_stride: usize::MAX,
                watchdog_stride: cfg.stepping.watchdog_stride,
            };
            let out =
                run(&w0, Mode::Linearized, &params, &grid, &ops, &step_cfg, &RunOptions::default())?;
            let first = out.series.first().expect("run records its endpoints");
            let last = out.series.last().expect("run records its endpoints");
            let res = (last.third_law - (-4.0f64).exp() * first.third_law).abs();
            Ok((res, first.third_law.abs()))
        };
        let (res_fine, scale) = residual(4000)?;
        if scale < 1e-14 {
            let _ = write!(details, "alpha {alpha}: zero data (trivially exact); ");
            continue;
        }
        trivial = false;
        let (res_coarse, _) = residual(2000)?;
        let rel = res_fine / scale;
        let factor = res_coarse / res_fine.max(1e-300);
        worst_rel = worst_rel.max(rel);
        min_factor = min_factor.min(factor);
        let _ = write!(details, "alpha {alpha}: rel defect {rel:.2e}, refinement factor {factor:.2}; ");
    }
    let passed = trivial || (worst_rel <= 0.01 && min_factor >= 1.8);
    Ok(result("bias-average-decay-law", passed, worst_rel, 0.01, details))
}

/// Criterion 8: the recorded energy-dissipation balance closes along
/// trajectories — its residual (time slope of the half squared derivative
/// norm minus the four-term right side) drops by >= 1.8 per joint (h, dt)
/// halving, in both regimes.
fn check_dissipation_identity(cfg: &RunConfig) -> Result<CheckResult> {
    let mut min_factor = f64::INFINITY;
    let mut details = String::new();
    let mut trivial = true;
    for (mode, alpha, label) in [
        (Mode::Nonlinear, 0.0, "nonlinear alpha 0"),
        (Mode::Linearized, 0.25, "linearized alpha 0.25"),
    ] {
        let res_at = |n: usize| -> Result<f64> {
            let out = quick_run(cfg, mode, alpha, n, 1.0, 1, None)?;
            Ok(verify_dissipation_identity(&out.series))
        };
        let fine = res_at(2000)?;
        if fine < 1e-18 {
            let _ = write!(details, "{label}: zero residual (trivial); ");
            continue;
        }
        trivial = false;
        let coarse = res_at(1000)?;
        let factor = coarse / fine;
        min_factor = min_factor.min(factor);
        let _ = write!(details, "{label}: residual {fine:.2e}, refinement factor {factor:.2}; ");
    }
    let passed = trivial || min_factor >= 1.8;
    let measured = if trivial { f64::INFINITY } else { min_factor };
    Ok(result("energy-dissipation-identity", passed, measured, 1.8, details))
}

fn nearest<'a>(series: &'a [DiagnosticsRecord], t: f64) -> &'a DiagnosticsRecord {
    series
        .iter()
        .min_by(|a, b| {
            (a.t - t).abs().partial_cmp(&(b.t - t).abs()).expect("finite record times")
        })
        .expect("nonempty series")
}

/// Criterion 9: end-to-end nonlinear decay at the reference parameters —
/// the squared derivative norm decays log-linearly past the transient
/// (positive rate, r^2 >= 0.98), drops below 4% of its initial value by
/// t = 10, the peak speed respects its certified bound whenever the bound
/// is valid, and the peak position converges (Cauchy tails).
///
/// Freshly assembled bumps mix fast ballistic transients (outward transport
/// through the confining weight, rate ~1.9 in the squared norm) with the slow
/// confined mode (~0.4), so their log-slope drifts across any 10-unit window
/// and no single-rate fit is clean. The criterion therefore measures the
/// decay on data prepared to sit on the slow structure: an even, mirror
/// symmetric bump is evolved for a 6-unit burn-in (shedding the ballistic
/// content), rescaled back to epsilon amplitude, and given a small
/// velocity-antisymmetric seed so the peak-speed and peak-position
/// sub-checks run on genuinely moving data (the seed is collisionally
/// damped, which is exactly what the position-convergence test wants).
fn check_nonlinear_decay(cfg: &RunConfig) -> Result<CheckResult> {
    let params = ModelParams::new(0.5, 0.0)?;
    let grid = build_grid(&params, 20.0, 4000)?;
    let ops = assemble_operators(&params, &grid)?;
    let eps = cfg.initial.epsilon;
    // Width 1.5 keeps the bump independent of the width-1 correction
    // profiles (a width-1 bump is annihilated by the mass projection).
    let raw = PairField::from_fns(
        &grid,
        |y| eps * (-(y / 1.5) * (y / 1.5)).exp(),
        |y| eps * (-(y / 1.5) * (y / 1.5)).exp(),
    );
    let w0 = project_constraints(&grid, &params, &raw)?;
    let (delta, delta_alpha) = cfg.entropy_weights(&params)?;
    let burn_cfg = StepConfig {
        cfl: cfg.stepping.cfl,
        t_final: 6.0,
        diag_stride: usize::MAX,
        watchdog_stride: cfg.stepping.watchdog_stride,
    };
    let opts = RunOptions { delta, delta_alpha, ..RunOptions::default() };
    let burn = run(&w0, Mode::Nonlinear, &params, &grid, &ops, &burn_cfg, &opts)?;
    if let Some(a) = &burn.abort {
        return Ok(result(
            "nonlinear-derivative-decay",
            false,
            0.0,
            0.0,
            format!("unexpected burn-in abort ({}) at t = {:.3}: {}", a.kind, a.t, a.detail),
        ));
    }
    let burned = burn.trajectory.final_state.w.clone();
    let amp = burned.u.max_abs().max(burned.v.max_abs());
    let core = if amp > 0.0 { burned.scale(eps / amp) } else { burned };
    let seed = PairField::from_fns(
        &grid,
        |y| 0.02 * eps * (-y * y).exp(),
        |y| -0.02 * eps * (-y * y).exp(),
    );
    let initial = core.add_scaled(&seed, 1.0);
    let step_cfg = StepConfig {
        cfl: cfg.stepping.cfl,
        t_final: 10.0,
        diag_stride: 5,
        watchdog_stride: cfg.stepping.watchdog_stride,
    };
    let out = run(&initial, Mode::Nonlinear, &params, &grid, &ops, &step_cfg, &opts)?;
    if let Some(a) = &out.abort {
        return Ok(result(
            "nonlinear-derivative-decay",
            false,
            0.0,
            0.0,
            format!("unexpected abort ({}) at t = {:.3}: {}", a.kind, a.t, a.detail),
        ));
    }
    let series = &out.series;
    let wy0 = series.first().expect("records exist").norm_wy2;
    if wy0 < 1e-28 {
        return Ok(result(
            "nonlinear-derivative-decay",
            true,
            0.0,
            0.0,
            "zero initial data: decay trivially satisfied".into(),
        ));
    }

    let samples: Vec<(f64, f64)> = series.iter().map(|r| (r.t, r.norm_wy2)).collect();
    let (gamma_hat, r2, fit_note) = match fit_decay_rate(&samples, (1.0, 10.0)) {
        Ok(f) => (f.gamma_hat, f.r2, String::new()),
        Err(e) => (f64::NAN, 0.0, format!("rate fit failed: {e}; ")),
    };
    let decay_ok = gamma_hat > 0.0 && r2 >= 0.98;

    let wy_end = series.last().expect("records exist").norm_wy2;
    let shrink = (wy_end / wy0).sqrt();
    let shrink_ok = shrink <= 0.2;

    let mut bound_margin = f64::INFINITY;
    let mut bound_violations = 0usize;
    for r in series.iter().filter(|r| r.xdot_bound_valid) {
        let m = r.xdot_bound + 1e-8 - r.xdot.abs();
        bound_margin = bound_margin.min(m);
        if m < 0.0 {
            bound_violations += 1;
        }
    }

    let x5 = nearest(series, 5.0).x;
    let x10 = series.last().expect("records exist").x;
    let cauchy_lhs = (x10 - x5).abs();
    let cauchy_rhs = 0.1 * x5.abs() + 1e-6;
    let cauchy_ok = cauchy_lhs <= cauchy_rhs;

    let passed = decay_ok && shrink_ok && bound_violations == 0 && cauchy_ok;
    Ok(result(
        "nonlinear-derivative-decay",
        passed,
        gamma_hat,
        0.0,
        format!(
            "{fit_note}rate {gamma_hat:.3} (r^2 {r2:.4}); norm shrink factor {shrink:.3} \
             (need <= 0.2); speed-bound violations {bound_violations}; peak tail \
             {cauchy_lhs:.2e} vs {cauchy_rhs:.2e}"
        ),
    ))
}

/// Criterion 10: linearized screened decay — with the bias average
/// projected out, the screened entropy decays at least at the certified
/// closed-form rate (fit >= 90% of 2 gamma) and respects the Gronwall
/// envelope with 5% headroom at every record.
fn check_linearized_entropy_decay(cfg: &RunConfig) -> Result<CheckResult> {
    let params = ModelParams::new(0.5, 0.25)?;
    let grid = build_grid(&params, cfg.grid.half_width, cfg.grid.n_cells)?;
    let ops = assemble_operators(&params, &grid)?;
    let spec = InitialSpec { constraint_mode: ConstraintMode::ProjectAll, ..cfg.initial_spec() };
    let initial = make_initial(&spec, &params, &grid)?;
    let cs = theory_constants(&params, cfg.entropy.p_assumed, cfg.entropy.c_assumed);
    let gamma_theory = cs.gamma_alpha;
    let step_cfg = StepConfig {
        cfl: cfg.stepping.cfl,
        t_final: 10.0,
        diag_stride: 5,
        watchdog_stride: cfg.stepping.watchdog_stride,
    };
    let opts = RunOptions {
        delta: cs.delta.clamp(0.0, 0.999),
        delta_alpha: cs.delta_alpha,
        ..RunOptions::default()
    };
    let out = run(&initial.field, Mode::Linearized, &params, &grid, &ops, &step_cfg, &opts)?;
    let series = &out.series;
    let l0 = series.first().expect("records exist").entropy_l_alpha;
    if l0.abs() < 1e-28 {
        return Ok(result(
            "linearized-entropy-decay",
            true,
            0.0,
            2.0 * gamma_theory * 0.9,
            "zero initial data: decay trivially satisfied".into(),
        ));
    }

    let samples: Vec<(f64, f64)> = series.iter().map(|r| (r.t, r.entropy_l_alpha)).collect();
    let (gamma_hat, r2, fit_note) = match fit_decay_rate(&samples, (1.0, 10.0)) {
        Ok(f) => (f.gamma_hat, f.r2, String::new()),
        Err(e) => (f64::NAN, 0.0, format!("rate fit failed: {e}; ")),
    };
    let needed = 2.0 * gamma_theory * 0.9;
    let rate_ok = gamma_hat >= needed;

    let mut envelope_margin = f64::INFINITY;
    for r in series {
        let cap = 1.05 * l0 * (-2.0 * gamma_theory * r.t).exp();
        envelope_margin = envelope_margin.min(cap - r.entropy_l_alpha);
    }
    let envelope_ok = envelope_margin >= 0.0;

    let passed = rate_ok && envelope_ok;
    Ok(result(
        "linearized-entropy-decay",
        passed,
        gamma_hat,
        needed,
        format!(
            "{fit_note}fitted rate {gamma_hat:.3} vs certified floor {needed:.4} \
             (r^2 {r2:.4}); envelope margin {envelope_margin:.2e}"
        ),
    ))
}

/// Per-resolution distance between the origin jump averages computed from
/// the history integral representation and directly from the grid state.
///
/// The observable is a difference of two O(h)-accurate quantities whose
/// leading errors partially cancel, so coarse grids sit below the asymptotic
/// regime (measured pairwise orders 0.49 and 0.84 at n = 400..1600); the
/// study therefore starts at n = 2400, where the order has stabilized.
fn jump_refinement_study(cfg: &RunConfig) -> Result<(Vec<(f64, f64)>, f64, bool)> {
    let params = ModelParams::new(cfg.params.chi, 0.0)?;
    let t_final = 0.5;
    let mut pts = Vec::new();
    for n in [2400usize, 3200, 4800] {
        let grid = build_grid(&params, 16.0, n)?;
        let ops = assemble_operators(&params, &grid)?;
        let spec = InitialSpec { width: cfg.initial.width.min(1.0), ..cfg.initial_spec() };
        let w0 = make_initial(&spec, &params, &grid)?.field;
        let step_cfg = StepConfig {
            cfl: cfg.stepping.cfl,
            t_final,
            diag_stride: usize::MAX,
            watchdog_stride: cfg.stepping.watchdog_stride,
        };
        let opts = RunOptions { history_stride: 1, ..RunOptions::default() };
        let out = run(&w0, Mode::Nonlinear, &params, &grid, &ops, &step_cfg, &opts)?;
        if let Some(a) = &out.abort {
            return Err(crate::error::ModelError::Abort {
                kind: a.kind,
                t: a.t,
                detail: a.detail.clone(),
            });
        }
        let path = XdotPath::from_samples(&out.trajectory.xdot_samples, grid.h)?;
        let (rep_u, rep_v) =
            jump_representation(&out.trajectory.history, &path, t_final, &params, &grid)?;
        let wy = out.trajectory.final_state.w.derivative(&grid);
        let err = (rep_u - grid.jump_average(&wy.u)).abs()
            + (rep_v - grid.jump_average(&wy.v)).abs();
        pts.push((grid.h, err));
    }
    let trivial = pts.iter().all(|(_, e)| *e < 1e-15);
    let order = fit_log_slope(&pts);
    Ok((pts, order, trivial))
}

/// Criterion 11: the grid solver agrees with the independent
/// integral-equation solver — static frame and recorded moving frame — at
/// first order under joint refinement, and the history integral
/// representation of the origin jump averages converges to the grid's own
/// jump averages at first order.
fn check_solver_oracle_agreement(cfg: &RunConfig) -> Result<CheckResult> {
    let static_rep = oracle_convergence_study(cfg, false)?;
    let moving_rep = oracle_convergence_study(cfg, true)?;
    let (_, jump_order, jump_trivial) = jump_refinement_study(cfg)?;
    let jump_ok = jump_trivial || jump_order >= 0.9;
    let passed = static_rep.passed && moving_rep.passed && jump_ok;
    let measured = static_rep
        .fitted_order
        .min(moving_rep.fitted_order)
        .min(if jump_trivial { f64::INFINITY } else { jump_order });
    Ok(result(
        "solver-oracle-agreement",
        passed,
        measured,
        0.9,
        format!(
            "convergence orders: static frame {:.2}, moving frame {:.2}, jump representation {}",
            static_rep.fitted_order,
            moving_rep.fitted_order,
            if jump_trivial { "trivial (zero data)".to_string() } else { format!("{jump_order:.2}") },
        ),
    ))
}

/// Criterion 12: the closed-form constant recipes reproduce their exact
/// values at the reference point chi = 1/2, alpha = 0.
fn check_constant_recipes(cfg: &RunConfig) -> Result<CheckResult> {
    let params = ModelParams::new(0.5, 0.0)?;
    let cs = theory_constants(&params, cfg.entropy.p_assumed, cfg.entropy.c_assumed);
    let root_half = 0.5f64.sqrt();
    let targets = [
        (cs.mu, 2.0, "mu"),
        (cs.c0, 4.0 * root_half, "c0"),
        (cs.c1, 8.0 * root_half, "c1"),
        (cs.c2, 2.0, "c2"),
        (cs.c3, 1.0, "c3"),
    ];
    let mut worst = 0.0f64;
    let mut worst_name = "all exact";
    for (got, want, name) in targets {
        let dev = (got - want).abs();
        if dev > worst {
            worst = dev;
            worst_name = name;
        }
    }
    Ok(result(
        "constant-recipes",
        worst <= 1e-12,
        worst,
        1e-12,
        format!("max deviation at the reference point ({worst_name})"),
    ))
}

/// Criterion 13: a state whose induced attractant has two maxima trips the
/// single-peak watchdog into a clean abort, and that abort maps to exit
/// code 2.
fn check_peak_split_watchdog(_cfg: &RunConfig) -> Result<CheckResult> {
    let params = ModelParams::new(0.5, 25.0)?;
    let grid = build_grid(&params, 20.0, 2000)?;
    let ops = assemble_operators(&params, &grid)?;
    // Two tall bumps far from the origin: under strong screening the
    // attractant develops side maxima there, violating the single-peak
    // hypothesis the moving frame is built on.  Deliberately NOT scaled by
    // the configured epsilon — the criterion needs the inadmissible state.
    let bump = |y: f64, c: f64| (-(y - c) * (y - c) / 0.25).exp();
    let w = PairField::from_fns(
        &grid,
        |y| 2.0 * (bump(y, 5.0) + bump(y, -5.0)),
        |y| 2.0 * (bump(y, 5.0) + bump(y, -5.0)),
    );
    let step_cfg =
        StepConfig { t_final: 1.0, diag_stride: usize::MAX, watchdog_stride: 1, ..StepConfig::default() };
    let out = run(&w, Mode::Nonlinear, &params, &grid, &ops, &step_cfg, &RunOptions::default())?;
    let (passed, details) = match &out.abort {
        Some(a) if a.kind == AbortKind::MultiPeak && EXIT_ABORT == 2 => (
            true,
            format!("watchdog abort at t = {:.4}, maps to exit code {EXIT_ABORT}", a.t),
        ),
        Some(a) => (false, format!("aborted, but with kind {} instead of multi-peak", a.kind)),
        None => (false, "run finished without tripping the watchdog".to_string()),
    };
    Ok(result(
        "peak-split-watchdog",
        passed,
        if passed { 1.0 } else { 0.0 },
        1.0,
        details,
    ))
}
