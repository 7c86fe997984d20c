//! Per-step diagnostics and the checks of the model's functional
//! inequalities, conservation laws, and decay statements.
//!
//! A run produces a [`DiagnosticsSeries`]: one [`DiagnosticsRecord`] per
//! sampled instant, carrying the conserved quantities, the split norms, the
//! entropy functionals, both sides of the energy-dissipation identity, and
//! the pointwise inequality margins.  The check functions in this module
//! consume such series (or standalone fields) and report margins rather
//! than panicking: the callers decide what tolerance a first-order scheme
//! has earned.

use crate::chemo::{check_single_peak, solve_chemo, xdot_bound};
use crate::error::{ModelError, Result};
use crate::grid::{pair_norms, Grid, PairField, ScalarField};
use crate::operators::{
    dissipation_rhs, dissipation_rhs_lin, modified_entropy, modified_entropy_alpha,
    DiscreteOperators,
};
use crate::params::ModelParams;
use crate::solver::Mode;

/// Scalar diagnostics of one instant along a run.
#[derive(Debug, Clone, Copy)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub xdot: f64,
    pub x: f64,
    /// `<u+v>_{2chi}` — conserved exactly by the dynamics.
    pub mass_law: f64,
    /// `<u_y+v_y>_lambda` — the centering condition, conserved at 0.
    pub second_law: f64,
    /// `<u-v>_lambda` — decays exactly like `e^{-2t}` (see
    /// [`check_conservation`] for when that is exact).
    pub third_law: f64,
    pub norm_w2: f64,
    pub norm_wy2: f64,
    pub norm_pi_wy2: f64,
    pub norm_ipi_wy2: f64,
    /// Modified entropy of the derivative state.
    pub entropy_l: f64,
    /// Screened variant (equals `entropy_l` when alpha = 0).
    pub entropy_l_alpha: f64,
    /// Finite-difference slope of `(1/2)||W_y||^2` across neighbouring
    /// records; NaN until [`fill_dissipation_slopes`] runs.
    pub diss_lhs: f64,
    /// Closed-form right-hand side of the same energy law.
    pub diss_rhs: f64,
    /// Worst weighted-Poincare ratio of the two components (<= 1 + O(h)).
    pub poincare_ratio: f64,
    /// A-priori bound on |xdot| from the norm decomposition.
    pub xdot_bound: f64,
    /// Whether the bound's denominator margin was positive.
    pub xdot_bound_valid: bool,
    /// Whether the attractant profile induced by the current state has a
    /// single peak (always true in linearized mode, where the frame is
    /// driven by traces rather than by the attractant).
    pub h1_ok: bool,
}

/// One run's diagnostics, in time order.
pub type DiagnosticsSeries = Vec<DiagnosticsRecord>;

/// Everything [`record_state`] needs about the instant being sampled.
#[derive(Debug, Clone, Copy)]
pub struct RecordInputs<'a> {
    pub mode: Mode,
    pub w: &'a PairField,
    pub t: f64,
    pub x: f64,
    pub xdot: f64,
    /// Entropy mixing weight for the unscreened functional.
    pub delta: f64,
    /// Entropy mixing weight for the screened functional (alpha > 0).
    pub delta_alpha: f64,
}

/// Samples every scalar diagnostic at one instant.
pub fn record_state(
    grid: &Grid,
    ops: &DiscreteOperators,
    params: &ModelParams,
    inp: &RecordInputs,
) -> DiagnosticsRecord {
    let w = inp.w;
    let wy = w.derivative(grid);
    let sum = w.u.add_scaled(&w.v, 1.0);
    let diff = w.u.sub(&w.v);
    let sum_y = wy.u.add_scaled(&wy.v, 1.0);

    let norms = pair_norms(grid, w, &wy);
    let entropy_l = modified_entropy(grid, ops, &wy, inp.delta);
    let entropy_l_alpha = if params.alpha == 0.0 {
        entropy_l
    } else {
        modified_entropy_alpha(grid, ops, w, &wy, inp.delta_alpha, params)
    };
    let diss_rhs = match inp.mode {
        Mode::Nonlinear => dissipation_rhs(grid, w, &wy, inp.xdot, params),
        Mode::Linearized => dissipation_rhs_lin(grid, w, &wy, inp.xdot, params),
    };
    let (bound, bound_valid) = xdot_bound(w, &wy, params, grid);
    let h1_ok = match inp.mode {
        Mode::Linearized => true,
        Mode::Nonlinear => {
            let rho = ScalarField {
                values: (0..grid.n_cells)
                    .map(|i| {
                        grid.w_2chi[i] * (1.0 + 0.5 * (w.u.values[i] + w.v.values[i]))
                    })
                    .collect(),
            };
            match solve_chemo(&rho, params, grid) {
                Ok(field) => check_single_peak(&field, grid).0,
                Err(_) => false,
            }
        }
    };

    DiagnosticsRecord {
        t: inp.t,
        xdot: inp.xdot,
        x: inp.x,
        mass_law: grid.weighted_average(&sum, grid.rate_2chi),
        second_law: grid.weighted_average(&sum_y, grid.rate_lambda),
        third_law: grid.weighted_average(&diff, grid.rate_lambda),
        norm_w2: norms.w2,
        norm_wy2: norms.wy2,
        norm_pi_wy2: norms.pi_wy2,
        norm_ipi_wy2: norms.ipi_wy2,
        entropy_l,
        entropy_l_alpha,
        diss_lhs: f64::NAN,
        diss_rhs,
        poincare_ratio: check_poincare(grid, &w.u, params).max(check_poincare(grid, &w.v, params)),
        xdot_bound: bound,
        xdot_bound_valid: bound_valid,
        h1_ok,
    }
}

/// Fills `diss_lhs` with finite-difference slopes of `(1/2)||W_y||^2`:
/// central differences at interior records, one-sided at the ends.
pub fn fill_dissipation_slopes(series: &mut [DiagnosticsRecord]) {
    let n = series.len();
    if n == 0 {
        return;
    }
    if n == 1 {
        series[0].diss_lhs = 0.0;
        return;
    }
    let energy: Vec<f64> = series.iter().map(|r| 0.5 * r.norm_wy2).collect();
    let times: Vec<f64> = series.iter().map(|r| r.t).collect();
    series[0].diss_lhs = (energy[1] - energy[0]) / (times[1] - times[0]);
    series[n - 1].diss_lhs = (energy[n - 1] - energy[n - 2]) / (times[n - 1] - times[n - 2]);
    for i in 1..n - 1 {
        series[i].diss_lhs = (energy[i + 1] - energy[i - 1]) / (times[i + 1] - times[i - 1]);
    }
}

/// Worst interior mismatch between the finite-difference energy slope and
/// the closed-form dissipation value (recomputed centrally here, so the
/// result does not depend on whether slopes were filled).
pub fn verify_dissipation_identity(series: &[DiagnosticsRecord]) -> f64 {
    if series.len() < 3 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for i in 1..series.len() - 1 {
        let slope = 0.5 * (series[i + 1].norm_wy2 - series[i - 1].norm_wy2)
            / (series[i + 1].t - series[i - 1].t);
        worst = worst.max((slope - series[i].diss_rhs).abs());
    }
    worst
}

/// Weighted-Poincare ratio: `chi^2 * ||w - <w>||^2 / ||w'||^2` in the
/// steady-state-weighted space.  The sharp constant makes this <= 1 for the
/// continuum; the discrete defect is O(h).  Constants (zero derivative)
/// return 0 by convention.
pub fn check_poincare(grid: &Grid, w: &ScalarField, params: &ModelParams) -> f64 {
    let wy = grid.spatial_derivative(w);
    let rhs = grid.weighted_inner(&wy, &wy, grid.rate_2chi);
    if rhs == 0.0 {
        return 0.0;
    }
    let avg = grid.weighted_average(w, grid.rate_2chi);
    let dev = ScalarField { values: w.values.iter().map(|x| x - avg).collect() };
    let lhs = grid.weighted_inner(&dev, &dev, grid.rate_2chi);
    params.chi * params.chi * lhs / rhs
}

/// Margin of the two trace-interpolation inequalities for rates
/// `a >= b > 0`:
///
/// * `|f(0) - <f>_a|^2 <= (1/(2a-b)) * (1/2) int |f'|^2 e^{-b|y|}`
/// * `<f>_a <= (a / sqrt(2(2a-b))) * (int |f|^2 e^{-b|y|})^{1/2}`
///
/// Returns the smaller of the two slacks (right side minus left side); a
/// correct inequality gives a nonnegative value up to O(h) quadrature
/// defect.  The average bound's constant is the sharp one Holder gives
/// (equality for constant `f` at `a = b`).
pub fn check_interpolation(grid: &Grid, f: &ScalarField, a: f64, b: f64) -> Result<f64> {
    if !(b > 0.0) || a < b {
        return Err(ModelError::Config(format!(
            "interpolation rates need a >= b > 0, got a = {a}, b = {b}"
        )));
    }
    let avg = grid.weighted_average(f, a);
    let f0 = grid.jump_average(f);
    let fy = grid.spatial_derivative(f);
    let slack_trace =
        0.5 / (2.0 * a - b) * grid.weighted_inner(&fy, &fy, b) - (f0 - avg) * (f0 - avg);
    let slack_avg =
        a / (2.0 * (2.0 * a - b)).sqrt() * grid.weighted_inner(f, f, b).sqrt() - avg;
    Ok(slack_trace.min(slack_avg))
}

/// Worst-case violations of the three laws along a series.
#[derive(Debug, Clone, Copy)]
pub struct ConservationReport {
    /// max |<u+v>_{2chi}|.
    pub max_mass: f64,
    /// max |<u_y+v_y>_lambda|.
    pub max_second: f64,
    /// max |<u-v>_lambda(t) - e^{-2(t-t0)} <u-v>_lambda(t0)|.
    pub max_third_residual: f64,
    /// Whether the exact-decay law applies in this (mode, alpha) regime:
    /// the frame-flux term in its derivation cancels only in linearized
    /// mode or for alpha = 0, so elsewhere the residual is informational.
    pub third_law_exact: bool,
}

/// Evaluates the conservation-law residuals over a recorded series.
pub fn check_conservation(
    series: &[DiagnosticsRecord],
    params: &ModelParams,
    mode: Mode,
) -> ConservationReport {
    let mut report = ConservationReport {
        max_mass: 0.0,
        max_second: 0.0,
        max_third_residual: 0.0,
        third_law_exact: mode == Mode::Linearized || params.alpha == 0.0,
    };
    let Some(first) = series.first() else {
        return report;
    };
    for r in series {
        report.max_mass = report.max_mass.max(r.mass_law.abs());
        report.max_second = report.max_second.max(r.second_law.abs());
        let predicted = (-2.0 * (r.t - first.t)).exp() * first.third_law;
        report.max_third_residual = report.max_third_residual.max((r.third_law - predicted).abs());
    }
    report
}

/// An exponential fitted to positive samples on a time window.
#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    /// Fitted decay rate (positive = decaying).
    pub gamma_hat: f64,
    /// First and last sample times actually used.
    pub t0: f64,
    pub t1: f64,
    /// Coefficient of determination of the log-linear fit, in [0, 1].
    pub r2: f64,
    /// Fitted value at t = 0.
    pub prefactor: f64,
}

/// Least-squares line through `(t, log value)` on the window; the decay
/// rate is minus the slope.  Rejects windows with < 10 samples or with
/// nonpositive values (no decay claim to fit there).
pub fn fit_decay_rate(samples: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit> {
    let (w0, w1) = window;
    if !(w1 > w0) {
        return Err(ModelError::Config(format!("bad fit window [{w0}, {w1}]")));
    }
    let used: Vec<(f64, f64)> =
        samples.iter().copied().filter(|(t, _)| *t >= w0 && *t <= w1).collect();
    if used.len() < 10 {
        return Err(ModelError::Config(format!(
            "need at least 10 samples in the fit window, found {}",
            used.len()
        )));
    }
    if let Some((t, v)) = used.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(ModelError::Config(format!(
            "nonpositive value {v} at t = {t}: nothing exponential to fit"
        )));
    }
    let n = used.len() as f64;
    let logs: Vec<(f64, f64)> = used.iter().map(|&(t, v)| (t, v.ln())).collect();
    let t_mean = logs.iter().map(|(t, _)| t).sum::<f64>() / n;
    let y_mean = logs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let s_tt: f64 = logs.iter().map(|(t, _)| (t - t_mean) * (t - t_mean)).sum();
    let s_ty: f64 = logs.iter().map(|(t, y)| (t - t_mean) * (y - y_mean)).sum();
    let s_yy: f64 = logs.iter().map(|(_, y)| (y - y_mean) * (y - y_mean)).sum();

    let (slope, r2) = if s_yy <= 1e-18 * n {
        // Numerically constant samples (variation at rounding level):
        // flat line, perfect fit.
        (0.0, 1.0)
    } else {
        let slope = s_ty / s_tt;
        let ss_res: f64 = logs
            .iter()
            .map(|(t, y)| {
                let fit = y_mean + slope * (t - t_mean);
                (y - fit) * (y - fit)
            })
            .sum();
        (slope, (1.0 - ss_res / s_yy).clamp(0.0, 1.0))
    };
    Ok(RateFit {
        gamma_hat: -slope,
        t0: used[0].0,
        t1: used[used.len() - 1].0,
        r2,
        prefactor: (y_mean - slope * t_mean).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn setup(chi: f64, alpha: f64, half_width: f64, n: usize) -> (ModelParams, Grid) {
        let p = ModelParams::new(chi, alpha).unwrap();
        let g = build_grid(&p, half_width, n).unwrap();
        (p, g)
    }

    #[test]
    fn poincare_ratio_is_zero_for_constants_and_small_for_gaussians() {
        let (p, g) = setup(0.5, 0.0, 20.0, 2000);
        let c = ScalarField::constant(&g, 3.25);
        assert_eq!(check_poincare(&g, &c, &p), 0.0);
        let gauss = ScalarField::from_fn(&g, |y| (-y * y).exp());
        let ratio = check_poincare(&g, &gauss, &p);
        assert!(ratio > 0.0 && ratio <= 1.0 + 5.0 * g.h, "ratio {ratio}");
    }

    #[test]
    fn poincare_near_optimizers_approach_the_sharp_constant() {
        // Functions growing toward the weight's critical rate saturate the
        // constant; the approach must be monotone in the growth rate.
        let (p, g) = setup(0.5, 0.0, 64.0, 8000);
        let ratio_at = |kappa: f64| {
            let w = ScalarField::from_fn(&g, |y| {
                if y == 0.0 { 0.0 } else { y.signum() * ((kappa * y.abs()).exp() - 1.0) }
            });
            check_poincare(&g, &w, &p)
        };
        let r3 = ratio_at(0.30);
        let r4 = ratio_at(0.40);
        let r49 = ratio_at(0.49);
        assert!(r3 < r4 && r4 < r49, "not monotone: {r3} {r4} {r49}");
        assert!(r49 > 0.90 && r49 <= 1.0 + 5.0 * g.h, "r49 = {r49}");
    }

    #[test]
    fn interpolation_slack_matches_high_precision_reference() {
        // f = e^{-y^2}, a = 1, b = 1/2: both sides evaluated with 250-bit
        // quadrature; trace slack 0.0777877642..., average slack
        // 0.0425265789... (the minimum).
        let (p, g) = setup(0.5, 0.0, 40.0, 4000);
        let _ = p;
        let f = ScalarField::from_fn(&g, |y| (-y * y).exp());
        let slack = check_interpolation(&g, &f, 1.0, 0.5).unwrap();
        assert!(
            (slack - 0.042526578929540191).abs() < 2e-3,
            "avg slack off: {slack}"
        );
        // The trace inequality's slack alone, reconstructed from its sides.
        // Midpoint quadrature of the kink-weighted integrands is O(h^2).
        let avg = g.weighted_average(&f, 1.0);
        assert!((avg - 0.54564136076504704).abs() < 5e-4);
        let fy = g.spatial_derivative(&f);
        let rhs = 0.5 / 1.5 * g.weighted_inner(&fy, &fy, 0.5);
        let lhs = (g.jump_average(&f) - avg) * (g.jump_average(&f) - avg);
        assert!((rhs - 0.28422953728152825).abs() < 2e-3);
        assert!((lhs - 0.20644177304743813).abs() < 1e-3);
    }

    #[test]
    fn interpolation_handles_the_closed_form_witnesses() {
        let (_, g) = setup(0.5, 0.0, 40.0, 4000);
        // Constant: trace side is 0 = 0; average side is an equality at
        // a = b up to tail truncation, so the total slack is ~0 but may
        // round either way.
        let c = ScalarField::constant(&g, 1.0);
        let slack_c = check_interpolation(&g, &c, 1.0, 1.0).unwrap();
        assert!(slack_c.abs() < 1e-4, "constant slack {slack_c}");
        // f = e^{-a|y|}: the trace side is exactly |1 - 1/2|^2 = 1/4.
        let a = 1.0;
        let f = ScalarField::from_fn(&g, |y| (-a * y.abs()).exp());
        let avg = g.weighted_average(&f, a);
        assert!((avg - 0.5).abs() < 1e-3);
        let slack = check_interpolation(&g, &f, a, 0.5).unwrap();
        assert!(slack > -5.0 * g.h, "kinked witness slack {slack}");
    }

    #[test]
    fn interpolation_rejects_misordered_rates() {
        let (_, g) = setup(0.5, 0.0, 20.0, 400);
        let f = ScalarField::constant(&g, 1.0);
        assert!(check_interpolation(&g, &f, 0.5, 1.0).is_err());
        assert!(check_interpolation(&g, &f, 1.0, 0.0).is_err());
    }

    #[test]
    fn rate_fit_recovers_exact_exponentials() {
        let samples: Vec<(f64, f64)> =
            (0..200).map(|k| { let t = k as f64 * 0.05; (t, 5.0 * (-3.0 * t).exp()) }).collect();
        let fit = fit_decay_rate(&samples, (0.0, 10.0)).unwrap();
        assert!((fit.gamma_hat - 3.0).abs() < 1e-10);
        assert!((fit.prefactor - 5.0).abs() < 1e-9);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!(fit.t1 > fit.t0);
    }

    #[test]
    fn rate_fit_tracks_modulated_decay_and_constants() {
        let modulated: Vec<(f64, f64)> = (0..400)
            .map(|k| { let t = k as f64 * 0.025; (t, (-t).exp() * (2.0 + t.sin())) })
            .collect();
        let fit = fit_decay_rate(&modulated, (1.0, 10.0)).unwrap();
        assert!((fit.gamma_hat - 1.0).abs() < 0.1, "gamma {}", fit.gamma_hat);

        let flat: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, 2.5)).collect();
        let fit = fit_decay_rate(&flat, (0.0, 30.0)).unwrap();
        assert_eq!(fit.gamma_hat, 0.0);
        assert_eq!(fit.r2, 1.0);
        assert!((fit.prefactor - 2.5).abs() < 1e-12);
    }

    #[test]
    fn rate_fit_rejects_sparse_or_nonpositive_data() {
        let few: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, 1.0)).collect();
        assert!(fit_decay_rate(&few, (0.0, 10.0)).is_err());
        let negative: Vec<(f64, f64)> =
            (0..20).map(|k| (k as f64 * 0.1, 1.0 - k as f64 * 0.02)).collect();
        assert!(fit_decay_rate(&negative, (0.0, 10.0)).is_ok());
        let crossing: Vec<(f64, f64)> =
            (0..20).map(|k| (k as f64 * 0.1, 1.0 - k as f64)).collect();
        assert!(fit_decay_rate(&crossing, (0.0, 10.0)).is_err());
    }

    #[test]
    fn slope_filling_and_identity_check_agree_on_synthetic_series() {
        // Build a synthetic series whose energy is exactly quadratic in t
        // and whose rhs equals the true slope: central differences are
        // exact for quadratics, so the identity residual is ~0.
        let (p, g) = setup(0.5, 0.0, 20.0, 400);
        let ops = crate::operators::assemble_operators(&p, &g).unwrap();
        let w = PairField::zeros(&g);
        let mut series: DiagnosticsSeries = (0..6)
            .map(|k| {
                let t = k as f64 * 0.1;
                let mut r = record_state(
                    &g,
                    &ops,
                    &p,
                    &RecordInputs {
                        mode: Mode::Linearized,
                        w: &w,
                        t,
                        x: 0.0,
                        xdot: 0.0,
                        delta: 0.1,
                        delta_alpha: 0.1,
                    },
                );
                r.norm_wy2 = 2.0 * (3.0 + 4.0 * t + 5.0 * t * t);
                r.diss_rhs = 4.0 + 10.0 * t;
                r
            })
            .collect();
        fill_dissipation_slopes(&mut series);
        for r in &series[1..5] {
            assert!((r.diss_lhs - r.diss_rhs).abs() < 1e-12);
        }
        // Endpoints are one-sided and first-order: the forward difference
        // overshoots the t = 0 slope by dt * e'' / 2 = 0.5 exactly.
        assert!((series[0].diss_lhs - (series[0].diss_rhs + 0.5)).abs() < 1e-12);
        assert!(verify_dissipation_identity(&series) < 1e-12);
    }

    #[test]
    fn conservation_report_flags_exact_regimes() {
        let (p, g) = setup(0.5, 0.25, 20.0, 400);
        let ops = crate::operators::assemble_operators(&p, &g).unwrap();
        let w = PairField::zeros(&g);
        let rec = |t: f64, mode: Mode| {
            record_state(
                &g,
                &ops,
                &p,
                &RecordInputs { mode, w: &w, t, x: 0.0, xdot: 0.0, delta: 0.1, delta_alpha: 0.1 },
            )
        };
        let series = vec![rec(0.0, Mode::Linearized), rec(1.0, Mode::Linearized)];
        let rep = check_conservation(&series, &p, Mode::Linearized);
        assert!(rep.third_law_exact);
        assert_eq!(rep.max_mass, 0.0);
        assert_eq!(rep.max_third_residual, 0.0);
        let rep = check_conservation(&series, &p, Mode::Nonlinear);
        assert!(!rep.third_law_exact, "nonlinear screened dynamics has a flux residual");
        let p0 = ModelParams::new(0.5, 0.0).unwrap();
        let rep = check_conservation(&series, &p0, Mode::Nonlinear);
        assert!(rep.third_law_exact);
    }

    #[test]
    fn record_state_samples_every_field_finitely() {
        let (p, g) = setup(0.5, 0.25, 20.0, 800);
        let ops = crate::operators::assemble_operators(&p, &g).unwrap();
        let w = PairField::from_fns(
            &g,
            |y| 0.02 * (-(y - 0.3) * (y - 0.3)).exp(),
            |y| 0.01 * (-(y + 0.2) * (y + 0.2)).exp(),
        );
        let r = record_state(
            &g,
            &ops,
            &p,
            &RecordInputs {
                mode: Mode::Nonlinear,
                w: &w,
                t: 0.7,
                x: 0.01,
                xdot: 0.005,
                delta: 0.17,
                delta_alpha: 0.21,
            },
        );
        for (name, v) in [
            ("mass", r.mass_law),
            ("second", r.second_law),
            ("third", r.third_law),
            ("w2", r.norm_w2),
            ("wy2", r.norm_wy2),
            ("pi", r.norm_pi_wy2),
            ("ipi", r.norm_ipi_wy2),
            ("L", r.entropy_l),
            ("La", r.entropy_l_alpha),
            ("rhs", r.diss_rhs),
            ("poincare", r.poincare_ratio),
            ("bound", r.xdot_bound),
        ] {
            assert!(v.is_finite(), "{name} not finite");
        }
        assert!(r.h1_ok, "a near-equilibrium hump keeps a single peak");
        assert!(r.norm_pi_wy2 + r.norm_ipi_wy2 <= r.norm_wy2 * (1.0 + 1e-12));
        // Norm-equivalence sandwich for the modified entropy.
        let lo = 0.5 * (1.0 - 0.17) * r.norm_wy2;
        let hi = 0.5 * (1.0 + 0.17) * r.norm_wy2;
        assert!(r.entropy_l >= lo && r.entropy_l <= hi);
        // alpha > 0: the screened entropy subtracts a nonnegative trace term.
        assert!(r.entropy_l_alpha.is_finite());
    }
}
