//! Chemoattractant field, single-peak watchdog, and peak-velocity formulas.

use crate::error::{ModelError, Result};
use crate::grid::{pair_norm2, pi_project, Grid, PairField, ScalarField};
use crate::params::ModelParams;

/// Chemical field induced by a density: the screened Poisson solution of
/// `-S'' + alpha S = rho` on the line.
///
/// For `alpha = 0` only the gradient is well defined (the potential grows
/// linearly at infinity); `s` is then anchored to 0 at the left boundary and
/// meaningful only up to an additive constant, while `s_y` is the bounded
/// symmetric antiderivative of `-rho`.
#[derive(Debug, Clone)]
pub struct ChemoField {
    pub s: ScalarField,
    pub s_y: ScalarField,
    pub alpha: f64,
}

/// Solves `-S'' + alpha S = rho` by exact O(n) summation of the exponential
/// kernel `e^{-sqrt(alpha)|y - z|} / (2 sqrt(alpha))` against the midpoint
/// masses `rho_j h`.
///
/// Two exponential recursions (left-to-right and right-to-left partial sums)
/// reproduce the full O(n^2) kernel sum to roundoff. The gradient uses the
/// signed kernel, which drops the diagonal term. For `alpha = 0` the gradient
/// is `S_y(y) = (1/2)(mass right of y - mass left of y)`, so the peak sits at
/// the mass median.
pub fn solve_chemo(rho: &ScalarField, params: &ModelParams, grid: &Grid) -> Result<ChemoField> {
    let n = grid.n_cells;
    assert_eq!(rho.len(), n, "density length mismatch");
    if let Some(bad) = rho.values.iter().find(|r| **r < -1e-12) {
        return Err(ModelError::Reject(format!(
            "density must be nonnegative, found {bad:.3e}"
        )));
    }
    let h = grid.h;
    let alpha = params.alpha;

    if alpha > 0.0 {
        let beta = params.sqrt_alpha();
        let decay = (-beta * h).exp();
        // p[i] = sum_{j <= i} e^{-beta (y_i - y_j)} rho_j h (left mass seen
        // from y_i), q[i] the mirror from the right.
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        p[0] = rho.values[0] * h;
        for i in 1..n {
            p[i] = decay * p[i - 1] + rho.values[i] * h;
        }
        q[n - 1] = rho.values[n - 1] * h;
        for i in (0..n - 1).rev() {
            q[i] = decay * q[i + 1] + rho.values[i] * h;
        }
        let mut s = vec![0.0; n];
        let mut s_y = vec![0.0; n];
        for i in 0..n {
            // The diagonal term rho_i h is contained in both sweeps once.
            s[i] = (p[i] + q[i] - rho.values[i] * h) / (2.0 * beta);
            s_y[i] = -(p[i] - q[i]) / 2.0;
        }
        Ok(ChemoField {
            s: ScalarField { values: s },
            s_y: ScalarField { values: s_y },
            alpha,
        })
    } else {
        // Prefix masses; sign(y_i - y_j) never vanishes for i != j on the
        // staggered grid, and the i = j term carries sign 0.
        let masses: Vec<f64> = rho.values.iter().map(|r| r * h).collect();
        let total: f64 = masses.iter().sum();
        let mut s_y = vec![0.0; n];
        let mut left = 0.0;
        for i in 0..n {
            let right = total - left - masses[i];
            s_y[i] = 0.5 * (right - left);
            left += masses[i];
        }
        // Antiderivative anchored at the left boundary; the constant is
        // physically irrelevant at alpha = 0.
        let mut s = vec![0.0; n];
        for i in 1..n {
            s[i] = s[i - 1] + 0.5 * h * (s_y[i - 1] + s_y[i]);
        }
        Ok(ChemoField {
            s: ScalarField { values: s },
            s_y: ScalarField { values: s_y },
            alpha,
        })
    }
}

/// Checks that the chemical field has a single interior maximum: the gradient
/// must change sign exactly once, from + to -, across the cell centers.
/// Returns the crossing edge position when the structure holds.
///
/// Exact zeros of the gradient are skipped when counting transitions (a
/// plateau at the top is still one peak). A `false` result is the watchdog
/// signal that aborts nonlinear runs.
pub fn check_single_peak(field: &ChemoField, grid: &Grid) -> (bool, f64) {
    let mut transitions = 0usize;
    let mut position = f64::NAN;
    let mut prev_sign = 0.0f64;
    let mut prev_idx = 0usize;
    for (i, g) in field.s_y.values.iter().enumerate() {
        let sign = if *g > 0.0 {
            1.0
        } else if *g < 0.0 {
            -1.0
        } else {
            continue;
        };
        if prev_sign != 0.0 && sign != prev_sign {
            transitions += 1;
            if prev_sign > 0.0 && sign < 0.0 {
                // Edge midway between the last strictly-signed centers.
                position = 0.5 * (grid.centers[prev_idx] + grid.centers[i]);
            } else {
                // A - to + transition is a valley: not a single peak.
                return (false, f64::NAN);
            }
        }
        prev_sign = sign;
        prev_idx = i;
    }
    if transitions == 1 {
        (true, position)
    } else {
        (false, f64::NAN)
    }
}

/// Instantaneous peak velocity of the nonlinear moving-frame dynamics:
///
/// `xdot = [lambda (u(0) - v(0)) - sqrt(alpha) <u - v>_lambda] / c(u, v)`,
/// `c(u, v) = 4 chi + lambda (u(0) + v(0)) - sqrt(alpha) <u + v>_lambda`,
///
/// with `<f>_lambda = (lambda/2) integral f e^{-lambda |y|}` and point values
/// taken as means of one-sided origin limits. For `alpha = 0` this reduces
/// exactly to `(u(0) - v(0)) / (2 + u(0) + v(0))`.
///
/// The derivation divides by `c(u, v)`, which stays near `4 chi` only while
/// the perturbation is small; when `|c|` drops below `0.1 * 4 chi` the
/// perturbative regime is lost and an error is returned (the time stepper
/// converts it into an abort stamped with the current time).
pub fn peak_velocity(w: &PairField, params: &ModelParams, grid: &Grid) -> Result<f64> {
    debug_assert_eq!(params.lambda, grid.rate_lambda, "grid/params mismatch");
    let u0 = grid.jump_average(&w.u);
    let v0 = grid.jump_average(&w.v);
    let sqrt_a = params.sqrt_alpha();
    let lam = params.lambda;
    let (mut diff_avg, mut sum_avg) = (0.0, 0.0);
    if sqrt_a > 0.0 {
        diff_avg = grid.weighted_average(&w.u.sub(&w.v), lam);
        sum_avg = grid.weighted_average(&w.u.add_scaled(&w.v, 1.0), lam);
    }
    let numerator = lam * (u0 - v0) - sqrt_a * diff_avg;
    let denominator = 4.0 * params.chi + lam * (u0 + v0) - sqrt_a * sum_avg;
    let floor = 0.1 * 4.0 * params.chi;
    if denominator.abs() < floor {
        return Err(ModelError::Reject(format!(
            "perturbative regime lost: |c(u,v)| = {:.3e} < {floor:.3e}",
            denominator.abs()
        )));
    }
    Ok(numerator / denominator)
}

/// Peak velocity of the linearized dynamics:
/// `xdot_lin = (lambda / 4 chi) (u(0) - v(0)
///             - (sqrt(alpha)/2) integral (u - v) e^{-lambda |y|} dy)`.
pub fn peak_velocity_lin(w: &PairField, params: &ModelParams, grid: &Grid) -> f64 {
    debug_assert_eq!(params.lambda, grid.rate_lambda, "grid/params mismatch");
    let u0 = grid.jump_average(&w.u);
    let v0 = grid.jump_average(&w.v);
    let sqrt_a = params.sqrt_alpha();
    let mut raw_diff = 0.0;
    if sqrt_a > 0.0 {
        let one = ScalarField::constant(grid, 1.0);
        raw_diff = grid.weighted_inner(&w.u.sub(&w.v), &one, params.lambda);
    }
    (params.lambda / (4.0 * params.chi)) * (u0 - v0 - 0.5 * sqrt_a * raw_diff)
}

/// A priori bound on the peak velocity in terms of split first-order norms:
///
/// with `mu = 4 chi sqrt(2 (chi + sqrt(alpha))) / lambda`, the bound
/// `(||(I-Pi)Wy|| + 2 chi ||(I-Pi)W||) / (mu - ||Pi Wy|| - 2 chi ||Pi W||)`
/// holds whenever the denominator is positive; `valid` reports that gate.
pub fn xdot_bound(
    w: &PairField,
    wy: &PairField,
    params: &ModelParams,
    grid: &Grid,
) -> (f64, bool) {
    let mu = 4.0 * params.chi * (2.0 * (params.chi + params.sqrt_alpha())).sqrt() / params.lambda;
    let (pi_w, ipi_w) = pi_project(w);
    let (pi_wy, ipi_wy) = pi_project(wy);
    let margin = mu
        - pair_norm2(grid, &pi_wy).sqrt()
        - 2.0 * params.chi * pair_norm2(grid, &pi_w).sqrt();
    if margin > 0.0 {
        let numer =
            pair_norm2(grid, &ipi_wy).sqrt() + 2.0 * params.chi * pair_norm2(grid, &ipi_w).sqrt();
        (numer / margin, true)
    } else {
        (0.0, false)
    }
}
