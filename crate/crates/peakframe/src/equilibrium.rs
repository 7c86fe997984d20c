//! Steady state, tumbling kernel, and constraint-respecting initial data.

use crate::error::{ModelError, Result};
use crate::grid::{Grid, PairField, ScalarField};
use crate::params::ModelParams;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The explicit steady profile `eta(y) = exp(-2 chi |y|)`, with total mass
/// `1/chi`. Both velocity components share it, so the perturbation ansatz is
/// `f = (1 + u) eta / 2` for right-movers and `(1 + v) eta / 2` for
/// left-movers.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub eta: ScalarField,
}

/// Pointwise-exact evaluation of the steady profile on the grid. The values
/// coincide with the grid's `2 chi` weight table by construction.
pub fn steady_state(params: &ModelParams, grid: &Grid) -> SteadyState {
    let chi = params.chi;
    SteadyState {
        eta: ScalarField::from_fn(grid, |y| (-2.0 * chi * y.abs()).exp()),
    }
}

/// Tumbling rate of a cell at position `y` moving with velocity `v_sign`
/// (+1 right, -1 left) in the moving frame: `1 + chi sign(y) sign(v)`.
/// `peak_side` is the sign of (position - peak); in the centered frame that
/// is simply sign(y), passed explicitly so lab-frame callers can reuse it.
pub fn tumbling_kernel(chi: f64, peak_side: f64, v_sign: f64) -> f64 {
    debug_assert!(v_sign == 1.0 || v_sign == -1.0, "velocity must be +-1");
    1.0 + chi * peak_side.signum() * v_sign
}

/// Shape families for initial perturbations. The model fixes no canonical
/// initial data; these are representative smooth profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// u = eps * G((y - y0)/w), v = (eps/2) * G((y - y0)/w): same bump on
    /// both components with a 2:1 amplitude ratio, so both the pointwise
    /// difference u - v and its weighted averages start nonzero.
    GaussianBump,
    /// Modulated wave packet: u = eps cos(pi (y-y0)/w) E, v = (eps/2)
    /// sin(pi (y-y0)/w) E with E a gaussian envelope of width w.
    CosinePacket,
    /// Seeded sum of five random gaussians per component (widths >= 0.5).
    RandomSmooth,
}

/// How strictly the initial data must satisfy the conserved functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// Enforce all three: `<u+v>_{2chi} = 0`, `<u_y+v_y>_lambda = 0`, and
    /// `<u-v>_lambda = 0`.
    ProjectAll,
    /// Enforce only the mass constraint `<u+v>_{2chi} = 0`.
    ProjectMassOnly,
    /// Use the raw shape.
    None,
}

/// Recipe for an initial perturbation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialSpec {
    pub shape: Shape,
    /// Amplitude; 0 gives the exact steady state.
    pub epsilon: f64,
    /// Center offset of the profile.
    pub center: f64,
    /// Width scale (> 0).
    pub width: f64,
    /// Seed for `random_smooth`.
    pub seed: u64,
    pub constraint_mode: ConstraintMode,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self {
            shape: Shape::GaussianBump,
            epsilon: 0.01,
            center: 1.0,
            width: 1.0,
            seed: 7,
            constraint_mode: ConstraintMode::ProjectAll,
        }
    }
}

/// Initial data plus the sup-norm report used for smallness checks.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub field: PairField,
    pub sup_u: f64,
    pub sup_v: f64,
    pub sup_uy: f64,
    pub sup_vy: f64,
}

impl InitialData {
    /// Largest of the four sup-norms; the `c` fed to the decay-constant
    /// formulas.
    pub fn sup_bound(&self) -> f64 {
        self.sup_u.max(self.sup_v).max(self.sup_uy).max(self.sup_vy)
    }
}

/// Values of the three conserved linear functionals on a pair.
pub fn constraint_values(grid: &Grid, params: &ModelParams, w: &PairField) -> (f64, f64, f64) {
    let sum = w.u.add_scaled(&w.v, 1.0);
    let diff = w.u.sub(&w.v);
    let wy = w.derivative(grid);
    let dsum = wy.u.add_scaled(&wy.v, 1.0);
    let _ = params;
    (
        grid.weighted_average(&sum, grid.rate_2chi),
        grid.weighted_average(&dsum, grid.rate_lambda),
        grid.weighted_average(&diff, grid.rate_lambda),
    )
}

fn raw_shape(spec: &InitialSpec, grid: &Grid) -> PairField {
    let eps = spec.epsilon;
    let y0 = spec.center;
    let w = spec.width;
    match spec.shape {
        Shape::GaussianBump => PairField::from_fns(
            grid,
            |y| eps * (-((y - y0) / w).powi(2)).exp(),
            |y| 0.5 * eps * (-((y - y0) / w).powi(2)).exp(),
        ),
        Shape::CosinePacket => PairField::from_fns(
            grid,
            |y| {
                let z = (y - y0) / w;
                eps * (std::f64::consts::PI * z).cos() * (-z * z).exp()
            },
            |y| {
                let z = (y - y0) / w;
                0.5 * eps * (std::f64::consts::PI * z).sin() * (-z * z).exp()
            },
        ),
        Shape::RandomSmooth => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let component = |rng: &mut ChaCha8Rng| {
                let bumps: Vec<(f64, f64, f64)> = (0..5)
                    .map(|_| {
                        let a: f64 = rng.random_range(-1.0..1.0);
                        let c: f64 = y0 + rng.random_range(-3.0 * w..3.0 * w);
                        let s: f64 = rng.random_range(0.5..(0.5 + w));
                        (a, c, s)
                    })
                    .collect();
                move |y: f64| {
                    bumps
                        .iter()
                        .map(|(a, c, s)| a * (-((y - c) / s).powi(2)).exp())
                        .sum::<f64>()
                }
            };
            let fu = component(&mut rng);
            let fv = component(&mut rng);
            PairField::from_fns(grid, |y| eps * fu(y), |y| eps * fv(y))
        }
    }
}

/// Fixed smooth correction profiles used by the constraint projection.
///
/// Their parities make the 3x3 constraint Gram matrix exactly diagonal on the
/// symmetric grid:
/// - P1 = (g, g) with g even hits only the mass functional,
/// - P2 = (g, -g) with g even hits only `<u - v>_lambda`,
/// - P3 = (q, q) with q odd hits only the centering functional
///   `<u_y + v_y>_lambda`.
fn correction_profiles(grid: &Grid) -> [PairField; 3] {
    let g = |y: f64| (-y * y).exp();
    let q = |y: f64| y * (-y * y).exp();
    [
        PairField::from_fns(grid, g, g),
        PairField::from_fns(grid, g, |y| -g(y)),
        PairField::from_fns(grid, q, q),
    ]
}

/// Subtracts multiples of the fixed correction profiles so that all three
/// conserved functionals of `w` vanish. Linear in `w`; errors if the
/// profile/functional Gram matrix is not diagonal on this grid.
pub fn project_constraints(grid: &Grid, params: &ModelParams, w: &PairField) -> Result<PairField> {
    let profiles = correction_profiles(grid);
    let (c1, c2, c3) = constraint_values(grid, params, w);
    let (g1, z12, z13) = constraint_values(grid, params, &profiles[0]);
    let (z21, z22, g2) = constraint_values(grid, params, &profiles[1]);
    let (z31, g3, z33) = constraint_values(grid, params, &profiles[2]);
    // Parity makes the off-diagonal couplings vanish identically;
    // treat any residual as a broken assumption, not roundoff.
    let off = [z12, z13, z21, z22, z31, z33];
    if off.iter().any(|z| z.abs() > 1e-12)
        || g1.abs() < 1e-10
        || g2.abs() < 1e-10
        || g3.abs() < 1e-10
    {
        return Err(ModelError::Internal(format!(
            "constraint projection system is not diagonal: \
             diag = ({g1:.3e}, {g2:.3e}, {g3:.3e}), max off = {:.3e}",
            off.iter().fold(0.0f64, |m, z| m.max(z.abs()))
        )));
    }
    let mut out = w.add_scaled(&profiles[0], -c1 / g1);
    out = out.add_scaled(&profiles[1], -c3 / g2);
    out = out.add_scaled(&profiles[2], -c2 / g3);
    Ok(out)
}

/// Builds initial data from a shape spec, applies the requested constraint
/// projection, and reports sup-norms.
///
/// With `ProjectAll`, the three conserved functionals vanish to 1e-12 after
/// subtracting multiples of the fixed correction profiles; the projection is
/// linear in the raw data. Data that would make the physical densities
/// `(1 + u) eta`, `(1 + v) eta` nonpositive anywhere is rejected.
pub fn make_initial(spec: &InitialSpec, params: &ModelParams, grid: &Grid) -> Result<InitialData> {
    if spec.epsilon < 0.0 {
        return Err(ModelError::Config(format!(
            "epsilon must be >= 0, got {}",
            spec.epsilon
        )));
    }
    if !(spec.width > 0.0) {
        return Err(ModelError::Config(format!(
            "width must be positive, got {}",
            spec.width
        )));
    }
    let mut field = raw_shape(spec, grid);

    match spec.constraint_mode {
        ConstraintMode::None => {}
        ConstraintMode::ProjectMassOnly => {
            let profiles = correction_profiles(grid);
            let (c1, _, _) = constraint_values(grid, params, &field);
            let (g1, _, _) = constraint_values(grid, params, &profiles[0]);
            if g1.abs() < 1e-10 {
                return Err(ModelError::Internal(
                    "degenerate mass correction profile".into(),
                ));
            }
            field = field.add_scaled(&profiles[0], -c1 / g1);
        }
        ConstraintMode::ProjectAll => {
            field = project_constraints(grid, params, &field)?;
        }
    }

    // Physical densities (1 + u) eta and (1 + v) eta must stay positive.
    let min_u = field.u.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_v = field.v.values.iter().cloned().fold(f64::INFINITY, f64::min);
    if 1.0 + min_u <= 0.0 || 1.0 + min_v <= 0.0 {
        return Err(ModelError::Reject(format!(
            "perturbation drives the density nonpositive: min(1+u) = {:.3e}, \
             min(1+v) = {:.3e}",
            1.0 + min_u,
            1.0 + min_v
        )));
    }

    let wy = field.derivative(grid);
    Ok(InitialData {
        sup_u: field.u.max_abs(),
        sup_v: field.v.max_abs(),
        sup_uy: wy.u.max_abs(),
        sup_vy: wy.v.max_abs(),
        field,
    })
}

/// Max-norm of the full discrete tendency at the steady state (u = v = 0,
/// xdot = 0). Every source term carries a factor of u, v, or xdot and the
/// upwind flux of the zero field vanishes, so this is exactly zero; any
/// nonzero value signals an assembly bug.
pub fn steady_residual(params: &ModelParams, grid: &Grid) -> f64 {
    let w = PairField::zeros(grid);
    let tendency = crate::solver::full_tendency_nonlinear(&w, 0.0, params, grid);
    tendency.max_abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn setup(alpha: f64) -> (ModelParams, Grid) {
        let p = ModelParams::new(0.5, alpha).unwrap();
        let g = build_grid(&p, 20.0, 4000).unwrap();
        (p, g)
    }

    #[test]
    fn steady_state_mass_symmetry_and_trace() {
        let (p, g) = setup(0.0);
        let eta = steady_state(&p, &g).eta;
        // Direct mass: sum eta h = integral e^{-|y|} = 1/chi = 2
        // (up to the O(h^2) kink error and the e^{-2 chi L} tail).
        let direct: f64 = eta.values.iter().sum::<f64>() * g.h;
        assert!((direct - 1.0 / p.chi).abs() < 1e-4, "mass 1/chi: {direct}");
        for i in 0..g.n_cells {
            let j = g.n_cells - 1 - i;
            assert_eq!(eta.values[i], eta.values[j], "eta must be symmetric");
        }
        // The origin trace comes from one-sided quadratic extrapolation,
        // so it carries an O(h^3) defect.
        assert!((g.jump_average(&eta) - 1.0).abs() < 1e-5, "eta(0) = 1");
    }

    #[test]
    fn tumbling_kernel_matches_moving_frame_convention() {
        assert!((tumbling_kernel(0.3, 1.0, 1.0) - 1.3).abs() < 1e-15);
        assert!((tumbling_kernel(0.3, -2.5, 1.0) - 0.7).abs() < 1e-15);
        assert!((tumbling_kernel(0.0, 1.0, -1.0) - 1.0).abs() < 1e-15);
        assert!((tumbling_kernel(0.5, -1.0, -1.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn zero_amplitude_gives_steady_state() {
        let (p, g) = setup(0.25);
        let spec = InitialSpec {
            epsilon: 0.0,
            ..InitialSpec::default()
        };
        let data = make_initial(&spec, &p, &g).unwrap();
        assert_eq!(data.field.max_abs(), 0.0);
        assert_eq!(data.sup_bound(), 0.0);
        let (c1, c2, c3) = constraint_values(&g, &p, &data.field);
        assert_eq!((c1, c2, c3), (0.0, 0.0, 0.0));
    }

    #[test]
    fn projection_enforces_all_constraints_for_all_shapes() {
        let (p, g) = setup(0.25);
        for shape in [Shape::GaussianBump, Shape::CosinePacket, Shape::RandomSmooth] {
            for seed in [1u64, 42, 2024] {
                let spec = InitialSpec {
                    shape,
                    epsilon: 0.01,
                    center: 0.8,
                    width: 1.2,
                    seed,
                    constraint_mode: ConstraintMode::ProjectAll,
                };
                let data = make_initial(&spec, &p, &g).unwrap();
                let (c1, c2, c3) = constraint_values(&g, &p, &data.field);
                assert!(
                    c1.abs() <= 1e-12 && c2.abs() <= 1e-12 && c3.abs() <= 1e-12,
                    "{shape:?}/{seed}: constraints after projection = \
                     ({c1:.2e}, {c2:.2e}, {c3:.2e})"
                );
            }
        }
    }

    #[test]
    fn mass_only_mode_enforces_only_mass() {
        let (p, g) = setup(0.0);
        let spec = InitialSpec {
            constraint_mode: ConstraintMode::ProjectMassOnly,
            ..InitialSpec::default()
        };
        let data = make_initial(&spec, &p, &g).unwrap();
        let (c1, _c2, c3) = constraint_values(&g, &p, &data.field);
        assert!(c1.abs() <= 1e-12, "mass must vanish, got {c1:.2e}");
        assert!(
            c3.abs() > 1e-6,
            "difference functional should remain nonzero in mass-only mode"
        );
    }

    #[test]
    fn projection_is_linear_in_amplitude() {
        let (p, g) = setup(0.0);
        let base = InitialSpec {
            epsilon: 0.004,
            ..InitialSpec::default()
        };
        let scaled = InitialSpec {
            epsilon: 0.012,
            ..base.clone()
        };
        let a = make_initial(&base, &p, &g).unwrap().field;
        let b = make_initial(&scaled, &p, &g).unwrap().field;
        let residual = b.add_scaled(&a, -3.0);
        assert!(
            residual.max_abs() < 1e-14,
            "projected data must scale linearly with epsilon: {:.2e}",
            residual.max_abs()
        );
    }

    #[test]
    fn deep_negative_bump_is_rejected() {
        let (p, g) = setup(0.0);
        let spec = InitialSpec {
            // The packet's trough reaches ~0.4 * epsilon, so this drives
            // the per-species density 1 + u below zero.
            epsilon: 3.0,
            shape: Shape::CosinePacket,
            constraint_mode: ConstraintMode::None,
            ..InitialSpec::default()
        };
        let err = make_initial(&spec, &p, &g).unwrap_err();
        assert!(matches!(err, ModelError::Reject(_)), "got {err}");
    }

    #[test]
    fn random_smooth_is_seed_deterministic() {
        let (p, g) = setup(0.0);
        let spec = InitialSpec {
            shape: Shape::RandomSmooth,
            seed: 99,
            ..InitialSpec::default()
        };
        let a = make_initial(&spec, &p, &g).unwrap().field;
        let b = make_initial(&spec, &p, &g).unwrap().field;
        assert_eq!(a, b, "same seed must give identical data");
        let c = make_initial(
            &InitialSpec {
                seed: 100,
                ..spec.clone()
            },
            &p,
            &g,
        )
        .unwrap()
        .field;
        assert!(c.sub_norm(&a) > 0.0, "different seed must differ");
    }

    #[test]
    fn steady_residual_is_exactly_zero() {
        for (chi, alpha) in [(0.5, 0.0), (0.3, 1.0), (0.8, 0.25)] {
            let p = ModelParams::new(chi, alpha).unwrap();
            let g = build_grid(&p, 30.0, 2000).unwrap();
            let r = steady_residual(&p, &g);
            assert!(
                r <= 1e-13,
                "steady state must be an exact discrete fixed point, got {r:.2e}"
            );
        }
    }

    #[test]
    fn residual_detector_is_live() {
        let (p, g) = setup(0.0);
        let mut w = PairField::zeros(&g);
        w.u.values[1000] = 1e-3;
        let tendency = crate::solver::full_tendency_nonlinear(&w, 0.0, &p, &g);
        assert!(
            tendency.max_abs() > 1e-5,
            "perturbing u must produce a visible tendency"
        );
    }
}

#[cfg(test)]
impl PairField {
    /// Max-norm distance, test helper.
    fn sub_norm(&self, other: &PairField) -> f64 {
        self.add_scaled(other, -1.0).max_abs()
    }
}
