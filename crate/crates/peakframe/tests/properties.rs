//! Randomized structural properties of the discrete model, checked on small
//! grids across the admissible parameter range. Each property is an exact
//! identity, an inequality with a quadrature defect allowance that shrinks
//! with the mesh, or an invariant of a utility type.

use proptest::prelude::*;

use peakframe::characteristics::XdotPath;
use peakframe::equilibrium::{constraint_values, project_constraints};
use peakframe::grid::{build_grid, pair_norm2, pi_project, Grid, PairField, ScalarField};
use peakframe::operators::{assemble_operators, modified_entropy, pair_inner};
use peakframe::params::ModelParams;
use peakframe::solver::{step, Mode, SolverState, StepConfig};

/// Sum of a few Gaussian bumps; the all-purpose smooth test function.
#[derive(Debug, Clone)]
struct Bumps(Vec<(f64, f64, f64)>);

impl Bumps {
    fn eval(&self, y: f64) -> f64 {
        self.0
            .iter()
            .map(|(a, c, s)| a * (-((y - c) / s) * ((y - c) / s)).exp())
            .sum()
    }

    fn scalar(&self, grid: &Grid) -> ScalarField {
        ScalarField::from_fn(grid, |y| self.eval(y))
    }
}

fn bumps() -> impl Strategy<Value = Bumps> {
    proptest::collection::vec(
        (
            -1.0..1.0f64,       // amplitude
            -8.0..8.0f64,       // center
            0.7..3.0f64,        // width
        ),
        1..4,
    )
    .prop_map(Bumps)
}

fn pair(grid: &Grid, a: &Bumps, b: &Bumps) -> PairField {
    PairField {
        u: a.scalar(grid),
        v: b.scalar(grid),
    }
}

/// chi range with a comfortable tail budget at half-width 32.
fn chi() -> impl Strategy<Value = f64> {
    0.3..0.8f64
}

fn alpha() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 0.25..1.5f64]
}

fn small_grid(chi: f64, alpha: f64, n: usize) -> (ModelParams, Grid) {
    let params = ModelParams::new(chi, alpha).expect("strategy stays in range");
    let grid = build_grid(&params, 32.0, n).expect("tail budget holds at L = 32");
    (params, grid)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    /// The weighted average is normalized against the analytic weight mass,
    /// so constants are reproduced up to the midpoint-rule defect of the
    /// kinked exponential weight — second order with constant 1/24 — plus
    /// the budgeted truncated tail.
    #[test]
    fn weighted_average_reproduces_constants(
        c in -5.0..5.0f64,
        ch in chi(),
        al in alpha(),
        half_n in 100..200usize,
    ) {
        let (params, grid) = small_grid(ch, al, 2 * half_n);
        let f = ScalarField::constant(&grid, c);
        for rate in [grid.rate_2chi, grid.rate_lambda] {
            let avg = grid.weighted_average(&f, rate);
            let budget = (rate * grid.h) * (rate * grid.h) / 12.0 + 1e-9;
            prop_assert!(
                (avg - c).abs() <= budget * (1.0 + c.abs()),
                "rate {rate}: average {avg} vs constant {c} (budget {budget:.2e})"
            );
        }
        let _ = params;
    }

    /// The constraint projection really zeroes all three conserved
    /// functionals, whatever the input field.
    #[test]
    fn projection_zeroes_all_three_functionals(
        a in bumps(),
        b in bumps(),
        ch in chi(),
        al in alpha(),
        half_n in 100..200usize,
    ) {
        let (params, grid) = small_grid(ch, al, 2 * half_n);
        let w = pair(&grid, &a, &b);
        let projected = project_constraints(&grid, &params, &w).expect("profiles stay diagonal");
        let (m1, m2, m3) = constraint_values(&grid, &params, &projected);
        let scale = 1.0 + w.u.max_abs().max(w.v.max_abs());
        prop_assert!(m1.abs() <= 1e-12 * scale, "mass functional {m1:e}");
        prop_assert!(m2.abs() <= 1e-12 * scale, "centering functional {m2:e}");
        prop_assert!(m3.abs() <= 1e-12 * scale, "bias functional {m3:e}");
    }

    /// The constraint projection is linear: scaling the data scales the
    /// projected field.
    #[test]
    fn projection_commutes_with_scaling(
        a in bumps(),
        b in bumps(),
        factor in 0.1..10.0f64,
        ch in chi(),
        half_n in 100..200usize,
    ) {
        let (params, grid) = small_grid(ch, 0.0, 2 * half_n);
        let w = pair(&grid, &a, &b);
        let p1 = project_constraints(&grid, &params, &w)
            .expect("profiles stay diagonal")
            .scale(factor);
        let p2 = project_constraints(&grid, &params, &w.scale(factor))
            .expect("profiles stay diagonal");
        let diff = p1.add_scaled(&p2, -1.0);
        let scale = 1.0 + p2.u.max_abs().max(p2.v.max_abs());
        prop_assert!(
            diff.u.max_abs().max(diff.v.max_abs()) <= 1e-12 * scale,
            "projection is not homogeneous"
        );
    }

    /// Velocity-split fields reconstruct exactly and the two parts are
    /// orthogonal in the weighted inner product.
    #[test]
    fn velocity_split_reconstructs_and_is_orthogonal(
        a in bumps(),
        b in bumps(),
        ch in chi(),
        al in alpha(),
        half_n in 100..200usize,
    ) {
        let (params, grid) = small_grid(ch, al, 2 * half_n);
        let w = pair(&grid, &a, &b);
        let (pi_w, rest) = pi_project(&w);
        let rebuilt = pi_w.add_scaled(&rest, 1.0);
        let diff = rebuilt.add_scaled(&w, -1.0);
        let amp = 1.0 + w.u.max_abs().max(w.v.max_abs());
        prop_assert!(
            diff.u.max_abs().max(diff.v.max_abs()) <= 1e-15 * amp,
            "split must reconstruct to rounding"
        );
        let cross = pair_inner(&grid, &pi_w, &rest);
        let scale = pair_norm2(&grid, &w).max(1.0);
        prop_assert!(cross.abs() <= 1e-12 * scale, "parts not orthogonal: {cross:e}");
        let _ = params;
    }

    /// Spectral-gap inequality of the confining weight: weighted variance is
    /// controlled by the weighted derivative energy, with the mesh-size
    /// defect allowance.
    #[test]
    fn poincare_ratio_is_bounded(
        a in bumps(),
        ch in chi(),
        al in alpha(),
        half_n in 100..200usize,
    ) {
        let (params, grid) = small_grid(ch, al, 2 * half_n);
        let f = a.scalar(&grid);
        let ratio = peakframe::diagnostics::check_poincare(&grid, &f, &params);
        prop_assert!(ratio <= 1.0 + 5.0 * grid.h, "ratio {ratio} at h = {}", grid.h);
    }

    /// Origin-trace and average interpolation inequalities hold with the
    /// mesh-size defect allowance, for both weight-rate pairs in use.
    #[test]
    fn interpolation_slack_stays_nonnegative(
        a in bumps(),
        ch in chi(),
        al in alpha(),
        half_n in 100..200usize,
    ) {
        let (params, grid) = small_grid(ch, al, 2 * half_n);
        let f = a.scalar(&grid);
        let two_chi = grid.rate_2chi;
        let lambda = grid.rate_lambda;
        for (ra, rb) in [(two_chi, two_chi), (lambda, two_chi)] {
            let slack = peakframe::diagnostics::check_interpolation(&grid, &f, ra, rb)
                .expect("rates ordered by construction");
            prop_assert!(
                slack >= -5.0 * grid.h,
                "slack {slack} at rates ({ra}, {rb}), h = {}",
                grid.h
            );
        }
        let _ = params;
    }

    /// The auxiliary operator is a 1/2-contraction from the fluctuation
    /// part: ||A f|| <= (1/2) ||(I - Pi) f||.
    #[test]
    fn auxiliary_operator_is_a_half_contraction(
        a in bumps(),
        b in bumps(),
        ch in chi(),
        al in alpha(),
        half_n in 100..200usize,
    ) {
        let (params, grid) = small_grid(ch, al, 2 * half_n);
        let ops = assemble_operators(&params, &grid).expect("assembly succeeds");
        let f = pair(&grid, &a, &b);
        let af = ops.apply_a(&f);
        let (_, rest) = pi_project(&f);
        let lhs = pair_norm2(&grid, &af).sqrt();
        let rhs = 0.5 * pair_norm2(&grid, &rest).sqrt();
        prop_assert!(lhs <= rhs + 1e-10, "||A f|| = {lhs} vs {rhs}");
    }

    /// The modified entropy is norm-equivalent with the advertised
    /// constants: (1 - delta)/2 ||f||^2 <= E <= (1 + delta)/2 ||f||^2.
    #[test]
    fn modified_entropy_is_norm_equivalent(
        a in bumps(),
        b in bumps(),
        delta in 0.0..0.95f64,
        ch in chi(),
        al in alpha(),
        half_n in 100..200usize,
    ) {
        let (params, grid) = small_grid(ch, al, 2 * half_n);
        let ops = assemble_operators(&params, &grid).expect("assembly succeeds");
        let f = pair(&grid, &a, &b);
        let norm2 = pair_norm2(&grid, &f);
        let entropy = modified_entropy(&grid, &ops, &f, delta);
        let slack = 1e-12 * (1.0 + norm2);
        prop_assert!(entropy >= 0.5 * (1.0 - delta) * norm2 - slack);
        prop_assert!(entropy <= 0.5 * (1.0 + delta) * norm2 + slack);
    }

    /// Piecewise-linear velocity paths never leave the convex hull of their
    /// samples, inside or outside the sampled range.
    #[test]
    fn velocity_path_stays_in_sample_hull(
        raw in proptest::collection::vec((-0.8..0.8f64,), 2..12),
        spacing in 0.05..0.5f64,
        probe in -2.0..12.0f64,
    ) {
        let samples: Vec<(f64, f64)> = raw
            .iter()
            .enumerate()
            .map(|(i, (v,))| (i as f64 * spacing, *v))
            .collect();
        let path = XdotPath::from_samples(&samples, spacing * 0.7).expect("valid samples");
        let lo = raw.iter().map(|(v,)| *v).fold(f64::INFINITY, f64::min);
        let hi = raw.iter().map(|(v,)| *v).fold(f64::NEG_INFINITY, f64::max);
        let got = path.eval(probe);
        prop_assert!(
            (lo - 1e-12..=hi + 1e-12).contains(&got),
            "eval({probe}) = {got} outside [{lo}, {hi}]"
        );
    }

    /// The zero state is an exact fixed point of a single step for any
    /// admissible parameters, in both dynamics.
    #[test]
    fn zero_state_survives_a_step_exactly(
        ch in chi(),
        al in alpha(),
        half_n in 100..200usize,
        nonlinear in proptest::bool::ANY,
    ) {
        let (params, grid) = small_grid(ch, al, 2 * half_n);
        let mode = if nonlinear { Mode::Nonlinear } else { Mode::Linearized };
        let mut state = SolverState::new(PairField::zeros(&grid), mode);
        let cfg = StepConfig { cfl: 0.4, t_final: 1.0, ..StepConfig::default() };
        step(&mut state, &params, &grid, &cfg, None).expect("step from zero succeeds");
        prop_assert!(state.w.max_abs() == 0.0, "zero state moved");
        prop_assert!(state.xdot_last == 0.0, "peak speed nonzero at equilibrium");
    }
}
