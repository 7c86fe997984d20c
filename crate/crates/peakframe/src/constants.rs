//! Explicit scalar constants for the quantitative decay analysis.
//!
//! Everything in this module is closed-form arithmetic in the model
//! parameters: the interpolation constants entering the auxiliary-operator
//! estimates, the entropy mixing weight `delta` and the dissipation margins
//! it produces, the jump-trace envelope parameters, the perturbation budget
//! for the decay-rate chain, and the screened-regime (`alpha > 0`)
//! analogues.  No grid is involved.  The tests freeze reference values
//! computed independently at 250-bit precision for several parameter
//! points, so any silent edit to a formula trips a literal comparison.
//!
//! Validity is reported through flags rather than errors: the formulas are
//! total on the admissible parameter range, but several only certify decay
//! under side conditions (perturbation size below its threshold, net rate
//! positive, leading margin positive).  Callers decide what a failed flag
//! means for them; the diagnostics print them verbatim.

use crate::params::ModelParams;

/// Bundle of closed-form constants, together with the parameter values
/// they were evaluated at and the validity flags of the side conditions.
#[derive(Debug, Clone)]
pub struct ConstantSet {
    /// Tumbling-bias amplitude the set was computed for.
    pub chi: f64,
    /// Screening parameter of the attractant equation.
    pub alpha: f64,
    /// Assumed bound on the peak speed, `sup |xdot| <= p`.
    pub p: f64,
    /// Assumed initial perturbation size entering the trace envelope.
    pub c: f64,

    /// Denominator margin for the peak-velocity formula:
    /// `mu = 4 chi sqrt(2 (chi + sqrt(alpha))) / lambda`.  Positive for all
    /// admissible parameters; the velocity formula is well defined while
    /// the perturbation stays below `mu`.
    pub mu: f64,

    /// Trace constant: `|f(0)| <= c0 ||f'||` on the mean-zero class.
    /// Case split at `chi^2 = 1/2`.
    pub c0: f64,
    /// Trace constant for the auxiliary-operator output.
    pub c1: f64,
    /// Operator bound on the twisted transport commutator.
    pub c2: f64,
    /// Coefficient of the peak-speed penalty in the mixing-weight budget.
    pub c3: f64,

    /// Entropy mixing weight for the unscreened regime, `2 / (A + B)`
    /// where `A` collects the bounded terms and `B` the coercive margin.
    pub delta: f64,
    /// Margin the mixing weight extracts: `eta_gap = delta * B`.
    pub eta_gap: f64,
    /// Leading dissipation margin after the perturbation penalties
    /// proportional to `p` are subtracted.
    pub mu0: f64,

    /// Decay rate of the jump-trace envelope, `r = 1 + 2 chi (1 - p)`.
    pub r: f64,
    /// Amplitude constant of the trace envelope at `t = 0`.
    pub g0: f64,

    /// Size of the perturbation budget entering the net rate.
    pub lambda1: f64,
    /// Prefactor converting trace envelopes into entropy perturbations.
    pub lambda2: f64,
    /// Net exponential rate for the unscreened entropy,
    /// `gamma = (mu0 - 30 lambda1 / (1 - delta)) / 2`.
    pub gamma: f64,

    /// Screened-regime trace/interpolation constant.
    pub c0p: f64,
    /// Screened-regime coercivity constant, `(2 chi + sqrt(alpha)) / (chi + sqrt(alpha))`.
    pub c1p: f64,
    /// Screened-regime exchange margin, `chi / (2 (1 + chi))`.
    pub c2p: f64,
    /// Screened-regime mixing weight, `min(1/2, c1p / (c0p + c2p))`.
    pub delta_alpha: f64,
    /// Screened-regime entropy decay rate, `delta_alpha c2p / (1 + delta_alpha)`.
    pub gamma_alpha: f64,

    /// Largest admissible peak-speed bound, `chi / (16 (1 + chi))`.
    pub p_max: f64,
    /// `delta` landed strictly inside `(0, 1)`.
    pub delta_in_range: bool,
    /// The leading margin `mu0` is positive (decay certified before the
    /// trace-envelope perturbation is charged).
    pub mu0_positive: bool,
    /// The net rate `gamma` is positive (full decay chain certified).
    pub gamma_positive: bool,
    /// `p < p_max`, the side condition for the trace-envelope closure.
    pub p_admissible: bool,
}

impl ConstantSet {
    /// Envelope bounding the origin traces along a run:
    /// `g(t) = 2 (1 + 2 chi) c e^{-r t} + (8 p chi^2 / r) (1 - e^{-r t})`.
    ///
    /// Starts at `2 (1 + 2 chi) c` and relaxes monotonically to
    /// `8 p chi^2 / r`.
    pub fn trace_envelope(&self, t: f64) -> f64 {
        let decay = (-self.r * t).exp();
        2.0 * (1.0 + 2.0 * self.chi) * self.c * decay
            + (8.0 * self.p * self.chi * self.chi / self.r) * (1.0 - decay)
    }
}

/// Evaluates every constant of the decay analysis at the given parameters.
///
/// `p` is the assumed uniform bound on the peak speed and `c` the assumed
/// initial perturbation size; both enter only the budget constants, not the
/// operator-level ones.  Side conditions are reported as flags, never as
/// errors — a negative `gamma` is a meaningful result (the closed-form
/// budget fails to certify decay at these parameters) and the caller may
/// still measure the actual rate from a trajectory.
pub fn theory_constants(params: &ModelParams, p: f64, c: f64) -> ConstantSet {
    assert!((0.0..1.0).contains(&p), "peak-speed bound p must lie in [0,1)");
    assert!(c >= 0.0, "initial perturbation size c must be nonnegative");
    let chi = params.chi;
    let alpha = params.alpha;
    let sqrt_alpha = params.sqrt_alpha();
    let lambda = params.lambda;

    let mu = 4.0 * chi * (2.0 * (chi + sqrt_alpha)).sqrt() / lambda;

    // Interpolation constants.  c0 switches branch where the quadratic
    // weight in its optimization changes sign, at chi^2 = 1/2.
    let c0 = if chi * chi <= 0.5 {
        4.0 * chi.sqrt()
    } else {
        8.0 * chi * chi * chi.sqrt() / ((2.0 * chi - 1.0) * (2.0 * chi + 1.0)).sqrt()
    };
    let c1 = 4.0 * chi.sqrt() * (1.0 + 2.0 * chi);
    let c2 = 1.0 + 4.0 * chi * chi;
    let c3 = 4.0 * chi * chi;

    // Mixing weight: delta = 2 / (A + B) with A the sum of the bounded
    // couplings (Young splittings both taken with beta = (1+chi)/chi) and
    // B the coercive margin less the peak-speed penalty.
    let beta = (1.0 + chi) / chi;
    let a_sum = 1.0 + c0 / (2.0 * (2.0 * chi).sqrt()) + c1 / (2.0 * chi).sqrt() + beta;
    let b_margin = chi / (2.0 * (1.0 + chi)) - p * c3 / (chi * chi);
    let delta = 2.0 / (a_sum + b_margin);
    let eta_gap = delta * b_margin;
    let mu0 = (2.0 / (1.0 - delta))
        * (eta_gap - p * (chi + delta * (1.0 + 4.0 * chi) / (2.0 * beta) + delta * c2));

    // Trace-envelope parameters and the perturbation budget.
    let r = 1.0 + 2.0 * chi * (1.0 - p);
    let g0 = (4.0 * (1.0 + p) / (r * (1.0 - p) * (1.0 - p))).sqrt();
    let lambda1 = 2.0 * (1.0 + 2.0 * chi) * c + 4.0 * p * chi / (1.0 - p) + 8.0 * p * chi * chi;
    let lambda2 = 6.0 * (2.0 * chi).sqrt() / ((1.0 - delta).sqrt() * (1.0 - p))
        * (1.0 + (1.0 + 2.0 * chi) / (2.0 * chi) * (1.0 + 4.0 * chi).sqrt());
    let gamma = (mu0 - 30.0 / (1.0 - delta) * lambda1) / 2.0;

    // Screened-regime chain.  Defined for alpha = 0 too (it degenerates to
    // a valid but unused set); operative only when alpha > 0.
    let c0p = 1.0
        + (1.0 + chi) / (2.0 * chi)
        + c0 / (2.0 * (2.0 * chi + sqrt_alpha).sqrt())
        + lambda * (1.0 + 2.0 * chi) / ((2.0 * chi).sqrt() * (chi + sqrt_alpha).sqrt());
    let c1p = (2.0 * chi + sqrt_alpha) / (chi + sqrt_alpha);
    let c2p = chi / (2.0 * (1.0 + chi));
    let delta_alpha = (c1p / (c0p + c2p)).min(0.5);
    let gamma_alpha = delta_alpha * c2p / (1.0 + delta_alpha);

    let p_max = chi / (16.0 * (1.0 + chi));

    ConstantSet {
        chi,
        alpha,
        p,
        c,
        mu,
        c0,
        c1,
        c2,
        c3,
        delta,
        eta_gap,
        mu0,
        r,
        g0,
        lambda1,
        lambda2,
        gamma,
        c0p,
        c1p,
        c2p,
        delta_alpha,
        gamma_alpha,
        p_max,
        delta_in_range: delta > 0.0 && delta < 1.0,
        mu0_positive: mu0 > 0.0,
        gamma_positive: gamma > 0.0,
        p_admissible: p < p_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn displayed_examples_hold_exactly() {
        // chi = 1/2, alpha = 0: mu = 4*(1/2)*sqrt(2*(1/2))/1 = 2 exactly
        // in floating point (every intermediate is representable).
        let set = theory_constants(&ModelParams::new(0.5, 0.0).unwrap(), 0.01, 0.05);
        assert_eq!(set.mu, 2.0);
        // chi^2 <= 1/2 branch: c0 = 4 sqrt(chi).
        assert_eq!(set.c0, 4.0 * 0.5f64.sqrt());
        // c2p = 0.5 / (2 * 1.5) = 1/6 bitwise (exact reals, correctly
        // rounded division).
        assert_eq!(set.c2p, 1.0 / 6.0);
        // gamma_alpha is literally delta_alpha/6 / (1 + delta_alpha).
        assert_eq!(
            set.gamma_alpha,
            set.delta_alpha * (1.0 / 6.0) / (1.0 + set.delta_alpha)
        );
    }

    #[test]
    fn unscreened_chain_matches_high_precision_reference() {
        // Reference values computed at 250-bit precision and rounded to
        // f64 (17 significant digits).
        let set = theory_constants(&ModelParams::new(0.5, 0.0).unwrap(), 0.01, 0.05);
        assert!(rel_close(set.c0, 2.828_427_124_746_190_1, 1e-15));
        assert!(rel_close(set.c1, 5.656_854_249_492_380_2, 1e-15));
        assert_eq!(set.c2, 2.0);
        assert_eq!(set.c3, 1.0);
        assert!(rel_close(set.delta, 0.178_607_557_076_328_4, 1e-14));
        assert!(rel_close(set.eta_gap, 0.022_623_623_896_334_931, 1e-14));
        assert!(rel_close(set.mu0, 0.032_039_337_792_274_957, 1e-13));
        assert_eq!(set.r, 1.99);
        assert!(rel_close(set.g0, 1.439_225_846_562_439_4, 1e-14));
        assert!(rel_close(set.lambda1, 0.240_202_020_202_020_2, 1e-14));
        assert!(rel_close(set.lambda2, 29.852_092_324_932_498, 2e-14));
        assert!(rel_close(set.gamma, -4.370_471_020_262_926_1, 2e-14));

        // At these desk-scale parameters the closed-form budget does NOT
        // certify decay: lambda1 is dominated by the initial size c and the
        // factor 30/(1-delta) swamps mu0.  The flags must say so while the
        // structural conditions still hold.
        assert!(set.delta_in_range);
        assert!(set.mu0_positive);
        assert!(!set.gamma_positive);
        assert!(set.p_admissible, "p = 0.01 < 0.5/24");
    }

    #[test]
    fn unscreened_chain_second_and_third_parameter_points() {
        // chi = 0.8 (c0 branch two), p = 0.02, c = 0.1: the perturbation
        // penalty overwhelms the margin, so even mu0 goes negative.
        let set = theory_constants(&ModelParams::new(0.8, 0.0).unwrap(), 0.02, 0.1);
        assert!(rel_close(set.c0, 3.666_508_155_081_896_3, 1e-14));
        assert!(rel_close(set.delta, 0.163_995_624_150_363_6, 1e-14));
        assert!(rel_close(set.mu0, -0.017_736_553_068_619_575, 1e-12));
        assert!(rel_close(set.g0, 1.286_194_049_915_031_5, 1e-14));
        assert!(rel_close(set.lambda2, 36.677_080_931_878_034, 2e-14));
        assert!(set.delta_in_range);
        assert!(!set.mu0_positive);
        assert!(!set.gamma_positive);
        assert!(set.p_admissible, "p = 0.02 < 0.8/28.8");

        // chi = 0.9, p = 0.01, c = 0.05: branch two again, mu0 positive.
        let set = theory_constants(&ModelParams::new(0.9, 0.0).unwrap(), 0.01, 0.05);
        assert!(rel_close(set.c0, 4.107_449_677_980_590_6, 1e-14));
        assert!(rel_close(set.mu0, 0.032_025_488_179_549_736, 1e-13));
        assert_eq!(set.r, 2.782);
        assert!(set.mu0_positive);
    }

    #[test]
    fn screened_chain_matches_high_precision_reference() {
        let set = theory_constants(&ModelParams::new(0.5, 0.25).unwrap(), 0.01, 0.05);
        // lambda = 2*0.5 + 0.5 = 1.5; mu = 2 sqrt(2) / 1.5.
        assert!(rel_close(set.mu, 1.885_618_083_164_126_7, 1e-15));
        assert!(rel_close(set.c0p, 6.654_700_538_379_251_5, 1e-14));
        assert_eq!(set.c1p, 1.5);
        assert_eq!(set.c2p, 1.0 / 6.0);
        assert!(rel_close(set.delta_alpha, 0.219_897_266_180_072_58, 1e-14));
        assert!(rel_close(set.gamma_alpha, 0.030_043_140_008_099_243, 1e-14));
        // The screened weight stayed below the 1/2 cap here; force the cap
        // with a tiny c0p by pushing alpha high enough that c1p grows:
        // c1p -> 1 as alpha -> inf, so the cap binds only for small c0p +
        // c2p, which cannot happen (c0p > 1).  The min is therefore the
        // ratio branch for every admissible parameter; assert that.
        assert!(set.delta_alpha < 0.5);
    }

    #[test]
    fn trace_envelope_endpoints_and_monotonicity() {
        let set = theory_constants(&ModelParams::new(0.5, 0.0).unwrap(), 0.01, 0.05);
        // g(0) = 2 (1 + 2 chi) c = 0.2 exactly.
        assert_eq!(set.trace_envelope(0.0), 0.2);
        // Reference value at t = 1 (250-bit evaluation).
        assert!(rel_close(set.trace_envelope(1.0), 0.036_015_512_974_074_381, 1e-14));
        // Long-time limit 8 p chi^2 / r.
        assert!(rel_close(set.trace_envelope(500.0), 0.010_050_251_256_281_407, 1e-13));
        // Monotone towards the limit when it starts above it.
        let mut last = set.trace_envelope(0.0);
        for k in 1..=20 {
            let now = set.trace_envelope(0.25 * k as f64);
            assert!(now < last, "envelope must decrease towards its limit");
            last = now;
        }
    }

    #[test]
    fn admissibility_flag_follows_threshold() {
        let params = ModelParams::new(0.5, 0.0).unwrap();
        // Threshold chi / (16 (1 + chi)) = 0.5 / 24.
        let below = theory_constants(&params, 0.02, 0.05);
        assert!(rel_close(below.p_max, 0.5 / 24.0, 1e-15));
        assert!(below.p_admissible);
        let above = theory_constants(&params, 0.021, 0.05);
        assert!(!above.p_admissible);
    }
}
