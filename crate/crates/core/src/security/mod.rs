//! Upper bounds on the eavesdropper's Holevo information for both
//! protocols, under exact (infinite-decoy) and three-intensity yield
//! knowledge.
//!
//! The bounds share one skeleton: per residue class j of the photon
//! number mod 2M, an amplitude series is summed and squared into a
//! class term X_j; the information leakage is the binary entropy of
//! Σ_j X_j / Q, with the sum capped at Q/2 (the entropy argument can
//! never usefully exceed one half).

mod lp;
mod series;

pub use lp::{
    max_sqrt_combination, observe_gains_honest, yield_bounds_from_constraints, yield_bounds_lp,
    GainObservations, YieldBounds, YIELD_WINDOW,
};
pub use series::gm_value;

use crate::channel::{
    yield_correct_at, yield_error_at, yield_total_at, ExperimentParams, PhaseCount,
};
use crate::error::{Error, Result};
use crate::math::binary_entropy;
use lp::window_gain_bounds;
use series::{class_squares, finite_class_terms, parity_series_terms, single_series_terms};

/// Slack above 1 at which a computed class-term sum is reported as
/// inconsistent with any probability bookkeeping.
const UNIT_SLACK: f64 = 1e-9;

/// Yield window used inside the finite-decoy leakage bound. Wider than
/// the reported [`YIELD_WINDOW`] so that bright decoy pairs keep almost
/// no probability mass outside the constrained block — the unexplained
/// out-of-window gain otherwise inflates every yield estimate.
pub const FINITE_DECOY_WINDOW: usize = 10;

/// Result of a merged leakage bound: the class terms actually used
/// (rescaled if the Q/2 cap was active), their sum, and the entropy.
#[derive(Debug, Clone)]
pub struct LeakageBound {
    /// Upper bound on the Holevo information, in bits.
    pub i_ae: f64,
    /// Per-class X values after clamping; they sum to `x_sum`.
    pub x_terms: Vec<f64>,
    /// min(Σ_j X_j, Q/2).
    pub x_sum: f64,
    /// Whether the Σ_j X_j ≤ Q/2 cap was active.
    pub clamped_at_half_q: bool,
}

fn check_rate(q: f64) -> Result<()> {
    if !q.is_finite() || q <= 0.0 || q > 1.0 {
        return Err(Error::DegenerateInput(format!(
            "counting rate Q = {q} must lie in (0, 1]"
        )));
    }
    Ok(())
}

fn check_eta(eta: f64) -> Result<()> {
    if !eta.is_finite() || !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("transmittance {eta} must be in [0, 1]")));
    }
    Ok(())
}

fn assemble_leakage(mut x_terms: Vec<f64>, q: f64) -> Result<LeakageBound> {
    check_rate(q)?;
    let raw: f64 = x_terms.iter().sum();
    if raw > 1.0 + UNIT_SLACK {
        return Err(Error::Inconsistent(format!(
            "class-term sum {raw} exceeds unit probability; Q inconsistent with yields"
        )));
    }
    let cap = q / 2.0;
    let clamped = raw > cap;
    let x_sum = if clamped {
        let scale = cap / raw;
        for x in &mut x_terms {
            *x *= scale;
        }
        cap
    } else {
        raw
    };
    let i_ae = binary_entropy(x_sum / q)?;
    Ok(LeakageBound {
        i_ae,
        x_terms,
        x_sum,
        clamped_at_half_q: clamped,
    })
}

/// Leakage bound for the phase post-selecting protocol with exact
/// yields: X_j ≤ (Σ_n sqrt(P_{2Mn+2j}·Y_{2Mn+2j}))² with P over the
/// total code-mode intensity 2μ, then I_AE = H(min(ΣX, Q/2)/Q).
pub fn iae_protocol1_infinite(
    params: &ExperimentParams,
    eta: f64,
    q: f64,
    series_tol: f64,
) -> Result<LeakageBound> {
    params.validate()?;
    check_eta(eta)?;
    let d = params.dark_count;
    let lambda = 2.0 * params.signal_intensity;
    let terms = single_series_terms(lambda, |n| yield_total_at(eta, d, n), series_tol)?;
    let (squares, _) = class_squares(&terms.terms, terms.tail, params.num_phases);
    assemble_leakage(squares, q)
}

/// Leakage bound that keeps the announced-correct/announced-wrong
/// yield split the post-selected test mode resolves, instead of
/// merging the two series into one.
///
/// With Gc = Σ_j (Σ_n sqrt(P·Y^c))² and Ge likewise over Y^e, and e the
/// code-mode error rate,
///
/// I_AE ≤ (1−e)·H(min(Gc/((1−e)Q), 1/2)) + e·H(min(Ge/(eQ), 1/2)).
///
/// Each argument is capped at one half, where the entropy peaks, so the
/// expression upper-bounds every feasible split. This is never looser
/// than [`iae_protocol1_infinite`]; the merged form pays an extra
/// averaging step plus a Cauchy–Schwarz merge.
#[derive(Debug, Clone)]
pub struct RefinedLeakage {
    pub i_ae: f64,
    /// Σ_j of the correct-arm class terms.
    pub x_correct_sum: f64,
    /// Σ_j of the error-arm class terms.
    pub x_error_sum: f64,
    pub correct_clamped: bool,
    pub error_clamped: bool,
}

pub fn iae_protocol1_refined(
    params: &ExperimentParams,
    eta: f64,
    q: f64,
    error_rate: f64,
    series_tol: f64,
) -> Result<RefinedLeakage> {
    params.validate()?;
    check_eta(eta)?;
    check_rate(q)?;
    if !error_rate.is_finite() || !(0.0..=1.0).contains(&error_rate) {
        return Err(Error::Domain(format!(
            "error rate {error_rate} must be in [0, 1]"
        )));
    }
    let d = params.dark_count;
    let e_mis = params.misalignment;
    let lambda = 2.0 * params.signal_intensity;
    let m = params.num_phases;
    let correct = single_series_terms(lambda, |n| yield_correct_at(eta, d, e_mis, n), series_tol)?;
    let error = single_series_terms(lambda, |n| yield_error_at(eta, d, e_mis, n), series_tol)?;
    let (_, gc) = class_squares(&correct.terms, correct.tail, m);
    let (_, ge) = class_squares(&error.terms, error.tail, m);
    if gc + ge > 1.0 + UNIT_SLACK {
        return Err(Error::Inconsistent(format!(
            "class-term sum {} exceeds unit probability; Q inconsistent with yields",
            gc + ge
        )));
    }
    let e = error_rate;
    let mut i_ae = 0.0;
    let mut correct_clamped = false;
    let mut error_clamped = false;
    if e < 1.0 {
        let arg = gc / ((1.0 - e) * q);
        correct_clamped = arg > 0.5;
        i_ae += (1.0 - e) * binary_entropy(arg.min(0.5))?;
    }
    if e > 0.0 {
        let arg = ge / (e * q);
        error_clamped = arg > 0.5;
        i_ae += e * binary_entropy(arg.min(0.5))?;
    }
    Ok(RefinedLeakage {
        i_ae,
        x_correct_sum: gc,
        x_error_sum: ge,
        correct_clamped,
        error_clamped,
    })
}

/// Leakage bound for the protocol without test-mode post-selection,
/// exact yields: each class term splits into the two same-parity
/// two-arm sums,
///
/// X_j ≤ (Σ_n Σ_{l,k even} sqrt(P_{l,k}·Y_{l,k}))²
///     + (Σ_n Σ_{l,k odd} sqrt(P_{l,k}·Y_{l,k}))²,
///
/// with P_{l,k} at the per-arm signal intensity on both arms and sums
/// over l+k = 2Mn+2j.
pub fn iae_protocol2_infinite(
    params: &ExperimentParams,
    eta: f64,
    q: f64,
    series_tol: f64,
) -> Result<LeakageBound> {
    params.validate()?;
    check_eta(eta)?;
    let d = params.dark_count;
    let mu = params.signal_intensity;
    let parity = parity_series_terms(mu, |l, k| yield_total_at(eta, d, l + k), series_tol)?;
    let squares = parity_class_squares(&parity.even, &parity.odd, parity.tail, params.num_phases);
    assemble_leakage(squares, q)
}

fn parity_class_squares(
    even: &[f64],
    odd: &[f64],
    tail: f64,
    m: PhaseCount,
) -> Vec<f64> {
    let (ev_sq, ev_sum) = class_squares(even, tail, m);
    let (od_sq, od_sum) = class_squares(odd, tail, m);
    debug_assert_eq!(ev_sq.len(), od_sq.len());
    let mut squares: Vec<f64> = ev_sq.iter().zip(&od_sq).map(|(a, b)| a + b).collect();
    // class_squares may fold truncated-class mass into the sum alone;
    // keep the reported terms consistent with the certified total.
    let listed: f64 = squares.iter().sum();
    let missing = (ev_sum + od_sum) - listed;
    if missing > 0.0 {
        if let Some(last) = squares.last_mut() {
            *last += missing;
        }
    }
    squares
}

/// Leakage bound for the no-post-selection protocol when only the
/// three-intensity gain observations are available.
///
/// Each class amplitude sum Σ √(P_{l,k}·Y_{l,k}) is concave in the
/// unknown yields, so its exact maximum over the gain polytope — a
/// certified upper bound because the true yields are feasible — is
/// computed per class and parity by [`max_sqrt_combination`]. Pairs the
/// series touches outside the LP window carry worst-case yield 1 and
/// enter as constants.
/// Two-stage certified bound on Σ_c S_c² over the gain polytope, where
/// the class sums S_c are concave in the yields and supported on
/// disjoint photon pairs.
///
/// Stage one maximizes each S_c alone, giving chord caps
/// S_c ≤ S̄_c. Stage two applies the chord overestimate of the square,
/// S_c² ≤ S̄_c·S_c (valid on [0, S̄_c]), and maximizes the single
/// concave combination Σ_c S̄_c·S_c(Y) jointly — so classes competing
/// for the same gain budget can no longer all peak at once.
pub fn iae_protocol2_finite(
    gains: &GainObservations,
    intensities: &[f64; 3],
    signal_intensity: f64,
    m: PhaseCount,
    q: f64,
    series_tol: f64,
) -> Result<LeakageBound> {
    let w = FINITE_DECOY_WINDOW;
    let (lo, hi) = window_gain_bounds(gains, intensities, w)?;
    let classes = finite_class_terms(signal_intensity, m, w, series_tol)?;
    let n_classes = classes.weights.len();
    let mut s_max = vec![[0.0f64; 2]; n_classes];
    let mut per_class_squares = Vec::with_capacity(n_classes);
    for (c, (weights, constants)) in classes.weights.iter().zip(&classes.constants).enumerate() {
        let mut x = 0.0;
        for parity in 0..2 {
            let s = max_sqrt_combination(intensities, &lo, &hi, &weights[parity], w)?
                + constants[parity];
            s_max[c][parity] = s;
            x += s * s;
        }
        per_class_squares.push(x);
    }
    let stage_one: f64 = per_class_squares.iter().sum();
    // Chord-combined weights: each windowed pair belongs to exactly one
    // class and parity, so the joint objective is again a single
    // weighted square-root sum.
    let mut joint = vec![0.0f64; w * w];
    let mut joint_const = 0.0;
    for (c, (weights, constants)) in classes.weights.iter().zip(&classes.constants).enumerate() {
        for parity in 0..2 {
            for (dst, src) in joint.iter_mut().zip(&weights[parity]) {
                *dst += s_max[c][parity] * src;
            }
            joint_const += s_max[c][parity] * constants[parity];
        }
    }
    let stage_two = max_sqrt_combination(intensities, &lo, &hi, &joint, w)? + joint_const;
    let x_bound = stage_one.min(stage_two) + classes.truncated_square;
    // Attribute the tightened total proportionally so the reported
    // class terms still sum to the bound.
    let scale = if stage_one > 0.0 {
        (x_bound - classes.truncated_square) / stage_one
    } else {
        0.0
    };
    let mut x_terms: Vec<f64> = per_class_squares.iter().map(|x| x * scale).collect();
    if classes.truncated_square > 0.0 {
        x_terms.push(classes.truncated_square);
    }
    assemble_leakage(x_terms, q)
}

/// Verifies the square-root split inequality on concrete data:
/// (Σ sqrt(P·Yc))² + (Σ sqrt(P·Ye))² ≤ (Σ sqrt(P·(Yc+Ye)))².
pub fn cauchy_reduction_check(y_correct: &[f64], y_error: &[f64], probs: &[f64]) -> Result<bool> {
    if y_correct.len() != y_error.len() || y_correct.len() != probs.len() {
        return Err(Error::InvalidParams(format!(
            "length mismatch: {} / {} / {}",
            y_correct.len(),
            y_error.len(),
            probs.len()
        )));
    }
    let mut sum_c = 0.0;
    let mut sum_e = 0.0;
    let mut sum_t = 0.0;
    for ((&yc, &ye), &p) in y_correct.iter().zip(y_error).zip(probs) {
        if yc < 0.0 || ye < 0.0 || p < 0.0 {
            return Ok(false);
        }
        sum_c += (p * yc).sqrt();
        sum_e += (p * ye).sqrt();
        sum_t += (p * (yc + ye)).sqrt();
    }
    let lhs = sum_c * sum_c + sum_e * sum_e;
    let rhs = sum_t * sum_t;
    Ok(lhs <= rhs + 1e-12 * rhs.max(1.0))
}
