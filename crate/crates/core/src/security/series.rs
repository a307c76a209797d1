//! Photon-number series machinery behind the leakage bounds.
//!
//! Every bound in this module family reduces to sums of the form
//! Σ_j (Σ_n A_{2Mn+2j})² over nonnegative amplitude terms indexed by
//! even total photon number. Terms are stored at half-index i (for
//! total photon number 2i), so a stride of M in i corresponds to the
//! 2M stride in photon number.

use crate::channel::PhaseCount;
use crate::error::{Error, Result};

/// Amplitude terms plus a certified upper bound on everything that was
/// truncated away.
#[derive(Debug, Clone)]
pub(crate) struct SeriesTerms {
    /// `terms[i]` is the amplitude for total photon number 2i.
    pub terms: Vec<f64>,
    /// Upper bound on the sum of all discarded amplitudes.
    pub tail: f64,
}

/// Terms A_i = sqrt(P_{2i}(λ)·Y(2i)) for a single photon-number series
/// over total intensity λ, with yields supplied per photon number.
///
/// Truncation is certified: past the cutoff the square-root Poisson
/// terms shrink at least geometrically with ratio λ/(2i+1), and yields
/// never exceed 1, so the discarded amplitude sum is bounded and
/// reported in `tail`.
pub(crate) fn single_series_terms(
    lambda: f64,
    mut yield_at: impl FnMut(u32) -> f64,
    tol: f64,
) -> Result<SeriesTerms> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Domain(format!("series intensity {lambda} must be ≥ 0")));
    }
    let mut p = (-lambda).exp(); // P_{2i}(λ), starting at i = 0
    let mut terms = Vec::new();
    let mut i: u32 = 0;
    loop {
        terms.push((p * yield_at(2 * i).clamp(0.0, 1.0)).sqrt());
        p *= lambda * lambda / (f64::from(2 * i + 1) * f64::from(2 * i + 2));
        i += 1;
        let r = lambda / f64::from(2 * i + 1);
        if r < 1.0 {
            let tail = p.sqrt() / (1.0 - r);
            if tail < tol {
                return Ok(SeriesTerms { terms, tail });
            }
        }
        if i > 100_000 {
            return Err(Error::Domain(format!(
                "photon-number series for λ = {lambda} does not certify below {tol}"
            )));
        }
    }
}

/// Parity-split double-series terms for the two-arm decomposition:
/// for each even total t = 2i,
///
/// even[i] = Σ_{l+k=t, l,k even} sqrt(P_l(μ)·P_k(μ)·Y(l,k)),
/// odd[i]  = Σ_{l+k=t, l,k odd}  sqrt(P_l(μ)·P_k(μ)·Y(l,k)).
///
/// The shared `tail` bounds the discarded amplitude of either class:
/// by Cauchy–Schwarz the whole-total amplitude is at most
/// sqrt((t+1)·P_t(2μ)), which again decays geometrically.
#[derive(Debug, Clone)]
pub(crate) struct ParitySeries {
    pub even: Vec<f64>,
    pub odd: Vec<f64>,
    pub tail: f64,
}

pub(crate) fn parity_series_terms(
    mu: f64,
    mut yield_lk: impl FnMut(u32, u32) -> f64,
    tol: f64,
) -> Result<ParitySeries> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::Domain(format!("arm intensity {mu} must be ≥ 0")));
    }
    let lambda = 2.0 * mu;
    // Per-arm Poisson probabilities, extended on demand.
    let mut arm = vec![(-mu).exp()];
    let mut even = Vec::new();
    let mut odd = Vec::new();
    let mut p_total = (-lambda).exp(); // P_t(2μ) at t = 2i
    let mut i: u32 = 0;
    loop {
        let t = 2 * i;
        while arm.len() <= t as usize {
            let l = arm.len() as u32;
            let next = arm[l as usize - 1] * mu / f64::from(l);
            arm.push(next);
        }
        let mut even_sum = 0.0;
        let mut odd_sum = 0.0;
        for l in 0..=t {
            let k = t - l;
            let amp = (arm[l as usize] * arm[k as usize] * yield_lk(l, k).clamp(0.0, 1.0)).sqrt();
            if l % 2 == 0 {
                even_sum += amp;
            } else {
                odd_sum += amp;
            }
        }
        even.push(even_sum);
        odd.push(odd_sum);
        p_total *= lambda * lambda / (f64::from(t + 1) * f64::from(t + 2));
        i += 1;
        let t_next = f64::from(2 * i);
        // Ratio bound between consecutive even-total amplitudes.
        let r = (lambda * lambda * (t_next + 3.0) / ((t_next + 1.0) * (t_next + 1.0) * (t_next + 2.0)))
            .sqrt();
        if r < 1.0 {
            let tail = ((t_next + 1.0) * p_total).sqrt() / (1.0 - r);
            if tail < tol {
                return Ok(ParitySeries { even, odd, tail });
            }
        }
        if i > 100_000 {
            return Err(Error::Domain(format!(
                "two-arm photon series for μ = {mu} does not certify below {tol}"
            )));
        }
    }
}

/// Per-class decomposition of the two-arm amplitude series for the
/// finite-decoy bound: inside the LP window the square-root Poisson
/// weights stay symbolic (the yields under them are unknown), outside
/// it they collapse to constants at the worst-case yield 1.
#[derive(Debug, Clone)]
pub(crate) struct FiniteClassTerms {
    /// `weights[j][parity]` = flat w×w matrix of √(P_l·P_k) for
    /// windowed pairs of class j; parity 0 holds the both-even pairs,
    /// parity 1 both-odd.
    pub weights: Vec<[Vec<f64>; 2]>,
    /// Out-of-window amplitude constants per class and parity, with the
    /// certified truncation tail already folded in.
    pub constants: Vec<[f64; 2]>,
    /// Bound on the collective square of entirely truncated classes
    /// (nonzero only in the infinite-phase mode).
    pub truncated_square: f64,
}

pub(crate) fn finite_class_terms(
    mu: f64,
    m: PhaseCount,
    window: usize,
    tol: f64,
) -> Result<FiniteClassTerms> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::Domain(format!("arm intensity {mu} must be ≥ 0")));
    }
    let lambda = 2.0 * mu;
    let mut arm = vec![(-mu).exp()];
    // Per stored total: windowed weights and out-of-window constant.
    let mut per_total: Vec<([Vec<f64>; 2], [f64; 2])> = Vec::new();
    let mut p_total = (-lambda).exp();
    let mut i: u32 = 0;
    let tail = loop {
        let t = 2 * i;
        while arm.len() <= t as usize {
            let l = arm.len() as u32;
            let next = arm[l as usize - 1] * mu / f64::from(l);
            arm.push(next);
        }
        let mut weights = [vec![0.0; window * window], vec![0.0; window * window]];
        let mut consts = [0.0; 2];
        for l in 0..=t {
            let k = t - l;
            let amp = (arm[l as usize] * arm[k as usize]).sqrt();
            let parity = (l % 2) as usize;
            if (l as usize) < window && (k as usize) < window {
                weights[parity][l as usize * window + k as usize] = amp;
            } else {
                consts[parity] += amp; // worst-case yield 1
            }
        }
        per_total.push((weights, consts));
        p_total *= lambda * lambda / (f64::from(t + 1) * f64::from(t + 2));
        i += 1;
        let t_next = f64::from(2 * i);
        let r = (lambda * lambda * (t_next + 3.0)
            / ((t_next + 1.0) * (t_next + 1.0) * (t_next + 2.0)))
            .sqrt();
        if r < 1.0 {
            let tail = ((t_next + 1.0) * p_total).sqrt() / (1.0 - r);
            if tail < tol {
                break tail;
            }
        }
        if i > 100_000 {
            return Err(Error::Domain(format!(
                "two-arm photon series for μ = {mu} does not certify below {tol}"
            )));
        }
    };
    let n_totals = per_total.len();
    let (n_classes, truncated_square) = match m {
        PhaseCount::Infinite => (n_totals, tail * tail),
        PhaseCount::Finite(m_raw) => {
            let m = (m_raw as usize).max(1);
            // Classes beyond the stored totals hold nothing but tail.
            (m.min(n_totals), m.saturating_sub(n_totals) as f64 * tail * tail)
        }
    };
    let mut weights =
        vec![[vec![0.0; window * window], vec![0.0; window * window]]; n_classes];
    let mut constants = vec![[0.0; 2]; n_classes];
    for (idx, (w, c)) in per_total.iter().enumerate() {
        let class = match m {
            PhaseCount::Infinite => idx,
            PhaseCount::Finite(_) => idx % n_classes,
        };
        for parity in 0..2 {
            constants[class][parity] += c[parity];
            for (dst, src) in weights[class][parity].iter_mut().zip(&w[parity]) {
                *dst += src;
            }
        }
    }
    // Certified tail: in the finite mode each class may be missing an
    // arbitrary slice of the truncated totals, so grant every class the
    // whole tail; the infinite mode accounts for it via the collective
    // square above.
    if matches!(m, PhaseCount::Finite(_)) {
        for c in &mut constants {
            c[0] += tail;
            c[1] += tail;
        }
    }
    Ok(FiniteClassTerms {
        weights,
        constants,
        truncated_square,
    })
}

/// G(M) = Σ_{j=0}^{M−1} (Σ_n terms[M·n + j])² over the provided finite
/// support; the infinite-phase limit degenerates to Σ_i terms[i]².
pub fn gm_value(terms: &[f64], m: PhaseCount) -> f64 {
    match m {
        PhaseCount::Infinite => terms.iter().map(|a| a * a).sum(),
        PhaseCount::Finite(m) => {
            let m = m as usize;
            if m == 0 || m >= terms.len() {
                // Every class holds at most one term.
                return terms.iter().map(|a| a * a).sum();
            }
            let mut sums = vec![0.0f64; m];
            for (i, a) in terms.iter().enumerate() {
                sums[i % m] += a;
            }
            sums.iter().map(|s| s * s).sum()
        }
    }
}

/// Per-class squared sums (S_j + tail)² and their total, the certified
/// upper bound Σ_j X_j.
///
/// Finite M: each of the M classes gains the full tail before
/// squaring — an over-count that keeps the bound valid no matter how
/// the truncated indices distribute over classes. Infinite M: each
/// stored index is its own class and the truncated classes contribute
/// at most tail² in total.
pub(crate) fn class_squares(terms: &[f64], tail: f64, m: PhaseCount) -> (Vec<f64>, f64) {
    match m {
        PhaseCount::Infinite => {
            let squares: Vec<f64> = terms.iter().map(|a| a * a).collect();
            let sum = squares.iter().sum::<f64>() + tail * tail;
            (squares, sum)
        }
        PhaseCount::Finite(m_raw) => {
            let m = (m_raw as usize).max(1);
            let classes = m.min(terms.len().max(1));
            let mut sums = vec![0.0f64; classes];
            for (i, a) in terms.iter().enumerate() {
                sums[i % classes] += a;
            }
            // Classes beyond terms.len() (when m > number of stored
            // terms) hold no stored term; they still get the tail.
            let empty_classes = m - classes;
            let squares: Vec<f64> = sums.iter().map(|s| (s + tail).powi(2)).collect();
            let sum = squares.iter().sum::<f64>() + empty_classes as f64 * tail * tail;
            (squares, sum)
        }
    }
}
