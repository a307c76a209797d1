//! Scalar primitives shared by every other module: binary entropy,
//! Poisson photon-number distributions and controlled truncation of
//! infinite photon-number series.

use crate::error::{Error, Result};

/// Default tolerance for truncating photon-number series. Key rates of
/// interest near maximal loss are ≥ 1e-12 per trial, so series error
/// must sit well below that.
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-10;

/// Slack accepted on probability arguments before a domain error.
pub const PROB_SLACK: f64 = 1e-12;

/// Exact factorials n! for n ≤ 20 (largest that fits f64 exactly enough
/// for direct division).
const FACTORIALS: [f64; 21] = [
    1.0,
    1.0,
    2.0,
    6.0,
    24.0,
    120.0,
    720.0,
    5040.0,
    40320.0,
    362880.0,
    3628800.0,
    39916800.0,
    479001600.0,
    6227020800.0,
    87178291200.0,
    1307674368000.0,
    20922789888000.0,
    355687428096000.0,
    6402373705728000.0,
    121645100408832000.0,
    2432902008176640000.0,
];

/// Binary Shannon entropy in bits, with the convention 0·log2(0) = 0.
///
/// Accepts arguments within [`PROB_SLACK`] of the unit interval and
/// clamps them; anything further out is a domain error.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !x.is_finite() || x < -PROB_SLACK || x > 1.0 + PROB_SLACK {
        return Err(Error::Domain(format!(
            "binary_entropy argument {x} outside [0, 1]"
        )));
    }
    let x = x.clamp(0.0, 1.0);
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-(x * x.ln() + (1.0 - x) * (1.0 - x).ln()) / std::f64::consts::LN_2)
}

fn ln_factorial(n: u32) -> f64 {
    if n <= 20 {
        FACTORIALS[n as usize].ln()
    } else {
        // Cumulative sum is accurate to ~1e-13 relative for n ≤ 10^4,
        // well inside what the series tolerances require.
        FACTORIALS[20].ln() + (21..=n).map(|k| f64::from(k).ln()).sum::<f64>()
    }
}

/// Poisson probability e^{−mu}·mu^n/n!.
///
/// Computed directly for n ≤ 20 and in log space beyond, so large n
/// cannot overflow a naive factorial.
pub fn poisson_pn(mu: f64, n: u32) -> Result<f64> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::Domain(format!("poisson mean {mu} must be ≥ 0")));
    }
    if mu == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    if n <= 20 {
        Ok((-mu).exp() * mu.powi(n as i32) / FACTORIALS[n as usize])
    } else {
        Ok((-mu + f64::from(n) * mu.ln() - ln_factorial(n)).exp())
    }
}

/// Certified bound on the Poisson tail Σ_{n > n_max} P_n via the term
/// ratio: past the mode the terms shrink at least geometrically with
/// ratio mu/(n_max+2).
fn poisson_tail_bound(mu: f64, p_next: f64, n_max: u32) -> f64 {
    let r = mu / f64::from(n_max + 2);
    if r < 1.0 {
        p_next / (1.0 - r)
    } else {
        f64::INFINITY
    }
}

/// Smallest cutoff `n_max` whose certified Poisson tail bound is below
/// `tol`. Never truncates silently: the returned cutoff comes with a
/// ratio-bound certificate, so the true tail is < tol as well.
pub fn truncation_cutoff(mu: f64, tol: f64) -> Result<u32> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::Domain(format!("poisson mean {mu} must be ≥ 0")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be in (0, 1)")));
    }
    if mu == 0.0 {
        return Ok(0);
    }
    let mut p = (-mu).exp(); // P_0
    let mut n = 0u32;
    loop {
        let p_next = p * mu / f64::from(n + 1);
        if poisson_tail_bound(mu, p_next, n) < tol {
            return Ok(n);
        }
        p = p_next;
        n += 1;
        if n > 100_000 {
            return Err(Error::Domain(format!(
                "no truncation cutoff below n = {n} for mu = {mu}, tol = {tol}"
            )));
        }
    }
}

/// A truncated Poisson photon-number distribution with a certified
/// bound on the discarded tail. Immutable after construction.
#[derive(Debug, Clone)]
pub struct PhotonDistribution {
    intensity: f64,
    probs: Vec<f64>,
    tail_bound: f64,
}

impl PhotonDistribution {
    /// Builds P_0..P_nmax for mean photon number `intensity`, cutting
    /// the series once the certified tail drops below `tol`.
    pub fn new(intensity: f64, tol: f64) -> Result<Self> {
        let n_max = truncation_cutoff(intensity, tol)?;
        let mut probs = Vec::with_capacity(n_max as usize + 1);
        if intensity == 0.0 {
            probs.push(1.0);
            return Ok(Self {
                intensity,
                probs,
                tail_bound: 0.0,
            });
        }
        let mut p = (-intensity).exp();
        probs.push(p);
        for n in 1..=n_max {
            p *= intensity / f64::from(n);
            probs.push(p);
        }
        let p_next = p * intensity / f64::from(n_max + 1);
        let tail_bound = poisson_tail_bound(intensity, p_next, n_max);
        Ok(Self {
            intensity,
            probs,
            tail_bound,
        })
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn n_max(&self) -> u32 {
        (self.probs.len() - 1) as u32
    }

    /// P_n, zero beyond the stored cutoff (the discarded mass is
    /// accounted for by [`tail_bound`](Self::tail_bound)).
    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }
}

/// Joint two-arm probability P_{l,k}: the arms carry independent
/// phase-randomized coherent states, so the joint photon statistics
/// factor into per-arm Poisson terms.
pub fn joint_prob(arm_a: &PhotonDistribution, arm_b: &PhotonDistribution, l: usize, k: usize) -> f64 {
    arm_a.prob(l) * arm_b.prob(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn entropy_symmetric_maximum() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
    }

    #[test]
    fn entropy_degenerate_endpoints() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
    }

    #[test]
    fn entropy_quarter_point() {
        // Closed form: H(1/4) = 2 − (3/4)·log2(3).
        let expected = 2.0 - 0.75 * 3.0f64.log2();
        assert!((binary_entropy(0.25).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.811_278_124_459_132_8).abs() < 1e-15);
    }

    #[test]
    fn entropy_domain_error() {
        assert!(binary_entropy(-0.01).is_err());
        assert!(binary_entropy(1.01).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
        // Inside the slack: clamped, not an error.
        assert_eq!(binary_entropy(-1e-13).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0 + 1e-13).unwrap(), 0.0);
    }

    #[test]
    fn poisson_vacuum() {
        assert_eq!(poisson_pn(0.0, 0).unwrap(), 1.0);
        assert_eq!(poisson_pn(0.0, 3).unwrap(), 0.0);
    }

    #[test]
    fn poisson_closed_form_point() {
        // e^{−0.4}·0.4²/2
        let expected = (-0.4f64).exp() * 0.16 / 2.0;
        let got = poisson_pn(0.4, 2).unwrap();
        assert!((got - expected).abs() < 1e-16);
        assert!((got - 0.053_625_603_682_851_16).abs() < 1e-15);
    }

    #[test]
    fn poisson_log_space_matches_direct_recurrence() {
        // Oracle: recurrence P_{n+1} = P_n·mu/(n+1) from P_0, which never
        // touches factorials.
        for &mu in &[0.3, 1.7, 4.9] {
            let mut p = (-mu as f64).exp();
            for n in 0..60u32 {
                let got = poisson_pn(mu, n).unwrap();
                assert!(
                    (got - p).abs() <= 1e-12 * p.max(1e-300),
                    "mu={mu} n={n} got={got} want={p}"
                );
                p *= mu / f64::from(n + 1);
            }
        }
    }

    #[test]
    fn poisson_rejects_negative_mean() {
        assert!(poisson_pn(-0.1, 0).is_err());
    }

    #[test]
    fn cutoff_vacuum() {
        assert_eq!(truncation_cutoff(0.0, 1e-10).unwrap(), 0);
    }

    #[test]
    fn cutoff_tail_verified_by_long_summation() {
        let mu = 0.5;
        let n_max = truncation_cutoff(mu, 1e-10).unwrap();
        // Oracle: sum the exact series 50 terms past the cutoff; the
        // remainder beyond that is far below 1e-20 at this intensity.
        let mut p = (-mu).exp();
        let mut head = 0.0;
        for n in 0..=(n_max + 50) {
            if n <= n_max {
                head += p;
            }
            p *= mu / f64::from(n + 1);
        }
        let tail = 1.0 - head;
        assert!(tail < 1e-10, "true tail {tail} not under tolerance");
    }

    #[test]
    fn cutoff_monotone_in_tolerance() {
        for &mu in &[0.05, 0.5, 2.0, 5.0] {
            let loose = truncation_cutoff(mu, 1e-6).unwrap();
            let tight = truncation_cutoff(mu, 1e-12).unwrap();
            assert!(tight >= loose);
        }
    }

    #[test]
    fn distribution_mass_closes_to_one() {
        // Grid over mu ∈ [0, 5]: head + certified tail must reproduce
        // total mass 1 within 1e-10.
        for i in 0..=25 {
            let mu = 0.2 * f64::from(i);
            let dist = PhotonDistribution::new(mu, 1e-12).unwrap();
            let head: f64 = dist.probs().iter().sum();
            assert!(
                (head + dist.tail_bound() - 1.0).abs() < 1e-10,
                "mu={mu}: head {head} + tail {} misses 1",
                dist.tail_bound()
            );
            assert!(dist.probs().iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn distribution_matches_pointwise_pmf() {
        let dist = PhotonDistribution::new(1.3, 1e-12).unwrap();
        for n in 0..=dist.n_max() {
            let want = poisson_pn(1.3, n).unwrap();
            let got = dist.prob(n as usize);
            assert!((got - want).abs() <= 1e-12 * want.max(1e-300));
        }
        assert_eq!(dist.prob(dist.probs().len()), 0.0);
    }

    #[test]
    fn joint_prob_is_product() {
        let a = PhotonDistribution::new(0.2, 1e-12).unwrap();
        let b = PhotonDistribution::new(0.7, 1e-12).unwrap();
        let got = joint_prob(&a, &b, 1, 2);
        let want = poisson_pn(0.2, 1).unwrap() * poisson_pn(0.7, 2).unwrap();
        assert!((got - want).abs() <= 1e-12 * want);
    }

    proptest! {
        #[test]
        fn entropy_concave(x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
            let mid = binary_entropy(0.5 * (x + y)).unwrap();
            let avg = 0.5 * (binary_entropy(x).unwrap() + binary_entropy(y).unwrap());
            prop_assert!(mid >= avg - 1e-12);
        }

        #[test]
        fn entropy_monotone_on_half_intervals(a in 0.0f64..=0.5, b in 0.0f64..=0.5) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(binary_entropy(lo).unwrap() <= binary_entropy(hi).unwrap() + 1e-12);
            // Mirror: decreasing on [1/2, 1].
            prop_assert!(
                binary_entropy(1.0 - lo).unwrap() <= binary_entropy(1.0 - hi).unwrap() + 1e-12
            );
        }

        #[test]
        fn poisson_probabilities_in_unit_interval(mu in 0.0f64..8.0, n in 0u32..80) {
            let p = poisson_pn(mu, n).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
