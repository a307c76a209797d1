//! Honest channel and detector model: counting rates, error rates and
//! photon-number yields under loss, dark counts and misalignment, plus
//! the mapping from plotted channel loss in dB to the transmittance
//! parameter η used throughout.

use crate::error::{Error, Result};

/// Number of discrete global phases, or the analytic infinite-phase
/// limit (handled as a distinct mode, never as a large finite M).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseCount {
    Finite(u32),
    Infinite,
}

impl std::fmt::Display for PhaseCount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PhaseCount::Finite(m) => write!(f, "{m}"),
            PhaseCount::Infinite => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for PhaseCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(PhaseCount::Infinite),
            other => other
                .parse::<u32>()
                .ok()
                .filter(|&m| m >= 1)
                .map(PhaseCount::Finite)
                .ok_or_else(|| Error::InvalidParams(format!("phase count '{s}' (want ≥ 1 or 'inf')"))),
        }
    }
}

/// How the plotted channel loss (dB) maps to the per-arm transmittance
/// η entering the gain and yield formulas.
///
/// The protocol curves never state the convention, so both readings are
/// available:
///
/// - [`Total`](EtaMapping::Total): the whole dB figure attenuates one
///   transmittance, η = η_d·10^(−L/10).
/// - [`PerArm`](EtaMapping::PerArm): the dB figure is the end-to-end
///   loss of the symmetric link, so each arm to the middle node carries
///   half of it, η = η_d·10^(−L/20).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaMapping {
    Total,
    PerArm,
}

impl std::fmt::Display for EtaMapping {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EtaMapping::Total => "total",
            EtaMapping::PerArm => "per-arm",
        })
    }
}

impl std::str::FromStr for EtaMapping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "total" => Ok(EtaMapping::Total),
            "per-arm" | "perarm" | "per_arm" => Ok(EtaMapping::PerArm),
            other => Err(Error::InvalidParams(format!(
                "eta mapping '{other}' (want 'total' or 'per-arm')"
            ))),
        }
    }
}

impl EtaMapping {
    /// Transmittance for a given plotted loss and detector efficiency.
    pub fn eta(self, loss_db: f64, eta_d: f64) -> Result<f64> {
        check_loss_args(loss_db, eta_d)?;
        let exponent = match self {
            EtaMapping::Total => -loss_db / 10.0,
            EtaMapping::PerArm => -loss_db / 20.0,
        };
        Ok(eta_d * 10f64.powf(exponent))
    }
}

fn check_loss_args(loss_db: f64, eta_d: f64) -> Result<()> {
    if !loss_db.is_finite() || loss_db < 0.0 {
        return Err(Error::Domain(format!("channel loss {loss_db} dB must be ≥ 0")));
    }
    if !eta_d.is_finite() || eta_d <= 0.0 || eta_d > 1.0 {
        return Err(Error::Domain(format!(
            "detector efficiency {eta_d} must be in (0, 1]"
        )));
    }
    Ok(())
}

/// Default mapping from channel loss in dB to transmittance:
/// η = η_d·10^(−loss_db/10). See [`EtaMapping`] for the alternative.
pub fn loss_db_to_eta(loss_db: f64, eta_d: f64) -> Result<f64> {
    EtaMapping::Total.eta(loss_db, eta_d)
}

/// All physical and protocol parameters of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentParams {
    /// Dark count probability per trial per detector.
    pub dark_count: f64,
    /// Error correction (in)efficiency f ≥ 1.
    pub error_corr_eff: f64,
    /// Detector efficiency η_d.
    pub detector_eff: f64,
    /// Optical misalignment probability.
    pub misalignment: f64,
    /// Number of discrete global phases M.
    pub num_phases: PhaseCount,
    /// Signal (code-mode) intensity per arm.
    pub signal_intensity: f64,
    /// Decoy intensities {μ1, μ2, μ3}, strictly decreasing; the signal
    /// intensity is chosen from this set in the three-intensity mode.
    pub decoy_intensities: [f64; 3],
}

impl Default for ExperimentParams {
    /// Reference parameter set: d = 8e-8, f = 1.15, η_d = 14.5 %,
    /// e_mis = 1.5 %, M = 2, signal 0.1 with decoys {0.1, 0.01, 1e-4}.
    fn default() -> Self {
        Self {
            dark_count: 8e-8,
            error_corr_eff: 1.15,
            detector_eff: 0.145,
            misalignment: 0.015,
            num_phases: PhaseCount::Finite(2),
            signal_intensity: 0.1,
            decoy_intensities: [0.1, 0.01, 1e-4],
        }
    }
}

impl ExperimentParams {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| -> Result<()> {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                Err(Error::InvalidParams(format!("{name} = {v} must be in [0, 1]")))
            } else {
                Ok(())
            }
        };
        prob("dark_count", self.dark_count)?;
        prob("misalignment", self.misalignment)?;
        prob("detector_eff", self.detector_eff)?;
        if self.detector_eff <= 0.0 {
            return Err(Error::InvalidParams("detector_eff must be > 0".into()));
        }
        if !self.error_corr_eff.is_finite() || self.error_corr_eff < 1.0 {
            return Err(Error::InvalidParams(format!(
                "error_corr_eff = {} must be ≥ 1",
                self.error_corr_eff
            )));
        }
        if let PhaseCount::Finite(m) = self.num_phases {
            if m < 1 {
                return Err(Error::InvalidParams("num_phases must be ≥ 1".into()));
            }
        }
        if !self.signal_intensity.is_finite() || self.signal_intensity < 0.0 {
            return Err(Error::InvalidParams(format!(
                "signal_intensity = {} must be ≥ 0",
                self.signal_intensity
            )));
        }
        for mu in self.decoy_intensities {
            if !mu.is_finite() || mu < 0.0 {
                return Err(Error::InvalidParams(format!("decoy intensity {mu} must be ≥ 0")));
            }
        }
        if !(self.decoy_intensities[0] > self.decoy_intensities[1]
            && self.decoy_intensities[1] > self.decoy_intensities[2])
        {
            return Err(Error::InvalidParams(format!(
                "decoy intensities {:?} must be strictly decreasing",
                self.decoy_intensities
            )));
        }
        Ok(())
    }
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("{name} = {v} must be in [0, 1]")));
    }
    Ok(())
}

/// Counting rate Q and error rate e of matched code-mode trials:
///
/// Q = (1−d)(1 − e^(−2ημ) + 2d·e^(−2ημ)),
/// e = (1−d)[e_mis − (e_mis − d)·e^(−2ημ)] / Q.
///
/// Signals a degenerate input when Q = 0 (only possible for d = 0 and
/// ημ = 0).
pub fn gain_and_error(eta: f64, mu: f64, dark_count: f64, misalignment: f64) -> Result<(f64, f64)> {
    check_probability("eta", eta)?;
    check_probability("dark_count", dark_count)?;
    check_probability("misalignment", misalignment)?;
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::Domain(format!("intensity {mu} must be ≥ 0")));
    }
    let d = dark_count;
    let attenuated = (-2.0 * eta * mu).exp();
    let clicked = -(-2.0 * eta * mu).exp_m1(); // 1 − e^(−2ημ), no cancellation
    let q = (1.0 - d) * (clicked + 2.0 * d * attenuated);
    if q <= 0.0 {
        return Err(Error::DegenerateInput(
            "counting rate vanishes (no dark counts and no transmitted light)".into(),
        ));
    }
    let e = (1.0 - d) * (misalignment * clicked + d * attenuated) / q;
    Ok((q, e))
}

/// Yields split by announcement correctness, indexed by total photon
/// number n = 0..=n_max.
#[derive(Debug, Clone)]
pub struct YieldSet {
    y_correct: Vec<f64>,
    y_error: Vec<f64>,
}

impl YieldSet {
    pub fn n_max(&self) -> usize {
        self.y_correct.len() - 1
    }

    pub fn y_correct(&self, n: usize) -> f64 {
        self.y_correct[n]
    }

    pub fn y_error(&self, n: usize) -> f64 {
        self.y_error[n]
    }

    pub fn y_total(&self, n: usize) -> f64 {
        self.y_correct[n] + self.y_error[n]
    }

    pub fn correct_slice(&self) -> &[f64] {
        &self.y_correct
    }

    pub fn error_slice(&self) -> &[f64] {
        &self.y_error
    }
}

/// 1 − (1−η)^n without cancellation for tiny η.
fn absorbed_fraction(eta: f64, n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if eta >= 1.0 {
        return 1.0;
    }
    // 1 − exp(n·ln(1−η))
    -(f64::from(n) * (-eta).ln_1p()).exp_m1()
}

/// Yield of total-photon-number n landing on the announced-correct
/// detector: (1−d)[1 − e_mis − (1 − e_mis − d)(1−η)^n].
pub fn yield_correct_at(eta: f64, dark_count: f64, misalignment: f64, n: u32) -> f64 {
    let hit = absorbed_fraction(eta, n);
    let miss = 1.0 - hit;
    (1.0 - dark_count) * ((1.0 - misalignment) * hit + dark_count * miss)
}

/// Yield landing on the announced-wrong detector:
/// (1−d)[e_mis − (e_mis − d)(1−η)^n].
pub fn yield_error_at(eta: f64, dark_count: f64, misalignment: f64, n: u32) -> f64 {
    let hit = absorbed_fraction(eta, n);
    let miss = 1.0 - hit;
    (1.0 - dark_count) * (misalignment * hit + dark_count * miss)
}

/// Total yield (1−d)[1 − (1−2d)(1−η)^n], independent of misalignment.
pub fn yield_total_at(eta: f64, dark_count: f64, n: u32) -> f64 {
    let hit = absorbed_fraction(eta, n);
    let miss = 1.0 - hit;
    (1.0 - dark_count) * (hit + 2.0 * dark_count * miss)
}

/// Yields for every total photon number up to `n_max`.
pub fn yields_by_total_photon(
    eta: f64,
    dark_count: f64,
    misalignment: f64,
    n_max: u32,
) -> Result<YieldSet> {
    check_probability("eta", eta)?;
    check_probability("dark_count", dark_count)?;
    check_probability("misalignment", misalignment)?;
    let mut y_correct = Vec::with_capacity(n_max as usize + 1);
    let mut y_error = Vec::with_capacity(n_max as usize + 1);
    for n in 0..=n_max {
        y_correct.push(yield_correct_at(eta, dark_count, misalignment, n));
        y_error.push(yield_error_at(eta, dark_count, misalignment, n));
    }
    Ok(YieldSet { y_correct, y_error })
}

/// Yield components for the photon pair (l, k). The symmetric
/// beamsplitter-plus-threshold-detector channel acts on total photon
/// number only, so the honest value is the n = l+k yield.
#[derive(Debug, Clone, Copy)]
pub struct YieldComponents {
    pub y_correct: f64,
    pub y_error: f64,
    pub y_total: f64,
}

pub fn yield_lk(eta: f64, dark_count: f64, misalignment: f64, l: u32, k: u32) -> Result<YieldComponents> {
    check_probability("eta", eta)?;
    check_probability("dark_count", dark_count)?;
    check_probability("misalignment", misalignment)?;
    let n = l + k;
    Ok(YieldComponents {
        y_correct: yield_correct_at(eta, dark_count, misalignment, n),
        y_error: yield_error_at(eta, dark_count, misalignment, n),
        y_total: yield_total_at(eta, dark_count, n),
    })
}

/// Counting rate with per-arm intensities μ_a, μ_b:
/// Q = (1−d)(1 − (1−2d)·e^(−η(μa+μb))). Reduces to the symmetric gain
/// at μ_a = μ_b.
pub fn gain_two_intensities(mu_a: f64, mu_b: f64, eta: f64, dark_count: f64) -> Result<f64> {
    check_probability("eta", eta)?;
    check_probability("dark_count", dark_count)?;
    if !mu_a.is_finite() || mu_a < 0.0 || !mu_b.is_finite() || mu_b < 0.0 {
        return Err(Error::Domain(format!(
            "intensities ({mu_a}, {mu_b}) must be ≥ 0"
        )));
    }
    let d = dark_count;
    let attenuated = (-eta * (mu_a + mu_b)).exp();
    let clicked = -(-eta * (mu_a + mu_b)).exp_m1();
    Ok((1.0 - d) * (clicked + 2.0 * d * attenuated))
}
