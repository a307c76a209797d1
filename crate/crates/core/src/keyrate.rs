//! Key-rate assembly: R = (1/M)·Q·(1 − f·H(e) − I_AE), floored at
//! zero, with per-point optimization of the signal intensity, bisection
//! for the maximal tolerable channel loss, and the repeaterless
//! comparison bound.

use crate::channel::{gain_and_error, EtaMapping, ExperimentParams, PhaseCount};
use crate::error::{Error, Result};
use crate::math::{binary_entropy, DEFAULT_TRUNCATION_TOL};
use crate::security;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    I,
    II,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::I => "I",
            Protocol::II => "II",
        })
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Protocol::I),
            "II" | "2" => Ok(Protocol::II),
            other => Err(Error::InvalidParams(format!(
                "protocol '{other}' (want 'I' or 'II')"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoyMode {
    /// Yields known exactly (infinitely many decoy intensities).
    Infinite,
    /// Yields bounded by linear programs from three intensities.
    Finite3,
}

impl std::fmt::Display for DecoyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DecoyMode::Infinite => "infinite",
            DecoyMode::Finite3 => "finite3",
        })
    }
}

impl std::str::FromStr for DecoyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "infinite" | "inf" => Ok(DecoyMode::Infinite),
            "finite3" | "finite" => Ok(DecoyMode::Finite3),
            other => Err(Error::InvalidParams(format!(
                "decoy mode '{other}' (want 'infinite' or 'finite3')"
            ))),
        }
    }
}

/// One fully specified operating regime: protocol, decoy mode, physical
/// parameters and the numeric knobs of the search routines.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub protocol: Protocol,
    pub decoy: DecoyMode,
    pub params: ExperimentParams,
    /// Remove the 1/M sifting prefactor (used for the infinite-phase
    /// limit, where the sifted rate is identically zero).
    pub sifting_free: bool,
    pub eta_mapping: EtaMapping,
    /// Evaluate at this fixed signal intensity instead of optimizing.
    pub fixed_mu: Option<f64>,
    /// Tail tolerance for the photon-number series.
    pub series_tol: f64,
    /// Rate below which the key is considered lost; defines "maximal
    /// channel loss" operationally.
    pub rate_floor: f64,
    /// Signal-intensity search bracket (per arm).
    pub mu_bracket: (f64, f64),
}

impl Scenario {
    pub fn new(protocol: Protocol, decoy: DecoyMode, params: ExperimentParams) -> Self {
        Self {
            protocol,
            decoy,
            params,
            sifting_free: false,
            eta_mapping: EtaMapping::Total,
            fixed_mu: None,
            series_tol: DEFAULT_TRUNCATION_TOL,
            rate_floor: 1e-12,
            mu_bracket: (1e-4, 1.0),
        }
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.protocol == Protocol::I && self.decoy == DecoyMode::Finite3 {
            return Err(Error::Unsupported(
                "three-intensity estimation is defined for protocol II only".into(),
            ));
        }
        let (lo, hi) = self.mu_bracket;
        if !(lo > 0.0 && hi > lo && hi <= 2.0) {
            return Err(Error::InvalidParams(format!(
                "mu bracket ({lo}, {hi}) must satisfy 0 < lo < hi ≤ 2"
            )));
        }
        if !(self.rate_floor > 0.0) {
            return Err(Error::InvalidParams("rate floor must be > 0".into()));
        }
        Ok(())
    }
}

/// One operating point of a rate-versus-loss curve.
#[derive(Debug, Clone, Copy)]
pub struct KeyRatePoint {
    pub loss_db: f64,
    pub eta: f64,
    pub mu_opt: f64,
    pub q: f64,
    pub e: f64,
    pub i_ae: f64,
    pub rate: f64,
}

/// Decoy intensity set used when the signal intensity is `mu`: the
/// bright and vacuum-like configured intensities stay fixed and the
/// middle one follows the signal (which must be a member of the set).
/// The bright decoy is what pins the multiphoton yields; making the
/// signal the brightest member leaves them unconstrained.
fn decoy_set_for(params: &ExperimentParams, mu: f64) -> [f64; 3] {
    let mut set = [params.decoy_intensities[0], mu, params.decoy_intensities[2]];
    set.sort_by(|a, b| b.partial_cmp(a).unwrap());
    set
}

/// Secret-key rate at one (loss, signal intensity) point.
pub fn key_rate(scn: &Scenario, loss_db: f64, mu: f64) -> Result<KeyRatePoint> {
    scn.validate()?;
    if !mu.is_finite() || mu <= 0.0 {
        return Err(Error::Domain(format!("signal intensity {mu} must be > 0")));
    }
    let params = &scn.params;
    let eta = scn.eta_mapping.eta(loss_db, params.detector_eff)?;
    let (q, e) = gain_and_error(eta, mu, params.dark_count, params.misalignment)?;
    let mut at_mu = params.clone();
    at_mu.signal_intensity = mu;
    let i_ae = match (scn.protocol, scn.decoy) {
        (Protocol::I, DecoyMode::Infinite) => {
            security::iae_protocol1_refined(&at_mu, eta, q, e, scn.series_tol)?.i_ae
        }
        (Protocol::II, DecoyMode::Infinite) => {
            security::iae_protocol2_infinite(&at_mu, eta, q, scn.series_tol)?.i_ae
        }
        (Protocol::II, DecoyMode::Finite3) => {
            let set = decoy_set_for(params, mu);
            let gains = security::observe_gains_honest(&set, eta, params.dark_count)?;
            security::iae_protocol2_finite(
                &gains,
                &set,
                mu,
                params.num_phases,
                q,
                scn.series_tol,
            )?
            .i_ae
        }
        (Protocol::I, DecoyMode::Finite3) => unreachable!("rejected by validate"),
    };
    let prefactor = if scn.sifting_free {
        1.0
    } else {
        match params.num_phases {
            PhaseCount::Finite(m) => 1.0 / f64::from(m),
            PhaseCount::Infinite => 0.0,
        }
    };
    let margin = 1.0 - params.error_corr_eff * binary_entropy(e)? - i_ae;
    let rate = (prefactor * q * margin).max(0.0);
    Ok(KeyRatePoint {
        loss_db,
        eta,
        mu_opt: mu,
        q,
        e,
        i_ae,
        rate,
    })
}

/// Result of a signal-intensity search.
#[derive(Debug, Clone, Copy)]
pub struct MuOptimum {
    pub point: KeyRatePoint,
    /// The optimum sits against the search bracket; worth flagging as a
    /// diagnostic since the bracket then binds the result.
    pub at_bracket_edge: bool,
}

/// Golden-section search over ln μ, refined to 1e-3 relative tolerance,
/// after a coarse deterministic pre-scan that selects the bracket.
pub fn optimize_mu(scn: &Scenario, loss_db: f64) -> Result<MuOptimum> {
    scn.validate()?;
    if let Some(mu) = scn.fixed_mu {
        return Ok(MuOptimum {
            point: key_rate(scn, loss_db, mu)?,
            at_bracket_edge: false,
        });
    }
    const SCAN_POINTS: usize = 16;
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (lo, hi) = scn.mu_bracket;
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    let rate_at = |ln_mu: f64| -> Result<KeyRatePoint> { key_rate(scn, loss_db, ln_mu.exp()) };

    let mut best_idx = 0usize;
    let mut best = rate_at(ln_lo)?;
    let step = (ln_hi - ln_lo) / (SCAN_POINTS - 1) as f64;
    for i in 1..SCAN_POINTS {
        let p = rate_at(ln_lo + step * i as f64)?;
        if p.rate > best.rate {
            best = p;
            best_idx = i;
        }
    }
    if best.rate <= 0.0 {
        // Flat zero: report the bracket edge explicitly.
        return Ok(MuOptimum {
            point: rate_at(ln_lo)?,
            at_bracket_edge: true,
        });
    }
    let mut a = ln_lo + step * best_idx.saturating_sub(1) as f64;
    let mut b = (ln_lo + step * (best_idx + 1) as f64).min(ln_hi);
    let tol = 1e-3f64.ln_1p();
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = rate_at(x1)?;
    let mut f2 = rate_at(x2)?;
    while b - a > tol {
        if f1.rate >= f2.rate {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = rate_at(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = rate_at(x2)?;
        }
    }
    let mut point = if f1.rate >= f2.rate { f1 } else { f2 };
    if best.rate > point.rate {
        point = best;
    }
    let ln_mu = point.mu_opt.ln();
    let at_edge = ln_mu - ln_lo < 2.0 * tol || ln_hi - ln_mu < 2.0 * tol;
    Ok(MuOptimum {
        point,
        at_bracket_edge: at_edge,
    })
}

/// Largest channel loss at which the optimized rate still clears the
/// scenario's rate floor, resolved to 0.05 dB by bisection.
pub fn max_loss(scn: &Scenario) -> Result<f64> {
    scn.validate()?;
    let at_zero = optimize_mu(scn, 0.0)?;
    if at_zero.point.rate <= scn.rate_floor {
        return Err(Error::NoPositiveRate(format!(
            "optimized rate {} at 0 dB does not clear the floor {}",
            at_zero.point.rate, scn.rate_floor
        )));
    }
    let mut lo = 0.0f64;
    let mut hi = 20.0f64;
    loop {
        let rate = optimize_mu(scn, hi)?.point.rate;
        if rate <= scn.rate_floor {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 320.0 {
            return Err(Error::Domain(
                "rate still clears the floor at 320 dB; no finite maximal loss found".into(),
            ));
        }
    }
    while hi - lo > 0.05 {
        let mid = 0.5 * (lo + hi);
        if optimize_mu(scn, mid)?.point.rate > scn.rate_floor {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Repeaterless secret-key capacity bound −log2(1 − η) of a lossy
/// channel with transmittance η.
pub fn plob_bound(eta: f64) -> Result<f64> {
    if !eta.is_finite() || !(0.0..1.0).contains(&eta) {
        return Err(Error::Domain(format!(
            "transmittance {eta} must be in [0, 1) for the repeaterless bound"
        )));
    }
    Ok(-(-eta).ln_1p() / std::f64::consts::LN_2)
}

/// Repeaterless bound as a function of plotted channel loss, taking the
/// end-to-end channel transmittance 10^(−loss/10); infinite at 0 dB.
pub fn plob_at_loss(loss_db: f64) -> f64 {
    let eta_channel = 10f64.powf(-loss_db / 10.0);
    if eta_channel >= 1.0 {
        f64::INFINITY
    } else {
        plob_bound(eta_channel).unwrap_or(f64::INFINITY)
    }
}

/// Optimized key rates over a loss grid; points past the maximal loss
/// simply report rate 0.
pub fn key_rate_curve(scn: &Scenario, loss_grid: &[f64]) -> Result<Vec<KeyRatePoint>> {
    loss_grid
        .iter()
        .map(|&loss| optimize_mu(scn, loss).map(|o| o.point))
        .collect()
}
