//! Event-level Monte Carlo simulation of both protocols: state
//! preparation, beamsplitter interference, threshold detection with
//! dark counts and misalignment, announcement, sifting and bit flip.
//!
//! Reproducibility contract: the generator is ChaCha12 seeded per
//! shard; shard i derives its seed as
//! splitmix64(seed XOR ((i+1)·0x9E3779B97F4A7C15)), and aggregation is
//! a plain sum of counts, so results are independent of shard
//! scheduling and bit-identical for a fixed (params, seed, n_trials).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::channel::{gain_and_error, ExperimentParams, PhaseCount};
use crate::error::{Error, Result};
use crate::keyrate::Protocol;

const SHARD_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn shard_seed(seed: u64, shard: u32) -> u64 {
    splitmix64(seed ^ SHARD_SALT.wrapping_mul(u64::from(shard) + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialMode {
    Code,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Announcement {
    OnlyL,
    OnlyR,
    NoClick,
}

/// Everything decided and observed in a single trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialRecord {
    pub mode_a: TrialMode,
    pub mode_b: TrialMode,
    pub bit_a: u8,
    pub bit_b: u8,
    pub phase_idx_a: u32,
    pub phase_idx_b: u32,
    pub test_phase_a: f64,
    pub test_phase_b: f64,
    pub intensity_a: f64,
    pub intensity_b: f64,
    pub announcement: Announcement,
    pub kept: bool,
    pub error: bool,
}

/// Knobs of a simulation run.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub n_trials: u64,
    pub seed: u64,
    /// Test-mode phases live on a 2π/slices grid so that the
    /// post-selection condition |φa − φb| ∈ {0, π} has positive
    /// probability.
    pub test_phase_slices: u32,
    /// Number of independently seeded shards.
    pub shards: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_trials: 1_000_000,
            seed: 42,
            test_phase_slices: 16,
            shards: 64,
        }
    }
}

/// Aggregated counts and the derived estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloStats {
    pub trials: u64,
    /// Trials where both parties chose code mode.
    pub code_pairs: u64,
    /// Code-mode pairs with matching phase indices (the denominator of
    /// the gain estimate).
    pub matched_code: u64,
    pub kept: u64,
    pub errors: u64,
    pub only_l: u64,
    pub only_r: u64,
    pub no_click: u64,
    pub q_hat: f64,
    pub e_hat: f64,
    /// Binomial standard errors of the two estimates.
    pub q_se: f64,
    pub e_se: f64,
}

/// Simulates one trial. The draw order is fixed (modes, payloads,
/// misalignment, left click, right click, tie-break) so a seeded stream
/// reproduces exactly.
pub fn simulate_trial(
    protocol: Protocol,
    params: &ExperimentParams,
    eta: f64,
    test_phase_slices: u32,
    rng: &mut impl Rng,
) -> TrialRecord {
    let m = match params.num_phases {
        PhaseCount::Finite(m) => m,
        PhaseCount::Infinite => unreachable!("validated by run_trials"),
    };
    let mode_a = if rng.gen::<bool>() { TrialMode::Code } else { TrialMode::Test };
    let mode_b = if rng.gen::<bool>() { TrialMode::Code } else { TrialMode::Test };

    let mut draw_arm = |mode: TrialMode| -> (u8, u32, f64, f64, f64) {
        match mode {
            TrialMode::Code => {
                let bit = rng.gen_range(0..2u8);
                let idx = rng.gen_range(0..m);
                let phase = std::f64::consts::PI * f64::from(idx) / f64::from(m);
                (bit, idx, phase, params.signal_intensity, phase)
            }
            TrialMode::Test => {
                let slice = rng.gen_range(0..test_phase_slices);
                let phase =
                    2.0 * std::f64::consts::PI * f64::from(slice) / f64::from(test_phase_slices);
                let intensity = params.decoy_intensities[rng.gen_range(0..3usize)];
                (0, slice, phase, intensity, phase)
            }
        }
    };
    let (bit_a, idx_a, phase_a, intensity_a, _) = draw_arm(mode_a);
    let (bit_b, idx_b, phase_b, intensity_b, _) = draw_arm(mode_b);

    // Transmitted amplitudes; the bit enters as an exact sign so that
    // opposite bits interfere destructively without rounding residue.
    let amp = |bit: u8, phase: f64, intensity: f64| -> (f64, f64) {
        let r = (eta * intensity).sqrt() * if bit == 1 { -1.0 } else { 1.0 };
        (r * phase.cos(), r * phase.sin())
    };
    let a = amp(bit_a, phase_a, intensity_a);
    let b = amp(bit_b, phase_b, intensity_b);
    // Balanced beamsplitter outputs.
    let mut lambda_l = 0.5 * ((a.0 + b.0).powi(2) + (a.1 + b.1).powi(2));
    let mut lambda_r = 0.5 * ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2));
    // Misalignment: light routed to the wrong output port.
    if rng.gen::<f64>() < params.misalignment {
        std::mem::swap(&mut lambda_l, &mut lambda_r);
    }
    let d = params.dark_count;
    let click_prob = |lambda: f64| 1.0 - (1.0 - d) * (-lambda).exp();
    let click_l = rng.gen::<f64>() < click_prob(lambda_l);
    let click_r = rng.gen::<f64>() < click_prob(lambda_r);

    let both_test = mode_a == TrialMode::Test && mode_b == TrialMode::Test;
    let announcement = match (click_l, click_r) {
        (true, false) => Announcement::OnlyL,
        (false, true) => Announcement::OnlyR,
        (false, false) => Announcement::NoClick,
        (true, true) => match protocol {
            Protocol::I => Announcement::NoClick,
            Protocol::II => {
                if both_test {
                    // Double clicks count as a success in the test mode,
                    // assigned to either detector with equal probability.
                    if rng.gen::<bool>() {
                        Announcement::OnlyL
                    } else {
                        Announcement::OnlyR
                    }
                } else {
                    Announcement::NoClick
                }
            }
        },
    };

    let both_code = mode_a == TrialMode::Code && mode_b == TrialMode::Code;
    let kept = both_code && idx_a == idx_b && announcement != Announcement::NoClick;
    let flip = u8::from(announcement == Announcement::OnlyR);
    let error = kept && (bit_a ^ bit_b ^ flip) == 1;

    TrialRecord {
        mode_a,
        mode_b,
        bit_a,
        bit_b,
        phase_idx_a: idx_a,
        phase_idx_b: idx_b,
        test_phase_a: if mode_a == TrialMode::Test { phase_a } else { f64::NAN },
        test_phase_b: if mode_b == TrialMode::Test { phase_b } else { f64::NAN },
        intensity_a,
        intensity_b,
        announcement,
        kept,
        error,
    }
}

/// Runs `cfg.n_trials` seeded trials and aggregates the counts.
pub fn run_trials(
    protocol: Protocol,
    params: &ExperimentParams,
    eta: f64,
    cfg: &SimConfig,
) -> Result<MonteCarloStats> {
    params.validate()?;
    if params.num_phases == PhaseCount::Infinite {
        return Err(Error::Unsupported(
            "event simulation needs a finite phase count (matching indices have probability zero otherwise)"
                .into(),
        ));
    }
    if !eta.is_finite() || !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("transmittance {eta} must be in [0, 1]")));
    }
    if cfg.n_trials == 0 || cfg.shards == 0 || cfg.test_phase_slices == 0 {
        return Err(Error::InvalidParams(
            "n_trials, shards and test_phase_slices must all be ≥ 1".into(),
        ));
    }
    let mut stats = MonteCarloStats {
        trials: cfg.n_trials,
        code_pairs: 0,
        matched_code: 0,
        kept: 0,
        errors: 0,
        only_l: 0,
        only_r: 0,
        no_click: 0,
        q_hat: 0.0,
        e_hat: 0.0,
        q_se: 0.0,
        e_se: 0.0,
    };
    let shards = u64::from(cfg.shards).min(cfg.n_trials);
    let base = cfg.n_trials / shards;
    let extra = cfg.n_trials % shards;
    for shard in 0..shards {
        let n = base + u64::from(shard < extra);
        let mut rng = ChaCha12Rng::seed_from_u64(shard_seed(cfg.seed, shard as u32));
        for _ in 0..n {
            let rec = simulate_trial(protocol, params, eta, cfg.test_phase_slices, &mut rng);
            match rec.announcement {
                Announcement::OnlyL => stats.only_l += 1,
                Announcement::OnlyR => stats.only_r += 1,
                Announcement::NoClick => stats.no_click += 1,
            }
            let both_code = rec.mode_a == TrialMode::Code && rec.mode_b == TrialMode::Code;
            if both_code {
                stats.code_pairs += 1;
                if rec.phase_idx_a == rec.phase_idx_b {
                    stats.matched_code += 1;
                    stats.kept += u64::from(rec.kept);
                    stats.errors += u64::from(rec.error);
                }
            }
        }
    }
    if stats.matched_code > 0 {
        let n = stats.matched_code as f64;
        stats.q_hat = stats.kept as f64 / n;
        stats.q_se = (stats.q_hat * (1.0 - stats.q_hat) / n).sqrt();
    }
    if stats.kept > 0 {
        let k = stats.kept as f64;
        stats.e_hat = stats.errors as f64 / k;
        stats.e_se = (stats.e_hat * (1.0 - stats.e_hat) / k).sqrt();
    }
    Ok(stats)
}

/// z-scores of the simulated gain and error rate against the analytic
/// channel model, under the model's own binomial spread.
#[derive(Debug, Clone, Copy)]
pub struct ComparisonReport {
    pub q_analytic: f64,
    pub e_analytic: f64,
    pub q_z_score: f64,
    pub e_z_score: f64,
    pub pass: bool,
}

pub fn compare_to_analytic(
    stats: &MonteCarloStats,
    params: &ExperimentParams,
    eta: f64,
) -> Result<ComparisonReport> {
    let (q, e) = gain_and_error(
        eta,
        params.signal_intensity,
        params.dark_count,
        params.misalignment,
    )?;
    let z = |hat: f64, p: f64, n: u64, expected_events: f64| -> f64 {
        if n == 0 {
            // No statistics gathered; only acceptable if none were
            // expected.
            return if expected_events < 10.0 { 0.0 } else { f64::INFINITY };
        }
        let se = (p * (1.0 - p) / n as f64).sqrt();
        if se == 0.0 {
            if hat == p {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (hat - p) / se
        }
    };
    let q_z = z(stats.q_hat, q, stats.matched_code, stats.trials as f64 / 4.0);
    let e_z = z(stats.e_hat, e, stats.kept, stats.matched_code as f64 * q);
    Ok(ComparisonReport {
        q_analytic: q,
        e_analytic: e,
        q_z_score: q_z,
        e_z_score: e_z,
        pass: q_z.abs() <= 4.0 && e_z.abs() <= 4.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::EtaMapping;

    fn params(m: u32) -> ExperimentParams {
        ExperimentParams {
            num_phases: PhaseCount::Finite(m),
            signal_intensity: 0.05,
            decoy_intensities: [0.05, 0.01, 1e-4],
            ..ExperimentParams::default()
        }
    }

    #[test]
    fn nothing_clicks_without_light_or_dark_counts() {
        let mut p = params(2);
        p.dark_count = 0.0;
        let cfg = SimConfig {
            n_trials: 50_000,
            ..SimConfig::default()
        };
        let stats = run_trials(Protocol::I, &p, 0.0, &cfg).unwrap();
        assert_eq!(stats.kept, 0);
        assert_eq!(stats.only_l + stats.only_r, 0);
        assert_eq!(stats.no_click, stats.trials);
    }

    #[test]
    fn noiseless_runs_have_exactly_zero_errors() {
        // d = 0, e_mis = 0: only the correct detector can ever click on
        // a matched code trial, for any seed.
        for seed in [1u64, 7, 1234] {
            let mut p = params(2);
            p.dark_count = 0.0;
            p.misalignment = 0.0;
            let cfg = SimConfig {
                n_trials: 200_000,
                seed,
                ..SimConfig::default()
            };
            let stats = run_trials(Protocol::II, &p, 0.3, &cfg).unwrap();
            assert!(stats.kept > 0, "seed {seed} produced no kept trials");
            assert_eq!(stats.errors, 0, "seed {seed} produced errors");
        }
    }

    #[test]
    fn outcome_counts_are_exhaustive() {
        let cfg = SimConfig {
            n_trials: 100_000,
            ..SimConfig::default()
        };
        let stats = run_trials(Protocol::II, &params(2), 0.01, &cfg).unwrap();
        assert_eq!(stats.only_l + stats.only_r + stats.no_click, stats.trials);
    }

    #[test]
    fn identical_seeds_reproduce_bitwise() {
        let cfg = SimConfig {
            n_trials: 100_000,
            seed: 99,
            ..SimConfig::default()
        };
        let a = run_trials(Protocol::I, &params(2), 0.0145, &cfg).unwrap();
        let b = run_trials(Protocol::I, &params(2), 0.0145, &cfg).unwrap();
        assert_eq!(a, b);
        let c = run_trials(
            Protocol::I,
            &params(2),
            0.0145,
            &SimConfig { seed: 100, ..cfg },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sifting_fraction_converges_to_one_over_m() {
        for m in [1u32, 2, 4] {
            let cfg = SimConfig {
                n_trials: 400_000,
                seed: 5,
                ..SimConfig::default()
            };
            let stats = run_trials(Protocol::I, &params(m), 0.01, &cfg).unwrap();
            let frac = stats.matched_code as f64 / stats.code_pairs as f64;
            let p = 1.0 / f64::from(m);
            let se = (p * (1.0 - p) / stats.code_pairs as f64).sqrt();
            assert!(
                (frac - p).abs() <= 4.0 * se,
                "M={m}: sifting fraction {frac} vs {p} (se {se})"
            );
        }
    }

    #[test]
    fn simulation_matches_analytic_gain_and_error() {
        // (M=2, μ=0.05, η from 20 dB per-arm at reference parameters).
        let p = params(2);
        let eta = EtaMapping::PerArm.eta(20.0, p.detector_eff).unwrap();
        let cfg = SimConfig {
            n_trials: 2_000_000,
            seed: 2024,
            ..SimConfig::default()
        };
        let stats = run_trials(Protocol::I, &p, eta, &cfg).unwrap();
        let report = compare_to_analytic(&stats, &p, eta).unwrap();
        assert!(
            report.pass,
            "z-scores q={} e={}",
            report.q_z_score, report.e_z_score
        );
    }

    #[test]
    fn statistical_sweep_over_intensity_and_loss() {
        for (i, &mu) in [0.02, 0.05, 0.1].iter().enumerate() {
            for (j, &loss) in [10.0, 20.0, 30.0].iter().enumerate() {
                let mut p = params(2);
                p.signal_intensity = mu;
                p.decoy_intensities = [mu, 0.01, 1e-4];
                let eta = EtaMapping::PerArm.eta(loss, p.detector_eff).unwrap();
                let cfg = SimConfig {
                    n_trials: 1_000_000,
                    seed: 31 + (3 * i + j) as u64,
                    ..SimConfig::default()
                };
                let stats = run_trials(Protocol::II, &p, eta, &cfg).unwrap();
                let report = compare_to_analytic(&stats, &p, eta).unwrap();
                assert!(
                    report.pass,
                    "mu={mu} loss={loss}: z_q={} z_e={}",
                    report.q_z_score, report.e_z_score
                );
            }
        }
    }

    #[test]
    fn deliberately_wrong_model_is_detected() {
        let p = params(2);
        let eta = EtaMapping::PerArm.eta(20.0, p.detector_eff).unwrap();
        let cfg = SimConfig {
            n_trials: 2_000_000,
            seed: 77,
            ..SimConfig::default()
        };
        let stats = run_trials(Protocol::I, &p, eta, &cfg).unwrap();
        let report = compare_to_analytic(&stats, &p, 2.0 * eta).unwrap();
        assert!(!report.pass, "doubled-η oracle not rejected");
    }

    #[test]
    fn fabricated_exact_stats_give_zero_z() {
        let p = params(2);
        let eta = 0.01;
        let (q, e) = gain_and_error(eta, p.signal_intensity, p.dark_count, p.misalignment).unwrap();
        let stats = MonteCarloStats {
            trials: 1_000_000,
            code_pairs: 250_000,
            matched_code: 125_000,
            kept: (125_000.0 * q) as u64,
            errors: 0,
            only_l: 0,
            only_r: 0,
            no_click: 0,
            q_hat: q,
            e_hat: e,
            q_se: 0.0,
            e_se: 0.0,
        };
        let report = compare_to_analytic(&stats, &p, eta).unwrap();
        assert_eq!(report.q_z_score, 0.0);
        assert_eq!(report.e_z_score, 0.0);
        assert!(report.pass);
    }

    #[test]
    fn infinite_phase_simulation_is_rejected() {
        let mut p = params(2);
        p.num_phases = PhaseCount::Infinite;
        assert!(matches!(
            run_trials(Protocol::I, &p, 0.01, &SimConfig::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn shard_seeds_differ() {
        let s: Vec<u64> = (0..8).map(|i| shard_seed(42, i)).collect();
        for i in 0..8 {
            for j in (i + 1)..8 {
                assert_ne!(s[i], s[j]);
            }
        }
    }
}
