//! Self-contained verification suite: each check pits a decoder path
//! against one of the independent references in [`crate::reference`] and
//! reports a pass/fail line. Run from the CLI as `pnc-sim verify`.

use num_complex::Complex64;

use crate::channel::{transmit, ChannelParams};
use crate::constellation::{Constellation, Modulation};
use crate::evidence::{evidence_for_sample, EdgeKind};
use crate::jtcnc;
use crate::ra::{self, RaConfig};
use crate::reference;
use crate::rng::{derive_seed, Xoshiro256StarStar};
use crate::sweep::{self, ebn0_to_esn0, Scheme, SweepConfig, SweepPoint};
use crate::upnc;
use crate::xorcd;

/// Outcome of one verification check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl CheckResult {
    fn new(name: &'static str, passed: bool, details: String) -> Self {
        Self {
            name,
            passed,
            details,
        }
    }
}

/// Run every check. `threads` caps the worker pool (0 = auto).
pub fn run_all(threads: usize) -> Vec<CheckResult> {
    let pool = sweep::make_pool(threads);
    pool.install(|| {
        vec![
            evidence_vs_direct_density(),
            chain_vs_exhaustive_bayes(),
            sync_rule_vs_chain(),
            ra_encode_linearity(),
            noiseless_round_trips(),
            ra_loopy_vs_exhaustive_map(),
            jt_loopy_vs_exhaustive_map(),
            noise_calibration(),
            sync_ber_vs_quadrature(),
        ]
    })
}

/// Structured evidence construction against the literal scalar density.
fn evidence_vs_direct_density() -> CheckResult {
    let mut rng = Xoshiro256StarStar::seed_from_u64(101);
    let mut worst = 0.0f64;
    for c in [Constellation::bpsk(), Constellation::qpsk()] {
        for _ in 0..200 {
            let y = Complex64::new(
                4.0 * (rng.next() as f64 / u64::MAX as f64) - 2.0,
                4.0 * (rng.next() as f64 / u64::MAX as f64) - 2.0,
            );
            let v = 0.02 + (rng.next() as f64 / u64::MAX as f64);
            let phi = std::f64::consts::TAU * (rng.next() as f64 / u64::MAX as f64);
            let rot = Complex64::from_polar(1.0, phi);
            for kind in [EdgeKind::Inner, EdgeKind::First, EdgeKind::Last] {
                let fast = evidence_for_sample(y, v, kind, rot, &c);
                let direct = reference::direct_density_table(y, v, kind, rot, &c);
                worst = worst.max(fast.max_abs_diff(&direct));
            }
        }
    }
    CheckResult::new(
        "evidence-vs-direct-density",
        worst < 1e-12,
        format!("max entry deviation {worst:.3e} (tolerance 1e-12)"),
    )
}

/// Chain posteriors against flat enumeration over all packet pairs.
fn chain_vs_exhaustive_bayes() -> CheckResult {
    let mut worst = 0.0f64;
    let mut frames = 0;
    for (ci, c) in [Constellation::bpsk(), Constellation::qpsk()].iter().enumerate() {
        for (di, &delta) in [0.1, 0.5, 0.9].iter().enumerate() {
            for (pi, &phi) in [0.0, std::f64::consts::FRAC_PI_8, std::f64::consts::FRAC_PI_4]
                .iter()
                .enumerate()
            {
                for trial in 0..3u64 {
                    let seed = derive_seed(500, &[ci as u64, di as u64, pi as u64, trial]);
                    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
                    let n = 1 + rng.index(4);
                    let params = ChannelParams::new(delta, phi, 6.0).unwrap();
                    let xa = c.random_packet(n, &mut rng);
                    let xb = c.random_packet(n, &mut rng);
                    let frame = transmit(&xa, &xb, c, &params, rng.next()).unwrap();
                    let exact = upnc::pair_posteriors(&frame, &params, c).unwrap();
                    let brute =
                        reference::exhaustive_pair_posteriors(&frame, &params, c).unwrap();
                    for (e, b) in exact.iter().zip(&brute) {
                        worst = worst.max(e.max_abs_diff(b));
                    }
                    frames += 1;
                }
            }
        }
    }
    CheckResult::new(
        "chain-vs-exhaustive-bayes",
        worst < 1e-9,
        format!("{frames} frames, max posterior deviation {worst:.3e} (tolerance 1e-9)"),
    )
}

/// The synchronous per-symbol rule against the general chain path.
fn sync_rule_vs_chain() -> CheckResult {
    let c = Constellation::bpsk();
    let params = ChannelParams::new(0.0, 0.0, 3.0).unwrap();
    let mut rng = Xoshiro256StarStar::seed_from_u64(77);
    let mut mismatches = 0u64;
    let mut total = 0u64;
    for trial in 0..100 {
        let xa = c.random_packet(32, &mut rng);
        let xb = c.random_packet(32, &mut rng);
        let frame = transmit(&xa, &xb, &c, &params, 9000 + trial).unwrap();
        let decision = upnc::decode_frame(&frame, &params, &c).unwrap();
        for n in 0..32 {
            let direct = upnc::decide_sync(frame.sample(2 * n + 1).unwrap(), &params);
            if direct != decision.xor_symbols[n] as usize {
                mismatches += 1;
            }
            total += 1;
        }
    }
    CheckResult::new(
        "sync-rule-vs-chain",
        mismatches == 0,
        format!("{mismatches}/{total} per-symbol disagreements"),
    )
}

/// XOR linearity of the encoder.
fn ra_encode_linearity() -> CheckResult {
    let c = Constellation::qpsk();
    let cfg = RaConfig::new(16, 3, 97).unwrap();
    let mut rng = Xoshiro256StarStar::seed_from_u64(31);
    let mut ok = true;
    for _ in 0..100 {
        let s1 = c.random_packet(16, &mut rng);
        let s2 = c.random_packet(16, &mut rng);
        let lhs = ra::encode(&s1.xor_with(&s2, &c).unwrap(), &cfg, &c).unwrap();
        let rhs = ra::encode(&s1, &cfg, &c)
            .unwrap()
            .xor_with(&ra::encode(&s2, &cfg, &c).unwrap(), &c)
            .unwrap();
        ok &= lhs == rhs;
    }
    CheckResult::new(
        "ra-encode-linearity",
        ok,
        "encode(s1 (+) s2) == encode(s1) (+) encode(s2) over 100 random pairs".into(),
    )
}

/// Every scheme on noiseless frames across the offset grid.
fn noiseless_round_trips() -> CheckResult {
    let grid = [
        (0.0, 0.0),
        (0.0, std::f64::consts::FRAC_PI_4),
        (0.5, 0.0),
        (0.5, std::f64::consts::FRAC_PI_4),
    ];
    let mut errors = 0u64;
    for modulation in [Modulation::Bpsk, Modulation::Qpsk] {
        for scheme in [Scheme::SyncBench, Scheme::BpUpnc, Scheme::JtCnc, Scheme::XorCd] {
            let mut cfg = SweepConfig::new(scheme, modulation);
            cfg.bits_per_packet = 128;
            cfg.packets_per_point = 5;
            cfg.ebn0_db_list = vec![f64::INFINITY];
            for &(delta, phi) in &grid {
                if scheme == Scheme::SyncBench && (delta != 0.0 || phi != 0.0) {
                    continue;
                }
                cfg.delta_list = vec![delta];
                cfg.phi_list = vec![phi];
                let record = sweep::run_point(&cfg, &cfg.points()[0]).unwrap();
                errors += record.bit_errors;
            }
        }
    }
    CheckResult::new(
        "noiseless-round-trips",
        errors == 0,
        format!("{errors} bit errors across schemes, modulations, and offsets"),
    )
}

fn coded_oracle_trial(
    c: &Constellation,
    cfg: &RaConfig,
    params: &ChannelParams,
    seed: u64,
) -> (crate::channel::ReceivedFrame, Vec<u8>) {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let sa = c.random_packet(cfg.m(), &mut rng);
    let sb = c.random_packet(cfg.m(), &mut rng);
    let xa = ra::encode(&sa, cfg, c).unwrap();
    let xb = ra::encode(&sb, cfg, c).unwrap();
    let frame = transmit(&xa, &xb, c, params, rng.next()).unwrap();
    let (oracle, _) = reference::exhaustive_joint_source_map(&frame, params, c, cfg).unwrap();
    (frame, oracle)
}

/// Stage-2 RA decoding against the exhaustive XOR MAP.
fn ra_loopy_vs_exhaustive_map() -> CheckResult {
    let c = Constellation::qpsk();
    let cfg = RaConfig::new(2, 3, 13).unwrap();
    let params = ChannelParams::new(
        0.5,
        std::f64::consts::FRAC_PI_8,
        ebn0_to_esn0(4.0, Modulation::Qpsk, Scheme::XorCd, 3, true),
    )
    .unwrap();
    let mut agree = 0u64;
    let mut total = 0u64;
    for trial in 0..1000u64 {
        let seed = derive_seed(2024, &[trial]);
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        let sa = c.random_packet(2, &mut rng);
        let sb = c.random_packet(2, &mut rng);
        let xa = ra::encode(&sa, &cfg, &c).unwrap();
        let xb = ra::encode(&sb, &cfg, &c).unwrap();
        let frame = transmit(&xa, &xb, &c, &params, rng.next()).unwrap();
        let tables = xorcd::stage1(&frame, &params, &c).unwrap();
        let loopy = ra::decode_xor(&tables, &cfg, &c, 50, 1e-6);
        let (map, _) = reference::exhaustive_xor_map(&tables, &cfg, &c);
        for m in 0..2 {
            if loopy.source.symbol(m) as u8 == map[m] {
                agree += 1;
            }
            total += 1;
        }
    }
    let rate = agree as f64 / total as f64;
    CheckResult::new(
        "ra-loopy-vs-exhaustive-map",
        rate >= 0.99,
        format!("symbol agreement {rate:.4} over {total} decisions (threshold 0.99)"),
    )
}

/// Joint decoder against the exhaustive source-pair MAP.
fn jt_loopy_vs_exhaustive_map() -> CheckResult {
    let c = Constellation::qpsk();
    let cfg = RaConfig::new(2, 3, 13).unwrap();
    let params = ChannelParams::new(
        0.5,
        std::f64::consts::FRAC_PI_8,
        ebn0_to_esn0(4.0, Modulation::Qpsk, Scheme::JtCnc, 3, true),
    )
    .unwrap();
    let mut graph = jtcnc::JointGraph::build(&cfg, &c, false);
    let mut agree = 0u64;
    let mut total = 0u64;
    for trial in 0..1000u64 {
        let seed = derive_seed(4048, &[trial]);
        let (frame, oracle) = coded_oracle_trial(&c, &cfg, &params, seed);
        let d = graph.decode(&frame, &params, &c, 50, 1e-6).unwrap();
        for m in 0..2 {
            if d.xor_sources[m] == oracle[m] {
                agree += 1;
            }
            total += 1;
        }
    }
    let rate = agree as f64 / total as f64;
    CheckResult::new(
        "jt-loopy-vs-exhaustive-map",
        rate >= 0.98,
        format!("symbol agreement {rate:.4} over {total} decisions (threshold 0.98)"),
    )
}

/// Empirical noise variances of the two sample classes.
fn noise_calibration() -> CheckResult {
    let c = Constellation::bpsk();
    let params = ChannelParams::new(0.25, 0.0, 5.0).unwrap();
    let sigma_sq = params.noise_variance();
    let n = 2048usize;
    let draws_target = 1_100_000usize;
    let frames = draws_target / (2 * n + 1) + 1;
    let xa = c.modulate(&vec![0u8; n]).unwrap();
    let xb = c.modulate(&vec![0u8; n]).unwrap();
    let rot = params.rotation();
    let (mut sum_o, mut cnt_o, mut sum_e, mut cnt_e) = (0.0f64, 0u64, 0.0f64, 0u64);
    for f in 0..frames {
        let frame = transmit(&xa, &xb, &c, &params, derive_seed(7171, &[f as u64])).unwrap();
        for k in 0..frame.len() {
            let y = frame.sample(k).unwrap();
            let mean = crate::channel::sample_mean(k, &xa, &xb, &c, rot);
            let w = y - mean;
            // Both components are independent draws of the same variance.
            if k % 2 == 0 {
                sum_o += w.re * w.re + w.im * w.im;
                cnt_o += 2;
            } else {
                sum_e += w.re * w.re + w.im * w.im;
                cnt_e += 2;
            }
        }
    }
    let var_o = sum_o / cnt_o as f64;
    let var_e = sum_e / cnt_e as f64;
    let expect_o = sigma_sq / params.delta;
    let expect_e = sigma_sq / (1.0 - params.delta);
    let rel_o = (var_o / expect_o - 1.0).abs();
    let rel_e = (var_e / expect_e - 1.0).abs();
    CheckResult::new(
        "noise-calibration",
        rel_o < 0.02 && rel_e < 0.02,
        format!(
            "{} draws: straddle variance off by {:.3}%, aligned by {:.3}% (tolerance 2%)",
            cnt_o + cnt_e,
            100.0 * rel_o,
            100.0 * rel_e
        ),
    )
}

/// Simulated synchronous BPSK BER against the quadrature value.
fn sync_ber_vs_quadrature() -> CheckResult {
    let mut cfg = SweepConfig::new(Scheme::BpUpnc, Modulation::Bpsk);
    cfg.delta_list = vec![0.0];
    cfg.phi_list = vec![0.0];
    cfg.ebn0_db_list = vec![7.0];
    cfg.packets_per_point = 400;
    cfg.bits_per_packet = 1024;
    cfg.master_seed = 6;
    let record = sweep::run_point(
        &cfg,
        &SweepPoint {
            point_id: 0,
            delta: 0.0,
            phi: 0.0,
            ebn0_db: 7.0,
        },
    )
    .unwrap();
    let analytic = reference::sync_bpsk_ber_analytic(7.0);
    let ratio = record.ber / analytic;
    CheckResult::new(
        "sync-ber-vs-quadrature",
        ratio > 1.0 / 3.0 && ratio < 3.0,
        format!(
            "simulated {:.3e} vs analytic {analytic:.3e} (ratio {ratio:.2}, bound 3x)",
            record.ber
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_checks_pass() {
        // The fast subset; the full suite runs in the CLI and acceptance
        // tests.
        let r = evidence_vs_direct_density();
        assert!(r.passed, "{}: {}", r.name, r.details);
        let r = ra_encode_linearity();
        assert!(r.passed, "{}: {}", r.name, r.details);
        let r = sync_rule_vs_chain();
        assert!(r.passed, "{}: {}", r.name, r.details);
    }
}
