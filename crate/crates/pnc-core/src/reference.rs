//! Independent reference computations.
//!
//! Everything here deliberately avoids the message-passing machinery of the
//! decoders: posteriors come from flat enumeration of all transmit
//! hypotheses, densities from literal scalar formulas, and error
//! probabilities from one-dimensional quadrature. These routines back the
//! verification suite and the test oracles; they are slow on purpose and
//! only usable at small sizes.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{span_for, ChannelParams, ReceivedFrame};
use crate::constellation::Constellation;
use crate::error::{PncError, Result};
use crate::evidence::{EdgeKind, JointTable, SymbolTable, MAX_PAIR};
use crate::ra::{encode, RaConfig};
use crate::constellation::SourcePacket;

/// Literal two-factor Gaussian density over symbol pairs, normalized.
///
/// Evaluates `exp(-(y_re - m_re)^2 / (2v)) * exp(-(y_im - m_im)^2 / (2v))`
/// entry by entry with the constant prefactor included, then normalizes.
/// The structured path must match this within 1e-12 at moderate variance.
pub fn direct_density_table(
    y: Complex64,
    variance: f64,
    kind: EdgeKind,
    rotation: Complex64,
    c: &Constellation,
) -> JointTable {
    let size = c.size();
    let prefactor = 1.0 / (2.0 * std::f64::consts::PI * variance);
    let mut raw = vec![0.0f64; size * size];
    for a in 0..size {
        for b in 0..size {
            let mut mean = Complex64::new(0.0, 0.0);
            if kind != EdgeKind::Last {
                mean += c.point(a);
            }
            if kind != EdgeKind::First {
                mean += c.point(b) * rotation;
            }
            let fre = (-(y.re - mean.re) * (y.re - mean.re) / (2.0 * variance)).exp();
            let fim = (-(y.im - mean.im) * (y.im - mean.im) / (2.0 * variance)).exp();
            raw[a * size + b] = prefactor * fre * fim;
        }
    }
    JointTable::from_raw(size, kind, &raw)
}

/// Per-sample likelihood rows for enumeration, rescaled by the per-sample
/// maximum (a constant factor per sample, which cancels in the Bayes
/// normalization). Absent samples get an empty row and are skipped.
fn sample_rows(
    frame: &ReceivedFrame,
    params: &ChannelParams,
    c: &Constellation,
) -> Vec<Vec<f64>> {
    let size = c.size();
    let rot = params.rotation();
    (0..frame.len())
        .map(|k| {
            let Some(y) = frame.sample(k) else {
                return Vec::new();
            };
            let v = frame.variance(k);
            let span = frame.span(k);
            let mut dist = vec![0.0f64; size * size];
            let mut min_d = f64::INFINITY;
            for a in 0..size {
                for b in 0..size {
                    let mut mean = Complex64::new(0.0, 0.0);
                    if let Some(_) = span.a_pos {
                        mean += c.point(a);
                    }
                    if let Some(_) = span.b_pos {
                        mean += c.point(b) * rot;
                    }
                    let d = (y - mean).norm_sqr();
                    dist[a * size + b] = d;
                    min_d = min_d.min(d);
                }
            }
            dist.iter()
                .map(|&d| {
                    if v > 0.0 {
                        (-(d - min_d) / (2.0 * v)).exp()
                    } else if d - min_d <= 1e-12 * (1.0 + min_d) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Brute-force Bayes posteriors of every aligned pair, by enumerating all
/// `|alphabet|^N x |alphabet|^N` packet pairs and weighing each by its full
/// frame likelihood. Feasible for `N <= 6` on QPSK.
pub fn exhaustive_pair_posteriors(
    frame: &ReceivedFrame,
    params: &ChannelParams,
    c: &Constellation,
) -> Result<Vec<JointTable>> {
    let n = frame.n_coded();
    let size = c.size();
    let assignments = match (size as u128).checked_pow(n as u32) {
        Some(a) if a * a <= 1 << 26 => a as usize,
        _ => {
            return Err(PncError::InvalidParameter(format!(
                "enumeration over N={n} symbols is too large"
            )))
        }
    };
    let rows = sample_rows(frame, params, c);

    let digits = |mut idx: usize| -> Vec<usize> {
        let mut out = vec![0usize; n];
        for d in out.iter_mut() {
            *d = idx % size;
            idx /= size;
        }
        out
    };

    // Accumulate unnormalized posteriors per aligned position, in parallel
    // over the A-packet hypotheses.
    let acc = (0..assignments)
        .into_par_iter()
        .fold(
            || vec![[0.0f64; MAX_PAIR]; n],
            |mut acc, a_idx| {
                let a_dig = digits(a_idx);
                let mut b_dig = vec![0usize; n];
                for _ in 0..assignments {
                    let mut like = 1.0f64;
                    for (k, row) in rows.iter().enumerate() {
                        if row.is_empty() {
                            continue;
                        }
                        let span = span_for(k, n);
                        let a = span.a_pos.map_or(0, |p| a_dig[p]);
                        let b = span.b_pos.map_or(0, |p| b_dig[p]);
                        like *= row[a * size + b];
                    }
                    if like > 0.0 {
                        for pos in 0..n {
                            acc[pos][a_dig[pos] * size + b_dig[pos]] += like;
                        }
                    }
                    // Odometer increment of the B digits.
                    for d in b_dig.iter_mut() {
                        *d += 1;
                        if *d < size {
                            break;
                        }
                        *d = 0;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![[0.0f64; MAX_PAIR]; n],
            |mut lhs, rhs| {
                for (l, r) in lhs.iter_mut().zip(&rhs) {
                    for i in 0..MAX_PAIR {
                        l[i] += r[i];
                    }
                }
                lhs
            },
        );

    Ok(acc
        .into_iter()
        .map(|raw| JointTable::from_raw(size, EdgeKind::Inner, &raw[..size * size]))
        .collect())
}

/// Exact MAP over the XOR source packet given per-codeword-symbol XOR
/// tables: enumerate all `|alphabet|^M` source sequences, weigh each by the
/// product of its codeword's table entries.
pub fn exhaustive_xor_map(
    tables: &[SymbolTable],
    cfg: &RaConfig,
    c: &Constellation,
) -> (Vec<u8>, Vec<SymbolTable>) {
    let m = cfg.m();
    let size = c.size();
    let count = size.pow(m as u32);
    let mut acc = vec![SymbolTable::zeros(size); m];
    for idx in 0..count {
        let mut rem = idx;
        let mut digits = vec![0u8; m];
        for d in digits.iter_mut() {
            *d = (rem % size) as u8;
            rem /= size;
        }
        let s = SourcePacket::from_indices(digits.clone());
        let x = encode(&s, cfg, c).expect("length matches config");
        let mut like = 1.0f64;
        for (n, t) in tables.iter().enumerate() {
            like *= t.get(x.symbol(n));
        }
        for (pos, &d) in digits.iter().enumerate() {
            let prev = acc[pos].get(d as usize);
            acc[pos].set(d as usize, prev + like);
        }
    }
    let mut decisions = Vec::with_capacity(m);
    for t in acc.iter_mut() {
        t.normalize();
        decisions.push(t.argmax() as u8);
    }
    (decisions, acc)
}

/// Exact MAP over the XOR of the source pair for a coded frame: enumerate
/// all `(S_A, S_B)` hypotheses, weigh by the full frame likelihood of the
/// corresponding codeword pair, and group the per-position pair posterior by
/// XOR value. Feasible for `M = 2`, `q = 3` on QPSK.
pub fn exhaustive_joint_source_map(
    frame: &ReceivedFrame,
    params: &ChannelParams,
    c: &Constellation,
    cfg: &RaConfig,
) -> Result<(Vec<u8>, Vec<SymbolTable>)> {
    let m = cfg.m();
    let n = cfg.n();
    if frame.n_coded() != n {
        return Err(PncError::ShapeMismatch(format!(
            "frame carries {} symbols, code expects {n}",
            frame.n_coded()
        )));
    }
    let size = c.size();
    let count = match (size as u128).checked_pow(m as u32) {
        Some(n) if n * n <= 1 << 22 => n as usize,
        _ => {
            return Err(PncError::InvalidParameter(format!(
                "enumeration over M={m} sources is too large"
            )))
        }
    };
    let rows = sample_rows(frame, params, c);

    // Precompute every source sequence and its codeword.
    let mut sources = Vec::with_capacity(count);
    let mut codewords = Vec::with_capacity(count);
    for idx in 0..count {
        let mut rem = idx;
        let mut digits = vec![0u8; m];
        for d in digits.iter_mut() {
            *d = (rem % size) as u8;
            rem /= size;
        }
        let s = SourcePacket::from_indices(digits);
        codewords.push(encode(&s, cfg, c).expect("length matches config"));
        sources.push(s);
    }

    let mut acc = vec![vec![0.0f64; size * size]; m];
    for (sa, xa) in sources.iter().zip(&codewords) {
        for (sb, xb) in sources.iter().zip(&codewords) {
            let mut like = 1.0f64;
            for (k, row) in rows.iter().enumerate() {
                if row.is_empty() {
                    continue;
                }
                let span = span_for(k, n);
                let a = span.a_pos.map_or(0, |p| xa.symbol(p));
                let b = span.b_pos.map_or(0, |p| xb.symbol(p));
                like *= row[a * size + b];
            }
            if like > 0.0 {
                for pos in 0..m {
                    acc[pos][sa.symbol(pos) * size + sb.symbol(pos)] += like;
                }
            }
        }
    }

    let mut decisions = Vec::with_capacity(m);
    let mut posts = Vec::with_capacity(m);
    for raw in acc {
        let pair = JointTable::from_raw(size, EdgeKind::Inner, &raw);
        let xor = crate::evidence::xor_posterior(&pair, c)?;
        decisions.push(xor.argmax() as u8);
        posts.push(xor);
    }
    Ok((decisions, posts))
}

/// Standard normal CDF by composite Simpson quadrature (no special
/// functions; accurate to well below 1e-10).
pub fn normal_cdf(x: f64) -> f64 {
    let ax = x.abs().min(9.0);
    let steps = 4000usize;
    let h = ax / steps as f64;
    let phi = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut sum = phi(0.0) + phi(ax);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * phi(h * i as f64);
    }
    let integral = sum * h / 3.0;
    if x >= 0.0 {
        0.5 + integral
    } else {
        0.5 - integral
    }
}

/// Exact XOR bit-error probability of the synchronous BPSK per-symbol rule,
/// by locating the decision threshold with bisection and integrating the
/// Gaussian decision regions.
pub fn sync_bpsk_ber_analytic(es_n0_db: f64) -> f64 {
    let v = 0.5 * 10f64.powf(-es_n0_db / 10.0);
    let sigma = v.sqrt();
    // Same-symbol likelihood minus different-symbol likelihood; positive
    // where the rule decides "same".
    let g = |y: f64| {
        (-(y - 2.0) * (y - 2.0) / (2.0 * v)).exp() + (-(y + 2.0) * (y + 2.0) / (2.0 * v)).exp()
            - 2.0 * (-y * y / (2.0 * v)).exp()
    };
    // Scan outward for a sign change (the rule decides "different" at the
    // origin and "same" far out), then bisect.
    let step = 0.05 * (1.0 + sigma);
    let mut lo = 0.0f64;
    let mut hi = lo + step;
    while g(hi) <= 0.0 {
        lo = hi;
        hi += step;
        debug_assert!(hi < 100.0, "no decision boundary found");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    // Error given the sources agree (received mean +-2): |y| <= t.
    let err_same = normal_cdf((t - 2.0) / sigma) - normal_cdf((-t - 2.0) / sigma);
    // Error given the sources differ (received mean 0): |y| > t.
    let err_diff = 2.0 * (1.0 - normal_cdf(t / sigma));
    0.5 * err_same + 0.5 * err_diff
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::transmit;
    use crate::rng::Xoshiro256StarStar;

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-12);
        assert!((normal_cdf(1.0) - 0.8413447460685429).abs() < 1e-9);
        assert!((normal_cdf(-1.0) - 0.15865525393145707).abs() < 1e-9);
        assert!((normal_cdf(2.0) - 0.9772498680518208).abs() < 1e-9);
    }

    #[test]
    fn analytic_sync_ber_is_sane() {
        // Must be monotone decreasing in SNR and match the known asymptotic
        // behavior loosely.
        let b0 = sync_bpsk_ber_analytic(0.0);
        let b7 = sync_bpsk_ber_analytic(7.0);
        let b10 = sync_bpsk_ber_analytic(10.0);
        assert!(b0 > b7 && b7 > b10);
        assert!(b0 < 0.5);
        assert!(b10 > 0.0);
    }

    #[test]
    fn exhaustive_posterior_normalizes_and_finds_truth_at_high_snr() {
        let c = Constellation::qpsk();
        let params = ChannelParams::new(0.5, 0.7, 25.0).unwrap();
        let mut rng = Xoshiro256StarStar::seed_from_u64(2);
        let xa = c.random_packet(3, &mut rng);
        let xb = c.random_packet(3, &mut rng);
        let frame = transmit(&xa, &xb, &c, &params, 8).unwrap();
        let posts = exhaustive_pair_posteriors(&frame, &params, &c).unwrap();
        assert_eq!(posts.len(), 3);
        for (n, p) in posts.iter().enumerate() {
            assert!((p.sum() - 1.0).abs() < 1e-9);
            let mut best = (0, 0);
            for a in 0..4 {
                for b in 0..4 {
                    if p.get(a, b) > p.get(best.0, best.1) {
                        best = (a, b);
                    }
                }
            }
            assert_eq!(
                best,
                (xa.symbol(n), xb.symbol(n)),
                "high-SNR argmax must be the transmitted pair"
            );
        }
    }

    #[test]
    fn joint_source_map_rejects_oversized_problems() {
        let c = Constellation::qpsk();
        let cfg = RaConfig::new(64, 3, 1).unwrap();
        let params = ChannelParams::new(0.5, 0.0, 10.0).unwrap();
        let mut rng = Xoshiro256StarStar::seed_from_u64(2);
        let xa = c.random_packet(192, &mut rng);
        let xb = c.random_packet(192, &mut rng);
        let frame = transmit(&xa, &xb, &c, &params, 8).unwrap();
        assert!(exhaustive_joint_source_map(&frame, &params, &c, &cfg).is_err());
    }
}
