//! Exact sum-product decoding of an uncoded asynchronous frame.
//!
//! The `2N + 1` samples of a frame form a chain: adjacent samples observe
//! pairs that agree on one symbol (the straddle pair `(x_A[n], x_B[n-1])`
//! shares `x_A[n]` with the aligned pair `(x_A[n], x_B[n])`, which shares
//! `x_B[n]` with the next straddle pair). The chain is a tree, so one
//! message pass in each direction yields the exact joint posterior of every
//! aligned pair given the whole frame; the XOR decision is its grouped
//! argmax.
//!
//! Compatibility node `k` sits between sample nodes `k` and `k + 1`; shared
//! coordinate is A for even `k` and B for odd `k`. Messages are named by
//! their position relative to a compatibility node: `r_right[k]` enters node
//! `k` from the left, `q_right[k]` leaves it to the right, and the
//! leftward-bound `q_left[k]` / `r_left[k]` mirror them.

use num_complex::Complex64;

use crate::channel::{ChannelParams, ReceivedFrame};
use crate::constellation::Constellation;
use crate::error::{PncError, Result};
use crate::evidence::{evidence, xor_posterior, JointTable, SharedSymbol, SymbolTable};

/// One-pass chain messages, indexed by compatibility node `0..2N`.
#[derive(Debug, Clone)]
pub struct ChainMessages {
    pub q_right: Vec<JointTable>,
    pub r_right: Vec<JointTable>,
    pub q_left: Vec<JointTable>,
    pub r_left: Vec<JointTable>,
}

/// XOR decision for a whole frame.
#[derive(Debug, Clone)]
pub struct XorDecision {
    /// Decided XOR symbol indices, one per aligned pair.
    pub xor_symbols: Vec<u8>,
    /// The per-pair XOR posteriors behind the decisions.
    pub posteriors: Vec<SymbolTable>,
}

/// Shared coordinate at compatibility node `k`.
#[inline]
fn shared_at(k: usize) -> SharedSymbol {
    if k % 2 == 0 {
        SharedSymbol::A
    } else {
        SharedSymbol::B
    }
}

/// Run the two message passes over the chain.
///
/// `evidence` must hold the `2N + 1` per-sample tables of an asynchronous
/// frame; an absent table is an error here.
pub fn forward_backward(evidence: &[JointTable]) -> Result<ChainMessages> {
    let total = evidence.len();
    if total < 3 || total % 2 == 0 {
        return Err(PncError::ShapeMismatch(format!(
            "chain needs an odd number of samples >= 3, got {total}"
        )));
    }
    if let Some(k) = evidence.iter().position(|t| t.is_absent()) {
        return Err(PncError::AbsentSample(k));
    }
    let edges = total - 1;
    let size = evidence[0].size();
    let fill = JointTable::uniform(size);
    let mut q_right = vec![fill; edges];
    let mut r_right = vec![fill; edges];
    let mut q_left = vec![fill; edges];
    let mut r_left = vec![fill; edges];

    for k in 0..edges {
        r_right[k] = if k == 0 {
            evidence[0]
        } else {
            evidence[k].product(&q_right[k - 1])
        };
        q_right[k] = r_right[k].through_compat(shared_at(k));
    }
    for k in (0..edges).rev() {
        q_left[k] = if k == edges - 1 {
            evidence[total - 1]
        } else {
            evidence[k + 1].product(&r_left[k + 1])
        };
        r_left[k] = q_left[k].through_compat(shared_at(k));
    }

    Ok(ChainMessages {
        q_right,
        r_right,
        q_left,
        r_left,
    })
}

/// Exact joint posterior of the aligned pair `(x_A[n], x_B[n])` given the
/// whole frame: the evidence at the aligned sample times the incoming
/// message from each side.
pub fn joint_posterior(
    evidence: &[JointTable],
    msgs: &ChainMessages,
    n: usize,
) -> Result<JointTable> {
    let node = 2 * n + 1;
    if node + 1 >= evidence.len() {
        return Err(PncError::IndexOutOfRange {
            index: n,
            len: evidence.len() / 2,
        });
    }
    Ok(evidence[node]
        .product(&msgs.q_right[node - 1])
        .product(&msgs.r_left[node]))
}

/// Group each pair posterior by XOR value and take the argmax (ties resolve
/// to the lowest alphabet index).
pub fn decide_xor(posteriors: &[JointTable], c: &Constellation) -> Result<XorDecision> {
    let mut tables = Vec::with_capacity(posteriors.len());
    let mut symbols = Vec::with_capacity(posteriors.len());
    for p in posteriors {
        let t = xor_posterior(p, c)?;
        symbols.push(t.argmax() as u8);
        tables.push(t);
    }
    Ok(XorDecision {
        xor_symbols: symbols,
        posteriors: tables,
    })
}

/// Per-symbol decision rule for synchronous BPSK: compare the likelihood of
/// the same-symbol superpositions (means +-2) against the opposite-symbol
/// superposition (mean 0) on the real part of the sample. Returns the XOR
/// symbol index: 0 (+1) when the sources agree, 1 (-1) when they differ.
pub fn decide_sync(y: Complex64, params: &ChannelParams) -> usize {
    decide_sync_lane(y.re, 1.0, params.noise_variance())
}

/// One-dimensional form of the synchronous rule for a component lane whose
/// per-source amplitude is `amp` (1 for BPSK, 1/sqrt(2) for each QPSK
/// component): superposition means are `+-2 amp` and 0.
pub fn decide_sync_lane(y: f64, amp: f64, variance: f64) -> usize {
    let hi = 2.0 * amp;
    if variance == 0.0 {
        let same = (y - hi).abs().min((y + hi).abs());
        return if same <= y.abs() { 0 } else { 1 };
    }
    let inv = 1.0 / (2.0 * variance);
    let e_plus = -(y - hi) * (y - hi) * inv;
    let e_minus = -(y + hi) * (y + hi) * inv;
    let e_zero = -y * y * inv;
    let m = e_plus.max(e_minus).max(e_zero);
    let same = (e_plus - m).exp() + (e_minus - m).exp();
    let diff = 2.0 * (e_zero - m).exp();
    if same >= diff {
        0
    } else {
        1
    }
}

/// Per-pair joint posteriors of a frame (the full decoding pass minus the
/// XOR grouping). Synchronous frames have no chain coupling, so each aligned
/// sample's evidence already is the exact pair posterior.
pub fn pair_posteriors(
    frame: &ReceivedFrame,
    params: &ChannelParams,
    c: &Constellation,
) -> Result<Vec<JointTable>> {
    let n = frame.n_coded();
    if params.is_synchronous() {
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push(evidence(frame, 2 * i + 1, params, c)?);
        }
        return Ok(out);
    }
    let tables: Result<Vec<JointTable>> = (0..frame.len())
        .map(|k| evidence(frame, k, params, c))
        .collect();
    let tables = tables?;
    let msgs = forward_backward(&tables)?;
    (0..n).map(|i| joint_posterior(&tables, &msgs, i)).collect()
}

/// Full decode of an uncoded frame to its XOR packet.
pub fn decode_frame(
    frame: &ReceivedFrame,
    params: &ChannelParams,
    c: &Constellation,
) -> Result<XorDecision> {
    let posteriors = pair_posteriors(frame, params, c)?;
    decide_xor(&posteriors, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::transmit;
    use crate::evidence::EdgeKind;
    use crate::rng::Xoshiro256StarStar;

    fn table(raw: [f64; 4], kind: EdgeKind) -> JointTable {
        JointTable::from_raw(2, kind, &raw)
    }

    #[test]
    fn uniform_evidence_keeps_messages_uniform() {
        let evidence = vec![JointTable::uniform(4); 7];
        let msgs = forward_backward(&evidence).unwrap();
        let uniform = JointTable::uniform(4);
        for k in 0..6 {
            assert!(msgs.q_right[k].max_abs_diff(&uniform) < 1e-15);
            assert!(msgs.r_left[k].max_abs_diff(&uniform) < 1e-15);
        }
        for n in 0..3 {
            let p = joint_posterior(&evidence, &msgs, n).unwrap();
            assert!(p.max_abs_diff(&uniform) < 1e-15);
        }
    }

    #[test]
    fn three_node_chain_matches_hand_computation() {
        // BPSK, N = 1. Entry order is (a, b) = (+,+), (+,-), (-,+), (-,-).
        // First table from A-likelihoods (0.7, 0.3), inner table
        // (0.4, 0.1, 0.2, 0.3), last table from B-likelihoods (0.6, 0.4).
        let p0 = table([0.35, 0.35, 0.15, 0.15], EdgeKind::First);
        let p1 = table([0.4, 0.1, 0.2, 0.3], EdgeKind::Inner);
        let p2 = table([0.3, 0.2, 0.3, 0.2], EdgeKind::Last);
        let evidence = vec![p0, p1, p2];
        let msgs = forward_backward(&evidence).unwrap();

        // Worked by hand: q_right[0] replicates the A-marginal (0.7, 0.3).
        let expect_q0 = [0.35, 0.35, 0.15, 0.15];
        // r_right[1] = p1 * q_right[0], normalized by 0.25.
        let expect_r1 = [0.56, 0.14, 0.12, 0.18];
        // Leftward through the B-sharing node: B-marginal (0.6, 0.4).
        let expect_rl1 = [0.3, 0.2, 0.3, 0.2];
        // q_left[0] = p1 * r_left[1] normalized by 0.26.
        let expect_ql0 = [6.0 / 13.0, 1.0 / 13.0, 3.0 / 13.0, 3.0 / 13.0];
        // r_left[0] replicates its A-marginal (7/13, 6/13).
        let expect_rl0 = [7.0 / 26.0, 7.0 / 26.0, 3.0 / 13.0, 3.0 / 13.0];
        let checks = [
            (&msgs.q_right[0], expect_q0),
            (&msgs.r_right[1], expect_r1),
            (&msgs.r_left[1], expect_rl1),
            (&msgs.q_left[0], expect_ql0),
            (&msgs.r_left[0], expect_rl0),
        ];
        for (got, expect) in checks {
            for (i, &e) in expect.iter().enumerate() {
                assert!(
                    (got.entries()[i] - e).abs() < 1e-12,
                    "entry {i}: got {}, expected {e}",
                    got.entries()[i]
                );
            }
        }

        // Posterior = p1 * q_right[0] * r_left[1], normalized by 0.067.
        let post = joint_posterior(&evidence, &msgs, 0).unwrap();
        let expect_post = [42.0 / 67.0, 7.0 / 67.0, 9.0 / 67.0, 9.0 / 67.0];
        for (i, &e) in expect_post.iter().enumerate() {
            assert!((post.entries()[i] - e).abs() < 1e-12, "posterior entry {i}");
        }
    }

    #[test]
    fn indicator_evidence_propagates_certainty() {
        // Consistent certain assignment: every message and posterior stays
        // consistent with it.
        let c = Constellation::qpsk();
        let xa = [2usize, 0, 3];
        let xb = [1usize, 1, 2];
        let mut tables = Vec::new();
        for k in 0..7 {
            let span = crate::channel::span_for(k, 3);
            let mut raw = [0.0; 16];
            for a in 0..4 {
                for b in 0..4 {
                    let ok_a = span.a_pos.map_or(true, |p| xa[p] == a);
                    let ok_b = span.b_pos.map_or(true, |p| xb[p] == b);
                    if ok_a && ok_b {
                        raw[a * 4 + b] = 1.0;
                    }
                }
            }
            let kind = match (span.a_pos, span.b_pos) {
                (Some(_), Some(_)) => EdgeKind::Inner,
                (Some(_), None) => EdgeKind::First,
                _ => EdgeKind::Last,
            };
            tables.push(JointTable::from_raw(4, kind, &raw));
        }
        let msgs = forward_backward(&tables).unwrap();
        for n in 0..3 {
            let p = joint_posterior(&tables, &msgs, n).unwrap();
            assert!(
                (p.get(xa[n], xb[n]) - 1.0).abs() < 1e-12,
                "posterior {n} must be the indicator at the true pair"
            );
        }
        let decision = decide_xor(
            &(0..3)
                .map(|n| joint_posterior(&tables, &msgs, n).unwrap())
                .collect::<Vec<_>>(),
            &c,
        )
        .unwrap();
        for n in 0..3 {
            assert_eq!(decision.xor_symbols[n] as usize, c.xor(xa[n], xb[n]));
        }
    }

    #[test]
    fn second_pass_is_a_fixed_point() {
        let c = Constellation::qpsk();
        let params = ChannelParams::new(0.4, 0.9, 6.0).unwrap();
        let mut rng = Xoshiro256StarStar::seed_from_u64(11);
        let xa = c.random_packet(5, &mut rng);
        let xb = c.random_packet(5, &mut rng);
        let frame = transmit(&xa, &xb, &c, &params, 21).unwrap();
        let tables: Vec<JointTable> = (0..frame.len())
            .map(|k| evidence(&frame, k, &params, &c).unwrap())
            .collect();
        let once = forward_backward(&tables).unwrap();
        let twice = forward_backward(&tables).unwrap();
        for k in 0..tables.len() - 1 {
            assert!(once.q_right[k].max_abs_diff(&twice.q_right[k]) < 1e-12);
            assert!(once.r_left[k].max_abs_diff(&twice.r_left[k]) < 1e-12);
        }
    }

    #[test]
    fn marginals_agree_from_both_sides() {
        // The A-marginal of the aligned posterior must match the A-marginal
        // of the preceding straddle node's belief; both are exact marginals
        // of the same tree posterior.
        let c = Constellation::qpsk();
        let params = ChannelParams::new(0.3, 1.2, 5.0).unwrap();
        let mut rng = Xoshiro256StarStar::seed_from_u64(17);
        let xa = c.random_packet(4, &mut rng);
        let xb = c.random_packet(4, &mut rng);
        let frame = transmit(&xa, &xb, &c, &params, 33).unwrap();
        let tables: Vec<JointTable> = (0..frame.len())
            .map(|k| evidence(&frame, k, &params, &c).unwrap())
            .collect();
        let msgs = forward_backward(&tables).unwrap();
        for n in 0..4 {
            let aligned = joint_posterior(&tables, &msgs, n).unwrap();
            let node = 2 * n; // straddle node sharing x_A[n]
            let straddle = if node == 0 {
                tables[0].product(&msgs.r_left[0])
            } else {
                tables[node]
                    .product(&msgs.q_right[node - 1])
                    .product(&msgs.r_left[node])
            };
            let lhs = aligned.marginal_a();
            let rhs = straddle.marginal_a();
            assert!(lhs.max_abs_diff(&rhs) < 1e-9, "pair {n}");
        }
    }

    #[test]
    fn absent_evidence_is_rejected() {
        let mut tables = vec![JointTable::uniform(4); 5];
        tables[2] = JointTable::absent(4);
        assert_eq!(
            forward_backward(&tables).unwrap_err(),
            PncError::AbsentSample(2)
        );
    }

    #[test]
    fn decide_sync_examples() {
        let params = ChannelParams::new(0.0, 0.0, 3.0).unwrap();
        // y = 0: sources certainly differ.
        assert_eq!(decide_sync(Complex64::new(0.0, 0.0), &params), 1);
        // y = +-2 at small noise: sources agree.
        let quiet = ChannelParams::new(0.0, 0.0, 20.0).unwrap();
        assert_eq!(decide_sync(Complex64::new(2.0, 0.0), &quiet), 0);
        assert_eq!(decide_sync(Complex64::new(-2.0, 0.0), &quiet), 0);
    }

    #[test]
    fn decide_sync_matches_direct_evaluation() {
        // sigma^2 = 0.5 is es_n0_db = 10*log10(1/(2*0.5)) = 0 dB.
        let params = ChannelParams::new(0.0, 0.0, 0.0).unwrap();
        assert!((params.noise_variance() - 0.5).abs() < 1e-15);
        let y = 1.0;
        let lhs = (-(y - 2.0f64) * (y - 2.0) / 1.0).exp() + (-(y + 2.0f64) * (y + 2.0) / 1.0).exp();
        let rhs = 2.0 * (-y * y / 1.0_f64).exp();
        let expect = if lhs >= rhs { 0 } else { 1 };
        assert_eq!(expect, 1, "direct evaluation says the sources differ");
        assert_eq!(decide_sync(Complex64::new(y, 0.0), &params), expect);
    }

    #[test]
    fn synchronous_per_symbol_rule_matches_chain_path() {
        // With delta = 0 the per-sample XOR posterior argmax must reproduce
        // decide_sync on BPSK for every sample.
        let c = Constellation::bpsk();
        let params = ChannelParams::new(0.0, 0.0, 2.0).unwrap();
        let mut rng = Xoshiro256StarStar::seed_from_u64(4);
        for trial in 0..50 {
            let xa = c.random_packet(16, &mut rng);
            let xb = c.random_packet(16, &mut rng);
            let frame = transmit(&xa, &xb, &c, &params, 1000 + trial).unwrap();
            let decision = decode_frame(&frame, &params, &c).unwrap();
            for n in 0..16 {
                let y = frame.sample(2 * n + 1).unwrap();
                assert_eq!(
                    decision.xor_symbols[n] as usize,
                    decide_sync(y, &params),
                    "trial {trial}, symbol {n}"
                );
            }
        }
    }
}
