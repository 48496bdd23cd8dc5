//! Joint channel decoding and network coding on symbol pairs.
//!
//! The decoder runs loopy sum-product over the cascade of two graphs whose
//! variable nodes all hold symbol *pairs* `(x_A, x_B)`:
//!
//! * below the code layer, the oversampled chain of the uncoded decoder
//!   (evidence tables joined by compatibility constraints);
//! * above it, the repeat-accumulate graph, with accumulator check nodes
//!   enforcing the pairwise XOR constraint
//!   `x[k] = x[k-1] (+) s~[k]` componentwise on both packets, and source
//!   pair nodes of degree `q` wired through the interleaver.
//!
//! Check `k` ties the pair nodes `x[k-1]` (a constant all-positive pair for
//! `k = 0`), `x[k]`, and the source pair feeding position `k`. Messages
//! through a check are XOR convolutions of the other two inputs; messages
//! out of a pair node are normalized products of the node's other incoming
//! messages (evidence, chain neighbors, and the two check messages).
//!
//! One iteration updates, in order: rightward chain messages, leftward chain
//! messages, upward messages into checks and on to sources, then downward
//! messages from sources back through checks. Iteration stops when no source
//! posterior entry moves by more than `tol`, or at the iteration cap, in
//! which case the decision is still returned with `converged = false`.
//!
//! In synchronous mode the straddle samples do not exist: the chain edges
//! disappear and each aligned evidence table attaches directly to its code
//! pair node; everything above the code layer is unchanged.

use crate::channel::{ChannelParams, ReceivedFrame};
use crate::constellation::{Constellation, SourcePacket};
use crate::error::{PncError, Result};
use crate::evidence::{evidence, xor_posterior, JointTable, SharedSymbol, SymbolTable, MAX_PAIR};
use crate::ra::{encode, RaConfig};

/// Pairwise XOR lookup on pair indices: `pxor[i * 16 + j]` is the pair index
/// of the componentwise XOR of pairs `i` and `j`.
fn build_pair_xor(c: &Constellation) -> Vec<u8> {
    let k = c.size();
    let mut lut = vec![0u8; MAX_PAIR * MAX_PAIR];
    for au in 0..k {
        for bu in 0..k {
            for av in 0..k {
                for bv in 0..k {
                    let i = au * k + bu;
                    let j = av * k + bv;
                    let out = c.xor(au, av) * k + c.xor(bu, bv);
                    lut[i * MAX_PAIR + j] = out as u8;
                }
            }
        }
    }
    lut
}

/// XOR convolution of two pair tables through a check node.
fn pair_xor_convolve(u: &JointTable, v: &JointTable, pxor: &[u8]) -> JointTable {
    let k = u.size();
    let n = k * k;
    let mut raw = [0.0f64; MAX_PAIR];
    let ue = u.entries();
    let ve = v.entries();
    for (i, &uv) in ue.iter().enumerate() {
        if uv == 0.0 {
            continue;
        }
        let row = &pxor[i * MAX_PAIR..i * MAX_PAIR + n];
        for (j, &vv) in ve.iter().enumerate() {
            raw[row[j] as usize] += uv * vv;
        }
    }
    JointTable::from_raw(k, crate::evidence::EdgeKind::Inner, &raw[..n])
}

/// The wired decoding graph plus its message workspace.
#[derive(Debug, Clone)]
pub struct JointGraph {
    cfg: RaConfig,
    size: usize,
    sync: bool,
    pxor: Vec<u8>,
    /// Checks attached to each source pair node, in check order.
    source_checks: Vec<Vec<usize>>,

    // Evidence: aligned tables always, straddle tables in async mode.
    ev_aligned: Vec<JointTable>,
    ev_straddle: Vec<JointTable>,

    // Chain messages into each aligned node (async mode).
    chain_from_left: Vec<JointTable>,
    chain_from_right: Vec<JointTable>,

    // Code pair node `k` talks to check `k` (it is the accumulator output
    // there) and check `k + 1` (it is the previous state there).
    up_own: Vec<JointTable>,
    up_next: Vec<JointTable>,
    down_own: Vec<JointTable>,
    down_next: Vec<JointTable>,

    // Check <-> source messages, indexed by check.
    check_to_source: Vec<JointTable>,
    source_to_check: Vec<JointTable>,

    posteriors: Vec<JointTable>,
    loaded: bool,
}

/// Decision for one decoded frame.
#[derive(Debug, Clone)]
pub struct JointDecision {
    /// Decided `s_A (+) s_B` symbol indices, one per source position.
    pub xor_sources: Vec<u8>,
    /// XOR posteriors behind the decisions.
    pub posteriors: Vec<SymbolTable>,
    /// Full pair posteriors of the source nodes.
    pub pair_posteriors: Vec<JointTable>,
    pub iterations_used: usize,
    pub converged: bool,
}

impl JointGraph {
    /// Wire the graph for a code configuration and modulation.
    ///
    /// `sync` selects the synchronous variant without straddle samples.
    pub fn build(cfg: &RaConfig, c: &Constellation, sync: bool) -> Self {
        let n = cfg.n();
        let m = cfg.m();
        let size = c.size();
        let uniform = JointTable::uniform(size);
        let mut source_checks: Vec<Vec<usize>> = vec![Vec::with_capacity(cfg.q()); m];
        for k in 0..n {
            source_checks[cfg.source_of(k)].push(k);
        }
        Self {
            cfg: cfg.clone(),
            size,
            sync,
            pxor: build_pair_xor(c),
            source_checks,
            ev_aligned: vec![uniform; n],
            ev_straddle: if sync { Vec::new() } else { vec![uniform; n + 1] },
            chain_from_left: vec![uniform; n],
            chain_from_right: vec![uniform; n],
            up_own: vec![uniform; n],
            up_next: vec![uniform; n],
            down_own: vec![uniform; n],
            down_next: vec![uniform; n],
            check_to_source: vec![uniform; n],
            source_to_check: vec![uniform; n],
            posteriors: vec![uniform; m],
            loaded: false,
        }
    }

    pub fn is_sync(&self) -> bool {
        self.sync
    }

    pub fn config(&self) -> &RaConfig {
        &self.cfg
    }

    /// Number of evidence nodes the graph consumes.
    pub fn evidence_count(&self) -> usize {
        if self.sync {
            self.cfg.n()
        } else {
            2 * self.cfg.n() + 1
        }
    }

    /// How many checks a code pair node touches (the accumulator tail only
    /// feeds one check).
    pub fn code_degree(&self, k: usize) -> usize {
        if k + 1 < self.cfg.n() {
            2
        } else {
            1
        }
    }

    /// How many checks a source pair node touches.
    pub fn source_degree(&self, m: usize) -> usize {
        self.source_checks[m].len()
    }

    /// Checks wired to source node `m`, in ascending order.
    pub fn checks_of_source(&self, m: usize) -> &[usize] {
        &self.source_checks[m]
    }

    /// Load per-sample evidence from a received frame.
    pub fn load_frame(
        &mut self,
        frame: &ReceivedFrame,
        params: &ChannelParams,
        c: &Constellation,
    ) -> Result<()> {
        let n = self.cfg.n();
        if frame.n_coded() != n {
            return Err(PncError::ShapeMismatch(format!(
                "frame carries {} symbols, code expects {}",
                frame.n_coded(),
                n
            )));
        }
        if params.is_synchronous() != self.sync {
            return Err(PncError::ShapeMismatch(
                "frame synchrony does not match the graph mode".into(),
            ));
        }
        for i in 0..n {
            self.ev_aligned[i] = evidence(frame, 2 * i + 1, params, c)?;
        }
        if !self.sync {
            for i in 0..=n {
                let t = evidence(frame, 2 * i, params, c)?;
                if t.is_absent() {
                    return Err(PncError::AbsentSample(2 * i));
                }
                self.ev_straddle[i] = t;
            }
        }
        self.reset_messages();
        Ok(())
    }

    /// Inject evidence tables directly (testing and oracle comparisons).
    /// `tables` is the full sample sequence: `2N + 1` tables in async mode,
    /// `N` aligned tables in sync mode.
    pub fn load_tables(&mut self, tables: &[JointTable]) -> Result<()> {
        let n = self.cfg.n();
        if self.sync {
            if tables.len() != n {
                return Err(PncError::ShapeMismatch(format!(
                    "sync graph expects {n} aligned tables, got {}",
                    tables.len()
                )));
            }
            self.ev_aligned.copy_from_slice(tables);
        } else {
            if tables.len() != 2 * n + 1 {
                return Err(PncError::ShapeMismatch(format!(
                    "async graph expects {} tables, got {}",
                    2 * n + 1,
                    tables.len()
                )));
            }
            for i in 0..n {
                self.ev_aligned[i] = tables[2 * i + 1];
            }
            for i in 0..=n {
                self.ev_straddle[i] = tables[2 * i];
            }
        }
        self.reset_messages();
        Ok(())
    }

    fn reset_messages(&mut self) {
        let uniform = JointTable::uniform(self.size);
        for v in [
            &mut self.chain_from_left,
            &mut self.chain_from_right,
            &mut self.up_own,
            &mut self.up_next,
            &mut self.down_own,
            &mut self.down_next,
            &mut self.check_to_source,
            &mut self.source_to_check,
        ] {
            v.fill(uniform);
        }
        self.posteriors.fill(uniform);
        self.loaded = true;
    }

    /// Message out of code node `k`, excluding the contribution that
    /// arrived over the excluded edge (standard extrinsic rule).
    fn code_extrinsic(&self, k: usize, exclude: Exclude) -> JointTable {
        let mut t = self.ev_aligned[k];
        if !self.sync {
            if exclude != Exclude::ChainLeft {
                t = t.product(&self.chain_from_left[k]);
            }
            if exclude != Exclude::ChainRight {
                t = t.product(&self.chain_from_right[k]);
            }
        }
        if exclude != Exclude::OwnCheck {
            t = t.product(&self.down_own[k]);
        }
        if exclude != Exclude::NextCheck && k + 1 < self.cfg.n() {
            t = t.product(&self.down_next[k]);
        }
        t
    }

    /// Run the four-phase schedule until the source posteriors converge.
    pub fn iterate(&mut self, max_iters: usize, tol: f64, c: &Constellation) -> JointDecision {
        assert!(self.loaded, "load evidence before iterating");
        let n = self.cfg.n();
        let identity = JointTable::indicator(self.size, 0, 0);
        let mut iterations = 0;
        let mut converged = false;

        for iter in 0..max_iters {
            iterations = iter + 1;

            if !self.sync {
                // Phase 1: rightward chain messages, left to right. Between
                // aligned nodes k and k+1 sit two compatibility constraints
                // (B-sharing, then A-sharing) and the straddle evidence.
                let mut incoming = self.ev_straddle[0].through_compat(SharedSymbol::A);
                for k in 0..n {
                    self.chain_from_left[k] = incoming;
                    if k + 1 < n {
                        let out = self.code_extrinsic(k, Exclude::ChainRight);
                        let mid = out.through_compat(SharedSymbol::B);
                        incoming = self.ev_straddle[k + 1]
                            .product(&mid)
                            .through_compat(SharedSymbol::A);
                    }
                }
                // Phase 2: leftward chain messages, right to left.
                let mut incoming = self.ev_straddle[n].through_compat(SharedSymbol::B);
                for k in (0..n).rev() {
                    self.chain_from_right[k] = incoming;
                    if k > 0 {
                        let out = self.code_extrinsic(k, Exclude::ChainLeft);
                        let mid = out.through_compat(SharedSymbol::A);
                        incoming = self.ev_straddle[k]
                            .product(&mid)
                            .through_compat(SharedSymbol::B);
                    }
                }
            }

            // Phase 3: upward. Code nodes into their checks, checks up to
            // the sources.
            for k in 0..n {
                self.up_own[k] = self.code_extrinsic(k, Exclude::OwnCheck);
                if k + 1 < n {
                    self.up_next[k] = self.code_extrinsic(k, Exclude::NextCheck);
                }
            }
            for k in 0..n {
                let prev = if k == 0 { &identity } else { &self.up_next[k - 1] };
                self.check_to_source[k] = pair_xor_convolve(prev, &self.up_own[k], &self.pxor);
            }

            // Phase 4: downward. Sources to checks, checks back to code
            // nodes.
            for checks in &self.source_checks {
                for &k in checks {
                    let mut msg = JointTable::uniform(self.size);
                    for &other in checks {
                        if other != k {
                            msg = msg.product(&self.check_to_source[other]);
                        }
                    }
                    self.source_to_check[k] = msg;
                }
            }
            for k in 0..n {
                let prev = if k == 0 { &identity } else { &self.up_next[k - 1] };
                self.down_own[k] = pair_xor_convolve(prev, &self.source_to_check[k], &self.pxor);
                if k > 0 {
                    self.down_next[k - 1] =
                        pair_xor_convolve(&self.up_own[k], &self.source_to_check[k], &self.pxor);
                }
            }

            // Source posteriors and the convergence test.
            let mut delta = 0.0f64;
            for (m, checks) in self.source_checks.iter().enumerate() {
                let mut post = JointTable::uniform(self.size);
                for &k in checks {
                    post = post.product(&self.check_to_source[k]);
                }
                delta = delta.max(post.max_abs_diff(&self.posteriors[m]));
                self.posteriors[m] = post;
            }
            if delta < tol {
                converged = true;
                break;
            }
        }

        let mut xor_tables = Vec::with_capacity(self.posteriors.len());
        let mut xor_sources = Vec::with_capacity(self.posteriors.len());
        for p in &self.posteriors {
            let t = xor_posterior(p, c).expect("source posteriors are inner tables");
            xor_sources.push(t.argmax() as u8);
            xor_tables.push(t);
        }
        JointDecision {
            xor_sources,
            posteriors: xor_tables,
            pair_posteriors: self.posteriors.clone(),
            iterations_used: iterations,
            converged,
        }
    }

    /// Load a frame and decode it.
    pub fn decode(
        &mut self,
        frame: &ReceivedFrame,
        params: &ChannelParams,
        c: &Constellation,
        max_iters: usize,
        tol: f64,
    ) -> Result<JointDecision> {
        self.load_frame(frame, params, c)?;
        Ok(self.iterate(max_iters, tol, c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Exclude {
    ChainLeft,
    ChainRight,
    OwnCheck,
    NextCheck,
}

/// Re-encode the decided XOR source packet into the relay's broadcast
/// codeword.
pub fn relay_output(
    d: &JointDecision,
    cfg: &RaConfig,
    c: &Constellation,
) -> Result<SourcePacket> {
    encode(
        &SourcePacket::from_indices(d.xor_sources.clone()),
        cfg,
        c,
    )
}

/// One-shot decode with a freshly built graph.
pub fn decode_frame(
    frame: &ReceivedFrame,
    params: &ChannelParams,
    c: &Constellation,
    cfg: &RaConfig,
    max_iters: usize,
    tol: f64,
) -> Result<JointDecision> {
    let mut g = JointGraph::build(cfg, c, params.is_synchronous());
    g.decode(frame, params, c, max_iters, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::transmit;
    use crate::ra::{DEFAULT_MAX_ITERS, DEFAULT_TOL};
    use crate::rng::Xoshiro256StarStar;

    #[test]
    fn structure_counts_match_the_layout() {
        let c = Constellation::qpsk();
        let cfg = RaConfig::new(1, 3, 0).unwrap();
        let g = JointGraph::build(&cfg, &c, false);
        assert_eq!(g.evidence_count(), 7);
        assert_eq!(cfg.n(), 3);
        // Identity interleaver: source m feeds checks 3m, 3m+1, 3m+2.
        let cfg = RaConfig::new(3, 3, 0).unwrap();
        let g = JointGraph::build(&cfg, &c, false);
        for m in 0..3 {
            assert_eq!(g.checks_of_source(m), &[3 * m, 3 * m + 1, 3 * m + 2]);
        }
    }

    #[test]
    fn degrees_audit_over_random_configs() {
        let c = Constellation::qpsk();
        for seed in 1..20u64 {
            let m = 1 + (seed as usize % 7);
            let q = 2 + (seed as usize % 3);
            let cfg = RaConfig::new(m, q, seed).unwrap();
            let g = JointGraph::build(&cfg, &c, false);
            for k in 0..cfg.n() {
                let expect = if k + 1 < cfg.n() { 2 } else { 1 };
                assert_eq!(g.code_degree(k), expect, "code node {k}");
            }
            for s in 0..m {
                assert_eq!(g.source_degree(s), q, "source node {s}");
            }
        }
    }

    #[test]
    fn pair_xor_convolution_sum_and_symmetry() {
        let c = Constellation::qpsk();
        let pxor = build_pair_xor(&c);
        let mut rng = Xoshiro256StarStar::seed_from_u64(5);
        for _ in 0..20 {
            let raw_u: Vec<f64> = (0..16).map(|_| (rng.next() % 100) as f64 + 1.0).collect();
            let raw_v: Vec<f64> = (0..16).map(|_| (rng.next() % 100) as f64 + 1.0).collect();
            let u = JointTable::from_raw(4, crate::evidence::EdgeKind::Inner, &raw_u);
            let v = JointTable::from_raw(4, crate::evidence::EdgeKind::Inner, &raw_v);
            let uv = pair_xor_convolve(&u, &v, &pxor);
            let vu = pair_xor_convolve(&v, &u, &pxor);
            assert!(uv.max_abs_diff(&vu) < 1e-14, "check must be symmetric");
            assert!((uv.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn indicator_through_check_is_a_permutation() {
        // Convolving with a point mass relabels the other input losslessly.
        let c = Constellation::qpsk();
        let pxor = build_pair_xor(&c);
        let mut rng = Xoshiro256StarStar::seed_from_u64(9);
        let raw: Vec<f64> = (0..16).map(|_| (rng.next() % 100) as f64 + 1.0).collect();
        let v = JointTable::from_raw(4, crate::evidence::EdgeKind::Inner, &raw);
        for a in 0..4 {
            for b in 0..4 {
                let u = JointTable::indicator(4, a, b);
                let out = pair_xor_convolve(&u, &v, &pxor);
                for av in 0..4 {
                    for bv in 0..4 {
                        let expect = v.get(av, bv);
                        let got = out.get(c.xor(a, av), c.xor(b, bv));
                        assert!((expect - got).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn noiseless_decode_recovers_xor_sources_quickly() {
        for (c, phi) in [
            (Constellation::bpsk(), 0.0),
            (Constellation::qpsk(), std::f64::consts::FRAC_PI_4),
        ] {
            let cfg = RaConfig::new(6, 3, 21).unwrap();
            let params = ChannelParams::new(0.5, phi, f64::INFINITY).unwrap();
            let mut rng = Xoshiro256StarStar::seed_from_u64(3);
            let sa = c.random_packet(6, &mut rng);
            let sb = c.random_packet(6, &mut rng);
            let xa = encode(&sa, &cfg, &c).unwrap();
            let xb = encode(&sb, &cfg, &c).unwrap();
            let frame = transmit(&xa, &xb, &c, &params, 70).unwrap();
            let d = decode_frame(&frame, &params, &c, &cfg, DEFAULT_MAX_ITERS, DEFAULT_TOL).unwrap();
            let truth = sa.xor_with(&sb, &c).unwrap();
            assert_eq!(d.xor_sources, truth.symbols());
            assert!(d.converged);
            assert!(
                d.iterations_used <= 2,
                "noiseless indicators must settle immediately, took {}",
                d.iterations_used
            );
        }
    }

    #[test]
    fn uniform_evidence_keeps_source_posteriors_uniform() {
        let c = Constellation::qpsk();
        let cfg = RaConfig::new(4, 3, 17).unwrap();
        let mut g = JointGraph::build(&cfg, &c, false);
        g.load_tables(&vec![JointTable::uniform(4); 2 * cfg.n() + 1])
            .unwrap();
        let d = g.iterate(3, 0.0, &c);
        let uniform = JointTable::uniform(4);
        for p in &d.pair_posteriors {
            assert!(p.max_abs_diff(&uniform) < 1e-12);
        }
    }

    #[test]
    fn relay_output_reencodes_the_decision() {
        let c = Constellation::qpsk();
        let cfg = RaConfig::new(5, 3, 33).unwrap();
        let params = ChannelParams::new(0.5, 0.4, f64::INFINITY).unwrap();
        let mut rng = Xoshiro256StarStar::seed_from_u64(31);
        let sa = c.random_packet(5, &mut rng);
        let sb = c.random_packet(5, &mut rng);
        let xa = encode(&sa, &cfg, &c).unwrap();
        let xb = encode(&sb, &cfg, &c).unwrap();
        let frame = transmit(&xa, &xb, &c, &params, 70).unwrap();
        let d = decode_frame(&frame, &params, &c, &cfg, DEFAULT_MAX_ITERS, DEFAULT_TOL).unwrap();
        let out = relay_output(&d, &cfg, &c).unwrap();
        // Noiseless decode re-encodes to the XOR of the transmitted
        // codewords, by linearity.
        assert_eq!(out, xa.xor_with(&xb, &c).unwrap());
    }

    #[test]
    fn sync_mode_decodes_aligned_frames() {
        let c = Constellation::qpsk();
        let cfg = RaConfig::new(6, 3, 55).unwrap();
        let params = ChannelParams::new(0.0, std::f64::consts::FRAC_PI_4, f64::INFINITY).unwrap();
        let mut rng = Xoshiro256StarStar::seed_from_u64(41);
        let sa = c.random_packet(6, &mut rng);
        let sb = c.random_packet(6, &mut rng);
        let xa = encode(&sa, &cfg, &c).unwrap();
        let xb = encode(&sb, &cfg, &c).unwrap();
        let frame = transmit(&xa, &xb, &c, &params, 71).unwrap();
        let d = decode_frame(&frame, &params, &c, &cfg, DEFAULT_MAX_ITERS, DEFAULT_TOL).unwrap();
        assert_eq!(d.xor_sources, sa.xor_with(&sb, &c).unwrap().symbols());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let c = Constellation::qpsk();
        let cfg = RaConfig::new(4, 3, 1).unwrap();
        let params = ChannelParams::new(0.5, 0.2, 10.0).unwrap();
        let mut rng = Xoshiro256StarStar::seed_from_u64(1);
        let xa = c.random_packet(9, &mut rng);
        let xb = c.random_packet(9, &mut rng);
        let frame = transmit(&xa, &xb, &c, &params, 5).unwrap();
        let mut g = JointGraph::build(&cfg, &c, false);
        assert!(matches!(
            g.decode(&frame, &params, &c, 10, 1e-6),
            Err(PncError::ShapeMismatch(_))
        ));
    }
}
