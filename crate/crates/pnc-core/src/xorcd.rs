//! Disjoint channel decoding: per-symbol XOR posteriors of the coded
//! symbols first, then a conventional point-to-point RA decode over the
//! XOR alphabet.
//!
//! Stage 1 runs the exact chain decoder and collapses each pair posterior to
//! its XOR distribution; the pair structure is deliberately discarded, which
//! is what makes stage 2 a plain single-user decoder (and the pipeline
//! cheaper but weaker than the joint decoder). Stage 2 never feeds back into
//! stage 1.

use crate::channel::{ChannelParams, ReceivedFrame};
use crate::constellation::Constellation;
use crate::error::Result;
use crate::evidence::{xor_posterior, SymbolTable};
use crate::ra::{decode_xor, RaConfig};
use crate::upnc::pair_posteriors;

/// Output of the two-stage pipeline.
#[derive(Debug, Clone)]
pub struct XorCdResult {
    /// Decided `s_A (+) s_B` symbol indices.
    pub xor_sources: Vec<u8>,
    /// Stage-1 XOR tables of the coded symbols (stage 2's channel input).
    pub stage1_tables: Vec<SymbolTable>,
    /// Stage-2 per-source posteriors.
    pub posteriors: Vec<SymbolTable>,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Per-coded-symbol XOR posteriors `P(x_A[n] (+) x_B[n] | Y)`.
pub fn stage1(
    frame: &ReceivedFrame,
    params: &ChannelParams,
    c: &Constellation,
) -> Result<Vec<SymbolTable>> {
    let pairs = pair_posteriors(frame, params, c)?;
    pairs.iter().map(|p| xor_posterior(p, c)).collect()
}

/// RA decode of the stage-1 tables down to the XOR of the source packets.
pub fn stage2(
    tables: &[SymbolTable],
    cfg: &RaConfig,
    c: &Constellation,
    max_iters: usize,
    tol: f64,
) -> XorCdResult {
    let out = decode_xor(tables, cfg, c, max_iters, tol);
    XorCdResult {
        xor_sources: out.source.symbols().to_vec(),
        stage1_tables: tables.to_vec(),
        posteriors: out.posteriors,
        iterations_used: out.iterations,
        converged: out.converged,
    }
}

/// Full pipeline on one received frame.
pub fn decode_frame(
    frame: &ReceivedFrame,
    params: &ChannelParams,
    c: &Constellation,
    cfg: &RaConfig,
    max_iters: usize,
    tol: f64,
) -> Result<XorCdResult> {
    let tables = stage1(frame, params, c)?;
    Ok(stage2(&tables, cfg, c, max_iters, tol))
}
