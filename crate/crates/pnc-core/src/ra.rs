//! Repeat-accumulate code: encoder and a standard point-to-point sum-product
//! decoder over XOR-symbol tables.
//!
//! Encoding repeats each source symbol `q` times, permutes the repeated
//! stream with a seeded interleaver, and runs the XOR accumulator
//! `x[n] = x[n-1] (+) s~[n]` with the all-positive point as initial state.
//! The XOR here is the componentwise sign product, so a QPSK codeword is two
//! independent binary accumulators (one per component).
//!
//! The interleaver is reproducible across implementations: a Fisher-Yates
//! shuffle of the identity permutation driven by xoshiro256** (seeded via
//! SplitMix64 from the config seed, see [`crate::rng`]), walking positions
//! from `n - 1` down to `1` and swapping with index `next() % (i + 1)`.
//! Seed 0 is reserved for the identity permutation.

use crate::constellation::{Constellation, SourcePacket};
use crate::error::{PncError, Result};
use crate::evidence::SymbolTable;
use crate::rng::Xoshiro256StarStar;

pub const DEFAULT_REPEAT: usize = 3;
pub const DEFAULT_MAX_ITERS: usize = 50;
pub const DEFAULT_TOL: f64 = 1e-6;

/// Repeat-accumulate code configuration shared by the end nodes and the
/// relay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaConfig {
    q: usize,
    m: usize,
    seed: u64,
    interleaver: Vec<u32>,
}

impl RaConfig {
    /// Build a config for `m` source symbols, repeat factor `q`, and the
    /// given interleaver seed.
    pub fn new(m: usize, q: usize, seed: u64) -> Result<Self> {
        if m == 0 || q == 0 {
            return Err(PncError::InvalidParameter(format!(
                "m and q must be positive, got m={m}, q={q}"
            )));
        }
        Ok(Self {
            q,
            m,
            seed,
            interleaver: make_interleaver(m, q, seed),
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Codeword length `N = q * m`.
    pub fn n(&self) -> usize {
        self.q * self.m
    }

    /// Code rate `1/q`.
    pub fn rate(&self) -> f64 {
        1.0 / self.q as f64
    }

    pub fn interleaver(&self) -> &[u32] {
        &self.interleaver
    }

    /// Source symbol feeding accumulator position `n`.
    #[inline]
    pub fn source_of(&self, n: usize) -> usize {
        self.interleaver[n] as usize / self.q
    }
}

/// Deterministic pseudo-random permutation of `{0 .. q*m}`.
///
/// Seed 0 returns the identity (test mode). Any other seed shuffles with the
/// documented Fisher-Yates / xoshiro256** procedure.
pub fn make_interleaver(m: usize, q: usize, seed: u64) -> Vec<u32> {
    let n = m * q;
    let mut perm: Vec<u32> = (0..n as u32).collect();
    if seed == 0 {
        return perm;
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = rng.index(i + 1);
        perm.swap(i, j);
    }
    perm
}

/// Repeat, interleave, and accumulate a source packet into a codeword.
pub fn encode(s: &SourcePacket, cfg: &RaConfig, c: &Constellation) -> Result<SourcePacket> {
    if s.len() != cfg.m() {
        return Err(PncError::LengthMismatch {
            left: s.len(),
            right: cfg.m(),
        });
    }
    let mut state = 0usize; // all-positive point
    let mut symbols = Vec::with_capacity(cfg.n());
    for n in 0..cfg.n() {
        state = c.xor(state, s.symbol(cfg.source_of(n)));
        symbols.push(state as u8);
    }
    Ok(SourcePacket::from_indices(symbols))
}

/// Decoder output: hard decisions plus the posteriors behind them.
#[derive(Debug, Clone)]
pub struct RaDecodeOutput {
    pub source: SourcePacket,
    pub posteriors: Vec<SymbolTable>,
    pub iterations: usize,
    pub converged: bool,
}

/// XOR convolution of two symbol tables: `out[s] = sum over u (+) v = s of
/// p(u) * q(v)`.
fn xor_convolve(p: &SymbolTable, q: &SymbolTable, c: &Constellation) -> SymbolTable {
    let size = p.size();
    let mut out = SymbolTable::zeros(size);
    for u in 0..size {
        let pu = p.get(u);
        if pu == 0.0 {
            continue;
        }
        for v in 0..size {
            let s = c.xor(u, v);
            out.set(s, out.get(s) + pu * q.get(v));
        }
    }
    out.normalize();
    out
}

/// Sum-product decoding of XOR-symbol channel tables over the RA graph.
///
/// `tables[n]` is the channel's normalized distribution of codeword symbol
/// `n`. Flooding schedule; stops when no source posterior entry moves by
/// more than `tol`, or at `max_iters`. Always returns a decision; the
/// `converged` flag marks truncated runs.
pub fn decode_xor(
    tables: &[SymbolTable],
    cfg: &RaConfig,
    c: &Constellation,
    max_iters: usize,
    tol: f64,
) -> RaDecodeOutput {
    let n = cfg.n();
    let m = cfg.m();
    let q = cfg.q();
    assert_eq!(tables.len(), n, "one channel table per codeword symbol");
    let size = c.size();
    let uniform = SymbolTable::uniform(size);
    let identity = SymbolTable::indicator(size, 0);

    // Check c_k ties x[k-1] (virtual identity for k = 0), the repeated
    // source symbol source_of(k), and x[k]. Source-side edge slots are
    // ordered by check index.
    let mut source_checks: Vec<Vec<usize>> = vec![Vec::with_capacity(q); m];
    for k in 0..n {
        source_checks[cfg.source_of(k)].push(k);
    }

    // Messages, all initialized uniform.
    let mut code_to_own = vec![uniform; n]; // x[k] -> c_k
    let mut code_to_next = vec![uniform; n]; // x[k] -> c_{k+1}
    let mut own_to_code = vec![uniform; n]; // c_k -> x[k]
    let mut next_to_code = vec![uniform; n]; // c_{k+1} -> x[k]
    let mut source_to_check = vec![uniform; n]; // s[source_of(k)] -> c_k
    let mut check_to_source = vec![uniform; n]; // c_k -> s[source_of(k)]

    let mut posteriors = vec![uniform; m];
    let mut iterations = 0;
    let mut converged = false;

    for iter in 0..max_iters {
        iterations = iter + 1;

        // Code variables to checks (extrinsic: evidence times the other
        // check's message).
        for k in 0..n {
            let has_next = k + 1 < n;
            code_to_own[k] = if has_next {
                tables[k].product(&next_to_code[k])
            } else {
                tables[k]
            };
            if has_next {
                code_to_next[k] = tables[k].product(&own_to_code[k]);
            }
        }

        // Source variables to checks: product of the other q - 1 incoming
        // messages.
        for checks in &source_checks {
            for &k in checks {
                let mut msg = SymbolTable::uniform(size);
                for &other in checks {
                    if other != k {
                        msg = msg.product(&check_to_source[other]);
                    }
                }
                source_to_check[k] = msg;
            }
        }

        // Checks to every neighbor: XOR-convolve the other two inputs.
        for k in 0..n {
            let prev = if k == 0 {
                &identity
            } else {
                &code_to_next[k - 1]
            };
            own_to_code[k] = xor_convolve(prev, &source_to_check[k], c);
            check_to_source[k] = xor_convolve(prev, &code_to_own[k], c);
            if k > 0 {
                next_to_code[k - 1] = xor_convolve(&code_to_own[k], &source_to_check[k], c);
            }
        }

        // Posteriors and convergence.
        let mut delta = 0.0f64;
        for (s, checks) in source_checks.iter().enumerate() {
            let mut post = SymbolTable::uniform(size);
            for &k in checks {
                post = post.product(&check_to_source[k]);
            }
            delta = delta.max(post.max_abs_diff(&posteriors[s]));
            posteriors[s] = post;
        }
        if delta < tol {
            converged = true;
            break;
        }
    }

    let symbols = posteriors.iter().map(|p| p.argmax() as u8).collect();
    RaDecodeOutput {
        source: SourcePacket::from_indices(symbols),
        posteriors,
        iterations,
        converged,
    }
}
