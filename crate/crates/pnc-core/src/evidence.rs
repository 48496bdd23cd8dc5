//! Per-sample joint-likelihood tables and the XOR marginal.
//!
//! Each received sample is turned into a normalized table over the pair of
//! transmitter symbols it observes. Edge samples only observe one symbol;
//! their tables are kept in the full pair shape, uniform over the missing
//! coordinate, so downstream message passing never branches on shape.
//!
//! All tables live in the linear probability domain. Raw Gaussian exponents
//! are rescaled by their maximum before exponentiation so that tables stay
//! finite at arbitrarily high SNR, and every constructed table is normalized
//! to sum one. Constant prefactors of the sample density therefore never
//! need to be evaluated.

use num_complex::Complex64;

use crate::channel::{ChannelParams, ReceivedFrame};
use crate::constellation::Constellation;
use crate::error::{PncError, Result};

pub const MAX_ALPHABET: usize = 4;
pub const MAX_PAIR: usize = MAX_ALPHABET * MAX_ALPHABET;

/// Shape of a joint table with respect to the chain edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// Both symbols observed.
    Inner,
    /// First sample: only the A symbol is observed, table uniform over B.
    First,
    /// Last sample: only the B symbol is observed, table uniform over A.
    Last,
    /// Sample absent (synchronous frame straddle position).
    Absent,
}

/// Which of the two pair coordinates adjacent samples share.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SharedSymbol {
    A,
    B,
}

/// A nonnegative table over symbol pairs `(a, b)`, normalized to sum one
/// unless absent. Entry layout is `a * size + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointTable {
    size: usize,
    kind: EdgeKind,
    entries: [f64; MAX_PAIR],
}

impl JointTable {
    pub fn uniform(size: usize) -> Self {
        let mut entries = [0.0; MAX_PAIR];
        let v = 1.0 / (size * size) as f64;
        for a in 0..size {
            for b in 0..size {
                entries[a * size + b] = v;
            }
        }
        Self {
            size,
            kind: EdgeKind::Inner,
            entries,
        }
    }

    pub fn absent(size: usize) -> Self {
        Self {
            size,
            kind: EdgeKind::Absent,
            entries: [0.0; MAX_PAIR],
        }
    }

    /// Build from raw nonnegative values and normalize.
    pub fn from_raw(size: usize, kind: EdgeKind, raw: &[f64]) -> Self {
        debug_assert_eq!(raw.len(), size * size);
        let mut entries = [0.0; MAX_PAIR];
        entries[..raw.len()].copy_from_slice(raw);
        let mut t = Self {
            size,
            kind,
            entries,
        };
        t.normalize();
        t
    }

    /// Point mass at `(a, b)`.
    pub fn indicator(size: usize, a: usize, b: usize) -> Self {
        let mut entries = [0.0; MAX_PAIR];
        entries[a * size + b] = 1.0;
        Self {
            size,
            kind: EdgeKind::Inner,
            entries,
        }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn kind(&self) -> EdgeKind {
        self.kind
    }

    pub fn is_absent(&self) -> bool {
        self.kind == EdgeKind::Absent
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[a * self.size + b]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, v: f64) {
        self.entries[a * self.size + b] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries[..self.size * self.size]
    }

    pub fn sum(&self) -> f64 {
        self.entries[..self.size * self.size].iter().sum()
    }

    /// Rescale to sum one. An all-zero table (contradictory evidence in the
    /// zero-noise limit) falls back to uniform.
    pub fn normalize(&mut self) {
        let n = self.size * self.size;
        let s = self.sum();
        if s > 0.0 {
            for e in &mut self.entries[..n] {
                *e /= s;
            }
        } else {
            let v = 1.0 / n as f64;
            for e in &mut self.entries[..n] {
                *e = v;
            }
        }
    }

    /// Entrywise product, renormalized. The result is an inner table.
    pub fn product(&self, other: &JointTable) -> JointTable {
        debug_assert_eq!(self.size, other.size);
        let n = self.size * self.size;
        let mut entries = [0.0; MAX_PAIR];
        for i in 0..n {
            entries[i] = self.entries[i] * other.entries[i];
        }
        let mut t = JointTable {
            size: self.size,
            kind: EdgeKind::Inner,
            entries,
        };
        t.normalize();
        t
    }

    /// Marginal over B: `out[a] = sum_b t(a, b)`.
    pub fn marginal_a(&self) -> SymbolTable {
        let mut out = SymbolTable::zeros(self.size);
        for a in 0..self.size {
            let mut s = 0.0;
            for b in 0..self.size {
                s += self.get(a, b);
            }
            out.entries[a] = s;
        }
        out
    }

    /// Marginal over A: `out[b] = sum_a t(a, b)`.
    pub fn marginal_b(&self) -> SymbolTable {
        let mut out = SymbolTable::zeros(self.size);
        for b in 0..self.size {
            let mut s = 0.0;
            for a in 0..self.size {
                s += self.get(a, b);
            }
            out.entries[b] = s;
        }
        out
    }

    /// Pass the table through a compatibility constraint: keep the marginal
    /// of the shared coordinate and spread it uniformly over the other
    /// coordinate of the next pair node.
    pub fn through_compat(&self, shared: SharedSymbol) -> JointTable {
        let marg = match shared {
            SharedSymbol::A => self.marginal_a(),
            SharedSymbol::B => self.marginal_b(),
        };
        let mut out = JointTable::uniform(self.size);
        for a in 0..self.size {
            for b in 0..self.size {
                let v = match shared {
                    SharedSymbol::A => marg.entries[a],
                    SharedSymbol::B => marg.entries[b],
                };
                out.set(a, b, v);
            }
        }
        out.normalize();
        out
    }

    /// Largest absolute entry difference against another table.
    pub fn max_abs_diff(&self, other: &JointTable) -> f64 {
        let n = self.size * self.size;
        let mut d = 0.0f64;
        for i in 0..n {
            d = d.max((self.entries[i] - other.entries[i]).abs());
        }
        d
    }
}

/// A nonnegative table over single symbols, normalized to sum one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolTable {
    size: usize,
    entries: [f64; MAX_ALPHABET],
}

impl SymbolTable {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            entries: [0.0; MAX_ALPHABET],
        }
    }

    pub fn uniform(size: usize) -> Self {
        let mut t = Self::zeros(size);
        for e in &mut t.entries[..size] {
            *e = 1.0 / size as f64;
        }
        t
    }

    pub fn indicator(size: usize, s: usize) -> Self {
        let mut t = Self::zeros(size);
        t.entries[s] = 1.0;
        t
    }

    pub fn from_raw(size: usize, raw: &[f64]) -> Self {
        let mut t = Self::zeros(size);
        t.entries[..size].copy_from_slice(raw);
        t.normalize();
        t
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, s: usize) -> f64 {
        self.entries[s]
    }

    #[inline]
    pub fn set(&mut self, s: usize, v: f64) {
        self.entries[s] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries[..self.size]
    }

    pub fn sum(&self) -> f64 {
        self.entries[..self.size].iter().sum()
    }

    pub fn normalize(&mut self) {
        let s = self.sum();
        if s > 0.0 {
            for e in &mut self.entries[..self.size] {
                *e /= s;
            }
        } else {
            for e in &mut self.entries[..self.size] {
                *e = 1.0 / self.size as f64;
            }
        }
    }

    pub fn product(&self, other: &SymbolTable) -> SymbolTable {
        debug_assert_eq!(self.size, other.size);
        let mut t = Self::zeros(self.size);
        for i in 0..self.size {
            t.entries[i] = self.entries[i] * other.entries[i];
        }
        t.normalize();
        t
    }

    /// Index of the largest entry; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..self.size {
            if self.entries[i] > self.entries[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_abs_diff(&self, other: &SymbolTable) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.size {
            d = d.max((self.entries[i] - other.entries[i]).abs());
        }
        d
    }
}

/// Convert received sample `k` into a normalized joint table over the symbol
/// pair it observes.
///
/// An inner sample's entry is the two-component Gaussian likelihood of the
/// sample given means `point(a) + point(b) * e^{j phi}`; edge samples drop
/// the missing term and come out uniform over the unobserved coordinate.
/// Absent samples (synchronous straddle positions) yield an absent table.
pub fn evidence(
    frame: &ReceivedFrame,
    k: usize,
    params: &ChannelParams,
    c: &Constellation,
) -> Result<JointTable> {
    if k >= frame.len() {
        return Err(PncError::IndexOutOfRange {
            index: k,
            len: frame.len(),
        });
    }
    let Some(y) = frame.sample(k) else {
        return Ok(JointTable::absent(c.size()));
    };
    let span = frame.span(k);
    let kind = match (span.a_pos, span.b_pos) {
        (Some(_), Some(_)) => EdgeKind::Inner,
        (Some(_), None) => EdgeKind::First,
        (None, Some(_)) => EdgeKind::Last,
        (None, None) => unreachable!("every sample observes at least one symbol"),
    };
    Ok(evidence_for_sample(
        y,
        frame.variance(k),
        kind,
        params.rotation(),
        c,
    ))
}

/// Table construction from an explicit sample value and variance.
pub fn evidence_for_sample(
    y: Complex64,
    variance: f64,
    kind: EdgeKind,
    rotation: Complex64,
    c: &Constellation,
) -> JointTable {
    let size = c.size();
    let mut dist_sq = [0.0f64; MAX_PAIR];
    let mut min_d = f64::INFINITY;
    for a in 0..size {
        for b in 0..size {
            let mut mean = Complex64::new(0.0, 0.0);
            if kind != EdgeKind::Last {
                mean += c.point(a);
            }
            if kind != EdgeKind::First {
                mean += c.point(b) * rotation;
            }
            let d = (y - mean).norm_sqr();
            dist_sq[a * size + b] = d;
            min_d = min_d.min(d);
        }
    }
    let n = size * size;
    let mut raw = [0.0f64; MAX_PAIR];
    if variance > 0.0 {
        let inv = 1.0 / (2.0 * variance);
        for i in 0..n {
            raw[i] = (-(dist_sq[i] - min_d) * inv).exp();
        }
    } else {
        // Zero-noise limit: indicator over the nearest means.
        let tol = 1e-12 * (1.0 + min_d);
        for i in 0..n {
            raw[i] = if dist_sq[i] - min_d <= tol { 1.0 } else { 0.0 };
        }
    }
    JointTable::from_raw(size, kind, &raw[..n])
}

/// Distribution of the XOR of the pair: `out[s] = sum over (a, b) with
/// xor(a, b) = s of t(a, b)`. Only inner tables qualify; edge tables carry
/// no pair information.
pub fn xor_posterior(t: &JointTable, c: &Constellation) -> Result<SymbolTable> {
    if t.kind() != EdgeKind::Inner {
        return Err(PncError::EdgeTableRejected);
    }
    let size = t.size();
    let mut out = SymbolTable::zeros(size);
    for a in 0..size {
        for b in 0..size {
            let s = c.xor(a, b);
            out.entries[s] += t.get(a, b);
        }
    }
    out.normalize();
    Ok(out)
}
