//! Modulation alphabets, packets, and the XOR algebra the relay computes in.
//!
//! Symbols are handled as indices into a fixed alphabet order. The index
//! carries a Gray bit labeling (bit 0 maps to a positive component, bit 1 to
//! a negative component), which makes the relay's XOR a plain bitwise XOR of
//! the per-component sign bits.

use num_complex::Complex64;

use crate::error::{PncError, Result};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Modulation kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    Bpsk,
    Qpsk,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
        }
    }
}

impl std::fmt::Display for Modulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Modulation::Bpsk => write!(f, "bpsk"),
            Modulation::Qpsk => write!(f, "qpsk"),
        }
    }
}

/// A modulation alphabet of unit-energy complex points in a fixed order.
///
/// BPSK is `[+1, -1]`. QPSK is `[(1+j), (-1+j), (-1-j), (1-j)] / sqrt(2)`.
/// Index 0 is always the all-positive point, which is the identity of the
/// XOR algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    kind: Modulation,
    points: [Complex64; 4],
    size: usize,
}

impl Constellation {
    pub fn new(kind: Modulation) -> Self {
        match kind {
            Modulation::Bpsk => Self {
                kind,
                points: [
                    Complex64::new(1.0, 0.0),
                    Complex64::new(-1.0, 0.0),
                    Complex64::new(0.0, 0.0),
                    Complex64::new(0.0, 0.0),
                ],
                size: 2,
            },
            Modulation::Qpsk => Self {
                kind,
                points: [
                    Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
                    Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
                    Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
                    Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
                ],
                size: 4,
            },
        }
    }

    pub fn bpsk() -> Self {
        Self::new(Modulation::Bpsk)
    }

    pub fn qpsk() -> Self {
        Self::new(Modulation::Qpsk)
    }

    pub fn kind(&self) -> Modulation {
        self.kind
    }

    /// Number of alphabet points (2 or 4).
    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.kind.bits_per_symbol()
    }

    /// The complex point for a symbol index.
    #[inline]
    pub fn point(&self, index: usize) -> Complex64 {
        debug_assert!(index < self.size);
        self.points[index]
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points[..self.size]
    }

    /// Bit label of a symbol index, lowest bit first (real-part sign bit,
    /// then imaginary-part sign bit for QPSK). Bit 0 means positive.
    #[inline]
    pub fn bits_of(&self, index: usize) -> u8 {
        debug_assert!(index < self.size);
        match self.kind {
            Modulation::Bpsk => index as u8,
            // Index order (+,+), (-,+), (-,-), (+,-) maps to bit pairs
            // (re, im) = 00, 01, 11, 10 packed as re | im << 1.
            Modulation::Qpsk => [0b00, 0b01, 0b11, 0b10][index],
        }
    }

    /// Symbol index for a bit label (inverse of [`bits_of`](Self::bits_of)).
    #[inline]
    pub fn index_of_bits(&self, bits: u8) -> usize {
        match self.kind {
            Modulation::Bpsk => (bits & 1) as usize,
            Modulation::Qpsk => [0, 1, 3, 2][(bits & 0b11) as usize],
        }
    }

    /// XOR of two symbols at the index level: the symbol whose component
    /// signs are the products of the operands' component signs.
    #[inline]
    pub fn xor(&self, a: usize, b: usize) -> usize {
        self.index_of_bits(self.bits_of(a) ^ self.bits_of(b))
    }

    /// Number of differing label bits between two symbols (0..=2).
    #[inline]
    pub fn bit_distance(&self, a: usize, b: usize) -> u32 {
        (self.bits_of(a) ^ self.bits_of(b)).count_ones()
    }

    /// Map a bit sequence to a packet of symbol indices.
    ///
    /// BPSK consumes one bit per symbol; QPSK consumes two (first bit sets
    /// the real-part sign, second the imaginary-part sign; bit 0 is the
    /// positive component). QPSK rejects an odd bit count.
    pub fn modulate(&self, bits: &[u8]) -> Result<SourcePacket> {
        let bps = self.bits_per_symbol();
        if bits.len() % bps != 0 {
            return Err(PncError::OddBitCount(bits.len()));
        }
        let symbols = bits
            .chunks(bps)
            .map(|chunk| {
                let mut label = 0u8;
                for (i, &bit) in chunk.iter().enumerate() {
                    label |= (bit & 1) << i;
                }
                self.index_of_bits(label) as u8
            })
            .collect();
        Ok(SourcePacket { symbols })
    }

    /// Recover the bit sequence of a packet (inverse of `modulate`).
    pub fn demodulate_indices(&self, packet: &SourcePacket) -> Vec<u8> {
        let bps = self.bits_per_symbol();
        let mut bits = Vec::with_capacity(packet.len() * bps);
        for &s in &packet.symbols {
            let label = self.bits_of(s as usize);
            for i in 0..bps {
                bits.push((label >> i) & 1);
            }
        }
        bits
    }

    /// Draw a packet of `len` uniform symbols from a seeded stream.
    pub fn random_packet(&self, len: usize, rng: &mut crate::rng::Xoshiro256StarStar) -> SourcePacket {
        let symbols = (0..len).map(|_| rng.index(self.size) as u8).collect();
        SourcePacket { symbols }
    }
}

/// XOR of two alphabet points in the complex plane: the alphabet point whose
/// real and imaginary signs are the products of the operands' signs. For
/// BPSK this is the plain product `a * b`.
pub fn pnc_xor(a: Complex64, b: Complex64) -> Complex64 {
    if a.im == 0.0 && b.im == 0.0 {
        return Complex64::new(a.re * b.re, 0.0);
    }
    let re = (a.re * b.re).signum() * FRAC_1_SQRT_2;
    let im = (a.im * b.im).signum() * FRAC_1_SQRT_2;
    Complex64::new(re, im)
}

/// A packet of symbol indices into some constellation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourcePacket {
    symbols: Vec<u8>,
}

impl SourcePacket {
    pub fn from_indices(symbols: Vec<u8>) -> Self {
        Self { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    #[inline]
    pub fn symbol(&self, n: usize) -> usize {
        self.symbols[n] as usize
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    /// Symbolwise XOR of two equal-length packets.
    pub fn xor_with(&self, other: &SourcePacket, c: &Constellation) -> Result<SourcePacket> {
        if self.len() != other.len() {
            return Err(PncError::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        let symbols = self
            .symbols
            .iter()
            .zip(&other.symbols)
            .map(|(&a, &b)| c.xor(a as usize, b as usize) as u8)
            .collect();
        Ok(SourcePacket { symbols })
    }
}
