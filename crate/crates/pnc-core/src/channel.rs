//! Uplink channel model: two packets superimposed with symbol offset `delta`
//! and phase offset `phi`, observed at the relay through matched filtering
//! and oversampling.
//!
//! For an N-symbol packet pair the relay sees `2N + 1` samples. With packets
//! indexed from 0 and samples indexed from 0:
//!
//! * even sample `2n` straddles two symbol periods and carries
//!   `x_A[n] + x_B[n-1] * e^{j phi}` with per-component noise variance
//!   `sigma^2 / delta` (the `x_B` term is absent for `n = 0`),
//! * odd sample `2n + 1` covers the aligned segment and carries
//!   `x_A[n] + x_B[n] * e^{j phi}` with variance `sigma^2 / (1 - delta)`,
//! * the final sample `2N` carries only `x_B[N-1] * e^{j phi}` with
//!   variance `sigma^2 / delta`,
//!
//! where `sigma^2 = N0 / (2P)` and symbol powers are normalized to `P = 1`.
//! When `delta` is below `sync_epsilon` the straddle segments shrink to zero
//! width, their variance diverges, and the frame keeps only the aligned
//! samples (the synchronous special case).

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::constellation::{Constellation, SourcePacket};
use crate::error::{PncError, Result};
use crate::rng::Xoshiro256StarStar;

pub const DEFAULT_SYNC_EPSILON: f64 = 1e-6;

/// Uplink asynchrony and noise parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Symbol offset in units of the symbol duration, in `[0, 1)`.
    pub delta: f64,
    /// Carrier-phase offset in radians, in `[0, 2*pi)`.
    pub phi: f64,
    /// Per-symbol SNR in dB (symbol power is normalized to one unit).
    pub es_n0_db: f64,
    /// Offsets below this are treated as perfectly synchronous.
    pub sync_epsilon: f64,
}

impl ChannelParams {
    pub fn new(delta: f64, phi: f64, es_n0_db: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&delta) {
            return Err(PncError::InvalidParameter(format!(
                "delta must be in [0, 1), got {delta}"
            )));
        }
        if !(0.0..std::f64::consts::TAU).contains(&phi) {
            return Err(PncError::InvalidParameter(format!(
                "phi must be in [0, 2*pi), got {phi}"
            )));
        }
        Ok(Self {
            delta,
            phi,
            es_n0_db,
            sync_epsilon: DEFAULT_SYNC_EPSILON,
        })
    }

    /// Per-component noise variance `sigma^2 = N0 / (2P)` of an aligned
    /// full-width sample. Zero when `es_n0_db` is infinite.
    pub fn noise_variance(&self) -> f64 {
        if self.es_n0_db.is_infinite() && self.es_n0_db > 0.0 {
            0.0
        } else {
            0.5 * 10f64.powf(-self.es_n0_db / 10.0)
        }
    }

    /// Whether the offset is small enough to use the synchronous model.
    pub fn is_synchronous(&self) -> bool {
        self.delta < self.sync_epsilon
    }

    pub fn rotation(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.phi)
    }
}

/// Which packet symbols a sample observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSpan {
    /// Position in packet A, if the sample overlaps A.
    pub a_pos: Option<usize>,
    /// Position in packet B, if the sample overlaps B.
    pub b_pos: Option<usize>,
}

/// The relay's oversampled observations of one superimposed packet pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    samples: Vec<Option<Complex64>>,
    variances: Vec<f64>,
    n_coded: usize,
}

impl ReceivedFrame {
    /// Number of transmitted symbols per packet.
    pub fn n_coded(&self) -> usize {
        self.n_coded
    }

    /// Total sample positions, present or absent (always `2N + 1`).
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The sample at position `k`, or `None` if it is absent (synchronous
    /// frames have no straddle samples).
    pub fn sample(&self, k: usize) -> Option<Complex64> {
        self.samples.get(k).copied().flatten()
    }

    /// Per-component noise variance at position `k` (infinite for absent
    /// samples).
    pub fn variance(&self, k: usize) -> f64 {
        self.variances[k]
    }

    pub fn is_absent(&self, k: usize) -> bool {
        self.samples[k].is_none()
    }

    /// Which packet positions sample `k` observes.
    pub fn span(&self, k: usize) -> SampleSpan {
        span_for(k, self.n_coded)
    }

    /// Build a frame directly from samples and variances (test injection and
    /// reference computations).
    pub fn from_parts(
        samples: Vec<Option<Complex64>>,
        variances: Vec<f64>,
        n_coded: usize,
    ) -> Result<Self> {
        if samples.len() != 2 * n_coded + 1 || variances.len() != samples.len() {
            return Err(PncError::ShapeMismatch(format!(
                "frame for N={} needs {} samples, got {}/{} variances",
                n_coded,
                2 * n_coded + 1,
                samples.len(),
                variances.len()
            )));
        }
        Ok(Self {
            samples,
            variances,
            n_coded,
        })
    }
}

/// Packet positions observed by sample `k` of a frame with `n` symbols.
pub fn span_for(k: usize, n: usize) -> SampleSpan {
    debug_assert!(k < 2 * n + 1);
    if k == 2 * n {
        SampleSpan {
            a_pos: None,
            b_pos: Some(n - 1),
        }
    } else if k % 2 == 0 {
        SampleSpan {
            a_pos: Some(k / 2),
            b_pos: (k >= 2).then(|| k / 2 - 1),
        }
    } else {
        SampleSpan {
            a_pos: Some(k / 2),
            b_pos: Some(k / 2),
        }
    }
}

/// Noise-free mean of sample `k` for transmitted packets `xa`, `xb`.
pub fn sample_mean(
    k: usize,
    xa: &SourcePacket,
    xb: &SourcePacket,
    c: &Constellation,
    rot: Complex64,
) -> Complex64 {
    let span = span_for(k, xa.len());
    let mut mean = Complex64::new(0.0, 0.0);
    if let Some(a) = span.a_pos {
        mean += c.point(xa.symbol(a));
    }
    if let Some(b) = span.b_pos {
        mean += c.point(xb.symbol(b)) * rot;
    }
    mean
}

/// Superimpose two packets over the asynchronous uplink and sample the
/// result at the relay.
///
/// The same `(xa, xb, params, seed)` always produces the same frame. In
/// synchronous mode (`delta < sync_epsilon`) straddle samples are absent and
/// only the `N` aligned samples carry signal.
pub fn transmit(
    xa: &SourcePacket,
    xb: &SourcePacket,
    c: &Constellation,
    params: &ChannelParams,
    seed: u64,
) -> Result<ReceivedFrame> {
    if xa.len() != xb.len() {
        return Err(PncError::LengthMismatch {
            left: xa.len(),
            right: xb.len(),
        });
    }
    let n = xa.len();
    let total = 2 * n + 1;
    let sigma_sq = params.noise_variance();
    let rot = params.rotation();
    let sync = params.is_synchronous();

    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(total);
    let mut variances = Vec::with_capacity(total);

    for k in 0..total {
        let aligned = k % 2 == 1;
        if sync && !aligned {
            samples.push(None);
            variances.push(f64::INFINITY);
            continue;
        }
        let variance = if aligned {
            if sync {
                sigma_sq
            } else {
                sigma_sq / (1.0 - params.delta)
            }
        } else {
            sigma_sq / params.delta
        };
        let mean = sample_mean(k, xa, xb, c, rot);
        let noise = if variance > 0.0 {
            let std = variance.sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * std, im * std)
        } else {
            Complex64::new(0.0, 0.0)
        };
        samples.push(Some(mean + noise));
        variances.push(variance);
    }

    ReceivedFrame::from_parts(samples, variances, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::Modulation;

    fn noiseless(delta: f64, phi: f64) -> ChannelParams {
        ChannelParams::new(delta, phi, f64::INFINITY).unwrap()
    }

    #[test]
    fn rejects_out_of_range_params() {
        assert!(ChannelParams::new(1.0, 0.0, 10.0).is_err());
        assert!(ChannelParams::new(-0.1, 0.0, 10.0).is_err());
        assert!(ChannelParams::new(0.5, std::f64::consts::TAU, 10.0).is_err());
    }

    #[test]
    fn rejects_length_mismatch() {
        let c = Constellation::bpsk();
        let xa = c.modulate(&[0, 0]).unwrap();
        let xb = c.modulate(&[0]).unwrap();
        assert!(matches!(
            transmit(&xa, &xb, &c, &noiseless(0.5, 0.0), 0),
            Err(PncError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn bpsk_single_symbol_noiseless_samples() {
        // x_A = [+1], x_B = [+1], delta = 0.5, phi = 0 -> samples [1, 2, 1].
        let c = Constellation::bpsk();
        let xa = c.modulate(&[0]).unwrap();
        let xb = c.modulate(&[0]).unwrap();
        let frame = transmit(&xa, &xb, &c, &noiseless(0.5, 0.0), 7).unwrap();
        assert_eq!(frame.len(), 3);
        let expect = [1.0, 2.0, 1.0];
        for (k, &e) in expect.iter().enumerate() {
            let y = frame.sample(k).unwrap();
            assert!((y - Complex64::new(e, 0.0)).norm() < 1e-12, "sample {k}");
        }
    }

    #[test]
    fn qpsk_quarter_turn_aligned_sample() {
        // (1+j)/sqrt2 + (-1-j)/sqrt2 * e^{j pi/4} lands on (1 + (1-sqrt2) j)/sqrt2.
        let c = Constellation::qpsk();
        let xa = c.modulate(&[0, 0]).unwrap(); // (1+j)/sqrt2
        let xb = c.modulate(&[1, 1]).unwrap(); // (-1-j)/sqrt2
        let frame = transmit(&xa, &xb, &c, &noiseless(0.5, std::f64::consts::FRAC_PI_4), 7).unwrap();
        let y = frame.sample(1).unwrap() * 2f64.sqrt();
        let expect = Complex64::new(1.0, 1.0 - 2f64.sqrt());
        assert!((y - expect).norm() < 1e-12, "got {y}");
    }

    #[test]
    fn synchronous_frame_has_only_aligned_samples() {
        let c = Constellation::bpsk();
        let xa = c.modulate(&[0, 1, 0]).unwrap();
        let xb = c.modulate(&[1, 1, 0]).unwrap();
        let frame = transmit(&xa, &xb, &c, &noiseless(0.0, 0.0), 3).unwrap();
        assert_eq!(frame.len(), 7);
        for k in 0..frame.len() {
            if k % 2 == 1 {
                let expect = c.point(xa.symbol(k / 2)) + c.point(xb.symbol(k / 2));
                assert!((frame.sample(k).unwrap() - expect).norm() < 1e-12);
            } else {
                assert!(frame.is_absent(k), "straddle sample {k} should be absent");
                assert!(frame.variance(k).is_infinite());
            }
        }
    }

    #[test]
    fn edge_samples_carry_single_symbols() {
        let c = Constellation::qpsk();
        let phi = 1.1;
        let xa = c.modulate(&[0, 1, 1, 0]).unwrap();
        let xb = c.modulate(&[1, 0, 0, 1]).unwrap();
        let frame = transmit(&xa, &xb, &c, &noiseless(0.3, phi), 0).unwrap();
        let rot = Complex64::from_polar(1.0, phi);
        // First sample: A only.
        assert!((frame.sample(0).unwrap() - c.point(xa.symbol(0))).norm() < 1e-12);
        // Last sample: B only, rotated.
        let last = frame.len() - 1;
        assert!((frame.sample(last).unwrap() - c.point(xb.symbol(1)) * rot).norm() < 1e-12);
    }

    #[test]
    fn variances_split_by_segment_width() {
        let c = Constellation::bpsk();
        let params = ChannelParams::new(0.25, 0.0, 6.0).unwrap();
        let xa = c.modulate(&[0, 0]).unwrap();
        let xb = c.modulate(&[0, 0]).unwrap();
        let frame = transmit(&xa, &xb, &c, &params, 0).unwrap();
        let sigma_sq = params.noise_variance();
        for k in 0..frame.len() {
            let expect = if k % 2 == 1 {
                sigma_sq / 0.75
            } else {
                sigma_sq / 0.25
            };
            assert!((frame.variance(k) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let c = Constellation::qpsk();
        let params = ChannelParams::new(0.5, 0.7, 8.0).unwrap();
        let mut rng = Xoshiro256StarStar::seed_from_u64(99);
        let xa = c.random_packet(32, &mut rng);
        let xb = c.random_packet(32, &mut rng);
        let f1 = transmit(&xa, &xb, &c, &params, 12345).unwrap();
        let f2 = transmit(&xa, &xb, &c, &params, 12345).unwrap();
        assert_eq!(f1, f2);
        let f3 = transmit(&xa, &xb, &c, &params, 12346).unwrap();
        assert_ne!(f1, f3);
    }

    #[test]
    fn swapped_roles_match_after_phase_rotation() {
        // Noiseless aligned samples: transmit(xa, xb, phi) == transmit(xb, xa, -phi) * e^{j phi}.
        let c = Constellation::qpsk();
        let phi = 0.9;
        let mut rng = Xoshiro256StarStar::seed_from_u64(5);
        let xa = c.random_packet(16, &mut rng);
        let xb = c.random_packet(16, &mut rng);
        let fwd = transmit(&xa, &xb, &c, &noiseless(0.4, phi), 0).unwrap();
        let rev = transmit(&xb, &xa, &c, &noiseless(0.4, std::f64::consts::TAU - phi), 0).unwrap();
        let rot = Complex64::from_polar(1.0, phi);
        for n in 0..16 {
            let k = 2 * n + 1;
            let lhs = fwd.sample(k).unwrap();
            let rhs = rev.sample(k).unwrap() * rot;
            assert!((lhs - rhs).norm() < 1e-12, "aligned sample {n}");
        }
    }

    #[test]
    fn spans_cover_expected_positions() {
        // N = 2: spans are A0 | A0B0 | A1B0 | A1B1 | B1.
        let expect = [
            (Some(0), None),
            (Some(0), Some(0)),
            (Some(1), Some(0)),
            (Some(1), Some(1)),
            (None, Some(1)),
        ];
        for (k, &(a, b)) in expect.iter().enumerate() {
            let span = span_for(k, 2);
            assert_eq!((span.a_pos, span.b_pos), (a, b), "sample {k}");
        }
    }

    #[test]
    fn noise_variance_matches_snr() {
        let p = ChannelParams::new(0.0, 0.0, 0.0).unwrap();
        assert!((p.noise_variance() - 0.5).abs() < 1e-15);
        let p = ChannelParams::new(0.0, 0.0, 10.0).unwrap();
        assert!((p.noise_variance() - 0.05).abs() < 1e-15);
        assert_eq!(Modulation::Qpsk.bits_per_symbol(), 2);
    }
}
