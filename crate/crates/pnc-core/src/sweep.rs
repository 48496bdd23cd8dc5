//! Seeded Monte Carlo BER experiments over (scheme, modulation, offsets,
//! SNR) grids, with deterministic CSV emission.
//!
//! Every trial derives its own generator seed from
//! `derive_seed(master_seed, [point_id, trial])`, where `point_id` is the
//! trial's position in the deterministic `delta x phi x ebn0` enumeration.
//! Trial outcomes are integer error counts, so aggregation is independent of
//! execution order and thread count, and repeated runs of the same config
//! produce byte-identical CSV. The scheme does not enter the seed: sweeps
//! that share a grid and master seed decode identical frames, which makes
//! scheme-vs-scheme BER comparisons paired.
//!
//! Worker parallelism is capped by the `PNC_SIM_THREADS` environment
//! variable (0 or unset picks the core count).

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;

use crate::channel::{transmit, ChannelParams};
use crate::constellation::{Constellation, Modulation, SourcePacket};
use crate::error::{PncError, Result};
use crate::jtcnc::JointGraph;
use crate::ra::{encode, RaConfig, DEFAULT_MAX_ITERS, DEFAULT_REPEAT, DEFAULT_TOL};
use crate::rng::{derive_seed, Xoshiro256StarStar};
use crate::upnc;
use crate::xorcd;

/// Decoding scheme under measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Per-symbol decision rule on a perfectly synchronous uncoded channel
    /// (the benchmark curve).
    SyncBench,
    /// Exact chain decoder, uncoded, any offsets.
    BpUpnc,
    /// Joint channel-decoding and network-coding over the RA code.
    JtCnc,
    /// Disjoint pipeline: XOR posteriors, then standard RA decoding.
    XorCd,
}

impl Scheme {
    pub fn token(self) -> &'static str {
        match self {
            Scheme::SyncBench => "sync",
            Scheme::BpUpnc => "upnc",
            Scheme::JtCnc => "jtcnc",
            Scheme::XorCd => "xorcd",
        }
    }

    pub fn from_token(s: &str) -> Result<Self> {
        match s {
            "sync" => Ok(Scheme::SyncBench),
            "upnc" => Ok(Scheme::BpUpnc),
            "jtcnc" => Ok(Scheme::JtCnc),
            "xorcd" => Ok(Scheme::XorCd),
            other => Err(PncError::InvalidParameter(format!(
                "unknown scheme '{other}' (expected sync|upnc|jtcnc|xorcd)"
            ))),
        }
    }

    pub fn is_coded(self) -> bool {
        matches!(self, Scheme::JtCnc | Scheme::XorCd)
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

/// Full description of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub scheme: Scheme,
    pub modulation: Modulation,
    pub delta_list: Vec<f64>,
    pub phi_list: Vec<f64>,
    pub ebn0_db_list: Vec<f64>,
    pub packets_per_point: usize,
    /// Source bits per packet (coded schemes) or channel bits per packet
    /// (uncoded schemes).
    pub bits_per_packet: usize,
    pub master_seed: u64,
    /// RA repeat factor for coded schemes.
    pub ra_q: usize,
    /// RA interleaver seed shared by both end nodes and the relay.
    pub ra_seed: u64,
    pub max_iters: usize,
    pub tol: f64,
    /// Plot coded curves against energy per *source* bit (shifts the SNR
    /// conversion by `-10 log10(q)`); off means energy per coded bit.
    pub rate_shift: bool,
}

impl SweepConfig {
    pub fn new(scheme: Scheme, modulation: Modulation) -> Self {
        Self {
            scheme,
            modulation,
            delta_list: vec![0.0],
            phi_list: vec![0.0],
            ebn0_db_list: vec![8.0],
            packets_per_point: 100,
            bits_per_packet: 2048,
            master_seed: 1,
            ra_q: DEFAULT_REPEAT,
            ra_seed: 1,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            rate_shift: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta_list.is_empty() || self.phi_list.is_empty() || self.ebn0_db_list.is_empty() {
            return Err(PncError::InvalidParameter(
                "delta, phi, and ebn0 lists must be non-empty".into(),
            ));
        }
        let bps = self.modulation.bits_per_symbol();
        if self.bits_per_packet == 0 || self.bits_per_packet % bps != 0 {
            return Err(PncError::InvalidParameter(format!(
                "bits_per_packet {} must be a positive multiple of {bps}",
                self.bits_per_packet
            )));
        }
        if self.packets_per_point == 0 {
            return Err(PncError::InvalidParameter("packets must be positive".into()));
        }
        if self.scheme.is_coded() && self.ra_q == 0 {
            return Err(PncError::InvalidParameter("q must be positive".into()));
        }
        if self.scheme == Scheme::SyncBench {
            for &d in &self.delta_list {
                if d != 0.0 {
                    return Err(PncError::InvalidParameter(
                        "the synchronous benchmark requires delta = 0".into(),
                    ));
                }
            }
            for &p in &self.phi_list {
                if p != 0.0 {
                    return Err(PncError::InvalidParameter(
                        "the synchronous benchmark requires phi = 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Symbols per packet: source symbols for coded schemes, channel symbols
    /// for uncoded ones.
    pub fn symbols_per_packet(&self) -> usize {
        self.bits_per_packet / self.modulation.bits_per_symbol()
    }

    /// RA configuration for coded schemes.
    pub fn ra_config(&self) -> Result<RaConfig> {
        RaConfig::new(self.symbols_per_packet(), self.ra_q, self.ra_seed)
    }

    /// Grid points in emission order with their ids.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        let mut id = 0u64;
        for &delta in &self.delta_list {
            for &phi in &self.phi_list {
                for &ebn0_db in &self.ebn0_db_list {
                    out.push(SweepPoint {
                        point_id: id,
                        delta,
                        phi,
                        ebn0_db,
                    });
                    id += 1;
                }
            }
        }
        out
    }

    /// Canonical key=value serialization, used for the resume sidecar.
    pub fn canonical_string(&self) -> String {
        let mut s = String::new();
        let join =
            |xs: &[f64]| xs.iter().map(fmt_float).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "format=pnc-sweep-v1");
        let _ = writeln!(s, "scheme={}", self.scheme);
        let _ = writeln!(s, "modulation={}", self.modulation);
        let _ = writeln!(s, "delta={}", join(&self.delta_list));
        let _ = writeln!(s, "phi={}", join(&self.phi_list));
        let _ = writeln!(s, "ebn0={}", join(&self.ebn0_db_list));
        let _ = writeln!(s, "packets={}", self.packets_per_point);
        let _ = writeln!(s, "bits={}", self.bits_per_packet);
        let _ = writeln!(s, "seed={}", self.master_seed);
        let _ = writeln!(s, "q={}", self.ra_q);
        let _ = writeln!(s, "ra_seed={}", self.ra_seed);
        let _ = writeln!(s, "iters={}", self.max_iters);
        let _ = writeln!(s, "tol={}", fmt_float(&self.tol));
        let _ = writeln!(s, "rate_shift={}", self.rate_shift);
        s
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub point_id: u64,
    pub delta: f64,
    pub phi: f64,
    pub ebn0_db: f64,
}

/// One measured BER point.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub scheme: Scheme,
    pub modulation: Modulation,
    pub delta: f64,
    pub phi: f64,
    pub ebn0_db: f64,
    pub packets: u64,
    pub bit_errors: u64,
    pub total_bits: u64,
    pub ber: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub nonconverged: u64,
}

/// Per-bit to per-symbol SNR conversion.
///
/// Adds `10 log10(bits per symbol)`; coded schemes with `rate_shift` also
/// subtract `10 log10(q)` so that the bit energy is per *source* bit.
pub fn ebn0_to_esn0(
    ebn0_db: f64,
    modulation: Modulation,
    scheme: Scheme,
    q: usize,
    rate_shift: bool,
) -> f64 {
    let mut es = ebn0_db + 10.0 * (modulation.bits_per_symbol() as f64).log10();
    if scheme.is_coded() && rate_shift {
        es -= 10.0 * (q as f64).log10();
    }
    es
}

/// 95% Wilson score interval for `errors` out of `total` Bernoulli trials.
pub fn wilson_ci95(errors: u64, total: u64) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054f64;
    let n = total as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct TrialOutcome {
    pub(crate) bit_errors: u64,
    pub(crate) bits: u64,
    pub(crate) nonconverged: bool,
}

/// Fan trials out over the worker pool and sum the integer outcomes.
/// `init` builds per-worker scratch state (decoder graphs are reused across
/// the trials a worker takes).
fn aggregate_trials<S, I, F>(packets: u64, init: I, run: F) -> (u64, u64, u64)
where
    S: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, u64) -> TrialOutcome + Sync + Send,
{
    (0..packets)
        .into_par_iter()
        .map_init(&init, |state, trial| {
            let out = run(state, trial);
            (out.bit_errors, out.bits, u64::from(out.nonconverged))
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2))
}

/// Run one trial of a point. Exposed within the crate so tests can pin the
/// per-trial seeding contract.
pub(crate) fn trial_outcome(
    cfg: &SweepConfig,
    params: &ChannelParams,
    point_id: u64,
    trial: u64,
    graph: Option<&mut JointGraph>,
) -> TrialOutcome {
    let c = Constellation::new(cfg.modulation);
    let seed = derive_seed(cfg.master_seed, &[point_id, trial]);
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let n_sym = cfg.symbols_per_packet();

    match cfg.scheme {
        Scheme::SyncBench => {
            let xa = c.random_packet(n_sym, &mut rng);
            let xb = c.random_packet(n_sym, &mut rng);
            let frame = transmit(&xa, &xb, &c, params, rng.next()).expect("equal lengths");
            let truth = xa.xor_with(&xb, &c).expect("equal lengths");
            let v = params.noise_variance();
            let mut errors = 0u64;
            for n in 0..n_sym {
                let y = frame.sample(2 * n + 1).expect("aligned samples present");
                let decided = match cfg.modulation {
                    Modulation::Bpsk => upnc::decide_sync_lane(y.re, 1.0, v),
                    Modulation::Qpsk => {
                        let amp = std::f64::consts::FRAC_1_SQRT_2;
                        let re = upnc::decide_sync_lane(y.re, amp, v) as u8;
                        let im = upnc::decide_sync_lane(y.im, amp, v) as u8;
                        c.index_of_bits(re | (im << 1))
                    }
                };
                errors += u64::from(c.bit_distance(decided, truth.symbol(n)));
            }
            TrialOutcome {
                bit_errors: errors,
                bits: cfg.bits_per_packet as u64,
                nonconverged: false,
            }
        }
        Scheme::BpUpnc => {
            let xa = c.random_packet(n_sym, &mut rng);
            let xb = c.random_packet(n_sym, &mut rng);
            let frame = transmit(&xa, &xb, &c, params, rng.next()).expect("equal lengths");
            let truth = xa.xor_with(&xb, &c).expect("equal lengths");
            let decision = upnc::decode_frame(&frame, params, &c).expect("well-formed frame");
            let errors = count_symbol_bit_errors(&decision.xor_symbols, &truth, &c);
            TrialOutcome {
                bit_errors: errors,
                bits: cfg.bits_per_packet as u64,
                nonconverged: false,
            }
        }
        Scheme::JtCnc => {
            let ra = cfg.ra_config().expect("validated config");
            let sa = c.random_packet(n_sym, &mut rng);
            let sb = c.random_packet(n_sym, &mut rng);
            let xa = encode(&sa, &ra, &c).expect("length matches");
            let xb = encode(&sb, &ra, &c).expect("length matches");
            let frame = transmit(&xa, &xb, &c, params, rng.next()).expect("equal lengths");
            let truth = sa.xor_with(&sb, &c).expect("equal lengths");
            let mut local;
            let g = match graph {
                Some(g) => g,
                None => {
                    local = JointGraph::build(&ra, &c, params.is_synchronous());
                    &mut local
                }
            };
            let d = g
                .decode(&frame, params, &c, cfg.max_iters, cfg.tol)
                .expect("frame matches graph");
            TrialOutcome {
                bit_errors: count_symbol_bit_errors(&d.xor_sources, &truth, &c),
                bits: cfg.bits_per_packet as u64,
                nonconverged: !d.converged,
            }
        }
        Scheme::XorCd => {
            let ra = cfg.ra_config().expect("validated config");
            let sa = c.random_packet(n_sym, &mut rng);
            let sb = c.random_packet(n_sym, &mut rng);
            let xa = encode(&sa, &ra, &c).expect("length matches");
            let xb = encode(&sb, &ra, &c).expect("length matches");
            let frame = transmit(&xa, &xb, &c, params, rng.next()).expect("equal lengths");
            let truth = sa.xor_with(&sb, &c).expect("equal lengths");
            let d = xorcd::decode_frame(&frame, params, &c, &ra, cfg.max_iters, cfg.tol)
                .expect("well-formed frame");
            TrialOutcome {
                bit_errors: count_symbol_bit_errors(&d.xor_sources, &truth, &c),
                bits: cfg.bits_per_packet as u64,
                nonconverged: !d.converged,
            }
        }
    }
}

fn count_symbol_bit_errors(decided: &[u8], truth: &SourcePacket, c: &Constellation) -> u64 {
    decided
        .iter()
        .enumerate()
        .map(|(n, &d)| u64::from(c.bit_distance(d as usize, truth.symbol(n))))
        .sum()
}

/// Measure one grid point.
pub fn run_point(cfg: &SweepConfig, point: &SweepPoint) -> Result<BerRecord> {
    cfg.validate()?;
    let es_n0_db = ebn0_to_esn0(
        point.ebn0_db,
        cfg.modulation,
        cfg.scheme,
        cfg.ra_q,
        cfg.rate_shift,
    );
    let params = ChannelParams::new(point.delta, point.phi, es_n0_db)?;
    if cfg.scheme.is_coded() {
        cfg.ra_config()?;
    }

    let ra = if cfg.scheme == Scheme::JtCnc {
        Some(cfg.ra_config()?)
    } else {
        None
    };
    let c = Constellation::new(cfg.modulation);

    let (errors, bits, nonconv) = aggregate_trials(
        cfg.packets_per_point as u64,
        || {
            ra.as_ref()
                .map(|ra| JointGraph::build(ra, &c, params.is_synchronous()))
        },
        |graph, trial| trial_outcome(cfg, &params, point.point_id, trial, graph.as_mut()),
    );

    let (ci_lo, ci_hi) = wilson_ci95(errors, bits);
    Ok(BerRecord {
        scheme: cfg.scheme,
        modulation: cfg.modulation,
        delta: point.delta,
        phi: point.phi,
        ebn0_db: point.ebn0_db,
        packets: cfg.packets_per_point as u64,
        bit_errors: errors,
        total_bits: bits,
        ber: errors as f64 / bits as f64,
        ci_lo,
        ci_hi,
        nonconverged: nonconv,
    })
}

/// Number of worker threads from `PNC_SIM_THREADS` (0 or unset = auto).
pub fn threads_from_env() -> usize {
    std::env::var("PNC_SIM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

/// Build a worker pool with the given cap (0 = core count).
pub fn make_pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
}

/// Run every point of the sweep in deterministic order.
pub fn run_sweep(cfg: &SweepConfig, threads: usize) -> Result<Vec<BerRecord>> {
    cfg.validate()?;
    let pool = make_pool(threads);
    let points = cfg.points();
    let mut out = Vec::with_capacity(points.len());
    for point in &points {
        out.push(pool.install(|| run_point(cfg, point))?);
    }
    Ok(out)
}

pub const CSV_HEADER: &str =
    "scheme,modulation,delta,phi,ebn0_db,packets,bit_errors,total_bits,ber,ci_lo,ci_hi,nonconverged";

/// Floats are serialized with 17 significant digits so the CSV round-trips
/// f64 values exactly.
fn fmt_float(x: &f64) -> String {
    format!("{x:.16e}")
}

pub fn record_to_csv_line(r: &BerRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.scheme,
        r.modulation,
        fmt_float(&r.delta),
        fmt_float(&r.phi),
        fmt_float(&r.ebn0_db),
        r.packets,
        r.bit_errors,
        r.total_bits,
        fmt_float(&r.ber),
        fmt_float(&r.ci_lo),
        fmt_float(&r.ci_hi),
        r.nonconverged
    )
}

pub fn records_to_csv(records: &[BerRecord]) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&record_to_csv_line(r));
        s.push('\n');
    }
    s
}

/// Parse a CSV produced by [`records_to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<BerRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        _ => {
            return Err(PncError::InvalidParameter(
                "missing or unexpected CSV header".into(),
            ))
        }
    }
    let mut out = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(PncError::InvalidParameter(format!(
                "line {}: expected 12 fields, got {}",
                ln + 2,
                fields.len()
            )));
        }
        let bad = |what: &str| PncError::InvalidParameter(format!("line {}: bad {what}", ln + 2));
        let modulation = match fields[1] {
            "bpsk" => Modulation::Bpsk,
            "qpsk" => Modulation::Qpsk,
            _ => return Err(bad("modulation")),
        };
        out.push(BerRecord {
            scheme: Scheme::from_token(fields[0])?,
            modulation,
            delta: fields[2].parse().map_err(|_| bad("delta"))?,
            phi: fields[3].parse().map_err(|_| bad("phi"))?,
            ebn0_db: fields[4].parse().map_err(|_| bad("ebn0_db"))?,
            packets: fields[5].parse().map_err(|_| bad("packets"))?,
            bit_errors: fields[6].parse().map_err(|_| bad("bit_errors"))?,
            total_bits: fields[7].parse().map_err(|_| bad("total_bits"))?,
            ber: fields[8].parse().map_err(|_| bad("ber"))?,
            ci_lo: fields[9].parse().map_err(|_| bad("ci_lo"))?,
            ci_hi: fields[10].parse().map_err(|_| bad("ci_hi"))?,
            nonconverged: fields[11].parse().map_err(|_| bad("nonconverged"))?,
        });
    }
    Ok(out)
}

/// Run a sweep with CSV output, resuming any points already present.
///
/// A sidecar `<out>.meta` records the exact config; existing rows are only
/// reused when the sidecar matches, so stale results from a different seed
/// or grid are never mixed in. The whole file is rewritten in deterministic
/// point order on completion.
pub fn run_sweep_to_csv(cfg: &SweepConfig, out_path: &Path, threads: usize) -> io::Result<Vec<BerRecord>> {
    cfg.validate().map_err(to_io)?;
    let meta_path = meta_path_for(out_path);
    let canonical = cfg.canonical_string();

    let mut existing: Vec<BerRecord> = Vec::new();
    if out_path.exists() && meta_path.exists() {
        let meta = fs::read_to_string(&meta_path)?;
        if meta == canonical {
            if let Ok(rows) = parse_csv(&fs::read_to_string(out_path)?) {
                existing = rows;
            }
        }
    }
    let find = |p: &SweepPoint| {
        existing.iter().find(|r| {
            r.scheme == cfg.scheme
                && r.modulation == cfg.modulation
                && r.delta.to_bits() == p.delta.to_bits()
                && r.phi.to_bits() == p.phi.to_bits()
                && r.ebn0_db.to_bits() == p.ebn0_db.to_bits()
                && r.packets == cfg.packets_per_point as u64
        })
    };

    let pool = make_pool(threads);
    let mut records = Vec::new();
    for point in cfg.points() {
        let (record, fresh) = match find(&point) {
            Some(r) => (r.clone(), false),
            None => (pool.install(|| run_point(cfg, &point)).map_err(to_io)?, true),
        };
        records.push(record);
        if fresh {
            // Checkpoint after each computed point so an aborted sweep
            // resumes where it stopped.
            fs::write(out_path, records_to_csv(&records))?;
            fs::write(&meta_path, &canonical)?;
        }
    }
    fs::write(out_path, records_to_csv(&records))?;
    fs::write(&meta_path, &canonical)?;
    Ok(records)
}

fn meta_path_for(out_path: &Path) -> std::path::PathBuf {
    let mut os = out_path.as_os_str().to_owned();
    os.push(".meta");
    std::path::PathBuf::from(os)
}

fn to_io(e: PncError) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidInput, e.to_string())
}

/// Locate the SNR at which a BER curve crosses `target`, by linear
/// interpolation in (dB, log10 BER) between the bracketing grid points.
/// Returns `None` when no adjacent pair of positive-BER points brackets the
/// target.
pub fn snr_at_target_ber(points: &[(f64, f64)], target: f64) -> Option<f64> {
    for w in points.windows(2) {
        let (x0, b0) = w[0];
        let (x1, b1) = w[1];
        if b0 <= 0.0 || b1 <= 0.0 {
            continue;
        }
        let (lo, hi) = (b0.min(b1), b0.max(b1));
        if target <= hi && target >= lo && b0 != b1 {
            let l0 = b0.log10();
            let l1 = b1.log10();
            let t = (target.log10() - l0) / (l1 - l0);
            return Some(x0 + t * (x1 - x0));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless_cfg(scheme: Scheme, modulation: Modulation) -> SweepConfig {
        let mut cfg = SweepConfig::new(scheme, modulation);
        cfg.bits_per_packet = 64;
        cfg.packets_per_point = 4;
        cfg.ebn0_db_list = vec![f64::INFINITY];
        cfg.delta_list = vec![0.5];
        cfg
    }

    #[test]
    fn ebn0_conversion_cases() {
        assert!((ebn0_to_esn0(5.0, Modulation::Bpsk, Scheme::BpUpnc, 3, true) - 5.0).abs() < 1e-12);
        let q = ebn0_to_esn0(5.0, Modulation::Qpsk, Scheme::BpUpnc, 3, true);
        assert!((q - (5.0 + 10.0 * 2f64.log10())).abs() < 1e-12);
        let coded = ebn0_to_esn0(5.0, Modulation::Qpsk, Scheme::JtCnc, 3, true);
        assert!((coded - (5.0 + 10.0 * 2f64.log10() - 10.0 * 3f64.log10())).abs() < 1e-12);
        let unshifted = ebn0_to_esn0(5.0, Modulation::Qpsk, Scheme::JtCnc, 3, false);
        assert!((unshifted - q).abs() < 1e-12);
    }

    #[test]
    fn wilson_brackets_the_estimate() {
        let (lo, hi) = wilson_ci95(7, 1000);
        let p = 0.007;
        assert!(lo < p && p < hi);
        assert!(lo > 0.0 && hi < 1.0);
        assert_eq!(wilson_ci95(0, 0), (0.0, 1.0));
    }

    #[test]
    fn counting_harness_with_stub_decoder() {
        // A stub decoder that flips exactly 7 bits per 100-bit packet over
        // 10 packets must come out as BER 0.07.
        let (errors, bits, nonconv) = aggregate_trials(
            10,
            || (),
            |_, _| TrialOutcome {
                bit_errors: 7,
                bits: 100,
                nonconverged: false,
            },
        );
        assert_eq!((errors, bits, nonconv), (70, 1000, 0));
        let (lo, hi) = wilson_ci95(errors, bits);
        let ber = errors as f64 / bits as f64;
        assert!((ber - 0.07).abs() < 1e-15);
        assert!(lo < ber && ber < hi);
    }

    #[test]
    fn noiseless_points_have_zero_errors() {
        for scheme in [Scheme::BpUpnc, Scheme::JtCnc, Scheme::XorCd] {
            let cfg = noiseless_cfg(scheme, Modulation::Qpsk);
            let record = run_point(&cfg, &cfg.points()[0]).unwrap();
            assert_eq!(record.bit_errors, 0, "{scheme} must be error-free");
            assert_eq!(record.total_bits, 4 * 64);
        }
    }

    #[test]
    fn sync_bench_rejects_offsets() {
        let mut cfg = SweepConfig::new(Scheme::SyncBench, Modulation::Bpsk);
        cfg.delta_list = vec![0.5];
        assert!(cfg.validate().is_err());
        cfg.delta_list = vec![0.0];
        cfg.phi_list = vec![0.1];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn trial_seeds_are_isolated_from_packet_count() {
        // Adding more packets must not change earlier trials: the point's
        // record equals the sum of its per-trial outcomes.
        let mut cfg = noiseless_cfg(Scheme::BpUpnc, Modulation::Qpsk);
        cfg.ebn0_db_list = vec![4.0];
        cfg.packets_per_point = 6;
        let point = cfg.points()[0];
        let es = ebn0_to_esn0(4.0, cfg.modulation, cfg.scheme, cfg.ra_q, cfg.rate_shift);
        let params = ChannelParams::new(point.delta, point.phi, es).unwrap();

        let per_trial: Vec<u64> = (0..6)
            .map(|t| trial_outcome(&cfg, &params, point.point_id, t, None).bit_errors)
            .collect();
        let record6 = run_point(&cfg, &point).unwrap();
        assert_eq!(record6.bit_errors, per_trial.iter().sum::<u64>());

        let mut cfg3 = cfg.clone();
        cfg3.packets_per_point = 3;
        let record3 = run_point(&cfg3, &cfg3.points()[0]).unwrap();
        assert_eq!(record3.bit_errors, per_trial[..3].iter().sum::<u64>());
    }

    #[test]
    fn csv_round_trips_and_is_deterministic() {
        let mut cfg = noiseless_cfg(Scheme::BpUpnc, Modulation::Bpsk);
        cfg.ebn0_db_list = vec![3.0, 5.0];
        cfg.packets_per_point = 2;
        let records = run_sweep(&cfg, 1).unwrap();
        let text = records_to_csv(&records);
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed, records);
        // Different thread setting, same bytes.
        let records2 = run_sweep(&cfg, 2).unwrap();
        assert_eq!(records_to_csv(&records2), text);
    }

    #[test]
    fn single_point_grid_emits_one_record() {
        let cfg = noiseless_cfg(Scheme::XorCd, Modulation::Bpsk);
        let records = run_sweep(&cfg, 1).unwrap();
        assert_eq!(records.len(), 1);
    }

    #[test]
    fn resume_reuses_matching_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let mut cfg = noiseless_cfg(Scheme::BpUpnc, Modulation::Bpsk);
        cfg.ebn0_db_list = vec![2.0, 4.0];
        cfg.packets_per_point = 2;
        let first = run_sweep_to_csv(&cfg, &path, 1).unwrap();
        let bytes1 = fs::read(&path).unwrap();
        // Re-run: everything cached, identical output.
        let second = run_sweep_to_csv(&cfg, &path, 2).unwrap();
        assert_eq!(first, second);
        assert_eq!(bytes1, fs::read(&path).unwrap());
        // Changing the seed invalidates the sidecar and recomputes.
        cfg.master_seed = 99;
        let third = run_sweep_to_csv(&cfg, &path, 1).unwrap();
        assert_eq!(third.len(), 2);
        assert_ne!(
            fs::read_to_string(path.with_extension("csv.meta")).unwrap_or_default(),
            String::new()
        );
    }

    #[test]
    fn interpolation_finds_crossings() {
        let points = vec![(6.0, 1e-2), (7.0, 1e-3), (8.0, 1e-4)];
        let x = snr_at_target_ber(&points, 1e-3).unwrap();
        assert!((x - 7.0).abs() < 1e-12);
        let x = snr_at_target_ber(&points, 3.16227766016838e-4).unwrap();
        assert!((x - 7.5).abs() < 1e-9);
        assert!(snr_at_target_ber(&points, 1e-6).is_none());
    }

    #[test]
    fn wilson_coverage_on_synthetic_channel() {
        // 100 repeated estimates of a known error probability; the interval
        // must cover it at least 93 times.
        let p = 0.02;
        let n = 2000u64;
        let mut covered = 0;
        for rep in 0..100u64 {
            let mut rng = Xoshiro256StarStar::seed_from_u64(derive_seed(17, &[rep]));
            let mut errors = 0u64;
            for _ in 0..n {
                if (rng.next() as f64 / u64::MAX as f64) < p {
                    errors += 1;
                }
            }
            let (lo, hi) = wilson_ci95(errors, n);
            if lo <= p && p <= hi {
                covered += 1;
            }
        }
        assert!(covered >= 93, "coverage {covered}/100");
    }
}
