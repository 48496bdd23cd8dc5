//! `pnc-sim`: Monte Carlo BER experiments for physical-layer network coding
//! over a two-way relay channel.
//!
//! Subcommands:
//! * `sweep` — run a (delta, phi, Eb/N0) grid for one scheme and write CSV.
//! * `verify` — run the oracle suites and report one pass/fail line each.
//! * `plotdata` — split a sweep CSV into one series file per curve.
//!
//! Flags may also come from a `key=value` config file (`--config`);
//! command-line flags override file entries. `PNC_SIM_THREADS` caps worker
//! parallelism (0 = auto).

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pnc_core::sweep::{self, run_sweep_to_csv, threads_from_env, Scheme, SweepConfig};
use pnc_core::verify;
use pnc_core::Modulation;

#[derive(Parser)]
#[command(name = "pnc-sim", version, about = "Asynchronous PNC relay simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a BER sweep and write CSV.
    Sweep(SweepArgs),
    /// Run the verification suites against the independent references.
    Verify,
    /// Reshape a sweep CSV into per-curve series files.
    Plotdata(PlotdataArgs),
}

#[derive(Args, Debug, Default)]
struct SweepArgs {
    /// Decoding scheme: sync | upnc | jtcnc | xorcd.
    #[arg(long)]
    scheme: Option<String>,
    /// Modulation: bpsk | qpsk.
    #[arg(long = "mod")]
    modulation: Option<String>,
    /// Comma-separated symbol offsets in [0,1), e.g. "0,0.5".
    #[arg(long)]
    delta: Option<String>,
    /// Comma-separated phase offsets; accepts plain radians or pi forms
    /// like "pi/4" and "3pi/8".
    #[arg(long)]
    phi: Option<String>,
    /// Per-bit SNR grid: "start:step:stop" or a comma list, in dB.
    #[arg(long)]
    ebn0: Option<String>,
    /// Packets per grid point.
    #[arg(long)]
    packets: Option<usize>,
    /// Bits per packet (source bits for coded schemes).
    #[arg(long)]
    bits: Option<usize>,
    /// Master seed for the whole sweep.
    #[arg(long)]
    seed: Option<u64>,
    /// RA repeat factor (coded schemes).
    #[arg(long)]
    q: Option<usize>,
    /// Iteration cap for the loopy decoders.
    #[arg(long)]
    iters: Option<usize>,
    /// Convergence tolerance for the loopy decoders.
    #[arg(long)]
    tol: Option<f64>,
    /// Interleaver seed (defaults to the master seed).
    #[arg(long)]
    ra_seed: Option<u64>,
    /// Treat Eb as energy per coded bit instead of per source bit.
    #[arg(long)]
    no_rate_shift: bool,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value config file mirroring these flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotdataArgs {
    /// Sweep CSV to reshape.
    #[arg(long = "in")]
    input: PathBuf,
    /// Directory for the per-curve files.
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Sweep(args) => {
            let (cfg, out) = build_sweep_config(args)?;
            let threads = threads_from_env();
            let records = run_sweep_to_csv(&cfg, &out, threads)
                .with_context(|| format!("writing {}", out.display()))?;
            println!(
                "wrote {} point{} to {}",
                records.len(),
                if records.len() == 1 { "" } else { "s" },
                out.display()
            );
            for r in &records {
                println!(
                    "  {} {} delta={} phi={:.6} ebn0={} dB: ber={:.6e} ({} errs / {} bits, {} nonconverged)",
                    r.scheme, r.modulation, r.delta, r.phi, r.ebn0_db, r.ber, r.bit_errors,
                    r.total_bits, r.nonconverged
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify => {
            let results = verify::run_all(threads_from_env());
            let mut failed = 0;
            for r in &results {
                let tag = if r.passed { "PASS" } else { "FAIL" };
                println!("{tag} {}: {}", r.name, r.details);
                if !r.passed {
                    failed += 1;
                }
            }
            if failed > 0 {
                eprintln!("{failed} of {} checks failed", results.len());
                Ok(ExitCode::FAILURE)
            } else {
                println!("all {} checks passed", results.len());
                Ok(ExitCode::SUCCESS)
            }
        }
        Command::Plotdata(args) => {
            let n = plotdata(&args.input, &args.out_dir)?;
            println!("wrote {n} series files to {}", args.out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Merge CLI flags over the config file and fill in defaults.
fn build_sweep_config(args: SweepArgs) -> Result<(SweepConfig, PathBuf)> {
    let file: HashMap<String, String> = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => HashMap::new(),
    };
    let from_file = |key: &str| file.get(key).cloned();

    let scheme_tok = args
        .scheme
        .or_else(|| from_file("scheme"))
        .context("missing --scheme (or scheme= in the config file)")?;
    let scheme = Scheme::from_token(&scheme_tok)?;
    let mod_tok = args
        .modulation
        .or_else(|| from_file("mod"))
        .context("missing --mod")?;
    let modulation = match mod_tok.as_str() {
        "bpsk" => Modulation::Bpsk,
        "qpsk" => Modulation::Qpsk,
        other => bail!("unknown modulation '{other}' (expected bpsk|qpsk)"),
    };

    let mut cfg = SweepConfig::new(scheme, modulation);
    if let Some(s) = args.delta.or_else(|| from_file("delta")) {
        cfg.delta_list = parse_list(&s).context("parsing --delta")?;
    }
    if let Some(s) = args.phi.or_else(|| from_file("phi")) {
        cfg.phi_list = parse_list(&s).context("parsing --phi")?;
    }
    if let Some(s) = args.ebn0.or_else(|| from_file("ebn0")) {
        cfg.ebn0_db_list = parse_grid(&s).context("parsing --ebn0")?;
    }
    if let Some(v) = args.packets.or_else(|| parse_file_num(&file, "packets")) {
        cfg.packets_per_point = v;
    }
    if let Some(v) = args.bits.or_else(|| parse_file_num(&file, "bits")) {
        cfg.bits_per_packet = v;
    }
    if let Some(v) = args.seed.or_else(|| parse_file_num(&file, "seed")) {
        cfg.master_seed = v;
    }
    cfg.ra_seed = cfg.master_seed;
    if let Some(v) = args.q.or_else(|| parse_file_num(&file, "q")) {
        cfg.ra_q = v;
    }
    if let Some(v) = args.iters.or_else(|| parse_file_num(&file, "iters")) {
        cfg.max_iters = v;
    }
    if let Some(v) = args.tol.or_else(|| parse_file_num(&file, "tol")) {
        cfg.tol = v;
    }
    if let Some(v) = args.ra_seed.or_else(|| parse_file_num(&file, "ra_seed")) {
        cfg.ra_seed = v;
    }
    if args.no_rate_shift || file.get("rate_shift").map(String::as_str) == Some("false") {
        cfg.rate_shift = false;
    }
    cfg.validate()?;

    let out = args
        .out
        .or_else(|| from_file("out").map(PathBuf::from))
        .context("missing --out")?;
    Ok((cfg, out))
}

fn parse_file_num<T: std::str::FromStr>(file: &HashMap<String, String>, key: &str) -> Option<T> {
    file.get(key).and_then(|v| v.parse().ok())
}

/// `key=value` lines; `#` starts a comment; blank lines ignored.
fn parse_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = HashMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value", path.display(), ln + 1);
        };
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

/// Comma list of numbers, each a plain float or a pi expression
/// (`pi`, `pi/4`, `3pi/8`, `0.5pi`).
fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|tok| parse_angle(tok.trim()))
        .collect::<Result<Vec<_>>>()
}

fn parse_angle(tok: &str) -> Result<f64> {
    if tok.is_empty() {
        bail!("empty list entry");
    }
    if let Some(pos) = tok.find("pi") {
        let (coef_s, rest) = tok.split_at(pos);
        let rest = &rest[2..];
        let coef: f64 = if coef_s.is_empty() {
            1.0
        } else {
            coef_s
                .parse()
                .with_context(|| format!("bad coefficient in '{tok}'"))?
        };
        let div: f64 = if rest.is_empty() {
            1.0
        } else if let Some(d) = rest.strip_prefix('/') {
            d.parse().with_context(|| format!("bad divisor in '{tok}'"))?
        } else {
            bail!("unexpected trailing text in '{tok}'");
        };
        Ok(coef * std::f64::consts::PI / div)
    } else {
        tok.parse().with_context(|| format!("bad number '{tok}'"))
    }
}

/// `start:step:stop` (inclusive) or a comma list.
fn parse_grid(s: &str) -> Result<Vec<f64>> {
    if !s.contains(':') {
        return parse_list(s);
    }
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("expected start:step:stop, got '{s}'");
    }
    let start: f64 = parts[0].trim().parse().context("bad start")?;
    let step: f64 = parts[1].trim().parse().context("bad step")?;
    let stop: f64 = parts[2].trim().parse().context("bad stop")?;
    if step <= 0.0 || stop < start {
        bail!("need step > 0 and stop >= start in '{s}'");
    }
    let mut out = Vec::new();
    let mut i = 0u64;
    loop {
        let x = start + step * i as f64;
        if x > stop + 1e-9 {
            break;
        }
        out.push(x);
        i += 1;
    }
    Ok(out)
}

/// Split a sweep CSV into one `ebn0_db,ber,ci_lo,ci_hi` file per
/// (scheme, modulation, delta, phi) curve.
fn plotdata(input: &Path, out_dir: &Path) -> Result<usize> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let records = sweep::parse_csv(&text)?;
    fs::create_dir_all(out_dir)?;

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<&pnc_core::BerRecord>> = HashMap::new();
    for r in &records {
        let key = format!(
            "{}_{}_d{}_p{}",
            r.scheme,
            r.modulation,
            fmt_axis(r.delta),
            fmt_axis(r.phi)
        );
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    for key in &order {
        let rows = &groups[key];
        let mut out = String::from("ebn0_db,ber,ci_lo,ci_hi\n");
        for r in rows {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.ebn0_db, r.ber, r.ci_lo, r.ci_hi
            ));
        }
        fs::write(out_dir.join(format!("{key}.csv")), out)?;
    }
    Ok(order.len())
}

/// Short deterministic float form for filenames (4 decimals, trailing zeros
/// trimmed).
fn fmt_axis(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() {
        "0".to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_parsing() {
        assert!((parse_angle("0.5").unwrap() - 0.5).abs() < 1e-15);
        assert!((parse_angle("pi").unwrap() - std::f64::consts::PI).abs() < 1e-15);
        assert!((parse_angle("pi/4").unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        let x = parse_angle("3pi/8").unwrap();
        assert!((x - 3.0 * std::f64::consts::PI / 8.0).abs() < 1e-15);
        assert!(parse_angle("pie").is_err());
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1:0.5:2").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_grid("3,4").unwrap(), vec![3.0, 4.0]);
        assert!(parse_grid("2:0:1").is_err());
    }

    #[test]
    fn axis_formatting() {
        assert_eq!(fmt_axis(0.5), "0.5");
        assert_eq!(fmt_axis(0.0), "0");
        assert_eq!(fmt_axis(std::f64::consts::FRAC_PI_4), "0.7854");
    }
}
