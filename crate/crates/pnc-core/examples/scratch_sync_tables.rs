//! Scratch diagnostic: agreement with per-symbol-independent tables
//! (synchronous channel) at the per-coded-bit SNR convention.

use pnc_core::channel::{transmit, ChannelParams};
use pnc_core::constellation::Constellation;
use pnc_core::jtcnc::JointGraph;
use pnc_core::ra::{self, RaConfig};
use pnc_core::reference;
use pnc_core::rng::{derive_seed, Xoshiro256StarStar};
use pnc_core::xorcd;

fn main() {
    let c = Constellation::qpsk();
    let es_db = 4.0 + 10.0 * 2f64.log10(); // Eb per coded bit = 4 dB
    for seed in [0u64, 7, 13, 21] {
        let cfg = RaConfig::new(2, 3, seed).unwrap();
        for (delta, phi) in [(0.0, 0.0), (0.5, std::f64::consts::FRAC_PI_8)] {
            let params = ChannelParams::new(delta, phi, es_db).unwrap();
            let mut graph = JointGraph::build(&cfg, &c, params.is_synchronous());
            let (mut ra_agree, mut jt_agree, mut total) = (0u64, 0u64, 0u64);
            for trial in 0..1000u64 {
                let s = derive_seed(999, &[trial]);
                let mut rng = Xoshiro256StarStar::seed_from_u64(s);
                let sa = c.random_packet(2, &mut rng);
                let sb = c.random_packet(2, &mut rng);
                let xa = ra::encode(&sa, &cfg, &c).unwrap();
                let xb = ra::encode(&sb, &cfg, &c).unwrap();
                let frame = transmit(&xa, &xb, &c, &params, rng.next()).unwrap();

                let (map, _) =
                    reference::exhaustive_joint_source_map(&frame, &params, &c, &cfg).unwrap();
                let d = graph.decode(&frame, &params, &c, 50, 1e-6).unwrap();
                let tables = xorcd::stage1(&frame, &params, &c).unwrap();
                let loopy = ra::decode_xor(&tables, &cfg, &c, 50, 1e-6);
                for m in 0..2 {
                    total += 1;
                    if loopy.source.symbol(m) as u8 == map[m] {
                        ra_agree += 1;
                    }
                    if d.xor_sources[m] == map[m] {
                        jt_agree += 1;
                    }
                }
            }
            println!(
                "seed {seed} delta={delta} phi={phi:.3}: ra_agree={:.4} jt_agree={:.4}",
                ra_agree as f64 / total as f64,
                jt_agree as f64 / total as f64,
            );
        }
    }
}
