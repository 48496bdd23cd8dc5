//! Scratch diagnostic: loopy-vs-MAP agreement across SNR (not shipped).

use pnc_core::channel::{transmit, ChannelParams};
use pnc_core::constellation::Constellation;
use pnc_core::jtcnc::JointGraph;
use pnc_core::ra::{self, RaConfig};
use pnc_core::reference;
use pnc_core::rng::{derive_seed, Xoshiro256StarStar};
use pnc_core::xorcd;

fn main() {
    let c = Constellation::qpsk();
    for seed in [0u64, 13] {
        let cfg = RaConfig::new(2, 3, seed).unwrap();
        println!("interleaver seed {seed}: {:?}", cfg.interleaver());
        for es_db in [2.24, 4.0, 7.0, 10.0] {
            let params = ChannelParams::new(0.5, std::f64::consts::FRAC_PI_8, es_db).unwrap();
            let mut graph = JointGraph::build(&cfg, &c, false);
            let (mut ra_agree, mut jt_agree, mut total) = (0u64, 0u64, 0u64);
            let (mut ra_err, mut jt_err, mut map_err) = (0u64, 0u64, 0u64);
            for trial in 0..1000u64 {
                let s = derive_seed(999, &[trial]);
                let mut rng = Xoshiro256StarStar::seed_from_u64(s);
                let sa = c.random_packet(2, &mut rng);
                let sb = c.random_packet(2, &mut rng);
                let xa = ra::encode(&sa, &cfg, &c).unwrap();
                let xb = ra::encode(&sb, &cfg, &c).unwrap();
                let frame = transmit(&xa, &xb, &c, &params, rng.next()).unwrap();
                let truth = sa.xor_with(&sb, &c).unwrap();

                let (map, _) =
                    reference::exhaustive_joint_source_map(&frame, &params, &c, &cfg).unwrap();
                let d = graph.decode(&frame, &params, &c, 50, 1e-6).unwrap();
                let tables = xorcd::stage1(&frame, &params, &c).unwrap();
                let loopy = ra::decode_xor(&tables, &cfg, &c, 50, 1e-6);
                let (xmap, _) = reference::exhaustive_xor_map(&tables, &cfg, &c);

                for m in 0..2 {
                    total += 1;
                    if loopy.source.symbol(m) as u8 == xmap[m] {
                        ra_agree += 1;
                    }
                    if d.xor_sources[m] == map[m] {
                        jt_agree += 1;
                    }
                    if map[m] != truth.symbol(m) as u8 {
                        map_err += 1;
                    }
                    if d.xor_sources[m] != truth.symbol(m) as u8 {
                        jt_err += 1;
                    }
                    if loopy.source.symbol(m) as u8 != truth.symbol(m) as u8 {
                        ra_err += 1;
                    }
                }
            }
            println!(
                "  es={es_db:5.2} dB: ra_agree={:.4} jt_agree={:.4} | SER map={:.3} jt={:.3} ra={:.3}",
                ra_agree as f64 / total as f64,
                jt_agree as f64 / total as f64,
                map_err as f64 / total as f64,
                jt_err as f64 / total as f64,
                ra_err as f64 / total as f64,
            );
        }
    }
}
