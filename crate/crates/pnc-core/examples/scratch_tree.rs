//! Scratch diagnostic: RA decoder must be exact when the graph is a tree
//! (q = 1), and the agreement check setup at the per-coded-bit convention.

use pnc_core::constellation::Constellation;
use pnc_core::evidence::SymbolTable;
use pnc_core::ra::{self, RaConfig};
use pnc_core::reference;
use pnc_core::rng::{derive_seed, Xoshiro256StarStar};

fn main() {
    let c = Constellation::qpsk();
    // q = 1: plain accumulator, tree graph, loopy BP is exact sum-product.
    let cfg = RaConfig::new(6, 1, 0).unwrap();
    let mut worst = 0.0f64;
    let mut disagreements = 0u64;
    for trial in 0..500u64 {
        let mut rng = Xoshiro256StarStar::seed_from_u64(derive_seed(1, &[trial]));
        let tables: Vec<SymbolTable> = (0..6)
            .map(|_| {
                let raw: Vec<f64> = (0..4).map(|_| (rng.next() % 1000) as f64 + 1.0).collect();
                SymbolTable::from_raw(4, &raw)
            })
            .collect();
        let loopy = ra::decode_xor(&tables, &cfg, &c, 100, 1e-12);
        let (map, map_posts) = reference::exhaustive_xor_map(&tables, &cfg, &c);
        for m in 0..6 {
            if loopy.source.symbol(m) as u8 != map[m] {
                disagreements += 1;
            }
            worst = worst.max(loopy.posteriors[m].max_abs_diff(&map_posts[m]));
        }
    }
    println!("q=1 tree: {disagreements} decision disagreements, max posterior diff {worst:.3e}");

    // q = 2 with M = 3 (one cycle class), marginals still close?
    let cfg = RaConfig::new(3, 2, 7).unwrap();
    let mut worst = 0.0f64;
    for trial in 0..200u64 {
        let mut rng = Xoshiro256StarStar::seed_from_u64(derive_seed(2, &[trial]));
        let tables: Vec<SymbolTable> = (0..6)
            .map(|_| {
                let raw: Vec<f64> = (0..4).map(|_| (rng.next() % 1000) as f64 + 1.0).collect();
                SymbolTable::from_raw(4, &raw)
            })
            .collect();
        let loopy = ra::decode_xor(&tables, &cfg, &c, 200, 1e-12);
        let (_, map_posts) = reference::exhaustive_xor_map(&tables, &cfg, &c);
        for m in 0..3 {
            worst = worst.max(loopy.posteriors[m].max_abs_diff(&map_posts[m]));
        }
    }
    println!("q=2 loopy: max posterior diff {worst:.3e} (cycles: some gap expected)");
}
