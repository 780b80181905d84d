//! Shared fixtures for the benchmark targets.

use cliquelog::{SparseTable, SynthSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A planted-clique table at the given scale, deterministic in `seed`.
pub fn planted_table(b: usize, r: usize, seed: u64) -> SparseTable {
    let spec = SynthSpec {
        b,
        r,
        planted: vec![vec![1, 2], vec![3, 4, 5], vec![6, 7, 8, 9]],
        p_in: 0.8,
        p_bg: 0.2,
        clique_row_fraction: None,
        seed,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (matrix, _) = cliquelog::generate(&spec, &mut rng).expect("spec is valid");
    SparseTable::from_rows(matrix, Some(spec.labels())).expect("matrix ingests")
}
