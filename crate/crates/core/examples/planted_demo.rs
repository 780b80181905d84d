//! Generate a planted-clique matrix, search it, and print the recovered
//! association structure.
//!
//! ```sh
//! cargo run --release -p cliquelog --example planted_demo
//! ```

use cliquelog::{
    occams_window, run_search, threshold_edges, SearchConfig, SparseTable, SynthSpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let spec = SynthSpec {
        b: 12,
        r: 600,
        planted: vec![vec![1, 2], vec![4, 5, 6]],
        p_in: 0.8,
        p_bg: 0.2,
        clique_row_fraction: None,
        seed: 7,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (matrix, planted) = cliquelog::generate(&spec, &mut rng).expect("valid spec");
    let labels = spec.labels();
    let table = SparseTable::from_rows(matrix, Some(labels.clone())).expect("binary matrix");

    let config = SearchConfig {
        chains: 10,
        iterations: 5_000,
        master_seed: 1,
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ..SearchConfig::default()
    };
    let outcome = run_search(&table, &config).expect("search runs");
    let retained = occams_window(&outcome.bag, config.occam_c).expect("bag is nonempty");
    let probs = cliquelog::edge_probabilities(&retained, &labels).expect("labels match");
    let edges = threshold_edges(&probs, 0.1);

    println!(
        "visited {} models, retained {}, best BIC {:.3}",
        outcome.bag.len(),
        retained.len(),
        retained.best_bic()
    );
    println!("edges above 0.1 (planted were {} pairs):", planted.edge_count());
    for e in &edges {
        println!(
            "  {} -- {}  p = {:.3} [{}]",
            labels[e.i],
            labels[e.j],
            e.probability,
            e.bucket.name()
        );
    }
}
