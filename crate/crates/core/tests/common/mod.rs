// Each integration test binary compiles this module and uses a subset of it.
#![allow(dead_code)]

//! Brute-force oracle used by the integration suites.
//!
//! Everything here recomputes model quantities from raw cell data by
//! direct definition — marginal counts by filtering cells, fitted values
//! by the closed-form product, BIC by summing over positive cells — and
//! stays independent of the library's evaluation path (bit packing,
//! generator decomposition, caching).

use cliquelog::{CliquePartition, SparseTable};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Cells as plain bit vectors plus counts.
pub struct RawTable {
    pub b: usize,
    pub r: u64,
    pub cells: Vec<(Vec<u8>, u64)>,
}

impl RawTable {
    pub fn from_table(table: &SparseTable) -> Self {
        let cells = table
            .cells()
            .iter()
            .map(|(pat, count)| {
                let bits: Vec<u8> = pat
                    .bitstring()
                    .chars()
                    .map(|c| if c == '1' { 1u8 } else { 0u8 })
                    .collect();
                (bits, *count)
            })
            .collect();
        RawTable { b: table.b(), r: table.r(), cells }
    }
}

/// Marginal count of `values` over `subset`, by filtering every cell.
pub fn marginal_count(raw: &RawTable, subset: &[usize], values: &[u8]) -> u64 {
    raw.cells
        .iter()
        .filter(|(bits, _)| subset.iter().zip(values).all(|(&v, &want)| bits[v] == want))
        .map(|(_, n)| n)
        .sum()
}

fn value_combos(width: usize) -> impl Iterator<Item = Vec<u8>> {
    (0..(1usize << width)).map(move |i| (0..width).map(|j| ((i >> j) & 1) as u8).collect())
}

/// Existence by definition: every value combination of every generator
/// has a positive marginal count.
pub fn mle_exists(raw: &RawTable, cliques: &[Vec<usize>]) -> bool {
    cliques
        .iter()
        .all(|c| value_combos(c.len()).all(|vals| marginal_count(raw, c, &vals) > 0))
}

/// Fitted cell probability: the product of generator-marginal proportions.
pub fn cell_probability(raw: &RawTable, cliques: &[Vec<usize>], x: &[u8]) -> f64 {
    cliques
        .iter()
        .map(|c| {
            let vals: Vec<u8> = c.iter().map(|&v| x[v]).collect();
            marginal_count(raw, c, &vals) as f64 / raw.r as f64
        })
        .product()
}

/// BIC by direct evaluation: `-2 sum n(x) ln m(x) + (sum 2^|C| - k + 1) ln R`
/// with `ln m(x) = sum_j ln n_{C_j}(x_{C_j}) - (k-1) ln R`. `None` when the
/// MLEs do not exist.
pub fn bic(raw: &RawTable, cliques: &[Vec<usize>]) -> Option<f64> {
    if !mle_exists(raw, cliques) {
        return None;
    }
    let r = raw.r as f64;
    let ln_r = r.ln();
    let k = cliques.len() as f64;
    let mut fit = 0.0;
    for (bits, n) in &raw.cells {
        let ln_m: f64 = cliques
            .iter()
            .map(|c| {
                let vals: Vec<u8> = c.iter().map(|&v| bits[v]).collect();
                (marginal_count(raw, c, &vals) as f64).ln()
            })
            .sum::<f64>()
            - (k - 1.0) * ln_r;
        fit += *n as f64 * ln_m;
    }
    let params: f64 =
        cliques.iter().map(|c| 2f64.powi(c.len() as i32)).sum::<f64>() - k + 1.0;
    Some(-2.0 * fit + params * ln_r)
}

/// Convenience: oracle BIC for a canonical partition.
pub fn bic_of(raw: &RawTable, m: &CliquePartition) -> Option<f64> {
    bic(raw, m.cliques())
}

/// Random Bernoulli(density) table; the rejection loop guarantees no
/// constant columns so every all-singleton model is valid.
pub fn random_table(seed: u64, b: usize, r: usize, density: f64) -> SparseTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let rows: Vec<Vec<u8>> = (0..r)
            .map(|_| (0..b).map(|_| rng.gen_bool(density) as u8).collect())
            .collect();
        let table = SparseTable::from_rows(rows, None).expect("rows are rectangular binary");
        if table.constant_columns().is_empty() {
            return table;
        }
    }
}
