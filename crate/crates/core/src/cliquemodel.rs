//! Clique loglinear models over binary contingency tables.
//!
//! A clique loglinear model is identified by a partition of the variable
//! set into generators: variables within one generator interact in every
//! possible way, variables in different generators are independent. That
//! structure gives closed-form maximum-likelihood estimates — the fitted
//! cell probability is the product of the generator-marginal proportions —
//! and the MLEs exist if and only if every generator's marginal table is
//! strictly positive. Fit is scored with BIC, computable entirely from the
//! positive marginal cells in log domain:
//!
//! ```text
//! BIC(M) = -2 * sum_{n(x)>0} n(x) * log m(x)  +  (sum_j 2^|C_j| - k + 1) * log R
//! log m(x) = sum_j log n_{C_j}(x_{C_j}) - (k - 1) * log R
//! ```

use std::collections::HashMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};

use crate::contingency::{CellPattern, SparseTable};
use crate::error::{Error, Result};

/// A clique loglinear model: disjoint nonempty generators covering all
/// variables, held in canonical form (members ascending, cliques ordered
/// by minimum element). Two models are equal iff their canonical forms
/// are equal, which makes this type the deduplication key everywhere.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CliquePartition {
    b: usize,
    cliques: Vec<Vec<usize>>,
}

impl CliquePartition {
    /// Validate and canonicalize a set of cliques over `0..b`.
    pub fn new<I, C>(cliques: I, b: usize) -> Result<Self>
    where
        I: IntoIterator<Item = C>,
        C: IntoIterator<Item = usize>,
    {
        if b == 0 {
            return Err(Error::Partition("B must be at least 1".into()));
        }
        let mut seen = vec![false; b];
        let mut canon: Vec<Vec<usize>> = Vec::new();
        for clique in cliques {
            let mut members: Vec<usize> = clique.into_iter().collect();
            if members.is_empty() {
                return Err(Error::Partition("empty clique".into()));
            }
            members.sort_unstable();
            members.dedup();
            for &v in &members {
                if v >= b {
                    return Err(Error::Partition(format!(
                        "variable {} out of range (B = {b})",
                        v + 1
                    )));
                }
                if seen[v] {
                    return Err(Error::Partition(format!(
                        "variable {} appears in two cliques",
                        v + 1
                    )));
                }
                seen[v] = true;
            }
            canon.push(members);
        }
        if let Some(v) = seen.iter().position(|&s| !s) {
            return Err(Error::Partition(format!("variable {} is uncovered", v + 1)));
        }
        canon.sort_unstable_by_key(|c| c[0]);
        Ok(CliquePartition { b, cliques: canon })
    }

    /// The all-singleton partition (mutual independence model).
    pub fn singletons(b: usize) -> Self {
        CliquePartition::new((0..b).map(|v| [v]), b).expect("singletons are valid")
    }

    /// The single-clique (saturated) partition.
    pub fn saturated(b: usize) -> Self {
        CliquePartition::new(std::iter::once(0..b), b).expect("saturated is valid")
    }

    /// Variable count B.
    pub fn b(&self) -> usize {
        self.b
    }

    /// Generators in canonical order.
    pub fn cliques(&self) -> &[Vec<usize>] {
        &self.cliques
    }

    /// Number of generators k.
    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    /// Always false: a partition covers at least one variable.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the generator containing variable `v`.
    pub fn clique_of(&self, v: usize) -> usize {
        self.cliques
            .iter()
            .position(|c| c.binary_search(&v).is_ok())
            .expect("every variable is covered")
    }

    /// True iff `v1` and `v2` share a generator.
    pub fn same_clique(&self, v1: usize, v2: usize) -> bool {
        self.clique_of(v1) == self.clique_of(v2)
    }

    /// Text form with 1-based indices: members joined by `,`, cliques by
    /// `;`, canonical order — e.g. `1,2;3`.
    pub fn to_text(&self) -> String {
        self.cliques
            .iter()
            .map(|c| {
                c.iter()
                    .map(|v| (v + 1).to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join(";")
    }

    /// Parse the textual form (any member/clique order is accepted).
    pub fn parse_text(text: &str, b: usize) -> Result<Self> {
        let mut cliques = Vec::new();
        for group in text.split(';') {
            let mut members = Vec::new();
            for tok in group.split(',') {
                let v: usize = tok
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad variable index {tok:?}")))?;
                if v == 0 {
                    return Err(Error::Parse("variable indices are 1-based".into()));
                }
                members.push(v - 1);
            }
            cliques.push(members);
        }
        CliquePartition::new(cliques, b)
    }
}

impl fmt::Debug for CliquePartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CliquePartition({})", self.to_text())
    }
}

impl fmt::Display for CliquePartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// A partition together with its BIC; `bic` is finite iff the MLEs exist.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredModel {
    pub partition: CliquePartition,
    pub bic: f64,
    pub mle_exists: bool,
}

impl ScoredModel {
    /// Wrap a scoring result; `None` means the MLEs do not exist.
    pub fn new(partition: CliquePartition, bic: Option<f64>) -> Self {
        match bic {
            Some(bic) => ScoredModel { partition, bic, mle_exists: true },
            None => ScoredModel { partition, bic: f64::INFINITY, mle_exists: false },
        }
    }
}

/// Generators no wider than this are aggregated through a dense count
/// vector (2^w entries); wider ones fall back to a hash map.
const DENSE_WIDTH_LIMIT: usize = 16;

/// Existence check plus fit score for one generator, in a single pass over
/// the positive cells. Returns `Some(sum_y n_C(y) * ln n_C(y))` when the
/// C-marginal has all 2^|C| cells positive, `None` otherwise. Generators
/// wider than log2(R) fail without touching the cells.
pub(crate) fn generator_score(table: &SparseTable, clique: &[usize]) -> Option<f64> {
    let w = clique.len();
    debug_assert!(w >= 1);
    if w >= 64 || (1u128 << w) > u128::from(table.r()) {
        return None;
    }
    let full = 1u64 << w;
    if w <= DENSE_WIDTH_LIMIT {
        let mut counts = vec![0u64; full as usize];
        for (pat, n) in table.cells() {
            counts[pat.extract_index(clique) as usize] += n;
        }
        if counts.contains(&0) {
            return None;
        }
        Some(counts.iter().map(|&c| n_ln_n(c)).sum())
    } else {
        let mut counts: HashMap<u64, u64> = HashMap::new();
        for (pat, n) in table.cells() {
            *counts.entry(pat.extract_index(clique)).or_insert(0) += n;
        }
        if counts.len() as u64 != full {
            return None;
        }
        // fixed summation order for run-to-run determinism
        let mut vals: Vec<u64> = counts.into_values().collect();
        vals.sort_unstable();
        Some(vals.into_iter().map(n_ln_n).sum())
    }
}

#[inline]
fn n_ln_n(n: u64) -> f64 {
    let x = n as f64;
    x * x.ln()
}

/// Marginal count of the `clique`-projection of pattern `x`.
fn generator_pattern_count(table: &SparseTable, clique: &[usize], x: &CellPattern) -> u64 {
    let target = x.extract_index(clique);
    table
        .cells()
        .iter()
        .filter(|(pat, _)| pat.extract_index(clique) == target)
        .map(|(_, n)| n)
        .sum()
}

fn require_b(table: &SparseTable, m: &CliquePartition) -> Result<()> {
    if m.b() != table.b() {
        return Err(Error::Partition(format!(
            "partition over {} variables applied to a {}-variable table",
            m.b(),
            table.b()
        )));
    }
    Ok(())
}

fn require_pattern(table: &SparseTable, x: &CellPattern) -> Result<()> {
    if x.width() != table.b() {
        return Err(Error::InputShape(format!(
            "pattern width {} does not match B = {}",
            x.width(),
            table.b()
        )));
    }
    Ok(())
}

/// True iff every generator's marginal table is strictly positive, i.e.
/// the closed-form MLEs of `m` exist on `table`.
pub fn mle_exists(table: &SparseTable, m: &CliquePartition) -> bool {
    m.b() == table.b() && m.cliques().iter().all(|c| generator_score(table, c).is_some())
}

fn require_mle(table: &SparseTable, m: &CliquePartition) -> Result<()> {
    require_b(table, m)?;
    if !mle_exists(table, m) {
        return Err(Error::ModelInvalid(format!(
            "MLEs do not exist for {} on this table",
            m.to_text()
        )));
    }
    Ok(())
}

/// Fitted log mean cell value: `sum_j ln n_{C_j}(x_{C_j}) - (k-1) ln R`.
pub fn log_mean_cell(table: &SparseTable, m: &CliquePartition, x: &CellPattern) -> Result<f64> {
    require_mle(table, m)?;
    require_pattern(table, x)?;
    let ln_r = (table.r() as f64).ln();
    let mut sum = 0.0;
    for clique in m.cliques() {
        sum += (generator_pattern_count(table, clique, x) as f64).ln();
    }
    Ok(sum - (m.len() as f64 - 1.0) * ln_r)
}

/// Fitted MLE cell probability: the product of generator-marginal
/// proportions, strictly positive for every pattern when the MLEs exist.
pub fn cell_probability(table: &SparseTable, m: &CliquePartition, x: &CellPattern) -> Result<f64> {
    let log_mean = log_mean_cell(table, m, x)?;
    Ok((log_mean - (table.r() as f64).ln()).exp())
}

/// Log-likelihood at the MLE: `sum_{n(x)>0} n(x) ln p(x)`, which
/// decomposes as `sum_j s(C_j) - k R ln R` with
/// `s(C) = sum_y n_C(y) ln n_C(y)`.
pub fn log_likelihood(table: &SparseTable, m: &CliquePartition) -> Result<f64> {
    require_b(table, m)?;
    let r = table.r() as f64;
    let r_ln_r = r * r.ln();
    let mut sum = 0.0;
    for clique in m.cliques() {
        sum += generator_score(table, clique).ok_or_else(|| {
            Error::ModelInvalid(format!("MLEs do not exist for {}", m.to_text()))
        })?;
    }
    Ok(sum - m.len() as f64 * r_ln_r)
}

/// Number of free interaction terms: `sum_j 2^|C_j| - k + 1`.
pub fn param_count(m: &CliquePartition) -> BigUint {
    let mut total = BigUint::from(1u32);
    for clique in m.cliques() {
        total += BigUint::from(1u32) << clique.len();
    }
    total - BigUint::from(m.len())
}

/// BIC of `m` on `table`, computed from the positive marginal cells only.
pub fn bic(table: &SparseTable, m: &CliquePartition) -> Result<f64> {
    require_b(table, m)?;
    let r = table.r() as f64;
    let ln_r = r.ln();
    let r_ln_r = r * ln_r;
    let mut score_sum = 0.0;
    let mut pow_sum: u128 = 0;
    for clique in m.cliques() {
        let s = generator_score(table, clique).ok_or_else(|| {
            Error::ModelInvalid(format!("MLEs do not exist for {}", m.to_text()))
        })?;
        score_sum += s;
        pow_sum += 1u128 << clique.len();
    }
    let k = m.len() as f64;
    let fit = score_sum - (k - 1.0) * r_ln_r;
    let penalty = (pow_sum as f64 - k + 1.0) * ln_r;
    Ok(-2.0 * fit + penalty)
}

/// Number of clique loglinear model shapes on B variables: the integer
/// partition count, by Euler's pentagonal-number recurrence in exact
/// arbitrary-precision arithmetic.
pub fn count_clique_models(b: usize) -> BigUint {
    let mut p: Vec<BigInt> = Vec::with_capacity(b + 1);
    p.push(BigInt::from(1));
    for n in 1..=b {
        let mut sum = BigInt::from(0);
        let mut k = 1usize;
        loop {
            let g1 = k * (3 * k - 1) / 2;
            if g1 > n {
                break;
            }
            let sign = if k % 2 == 1 { 1 } else { -1 };
            sum += sign * &p[n - g1];
            let g2 = k * (3 * k + 1) / 2;
            if g2 <= n {
                sum += sign * &p[n - g2];
            }
            k += 1;
        }
        p.push(sum);
    }
    p.pop()
        .unwrap()
        .to_biguint()
        .expect("partition counts are nonnegative")
}

/// Number of labeled clique loglinear models on B variables: the Bell
/// number, via the Bell triangle. Distinct labeled models correspond to
/// set partitions; `count_clique_models` gives the unlabeled shape count.
pub fn count_set_partitions(b: usize) -> BigUint {
    let mut row = vec![BigUint::from(1u32)];
    for _ in 1..b {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(row.last().unwrap().clone());
        for prev in &row {
            let last = next.last().unwrap().clone();
            next.push(last + prev);
        }
        row = next;
    }
    row.last().unwrap().clone()
}

/// Exhaustively enumerate every set partition of `{1..B}` (Bell(B) of
/// them) as canonical clique partitions, via restricted growth strings.
/// Guarded to B <= 12; this is the brute-force oracle for search tests.
pub fn enumerate_all_partitions(b: usize) -> Result<Vec<CliquePartition>> {
    if b == 0 {
        return Err(Error::Partition("B must be at least 1".into()));
    }
    if b > 12 {
        return Err(Error::Guard(format!("enumeration is limited to B <= 12, got {b}")));
    }
    let mut out = Vec::new();
    let mut rgs = vec![0usize; b];
    loop {
        let blocks = rgs.iter().copied().max().unwrap() + 1;
        let mut cliques = vec![Vec::new(); blocks];
        for (v, &g) in rgs.iter().enumerate() {
            cliques[g].push(v);
        }
        out.push(CliquePartition::new(cliques, b)?);
        // advance the restricted growth string
        let mut i = b;
        loop {
            if i <= 1 {
                return Ok(out);
            }
            i -= 1;
            let prefix_max = rgs[..i].iter().copied().max().unwrap();
            if rgs[i] <= prefix_max {
                rgs[i] += 1;
                rgs[i + 1..].fill(0);
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_traits::ToPrimitive;

    fn t1() -> SparseTable {
        SparseTable::from_cells(
            [
                (CellPattern::parse_bitstring("00").unwrap(), 5),
                (CellPattern::parse_bitstring("01").unwrap(), 3),
                (CellPattern::parse_bitstring("10").unwrap(), 1),
                (CellPattern::parse_bitstring("11").unwrap(), 1),
            ],
            None,
        )
        .unwrap()
    }

    fn part(text: &str, b: usize) -> CliquePartition {
        CliquePartition::parse_text(text, b).unwrap()
    }

    #[test]
    fn validate_partition_cases() {
        assert!(CliquePartition::new([vec![0, 1], vec![2]], 3).is_ok());
        // overlap
        assert!(matches!(
            CliquePartition::new([vec![0, 1], vec![1, 2]], 3),
            Err(Error::Partition(_))
        ));
        // gap: variable 2 uncovered
        assert!(matches!(
            CliquePartition::new([vec![0], vec![2]], 3),
            Err(Error::Partition(_))
        ));
        // empty clique
        assert!(matches!(
            CliquePartition::new([vec![0, 1], vec![]], 2),
            Err(Error::Partition(_))
        ));
        // out of range
        assert!(matches!(
            CliquePartition::new([vec![0, 5]], 2),
            Err(Error::Partition(_))
        ));
    }

    #[test]
    fn canonical_form_is_order_independent() {
        let a = CliquePartition::new([vec![2], vec![1, 0]], 3).unwrap();
        let b = CliquePartition::new([vec![0, 1], vec![2]], 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_text(), "1,2;3");
        assert_eq!(CliquePartition::parse_text("2,1;3", 3).unwrap(), a);
    }

    #[test]
    fn mle_existence() {
        let t = t1();
        assert!(mle_exists(&t, &part("1,2", 2)));
        let missing = SparseTable::from_cells(
            [
                (CellPattern::parse_bitstring("00").unwrap(), 5),
                (CellPattern::parse_bitstring("01").unwrap(), 3),
                (CellPattern::parse_bitstring("10").unwrap(), 2),
            ],
            None,
        )
        .unwrap();
        assert!(!mle_exists(&missing, &part("1,2", 2)));
        assert!(mle_exists(&missing, &part("1;2", 2)));
    }

    #[test]
    fn oversized_generator_fails_fast() {
        // R = 10 observations cannot fill the 16 cells of a 4-variable generator
        let rows: Vec<Vec<u8>> = (0..10u8).map(|i| vec![i & 1, (i >> 1) & 1, (i >> 2) & 1, (i >> 3) & 1]).collect();
        let t = SparseTable::from_rows(rows, None).unwrap();
        assert!(!mle_exists(&t, &CliquePartition::saturated(4)));
    }

    #[test]
    fn cell_probabilities_t1() {
        let t = t1();
        let indep = part("1;2", 2);
        let sat = part("1,2", 2);
        let x00 = CellPattern::parse_bitstring("00").unwrap();
        let x01 = CellPattern::parse_bitstring("01").unwrap();
        let x11 = CellPattern::parse_bitstring("11").unwrap();
        assert_relative_eq!(cell_probability(&t, &indep, &x00).unwrap(), 0.48, max_relative = 1e-12);
        assert_relative_eq!(cell_probability(&t, &sat, &x01).unwrap(), 0.3, max_relative = 1e-12);
        assert_relative_eq!(cell_probability(&t, &indep, &x11).unwrap(), 0.08, max_relative = 1e-12);
    }

    #[test]
    fn log_mean_cells_t1() {
        let t = t1();
        let indep = part("1;2", 2);
        let sat = part("1,2", 2);
        let x00 = CellPattern::parse_bitstring("00").unwrap();
        let x10 = CellPattern::parse_bitstring("10").unwrap();
        assert_relative_eq!(log_mean_cell(&t, &indep, &x00).unwrap(), 4.8f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(log_mean_cell(&t, &sat, &x00).unwrap(), 5f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(log_mean_cell(&t, &indep, &x10).unwrap(), 1.2f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn log_likelihood_values() {
        // direct sum: 5 ln .5 + 3 ln .3 + ln .1 + ln .1
        let expected = 5.0 * 0.5f64.ln() + 3.0 * 0.3f64.ln() + 2.0 * 0.1f64.ln();
        assert_relative_eq!(
            log_likelihood(&t1(), &part("1,2", 2)).unwrap(),
            expected,
            max_relative = 1e-12
        );

        let bern = SparseTable::from_cells(
            [
                (CellPattern::parse_bitstring("0").unwrap(), 4),
                (CellPattern::parse_bitstring("1").unwrap(), 6),
            ],
            None,
        )
        .unwrap();
        let expected = 4.0 * 0.4f64.ln() + 6.0 * 0.6f64.ln();
        assert_relative_eq!(
            log_likelihood(&bern, &part("1", 1)).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn saturated_model_dominates() {
        let t = t1();
        let sat_ll = log_likelihood(&t, &part("1,2", 2)).unwrap();
        let indep_ll = log_likelihood(&t, &part("1;2", 2)).unwrap();
        assert!(sat_ll >= indep_ll);
        assert!(sat_ll <= 0.0);
    }

    #[test]
    fn param_counts() {
        assert_eq!(param_count(&part("1;2", 2)).to_u64().unwrap(), 3);
        assert_eq!(param_count(&part("1,2", 2)).to_u64().unwrap(), 4);
        assert_eq!(param_count(&part("1,2,3;4", 4)).to_u64().unwrap(), 9);
        // huge generators do not overflow
        let one_clique = CliquePartition::saturated(200);
        assert_eq!(param_count(&one_clique), BigUint::from(1u32) << 200);
    }

    #[test]
    fn bic_t1_frozen_values() {
        let t = t1();
        assert_relative_eq!(
            bic(&t, &part("1;2", 2)).unwrap(),
            -15.675664769949883,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            bic(&t, &part("1,2", 2)).unwrap(),
            -13.475_712_484_373_48,
            epsilon = 1e-9
        );
    }

    #[test]
    fn bic_rejects_invalid_model() {
        let missing = SparseTable::from_cells(
            [
                (CellPattern::parse_bitstring("00").unwrap(), 5),
                (CellPattern::parse_bitstring("01").unwrap(), 3),
                (CellPattern::parse_bitstring("10").unwrap(), 2),
            ],
            None,
        )
        .unwrap();
        assert!(matches!(
            bic(&missing, &part("1,2", 2)),
            Err(Error::ModelInvalid(_))
        ));
    }

    #[test]
    fn model_counts() {
        assert_eq!(count_clique_models(1), BigUint::from(1u32));
        assert_eq!(count_clique_models(4), BigUint::from(5u32));
        assert_eq!(count_clique_models(100), BigUint::from(190_569_292u64));
    }

    #[test]
    fn set_partition_counts() {
        assert_eq!(count_set_partitions(1), BigUint::from(1u32));
        assert_eq!(count_set_partitions(3), BigUint::from(5u32));
        assert_eq!(count_set_partitions(4), BigUint::from(15u32));
        assert_eq!(count_set_partitions(12), BigUint::from(4_213_597u64));
    }

    #[test]
    fn enumeration_matches_bell_numbers() {
        assert_eq!(enumerate_all_partitions(1).unwrap().len(), 1);
        assert_eq!(enumerate_all_partitions(3).unwrap().len(), 5);
        let all4 = enumerate_all_partitions(4).unwrap();
        assert_eq!(all4.len(), 15);
        // no duplicates under canonical form
        let mut dedup = all4.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 15);
        assert!(matches!(enumerate_all_partitions(13), Err(Error::Guard(_))));
    }
}
