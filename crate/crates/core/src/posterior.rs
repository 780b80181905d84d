//! Occam's window and Bayes model averaging.
//!
//! A merged search bag is windowed down to the models whose posterior
//! weight `pi(M) ~ exp(-BIC(M))` is at least `c` times the best model's,
//! i.e. `BIC(M) <= best + ln(1/c)`. Weights are normalized over the
//! retained set in log domain (max-subtraction before exponentiation, so
//! BIC spreads of hundreds cannot underflow). Averaged quantities are
//! reduced over models in canonical-partition order to keep floating-point
//! sums deterministic.

use crate::cliquemodel::{self, CliquePartition};
use crate::contingency::{CellPattern, SparseTable};
use crate::error::{Error, Result};
use crate::search::ModelBag;

/// Models surviving Occam's window, with normalized posterior weights.
/// The list is sorted by canonical partition; that order is the mandated
/// reduction order for every average computed from it.
#[derive(Clone, Debug, PartialEq)]
pub struct RetainedSet {
    models: Vec<(CliquePartition, f64)>,
    weights: Vec<f64>,
    best_bic: f64,
}

impl RetainedSet {
    /// Assemble from (partition, BIC) pairs and explicit weights; inputs
    /// are re-sorted into canonical order. Used by tests that need direct
    /// control of the weights; ordinary construction goes through
    /// [`occams_window`].
    pub fn from_parts(models: Vec<(CliquePartition, f64)>, weights: Vec<f64>) -> Result<Self> {
        if models.is_empty() || models.len() != weights.len() {
            return Err(Error::InputShape(
                "retained set needs one weight per model".into(),
            ));
        }
        let mut paired: Vec<((CliquePartition, f64), f64)> =
            models.into_iter().zip(weights).collect();
        paired.sort_by(|a, b| a.0 .0.cmp(&b.0 .0));
        let best_bic = paired.iter().map(|p| p.0 .1).fold(f64::INFINITY, f64::min);
        let (models, weights) = paired.into_iter().unzip();
        Ok(RetainedSet { models, weights, best_bic })
    }

    /// Retained models in canonical-partition order.
    pub fn models(&self) -> &[(CliquePartition, f64)] {
        &self.models
    }

    /// Normalized weights, aligned with [`models`](RetainedSet::models).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Smallest BIC in the set.
    pub fn best_bic(&self) -> f64 {
        self.best_bic
    }

    /// JSON form: `[{"cliques": ..., "bic": ..., "weight": ...}]` sorted
    /// by (BIC, partition), best model first.
    pub fn to_json(&self) -> String {
        let mut order: Vec<usize> = (0..self.models.len()).collect();
        order.sort_by(|&a, &b| {
            self.models[a]
                .1
                .total_cmp(&self.models[b].1)
                .then_with(|| self.models[a].0.cmp(&self.models[b].0))
        });
        let items: Vec<serde_json::Value> = order
            .into_iter()
            .map(|i| {
                serde_json::json!({
                    "cliques": self.models[i].0.to_text(),
                    "bic": self.models[i].1,
                    "weight": self.weights[i],
                })
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::Value::Array(items))
            .expect("retained set serializes")
    }

    /// Parse the JSON form; `b` is the table's variable count.
    pub fn from_json(text: &str, b: usize) -> Result<Self> {
        let items: Vec<serde_json::Value> =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("models json: {e}")))?;
        let mut models = Vec::with_capacity(items.len());
        let mut weights = Vec::with_capacity(items.len());
        for item in items {
            let cliques = item
                .get("cliques")
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::Parse("model entry missing \"cliques\"".into()))?;
            let bic = item
                .get("bic")
                .and_then(|v| v.as_f64())
                .ok_or_else(|| Error::Parse("model entry missing \"bic\"".into()))?;
            let weight = item
                .get("weight")
                .and_then(|v| v.as_f64())
                .ok_or_else(|| Error::Parse("model entry missing \"weight\"".into()))?;
            models.push((CliquePartition::parse_text(cliques, b)?, bic));
            weights.push(weight);
        }
        RetainedSet::from_parts(models, weights)
    }
}

/// Apply Occam's window: keep models with `BIC <= best + ln(1/c)` and
/// normalize `exp(-(BIC - best))` over the survivors.
pub fn occams_window(bag: &ModelBag, c: f64) -> Result<RetainedSet> {
    if bag.is_empty() {
        return Err(Error::EmptyBag);
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InputValue(format!(
            "occam constant must lie strictly in (0,1), got {c}"
        )));
    }
    let best = bag.best_bic().expect("bag is nonempty");
    let cutoff = best + (1.0 / c).ln();
    let mut models: Vec<(CliquePartition, f64)> = bag
        .sorted_models()
        .into_iter()
        .filter(|m| m.bic <= cutoff)
        .map(|m| (m.partition, m.bic))
        .collect();
    models.sort_by(|a, b| a.0.cmp(&b.0));
    // log weights are -(BIC - best); best acts as the max-subtraction
    let unnormalized: Vec<f64> = models.iter().map(|(_, bic)| (-(bic - best)).exp()).collect();
    let total: f64 = unnormalized.iter().sum();
    let weights: Vec<f64> = unnormalized.into_iter().map(|w| w / total).collect();
    Ok(RetainedSet { models, weights, best_bic: best })
}

/// Symmetric B x B matrix of BMA posterior probabilities that two
/// variables share a generator; zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeProbabilityMatrix {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl EdgeProbabilityMatrix {
    pub fn b(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Probability that variables `i` and `j` share a generator.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.labels.len() + j]
    }
}

/// Sum retained-model weights over models placing each pair in the same
/// generator. `labels` supplies one name per variable.
pub fn edge_probabilities(retained: &RetainedSet, labels: &[String]) -> Result<EdgeProbabilityMatrix> {
    let b = retained.models()[0].0.b();
    if labels.len() != b {
        return Err(Error::LabelMismatch(format!(
            "{} labels for {b} variables",
            labels.len()
        )));
    }
    let mut probs = vec![0.0f64; b * b];
    for ((partition, _), &weight) in retained.models().iter().zip(retained.weights()) {
        for clique in partition.cliques() {
            for (a_pos, &va) in clique.iter().enumerate() {
                for &vb in &clique[a_pos + 1..] {
                    probs[va * b + vb] += weight;
                    probs[vb * b + va] += weight;
                }
            }
        }
    }
    // accumulated weights can overshoot 1 by an ulp
    for p in &mut probs {
        *p = p.min(1.0);
    }
    Ok(EdgeProbabilityMatrix { labels: labels.to_vec(), probs })
}

/// BMA existence probabilities: for each variable, the probability that an
/// observation matches it and nothing else; plus the probability of
/// matching nothing at all.
#[derive(Clone, Debug, PartialEq)]
pub struct ExistenceReport {
    labels: Vec<String>,
    /// Probability that an observation matches none of the variables.
    pub p_unknown: f64,
    /// Per-variable probability of matching exactly that variable.
    pub p_variable: Vec<f64>,
}

impl ExistenceReport {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Evaluate the all-zero and single-one cell probabilities under each
/// retained model and weight-average them. Per-model evaluation followed
/// by averaging equals evaluating under the BMA distribution, by
/// linearity.
pub fn existence_probabilities(
    retained: &RetainedSet,
    table: &SparseTable,
) -> Result<ExistenceReport> {
    let b = table.b();
    let r = table.r() as f64;
    let mut p_unknown = 0.0f64;
    let mut p_variable = vec![0.0f64; b];
    for ((partition, _), &weight) in retained.models().iter().zip(retained.weights()) {
        if partition.b() != b || !cliquemodel::mle_exists(table, partition) {
            return Err(Error::ModelInvalid(format!(
                "retained model {} has no MLEs on this table; bag and table do not match",
                partition.to_text()
            )));
        }
        // per-generator marginal proportions of the all-zero pattern
        let mut zero_fracs = Vec::with_capacity(partition.len());
        let mut marginals = Vec::with_capacity(partition.len());
        for clique in partition.cliques() {
            let marginal = table.marginalize(clique)?;
            let zero = CellPattern::zeros(clique.len());
            zero_fracs.push(marginal.count(&zero) as f64 / r);
            marginals.push(marginal);
        }
        let all_zero: f64 = zero_fracs.iter().product();
        p_unknown += weight * all_zero;
        for (j, clique) in partition.cliques().iter().enumerate() {
            for (pos, &v) in clique.iter().enumerate() {
                let mut unit = CellPattern::zeros(clique.len());
                unit.set_bit(pos, true);
                let unit_frac = marginals[j].count(&unit) as f64 / r;
                let others: f64 = zero_fracs
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != j)
                    .map(|(_, &f)| f)
                    .product();
                p_variable[v] += weight * unit_frac * others;
            }
        }
    }
    Ok(ExistenceReport { labels: table.labels().to_vec(), p_unknown, p_variable })
}

/// Weight-averaged fitted probability of one cell.
pub fn bma_cell_probability(
    retained: &RetainedSet,
    table: &SparseTable,
    x: &CellPattern,
) -> Result<f64> {
    let mut total = 0.0;
    for ((partition, _), &weight) in retained.models().iter().zip(retained.weights()) {
        total += weight * cliquemodel::cell_probability(table, partition, x)?;
    }
    Ok(total)
}

/// Posterior-probability bucket of an edge, following the reporting
/// color scheme: black (0.9,1], red (0.5,0.9], green (0.1,0.5],
/// grey (0,0.1].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bucket {
    Black,
    Red,
    Green,
    Grey,
}

impl Bucket {
    pub fn of(probability: f64) -> Bucket {
        if probability > 0.9 {
            Bucket::Black
        } else if probability > 0.5 {
            Bucket::Red
        } else if probability > 0.1 {
            Bucket::Green
        } else {
            Bucket::Grey
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Bucket::Black => "black",
            Bucket::Red => "red",
            Bucket::Green => "green",
            Bucket::Grey => "grey",
        }
    }
}

/// One reported edge: variable indices, probability, bucket.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdedEdge {
    pub i: usize,
    pub j: usize,
    pub probability: f64,
    pub bucket: Bucket,
}

/// Edges with probability strictly above `threshold`, in (i, j) order.
pub fn threshold_edges(matrix: &EdgeProbabilityMatrix, threshold: f64) -> Vec<ThresholdedEdge> {
    let b = matrix.b();
    let mut edges = Vec::new();
    for i in 0..b {
        for j in i + 1..b {
            let p = matrix.get(i, j);
            if p > threshold {
                edges.push(ThresholdedEdge { i, j, probability: p, bucket: Bucket::of(p) });
            }
        }
    }
    edges
}

/// Render thresholded edges as CSV: `var_i,var_j,probability,bucket`.
pub fn edges_to_csv(edges: &[ThresholdedEdge], labels: &[String]) -> String {
    let mut out = String::from("var_i,var_j,probability,bucket\n");
    for e in edges {
        out.push_str(&format!(
            "{},{},{},{}\n",
            labels[e.i],
            labels[e.j],
            e.probability,
            e.bucket.name()
        ));
    }
    out
}

/// Parse the CSV form back into (label pair, probability) rows.
pub fn edges_from_csv(text: &str) -> Result<Vec<(String, String, f64)>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "edges line {}: expected 4 fields",
                lineno + 1
            )));
        }
        let p: f64 = fields[2]
            .parse()
            .map_err(|_| Error::Parse(format!("edges line {}: bad probability", lineno + 1)))?;
        rows.push((fields[0].to_string(), fields[1].to_string(), p));
    }
    Ok(rows)
}

/// Render an existence report as CSV: `variable,probability`, with the
/// reserved `__unknown__` row first, then variables by descending
/// probability (ties by label).
pub fn existence_to_csv(report: &ExistenceReport) -> String {
    let mut out = String::from("variable,probability\n");
    out.push_str(&format!("__unknown__,{}\n", report.p_unknown));
    let mut order: Vec<usize> = (0..report.p_variable.len()).collect();
    order.sort_by(|&a, &b| {
        report.p_variable[b]
            .total_cmp(&report.p_variable[a])
            .then_with(|| report.labels[a].cmp(&report.labels[b]))
    });
    for i in order {
        out.push_str(&format!("{},{}\n", report.labels[i], report.p_variable[i]));
    }
    out
}
