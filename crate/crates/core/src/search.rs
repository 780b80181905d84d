//! Stochastic search over valid clique loglinear models.
//!
//! Independent chains walk the model space with four proposal moves
//! (split, join, switch, move), targeting `pi(M) ~ exp(-BIC(M))`: a
//! proposal whose MLEs do not exist is rejected outright, otherwise it is
//! accepted with probability `min{1, exp(BIC(current) - BIC(proposal))}`.
//! Every model whose BIC gets computed is collected into a bag keyed by
//! canonical partition. Chains are embarrassingly parallel; each owns a
//! generator seeded purely from `(master_seed, chain_id)`, so the merged
//! result is independent of how many workers run them.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cliquemodel::{self, CliquePartition, ScoredModel};
use crate::contingency::SparseTable;
use crate::error::{Error, Result};

/// Knobs for one search run.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    /// Number of independent chains.
    pub chains: usize,
    /// Steps per chain (0 collects only the initial model).
    pub iterations: usize,
    /// Seed from which every chain generator is derived.
    pub master_seed: u64,
    /// Occam's window constant, strictly between 0 and 1, applied after
    /// the search when the bag is windowed.
    pub occam_c: f64,
    /// Worker threads for running chains.
    pub workers: usize,
    /// Attempts allowed when sampling the initial valid model.
    pub init_retry_cap: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            chains: 100,
            iterations: 100_000,
            master_seed: 0,
            occam_c: 1e-4,
            workers: 1,
            init_retry_cap: 1000,
        }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::InputValue("chains must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::InputValue("workers must be positive".into()));
        }
        if !(self.occam_c > 0.0 && self.occam_c < 1.0) {
            return Err(Error::InputValue(format!(
                "occam_c must lie strictly in (0,1), got {}",
                self.occam_c
            )));
        }
        Ok(())
    }
}

/// The four proposal moves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveType {
    /// Divide one clique into two nonempty cliques.
    Split,
    /// Merge two cliques into one.
    Join,
    /// Exchange one element between two cliques.
    Switch,
    /// Relocate one element into another clique.
    Move,
}

impl MoveType {
    /// Lower-case name used in trace files.
    pub fn name(self) -> &'static str {
        match self {
            MoveType::Split => "split",
            MoveType::Join => "join",
            MoveType::Switch => "switch",
            MoveType::Move => "move",
        }
    }
}

/// Outcome of one proposal draw. A structurally impossible move (splitting
/// a singleton, or join/switch/move when only one clique exists) leaves
/// the partition unchanged and is flagged degenerate; the caller records
/// it as a rejected step.
#[derive(Clone, Debug)]
pub struct Proposal {
    pub partition: CliquePartition,
    pub move_type: MoveType,
    pub degenerate: bool,
}

/// Draw one of the four moves uniformly and apply it to `m`.
pub fn propose<R: Rng>(m: &CliquePartition, rng: &mut R) -> Proposal {
    let move_type = match rng.gen_range(0..4u8) {
        0 => MoveType::Split,
        1 => MoveType::Join,
        2 => MoveType::Switch,
        _ => MoveType::Move,
    };
    let b = m.b();
    let k = m.len();
    let degenerate = |mt| Proposal { partition: m.clone(), move_type: mt, degenerate: true };
    let rebuild = |cliques: Vec<Vec<usize>>, mt| Proposal {
        partition: CliquePartition::new(cliques, b).expect("moves preserve partition validity"),
        move_type: mt,
        degenerate: false,
    };
    match move_type {
        MoveType::Split => {
            let idx = rng.gen_range(0..k);
            let clique = &m.cliques()[idx];
            if clique.len() < 2 {
                return degenerate(move_type);
            }
            // random side per member, redrawn until both sides are
            // nonempty: uniform over bipartitions up to labeling
            let (left, right) = loop {
                let mut left = Vec::new();
                let mut right = Vec::new();
                for &v in clique {
                    if rng.gen_bool(0.5) {
                        left.push(v);
                    } else {
                        right.push(v);
                    }
                }
                if !left.is_empty() && !right.is_empty() {
                    break (left, right);
                }
            };
            let mut cliques: Vec<Vec<usize>> = Vec::with_capacity(k + 1);
            for (i, c) in m.cliques().iter().enumerate() {
                if i != idx {
                    cliques.push(c.clone());
                }
            }
            cliques.push(left);
            cliques.push(right);
            rebuild(cliques, move_type)
        }
        MoveType::Join => {
            if k < 2 {
                return degenerate(move_type);
            }
            let (i, j) = two_distinct(k, rng);
            let mut cliques: Vec<Vec<usize>> = Vec::with_capacity(k - 1);
            let mut merged = m.cliques()[i].clone();
            merged.extend_from_slice(&m.cliques()[j]);
            for (idx, c) in m.cliques().iter().enumerate() {
                if idx != i && idx != j {
                    cliques.push(c.clone());
                }
            }
            cliques.push(merged);
            rebuild(cliques, move_type)
        }
        MoveType::Switch => {
            if k < 2 {
                return degenerate(move_type);
            }
            let (i, j) = two_distinct(k, rng);
            let vi = m.cliques()[i][rng.gen_range(0..m.cliques()[i].len())];
            let vj = m.cliques()[j][rng.gen_range(0..m.cliques()[j].len())];
            let mut cliques: Vec<Vec<usize>> = m.cliques().to_vec();
            cliques[i].retain(|&v| v != vi);
            cliques[i].push(vj);
            cliques[j].retain(|&v| v != vj);
            cliques[j].push(vi);
            rebuild(cliques, move_type)
        }
        MoveType::Move => {
            if k < 2 {
                return degenerate(move_type);
            }
            let (i, j) = two_distinct(k, rng);
            let vi = m.cliques()[i][rng.gen_range(0..m.cliques()[i].len())];
            let mut cliques: Vec<Vec<usize>> = m.cliques().to_vec();
            cliques[i].retain(|&v| v != vi);
            cliques[j].push(vi);
            if cliques[i].is_empty() {
                // source emptied: drop it, the move degenerates to a join
                cliques.remove(i);
            }
            rebuild(cliques, move_type)
        }
    }
}

fn two_distinct<R: Rng>(k: usize, rng: &mut R) -> (usize, usize) {
    let i = rng.gen_range(0..k);
    let mut j = rng.gen_range(0..k - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// BIC evaluation behind the chain loop. `score` returns `None` when the
/// model's MLEs do not exist.
pub trait Scorer {
    fn score(&mut self, m: &CliquePartition) -> Option<f64>;
}

/// Caching scorer over one table. Scores are assembled from per-generator
/// marginal statistics, so a proposal that touches one or two cliques
/// reuses every other clique's cached term; whole-partition results are
/// cached as well since chains revisit states near modes. Both caches are
/// flushed when they reach their cap, keeping memory bounded.
pub struct TableScorer<'a> {
    table: &'a SparseTable,
    r_ln_r: f64,
    ln_r: f64,
    generator_cache: HashMap<Vec<usize>, Option<f64>>,
    partition_cache: HashMap<CliquePartition, Option<f64>>,
    cache_cap: usize,
}

impl<'a> TableScorer<'a> {
    pub fn new(table: &'a SparseTable) -> Self {
        let r = table.r() as f64;
        TableScorer {
            table,
            r_ln_r: r * r.ln(),
            ln_r: r.ln(),
            generator_cache: HashMap::new(),
            partition_cache: HashMap::new(),
            cache_cap: 200_000,
        }
    }

    fn generator_term(&mut self, clique: &[usize]) -> Option<f64> {
        if let Some(&cached) = self.generator_cache.get(clique) {
            return cached;
        }
        let value = cliquemodel::generator_score(self.table, clique);
        if self.generator_cache.len() >= self.cache_cap {
            self.generator_cache.clear();
        }
        self.generator_cache.insert(clique.to_vec(), value);
        value
    }

    fn compute(&mut self, m: &CliquePartition) -> Option<f64> {
        let mut score_sum = 0.0;
        let mut pow_sum: u128 = 0;
        for clique in m.cliques() {
            // a generator wider than 63 bits can never pass existence, so
            // the shift below cannot overflow
            score_sum += self.generator_term(clique)?;
            pow_sum += 1u128 << clique.len();
        }
        let k = m.len() as f64;
        let fit = score_sum - (k - 1.0) * self.r_ln_r;
        let penalty = (pow_sum as f64 - k + 1.0) * self.ln_r;
        Some(-2.0 * fit + penalty)
    }
}

impl Scorer for TableScorer<'_> {
    fn score(&mut self, m: &CliquePartition) -> Option<f64> {
        if let Some(&cached) = self.partition_cache.get(m) {
            return cached;
        }
        let value = self.compute(m);
        if self.partition_cache.len() >= self.cache_cap {
            self.partition_cache.clear();
        }
        self.partition_cache.insert(m.clone(), value);
        value
    }
}

/// Deduplicated collection of scored models, keyed by canonical partition.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelBag {
    entries: HashMap<CliquePartition, f64>,
}

impl ModelBag {
    pub fn new() -> Self {
        ModelBag::default()
    }

    /// Record a model with valid MLEs. Re-inserting an existing partition
    /// is a no-op: BIC is a deterministic function of the partition.
    pub fn insert(&mut self, partition: CliquePartition, bic: f64) {
        debug_assert!(bic.is_finite());
        self.entries.entry(partition).or_insert(bic);
    }

    /// Union with another bag.
    pub fn merge(&mut self, other: ModelBag) {
        for (partition, bic) in other.entries {
            self.insert(partition, bic);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Smallest BIC over the bag.
    pub fn best_bic(&self) -> Option<f64> {
        self.entries.values().copied().fold(None, |best, bic| {
            Some(best.map_or(bic, |b: f64| b.min(bic)))
        })
    }

    pub fn get(&self, partition: &CliquePartition) -> Option<f64> {
        self.entries.get(partition).copied()
    }

    pub fn contains(&self, partition: &CliquePartition) -> bool {
        self.entries.contains_key(partition)
    }

    /// Entries as scored models, ordered by (BIC, canonical partition).
    pub fn sorted_models(&self) -> Vec<ScoredModel> {
        let mut models: Vec<(&CliquePartition, f64)> =
            self.entries.iter().map(|(p, &b)| (p, b)).collect();
        models.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
        models
            .into_iter()
            .map(|(p, b)| ScoredModel::new(p.clone(), Some(b)))
            .collect()
    }

    /// JSON form: a list of `{"cliques": "1,2;3", "bic": ...}` objects
    /// sorted by (BIC, partition).
    pub fn to_json(&self) -> String {
        let items: Vec<serde_json::Value> = self
            .sorted_models()
            .into_iter()
            .map(|m| {
                serde_json::json!({
                    "cliques": m.partition.to_text(),
                    "bic": m.bic,
                })
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::Value::Array(items)).expect("bag serializes")
    }

    /// Parse the JSON form; `b` is the variable count of the table the
    /// bag was collected on.
    pub fn from_json(text: &str, b: usize) -> Result<Self> {
        let items: Vec<serde_json::Value> =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("bag json: {e}")))?;
        let mut bag = ModelBag::new();
        for item in items {
            let cliques = item
                .get("cliques")
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::Parse("bag entry missing \"cliques\"".into()))?;
            let bic = item
                .get("bic")
                .and_then(|v| v.as_f64())
                .ok_or_else(|| Error::Parse("bag entry missing \"bic\"".into()))?;
            bag.insert(CliquePartition::parse_text(cliques, b)?, bic);
        }
        Ok(bag)
    }
}

/// One chain step as recorded in the trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    /// BIC of the chain's state after this step.
    pub bic: f64,
    pub accepted: bool,
    pub move_type: MoveType,
}

/// Per-chain history: one record per iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainTrace {
    pub chain_id: usize,
    /// BIC of the randomly drawn starting model.
    pub initial_bic: f64,
    pub records: Vec<TraceRecord>,
}

impl ChainTrace {
    /// Smallest BIC among the states this chain occupied.
    pub fn best_state_bic(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.bic)
            .fold(self.initial_bic, f64::min)
    }
}

/// Render traces as CSV: `chain,iteration,bic,accepted,move`.
pub fn traces_to_csv(traces: &[ChainTrace]) -> String {
    let mut out = String::from("chain,iteration,bic,accepted,move\n");
    for trace in traces {
        for rec in &trace.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                trace.chain_id,
                rec.iteration,
                rec.bic,
                rec.accepted,
                rec.move_type.name()
            ));
        }
    }
    out
}

/// Render the running best BIC of each chain as CSV:
/// `chain,iteration,best_bic`. This is the data behind "smallest BIC
/// identified so far" convergence plots.
pub fn best_bic_traces_to_csv(traces: &[ChainTrace]) -> String {
    let mut out = String::from("chain,iteration,best_bic\n");
    for trace in traces {
        let mut best = trace.initial_bic;
        out.push_str(&format!("{},0,{best}\n", trace.chain_id));
        for rec in &trace.records {
            best = best.min(rec.bic);
            out.push_str(&format!("{},{},{best}\n", trace.chain_id, rec.iteration));
        }
    }
    out
}

/// Generator for chain `chain_id`: one ChaCha8 stream per chain, all
/// derived from the master seed.
fn chain_rng(master_seed: u64, chain_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(chain_id as u64);
    rng
}

/// Sequential random-urn partition: each variable joins one of the
/// existing cliques or opens a new one, all options equally likely.
fn random_urn_partition<R: Rng>(b: usize, rng: &mut R) -> CliquePartition {
    let mut cliques: Vec<Vec<usize>> = vec![vec![0]];
    for v in 1..b {
        let k = cliques.len();
        let choice = rng.gen_range(0..=k);
        if choice == k {
            cliques.push(vec![v]);
        } else {
            cliques[choice].push(v);
        }
    }
    CliquePartition::new(cliques, b).expect("urn assignment is a partition")
}

fn random_valid_model_scored<S: Scorer, R: Rng>(
    scorer: &mut S,
    b: usize,
    rng: &mut R,
    cap: usize,
) -> Result<(CliquePartition, f64)> {
    let cap = cap.max(2);
    for attempt in 0..cap {
        // after cap/2 random failures fall back to the all-singleton
        // model, which is valid whenever no column is constant
        let candidate = if attempt < cap / 2 {
            random_urn_partition(b, rng)
        } else {
            CliquePartition::singletons(b)
        };
        if let Some(bic) = scorer.score(&candidate) {
            return Ok((candidate, bic));
        }
        if attempt >= cap / 2 {
            // the all-singleton model failed: some one-way marginal has a
            // zero, so no clique model on this table has MLEs
            break;
        }
    }
    Err(Error::NoValidModel(
        "no clique model with valid MLEs found; remove constant columns first".into(),
    ))
}

/// Sample a random clique model with valid MLEs, retrying up to `cap`
/// draws (default 1000 in [`SearchConfig`]).
pub fn random_valid_model<R: Rng>(
    table: &SparseTable,
    rng: &mut R,
    cap: usize,
) -> Result<CliquePartition> {
    let mut scorer = TableScorer::new(table);
    random_valid_model_scored(&mut scorer, table.b(), rng, cap).map(|(m, _)| m)
}

fn step_scored<S: Scorer, R: Rng>(
    scorer: &mut S,
    current: &mut (CliquePartition, f64),
    rng: &mut R,
    bag: Option<&mut ModelBag>,
) -> (bool, MoveType) {
    let proposal = propose(&current.0, rng);
    if proposal.degenerate {
        return (false, proposal.move_type);
    }
    match scorer.score(&proposal.partition) {
        None => (false, proposal.move_type),
        Some(candidate_bic) => {
            if let Some(bag) = bag {
                bag.insert(proposal.partition.clone(), candidate_bic);
            }
            let delta = candidate_bic - current.1;
            let accept = delta <= 0.0 || rng.gen::<f64>() < (-delta).exp();
            if accept {
                *current = (proposal.partition, candidate_bic);
            }
            (accept, proposal.move_type)
        }
    }
}

/// One acceptance step from `current`: propose, reject outright if the
/// proposal's MLEs do not exist, otherwise accept with probability
/// `min{1, exp(BIC(current) - BIC(proposal))}`.
pub fn step<R: Rng>(table: &SparseTable, current: &ScoredModel, rng: &mut R) -> Result<ScoredModel> {
    if !current.mle_exists {
        return Err(Error::ModelInvalid(
            "step requires a current model with valid MLEs".into(),
        ));
    }
    let mut scorer = TableScorer::new(table);
    let mut state = (current.partition.clone(), current.bic);
    step_scored(&mut scorer, &mut state, rng, None);
    Ok(ScoredModel::new(state.0, Some(state.1)))
}

/// Run one chain: draw a random valid initial model and take
/// `config.iterations` steps. Deterministic given
/// `(config.master_seed, chain_id)`. The bag holds the initial model and
/// every evaluated candidate whose MLEs existed.
pub fn run_chain(
    table: &SparseTable,
    config: &SearchConfig,
    chain_id: usize,
) -> Result<(ModelBag, ChainTrace)> {
    config.validate()?;
    let mut scorer = TableScorer::new(table);
    run_chain_scored(&mut scorer, table.b(), config, chain_id)
}

fn run_chain_scored<S: Scorer>(
    scorer: &mut S,
    b: usize,
    config: &SearchConfig,
    chain_id: usize,
) -> Result<(ModelBag, ChainTrace)> {
    let mut rng = chain_rng(config.master_seed, chain_id);
    let (init, init_bic) =
        random_valid_model_scored(scorer, b, &mut rng, config.init_retry_cap)?;
    let mut bag = ModelBag::new();
    bag.insert(init.clone(), init_bic);
    let mut current = (init, init_bic);
    let mut records = Vec::with_capacity(config.iterations);
    for iteration in 1..=config.iterations {
        let (accepted, move_type) = step_scored(scorer, &mut current, &mut rng, Some(&mut bag));
        records.push(TraceRecord { iteration, bic: current.1, accepted, move_type });
    }
    Ok((bag, ChainTrace { chain_id, initial_bic: init_bic, records }))
}

/// Result of a multi-chain search.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    /// Union of every chain's bag, deduplicated by canonical partition.
    pub bag: ModelBag,
    pub traces: Vec<ChainTrace>,
    /// Fraction of chains whose state history reached the bag's best BIC.
    pub hit_fraction: f64,
}

/// Run `config.chains` independent chains (in parallel across
/// `config.workers` threads) and merge their bags. The outcome is a pure
/// function of `(table, config)` and does not depend on the worker count.
pub fn run_search(table: &SparseTable, config: &SearchConfig) -> Result<SearchOutcome> {
    config.validate()?;
    if let Some(&col) = table.constant_columns().first() {
        return Err(Error::NoValidModel(format!(
            "column {:?} is constant; no clique model has MLEs (prune it first)",
            table.labels()[col]
        )));
    }
    let chain_results: Vec<Result<(ModelBag, ChainTrace)>> = if config.workers == 1 {
        (0..config.chains)
            .map(|id| run_chain(table, config, id))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::InputValue(format!("worker pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            (0..config.chains)
                .into_par_iter()
                .map(|id| run_chain(table, config, id))
                .collect()
        })
    };
    let mut bag = ModelBag::new();
    let mut traces = Vec::with_capacity(config.chains);
    for result in chain_results {
        let (chain_bag, trace) = result?;
        bag.merge(chain_bag);
        traces.push(trace);
    }
    let best = bag.best_bic().expect("every chain contributes a model");
    let hits = traces.iter().filter(|t| t.best_state_bic() <= best).count();
    let hit_fraction = hits as f64 / config.chains as f64;
    Ok(SearchOutcome { bag, traces, hit_fraction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contingency::CellPattern;

    fn small_table(seed: u64, b: usize, r: usize) -> SparseTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<u8>> = (0..r)
            .map(|_| (0..b).map(|_| rng.gen_bool(0.5) as u8).collect())
            .collect();
        SparseTable::from_rows(rows, None).unwrap()
    }

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

    #[test]
    fn propose_covers_spec_moves() {
        let m = CliquePartition::new([vec![0, 1], vec![2]], 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen_split = false;
        for _ in 0..200 {
            let p = propose(&m, &mut rng);
            if p.move_type == MoveType::Split && !p.degenerate {
                // the only bipartition of {0,1} is {0},{1}
                assert_eq!(p.partition, CliquePartition::singletons(3));
                seen_split = true;
            }
        }
        assert!(seen_split);

        // join of two singletons
        let m = CliquePartition::singletons(3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let joined = loop {
            let p = propose(&m, &mut rng);
            if p.move_type == MoveType::Join {
                break p.partition;
            }
        };
        assert_eq!(joined.len(), 2);

        // switch and move on {{1,2},{3,4}}
        let m = CliquePartition::new([vec![0, 1], vec![2, 3]], 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let p = propose(&m, &mut rng);
            match p.move_type {
                MoveType::Switch => {
                    assert!(!p.degenerate);
                    assert_eq!(p.partition.len(), 2);
                    assert_eq!(p.partition.cliques()[0].len(), 2);
                }
                MoveType::Move => {
                    assert!(!p.degenerate);
                    let sizes: Vec<usize> =
                        p.partition.cliques().iter().map(|c| c.len()).collect();
                    assert_eq!(p.partition.len(), 2);
                    assert!(sizes.contains(&1) && sizes.contains(&3));
                }
                _ => {}
            }
        }
    }

    #[test]
    fn degenerate_proposals_leave_model_unchanged() {
        let m = CliquePartition::saturated(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let p = propose(&m, &mut rng);
            if p.move_type != MoveType::Split {
                assert!(p.degenerate);
                assert_eq!(p.partition, m);
            }
        }
        let singleton = CliquePartition::new([vec![0]], 1).unwrap();
        let p = propose(&singleton, &mut rng);
        assert!(p.degenerate);
    }

    #[test]
    fn move_that_empties_source_drops_the_clique() {
        let m = CliquePartition::new([vec![0], vec![1, 2]], 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let p = propose(&m, &mut rng);
            if p.move_type == MoveType::Move {
                assert!(p.partition.len() == 2 || p.partition.len() == 1);
                if p.partition.len() == 1 {
                    assert_eq!(p.partition, CliquePartition::saturated(3));
                }
            }
        }
    }

    #[test]
    fn random_valid_model_is_deterministic_and_valid() {
        let table = small_table(11, 5, 100);
        let mut rng1 = ChaCha8Rng::seed_from_u64(7);
        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        let m1 = random_valid_model(&table, &mut rng1, 1000).unwrap();
        let m2 = random_valid_model(&table, &mut rng2, 1000).unwrap();
        assert_eq!(m1, m2);
        assert!(cliquemodel::mle_exists(&table, &m1));
    }

    #[test]
    fn random_valid_model_falls_back_to_singletons() {
        // one-hot rows: every pair's (1,1) marginal cell is empty, so the
        // all-singleton model is the only valid one and must be reached
        // through the fallback after random draws keep failing
        let rows: Vec<Vec<u8>> = (0..8)
            .flat_map(|i| {
                let mut row = vec![0u8; 8];
                row[i] = 1;
                std::iter::repeat_n(row, 3)
            })
            .collect();
        let table = SparseTable::from_rows(rows, None).unwrap();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_valid_model(&table, &mut rng, 1000).unwrap();
            assert_eq!(m, CliquePartition::singletons(8));
        }
    }

    #[test]
    fn random_valid_model_rejects_constant_column() {
        let rows: Vec<Vec<u8>> = vec![vec![0, 1], vec![0, 0], vec![0, 1]];
        let table = SparseTable::from_rows(rows, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        assert!(matches!(
            random_valid_model(&table, &mut rng, 50),
            Err(Error::NoValidModel(_))
        ));
    }

    #[test]
    fn step_rejects_invalid_proposals_regardless_of_rng() {
        // table where the joined model {{1,2}} has no MLEs
        let table = SparseTable::from_cells(
            [
                (CellPattern::parse_bitstring("00").unwrap(), 5),
                (CellPattern::parse_bitstring("01").unwrap(), 3),
                (CellPattern::parse_bitstring("10").unwrap(), 2),
            ],
            None,
        )
        .unwrap();
        let start = CliquePartition::singletons(2);
        let bic = cliquemodel::bic(&table, &start).unwrap();
        let current = ScoredModel::new(start.clone(), Some(bic));
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let next = step(&table, &current, &mut rng).unwrap();
            assert_eq!(next.partition, start, "only the singleton model is valid");
        }
    }

    #[test]
    fn acceptance_probability_matches_exp_delta() {
        // stub scorer: singleton model scores 0, saturated scores +3;
        // uphill moves should be accepted with probability e^-3
        struct Stub;
        impl Scorer for Stub {
            fn score(&mut self, m: &CliquePartition) -> Option<f64> {
                Some(if m.len() == 2 { 0.0 } else { 3.0 })
            }
        }
        let mut accepts = 0usize;
        let mut proposals = 0usize;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut scorer = Stub;
        for _ in 0..200_000 {
            let mut state = (CliquePartition::singletons(2), 0.0);
            let (accepted, mt) = step_scored(&mut scorer, &mut state, &mut rng, None);
            if mt == MoveType::Join {
                proposals += 1;
                accepts += accepted as usize;
            }
        }
        let rate = accepts as f64 / proposals as f64;
        let expected = (-3.0f64).exp();
        assert!(
            (rate - expected).abs() < 0.01,
            "acceptance rate {rate} should approximate {expected}"
        );

        // downhill moves are always accepted: starting from the saturated
        // model (score 3), a split to singletons (score 0) never rejects
        for _ in 0..500 {
            let mut state = (CliquePartition::saturated(2), 3.0);
            let (accepted, mt) = step_scored(&mut scorer, &mut state, &mut rng, None);
            if mt == MoveType::Split {
                assert!(accepted);
                assert_eq!(state.0, CliquePartition::singletons(2));
            }
        }
    }

    #[test]
    fn acceptance_is_shift_invariant() {
        // the same rng stream must produce the same decisions when all
        // scores are shifted by a constant
        struct Shifted<'a> {
            inner: TableScorer<'a>,
            shift: f64,
        }
        impl Scorer for Shifted<'_> {
            fn score(&mut self, m: &CliquePartition) -> Option<f64> {
                self.inner.score(m).map(|b| b + self.shift)
            }
        }
        let table = small_table(21, 4, 150);
        let config = SearchConfig {
            chains: 1,
            iterations: 400,
            master_seed: 33,
            workers: 1,
            ..SearchConfig::default()
        };
        let run = |shift: f64| {
            let mut scorer = Shifted { inner: TableScorer::new(&table), shift };
            let (_, trace) = run_chain_scored(&mut scorer, table.b(), &config, 0).unwrap();
            trace
                .records
                .iter()
                .map(|r| (r.accepted, r.move_type))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(0.0), run(1000.0));
        assert_eq!(run(0.0), run(-250.0));
    }

    #[test]
    fn zero_iterations_collects_only_initial_model() {
        let table = small_table(31, 4, 100);
        let config = SearchConfig {
            chains: 1,
            iterations: 0,
            master_seed: 5,
            workers: 1,
            ..SearchConfig::default()
        };
        let (bag, trace) = run_chain(&table, &config, 0).unwrap();
        assert_eq!(bag.len(), 1);
        assert!(trace.records.is_empty());
    }

    #[test]
    fn chains_are_deterministic() {
        let table = small_table(41, 5, 200);
        let config = SearchConfig {
            chains: 1,
            iterations: 500,
            master_seed: 99,
            workers: 1,
            ..SearchConfig::default()
        };
        let (bag1, trace1) = run_chain(&table, &config, 3).unwrap();
        let (bag2, trace2) = run_chain(&table, &config, 3).unwrap();
        assert_eq!(trace1, trace2);
        assert_eq!(bag1.sorted_models(), bag2.sorted_models());
    }

    #[test]
    fn one_chain_search_equals_run_chain() {
        let table = small_table(45, 4, 150);
        let config = SearchConfig {
            chains: 1,
            iterations: 250,
            master_seed: 3,
            workers: 1,
            ..SearchConfig::default()
        };
        let (bag, trace) = run_chain(&table, &config, 0).unwrap();
        let outcome = run_search(&table, &config).unwrap();
        assert_eq!(outcome.bag.sorted_models(), bag.sorted_models());
        assert_eq!(outcome.traces, vec![trace]);
        assert_eq!(outcome.hit_fraction, 1.0);
    }

    #[test]
    fn search_is_worker_count_independent() {
        let table = small_table(51, 5, 200);
        let base = SearchConfig {
            chains: 4,
            iterations: 300,
            master_seed: 17,
            workers: 1,
            ..SearchConfig::default()
        };
        let serial = run_search(&table, &base).unwrap();
        let parallel = run_search(
            &table,
            &SearchConfig { workers: 4, ..base.clone() },
        )
        .unwrap();
        assert_eq!(serial.bag.sorted_models(), parallel.bag.sorted_models());
        assert_eq!(serial.traces, parallel.traces);
        assert_eq!(serial.hit_fraction, parallel.hit_fraction);
    }

    #[test]
    fn bag_merge_is_associative_and_commutative() {
        let table = small_table(61, 4, 150);
        let config = SearchConfig {
            chains: 3,
            iterations: 200,
            master_seed: 4,
            workers: 1,
            ..SearchConfig::default()
        };
        let bags: Vec<ModelBag> = (0..3)
            .map(|id| run_chain(&table, &config, id).unwrap().0)
            .collect();
        let mut ab_c = bags[0].clone();
        ab_c.merge(bags[1].clone());
        ab_c.merge(bags[2].clone());
        let mut c_ba = bags[2].clone();
        let mut ba = bags[1].clone();
        ba.merge(bags[0].clone());
        c_ba.merge(ba);
        assert_eq!(ab_c.sorted_models(), c_ba.sorted_models());
    }

    #[test]
    fn every_bag_entry_has_valid_mles() {
        let table = small_table(71, 4, 120);
        let config = SearchConfig {
            chains: 2,
            iterations: 500,
            master_seed: 8,
            workers: 1,
            ..SearchConfig::default()
        };
        let outcome = run_search(&table, &config).unwrap();
        for model in outcome.bag.sorted_models() {
            assert!(cliquemodel::mle_exists(&table, &model.partition));
            assert!(model.bic.is_finite());
        }
        assert!(outcome.hit_fraction > 0.0);
    }

    #[test]
    fn bag_json_round_trip() {
        let mut bag = ModelBag::new();
        bag.insert(CliquePartition::singletons(3), -5.0);
        bag.insert(CliquePartition::saturated(3), -7.5);
        let text = bag.to_json();
        let back = ModelBag::from_json(&text, 3).unwrap();
        assert_eq!(bag.sorted_models(), back.sorted_models());
    }

    #[test]
    fn trace_csv_shape() {
        let table = t1();
        let config = SearchConfig {
            chains: 1,
            iterations: 3,
            master_seed: 2,
            workers: 1,
            ..SearchConfig::default()
        };
        let (_, trace) = run_chain(&table, &config, 0).unwrap();
        assert_eq!(trace.records.len(), 3);
        let csv = traces_to_csv(&[trace]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "chain,iteration,bic,accepted,move");
        assert_eq!(lines.len(), 4);
    }
}
