//! Synthetic connectivity matrices with planted clique structure.
//!
//! Each planted clique owns a dedicated, contiguous block of rows; inside
//! the block its member columns fire with probability `p_in`, every other
//! cell in the matrix fires with probability `p_bg`. Rows that end up all
//! zero get a single 1 at a uniformly chosen column, so every observation
//! matches at least one variable and R is preserved exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphio::Graph;

/// Specification of one synthetic matrix. Serializable as the simulate
/// config file; `planted` uses 1-based variable indices there, matching
/// the partition text format.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Variable (column) count.
    pub b: usize,
    /// Observation (row) count.
    pub r: usize,
    /// Disjoint planted cliques, 1-based variable indices.
    #[serde(default)]
    pub planted: Vec<Vec<usize>>,
    /// In-clique signal probability.
    #[serde(default = "default_p_in")]
    pub p_in: f64,
    /// Background probability.
    #[serde(default = "default_p_bg")]
    pub p_bg: f64,
    /// Fraction of rows dedicated to each planted clique; when absent,
    /// 80% of the rows are split evenly among the cliques.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clique_row_fraction: Option<f64>,
    /// Generator seed.
    #[serde(default)]
    pub seed: u64,
}

fn default_p_in() -> f64 {
    0.8
}

fn default_p_bg() -> f64 {
    0.2
}

impl SynthSpec {
    /// Planted cliques as 0-based indices, validated: in range, nonempty,
    /// pairwise disjoint.
    fn planted_zero_based(&self) -> Result<Vec<Vec<usize>>> {
        let mut seen = vec![false; self.b];
        let mut out = Vec::with_capacity(self.planted.len());
        for clique in &self.planted {
            if clique.is_empty() {
                return Err(Error::Spec("planted clique is empty".into()));
            }
            let mut members = Vec::with_capacity(clique.len());
            for &v in clique {
                if v == 0 || v > self.b {
                    return Err(Error::Spec(format!(
                        "planted variable {v} out of range 1..={}",
                        self.b
                    )));
                }
                if seen[v - 1] {
                    return Err(Error::Spec(format!(
                        "planted cliques overlap at variable {v}"
                    )));
                }
                seen[v - 1] = true;
                members.push(v - 1);
            }
            members.sort_unstable();
            out.push(members);
        }
        Ok(out)
    }

    /// Rows dedicated to each planted clique.
    fn block_sizes(&self) -> Result<Vec<usize>> {
        let m = self.planted.len();
        if m == 0 {
            return Ok(Vec::new());
        }
        let fraction = match self.clique_row_fraction {
            Some(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::Spec(format!(
                        "clique_row_fraction must lie in (0,1], got {f}"
                    )));
                }
                f
            }
            None => 0.8 / m as f64,
        };
        let each = (fraction * self.r as f64).floor() as usize;
        if each == 0 {
            return Err(Error::Spec("clique row blocks are empty".into()));
        }
        if each * m > self.r {
            return Err(Error::Spec(format!(
                "clique row blocks ({} x {m}) exceed R = {}",
                each, self.r
            )));
        }
        Ok(vec![each; m])
    }

    fn validate(&self) -> Result<()> {
        if self.b == 0 || self.r == 0 {
            return Err(Error::Spec("B and R must be positive".into()));
        }
        if !(self.p_bg > 0.0 && self.p_bg < self.p_in && self.p_in <= 1.0) {
            return Err(Error::Spec(format!(
                "need 0 < p_bg < p_in <= 1, got p_bg = {}, p_in = {}",
                self.p_bg, self.p_in
            )));
        }
        self.planted_zero_based()?;
        self.block_sizes()?;
        Ok(())
    }

    /// Labels `V1..VB`, shared by the matrix header and the planted graph.
    pub fn labels(&self) -> Vec<String> {
        (1..=self.b).map(|i| format!("V{i}")).collect()
    }

    /// The planted independence graph: clique expansions over all B
    /// vertices.
    pub fn planted_graph(&self) -> Result<Graph> {
        let labels = self.labels();
        let mut graph = Graph::new();
        for label in &labels {
            graph.add_vertex(label.clone());
        }
        for clique in self.planted_zero_based()? {
            for (pos, &a) in clique.iter().enumerate() {
                for &b in &clique[pos + 1..] {
                    graph.add_edge(labels[a].clone(), labels[b].clone(), None)?;
                }
            }
        }
        Ok(graph)
    }
}

/// Generate the matrix and its planted graph. Cells are drawn row-major
/// from the single `rng` stream, so output is a pure function of
/// (spec, rng state).
pub fn generate<R: Rng>(spec: &SynthSpec, rng: &mut R) -> Result<(Vec<Vec<u8>>, Graph)> {
    spec.validate()?;
    let planted = spec.planted_zero_based()?;
    let blocks = spec.block_sizes()?;
    // block_of[row] = index of the clique owning that row, if any
    let mut owner: Vec<Option<usize>> = vec![None; spec.r];
    let mut next = 0usize;
    for (ci, &size) in blocks.iter().enumerate() {
        for slot in owner.iter_mut().skip(next).take(size) {
            *slot = Some(ci);
        }
        next += size;
    }
    let mut member = vec![vec![false; spec.b]; planted.len()];
    for (ci, clique) in planted.iter().enumerate() {
        for &v in clique {
            member[ci][v] = true;
        }
    }
    let mut matrix = Vec::with_capacity(spec.r);
    for row_owner in owner {
        let mut row = vec![0u8; spec.b];
        for (col, cell) in row.iter_mut().enumerate() {
            let p = match row_owner {
                Some(ci) if member[ci][col] => spec.p_in,
                _ => spec.p_bg,
            };
            *cell = rng.gen_bool(p) as u8;
        }
        if row.iter().all(|&c| c == 0) {
            row[rng.gen_range(0..spec.b)] = 1;
        }
        matrix.push(row);
    }
    Ok((matrix, spec.planted_graph()?))
}

/// Flip each 0 cell to 1 independently with probability `p_flip`; 1 cells
/// are untouched.
pub fn inject_noise<R: Rng>(matrix: &[Vec<u8>], p_flip: f64, rng: &mut R) -> Result<Vec<Vec<u8>>> {
    if !(0.0..=1.0).contains(&p_flip) {
        return Err(Error::InputValue(format!(
            "flip probability must lie in [0,1], got {p_flip}"
        )));
    }
    Ok(matrix
        .iter()
        .map(|row| {
            row.iter()
                .map(|&c| {
                    if c == 0 && p_flip > 0.0 && rng.gen_bool(p_flip) {
                        1
                    } else {
                        c
                    }
                })
                .collect()
        })
        .collect())
}

/// Recall and precision of an estimated edge set against the planted
/// truth. Vertex label sets must match.
pub fn recovery_score(planted: &Graph, estimated: &Graph) -> Result<(f64, f64)> {
    let pv: Vec<&str> = planted.vertices().collect();
    let ev: Vec<&str> = estimated.vertices().collect();
    if pv != ev {
        return Err(Error::LabelMismatch(
            "planted and estimated graphs cover different vertices".into(),
        ));
    }
    let planted_edges: std::collections::BTreeSet<(String, String)> = planted
        .edges()
        .map(|(a, b, _)| (a.to_string(), b.to_string()))
        .collect();
    let estimated_edges: std::collections::BTreeSet<(String, String)> = estimated
        .edges()
        .map(|(a, b, _)| (a.to_string(), b.to_string()))
        .collect();
    let hit = planted_edges.intersection(&estimated_edges).count() as f64;
    let recall = if planted_edges.is_empty() {
        1.0
    } else {
        hit / planted_edges.len() as f64
    };
    let precision = if estimated_edges.is_empty() {
        1.0
    } else {
        hit / estimated_edges.len() as f64
    };
    Ok((recall, precision))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(b: usize, r: usize, planted: Vec<Vec<usize>>, seed: u64) -> SynthSpec {
        SynthSpec {
            b,
            r,
            planted,
            p_in: 0.8,
            p_bg: 0.2,
            clique_row_fraction: None,
            seed,
        }
    }

    #[test]
    fn block_signal_rate_is_near_p_in() {
        let s = SynthSpec {
            clique_row_fraction: Some(0.5),
            ..spec(5, 100, vec![vec![1, 2]], 7)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let (matrix, graph) = generate(&s, &mut rng).unwrap();
        assert_eq!(matrix.len(), 100);
        assert!(graph.has_edge("V1", "V2"));
        // in-block, in-clique cells: 50 rows x 2 cols, Bernoulli(0.8);
        // allow a 3-sigma binomial band (sigma = sqrt(.8*.2/100) = 0.04)
        let ones: u32 = matrix[..50]
            .iter()
            .map(|row| u32::from(row[0]) + u32::from(row[1]))
            .sum();
        let rate = f64::from(ones) / 100.0;
        assert!((rate - 0.8).abs() < 0.12, "in-clique rate {rate}");
    }

    #[test]
    fn empty_planted_is_pure_background() {
        let s = spec(4, 200, vec![], 3);
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let (matrix, graph) = generate(&s, &mut rng).unwrap();
        assert_eq!(graph.edge_count(), 0);
        assert_eq!(graph.vertex_count(), 4);
        // every row has at least one 1 after the zero-row repair
        assert!(matrix.iter().all(|row| row.contains(&1)));
    }

    #[test]
    fn generation_is_deterministic() {
        let s = spec(6, 150, vec![vec![1, 2, 3]], 11);
        let mut r1 = ChaCha8Rng::seed_from_u64(s.seed);
        let mut r2 = ChaCha8Rng::seed_from_u64(s.seed);
        assert_eq!(generate(&s, &mut r1).unwrap().0, generate(&s, &mut r2).unwrap().0);
    }

    #[test]
    fn signal_separates_from_background() {
        let s = spec(10, 1000, vec![vec![1, 2, 3]], 23);
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let (matrix, _) = generate(&s, &mut rng).unwrap();
        let block = (0.8f64 / 1.0 * 1000.0).floor() as usize;
        let in_rate: f64 = matrix[..block]
            .iter()
            .map(|r| (r[0] + r[1] + r[2]) as f64 / 3.0)
            .sum::<f64>()
            / block as f64;
        let bg_rate: f64 = matrix[..block]
            .iter()
            .map(|r| r[3..].iter().map(|&c| c as f64).sum::<f64>() / 7.0)
            .sum::<f64>()
            / block as f64;
        assert!(in_rate > bg_rate + 0.3, "in {in_rate} vs bg {bg_rate}");
    }

    #[test]
    fn spec_validation() {
        assert!(generate(&spec(4, 10, vec![vec![0]], 1), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        assert!(generate(&spec(4, 10, vec![vec![5]], 1), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        assert!(generate(&spec(4, 10, vec![vec![1, 2], vec![2, 3]], 1), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        // blocks exceeding R
        let s = SynthSpec {
            clique_row_fraction: Some(0.9),
            ..spec(4, 10, vec![vec![1, 2], vec![3, 4]], 1)
        };
        assert!(matches!(
            generate(&s, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::Spec(_))
        ));
        let bad_p = SynthSpec { p_in: 0.2, p_bg: 0.2, ..spec(4, 10, vec![], 1) };
        assert!(matches!(
            generate(&bad_p, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::Spec(_))
        ));
    }

    #[test]
    fn noise_injection_edge_cases() {
        let matrix = vec![vec![0u8, 1], vec![0, 0]];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(inject_noise(&matrix, 0.0, &mut rng).unwrap(), matrix);
        let all_ones = inject_noise(&matrix, 1.0, &mut rng).unwrap();
        assert!(all_ones.iter().flatten().all(|&c| c == 1));

        // binomial bound: 1000 zero cells at p = 0.05 -> 50 +- 3*sigma
        let zeros = vec![vec![0u8; 100]; 10];
        let flipped = inject_noise(&zeros, 0.05, &mut rng).unwrap();
        let ones: usize = flipped.iter().flatten().map(|&c| c as usize).sum();
        let sigma = (1000.0f64 * 0.05 * 0.95).sqrt();
        assert!((ones as f64 - 50.0).abs() < 3.0 * sigma, "{ones} flips");
    }

    #[test]
    fn recovery_score_cases() {
        let mut planted = Graph::new();
        for v in ["V1", "V2", "V3", "V4"] {
            planted.add_vertex(v);
        }
        planted.add_edge("V1", "V2", None).unwrap();

        let mut over = planted.clone();
        over.add_edge("V3", "V4", None).unwrap();
        assert_eq!(recovery_score(&planted, &over).unwrap(), (1.0, 0.5));
        assert_eq!(recovery_score(&planted, &planted).unwrap(), (1.0, 1.0));

        let mut disjoint = Graph::new();
        for v in ["V1", "V2", "V3", "V4"] {
            disjoint.add_vertex(v);
        }
        disjoint.add_edge("V3", "V4", None).unwrap();
        assert_eq!(recovery_score(&planted, &disjoint).unwrap(), (0.0, 0.0));

        let mut other = Graph::new();
        other.add_vertex("X");
        assert!(matches!(
            recovery_score(&planted, &other),
            Err(Error::LabelMismatch(_))
        ));
    }
}
