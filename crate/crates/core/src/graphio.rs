//! Connectivity and independence graphs, and their exports.
//!
//! Vertex labels — not column indices — are the stable identity here:
//! pruning renumbers columns, and graphs from two populations are diffed
//! by name. Storage is ordered (B-trees), so every export is byte
//! deterministic.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cliquemodel::CliquePartition;
use crate::contingency::SparseTable;
use crate::error::{Error, Result};
use crate::posterior::{Bucket, ThresholdedEdge};

/// Undirected graph over labeled vertices with optionally weighted edges.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Graph {
    vertices: BTreeSet<String>,
    edges: BTreeMap<(String, String), Option<f64>>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn add_vertex(&mut self, label: impl Into<String>) {
        self.vertices.insert(label.into());
    }

    /// Insert an undirected edge; endpoints are added as vertices,
    /// self-loops are rejected.
    pub fn add_edge(
        &mut self,
        a: impl Into<String>,
        b: impl Into<String>,
        weight: Option<f64>,
    ) -> Result<()> {
        let (a, b) = (a.into(), b.into());
        if a == b {
            return Err(Error::InputValue(format!("self-loop at {a:?}")));
        }
        self.vertices.insert(a.clone());
        self.vertices.insert(b.clone());
        self.edges.insert(ordered(a, b), weight);
        Ok(())
    }

    pub fn vertices(&self) -> impl Iterator<Item = &str> {
        self.vertices.iter().map(String::as_str)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.edges.contains_key(&ordered(a.to_string(), b.to_string()))
    }

    /// Edges in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, Option<f64>)> {
        self.edges.iter().map(|((a, b), &w)| (a.as_str(), b.as_str(), w))
    }

    pub fn degree(&self, v: &str) -> usize {
        self.edges
            .keys()
            .filter(|(a, b)| a == v || b == v)
            .count()
    }

    fn edge_set(&self) -> BTreeSet<(String, String)> {
        self.edges.keys().cloned().collect()
    }
}

fn ordered(a: String, b: String) -> (String, String) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Connectivity graph of a table: one vertex per variable, an edge where
/// the pair's 2x2 marginal is strictly positive. This is the superset of
/// every valid clique model's independence graph on the table. Pairs are
/// tested in parallel and assembled in sorted order.
pub fn connectivity_graph(table: &SparseTable) -> Result<Graph> {
    if !table.constant_columns().is_empty() {
        let names: Vec<&str> = table
            .constant_columns()
            .iter()
            .map(|&c| table.labels()[c].as_str())
            .collect();
        return Err(Error::Preprocess(format!(
            "constant columns {names:?}; no clique model can include them"
        )));
    }
    let b = table.b();
    let pairs: Vec<(usize, usize)> = (0..b)
        .flat_map(|i| (i + 1..b).map(move |j| (i, j)))
        .collect();
    use rayon::prelude::*;
    let positive: Vec<(usize, usize)> = pairs
        .into_par_iter()
        .filter(|&(i, j)| {
            table
                .two_way_positive(i, j)
                .expect("pair indices are in range")
        })
        .collect();
    let mut graph = Graph::new();
    for label in table.labels() {
        graph.add_vertex(label.clone());
    }
    let mut sorted = positive;
    sorted.sort_unstable();
    for (i, j) in sorted {
        graph.add_edge(table.labels()[i].clone(), table.labels()[j].clone(), None)?;
    }
    Ok(graph)
}

/// Drop the columns of degree-0 vertices and re-aggregate the table over
/// the remaining variables. Returns the reduced table and the dropped
/// labels. Errs with [`Error::EmptyModelSpace`] when every vertex is
/// isolated, since dropping all of them would delete the table.
pub fn prune_isolated(table: &SparseTable, graph: &Graph) -> Result<(SparseTable, Vec<String>)> {
    let table_labels: BTreeSet<String> = table.labels().iter().cloned().collect();
    let graph_labels: BTreeSet<String> = graph.vertices.iter().cloned().collect();
    if table_labels != graph_labels {
        return Err(Error::LabelMismatch(
            "graph was not built from this table".into(),
        ));
    }
    let dropped: Vec<String> = table
        .labels()
        .iter()
        .filter(|l| graph.degree(l) == 0)
        .cloned()
        .collect();
    if dropped.is_empty() {
        return Ok((table.clone(), dropped));
    }
    if dropped.len() == table.b() {
        return Err(Error::EmptyModelSpace);
    }
    let keep: Vec<usize> = (0..table.b())
        .filter(|&c| graph.degree(&table.labels()[c]) > 0)
        .collect();
    let names: Vec<String> = keep.iter().map(|&c| table.labels()[c].clone()).collect();
    let cells = table
        .cells()
        .iter()
        .map(|(pat, count)| (pat.extract(&keep), *count));
    let reduced = SparseTable::from_cells(cells, Some(names))?;
    Ok((reduced, dropped))
}

/// Degree of each vertex as a proportion of the total vertex count,
/// sorted by label.
pub fn degree_report(graph: &Graph) -> Vec<(String, f64)> {
    let total = graph.vertex_count() as f64;
    graph
        .vertices
        .iter()
        .map(|v| (v.clone(), graph.degree(v) as f64 / total))
        .collect()
}

/// Render a degree report as CSV: `variable,degree_proportion`.
pub fn degrees_to_csv(report: &[(String, f64)]) -> String {
    let mut out = String::from("variable,degree_proportion\n");
    for (label, proportion) in report {
        out.push_str(&format!("{label},{proportion}\n"));
    }
    out
}

/// Independence graph of a clique model: the union of complete graphs on
/// each generator, with no edges between generators. The partition is
/// recoverable as the connected components.
pub fn partition_to_graph(m: &CliquePartition, labels: &[String]) -> Result<Graph> {
    if labels.len() != m.b() {
        return Err(Error::LabelMismatch(format!(
            "{} labels for {} variables",
            labels.len(),
            m.b()
        )));
    }
    let mut graph = Graph::new();
    for label in labels {
        graph.add_vertex(label.clone());
    }
    for clique in m.cliques() {
        for (pos, &a) in clique.iter().enumerate() {
            for &b in &clique[pos + 1..] {
                graph.add_edge(labels[a].clone(), labels[b].clone(), None)?;
            }
        }
    }
    Ok(graph)
}

/// Build a weighted graph over all `labels` from thresholded BMA edges.
pub fn bma_graph(edges: &[ThresholdedEdge], labels: &[String]) -> Result<Graph> {
    let mut graph = Graph::new();
    for label in labels {
        graph.add_vertex(label.clone());
    }
    for e in edges {
        graph.add_edge(labels[e.i].clone(), labels[e.j].clone(), Some(e.probability))?;
    }
    Ok(graph)
}

/// Edge-set difference of two graphs over the same vertex set.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphDiff {
    pub only_left: BTreeSet<(String, String)>,
    pub only_right: BTreeSet<(String, String)>,
    pub shared: BTreeSet<(String, String)>,
}

/// Split `g1 ∪ g2` edges into left-only, right-only, and shared. The
/// vertex sets must match by label.
pub fn graph_diff(g1: &Graph, g2: &Graph) -> Result<GraphDiff> {
    if g1.vertices != g2.vertices {
        return Err(Error::LabelMismatch(
            "graphs have different vertex sets".into(),
        ));
    }
    let left = g1.edge_set();
    let right = g2.edge_set();
    Ok(GraphDiff {
        only_left: left.difference(&right).cloned().collect(),
        only_right: right.difference(&left).cloned().collect(),
        shared: left.intersection(&right).cloned().collect(),
    })
}

fn dot_escape(label: &str) -> String {
    label.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Render as DOT. Weighted edges (BMA probabilities) are colored by
/// bucket and labeled with the probability; vertex and edge order is
/// sorted, so equal graphs export byte-identically.
pub fn export_dot(graph: &Graph) -> String {
    let mut out = String::from("graph associations {\n");
    for v in &graph.vertices {
        out.push_str(&format!("  \"{}\";\n", dot_escape(v)));
    }
    for ((a, b), weight) in &graph.edges {
        match weight {
            Some(p) => out.push_str(&format!(
                "  \"{}\" -- \"{}\" [color=\"{}\", label=\"{}\"];\n",
                dot_escape(a),
                dot_escape(b),
                Bucket::of(*p).name(),
                p
            )),
            None => out.push_str(&format!(
                "  \"{}\" -- \"{}\";\n",
                dot_escape(a),
                dot_escape(b)
            )),
        }
    }
    out.push_str("}\n");
    out
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    vertices: Vec<String>,
    edges: Vec<EdgeJson>,
}

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    u: String,
    v: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
}

/// JSON form: `{"vertices":[...],"edges":[{"u":...,"v":...,"weight":...}]}`
/// with sorted vertices and edges.
pub fn graph_to_json(graph: &Graph) -> String {
    let doc = GraphJson {
        vertices: graph.vertices.iter().cloned().collect(),
        edges: graph
            .edges
            .iter()
            .map(|((a, b), &w)| EdgeJson { u: a.clone(), v: b.clone(), weight: w })
            .collect(),
    };
    serde_json::to_string(&doc).expect("graph serializes")
}

/// Parse the JSON form back into a graph.
pub fn graph_from_json(text: &str) -> Result<Graph> {
    let doc: GraphJson =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("graph json: {e}")))?;
    let mut graph = Graph::new();
    for v in doc.vertices {
        graph.add_vertex(v);
    }
    for e in doc.edges {
        graph.add_edge(e.u, e.v, e.weight)?;
    }
    Ok(graph)
}
