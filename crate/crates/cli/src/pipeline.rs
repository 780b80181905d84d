//! Subcommand implementations. Every file-producing command writes its
//! outputs atomically (temp file + rename) into the run directory under a
//! fixed name, then writes `manifest.json` last.

use std::fs;
use std::path::Path;
use std::time::Instant;

use cliquelog::{
    binarize, cliquemodel, connectivity_graph, contingency, graphio, occams_window, posterior,
    prune_isolated, run_search, search, synth, threshold_edges, SearchConfig, SparseTable,
    SynthSpec,
};
use rand::SeedableRng;

use crate::manifest::RunManifest;
use crate::{CliError, HeaderMode, InputFormat};

pub type CliResult = Result<(), CliError>;

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn write_atomic(dir: &Path, name: &str, content: &str) -> Result<String, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
    let target = dir.join(name);
    let tmp = dir.join(format!("{name}.partial"));
    fs::write(&tmp, content)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, &target)
        .map_err(|e| CliError::Internal(format!("cannot finalize {}: {e}", target.display())))?;
    Ok(target.display().to_string())
}

fn finish(dir: &Path, mut manifest: RunManifest, started: Instant) -> CliResult {
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    let json = manifest.to_json();
    write_atomic(dir, "manifest.json", &json)?;
    Ok(())
}

fn load_table(path: &Path) -> Result<SparseTable, CliError> {
    let text = read_input(path)?;
    Ok(SparseTable::parse_cells_text(&text)?)
}

pub fn cmd_ingest(
    input: &Path,
    format: InputFormat,
    binarize_threshold: Option<u64>,
    header: HeaderMode,
    output_dir: &Path,
) -> CliResult {
    let started = Instant::now();
    let text = read_input(input)?;
    let header = header.as_option();
    // an explicit binarize threshold implies a count matrix
    let format = if binarize_threshold.is_some() { InputFormat::Counts } else { format };
    let table = match format {
        InputFormat::Matrix => SparseTable::parse_matrix_text(&text, header)?,
        InputFormat::Cells => SparseTable::parse_cells_text(&text)?,
        InputFormat::Counts => {
            let (counts, names) = contingency::parse_count_matrix_text(&text, header)?;
            let rows = binarize(&counts, binarize_threshold.unwrap_or(1))?;
            SparseTable::from_rows(rows, names)?
        }
    };
    let mut manifest = RunManifest::new("ingest", vec![input.display().to_string()]);
    manifest.flag("format", format.name());
    if let Some(t) = binarize_threshold {
        manifest.flag("binarize-threshold", t);
    }
    let out = write_atomic(output_dir, "table.cells", &table.to_cells_text())?;
    manifest.outputs.push(out);
    println!(
        "ingested {}: B={}, R={}, {} positive cells",
        input.display(),
        table.b(),
        table.r(),
        table.cells().len()
    );
    finish(output_dir, manifest, started)
}

pub fn cmd_preprocess(table_path: &Path, output_dir: &Path) -> CliResult {
    let started = Instant::now();
    let table = load_table(table_path)?;
    let graph = connectivity_graph(&table)?;
    let mut manifest = RunManifest::new("preprocess", vec![table_path.display().to_string()]);
    let (reduced, dropped) = match prune_isolated(&table, &graph) {
        Ok(result) => result,
        Err(cliquelog::Error::EmptyModelSpace) => {
            // nothing can associate; keep the table so downstream stages
            // still run (the search will settle on the all-singleton model)
            manifest
                .warnings
                .push("every variable is isolated; table left unreduced".to_string());
            (table.clone(), Vec::new())
        }
        Err(e) => return Err(e.into()),
    };
    manifest.flag("dropped", dropped.join(","));
    let degrees = graphio::degree_report(&graph);
    for (name, content) in [
        ("table.cells", reduced.to_cells_text()),
        ("connectivity.dot", graphio::export_dot(&graph)),
        ("degrees.csv", graphio::degrees_to_csv(&degrees)),
    ] {
        manifest.outputs.push(write_atomic(output_dir, name, &content)?);
    }
    println!(
        "preprocessed: {} -> {} variables ({} isolated dropped), {} edges",
        table.b(),
        reduced.b(),
        dropped.len(),
        graph.edge_count()
    );
    for warning in &manifest.warnings {
        println!("warning: {warning}");
    }
    finish(output_dir, manifest, started)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_search(
    table_path: &Path,
    chains: usize,
    iters: usize,
    c: f64,
    seed: u64,
    workers: usize,
    output_dir: &Path,
) -> CliResult {
    let started = Instant::now();
    let table = load_table(table_path)?;
    let workers = resolve_workers(workers);
    let config = SearchConfig {
        chains,
        iterations: iters,
        master_seed: seed,
        occam_c: c,
        workers,
        ..SearchConfig::default()
    };
    let outcome = run_search(&table, &config)?;
    let mut manifest = RunManifest::new("search", vec![table_path.display().to_string()]);
    manifest.flag("chains", chains);
    manifest.flag("iters", iters);
    manifest.flag("c", c);
    manifest.flag("seed", seed);
    manifest.flag("workers", workers);
    manifest.hit_fraction = Some(outcome.hit_fraction);
    for (name, content) in [
        ("bag.json", outcome.bag.to_json()),
        ("traces.csv", search::traces_to_csv(&outcome.traces)),
        ("best_bic.csv", search::best_bic_traces_to_csv(&outcome.traces)),
    ] {
        manifest.outputs.push(write_atomic(output_dir, name, &content)?);
    }
    println!(
        "search: {} distinct models, best BIC {}, hit fraction {:.2}",
        outcome.bag.len(),
        outcome.bag.best_bic().unwrap_or(f64::INFINITY),
        outcome.hit_fraction
    );
    finish(output_dir, manifest, started)
}

pub fn cmd_bma(
    bag_path: &Path,
    table_path: &Path,
    c: f64,
    edge_threshold: f64,
    output_dir: &Path,
) -> CliResult {
    let started = Instant::now();
    if !(0.0..=1.0).contains(&edge_threshold) {
        return Err(CliError::Input(format!(
            "edge threshold must lie in [0,1], got {edge_threshold}"
        )));
    }
    let table = load_table(table_path)?;
    let bag_text = read_input(bag_path)?;
    let bag = cliquelog::ModelBag::from_json(&bag_text, table.b())?;
    let retained = occams_window(&bag, c)?;
    let labels = table.labels().to_vec();
    let probs = cliquelog::edge_probabilities(&retained, &labels)?;
    let edges = threshold_edges(&probs, edge_threshold);
    let existence = cliquelog::existence_probabilities(&retained, &table)?;
    let bma = graphio::bma_graph(&edges, &labels)?;
    let mut manifest = RunManifest::new(
        "bma",
        vec![bag_path.display().to_string(), table_path.display().to_string()],
    );
    manifest.flag("c", c);
    manifest.flag("edge-threshold", edge_threshold);
    for (name, content) in [
        ("models.json", retained.to_json()),
        ("edges.csv", posterior::edges_to_csv(&edges, &labels)),
        ("existence.csv", posterior::existence_to_csv(&existence)),
        ("graph.dot", graphio::export_dot(&bma)),
    ] {
        manifest.outputs.push(write_atomic(output_dir, name, &content)?);
    }
    println!(
        "bma: {} of {} models retained, {} edges above {edge_threshold}",
        retained.len(),
        bag.len(),
        edges.len()
    );
    finish(output_dir, manifest, started)
}

pub fn cmd_simulate(spec_path: &Path, noise_flip: f64, output_dir: &Path) -> CliResult {
    let started = Instant::now();
    let text = read_input(spec_path)?;
    let spec: SynthSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("spec json: {e}")))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
    let (matrix, planted) = synth::generate(&spec, &mut rng)?;
    let matrix = if noise_flip > 0.0 {
        synth::inject_noise(&matrix, noise_flip, &mut rng)?
    } else {
        matrix
    };
    let mut csv = spec.labels().join(",");
    csv.push('\n');
    for row in &matrix {
        let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        csv.push_str(&line.join(","));
        csv.push('\n');
    }
    let mut manifest = RunManifest::new("simulate", vec![spec_path.display().to_string()]);
    manifest.flag("noise-flip", noise_flip);
    manifest.flag("seed", spec.seed);
    for (name, content) in [
        ("matrix.csv", csv),
        ("planted.dot", graphio::export_dot(&planted)),
        ("planted.json", graphio::graph_to_json(&planted)),
    ] {
        manifest.outputs.push(write_atomic(output_dir, name, &content)?);
    }
    println!(
        "simulated {}x{} matrix with {} planted edges",
        spec.r,
        spec.b,
        planted.edge_count()
    );
    finish(output_dir, manifest, started)
}

pub fn cmd_count_models(b: usize) -> CliResult {
    println!("{}", cliquemodel::count_clique_models(b));
    Ok(())
}

pub fn cmd_diff(edges1: &Path, edges2: &Path, output_dir: &Path) -> CliResult {
    let started = Instant::now();
    let left_rows = posterior::edges_from_csv(&read_input(edges1)?)?;
    let right_rows = posterior::edges_from_csv(&read_input(edges2)?)?;
    // both graphs share the union vertex set so the diff is well defined
    let mut vertices: Vec<String> = Vec::new();
    for (a, b, _) in left_rows.iter().chain(right_rows.iter()) {
        vertices.push(a.clone());
        vertices.push(b.clone());
    }
    let build = |rows: &[(String, String, f64)]| -> Result<graphio::Graph, CliError> {
        let mut g = graphio::Graph::new();
        for v in &vertices {
            g.add_vertex(v.clone());
        }
        for (a, b, p) in rows {
            g.add_edge(a.clone(), b.clone(), Some(*p))?;
        }
        Ok(g)
    };
    let diff = cliquelog::graph_diff(&build(&left_rows)?, &build(&right_rows)?)?;
    let mut rows: Vec<(String, String, &str)> = Vec::new();
    for (a, b) in &diff.shared {
        rows.push((a.clone(), b.clone(), "shared"));
    }
    for (a, b) in &diff.only_left {
        rows.push((a.clone(), b.clone(), "left_only"));
    }
    for (a, b) in &diff.only_right {
        rows.push((a.clone(), b.clone(), "right_only"));
    }
    rows.sort();
    let mut csv = String::from("var_i,var_j,where\n");
    for (a, b, w) in &rows {
        csv.push_str(&format!("{a},{b},{w}\n"));
    }
    let mut manifest = RunManifest::new(
        "diff",
        vec![edges1.display().to_string(), edges2.display().to_string()],
    );
    manifest.outputs.push(write_atomic(output_dir, "diff.csv", &csv)?);
    println!(
        "diff: {} shared, {} left-only, {} right-only",
        diff.shared.len(),
        diff.only_left.len(),
        diff.only_right.len()
    );
    finish(output_dir, manifest, started)
}

pub fn resolve_workers(workers: usize) -> usize {
    if workers == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        workers
    }
}
