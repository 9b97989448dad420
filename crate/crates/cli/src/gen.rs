use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gamma_osdp::linalg::io::{format_graph, format_matrix, parse_graph, parse_matrix};
use gamma_osdp::omc::io::write_sequence;
use gamma_osdp::synth::{clique_graph, gen_bicluster as synth_bicluster, gen_sequence, BiclusterSpec, PlantedInstance};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{write_json, write_text, RunRecord, UsageError};

pub const U_FILE: &str = "U.txt";
pub const ROW_GRAPH_FILE: &str = "row_graph.txt";
pub const COL_GRAPH_FILE: &str = "col_graph.txt";
pub const SEQUENCE_FILE: &str = "sequence.csv";
pub const INSTANCE_FILE: &str = "instance.json";

#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct GenBiclusterArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub l: usize,
    /// Label flip probability of the emitted sequence.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Length of the emitted query sequence.
    #[arg(long, default_value_t = 2000)]
    pub t: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Cluster structure of a generated instance, alongside the matrix and graph files.
#[derive(Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub spec: BiclusterSpec,
    pub row_cluster: Vec<usize>,
    pub col_cluster: Vec<usize>,
    pub u_star: Vec<Vec<f64>>,
    pub d_hat_bound: f64,
    pub planted_margin: f64,
}

pub fn gen_bicluster(a: &GenBiclusterArgs) -> Result<RunRecord> {
    let spec = BiclusterSpec { m: a.m, n: a.n, k: a.k, l: a.l, seed: a.seed, noise_rate: a.noise };
    let inst = synth_bicluster(&spec)?;
    let seq = gen_sequence(&inst, a.t, a.noise, a.seed)?;
    let dir = &a.out_dir;
    write_text(&dir.join(U_FILE), &format_matrix(&inst.u))?;
    write_text(&dir.join(ROW_GRAPH_FILE), &format_graph(&inst.row_graph))?;
    write_text(&dir.join(COL_GRAPH_FILE), &format_graph(&inst.col_graph))?;
    let mut buf = Vec::new();
    write_sequence(&seq, &mut buf)?;
    fs::write(dir.join(SEQUENCE_FILE), buf)?;
    let file = InstanceFile {
        spec,
        row_cluster: inst.row_cluster.clone(),
        col_cluster: inst.col_cluster.clone(),
        u_star: inst.u_star.row_iter().map(|r| r.iter().copied().collect()).collect(),
        d_hat_bound: inst.d_hat_bound,
        planted_margin: inst.planted_margin(),
    };
    write_json(&dir.join(INSTANCE_FILE), &file)?;
    let stdout = format!(
        "gen-bicluster m={} n={} k={} l={} seed={} d_hat_bound={} planted_margin={}\n",
        a.m, a.n, a.k, a.l, a.seed, inst.d_hat_bound, file.planted_margin
    );
    Ok(RunRecord {
        params: serde_json::to_value(a)?,
        totals: json!({ "d_hat_bound": inst.d_hat_bound, "planted_margin": file.planted_margin, "rounds": a.t }),
        outputs: [U_FILE, ROW_GRAPH_FILE, COL_GRAPH_FILE, SEQUENCE_FILE, INSTANCE_FILE].map(String::from).to_vec(),
        stdout,
        exit: 0,
    })
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let p = dir.join(name);
    fs::read_to_string(&p).with_context(|| format!("cannot read {}", p.display()))
}

/// Reassembles a generated instance from its directory.
pub fn load_instance(dir: &Path) -> Result<PlantedInstance> {
    let file: InstanceFile = serde_json::from_str(&read(dir, INSTANCE_FILE)?)
        .with_context(|| format!("malformed {}", dir.join(INSTANCE_FILE).display()))?;
    let u = parse_matrix(&read(dir, U_FILE)?).context(U_FILE)?;
    let row_graph = parse_graph(&read(dir, ROW_GRAPH_FILE)?).context(ROW_GRAPH_FILE)?;
    let col_graph = parse_graph(&read(dir, COL_GRAPH_FILE)?).context(COL_GRAPH_FILE)?;
    let spec = file.spec;
    let flat: Vec<f64> = file.u_star.iter().flatten().copied().collect();
    if file.u_star.len() != spec.k || flat.len() != spec.k * spec.l {
        anyhow::bail!("u_star in {INSTANCE_FILE} is not {}×{}", spec.k, spec.l);
    }
    if u.shape() != (spec.m, spec.n) || file.row_cluster.len() != spec.m || file.col_cluster.len() != spec.n {
        anyhow::bail!("instance files disagree on the matrix shape");
    }
    Ok(PlantedInstance {
        spec,
        u,
        row_cluster: file.row_cluster,
        col_cluster: file.col_cluster,
        u_star: DMatrix::from_row_slice(spec.k, spec.l, &flat),
        row_graph,
        col_graph,
        d_hat_bound: file.d_hat_bound,
    })
}

pub const GRAPH_FILE: &str = "graph.txt";
pub const LABELS_FILE: &str = "labels.txt";

#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct GenCliquesArgs {
    /// Clique sizes, e.g. `10,10`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn gen_cliques(a: &GenCliquesArgs) -> Result<RunRecord> {
    if a.sizes.contains(&0) {
        anyhow::bail!(UsageError("clique sizes must be positive".into()));
    }
    let labels: Vec<usize> = a.sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
    let g = clique_graph(&labels, a.sizes.len())?;
    write_text(&a.out_dir.join(GRAPH_FILE), &format_graph(&g))?;
    write_text(&a.out_dir.join(LABELS_FILE), &format_labels(&labels))?;
    Ok(RunRecord {
        params: serde_json::to_value(a)?,
        totals: json!({ "vertices": labels.len(), "edges": g.edges().len() }),
        outputs: vec![GRAPH_FILE.into(), LABELS_FILE.into()],
        stdout: format!("gen-cliques vertices={} edges={}\n", labels.len(), g.edges().len()),
        exit: 0,
    })
}

/// One class label per line.
pub fn format_labels(labels: &[usize]) -> String {
    labels.iter().map(|l| format!("{l}\n")).collect()
}

pub fn parse_labels(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| l.trim().parse().with_context(|| format!("line {}: bad label {l:?}", i + 1)))
        .collect()
}
