use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use gamma_osdp::linalg::io::parse_graph;
use gamma_osdp::omc::io::write_trace;
use gamma_osdp::omc::{MistakeTrace, QueryMode};
use gamma_osdp::similarity::{
    clique_d_hat, cut_size, planted_similarity_factors, resistance_diameter, similarity_run_online, ClassAssignment,
    SimilarityConfig,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::gen::parse_labels;
use crate::{derive_seed, run_replicas, write_json, ReplicaArgs, RunRecord};

#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct SimilarityRunArgs {
    /// Graph file (`<n> <edges>` header, then `u v [w]` lines).
    #[arg(long)]
    pub graph: PathBuf,
    /// One class label per line.
    #[arg(long)]
    pub labels: PathBuf,
    /// Margin γ; defaults to the margin of the planted class factorization.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = gamma_osdp::omc::DEFAULT_C_ETA)]
    pub c_eta: f64,
    /// Quasi-dimension estimate; defaults to the clique bound of the labelling.
    #[arg(long)]
    pub d_hat: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1000)]
    pub t: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Re-query a previously mistaken pair with this probability.
    #[arg(long)]
    pub replay_prob: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub replicas: ReplicaArgs,
    #[arg(long, visible_alias = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SimilaritySummary {
    pub replica: usize,
    pub seed: u64,
    pub rounds: usize,
    pub mistakes: usize,
    pub mistakes_second_half: usize,
    pub max_violation: f64,
}

pub fn similarity_run(a: &SimilarityRunArgs) -> Result<RunRecord> {
    a.replicas.validate()?;
    let text = fs::read_to_string(&a.graph).with_context(|| format!("cannot read {}", a.graph.display()))?;
    let graph = parse_graph(&text).with_context(|| format!("in {}", a.graph.display()))?;
    let text = fs::read_to_string(&a.labels).with_context(|| format!("cannot read {}", a.labels.display()))?;
    let labels = parse_labels(&text)?;
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let y = ClassAssignment::new(labels, k)?;
    let gamma = a.gamma.unwrap_or_else(|| planted_similarity_factors(&y).2);
    let d_hat = match a.d_hat {
        Some(d) => d,
        None => clique_d_hat(&graph, &y)?,
    };
    let cut = cut_size(&graph, &y)?;
    let resistance = resistance_diameter(&graph)?;
    let mut config = SimilarityConfig::new(graph, y, gamma, d_hat);
    config.c_eta = a.c_eta;
    config.epsilon = a.epsilon;
    config.validate()?;
    let mode = a.replay_prob.map_or(QueryMode::Uniform, |prob| QueryMode::ReplayMistakes { prob });
    mode.validate()?;

    let runs: Vec<(SimilaritySummary, MistakeTrace)> = run_replicas(a.replicas.replicas, a.replicas.jobs, |r| {
        let seed = derive_seed(a.seed, r);
        let (_, trace) = similarity_run_online(&config, a.t, seed, mode)?;
        let summary = SimilaritySummary {
            replica: r,
            seed,
            rounds: a.t,
            mistakes: trace.total_mistakes,
            mistakes_second_half: trace.mistakes_between(a.t / 2, a.t),
            max_violation: trace.max_violation,
        };
        Ok((summary, trace))
    })?;

    let mut outputs = Vec::new();
    let mut stdout = String::new();
    for (r, (s, trace)) in runs.iter().enumerate() {
        let name = a.replicas.trace_name(r);
        let mut buf = Vec::new();
        write_trace(trace, &mut buf)?;
        fs::write(a.out_dir.join(&name), buf)?;
        outputs.push(name);
        stdout.push_str(&format!(
            "similarity-run seed={} rounds={} mistakes={} second_half={} cut_size={} resistance_diameter={:.6}\n",
            s.seed, s.rounds, s.mistakes, s.mistakes_second_half, cut, resistance.max_resistance
        ));
    }
    let summaries: Vec<&SimilaritySummary> = runs.iter().map(|(s, _)| s).collect();
    let mean = summaries.iter().map(|s| s.mistakes as f64).sum::<f64>() / summaries.len() as f64;
    let summary = json!({
        "gamma": gamma,
        "d_hat": d_hat,
        "eta": a.c_eta * gamma * gamma,
        "cut_size": cut,
        "resistance_diameter": resistance,
        "mean_mistakes": mean,
        "runs": summaries,
    });
    write_json(&a.out_dir.join("summary.json"), &summary)?;
    outputs.push("summary.json".into());
    Ok(RunRecord {
        params: json!({ "args": a, "gamma": gamma, "d_hat": d_hat, "solver": config.solver }),
        totals: json!({ "mean_mistakes": mean, "cut_size": cut }),
        outputs,
        stdout,
        exit: 0,
    })
}
