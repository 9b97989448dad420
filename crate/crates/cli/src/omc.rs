use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use gamma_osdp::omc::io::{read_sequence, write_trace};
use gamma_osdp::omc::{
    hloss_sequence, mistake_bound, omc_run as run_fixed, omc_run_online, LabeledSequence, MistakeTrace, OmcConfig, QueryMode,
    SideInfo,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::gen::{load_instance, SEQUENCE_FILE};
use crate::{derive_seed, run_replicas, write_json, ReplicaArgs, RunRecord};

#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct OmcRunArgs {
    /// Directory written by `gen-bicluster`.
    #[arg(long)]
    pub instance_dir: PathBuf,
    /// Margin γ; defaults to the planted margin of the instance.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Learning-rate constant c in η = cγ².
    #[arg(long, default_value_t = gamma_osdp::omc::DEFAULT_C_ETA)]
    pub c_eta: f64,
    /// Quasi-dimension estimate; defaults to the instance bound, or m+n with identity side information.
    #[arg(long)]
    pub d_hat: Option<f64>,
    #[arg(long)]
    pub identity_side_info: bool,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 2000)]
    pub t: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Re-query a previously mistaken entry with this probability.
    #[arg(long)]
    pub replay_prob: Option<f64>,
    /// Replay the instance's `sequence.csv` (first --t rounds) instead of drawing queries.
    #[arg(long)]
    pub from_sequence: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub replicas: ReplicaArgs,
    #[arg(long, visible_alias = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OmcSummary {
    pub replica: usize,
    pub seed: u64,
    pub rounds: usize,
    pub mistakes: usize,
    pub mistakes_second_half: usize,
    pub bound: f64,
    /// `M γ² / D̂`.
    pub ratio: f64,
    pub hloss_planted: f64,
    pub max_violation: f64,
}

pub fn omc_run(a: &OmcRunArgs) -> Result<RunRecord> {
    a.replicas.validate()?;
    let inst = load_instance(&a.instance_dir)?;
    let (m, n) = (inst.spec.m, inst.spec.n);
    let gamma = a.gamma.unwrap_or_else(|| inst.planted_margin());
    let (side_info, default_d_hat) = if a.identity_side_info {
        (SideInfo::identity(m, n), (m + n) as f64)
    } else {
        (inst.side_info()?, inst.d_hat_bound)
    };
    let d_hat = a.d_hat.unwrap_or(default_d_hat);
    let mut config = OmcConfig::new(side_info, gamma, d_hat);
    config.c_eta = a.c_eta;
    config.epsilon = a.epsilon;
    config.validate()?;
    let mode = match a.replay_prob {
        Some(prob) => QueryMode::ReplayMistakes { prob },
        None => QueryMode::Uniform,
    };
    mode.validate()?;
    let fixed = if a.from_sequence {
        let p = a.instance_dir.join(SEQUENCE_FILE);
        let file = fs::File::open(&p).with_context(|| format!("cannot open {}", p.display()))?;
        let seq = read_sequence(file, m, n)?;
        let head = seq.triples()[..a.t.min(seq.len())].to_vec();
        Some(LabeledSequence::new(m, n, head)?)
    } else {
        None
    };
    let (p, q) = inst.planted_factors();

    let runs: Vec<(OmcSummary, MistakeTrace)> = run_replicas(a.replicas.replicas, a.replicas.jobs, |r| {
        let seed = derive_seed(a.seed, r);
        let (seq, trace) = match &fixed {
            Some(seq) => (seq.clone(), run_fixed(&config, seq)?),
            None => omc_run_online(&config, &inst.u, a.t, seed, mode)?,
        };
        let hloss_planted = hloss_sequence(&seq, &p, &q, gamma)?;
        let rounds = seq.len();
        let summary = OmcSummary {
            replica: r,
            seed,
            rounds,
            mistakes: trace.total_mistakes,
            mistakes_second_half: trace.mistakes_between(rounds / 2, rounds),
            bound: mistake_bound(&config, hloss_planted),
            ratio: trace.total_mistakes as f64 * gamma * gamma / d_hat,
            hloss_planted,
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
            "omc-run seed={} rounds={} mistakes={} second_half={} bound={:.6e} ratio={:.6} hloss_planted={}\n",
            s.seed, s.rounds, s.mistakes, s.mistakes_second_half, s.bound, s.ratio, s.hloss_planted
        ));
    }
    let summaries: Vec<&OmcSummary> = runs.iter().map(|(s, _)| s).collect();
    let mean = summaries.iter().map(|s| s.mistakes as f64).sum::<f64>() / summaries.len() as f64;
    let summary = json!({
        "side_info": if a.identity_side_info { "identity" } else { "pd-laplacian" },
        "gamma": gamma,
        "d_hat": d_hat,
        "eta": config.eta(),
        "mean_mistakes": mean,
        "runs": summaries,
    });
    write_json(&a.out_dir.join("summary.json"), &summary)?;
    outputs.push("summary.json".into());
    Ok(RunRecord {
        params: json!({ "args": a, "gamma": gamma, "d_hat": d_hat, "eta": config.eta(), "solver": config.solver }),
        totals: json!({ "mean_mistakes": mean }),
        outputs,
        stdout,
        exit: 0,
    })
}
