use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use gamma_osdp::linalg::io::parse_matrix;
use gamma_osdp::linalg::{frobenius_dot, SymMatrix};
use gamma_osdp::omc::loss_matrix;
use gamma_osdp::osdp::{best_fixed_comparator, FtrlState, LossCheck, OsdpProblem, SolverSettings};
use gamma_osdp::sampling::sparse_psd_loss;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{write_json, RunRecord, UsageError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossMode {
    /// Sparse PSD losses with `‖vec(L)‖₁ = g`.
    Psd,
    /// Single off-diagonal entry losses `−(y/γ) Z⟨i,j⟩` of the matrix-completion reduction, γ = 1/g.
    Reduction,
    /// All-zero losses.
    Zero,
}

#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct OsdpRunArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub t: usize,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Trace bound; defaults to n.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    pub g: f64,
    #[arg(long, conflicts_with = "eta_tuned", required_unless_present = "eta_tuned")]
    pub eta: Option<f64>,
    /// Use η = √(sH₀/T).
    #[arg(long)]
    pub eta_tuned: bool,
    #[arg(long, value_enum, default_value_t = LossMode::Psd)]
    pub loss_mode: LossMode,
    /// Support size of the PSD losses.
    #[arg(long, default_value_t = 2)]
    pub support: usize,
    /// Γ as a matrix file; identity when absent.
    #[arg(long)]
    pub gamma_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, visible_alias = "out")]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct RegretRow {
    t: usize,
    loss: f64,
    cum_regret_vs_best_fixed: f64,
}

pub const REGRET_FILE: &str = "regret.csv";

/// Per-round losses of an OSDP run and its comparator.
pub struct OsdpOutcome {
    pub problem: OsdpProblem,
    pub losses: Vec<f64>,
    /// `Σ_{s<=t} L_s • W*` for the post-hoc best fixed `W*`.
    pub comparator_losses: Vec<f64>,
    pub max_violation: f64,
    pub unconverged_solves: usize,
}

impl OsdpOutcome {
    pub fn regret(&self, t: usize) -> f64 {
        self.losses[..t].iter().sum::<f64>() - self.comparator_losses[t - 1]
    }
}

fn build_problem(a: &OsdpRunArgs) -> Result<OsdpProblem> {
    if a.n < 2 && a.loss_mode == LossMode::Reduction {
        bail!(UsageError("reduction losses need --n >= 2".into()));
    }
    if a.t == 0 {
        bail!(UsageError("--t must be at least 1".into()));
    }
    let gamma = match &a.gamma_file {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            SymMatrix::new(parse_matrix(&text)?)?
        }
        None => SymMatrix::identity(a.n),
    };
    if gamma.dim() != a.n {
        bail!(UsageError(format!("Γ is {0}×{0} but --n is {1}", gamma.dim(), a.n)));
    }
    let tau = a.tau.unwrap_or(a.n as f64);
    let p = OsdpProblem::new(gamma, a.beta, tau, a.epsilon, a.g, a.eta.unwrap_or(1.0))?;
    let p = if a.eta_tuned { p.clone().with_eta(p.tuned_eta(a.t))? } else { p };
    Ok(match a.loss_mode {
        LossMode::Reduction => p.with_loss_check(LossCheck::L1Only),
        _ => p,
    })
}

/// Plays `t` rounds of the configured loss sequence and scores them against the best fixed decision.
pub fn run_osdp(a: &OsdpRunArgs) -> Result<OsdpOutcome> {
    let p = build_problem(a)?;
    let solver = SolverSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut state = FtrlState::new(p.clone(), solver)?;
    let mut max_violation = p.feasibility(state.current())?.violation(&p);
    let mut unconverged_solves = 0;
    let mut losses = Vec::with_capacity(a.t);
    let mut played = Vec::with_capacity(a.t);
    let (m, cols) = (a.n / 2, a.n - a.n / 2);
    for _ in 0..a.t {
        let l = match a.loss_mode {
            LossMode::Psd => sparse_psd_loss(a.n, a.support, a.g, &mut rng),
            LossMode::Reduction => {
                let (i, j) = (rng.random_range(0..m), rng.random_range(0..cols));
                let y = if rng.random_bool(0.5) { 1 } else { -1 };
                loss_matrix(i, j, y, 1.0 / a.g, m, cols, false)
            }
            LossMode::Zero => SymMatrix::zeros(a.n),
        };
        let out = state.osdp_round(&l)?;
        if let Some(s) = out.stats {
            unconverged_solves += usize::from(!s.converged);
            max_violation = max_violation.max(p.feasibility(state.current())?.violation(&p));
        }
        losses.push(out.loss);
        played.push(l);
    }
    let (w_star, _) = best_fixed_comparator(&p, state.cum_loss(), &solver)?;
    let mut acc = 0.0;
    let mut comparator_losses = Vec::with_capacity(a.t);
    for l in &played {
        acc += frobenius_dot(l, &w_star)?;
        comparator_losses.push(acc);
    }
    Ok(OsdpOutcome { problem: p, losses, comparator_losses, max_violation, unconverged_solves })
}

pub fn osdp_run(a: &OsdpRunArgs) -> Result<RunRecord> {
    let out = run_osdp(a)?;
    let p = &out.problem;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(a.out_dir.join(REGRET_FILE))?;
    for (k, &loss) in out.losses.iter().enumerate() {
        w.serialize(RegretRow { t: k + 1, loss, cum_regret_vs_best_fixed: out.regret(k + 1) })?;
    }
    w.flush()?;
    let regret = out.regret(a.t);
    let bound = p.regret_bound(a.t);
    let summary = json!({
        "eta": p.eta(),
        "strong_convexity": p.strong_convexity(),
        "h0_bound": p.h0_bound(),
        "regret": regret,
        "regret_bound": bound,
        "within_bound": regret <= bound,
        "max_violation": out.max_violation,
        "unconverged_solves": out.unconverged_solves,
    });
    write_json(&a.out_dir.join("summary.json"), &summary)?;
    Ok(RunRecord {
        params: json!({ "args": a, "eta": p.eta(), "tau": p.tau(), "solver": SolverSettings::default() }),
        totals: json!({ "regret": regret, "regret_bound": bound }),
        outputs: vec![REGRET_FILE.into(), "summary.json".into()],
        stdout: format!("osdp-run t={} eta={:.6e} regret={:.6} bound={:.6e}\n", a.t, p.eta(), regret, bound),
        exit: 0,
    })
}
