//! Round-by-round FTRL state and regret accounting.

use serde::{Deserialize, Serialize};

use super::solver::{ftrl_solve, minimize, SolveStats, SolverSettings};
use super::OsdpProblem;
use crate::error::{Error, Result};
use crate::linalg::{frobenius_dot, SymMatrix};

#[derive(Clone, Debug)]
pub struct FtrlState {
    problem: OsdpProblem,
    cum_loss: SymMatrix,
    current: SymMatrix,
    solver: SolverSettings,
    round: usize,
}

/// Result of one protocol round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    /// `W_t • L_t`.
    pub loss: f64,
    /// Inner-solver diagnostics; `None` when `L_t = 0` and the iterate is unchanged.
    pub stats: Option<SolveStats>,
}

impl FtrlState {
    /// Starts at `W₁ = min(β, τ / Tr Γ²) · I`.
    pub fn new(problem: OsdpProblem, solver: SolverSettings) -> Result<Self> {
        solver.validate()?;
        let n = problem.dim();
        let current = problem.initial_point();
        Ok(FtrlState { problem, cum_loss: SymMatrix::zeros(n), current, solver, round: 0 })
    }

    pub fn problem(&self) -> &OsdpProblem {
        &self.problem
    }
    pub fn cum_loss(&self) -> &SymMatrix {
        &self.cum_loss
    }
    pub fn current(&self) -> &SymMatrix {
        &self.current
    }
    pub fn solver(&self) -> &SolverSettings {
        &self.solver
    }
    pub fn round(&self) -> usize {
        self.round
    }

    /// Re-solves for the FTRL iterate from the current cumulative loss,
    /// warm-started at the current iterate.
    pub fn ftrl_step(&mut self) -> Result<SolveStats> {
        let (w, stats) = ftrl_solve(&self.problem, &self.cum_loss, &self.current, &self.solver)?;
        self.current = w;
        Ok(stats)
    }

    /// Suffers `W_t • L_t`, adds `L_t` to the cumulative loss and moves to `W_{t+1}`.
    pub fn osdp_round(&mut self, loss: &SymMatrix) -> Result<RoundOutcome> {
        self.problem.check_loss(loss)?;
        let value = frobenius_dot(&self.current, loss)?;
        let stats = if loss.max_abs() == 0.0 {
            None
        } else {
            self.cum_loss = &self.cum_loss + loss;
            Some(self.ftrl_step().map_err(|e| Error::Round { round: self.round + 1, source: Box::new(e) })?)
        };
        self.round += 1;
        Ok(RoundOutcome { loss: value, stats })
    }
}

/// Sparse upper-triangle record `(i, j, L_ij)` of one loss matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseLoss {
    pub dim: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseLoss {
    pub fn from_sym(l: &SymMatrix) -> Self {
        let n = l.dim();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v = l.get(i, j);
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        SparseLoss { dim: n, entries }
    }

    pub fn to_sym(&self) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.dim);
        for &(i, j, v) in &self.entries {
            m.set_sym(i, j, v);
        }
        m
    }
}

/// Per-round losses of the learner together with the loss matrices it faced.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RegretLedger {
    pub per_round_loss: Vec<f64>,
    pub cum_algorithm_loss: f64,
    pub loss_history: Vec<SparseLoss>,
}

impl RegretLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, loss_value: f64, loss: &SymMatrix) {
        self.per_round_loss.push(loss_value);
        self.cum_algorithm_loss += loss_value;
        self.loss_history.push(SparseLoss::from_sym(loss));
    }

    pub fn rounds(&self) -> usize {
        self.per_round_loss.len()
    }

    /// `Σ_{s<=t} L_s` over the first `t` rounds.
    pub fn cumulative_loss(&self, t: usize) -> Option<SymMatrix> {
        let first = self.loss_history.first()?;
        let mut c = SymMatrix::zeros(first.dim);
        for l in self.loss_history.iter().take(t) {
            for &(i, j, v) in &l.entries {
                c.set_sym(i, j, c.get(i, j) + v);
            }
        }
        Some(c)
    }

    /// Algorithm loss over the first `t` rounds.
    pub fn algorithm_loss(&self, t: usize) -> f64 {
        self.per_round_loss.iter().take(t).sum()
    }

    /// Regret over the first `t` rounds against the best fixed decision in `K`.
    pub fn regret(&self, p: &OsdpProblem, t: usize, s: &SolverSettings) -> Result<f64> {
        let c = self.cumulative_loss(t).unwrap_or_else(|| SymMatrix::zeros(p.dim()));
        let (_, best) = best_fixed_comparator(p, &c, s)?;
        Ok(self.algorithm_loss(t) - best)
    }
}

/// Approximate `argmin_{W ∈ K} ⟨cum_loss, W⟩`.
///
/// Solved as the FTRL problem with a regularizer weight of `1e-9 / H₀` relative
/// to the normalized loss, so the value is within about `1e-9 · ‖cum_loss‖_F`
/// of the true minimum (from above).
pub fn best_fixed_comparator(p: &OsdpProblem, cum_loss: &SymMatrix, s: &SolverSettings) -> Result<(SymMatrix, f64)> {
    let scale = cum_loss.frobenius_norm();
    if scale == 0.0 {
        return Ok((p.initial_point(), 0.0));
    }
    let lin = cum_loss.scale(1.0 / scale);
    let settings = SolverSettings { max_iters: s.max_iters.max(5000), ..*s };
    let alpha0 = p.tau().max(p.beta());
    let (w, _) = minimize(p, lin, 1e-9 / p.h0_bound(), &p.initial_point(), &settings, alpha0)?;
    let value = frobenius_dot(cum_loss, &w)?;
    Ok((w, value))
}
