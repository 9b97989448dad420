//! Projected-gradient FTRL solver.

use log::{debug, trace};
use serde::{Deserialize, Serialize};

use super::projection::{dykstra, ConvexSet, DykstraOutcome};
use super::{OsdpProblem, FEASIBILITY_TOL};
use crate::error::{Error, Result};
use crate::linalg::{inv_and_logdet, logdet, max_diagonal, SymMatrix};

/// Coordinates in which the projected-gradient iteration runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    /// Iterate on `W` with Frobenius projections onto `K`.
    Euclidean,
    /// Iterate on `V = Γ W Γ`; `K` becomes `{V ⪰ 0, Tr V <= τ, |a_iᵀ V a_i| <= β}`
    /// with `a_i` the columns of `Γ⁻¹`.
    GammaScaled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub dykstra_iters: usize,
    pub dykstra_tol: f64,
    pub armijo_beta: f64,
    pub armijo_c: f64,
    pub metric: Metric,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            max_iters: 500,
            grad_tol: 1e-7,
            dykstra_iters: 200,
            dykstra_tol: 1e-9,
            armijo_beta: 0.5,
            armijo_c: 1e-4,
            metric: Metric::GammaScaled,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("solver setting {what}")));
        if self.max_iters == 0 || self.dykstra_iters == 0 {
            return bad("iteration limits must be positive");
        }
        if !(self.grad_tol > 0.0) || !(self.dykstra_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.armijo_beta > 0.0 && self.armijo_beta < 1.0) || !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("Armijo parameters must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Diagnostics of one inner solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub backtracks: usize,
    pub dykstra_cycles: usize,
    pub step_norm: f64,
    pub objective: f64,
    pub start_objective: f64,
    pub converged: bool,
}

const MAX_BACKTRACKS: usize = 50;

/// Frobenius projection of `a` onto `K`, by Dykstra over the PSD cone and
/// `{|W_ii| <= β} ∩ {Tr(Γ²W) <= τ}` (the latter projected exactly by a
/// search on the half-space multiplier).
pub fn project_k(p: &OsdpProblem, a: &SymMatrix, s: &SolverSettings) -> Result<SymMatrix> {
    s.validate()?;
    if a.dim() != p.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: a.dim() });
    }
    let (w, _) = project(p, a, s, Metric::Euclidean)?;
    let f = p.feasibility(&w)?;
    if !f.within(p, FEASIBILITY_TOL) {
        return Err(Error::ProjectionDiverged {
            cycles: s.dykstra_iters,
            violation: violation(p, f.min_eigenvalue, f.max_abs_diag, f.gamma_trace),
            last_change: f64::NAN,
        });
    }
    Ok(w)
}

fn violation(p: &OsdpProblem, min_eig: f64, max_diag: f64, trace: f64) -> f64 {
    (-min_eig).max(max_diag - p.beta()).max(trace - p.tau()).max(0.0)
}

/// Projection in the given coordinates followed by a radial pull-back
/// `x ← t x`, `t = min(1, β / max_diag, τ / trace)`, which removes the
/// residual Dykstra infeasibility while keeping the PSD cone.
fn project(p: &OsdpProblem, a: &SymMatrix, s: &SolverSettings, metric: Metric) -> Result<(SymMatrix, DykstraOutcome)> {
    if !a.as_matrix().iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("projection input has non-finite entries".into()));
    }
    let n = p.dim();
    let eye;
    let (x, out) = match metric {
        Metric::Euclidean => {
            let g2 = p.gamma_sq();
            let sets = [ConvexSet::BoxHalfSpace { normal: g2, box_bound: p.beta(), bound: p.tau() }, ConvexSet::Psd];
            dykstra(a, &sets, s.dykstra_iters, s.dykstra_tol)?
        }
        Metric::GammaScaled => {
            eye = SymMatrix::identity(n);
            let (vecs, norms4) = p.gamma_inv_cols();
            let sets = [
                ConvexSet::RankOneSlabs { vecs, norms4, bound: p.beta() },
                ConvexSet::HalfSpace { normal: &eye, norm_sq: n as f64, bound: p.tau() },
                ConvexSet::Psd,
            ];
            dykstra(a, &sets, s.dykstra_iters, s.dykstra_tol)?
        }
    };
    let (max_diag, trace) = match metric {
        Metric::Euclidean => (max_diagonal(&x), p.gamma_trace(&x)),
        Metric::GammaScaled => {
            let (vecs, _) = p.gamma_inv_cols();
            let md = vecs.iter().map(|a| super::projection::quad_form(&x, a).abs()).fold(0.0, f64::max);
            (md, x.trace())
        }
    };
    let v = violation(p, 0.0, max_diag, trace);
    if !out.last_change.is_finite() || !v.is_finite() {
        return Err(Error::ProjectionDiverged { cycles: out.cycles, violation: v, last_change: out.last_change });
    }
    if !out.converged {
        debug!("Dykstra stopped after {} cycles (change {:.3e}, violation {v:.3e})", out.cycles, out.last_change);
    }
    let t = 1.0_f64.min(p.beta() / max_diag).min(p.tau() / trace);
    let x = if t < 1.0 { x.scale(t) } else { x };
    Ok((x, out))
}

/// Objective `w_R · R + ⟨lin, X⟩` in the chosen coordinates.
struct Objective<'a> {
    p: &'a OsdpProblem,
    metric: Metric,
    lin: SymMatrix,
    reg_weight: f64,
}

impl Objective<'_> {
    /// Matrix whose log-determinant enters the objective.
    fn shifted(&self, x: &SymMatrix) -> SymMatrix {
        let mut a = match self.metric {
            Metric::Euclidean => self.p.gamma().congruence(x),
            Metric::GammaScaled => x.clone(),
        };
        for i in 0..a.dim() {
            a.set_sym(i, i, a.get(i, i) + self.p.epsilon());
        }
        a
    }

    fn value(&self, x: &SymMatrix) -> Result<f64> {
        Ok(-self.reg_weight * logdet(&self.shifted(x))? + self.lin.as_matrix().dot(x.as_matrix()))
    }

    fn value_and_grad(&self, x: &SymMatrix) -> Result<(f64, SymMatrix)> {
        let (inv, ld) = inv_and_logdet(&self.shifted(x))?;
        let reg_grad = match self.metric {
            Metric::Euclidean => self.p.gamma().congruence(&inv),
            Metric::GammaScaled => inv,
        };
        let value = -self.reg_weight * ld + self.lin.as_matrix().dot(x.as_matrix());
        Ok((value, &self.lin - &reg_grad.scale(self.reg_weight)))
    }
}

/// FTRL iterate `argmin_{W ∈ K} R(W) + η ⟨cum_loss, W⟩`, warm-started at `warm`.
pub fn ftrl_solve(
    p: &OsdpProblem,
    cum_loss: &SymMatrix,
    warm: &SymMatrix,
    s: &SolverSettings,
) -> Result<(SymMatrix, SolveStats)> {
    minimize(p, cum_loss.scale(p.eta()), 1.0, warm, s, 1.0)
}

/// Minimizes `reg_weight · R(W) + ⟨lin, W⟩` over `K`; `lin` is given in `W` coordinates.
pub(crate) fn minimize(
    p: &OsdpProblem,
    lin: SymMatrix,
    reg_weight: f64,
    warm: &SymMatrix,
    s: &SolverSettings,
    alpha0: f64,
) -> Result<(SymMatrix, SolveStats)> {
    s.validate()?;
    for m in [&lin, warm] {
        if m.dim() != p.dim() {
            return Err(Error::DimensionMismatch { expected: p.dim(), got: m.dim() });
        }
    }
    let (lin, mut x) = match s.metric {
        Metric::Euclidean => (lin, warm.clone()),
        Metric::GammaScaled => (p.gamma_inv().congruence(&lin), p.gamma().congruence(warm)),
    };
    let obj = Objective { p, metric: s.metric, lin, reg_weight };
    let (mut f, mut grad) = obj.value_and_grad(&x)?;
    let mut stats = SolveStats { objective: f, start_objective: f, ..SolveStats::default() };

    for it in 1..=s.max_iters {
        let mut alpha = alpha0;
        let mut accepted = None;
        let mut last_step = f64::INFINITY;
        for _ in 0..MAX_BACKTRACKS {
            let (y, out) = project(p, &(&x - &grad.scale(alpha)), s, s.metric)?;
            stats.dykstra_cycles += out.cycles;
            let step = (&y - &x).frobenius_norm();
            last_step = step;
            let fy = obj.value(&y)?;
            if fy <= f - s.armijo_c / alpha * step * step || (step <= s.grad_tol && fy <= f + 1e-12) {
                accepted = Some((y, fy, step));
                break;
            }
            stats.backtracks += 1;
            alpha *= s.armijo_beta;
        }
        stats.iterations = it;
        let Some((y, fy, step)) = accepted else {
            if last_step <= s.grad_tol {
                stats.converged = true;
                break;
            }
            return Err(Error::SolverStalled { iteration: it, objective: f, step_norm: last_step });
        };
        trace!("pg iter {it}: F = {fy:.12e}, step = {step:.3e}, alpha = {alpha:.3e}");
        x = y;
        stats.step_norm = step;
        if step <= s.grad_tol {
            f = fy;
            stats.converged = true;
            break;
        }
        (f, grad) = obj.value_and_grad(&x)?;
    }
    stats.objective = f;

    let w = match s.metric {
        Metric::Euclidean => x,
        Metric::GammaScaled => p.gamma_inv().congruence(&x),
    };
    let feas = p.feasibility(&w)?;
    if !feas.within(p, FEASIBILITY_TOL) {
        return Err(Error::ProjectionDiverged {
            cycles: stats.dykstra_cycles,
            violation: violation(p, feas.min_eigenvalue, feas.max_abs_diag, feas.gamma_trace),
            last_change: stats.step_norm,
        });
    }
    Ok((w, stats))
}
