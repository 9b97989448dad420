//! Online semi-definite programming over the Γ-trace-bounded decision set
//!
//! ```text
//! K = { W ⪰ 0 : |W_ii| <= β, Tr(Γ W Γ) <= τ }
//! ```
//!
//! with the log-determinant regularizer `R(W) = −ln det(Γ W Γ + ε I)` and
//! follow-the-regularized-leader updates
//! `W_t = argmin_{W ∈ K} R(W) + η Σ_{s<t} L_s • W`.

mod projection;
mod solver;
mod state;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh, frobenius_dot, inv_and_logdet, logdet, SymMatrix};

pub use solver::{ftrl_solve, project_k, Metric, SolveStats, SolverSettings};
pub use state::{best_fixed_comparator, FtrlState, RegretLedger, RoundOutcome};

/// Denominator constant of the strong-convexity modulus
/// `s = 1 / (1152 √e (β + ρε)² g²)`.
pub const STRONG_CONVEXITY_CONSTANT: f64 = 1152.0;

/// Tolerance used when deciding whether a matrix lies in the decision set.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Which loss matrices a problem accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossCheck {
    /// `L ⪰ 0` and `‖vec(L)‖₁ <= g`.
    Psd,
    /// Only `‖vec(L)‖₁ <= g`; used by the matrix-completion reductions,
    /// whose losses `±Z⟨i,j⟩/γ` are indefinite.
    L1Only,
}

/// Parameters of one generalised OSDP instance.
#[derive(Clone, Debug)]
pub struct OsdpProblem {
    gamma: SymMatrix,
    gamma_sq: SymMatrix,
    gamma_inv: SymMatrix,
    /// Columns of `Γ⁻¹`, i.e. the vectors `a_i` with `W_ii = a_iᵀ (ΓWΓ) a_i`.
    gamma_inv_cols: Vec<DVector<f64>>,
    gamma_inv_cols_norm4: Vec<f64>,
    beta: f64,
    tau: f64,
    epsilon: f64,
    g: f64,
    eta: f64,
    rho: f64,
    loss_check: LossCheck,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

impl OsdpProblem {
    pub fn new(gamma: SymMatrix, beta: f64, tau: f64, epsilon: f64, g: f64, eta: f64) -> Result<Self> {
        let e = eigh(&gamma)?;
        let min = *e.values.last().expect("dim >= 1");
        if !(min > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Gamma must be strictly positive definite (min eigenvalue {min:e})"
            )));
        }
        let gamma_inv = e.map(|l| 1.0 / l);
        let gamma_sq = e.map(|l| l * l);
        let rho = e.map(|l| 1.0 / (l * l)).max_abs();
        let n = gamma.dim();
        let gamma_inv_cols: Vec<DVector<f64>> =
            (0..n).map(|i| gamma_inv.as_matrix().column(i).into_owned()).collect();
        let gamma_inv_cols_norm4 = gamma_inv_cols.iter().map(|a| a.norm_squared().powi(2)).collect();
        Ok(OsdpProblem {
            gamma,
            gamma_sq,
            gamma_inv,
            gamma_inv_cols,
            gamma_inv_cols_norm4,
            beta: positive("beta", beta)?,
            tau: positive("tau", tau)?,
            epsilon: positive("epsilon", epsilon)?,
            g: positive("g", g)?,
            eta: positive("eta", eta)?,
            rho,
            loss_check: LossCheck::Psd,
        })
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        self.eta = positive("eta", eta)?;
        Ok(self)
    }

    pub fn with_loss_check(mut self, check: LossCheck) -> Self {
        self.loss_check = check;
        self
    }

    pub fn dim(&self) -> usize {
        self.gamma.dim()
    }
    pub fn gamma(&self) -> &SymMatrix {
        &self.gamma
    }
    pub fn gamma_sq(&self) -> &SymMatrix {
        &self.gamma_sq
    }
    pub fn gamma_inv(&self) -> &SymMatrix {
        &self.gamma_inv
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn g(&self) -> f64 {
        self.g
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    /// `ρ = max_{i,j} |(Γ⁻¹Γ⁻¹)_ij|`.
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn loss_check(&self) -> LossCheck {
        self.loss_check
    }

    pub(crate) fn gamma_inv_cols(&self) -> (&[DVector<f64>], &[f64]) {
        (&self.gamma_inv_cols, &self.gamma_inv_cols_norm4)
    }

    /// `Tr(Γ W Γ)`, computed as `⟨Γ², W⟩`.
    pub fn gamma_trace(&self, w: &SymMatrix) -> f64 {
        self.gamma_sq.as_matrix().dot(w.as_matrix())
    }

    /// Strong-convexity modulus `s = 1 / (1152 √e (β + ρε)² g²)`.
    pub fn strong_convexity(&self) -> f64 {
        let b = self.beta + self.rho * self.epsilon;
        1.0 / (STRONG_CONVEXITY_CONSTANT * std::f64::consts::E.sqrt() * b * b * self.g * self.g)
    }

    /// Upper bound `τ / ε` on the range `max R − min R` over the decision set.
    pub fn h0_bound(&self) -> f64 {
        self.tau / self.epsilon
    }

    /// The learning rate `√(s H₀ / T)` that balances the two regret terms.
    pub fn tuned_eta(&self, horizon: usize) -> f64 {
        (self.strong_convexity() * self.h0_bound() / horizon.max(1) as f64).sqrt()
    }

    /// `H₀/η + ηT/s` at this problem's η.
    pub fn regret_bound(&self, horizon: usize) -> f64 {
        self.h0_bound() / self.eta + self.eta * horizon as f64 / self.strong_convexity()
    }

    /// `2 √(H₀ T / s)`, the bound at the tuned η.
    pub fn tuned_regret_bound(&self, horizon: usize) -> f64 {
        2.0 * (self.h0_bound() * horizon as f64 / self.strong_convexity()).sqrt()
    }

    /// The starting point `min(β, τ / Tr Γ²) · I`.
    pub fn initial_point(&self) -> SymMatrix {
        let c = self.beta.min(self.tau / self.gamma_sq.trace());
        SymMatrix::identity(self.dim()).scale(c)
    }

    pub fn feasibility(&self, w: &SymMatrix) -> Result<Feasibility> {
        if w.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: w.dim() });
        }
        Ok(Feasibility {
            min_eigenvalue: w.min_eigenvalue()?,
            max_abs_diag: w.diagonal().into_iter().fold(0.0, |m, v| m.max(v.abs())),
            gamma_trace: self.gamma_trace(w),
        })
    }

    /// Checks `L` against the loss class (ℓ₁ budget, plus PSD in [`LossCheck::Psd`] mode).
    pub fn check_loss(&self, l: &SymMatrix) -> Result<()> {
        if l.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: l.dim() });
        }
        let l1 = l.l1_norm();
        if !(l1 <= self.g + 1e-9) {
            return Err(Error::LossOutOfClass(format!("‖vec(L)‖₁ = {l1} exceeds g = {}", self.g)));
        }
        if self.loss_check == LossCheck::Psd && l1 > 0.0 {
            let min = l.min_eigenvalue()?;
            if min < -1e-9 * l.frobenius_norm().max(1.0) {
                return Err(Error::LossOutOfClass(format!("loss is not PSD (min eigenvalue {min:e})")));
            }
        }
        Ok(())
    }
}

/// Constraint values of a candidate decision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub min_eigenvalue: f64,
    pub max_abs_diag: f64,
    pub gamma_trace: f64,
}

impl Feasibility {
    pub fn within(&self, p: &OsdpProblem, tol: f64) -> bool {
        self.violation(p) <= tol
    }

    /// Largest constraint violation, `max(−λ_min, max|W_ii| − β, Tr(ΓWΓ) − τ)`.
    pub fn violation(&self, p: &OsdpProblem) -> f64 {
        (-self.min_eigenvalue).max(self.max_abs_diag - p.beta).max(self.gamma_trace - p.tau)
    }
}

fn require_psd(w: &SymMatrix, what: &str) -> Result<()> {
    let min = w.min_eigenvalue()?;
    if min < -FEASIBILITY_TOL {
        return Err(Error::InfeasibleInput(format!("{what} has eigenvalue {min:e}")));
    }
    Ok(())
}

fn require_feasible(p: &OsdpProblem, w: &SymMatrix, what: &str) -> Result<()> {
    let f = p.feasibility(w)?;
    if !f.within(p, FEASIBILITY_TOL) {
        return Err(Error::InfeasibleInput(format!("{what} violates the decision set: {f:?}")));
    }
    Ok(())
}

/// `Γ W Γ + ε I`.
pub(crate) fn shifted(p: &OsdpProblem, w: &SymMatrix) -> SymMatrix {
    let mut a = p.gamma.congruence(w);
    for i in 0..a.dim() {
        a.set_sym(i, i, a.get(i, i) + p.epsilon);
    }
    a
}

/// `R(W) = −ln det(Γ W Γ + ε I)` for a PSD `W`.
pub fn regularizer_value(p: &OsdpProblem, w: &SymMatrix) -> Result<f64> {
    if w.dim() != p.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: w.dim() });
    }
    require_psd(w, "W")?;
    Ok(-logdet(&shifted(p, w))?)
}

/// `∇R(W) = −Γ (Γ W Γ + ε I)⁻¹ Γ`.
pub fn regularizer_grad(p: &OsdpProblem, w: &SymMatrix) -> Result<SymMatrix> {
    if w.dim() != p.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: w.dim() });
    }
    require_psd(w, "W")?;
    let (inv, _) = inv_and_logdet(&shifted(p, w))?;
    Ok(-&p.gamma.congruence(&inv))
}

/// `αR(X) + (1−α)R(Y) − (s/2)α(1−α)|L•(X−Y)|² − R(αX + (1−α)Y)`, which is
/// non-negative whenever `R` is `s`-strongly convex with respect to the loss class.
pub fn strong_convexity_gap(
    p: &OsdpProblem,
    x: &SymMatrix,
    y: &SymMatrix,
    l: &SymMatrix,
    alpha: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    require_feasible(p, x, "X")?;
    require_feasible(p, y, "Y")?;
    p.check_loss(l)
        .map_err(|e| Error::InfeasibleInput(format!("L: {e}")))?;
    if alpha == 0.0 || alpha == 1.0 || x == y {
        return Ok(0.0);
    }
    let rx = regularizer_value(p, x)?;
    let ry = regularizer_value(p, y)?;
    let mix = &x.scale(alpha) + &y.scale(1.0 - alpha);
    let rmix = -logdet(&shifted(p, &mix))?;
    let inner = frobenius_dot(l, &(x - y))?;
    let s = p.strong_convexity();
    Ok(alpha * rx + (1.0 - alpha) * ry - 0.5 * s * alpha * (1.0 - alpha) * inner * inner - rmix)
}

/// `max_{i,j} |X_ij − Y_ij| / (X_ii + Y_ii + X_jj + Y_jj)` over pairs with a
/// positive denominator.
pub fn normalized_entry_gap(x: &SymMatrix, y: &SymMatrix) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: y.dim() });
    }
    let n = x.dim();
    let mut best = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            let den = x.get(i, i) + y.get(i, i) + x.get(j, j) + y.get(j, j);
            if den > 0.0 {
                best = best.max((x.get(i, j) - y.get(i, j)).abs() / den);
            }
        }
    }
    Ok(best)
}
