//! Online binary matrix completion with side information, reduced to the
//! Γ-trace-bounded OSDP problem and run in the mistake-driven manner.
//!
//! An `m × n` matrix is embedded in the `(m+n) × (m+n)` decision `W`; the
//! entry `(i, j)` is read off as `W • Z⟨i,j⟩ = W_{i, m+j}` where
//! `Z⟨i,j⟩ = ½(e_i e_{m+j}ᵀ + e_{m+j} e_iᵀ)`.

pub mod io;

use log::debug;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sqrt_psd, squared_radius, SymMatrix};
use crate::osdp::{FtrlState, LossCheck, OsdpProblem, SolverSettings, STRONG_CONVEXITY_CONSTANT};

/// `C_mb` in `M <= C_mb D̂/γ² + 2 hloss`.
///
/// With `β = ε = ρ = 1` and `g = 1/γ`, the explicit FTRL bound reads
/// `M <= D̂/η + η M · 4608√e/γ² + hloss`. Taking `η = γ²/(2 · 4608√e)` gives
/// `M <= 4 · 4608√e · D̂/γ² + 2 hloss`.
pub const MISTAKE_BOUND_CONSTANT: f64 = 16.0 * STRONG_CONVEXITY_CONSTANT * 1.648_721_270_700_128_1;

/// Default `c` in `η = c γ²`.
pub const DEFAULT_C_ETA: f64 = 0.1;

/// Row and column side information.
#[derive(Clone, Debug)]
pub struct SideInfo {
    m: SymMatrix,
    n: SymMatrix,
    r_m: f64,
    r_n: f64,
    sqrt_m: SymMatrix,
    sqrt_n: SymMatrix,
}

impl SideInfo {
    pub fn new(m: SymMatrix, n: SymMatrix) -> Result<Self> {
        for (name, a) in [("M", &m), ("N", &n)] {
            let min = a.min_eigenvalue()?;
            if !(min > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "side information {name} must be strictly PD (min eigenvalue {min:e})"
                )));
            }
        }
        Ok(SideInfo {
            r_m: squared_radius(&m)?,
            r_n: squared_radius(&n)?,
            sqrt_m: sqrt_psd(&m)?,
            sqrt_n: sqrt_psd(&n)?,
            m,
            n,
        })
    }

    /// Vacuous side information `M = I_m`, `N = I_n`.
    pub fn identity(rows: usize, cols: usize) -> Self {
        SideInfo {
            m: SymMatrix::identity(rows),
            n: SymMatrix::identity(cols),
            r_m: 1.0,
            r_n: 1.0,
            sqrt_m: SymMatrix::identity(rows),
            sqrt_n: SymMatrix::identity(cols),
        }
    }

    pub fn rows(&self) -> usize {
        self.m.dim()
    }
    pub fn cols(&self) -> usize {
        self.n.dim()
    }
    pub fn m(&self) -> &SymMatrix {
        &self.m
    }
    pub fn n(&self) -> &SymMatrix {
        &self.n
    }
    pub fn r_m(&self) -> f64 {
        self.r_m
    }
    pub fn r_n(&self) -> f64 {
        self.r_n
    }
}

/// `h_γ(x) = 0` for `x >= γ`, else `1 − x/γ`.
pub fn hinge(gamma_margin: f64, x: f64) -> f64 {
    if x >= gamma_margin {
        0.0
    } else {
        1.0 - x / gamma_margin
    }
}

/// Scales every row to unit ℓ₂ norm.
pub fn normalize_rows(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = a.clone();
    for (r, mut row) in out.row_iter_mut().enumerate() {
        let norm = row.norm();
        if norm == 0.0 {
            return Err(Error::ZeroRow { row: r });
        }
        row /= norm;
    }
    Ok(out)
}

/// Block-diagonal `Γ = diag(√(R_M M), √(R_N N))`.
pub fn build_gamma(si: &SideInfo) -> SymMatrix {
    let (rows, cols) = (si.rows(), si.cols());
    let sm = si.r_m.sqrt();
    let sn = si.r_n.sqrt();
    let mut g = DMatrix::zeros(rows + cols, rows + cols);
    g.view_mut((0, 0), (rows, rows)).copy_from(&(si.sqrt_m.as_matrix() * sm));
    g.view_mut((rows, rows), (cols, cols)).copy_from(&(si.sqrt_n.as_matrix() * sn));
    SymMatrix::new(g).expect("square")
}

fn check_factor_widths(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<()> {
    if p.ncols() != q.ncols() {
        return Err(Error::DimensionMismatch { expected: p.ncols(), got: q.ncols() });
    }
    Ok(())
}

/// `W = [P̄; Q̄][P̄; Q̄]ᵀ`, whose upper-right block is `P̄ Q̄ᵀ`.
pub fn embed_wpq(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<SymMatrix> {
    check_factor_widths(p, q)?;
    let pn = normalize_rows(p)?;
    let qn = normalize_rows(q)?;
    let stacked = DMatrix::from_fn(p.nrows() + q.nrows(), p.ncols(), |r, c| {
        if r < p.nrows() {
            pn[(r, c)]
        } else {
            qn[(r - p.nrows(), c)]
        }
    });
    let mut w = SymMatrix::new(&stacked * stacked.transpose()).expect("square");
    for i in 0..w.dim() {
        w.set_sym(i, i, 1.0);
    }
    Ok(w)
}

/// `R_M Tr(P̄ᵀ M P̄) + R_N Tr(Q̄ᵀ N Q̄)`.
pub fn quasi_dimension_of_factorization(p: &DMatrix<f64>, q: &DMatrix<f64>, si: &SideInfo) -> Result<f64> {
    check_factor_widths(p, q)?;
    if p.nrows() != si.rows() {
        return Err(Error::DimensionMismatch { expected: si.rows(), got: p.nrows() });
    }
    if q.nrows() != si.cols() {
        return Err(Error::DimensionMismatch { expected: si.cols(), got: q.nrows() });
    }
    let pn = normalize_rows(p)?;
    let qn = normalize_rows(q)?;
    let tp = (pn.transpose() * si.m.as_matrix() * &pn).trace();
    let tq = (qn.transpose() * si.n.as_matrix() * &qn).trace();
    Ok(si.r_m * tp + si.r_n * tq)
}

/// One labelled query `(i, j, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub i: usize,
    pub j: usize,
    pub y: i8,
}

/// Query sequence over an `rows × cols` matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSequence {
    rows: usize,
    cols: usize,
    triples: Vec<Triple>,
}

impl LabeledSequence {
    pub fn new(rows: usize, cols: usize, triples: Vec<Triple>) -> Result<Self> {
        for (t, tr) in triples.iter().enumerate() {
            if tr.i >= rows || tr.j >= cols {
                return Err(Error::InvalidParameter(format!(
                    "query {} = ({}, {}) out of range for a {rows}×{cols} matrix",
                    t + 1,
                    tr.i,
                    tr.j
                )));
            }
            if tr.y != 1 && tr.y != -1 {
                return Err(Error::InvalidParameter(format!("query {} has label {} (want ±1)", t + 1, tr.y)));
            }
        }
        Ok(LabeledSequence { rows, cols, triples })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }
    pub fn len(&self) -> usize {
        self.triples.len()
    }
    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

/// `Σ_t h_γ(y_t P_i Q_jᵀ / (‖P_i‖ ‖Q_j‖))`.
pub fn hloss_sequence(s: &LabeledSequence, p: &DMatrix<f64>, q: &DMatrix<f64>, gamma_margin: f64) -> Result<f64> {
    check_factor_widths(p, q)?;
    if p.nrows() != s.rows || q.nrows() != s.cols {
        return Err(Error::DimensionMismatch { expected: s.rows + s.cols, got: p.nrows() + q.nrows() });
    }
    let pn = normalize_rows(p)?;
    let qn = normalize_rows(q)?;
    Ok(s.triples
        .iter()
        .map(|t| hinge(gamma_margin, f64::from(t.y) * pn.row(t.i).dot(&qn.row(t.j))))
        .sum())
}

/// Loss fed to the OSDP learner: `0` if the margin is met, else `−(y/γ) Z⟨i,j⟩`.
pub fn loss_matrix(i: usize, j: usize, y: i8, gamma_margin: f64, m: usize, n: usize, margin_ok: bool) -> SymMatrix {
    let mut l = SymMatrix::zeros(m + n);
    if !margin_ok {
        l.set_sym(i, m + j, -f64::from(y) / (2.0 * gamma_margin));
    }
    l
}

#[derive(Clone, Debug)]
pub struct OmcConfig {
    pub gamma_margin: f64,
    pub d_hat: f64,
    pub c_eta: f64,
    pub epsilon: f64,
    pub side_info: SideInfo,
    pub solver: SolverSettings,
}

impl OmcConfig {
    pub fn new(side_info: SideInfo, gamma_margin: f64, d_hat: f64) -> Self {
        OmcConfig {
            gamma_margin,
            d_hat,
            c_eta: DEFAULT_C_ETA,
            epsilon: 1.0,
            side_info,
            solver: SolverSettings::default(),
        }
    }

    pub fn rows(&self) -> usize {
        self.side_info.rows()
    }
    pub fn cols(&self) -> usize {
        self.side_info.cols()
    }
    /// `η = c γ²`.
    pub fn eta(&self) -> f64 {
        self.c_eta * self.gamma_margin * self.gamma_margin
    }

    pub fn validate(&self) -> Result<()> {
        validate_reduction(self.gamma_margin, self.d_hat, self.c_eta, self.epsilon)?;
        self.solver.validate()
    }

    /// OSDP instance with `β = 1`, `τ = D̂`, `g = 1/γ`, `η = cγ²`.
    pub fn problem(&self) -> Result<OsdpProblem> {
        self.validate()?;
        reduction_problem(build_gamma(&self.side_info), self.gamma_margin, self.d_hat, self.c_eta, self.epsilon)
    }
}

pub(crate) fn validate_reduction(gamma_margin: f64, d_hat: f64, c_eta: f64, epsilon: f64) -> Result<()> {
    if !(gamma_margin > 0.0 && gamma_margin <= 1.0) {
        return Err(Error::InvalidParameter(format!("margin γ must lie in (0, 1], got {gamma_margin}")));
    }
    if !(d_hat >= 1.0 && d_hat.is_finite()) {
        return Err(Error::InvalidParameter(format!("D̂ must be at least 1, got {d_hat}")));
    }
    if !(c_eta > 0.0 && c_eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("c must be positive, got {c_eta}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("ε must be positive, got {epsilon}")));
    }
    Ok(())
}

pub(crate) fn reduction_problem(gamma: SymMatrix, gamma_margin: f64, d_hat: f64, c_eta: f64, epsilon: f64) -> Result<OsdpProblem> {
    let eta = c_eta * gamma_margin * gamma_margin;
    Ok(OsdpProblem::new(gamma, 1.0, d_hat, epsilon, 1.0 / gamma_margin, eta)?.with_loss_check(LossCheck::L1Only))
}

/// One round of a mistake-driven run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub i: usize,
    pub j: usize,
    pub y: i8,
    pub y_hat: i8,
    /// `W_t • Z⟨i,j⟩`.
    pub margin: f64,
    pub mistake: bool,
    pub ftrl_invoked: bool,
    pub ftrl_iters: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MistakeTrace {
    pub per_round: Vec<RoundRecord>,
    pub total_mistakes: usize,
    /// Worst [`Feasibility::violation`](crate::osdp::Feasibility::violation) over all iterates of the run.
    #[serde(default)]
    pub max_violation: f64,
}

impl MistakeTrace {
    /// Mistakes among rounds `from+1 ..= to` (1-based, inclusive).
    pub fn mistakes_between(&self, from: usize, to: usize) -> usize {
        self.per_round.iter().filter(|r| r.t > from && r.t <= to && r.mistake).count()
    }

    /// Cumulative mistake count after each round.
    pub fn cumulative(&self) -> Vec<usize> {
        self.per_round
            .iter()
            .scan(0, |c, r| {
                *c += usize::from(r.mistake);
                Some(*c)
            })
            .collect()
    }

    /// Checks the bookkeeping of a mistake-driven run: the mistake count,
    /// `ftrl_invoked == mistake`, the `sign(0) = +1` rule and
    /// `h_γ(y · margin) >= 1` on every mistaken round.
    pub fn check_contract(&self, gamma_margin: f64) -> std::result::Result<(), String> {
        let count = self.per_round.iter().filter(|r| r.mistake).count();
        if count != self.total_mistakes {
            return Err(format!("total_mistakes {} but {count} mistake flags", self.total_mistakes));
        }
        for r in &self.per_round {
            if r.ftrl_invoked != r.mistake {
                return Err(format!("round {}: ftrl_invoked = {} but mistake = {}", r.t, r.ftrl_invoked, r.mistake));
            }
            let want = if r.margin >= 0.0 { 1 } else { -1 };
            if r.y_hat != want || r.mistake != (r.y_hat != r.y) {
                return Err(format!("round {}: inconsistent prediction record", r.t));
            }
            if r.mistake && hinge(gamma_margin, f64::from(r.y) * r.margin) < 1.0 {
                return Err(format!("round {}: hinge loss below 1 on a mistake", r.t));
            }
        }
        Ok(())
    }
}

/// Runs the mistake-driven reduction. The matrix entry `(i, j)` lives at
/// `(i, offset + j)` of the decision.
pub(crate) fn run_mistake_driven(
    problem: OsdpProblem,
    solver: SolverSettings,
    offset: usize,
    gamma_margin: f64,
    seq: &LabeledSequence,
) -> Result<MistakeTrace> {
    let triples = seq.triples();
    drive(problem, solver, offset, gamma_margin, triples.len(), |trace| triples[trace.per_round.len()])
}

/// Mistake-driven loop over `rounds` queries drawn from `next`, which sees the trace so far.
fn drive(
    problem: OsdpProblem,
    solver: SolverSettings,
    offset: usize,
    gamma_margin: f64,
    rounds: usize,
    mut next: impl FnMut(&MistakeTrace) -> Triple,
) -> Result<MistakeTrace> {
    let mut state = FtrlState::new(problem, solver)?;
    let max_violation = state.problem().feasibility(state.current())?.violation(state.problem());
    let mut trace = MistakeTrace { per_round: Vec::with_capacity(rounds), total_mistakes: 0, max_violation };
    for t in 1..=rounds {
        let tr = next(&trace);
        let col = offset + tr.j;
        let margin = state.current().get(tr.i, col);
        let y_hat: i8 = if margin >= 0.0 { 1 } else { -1 };
        let mistake = y_hat != tr.y;
        let mut ftrl_iters = 0;
        if mistake {
            let mut l = SymMatrix::zeros(state.problem().dim());
            l.set_sym(tr.i, col, -f64::from(tr.y) / (2.0 * gamma_margin));
            let out = state.osdp_round(&l).map_err(|e| match e {
                Error::Round { source, .. } => Error::Round { round: t, source },
                e => Error::Round { round: t, source: Box::new(e) },
            })?;
            ftrl_iters = out.stats.map_or(0, |s| s.iterations);
            trace.total_mistakes += 1;
            let v = state.problem().feasibility(state.current())?.violation(state.problem());
            trace.max_violation = trace.max_violation.max(v);
            debug!("round {t}: mistake #{} at ({}, {}), {} inner iterations", trace.total_mistakes, tr.i, tr.j, ftrl_iters);
        }
        trace.per_round.push(RoundRecord {
            t,
            i: tr.i,
            j: tr.j,
            y: tr.y,
            y_hat,
            margin,
            mistake,
            ftrl_invoked: mistake,
            ftrl_iters,
        });
    }
    Ok(trace)
}

/// How an online run picks its queries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum QueryMode {
    /// Independent uniform entries.
    Uniform,
    /// With probability `prob`, re-query an entry the learner has already got wrong.
    ReplayMistakes { prob: f64 },
}

impl QueryMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            QueryMode::Uniform => Ok(()),
            QueryMode::ReplayMistakes { prob } if (0.0..=1.0).contains(&prob) => Ok(()),
            QueryMode::ReplayMistakes { prob } => {
                Err(Error::InvalidParameter(format!("replay probability must lie in [0, 1], got {prob}")))
            }
        }
    }
}

/// Online query source over `rows × cols` entries labelled by `label`.
pub(crate) struct QuerySource<F> {
    pub rows: usize,
    pub cols: usize,
    pub mode: QueryMode,
    /// Draw pairs `i < j` of distinct indices (square, symmetric problems).
    pub unordered_pairs: bool,
    pub label: F,
}

pub(crate) fn drive_online<F: Fn(usize, usize) -> i8>(
    problem: OsdpProblem,
    solver: SolverSettings,
    offset: usize,
    gamma_margin: f64,
    rounds: usize,
    seed: u64,
    src: QuerySource<F>,
) -> Result<(LabeledSequence, MistakeTrace)> {
    src.mode.validate()?;
    if src.unordered_pairs && src.rows < 2 {
        return Err(Error::InvalidParameter("distinct pairs need at least two vertices".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trace = drive(problem, solver, offset, gamma_margin, rounds, |trace| {
        if let QueryMode::ReplayMistakes { prob } = src.mode {
            if trace.total_mistakes > 0 && rng.random_bool(prob) {
                let k = rng.random_range(0..trace.total_mistakes);
                let r = trace.per_round.iter().filter(|r| r.mistake).nth(k).expect("k < total");
                return Triple { i: r.i, j: r.j, y: r.y };
            }
        }
        let i = rng.random_range(0..src.rows);
        let mut j = rng.random_range(0..src.cols);
        while src.unordered_pairs && j == i {
            j = rng.random_range(0..src.cols);
        }
        let (i, j) = if src.unordered_pairs { (i.min(j), i.max(j)) } else { (i, j) };
        Triple { i, j, y: (src.label)(i, j) }
    })?;
    let triples = trace.per_round.iter().map(|r| Triple { i: r.i, j: r.j, y: r.y }).collect();
    Ok((LabeledSequence::new(src.rows, src.cols, triples)?, trace))
}

/// Algorithm 1: predict `sign(W_t • Z_t)` and update only on mistakes.
pub fn omc_run(config: &OmcConfig, seq: &LabeledSequence) -> Result<MistakeTrace> {
    if seq.rows() != config.rows() || seq.cols() != config.cols() {
        return Err(Error::InvalidParameter(format!(
            "sequence is over a {}×{} matrix but side information is {}×{}",
            seq.rows(),
            seq.cols(),
            config.rows(),
            config.cols()
        )));
    }
    let problem = config.problem()?;
    run_mistake_driven(problem, config.solver, config.rows(), config.gamma_margin, seq)
}

/// Online variant of [`omc_run`]: queries are drawn as the run proceeds
/// according to `mode`, labelled by the sign of `u`. Returns the realised
/// sequence with the trace.
pub fn omc_run_online(
    config: &OmcConfig,
    u: &DMatrix<f64>,
    rounds: usize,
    seed: u64,
    mode: QueryMode,
) -> Result<(LabeledSequence, MistakeTrace)> {
    if u.nrows() != config.rows() || u.ncols() != config.cols() {
        return Err(Error::DimensionMismatch { expected: config.rows() * config.cols(), got: u.len() });
    }
    let problem = config.problem()?;
    let src = QuerySource {
        rows: config.rows(),
        cols: config.cols(),
        mode,
        unordered_pairs: false,
        label: |i: usize, j: usize| if u[(i, j)] >= 0.0 { 1 } else { -1 },
    };
    drive_online(problem, config.solver, config.rows(), config.gamma_margin, rounds, seed, src)
}

/// `C_mb D̂/γ² + 2 hloss`.
pub fn mistake_bound(config: &OmcConfig, hloss_value: f64) -> f64 {
    MISTAKE_BOUND_CONSTANT * config.d_hat / (config.gamma_margin * config.gamma_margin) + 2.0 * hloss_value
}
