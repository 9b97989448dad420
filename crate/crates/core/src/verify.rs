//! Randomized property suites over the library, with a plain-text report.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{eigh, frobenius_dot, pd_laplacian, pinv, sqrt_psd, Edge, Graph, ResistanceMetric, SymMatrix};
use crate::omc::{
    build_gamma, embed_wpq, normalize_rows, omc_run_online, quasi_dimension_of_factorization, OmcConfig, QueryMode,
    SideInfo,
};
use crate::osdp::{
    normalized_entry_gap, project_k, regularizer_grad, regularizer_value, strong_convexity_gap, LossCheck,
    OsdpProblem, SolverSettings, FEASIBILITY_TOL,
};
use crate::sampling::{random_feasible, random_loss, random_pd, random_psd};
use crate::similarity::{cut_size, cut_size_per_class, similarity_run_online, ClassAssignment, SimilarityConfig};
use crate::synth::{block_labels, clique_graph, random_labels};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Linalg,
    Osdp,
    Omc,
    Similarity,
    All,
}

impl Suite {
    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linalg" => Ok(Suite::Linalg),
            "osdp" => Ok(Suite::Osdp),
            "omc" => Ok(Suite::Omc),
            "similarity" => Ok(Suite::Similarity),
            "all" => Ok(Suite::All),
            _ => Err(Error::InvalidParameter(format!("unknown suite {s:?}"))),
        }
    }
}

/// Deliberate defects, used to check that the suites catch them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Scales the analytic regularizer gradient by `1 + 1e-3`.
    GradientScale,
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub trials: usize,
    pub seed: u64,
    pub fault: Option<Fault>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyResult {
    pub suite: &'static str,
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Largest violation seen (property-specific units; `<= 0` is fine).
    pub worst: f64,
    pub first_failure: Option<String>,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub seed: u64,
    pub trials: usize,
    pub results: Vec<PropertyResult>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.results.iter().all(PropertyResult::passed)
    }

    pub fn failures(&self) -> usize {
        self.results.iter().filter(|r| !r.passed()).count()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verify seed={} trials={}", self.seed, self.trials)?;
        for r in &self.results {
            let status = if r.passed() { "PASS" } else { "FAIL" };
            write!(
                f,
                "{status} {}/{} trials={} failures={} worst={:.3e}",
                r.suite, r.name, r.trials, r.failures, r.worst
            )?;
            if let Some(msg) = &r.first_failure {
                write!(f, " first: {msg}")?;
            }
            writeln!(f)?;
        }
        let total = self.results.len();
        writeln!(f, "{} of {total} properties passed", total - self.failures())
    }
}

/// Outcome of a single trial: the violation (`<= 0` passes) and context.
struct Trial {
    violation: f64,
    context: String,
}

fn trial(violation: f64, context: impl Into<String>) -> Result<Trial> {
    Ok(Trial { violation, context: context.into() })
}

struct Runner {
    opts: VerifyOptions,
    results: Vec<PropertyResult>,
}

impl Runner {
    fn check(
        &mut self,
        suite: &'static str,
        name: &'static str,
        trials: usize,
        mut f: impl FnMut(&mut ChaCha8Rng, Option<Fault>) -> Result<Trial>,
    ) {
        let idx = self.results.len() as u64 + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed ^ idx.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut out = PropertyResult { suite, name, trials, failures: 0, worst: f64::NEG_INFINITY, first_failure: None };
        for k in 0..trials {
            let (violation, msg) = match f(&mut rng, self.opts.fault) {
                Ok(t) if t.violation.is_nan() => (f64::INFINITY, format!("NaN ({})", t.context)),
                Ok(t) => (t.violation, t.context),
                Err(e) => (f64::INFINITY, format!("error: {e}")),
            };
            out.worst = out.worst.max(violation);
            if violation > 0.0 {
                out.failures += 1;
                if out.first_failure.is_none() {
                    out.first_failure = Some(format!("trial {k}: {msg}"));
                }
            }
        }
        if trials == 0 {
            out.worst = 0.0;
        }
        self.results.push(out);
    }
}

pub fn run(suite: Suite, opts: &VerifyOptions) -> Result<Report> {
    if opts.trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let mut r = Runner { opts: opts.clone(), results: Vec::new() };
    let t = opts.trials;
    if suite.includes(Suite::Linalg) {
        linalg_suite(&mut r, t);
    }
    if suite.includes(Suite::Osdp) {
        osdp_suite(&mut r, t);
    }
    if suite.includes(Suite::Omc) {
        omc_suite(&mut r, t);
    }
    if suite.includes(Suite::Similarity) {
        similarity_suite(&mut r, t);
    }
    Ok(Report { seed: opts.seed, trials: t, results: r.results })
}

fn random_sym(n: usize, rng: &mut impl Rng) -> SymMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    SymMatrix::new(&g + g.transpose()).expect("square")
}

/// Connected random graph: a random spanning tree plus extra edges.
fn random_connected_graph(n: usize, rng: &mut impl Rng) -> Graph {
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.push(Edge { u, v, w: rng.random_range(0.5..2.0) });
    }
    for _ in 0..rng.random_range(0..=n) {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v && !edges.iter().any(|e| (e.u, e.v) == (u.min(v), u.max(v)) || (e.u, e.v) == (u.max(v), u.min(v))) {
            edges.push(Edge { u: u.min(v), v: u.max(v), w: rng.random_range(0.5..2.0) });
        }
    }
    Graph::new(n, edges).expect("valid edges")
}

fn random_problem(rng: &mut impl Rng, max_dim: usize) -> Result<OsdpProblem> {
    let n = rng.random_range(2..=max_dim);
    let gamma = random_pd(n, rng);
    let beta = rng.random_range(0.5..2.0);
    let tau = rng.random_range(0.5..2.0) * n as f64;
    let eps = [0.5, 1.0, 2.0][rng.random_range(0..3)];
    let g = rng.random_range(0.5..2.0);
    OsdpProblem::new(gamma, beta, tau, eps, g, 1.0)
}

fn linalg_suite(r: &mut Runner, t: usize) {
    r.check("linalg", "eigh_reconstruction", t, |rng, _| {
        let a = random_sym(rng.random_range(1..=10), rng);
        let e = eigh(&a)?;
        let back = e.map(|x| x);
        let err = back.max_abs_diff(&a) / a.max_abs().max(1.0);
        trial(err - 1e-10, format!("rel err {err:e}"))
    });
    r.check("linalg", "pinv_moore_penrose", t, |rng, _| {
        let n = rng.random_range(1..=8);
        let a = random_psd(n, rng.random_range(1..=n), rng);
        let p = pinv(&a)?;
        let apa = a.matmul(&p) * a.as_matrix();
        let err = (apa - a.as_matrix()).abs().max() / a.max_abs().max(1.0);
        trial(err - 1e-8, format!("rel err {err:e}"))
    });
    r.check("linalg", "sqrt_psd_squares_back", t, |rng, _| {
        let n = rng.random_range(1..=8);
        let a = random_psd(n, rng.random_range(1..=n), rng);
        let s = sqrt_psd(&a)?;
        let err = (s.matmul(&s) - a.as_matrix()).abs().max() / a.max_abs().max(1.0);
        trial(err - 1e-9, format!("rel err {err:e}"))
    });
    r.check("linalg", "pd_laplacian_is_pd", t, |rng, _| {
        let g = random_connected_graph(rng.random_range(2..=12), rng);
        let l = pd_laplacian(&g)?;
        let min = l.min_eigenvalue()?;
        trial(if min > 0.0 { -min } else { 1.0 }, format!("min eigenvalue {min:e}"))
    });
    r.check("linalg", "resistance_is_metric", t, |rng, _| {
        let n = rng.random_range(2..=10);
        let g = random_connected_graph(n, rng);
        let m = ResistanceMetric::new(&g)?;
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            worst = worst.max(m.between(i, i).abs() - 1e-10);
            for j in 0..n {
                worst = worst.max((m.between(i, j) - m.between(j, i)).abs() - 1e-10);
                if i != j {
                    worst = worst.max(-m.between(i, j));
                }
                for k in 0..n {
                    worst = worst.max(m.between(i, k) - m.between(i, j) - m.between(j, k) - 1e-10);
                }
            }
        }
        trial(worst, format!("n={n}"))
    });
}

fn osdp_suite(r: &mut Runner, t: usize) {
    r.check("osdp", "gradient_finite_difference", t, |rng, fault| {
        let p = random_problem(rng, 6)?;
        let n = p.dim();
        let w = &random_feasible(&p, rng).scale(0.8) + &SymMatrix::identity(n).scale(0.1 * p.beta());
        let mut grad = regularizer_grad(&p, &w)?;
        if fault == Some(Fault::GradientScale) {
            grad = grad.scale(1.0 + 1e-3);
        }
        let h = 1e-5;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                let mut d = SymMatrix::zeros(n);
                d.set_sym(i, j, 1.0);
                let dd = d.scale(h);
                let fd = (regularizer_value(&p, &(&w + &dd))? - regularizer_value(&p, &(&w - &dd))?) / (2.0 * h);
                let an = frobenius_dot(&grad, &d)?;
                worst = worst.max((fd - an).abs());
            }
        }
        let rel = worst / grad.max_abs().max(1e-12);
        trial(rel - 1e-5, format!("n={n} rel err {rel:e}"))
    });
    r.check("osdp", "h0_bound", t, |rng, _| {
        let p = random_problem(rng, 8)?;
        let (a, b) = (random_feasible(&p, rng), random_feasible(&p, rng));
        let diff = regularizer_value(&p, &a)? - regularizer_value(&p, &b)?;
        trial(diff - p.h0_bound() - 1e-8, format!("R diff {diff} vs {}", p.h0_bound()))
    });
    r.check("osdp", "strong_convexity", t, |rng, _| {
        let p = random_problem(rng, 8)?;
        let (x, y) = (random_feasible(&p, rng), random_feasible(&p, rng));
        let psd = rng.random_bool(0.5);
        let p = if psd { p } else { p.with_loss_check(LossCheck::L1Only) };
        let l = random_loss(&p, psd, rng);
        let alpha = rng.random::<f64>();
        let gap = strong_convexity_gap(&p, &x, &y, &l, alpha)?;
        trial(-gap - 1e-9, format!("gap {gap:e}"))
    });
    r.check("osdp", "entry_gap_inequality", t, |rng, _| {
        let p = random_problem(rng, 8)?;
        let (x, y) = (random_feasible(&p, rng), random_feasible(&p, rng));
        let psd = rng.random_bool(0.5);
        let p = if psd { p } else { p.with_loss_check(LossCheck::L1Only) };
        let l = random_loss(&p, psd, rng);
        let lhs = normalized_entry_gap(&x, &y)?;
        let rhs = frobenius_dot(&l, &(&x - &y))?.abs() / (4.0 * p.beta() * p.g());
        trial(rhs - lhs - 1e-9, format!("lhs {lhs:e} rhs {rhs:e}"))
    });
    r.check("osdp", "projection_feasible_and_idempotent", t.div_ceil(4), |rng, _| {
        let p = random_problem(rng, 5)?;
        let s = SolverSettings::default();
        let a = random_sym(p.dim(), rng).scale(rng.random_range(0.1..3.0));
        let x = project_k(&p, &a, &s)?;
        let feas = p.feasibility(&x)?;
        if !feas.within(&p, FEASIBILITY_TOL) {
            return trial(1.0, format!("infeasible projection {feas:?}"));
        }
        let again = project_k(&p, &x, &s)?;
        let moved = again.max_abs_diff(&x);
        trial(moved - 1e-6, format!("re-projection moved {moved:e}"))
    });
}

fn omc_suite(r: &mut Runner, t: usize) {
    r.check("omc", "quasi_dimension_identity", t, |rng, _| {
        let (m, n) = (rng.random_range(2..=6), rng.random_range(2..=6));
        let d = rng.random_range(1..=3);
        let si = SideInfo::new(random_pd(m, rng), random_pd(n, rng))?;
        let p = normalize_rows(&DMatrix::from_fn(m, d, |_, _| rng.sample(StandardNormal)))?;
        let q = normalize_rows(&DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal)))?;
        let qd = quasi_dimension_of_factorization(&p, &q, &si)?;
        let gamma = build_gamma(&si);
        let w = embed_wpq(&p, &q)?;
        let direct = gamma.congruence(&w).trace();
        let err = (qd - direct).abs();
        trial(err - 1e-9 * direct.abs().max(1.0), format!("{qd} vs {direct}"))
    });
    r.check("omc", "identity_side_info_gives_m_plus_n", t, |rng, _| {
        let (m, n) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let d = rng.random_range(1..=4);
        let si = SideInfo::identity(m, n);
        let p = normalize_rows(&DMatrix::from_fn(m, d, |_, _| rng.sample(StandardNormal)))?;
        let q = normalize_rows(&DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal)))?;
        let qd = quasi_dimension_of_factorization(&p, &q, &si)?;
        let err = (qd - (m + n) as f64).abs();
        trial(err - 1e-9, format!("{qd} vs {}", m + n))
    });
    r.check("omc", "mistake_driven_contract", t.div_ceil(20), |rng, _| {
        let (m, n) = (rng.random_range(2..=5), rng.random_range(2..=5));
        let u = DMatrix::from_fn(m, n, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
        let si = SideInfo::new(random_pd(m, rng), random_pd(n, rng))?;
        let cfg = OmcConfig::new(si, 0.5, (m + n) as f64);
        let (_, trace) = omc_run_online(&cfg, &u, 30, rng.random(), QueryMode::Uniform)?;
        match trace.check_contract(cfg.gamma_margin) {
            Ok(()) => trial(-1.0, ""),
            Err(msg) => trial(1.0, msg),
        }
    });
}

fn similarity_suite(r: &mut Runner, t: usize) {
    r.check("similarity", "cut_size_per_class_sum", t, |rng, _| {
        let n = rng.random_range(2..=12);
        let g = random_connected_graph(n, rng);
        let k = rng.random_range(1..=n.min(4));
        let y = ClassAssignment::new(random_labels(n, k, rng), k)?;
        let total = cut_size(&g, &y)?;
        let per: usize = (0..k).map(|s| cut_size_per_class(&g, &y, s)).sum::<Result<usize>>()?;
        trial(if per == 2 * total { -1.0 } else { 1.0 }, format!("sum {per} vs 2×{total}"))
    });
    r.check("similarity", "mistake_driven_contract", t.div_ceil(20), |rng, _| {
        let n = rng.random_range(4..=8);
        let labels = block_labels(n, 2);
        let g = clique_graph(&labels, 2)?;
        let y = ClassAssignment::new(labels, 2)?;
        let cfg = SimilarityConfig::new(g, y, 0.5, 2.0 * n as f64);
        let (_, trace) = similarity_run_online(&cfg, 30, rng.random(), QueryMode::Uniform)?;
        match trace.check_contract(cfg.gamma_margin) {
            Ok(()) => trial(-1.0, ""),
            Err(msg) => trial(1.0, msg),
        }
    });
}
