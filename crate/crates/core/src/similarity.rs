//! Online similarity prediction on a graph: predict whether two vertices
//! share a class, through the same mistake-driven OSDP reduction with
//! `Γ = diag(√(R_L̄ L̄), √(R_L̄ L̄))`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{laplacian, pd_laplacian, squared_radius, Graph, ResistanceMetric, SymMatrix};
use crate::omc::{
    build_gamma, drive_online, reduction_problem, run_mistake_driven, validate_reduction, LabeledSequence,
    MistakeTrace, QueryMode, QuerySource, SideInfo, DEFAULT_C_ETA,
};
use crate::osdp::SolverSettings;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl ClassAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&c| c >= k) {
            return Err(Error::InvalidParameter(format!("class {bad} out of range for {k} classes")));
        }
        Ok(ClassAssignment { labels, k })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn len(&self) -> usize {
        self.labels.len()
    }
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn require_all_used(&self) -> Result<()> {
        let mut used = vec![false; self.k];
        for &c in &self.labels {
            used[c] = true;
        }
        match used.iter().position(|&u| !u) {
            Some(c) => Err(Error::InvalidParameter(format!("class {c} has no vertices"))),
            None => Ok(()),
        }
    }

    /// `+1` if `i` and `j` share a class, else `−1`.
    pub fn similarity(&self, i: usize, j: usize) -> i8 {
        if self.labels[i] == self.labels[j] {
            1
        } else {
            -1
        }
    }

    /// One-hot `n × K` class matrix.
    pub fn indicator(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.labels.len(), self.k, |i, c| if self.labels[i] == c { 1.0 } else { 0.0 })
    }
}

fn check_len(g: &Graph, y: &ClassAssignment) -> Result<()> {
    if y.len() != g.n_vertices() {
        return Err(Error::DimensionMismatch { expected: g.n_vertices(), got: y.len() });
    }
    Ok(())
}

/// Number of edges joining differently labelled vertices.
pub fn cut_size(g: &Graph, y: &ClassAssignment) -> Result<usize> {
    check_len(g, y)?;
    Ok(g.edges().iter().filter(|e| y.labels[e.u] != y.labels[e.v]).count())
}

/// Number of cut edges with an endpoint in class `s`.
pub fn cut_size_per_class(g: &Graph, y: &ClassAssignment, s: usize) -> Result<usize> {
    check_len(g, y)?;
    if s >= y.k {
        return Err(Error::InvalidParameter(format!("class {s} out of range for {} classes", y.k)));
    }
    Ok(g.edges()
        .iter()
        .filter(|e| {
            let (a, b) = (y.labels[e.u], y.labels[e.v]);
            a != b && (a == s || b == s)
        })
        .count())
}

/// PD-Laplacian side information on both blocks.
pub fn similarity_side_info(g: &Graph) -> Result<SideInfo> {
    let lbar = pd_laplacian(g)?;
    SideInfo::new(lbar.clone(), lbar)
}

/// `2n × 2n` matrix `diag(√(R_L̄ L̄), √(R_L̄ L̄))`.
pub fn similarity_gamma(g: &Graph) -> Result<SymMatrix> {
    Ok(build_gamma(&similarity_side_info(g)?))
}

/// Per-block term `2 Tr(Rᵀ L̄ R) R_L̄ + 2K` with `R` the class indicator of `y`.
pub fn clique_block_bound(g: &Graph, y: &ClassAssignment) -> Result<f64> {
    check_len(g, y)?;
    let lbar = pd_laplacian(g)?;
    let r = y.indicator();
    let t = (r.transpose() * lbar.as_matrix() * &r).trace();
    Ok(2.0 * t * squared_radius(&lbar)? + 2.0 * y.k as f64)
}

/// Quasi-dimension estimate for class-structured similarity: the per-block
/// term counted for both the row and the column block of the embedding.
pub fn clique_d_hat(g: &Graph, y: &ClassAssignment) -> Result<f64> {
    Ok(2.0 * clique_block_bound(g, y)?)
}

/// Normalized factorization `(R, R (2I − 𝟙)/√K)` of the `±1` similarity
/// matrix, with margin `1/√K`. For `K <= 2` a single `±1` column suffices and
/// the margin is 1.
pub fn planted_similarity_factors(y: &ClassAssignment) -> (DMatrix<f64>, DMatrix<f64>, f64) {
    let n = y.len();
    if y.k <= 2 {
        let v = DMatrix::from_fn(n, 1, |i, _| if y.labels[i] == 0 { 1.0 } else { -1.0 });
        return (v.clone(), v, 1.0);
    }
    let k = y.k as f64;
    let r = y.indicator();
    let core = DMatrix::from_fn(y.k, y.k, |a, b| if a == b { 1.0 } else { -1.0 });
    let q = &r * core / k.sqrt();
    (r, q, 1.0 / k.sqrt())
}

#[derive(Clone, Debug)]
pub struct SimilarityConfig {
    pub graph: Graph,
    pub labels: ClassAssignment,
    pub gamma_margin: f64,
    pub d_hat: f64,
    pub c_eta: f64,
    pub epsilon: f64,
    pub solver: SolverSettings,
}

impl SimilarityConfig {
    pub fn new(graph: Graph, labels: ClassAssignment, gamma_margin: f64, d_hat: f64) -> Self {
        SimilarityConfig {
            graph,
            labels,
            gamma_margin,
            d_hat,
            c_eta: DEFAULT_C_ETA,
            epsilon: 1.0,
            solver: SolverSettings::default(),
        }
    }

    pub fn n(&self) -> usize {
        self.graph.n_vertices()
    }

    pub fn validate(&self) -> Result<()> {
        validate_reduction(self.gamma_margin, self.d_hat, self.c_eta, self.epsilon)?;
        self.solver.validate()?;
        check_len(&self.graph, &self.labels)?;
        self.graph.require_connected()
    }

    fn problem(&self) -> Result<crate::osdp::OsdpProblem> {
        self.validate()?;
        reduction_problem(similarity_gamma(&self.graph)?, self.gamma_margin, self.d_hat, self.c_eta, self.epsilon)
    }
}

/// Mistake-driven run on pair queries `(i, j, y)`; the pair is read off the
/// decision at `(i, n + j)`.
pub fn similarity_run(config: &SimilarityConfig, seq: &LabeledSequence) -> Result<MistakeTrace> {
    let n = config.n();
    if seq.rows() != n || seq.cols() != n {
        return Err(Error::InvalidParameter(format!(
            "pair sequence is over {}×{} but the graph has {n} vertices",
            seq.rows(),
            seq.cols()
        )));
    }
    run_mistake_driven(config.problem()?, config.solver, n, config.gamma_margin, seq)
}

/// Online run on unordered vertex pairs `i < j`, labelled by `config.labels`.
pub fn similarity_run_online(
    config: &SimilarityConfig,
    rounds: usize,
    seed: u64,
    mode: QueryMode,
) -> Result<(LabeledSequence, MistakeTrace)> {
    let n = config.n();
    let problem = config.problem()?;
    let labels = &config.labels;
    let src = QuerySource { rows: n, cols: n, mode, unordered_pairs: true, label: |i, j| labels.similarity(i, j) };
    drive_online(problem, config.solver, n, config.gamma_margin, rounds, seed, src)
}

/// Largest effective resistance against twice the squared radius of the Laplacian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResistanceReport {
    pub max_resistance: f64,
    pub squared_radius: f64,
    /// `max R_ij <= 2 R_L + 1e-9`.
    pub inequality_holds: bool,
}

pub fn resistance_diameter(g: &Graph) -> Result<ResistanceReport> {
    let metric = ResistanceMetric::new(g)?;
    let max_resistance = metric.max_pair();
    let r = squared_radius(&laplacian(g))?;
    Ok(ResistanceReport { max_resistance, squared_radius: r, inequality_holds: max_resistance <= 2.0 * r + 1e-9 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::omc::{hloss_sequence, quasi_dimension_of_factorization, Triple};
    use crate::synth::{block_labels, clique_graph};
    use approx::assert_relative_eq;

    fn triangle() -> Graph {
        Graph::unweighted(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn cut_size_examples() {
        let g = triangle();
        let same = ClassAssignment::new(vec![0, 0, 0], 2).unwrap();
        assert_eq!(cut_size(&g, &same).unwrap(), 0);
        assert_eq!(cut_size_per_class(&g, &same, 1).unwrap(), 0);
        let y = ClassAssignment::new(vec![0, 0, 1], 2).unwrap();
        assert_eq!(cut_size(&g, &y).unwrap(), 2);
        assert_eq!(cut_size_per_class(&g, &y, 0).unwrap(), 2);
        assert_eq!(cut_size_per_class(&g, &y, 1).unwrap(), 2);

        let labels = vec![0, 0, 1, 1, 2];
        let cliques = Graph::unweighted(5, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(cut_size(&cliques, &ClassAssignment::new(labels, 3).unwrap()).unwrap(), 0);
        assert!(cut_size(&g, &ClassAssignment::new(vec![0, 1], 2).unwrap()).is_err());
        assert!(ClassAssignment::new(vec![0, 3], 2).is_err());
    }

    #[test]
    fn gamma_of_single_edge() {
        let g = Graph::unweighted(2, &[(0, 1)]).unwrap();
        let gamma = similarity_gamma(&g).unwrap();
        let lbar = SymMatrix::from_rows(&[&[17.0 / 16.0, -15.0 / 16.0], &[-15.0 / 16.0, 17.0 / 16.0]]).unwrap();
        let block = crate::linalg::sqrt_psd(&lbar.scale(4.25)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(gamma.get(i, j), block.get(i, j), epsilon = 1e-12);
                assert_relative_eq!(gamma.get(i + 2, j + 2), block.get(i, j), epsilon = 1e-12);
                assert_eq!(gamma.get(i, j + 2), 0.0);
            }
        }
        assert!(gamma.min_eigenvalue().unwrap() > 0.0);
    }

    #[test]
    fn resistance_reports() {
        let edge = resistance_diameter(&Graph::unweighted(2, &[(0, 1)]).unwrap()).unwrap();
        assert_relative_eq!(edge.max_resistance, 1.0, epsilon = 1e-12);
        assert_relative_eq!(edge.squared_radius, 0.25, epsilon = 1e-12);
        assert!(!edge.inequality_holds);
        let k3 = resistance_diameter(&triangle()).unwrap();
        assert_relative_eq!(k3.max_resistance, 2.0 / 3.0, epsilon = 1e-12);
        let path = resistance_diameter(&Graph::unweighted(3, &[(0, 1), (1, 2)]).unwrap()).unwrap();
        assert_relative_eq!(path.max_resistance, 2.0, epsilon = 1e-12);
        let split = Graph::unweighted(3, &[(0, 1)]).unwrap();
        assert!(matches!(resistance_diameter(&split), Err(Error::NotConnected)));
    }

    #[test]
    fn planted_factors_realize_similarity() {
        for k in [2, 3, 4] {
            let y = ClassAssignment::new(block_labels(12, k), k).unwrap();
            let (p, q, margin) = planted_similarity_factors(&y);
            let triples = (0..12)
                .flat_map(|i| (0..12).map(move |j| (i, j)))
                .map(|(i, j)| Triple { i, j, y: y.similarity(i, j) })
                .collect();
            let seq = LabeledSequence::new(12, 12, triples).unwrap();
            assert_eq!(hloss_sequence(&seq, &p, &q, margin).unwrap(), 0.0);
            assert!(hloss_sequence(&seq, &p, &q, margin * 1.01).unwrap() > 0.0);
        }
    }

    #[test]
    fn clique_d_hat_covers_planted_factorization() {
        for k in [2, 3] {
            let labels = block_labels(20, k);
            let g = clique_graph(&labels, k).unwrap();
            let y = ClassAssignment::new(labels, k).unwrap();
            let (p, q, _) = planted_similarity_factors(&y);
            let si = similarity_side_info(&g).unwrap();
            let d = quasi_dimension_of_factorization(&p, &q, &si).unwrap();
            assert!(d <= clique_d_hat(&g, &y).unwrap() + 1e-9, "k={k}: {d}");
            let r = y.indicator();
            let d_r = quasi_dimension_of_factorization(&r, &r, &si).unwrap();
            assert_relative_eq!(clique_block_bound(&g, &y).unwrap(), d_r + 2.0 * k as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn within_clique_queries_follow_contract() {
        let labels = block_labels(8, 2);
        let g = clique_graph(&labels, 2).unwrap();
        let y = ClassAssignment::new(labels, 2).unwrap();
        let d = clique_d_hat(&g, &y).unwrap();
        let cfg = SimilarityConfig::new(g, y, 0.5, d);
        let (seq, tr) = similarity_run_online(&cfg, 40, 3, QueryMode::Uniform).unwrap();
        tr.check_contract(0.5).unwrap();
        assert!(seq.triples().iter().all(|t| t.i < t.j));
        assert_eq!(similarity_run(&cfg, &seq).unwrap(), tr);
    }
}
