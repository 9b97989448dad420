//! Synthetic biclustered instances, clique side-information graphs and query sequences.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pd_laplacian, squared_radius, Edge, Graph, SymMatrix};
use crate::omc::{LabeledSequence, SideInfo, Triple};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiclusterSpec {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub seed: u64,
    pub noise_rate: f64,
}

impl BiclusterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.l == 0 {
            return Err(Error::Spec("k and l must be at least 1".into()));
        }
        if self.k > self.m || self.l > self.n {
            return Err(Error::Spec(format!(
                "need k <= m and l <= n, got k={}, m={}, l={}, n={}",
                self.k, self.m, self.l, self.n
            )));
        }
        if !(0.0..0.5).contains(&self.noise_rate) {
            return Err(Error::Spec(format!("noise rate must lie in [0, 0.5), got {}", self.noise_rate)));
        }
        Ok(())
    }
}

/// A `(k, l)`-biclustered matrix `U = R U* Cᵀ` with clique side-information graphs.
#[derive(Clone, Debug)]
pub struct PlantedInstance {
    pub spec: BiclusterSpec,
    pub u: DMatrix<f64>,
    pub row_cluster: Vec<usize>,
    pub col_cluster: Vec<usize>,
    pub u_star: DMatrix<f64>,
    pub row_graph: Graph,
    pub col_graph: Graph,
    pub d_hat_bound: f64,
}

/// One-hot assignment matrix of `labels` over `k` classes.
pub fn assignment_matrix(labels: &[usize], k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), k, |i, c| if labels[i] == c { 1.0 } else { 0.0 })
}

impl PlantedInstance {
    pub fn r(&self) -> DMatrix<f64> {
        assignment_matrix(&self.row_cluster, self.spec.k)
    }

    pub fn c(&self) -> DMatrix<f64> {
        assignment_matrix(&self.col_cluster, self.spec.l)
    }

    /// Margin `1/√min(k, l)` of the planted factorization.
    pub fn planted_margin(&self) -> f64 {
        1.0 / (self.spec.k.min(self.spec.l) as f64).sqrt()
    }

    /// Normalized factorization with `P̄ Q̄ᵀ = U · planted_margin()`, sharing the
    /// smaller of the two cluster dimensions: `(R, C U*ᵀ/√k)` when `k <= l`,
    /// otherwise `(R U*/√l, C)`.
    pub fn planted_factors(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let (r, c) = (self.r(), self.c());
        if self.spec.k <= self.spec.l {
            let q = c * self.u_star.transpose() / (self.spec.k as f64).sqrt();
            (r, q)
        } else {
            let p = r * &self.u_star / (self.spec.l as f64).sqrt();
            (p, c)
        }
    }

    /// PD-Laplacian side information of the two clique graphs.
    pub fn side_info(&self) -> Result<SideInfo> {
        SideInfo::new(pd_laplacian(&self.row_graph)?, pd_laplacian(&self.col_graph)?)
    }
}

fn draw_clusters(rng: &mut impl Rng, size: usize, k: usize) -> Vec<usize> {
    loop {
        let labels: Vec<usize> = (0..size).map(|_| rng.random_range(0..k)).collect();
        let mut used = vec![false; k];
        for &c in &labels {
            used[c] = true;
        }
        if used.iter().all(|&u| u) {
            return labels;
        }
    }
}

/// Disjoint cliques on the classes of `labels`, joined by bridges from a hub
/// (the first vertex of class 0) to the first vertex of every other class.
/// Any two vertices are then within four edges of each other.
pub fn clique_graph(labels: &[usize], k: usize) -> Result<Graph> {
    let n = labels.len();
    let mut members = vec![Vec::new(); k];
    for (v, &c) in labels.iter().enumerate() {
        if c >= k {
            return Err(Error::Spec(format!("label {c} out of range for {k} classes")));
        }
        members[c].push(v);
    }
    if members.iter().any(Vec::is_empty) {
        return Err(Error::Spec("every class needs at least one vertex".into()));
    }
    let mut edges = Vec::new();
    for group in &members {
        for (a, &u) in group.iter().enumerate() {
            for &v in &group[a + 1..] {
                edges.push(Edge { u, v, w: 1.0 });
            }
        }
    }
    let hub = members[0][0];
    for group in &members[1..] {
        edges.push(Edge { u: hub, v: group[0], w: 1.0 });
    }
    Graph::new(n, edges)
}

fn laplacian_term(lbar: &SymMatrix, assign: &DMatrix<f64>) -> Result<f64> {
    let t = (assign.transpose() * lbar.as_matrix() * assign).trace();
    Ok(2.0 * t * squared_radius(lbar)?)
}

/// `2 Tr(Rᵀ M R) R_M + 2 Tr(Cᵀ N C) R_N + 2k + 2l` with `M`, `N` the
/// PD-Laplacians of the row and column graphs.
pub fn quasi_dimension_bound(inst: &PlantedInstance) -> Result<f64> {
    let m = pd_laplacian(&inst.row_graph)?;
    let n = pd_laplacian(&inst.col_graph)?;
    Ok(laplacian_term(&m, &inst.r())?
        + laplacian_term(&n, &inst.c())?
        + 2.0 * (inst.spec.k + inst.spec.l) as f64)
}

pub fn gen_bicluster(spec: &BiclusterSpec) -> Result<PlantedInstance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let row_cluster = draw_clusters(&mut rng, spec.m, spec.k);
    let col_cluster = draw_clusters(&mut rng, spec.n, spec.l);
    let u_star = DMatrix::from_fn(spec.k, spec.l, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    let u = DMatrix::from_fn(spec.m, spec.n, |i, j| u_star[(row_cluster[i], col_cluster[j])]);
    let row_graph = clique_graph(&row_cluster, spec.k)?;
    let col_graph = clique_graph(&col_cluster, spec.l)?;
    let mut inst = PlantedInstance {
        spec: *spec,
        u,
        row_cluster,
        col_cluster,
        u_star,
        row_graph,
        col_graph,
        d_hat_bound: 0.0,
    };
    inst.d_hat_bound = quasi_dimension_bound(&inst)?;
    Ok(inst)
}

/// `T` uniform entries with `y = U_ij`, each label flipped with probability `noise_rate`.
pub fn gen_sequence(inst: &PlantedInstance, t: usize, noise_rate: f64, seed: u64) -> Result<LabeledSequence> {
    if !(0.0..0.5).contains(&noise_rate) {
        return Err(Error::Spec(format!("noise rate must lie in [0, 0.5), got {noise_rate}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, n) = (inst.spec.m, inst.spec.n);
    let triples = (0..t)
        .map(|_| {
            let i = rng.random_range(0..m);
            let j = rng.random_range(0..n);
            let mut y = if inst.u[(i, j)] > 0.0 { 1 } else { -1 };
            if noise_rate > 0.0 && rng.random_bool(noise_rate) {
                y = -y;
            }
            Triple { i, j, y }
        })
        .collect();
    LabeledSequence::new(m, n, triples)
}

/// Class labels for `n` vertices split into `k` near-equal consecutive blocks.
pub fn block_labels(n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|v| v * k / n).collect()
}

/// Uniformly shuffled class labels with every class present.
pub fn random_labels(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut labels = block_labels(n, k);
    labels.shuffle(rng);
    labels
}
