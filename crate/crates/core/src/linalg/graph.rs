//! Weighted undirected graphs and their Laplacians.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::sym::{pinv, squared_radius, SymMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// Undirected graph stored as an edge list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    n_vertices: usize,
    edges: Vec<Edge>,
}

impl Graph {
    pub fn new(n_vertices: usize, edges: Vec<Edge>) -> Result<Self> {
        if n_vertices == 0 {
            return Err(Error::InvalidGraph("graph needs at least one vertex".into()));
        }
        for e in &edges {
            if e.u >= n_vertices || e.v >= n_vertices {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) out of range for {} vertices",
                    e.u, e.v, n_vertices
                )));
            }
            if e.u == e.v {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {}", e.u)));
            }
            if !(e.w > 0.0 && e.w.is_finite()) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) has non-positive weight {}",
                    e.u, e.v, e.w
                )));
            }
        }
        Ok(Graph { n_vertices, edges })
    }

    /// Unit-weight graph from vertex pairs.
    pub fn unweighted(n_vertices: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        Self::new(n_vertices, pairs.iter().map(|&(u, v)| Edge { u, v, w: 1.0 }).collect())
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    fn neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices];
        for e in &self.edges {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let adj = self.neighbours();
        let mut seen = vec![false; self.n_vertices];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    queue.push_back(y);
                }
            }
        }
        count == self.n_vertices
    }

    pub fn require_connected(&self) -> Result<()> {
        if self.is_connected() {
            Ok(())
        } else {
            Err(Error::NotConnected)
        }
    }
}

/// `L = D − A`.
pub fn laplacian(g: &Graph) -> SymMatrix {
    let n = g.n_vertices();
    let mut l = nalgebra::DMatrix::zeros(n, n);
    for e in g.edges() {
        l[(e.u, e.u)] += e.w;
        l[(e.v, e.v)] += e.w;
        l[(e.u, e.v)] -= e.w;
        l[(e.v, e.u)] -= e.w;
    }
    SymMatrix::new(l).expect("square by construction")
}

/// PD-Laplacian `L̄ = L + (R_L / m²) · 𝟙` of a connected graph.
pub fn pd_laplacian(g: &Graph) -> Result<SymMatrix> {
    g.require_connected()?;
    let m = g.n_vertices();
    if m < 2 {
        return Err(Error::InvalidGraph("PD-Laplacian needs at least two vertices".into()));
    }
    let l = laplacian(g);
    let r = squared_radius(&l)?;
    Ok(&l + &SymMatrix::ones(m).scale(r / (m * m) as f64))
}

/// Effective resistances of a connected graph, computed from one pseudo-inverse.
#[derive(Clone, Debug)]
pub struct ResistanceMetric {
    lplus: SymMatrix,
}

impl ResistanceMetric {
    pub fn new(g: &Graph) -> Result<Self> {
        g.require_connected()?;
        Ok(ResistanceMetric { lplus: pinv(&laplacian(g))? })
    }

    /// `(e_i − e_j)ᵀ L⁺ (e_i − e_j)`; zero when `i == j`.
    pub fn between(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let p = &self.lplus;
        p.get(i, i) + p.get(j, j) - 2.0 * p.get(i, j)
    }

    pub fn max_pair(&self) -> f64 {
        let n = self.lplus.dim();
        let mut best = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.max(self.between(i, j));
            }
        }
        best
    }

    pub fn laplacian_pinv(&self) -> &SymMatrix {
        &self.lplus
    }
}

pub fn effective_resistance(g: &Graph, i: usize, j: usize) -> Result<f64> {
    let n = g.n_vertices();
    if i >= n || j >= n {
        return Err(Error::InvalidParameter(format!("vertex out of range for {n} vertices")));
    }
    if i == j {
        return Ok(0.0);
    }
    Ok(ResistanceMetric::new(g)?.between(i, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn single_edge() -> Graph {
        Graph::unweighted(2, &[(0, 1)]).unwrap()
    }

    fn triangle() -> Graph {
        Graph::unweighted(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    /// Independent pseudo-inverse for connected Laplacians:
    /// `L⁺ = (L + J/n)⁻¹ − J/n`, with the inverse taken by LU.
    fn oracle_pinv(l: &SymMatrix) -> DMatrix<f64> {
        let n = l.dim();
        let j = DMatrix::from_element(n, n, 1.0 / n as f64);
        (l.as_matrix() + &j).lu().try_inverse().unwrap() - j
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Graph::unweighted(2, &[(0, 0)]).is_err());
        assert!(Graph::unweighted(2, &[(0, 2)]).is_err());
        assert!(Graph::new(2, vec![Edge { u: 0, v: 1, w: 0.0 }]).is_err());
        assert!(Graph::new(0, vec![]).is_err());
    }

    #[test]
    fn laplacian_examples() {
        let l = laplacian(&single_edge());
        assert_eq!(l, SymMatrix::from_rows(&[&[1.0, -1.0], &[-1.0, 1.0]]).unwrap());

        let l = laplacian(&triangle());
        let expected = SymMatrix::from_fn(3, |i, j| if i == j { 2.0 } else { -1.0 });
        assert_eq!(l, expected);

        let l = laplacian(&Graph::new(2, vec![]).unwrap());
        assert_eq!(l, SymMatrix::zeros(2));
    }

    #[test]
    fn weighted_laplacian_rows_sum_to_zero() {
        let g = Graph::new(
            4,
            vec![
                Edge { u: 0, v: 1, w: 0.5 },
                Edge { u: 1, v: 2, w: 2.0 },
                Edge { u: 2, v: 3, w: 1.25 },
                Edge { u: 0, v: 3, w: 3.0 },
            ],
        )
        .unwrap();
        let l = laplacian(&g);
        for i in 0..4 {
            let s: f64 = (0..4).map(|j| l.get(i, j)).sum();
            assert_eq!(s, 0.0);
        }
    }

    #[test]
    fn pd_laplacian_single_edge() {
        let lbar = pd_laplacian(&single_edge()).unwrap();
        let oracle = oracle_pinv(&laplacian(&single_edge()));
        let r = oracle[(0, 0)].max(oracle[(1, 1)]);
        assert_relative_eq!(r, 0.25, epsilon = 1e-14);
        let expected = SymMatrix::from_rows(&[&[17.0 / 16.0, -15.0 / 16.0], &[-15.0 / 16.0, 17.0 / 16.0]]).unwrap();
        assert!(lbar.max_abs_diff(&expected) < 1e-14);
        assert!(lbar.min_eigenvalue().unwrap() > 0.0);
    }

    #[test]
    fn pd_laplacian_triangle() {
        let g = triangle();
        let l = laplacian(&g);
        let oracle = oracle_pinv(&l);
        let r = (0..3).map(|i| oracle[(i, i)]).fold(f64::MIN, f64::max);
        let expected = &l + &SymMatrix::ones(3).scale(r / 9.0);
        let lbar = pd_laplacian(&g).unwrap();
        assert!(lbar.max_abs_diff(&expected) < 1e-14);
        assert!(lbar.min_eigenvalue().unwrap() > 0.0);
    }

    #[test]
    fn pd_laplacian_requires_connectivity() {
        let g = Graph::unweighted(3, &[(0, 1)]).unwrap();
        assert!(matches!(pd_laplacian(&g), Err(Error::NotConnected)));
    }

    #[test]
    fn effective_resistance_examples() {
        assert_relative_eq!(effective_resistance(&single_edge(), 0, 1).unwrap(), 1.0, epsilon = 1e-12);
        let k3 = triangle();
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            let o = oracle_pinv(&laplacian(&k3));
            let want = o[(i, i)] + o[(j, j)] - 2.0 * o[(i, j)];
            assert_relative_eq!(want, 2.0 / 3.0, epsilon = 1e-12);
            assert_relative_eq!(effective_resistance(&k3, i, j).unwrap(), want, epsilon = 1e-12);
        }
        let path = Graph::unweighted(3, &[(0, 1), (1, 2)]).unwrap();
        assert_relative_eq!(effective_resistance(&path, 0, 2).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(effective_resistance(&path, 1, 1).unwrap(), 0.0);
        let split = Graph::unweighted(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(matches!(effective_resistance(&split, 0, 2), Err(Error::NotConnected)));
    }
}
