//! Random test instances: PD matrices, feasible decisions and loss matrices.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::SymMatrix;
use crate::osdp::OsdpProblem;

fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Strictly PD matrix `G Gᵀ / n + δ I` with `δ ∈ [0.1, 1)`.
pub fn random_pd(n: usize, rng: &mut impl Rng) -> SymMatrix {
    let g = gaussian(rng, n, n);
    let delta = rng.random_range(0.1..1.0);
    let mut a = SymMatrix::new(&g * g.transpose() / n as f64).expect("square");
    for i in 0..n {
        a.set_sym(i, i, a.get(i, i) + delta);
    }
    a
}

/// Random PSD matrix of rank `r`.
pub fn random_psd(n: usize, r: usize, rng: &mut impl Rng) -> SymMatrix {
    let g = gaussian(rng, n, r);
    SymMatrix::new(&g * g.transpose()).expect("square")
}

/// Random point of the decision set. About a quarter of the draws lie on the
/// boundary of the diagonal or trace constraint.
pub fn random_feasible(p: &OsdpProblem, rng: &mut impl Rng) -> SymMatrix {
    let n = p.dim();
    let rank = rng.random_range(0..=n);
    if rank == 0 {
        return SymMatrix::zeros(n);
    }
    let b = random_psd(n, rank, rng);
    let max_diag = b.diagonal().into_iter().fold(0.0, f64::max);
    let cap = (p.beta() / max_diag).min(p.tau() / p.gamma_trace(&b));
    let u: f64 = if rng.random_bool(0.25) { 1.0 } else { rng.random() };
    b.scale(cap * u)
}

/// PSD loss supported on `support` random coordinates with `‖vec(L)‖₁ = g`.
pub fn sparse_psd_loss(n: usize, support: usize, g: f64, rng: &mut impl Rng) -> SymMatrix {
    let k = support.clamp(1, n);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let v: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    let mut l = SymMatrix::zeros(n);
    for a in 0..k {
        for b in a..k {
            l.set_sym(idx[a], idx[b], v[a] * v[b]);
        }
    }
    let l1 = l.l1_norm();
    if l1 == 0.0 {
        let mut e = SymMatrix::zeros(n);
        e.set_sym(idx[0], idx[0], g);
        return e;
    }
    l.scale(g / l1)
}

/// Loss in the class of `p`: PSD when `psd` is set, otherwise a random
/// symmetric matrix; scaled so `‖vec(L)‖₁ = u g` with `u ∈ (0, 1]`.
pub fn random_loss(p: &OsdpProblem, psd: bool, rng: &mut impl Rng) -> SymMatrix {
    let n = p.dim();
    let l = if psd {
        random_psd(n, rng.random_range(1..=n), rng)
    } else {
        let g = gaussian(rng, n, n);
        SymMatrix::new(&g + g.transpose()).expect("square")
    };
    let u: f64 = if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.05..1.0) };
    let l1 = l.l1_norm();
    if l1 == 0.0 {
        return l;
    }
    l.scale(u * p.g() / l1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_respect_their_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..6 {
            let gamma = random_pd(n, &mut rng);
            assert!(gamma.min_eigenvalue().unwrap() > 0.0);
            let p = OsdpProblem::new(gamma, 1.0, 2.0, 1.0, 1.5, 1.0).unwrap();
            for _ in 0..20 {
                let w = random_feasible(&p, &mut rng);
                assert!(p.feasibility(&w).unwrap().within(&p, 1e-10));
                let l = random_loss(&p, true, &mut rng);
                p.check_loss(&l).unwrap();
                let l = sparse_psd_loss(n, 2, 1.5, &mut rng);
                assert!((l.l1_norm() - 1.5).abs() < 1e-12);
                p.check_loss(&l).unwrap();
            }
        }
    }
}
