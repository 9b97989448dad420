//! Dykstra's alternating projections onto intersections of simple convex sets.

use nalgebra::{Cholesky, DVector};

use crate::error::Result;
use crate::linalg::{psd_project, SymMatrix};

/// A convex set with a closed-form Frobenius projection.
pub(crate) enum ConvexSet<'a> {
    /// Positive semi-definite cone.
    Psd,
    /// `|X_ii| <= bound` for every `i`.
    #[cfg(test)]
    DiagBox { bound: f64 },
    /// `⟨normal, X⟩ <= bound`.
    HalfSpace { normal: &'a SymMatrix, norm_sq: f64, bound: f64 },
    /// `{|X_ii| <= box_bound} ∩ {⟨normal, X⟩ <= bound}`, projected exactly.
    BoxHalfSpace { normal: &'a SymMatrix, box_bound: f64, bound: f64 },
    /// `|aᵀ X a| <= bound` for every `a` in `vecs`; each slab is its own Dykstra set.
    RankOneSlabs { vecs: &'a [DVector<f64>], norms4: &'a [f64], bound: f64 },
}

enum Increment {
    Full(Option<SymMatrix>),
    #[cfg(test)]
    Diag(Vec<f64>),
    Scalar(f64),
    Scalars(Vec<f64>),
}

impl ConvexSet<'_> {
    fn new_increment(&self) -> Increment {
        match self {
            ConvexSet::Psd | ConvexSet::BoxHalfSpace { .. } => Increment::Full(None),
            #[cfg(test)]
            ConvexSet::DiagBox { .. } => Increment::Diag(Vec::new()),
            ConvexSet::HalfSpace { .. } => Increment::Scalar(0.0),
            ConvexSet::RankOneSlabs { vecs, .. } => Increment::Scalars(vec![0.0; vecs.len()]),
        }
    }

    /// One Dykstra step: `y = P(x + inc)`, `inc ← x + inc − y`, `x ← y`.
    fn step(&self, x: &mut SymMatrix, inc: &mut Increment) -> Result<()> {
        match (self, inc) {
            (ConvexSet::Psd, Increment::Full(p)) => {
                let z = match p.take() {
                    Some(p) => &*x + &p,
                    None => x.clone(),
                };
                let y = if Cholesky::new(z.as_matrix().clone()).is_some() {
                    z.clone()
                } else {
                    psd_project(&z)?
                };
                let diff = &z - &y;
                *p = if diff.max_abs() == 0.0 { None } else { Some(diff) };
                *x = y;
            }
            (ConvexSet::BoxHalfSpace { normal, box_bound, bound }, Increment::Full(p)) => {
                let z = match p.take() {
                    Some(p) => &*x + &p,
                    None => x.clone(),
                };
                let y = project_box_half_space(&z, normal, *box_bound, *bound);
                let diff = &z - &y;
                *p = if diff.max_abs() == 0.0 { None } else { Some(diff) };
                *x = y;
            }
            #[cfg(test)]
            (ConvexSet::DiagBox { bound }, Increment::Diag(d)) => {
                d.resize(x.dim(), 0.0);
                for (i, di) in d.iter_mut().enumerate() {
                    let z = x.get(i, i) + *di;
                    let y = z.clamp(-bound, *bound);
                    *di = z - y;
                    x.set_sym(i, i, y);
                }
            }
            (ConvexSet::HalfSpace { normal, norm_sq, bound }, Increment::Scalar(c)) => {
                let v = x.as_matrix().dot(normal.as_matrix()) + *c * norm_sq;
                let t = ((v - bound) / norm_sq).max(0.0);
                let shift = *c - t;
                if shift != 0.0 {
                    *x = &*x + &normal.scale(shift);
                }
                *c = t;
            }
            (ConvexSet::RankOneSlabs { vecs, norms4, bound }, Increment::Scalars(cs)) => {
                for ((a, &n4), c) in vecs.iter().zip(norms4.iter()).zip(cs.iter_mut()) {
                    let v = quad_form(x, a) + *c * n4;
                    let t = if v > *bound {
                        (v - bound) / n4
                    } else if v < -bound {
                        (v + bound) / n4
                    } else {
                        0.0
                    };
                    let shift = *c - t;
                    if shift != 0.0 {
                        add_rank_one(x, a, shift);
                    }
                    *c = t;
                }
            }
            _ => unreachable!("increment kind always matches its set"),
        }
        Ok(())
    }
}

/// `clip_diag(z − λ n)` with the smallest `λ >= 0` meeting `⟨n, ·⟩ <= bound`.
fn project_box_half_space(z: &SymMatrix, n: &SymMatrix, box_bound: f64, bound: f64) -> SymMatrix {
    let dim = z.dim();
    let off_dot = z.as_matrix().dot(n.as_matrix()) - (0..dim).map(|i| z.get(i, i) * n.get(i, i)).sum::<f64>();
    let off_norm_sq = n.frobenius_norm().powi(2) - (0..dim).map(|i| n.get(i, i).powi(2)).sum::<f64>();
    let value = |lambda: f64| {
        let diag: f64 = (0..dim)
            .map(|i| n.get(i, i) * (z.get(i, i) - lambda * n.get(i, i)).clamp(-box_bound, box_bound))
            .sum();
        diag + off_dot - lambda * off_norm_sq
    };
    let apply = |lambda: f64| {
        let mut y = if lambda > 0.0 { z - &n.scale(lambda) } else { z.clone() };
        for i in 0..dim {
            y.set_sym(i, i, y.get(i, i).clamp(-box_bound, box_bound));
        }
        y
    };
    if value(0.0) <= bound {
        return apply(0.0);
    }
    let mut hi = 1.0 / n.frobenius_norm().max(f64::MIN_POSITIVE);
    while value(hi) > bound {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if value(mid) > bound {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    apply(hi)
}

pub(crate) fn quad_form(x: &SymMatrix, a: &DVector<f64>) -> f64 {
    a.dot(&(x.as_matrix() * a))
}

fn add_rank_one(x: &mut SymMatrix, a: &DVector<f64>, c: f64) {
    let n = a.len();
    for i in 0..n {
        for j in i..n {
            let v = x.get(i, j) + c * a[i] * a[j];
            x.set_sym(i, j, v);
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct DykstraOutcome {
    pub cycles: usize,
    pub last_change: f64,
    pub converged: bool,
}

/// Runs Dykstra cycles over `sets` (in order) until the change over one full
/// cycle is at most `tol · max(1, ‖input‖_F)`.
pub(crate) fn dykstra(
    input: &SymMatrix,
    sets: &[ConvexSet<'_>],
    max_cycles: usize,
    tol: f64,
) -> Result<(SymMatrix, DykstraOutcome)> {
    let scale = input.frobenius_norm().max(1.0);
    let mut incs: Vec<Increment> = sets.iter().map(|s| s.new_increment()).collect();
    let mut x = input.clone();
    let mut last_change = f64::INFINITY;
    for cycle in 1..=max_cycles.max(1) {
        let prev = x.clone();
        for (set, inc) in sets.iter().zip(incs.iter_mut()) {
            set.step(&mut x, inc)?;
        }
        last_change = (&x - &prev).frobenius_norm();
        if last_change <= tol * scale {
            return Ok((x, DykstraOutcome { cycles: cycle, last_change, converged: true }));
        }
    }
    Ok((x, DykstraOutcome { cycles: max_cycles.max(1), last_change, converged: false }))
}
