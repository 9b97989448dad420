//! Dense symmetric-matrix primitives and graph Laplacians.

mod graph;
pub mod io;
mod sym;

pub use graph::{effective_resistance, laplacian, pd_laplacian, Edge, Graph, ResistanceMetric};
pub use sym::{
    eigh, frobenius_dot, inv_pd, logdet, pinv, psd_project, sqrt_psd, squared_radius, Eigh, SymMatrix,
    PINV_RANK_TOL, PSD_CLIP_TOL,
};
pub(crate) use sym::{inv_and_logdet, max_diagonal};
