use crate::error::{Error, Result};
use crate::model::{CMatrix, C64};

/// Eigenvalues below this fraction of the largest count as exact zeros.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// `R̂ = X·Xᴴ / N`, symmetrized.
pub fn sample_covariance(x: &CMatrix) -> CMatrix {
    let n = x.ncols().max(1) as f64;
    let r = x * x.adjoint() / C64::new(n, 0.0);
    (&r + r.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigen-split of a Hermitian covariance into signal and noise subspaces.
#[derive(Debug, Clone)]
pub struct SubspaceDecomposition {
    pub covariance: CMatrix,
    /// Real eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// All eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: CMatrix,
    pub signal_dim: usize,
    /// Set when `λ_K < 2·λ_{K+1}`; the subspace split is unreliable.
    pub weak_separation: bool,
}

impl SubspaceDecomposition {
    pub fn signal_subspace(&self) -> CMatrix {
        self.eigenvectors.columns(0, self.signal_dim).into_owned()
    }

    pub fn noise_subspace(&self) -> CMatrix {
        let n = self.eigenvectors.ncols();
        self.eigenvectors
            .columns(self.signal_dim, n - self.signal_dim)
            .into_owned()
    }

    /// Number of eigenvalues above `RANK_TOLERANCE·λ₁`.
    pub fn numerical_rank(&self) -> usize {
        let top = self.eigenvalues.first().copied().unwrap_or(0.0);
        self.eigenvalues
            .iter()
            .take_while(|&&v| v > RANK_TOLERANCE * top)
            .count()
    }

    /// Noise subspace for the spectrum search. When the covariance has fewer
    /// than `K` nonzero eigenvalues (coherent or coincident sources) the extra
    /// "signal" eigenvectors are numerical noise; they go to the noise side so
    /// they cannot manufacture nulls.
    pub fn search_subspace(&self) -> CMatrix {
        let from = self.signal_dim.min(self.numerical_rank());
        let n = self.eigenvectors.ncols();
        self.eigenvectors.columns(from, n - from).into_owned()
    }
}

/// Sorted eigendecomposition of a Hermitian matrix.
pub(crate) fn hermitian_eigen(r: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = r.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = eig.eigenvectors.select_columns(order.iter());
    (values, vectors)
}

pub fn decompose(covariance: &CMatrix, signal_dim: usize) -> Result<SubspaceDecomposition> {
    let rows = covariance.nrows();
    if signal_dim >= rows {
        return Err(Error::TooManySources {
            sources: signal_dim,
            rows,
        });
    }
    let (eigenvalues, eigenvectors) = hermitian_eigen(covariance);
    let weak_separation = if signal_dim == 0 {
        false
    } else {
        let floor = 1e-12 * eigenvalues[0].abs();
        eigenvalues[signal_dim - 1] < 2.0 * eigenvalues[signal_dim].max(floor)
    };
    Ok(SubspaceDecomposition {
        covariance: covariance.clone(),
        eigenvalues,
        eigenvectors,
        signal_dim,
        weak_separation,
    })
}
