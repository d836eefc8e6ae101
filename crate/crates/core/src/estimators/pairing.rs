use crate::error::{Error, Result};
use crate::estimators::ctf::SupportSet;
use crate::model::{CMatrix, C64};

/// A row whose two largest cross-correlation magnitudes differ by less than
/// this factor is flagged as an ambiguous pairing.
pub const AMBIGUITY_RATIO: f64 = 3.0;

/// Band assignment per source slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointSupport {
    /// `bands[i]` is the band of source slot `i`.
    pub bands: Vec<usize>,
    pub decimation: usize,
    /// Per slot: the pairing decision was ambiguous.
    pub ambiguous: Vec<bool>,
}

impl JointSupport {
    /// Column indices `i·L + band_i` into `H`.
    pub fn flat(&self) -> Vec<usize> {
        self.bands
            .iter()
            .enumerate()
            .map(|(i, &b)| i * self.decimation + b)
            .collect()
    }
}

/// `R_ij = (1/N) Σ_n Z[i][n]·conj(X[j][n])`.
pub fn cross_correlation(z: &CMatrix, x: &CMatrix) -> CMatrix {
    z * x.adjoint() / C64::new(z.ncols().max(1) as f64, 0.0)
}

/// Assigns each spatially separated source (rows of `z`) the band of the
/// support row (rows of `x_omega`) it correlates with most.
pub fn pair_supports(
    z: &CMatrix,
    x_omega: &CMatrix,
    omega: &SupportSet,
    decimation: usize,
) -> Result<JointSupport> {
    if x_omega.nrows() != omega.len() {
        return Err(Error::SizeMismatch {
            expected: omega.len(),
            got: x_omega.nrows(),
        });
    }
    if z.ncols() != x_omega.ncols() {
        return Err(Error::SizeMismatch {
            expected: z.ncols(),
            got: x_omega.ncols(),
        });
    }
    if omega.is_empty() {
        return Err(Error::EmptySupport);
    }
    let r = cross_correlation(z, x_omega);
    let mut bands = Vec::with_capacity(z.nrows());
    let mut ambiguous = Vec::with_capacity(z.nrows());
    for i in 0..r.nrows() {
        let mut mags: Vec<(usize, f64)> = (0..r.ncols()).map(|j| (j, r[(i, j)].norm())).collect();
        mags.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        bands.push(omega.bands[mags[0].0]);
        ambiguous.push(mags.len() > 1 && mags[0].1 < AMBIGUITY_RATIO * mags[1].1);
    }
    Ok(JointSupport {
        bands,
        decimation,
        ambiguous,
    })
}
