//! Continuous-to-finite support recovery for the single-sensor multi-coset
//! system `Y₁ = B·X̄₁`.
//!
//! Plain SOMP on the power-weighted frame can pick a wrong atom first when a
//! strong source leaks into a neighbouring column, even without noise, so the
//! support is searched by order-recursive matching pursuit over an
//! orthonormal signal-subspace frame: a true atom then scores exactly 1.

use crate::error::{Error, Result};
use crate::estimators::lstsq::ls_solve;
use crate::estimators::subspace::{hermitian_eigen, sample_covariance, RANK_TOLERANCE};
use crate::model::{CMatrix, C64};

/// Relative residual at which support selection stops early.
pub const RESIDUAL_CUTOFF: f64 = 1e-8;

/// Occupied bands, sorted and distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    pub bands: Vec<usize>,
}

impl SupportSet {
    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }
}

/// Frame `V` with `V·Vᴴ = R̂`, from the numerically positive eigenpairs.
pub fn covariance_frame(y: &CMatrix) -> CMatrix {
    let r = sample_covariance(y);
    let (values, vectors) = hermitian_eigen(&r);
    let floor = values.first().copied().unwrap_or(0.0).max(0.0) * 1e-12;
    let kept: Vec<usize> = (0..values.len()).filter(|&i| values[i] > floor).collect();
    let mut v = vectors.select_columns(kept.iter());
    for (c, &i) in kept.iter().enumerate() {
        let s = C64::new(values[i].sqrt(), 0.0);
        v.column_mut(c).scale_mut(s.re);
    }
    v
}

/// Simultaneous OMP over the columns of `dict` for the row-sparse solution of
/// `dict·U = frame`, selecting at most `max_atoms`.
pub fn somp(dict: &CMatrix, frame: &CMatrix, max_atoms: usize) -> Result<Vec<usize>> {
    let total = frame.norm();
    if frame.ncols() == 0 || total == 0.0 {
        return Err(Error::EmptySupport);
    }
    let mut selected: Vec<usize> = Vec::with_capacity(max_atoms);
    let mut residual = frame.clone();
    for iter in 0..max_atoms.min(dict.ncols()) {
        let corr = dict.adjoint() * &residual;
        let (best, score) = (0..dict.ncols())
            .filter(|l| !selected.contains(l))
            .map(|l| (l, corr.row(l).norm() / dict.column(l).norm()))
            .fold(
                (usize::MAX, -1.0),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            );
        if best == usize::MAX {
            break;
        }
        if iter == 0 && score < total * 1e-12 {
            return Err(Error::EmptySupport);
        }
        selected.push(best);
        let atoms = dict.select_columns(selected.iter());
        let coef = ls_solve(&atoms, frame)?;
        residual = frame - atoms * coef;
        if residual.norm() / total < RESIDUAL_CUTOFF {
            break;
        }
    }
    Ok(selected)
}

/// Orthonormal basis of the dominant `max_dim` eigenvectors of `R̂`, capped
/// at its numerical rank.
pub fn signal_frame(y: &CMatrix, max_dim: usize) -> CMatrix {
    let (values, vectors) = hermitian_eigen(&sample_covariance(y));
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    let rank = values
        .iter()
        .take_while(|&&v| top > 0.0 && v > RANK_TOLERANCE * top)
        .count();
    vectors.columns(0, rank.min(max_dim)).into_owned()
}

/// Orthonormal basis of the dominant column space of `x`: at most `max_dim`
/// directions, dropping those below `√RANK_TOLERANCE` of the largest singular
/// value.
fn range_basis(x: &CMatrix, max_dim: usize) -> CMatrix {
    let svd = x.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let top = sv.max();
    let keep: Vec<usize> = order
        .into_iter()
        .take(max_dim)
        .filter(|&i| top > 0.0 && sv[i] > RANK_TOLERANCE.sqrt() * top)
        .collect();
    u.select_columns(keep.iter())
}

/// Order-recursive matching pursuit of `dict` atoms against the subspace
/// spanned by `frame`. Each step projects out the chosen atoms and picks the
/// atom whose remaining direction lies closest to the remaining subspace,
/// which loses one dimension per chosen atom.
pub fn subspace_ormp(dict: &CMatrix, frame: &CMatrix, max_atoms: usize) -> Result<Vec<usize>> {
    let total = frame.norm();
    if frame.ncols() == 0 || total == 0.0 {
        return Err(Error::EmptySupport);
    }
    let rows = dict.nrows();
    let mut selected: Vec<usize> = Vec::with_capacity(max_atoms);
    let mut complement = CMatrix::identity(rows, rows);
    for _ in 0..max_atoms.min(dict.ncols()).min(frame.ncols()) {
        let residual = &complement * frame;
        if residual.norm() / total < RESIDUAL_CUTOFF {
            break;
        }
        let basis = range_basis(&residual, frame.ncols() - selected.len());
        let best = (0..dict.ncols())
            .filter(|l| !selected.contains(l))
            .filter_map(|l| {
                let c = &complement * dict.column(l);
                let norm = c.norm();
                (norm > 1e-12 * dict.column(l).norm())
                    .then(|| (l, (basis.adjoint() * &c).norm() / norm))
            })
            .fold(None, |acc: Option<(usize, f64)>, x| match acc {
                Some(a) if a.1 >= x.1 => Some(a),
                _ => Some(x),
            });
        let Some((best, _)) = best else { break };
        selected.push(best);
        let q = range_basis(&dict.select_columns(selected.iter()), selected.len());
        complement = CMatrix::identity(rows, rows) - &q * q.adjoint();
    }
    Ok(selected)
}

/// Band support of the sensor-0 branch outputs `Y₁` (`P × N`) for at most
/// `max_sources` sources.
pub fn ctf_support(y1: &CMatrix, b: &CMatrix, max_sources: usize) -> Result<SupportSet> {
    let frame = signal_frame(y1, max_sources);
    let mut bands = subspace_ormp(b, &frame, max_sources)?;
    bands.sort_unstable();
    Ok(SupportSet { bands })
}
