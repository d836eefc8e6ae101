use crate::error::{Error, Result};
use crate::model::CMatrix;

/// Condition number above which a least-squares system is treated as singular.
pub const MAX_CONDITION: f64 = 1e10;

/// `X̂ = A†·Obs`, the Frobenius-norm least-squares solution of `A·X = Obs`.
pub fn ls_solve(a: &CMatrix, obs: &CMatrix) -> Result<CMatrix> {
    let (rows, k) = a.shape();
    if obs.nrows() != rows {
        return Err(Error::SizeMismatch {
            expected: rows,
            got: obs.nrows(),
        });
    }
    if k > rows {
        return Err(Error::TooManySources { sources: k, rows });
    }
    if k == 0 {
        return Ok(CMatrix::zeros(0, obs.ncols()));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::RankDeficient(cond));
    }
    svd.solve(obs, 0.0).map_err(|_| Error::RankDeficient(cond))
}
