//! Cramér–Rao bounds on spatial phase (closed form, conditional model) and a
//! finite-difference Fisher-information oracle, for either receiver structure.
//!
//! Conventions: `sigma2` is the per-Nyquist-sample noise variance, `R_S` the
//! covariance of the Nyquist-rate source envelopes (`diag(|a_k|²)` for
//! uncorrelated pure tones) and `observation_time = N·L·T_N`. In snapshot
//! terms the receiver sees `w[n] = H_S·s̄[n] + noise` with `s̄ = √L·s`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimators::lstsq::MAX_CONDITION;
use crate::estimators::subspace::hermitian_eigen;
use crate::model::{ArrayGeometry, CMatrix, CVector, MultiCosetPattern, Structure, C64};

#[derive(Debug, Clone)]
pub struct CrbInput {
    pub phis: Vec<f64>,
    pub bands: Vec<usize>,
    /// `K × K` Hermitian PSD source covariance `R_S`.
    pub signal_covariance: CMatrix,
    pub sigma2: f64,
    /// Seconds.
    pub observation_time: f64,
    pub geometry: ArrayGeometry,
    pub pattern: MultiCosetPattern,
    pub structure: Structure,
}

impl CrbInput {
    fn validate(&self) -> Result<()> {
        let k = self.phis.len();
        if self.bands.len() != k {
            return Err(Error::SizeMismatch {
                expected: k,
                got: self.bands.len(),
            });
        }
        if self.signal_covariance.shape() != (k, k) {
            return Err(Error::SizeMismatch {
                expected: k,
                got: self.signal_covariance.nrows(),
            });
        }
        if !(self.sigma2 > 0.0) || !(self.observation_time > 0.0) {
            return Err(Error::Config(
                "CRB needs positive noise variance and observation time".into(),
            ));
        }
        Ok(())
    }

    /// Snapshots `N` covered by the observation time.
    pub fn snapshots(&self) -> f64 {
        self.observation_time * self.pattern.sub_nyquist_rate()
    }

    fn steering(&self, phis: &[f64]) -> Result<CMatrix> {
        self.structure
            .steering_matrix(phis, &self.bands, &self.geometry, &self.pattern)
    }
}

#[derive(Debug, Clone)]
pub struct CrbResult {
    /// `K × K` bound on the phase error covariance (rad²).
    pub matrix: DMatrix<f64>,
    /// `sqrt` of the diagonal.
    pub per_source_std: Vec<f64>,
    /// Phase Fisher information the bound inverts.
    pub fim: DMatrix<f64>,
}

fn check_rank(h: &CMatrix) -> Result<()> {
    let sv = h.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::RankDeficient(cond));
    }
    Ok(())
}

/// `P = I − H·H†`, the projector onto the orthogonal complement of `H`'s columns.
pub fn orthogonal_projector(h: &CMatrix) -> Result<CMatrix> {
    check_rank(h)?;
    let gram = h.adjoint() * h;
    let inv = gram.try_inverse().ok_or(Error::Singular)?;
    Ok(CMatrix::identity(h.nrows(), h.nrows()) - h * inv * h.adjoint())
}

/// `E = [dH_{S_1}/dφ_1, …, dH_{S_K}/dφ_K]`.
pub fn steering_derivatives(input: &CrbInput) -> CMatrix {
    let cols: Vec<CVector> = input
        .phis
        .iter()
        .zip(&input.bands)
        .map(|(&phi, &band)| {
            input
                .structure
                .steering_derivative(phi, band, &input.geometry, &input.pattern)
        })
        .collect();
    CMatrix::from_columns(&cols)
}

fn bound_from(prefactor: f64, input: &CrbInput, covariance: &CMatrix) -> Result<CrbResult> {
    input.validate()?;
    let k = input.phis.len();
    if k == 0 {
        return Err(Error::Singular);
    }
    let h = input.steering(&input.phis)?;
    let proj = orthogonal_projector(&h)?;
    let e = steering_derivatives(input);
    let d = e.adjoint() * proj * &e;
    let info = DMatrix::from_fn(k, k, |i, j| (d[(i, j)] * covariance[(j, i)]).re);
    let info = (&info + info.transpose()) * 0.5;
    let inv = info.clone().cholesky().ok_or(Error::Singular)?.inverse();
    let matrix = inv * prefactor;
    let matrix = (&matrix + matrix.transpose()) * 0.5;
    let per_source_std = (0..k).map(|i| matrix[(i, i)].sqrt()).collect();
    Ok(CrbResult {
        matrix,
        per_source_std,
        fim: info / prefactor,
    })
}

/// `σ²/(2T)·(Re((EᴴP_H E) ⊙ R_Sᵀ))⁻¹`, with `T` in Nyquist periods.
pub fn crb_phase(input: &CrbInput) -> Result<CrbResult> {
    let t = input.observation_time * input.pattern.nyquist_rate;
    bound_from(input.sigma2 / (2.0 * t), input, &input.signal_covariance)
}

/// Same bound written with the band-domain covariance `R_S̄ = L·R_S` in
/// `input.signal_covariance`: `σ²/(2T/L)·(Re((EᴴP_H E) ⊙ R_S̄ᵀ))⁻¹`.
pub fn crb_phase_band_domain(input: &CrbInput) -> Result<CrbResult> {
    let l = input.pattern.decimation as f64;
    let t = input.observation_time * input.pattern.nyquist_rate;
    bound_from(
        input.sigma2 / (2.0 * t / l),
        input,
        &input.signal_covariance,
    )
}

const FD_STEP: f64 = 1e-5;

/// Solves a small real symmetric positive-definite system, or `Singular`.
fn spd_inverse(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(m.cholesky().ok_or(Error::Singular)?.inverse())
}

/// Real Jacobian block `[Re; Im]` stacking of complex derivative columns.
fn real_gram(a: &CMatrix, b: &CMatrix) -> DMatrix<f64> {
    (a.adjoint() * b).map(|z| z.re)
}

/// Phase Fisher information under the deterministic-signal model with known
/// white noise, by central finite differences of the snapshot mean and a
/// Schur complement over the per-snapshot signal nuisance parameters.
///
/// The conditional bound depends on the signals only through their sample
/// covariance, so `K` synthetic snapshots with covariance `L·R_S` are used and
/// the information rescaled to `N` snapshots.
pub fn fim_numerical(input: &CrbInput) -> Result<DMatrix<f64>> {
    input.validate()?;
    let k = input.phis.len();
    if k == 0 {
        return Err(Error::Singular);
    }
    check_rank(&input.steering(&input.phis)?)?;

    let l = input.pattern.decimation as f64;
    let (values, vectors) = hermitian_eigen(&input.signal_covariance.map(|z| z * l));
    let synthetic: Vec<CVector> = (0..k)
        .map(|n| vectors.column(n) * C64::new((values[n].max(0.0) * k as f64).sqrt(), 0.0))
        .collect();

    let mean = |phis: &[f64], s: &CVector| -> Result<CVector> { Ok(input.steering(phis)? * s) };
    let scale = 2.0 / input.sigma2;
    let mut info = DMatrix::<f64>::zeros(k, k);
    for s in &synthetic {
        let rows = input.structure.channels(&input.geometry, &input.pattern);
        let mut d_phi = CMatrix::zeros(rows, k);
        for j in 0..k {
            let mut plus = input.phis.clone();
            let mut minus = input.phis.clone();
            plus[j] += FD_STEP;
            minus[j] -= FD_STEP;
            let col = (mean(&plus, s)? - mean(&minus, s)?) / C64::new(2.0 * FD_STEP, 0.0);
            d_phi.set_column(j, &col);
        }
        let mut d_sig = CMatrix::zeros(rows, 2 * k);
        for j in 0..2 * k {
            let unit = if j < k {
                C64::new(FD_STEP, 0.0)
            } else {
                C64::new(0.0, FD_STEP)
            };
            let mut plus = s.clone();
            let mut minus = s.clone();
            plus[j % k] += unit;
            minus[j % k] -= unit;
            let col = (mean(&input.phis, &plus)? - mean(&input.phis, &minus)?)
                / C64::new(2.0 * FD_STEP, 0.0);
            d_sig.set_column(j, &col);
        }
        let j_pp = real_gram(&d_phi, &d_phi) * scale;
        let j_ps = real_gram(&d_phi, &d_sig) * scale;
        let j_ss = real_gram(&d_sig, &d_sig) * scale;
        let j_ss = (&j_ss + j_ss.transpose()) * 0.5;
        let inv = spd_inverse(j_ss)?;
        info += j_pp - &j_ps * inv * j_ps.transpose();
    }
    let info = info * (input.snapshots() / k as f64);
    Ok((&info + info.transpose()) * 0.5)
}

/// Deterministic multi-tone model for the numerical frequency bound.
#[derive(Debug, Clone)]
pub struct ToneCrbInput {
    pub phis: Vec<f64>,
    pub bands: Vec<usize>,
    pub amplitudes: Vec<C64>,
    /// In-band frequencies in Hz.
    pub residual_frequencies: Vec<f64>,
    pub sigma2: f64,
    pub snapshots: usize,
    pub geometry: ArrayGeometry,
    pub pattern: MultiCosetPattern,
    pub structure: Structure,
}

#[derive(Debug, Clone)]
pub struct ToneCrb {
    pub phase_std: Vec<f64>,
    /// Hz.
    pub frequency_std: Vec<f64>,
    /// `4K × 4K` information over `(φ, f̄, Re a, Im a)` per source.
    pub fim: DMatrix<f64>,
}

/// Numerical frequency CRB: Fisher information of `w[n] = Σ_k √L·a_k·
/// h(φ_k, l_k)·exp(j2π f̄_k n / f_s) + noise` from central finite differences,
/// jointly over phase, residual frequency and complex amplitude.
pub fn tone_crb_numerical(input: &ToneCrbInput) -> Result<ToneCrb> {
    let k = input.phis.len();
    if input.bands.len() != k
        || input.amplitudes.len() != k
        || input.residual_frequencies.len() != k
    {
        return Err(Error::SizeMismatch {
            expected: k,
            got: input.bands.len(),
        });
    }
    if k == 0 || !(input.sigma2 > 0.0) || input.snapshots == 0 {
        return Err(Error::Singular);
    }
    let rate = input.pattern.sub_nyquist_rate();
    let n_count = input.snapshots;
    let root_l = (input.pattern.decimation as f64).sqrt();
    let steer = |phi: f64, band: usize| {
        input
            .structure
            .steering(phi, band, &input.geometry, &input.pattern)
    };
    let freq_step = FD_STEP * rate / (2.0 * std::f64::consts::PI * n_count as f64);

    // contribution of source k at snapshot n for perturbed parameters
    let term = |phi: f64, band: usize, f: f64, a: C64, n: usize| -> CVector {
        let phase = 2.0 * std::f64::consts::PI * f / rate * n as f64;
        steer(phi, band) * (a * C64::from_polar(root_l, phase))
    };

    let params = 4 * k;
    let mut info = DMatrix::<f64>::zeros(params, params);
    let rows = input.structure.channels(&input.geometry, &input.pattern);
    let mut jac = CMatrix::zeros(rows, params);
    // steering and its phase perturbations are constant in n
    let h0: Vec<CVector> = (0..k)
        .map(|j| steer(input.phis[j], input.bands[j]))
        .collect();
    let dh: Vec<CVector> = (0..k)
        .map(|j| {
            (steer(input.phis[j] + FD_STEP, input.bands[j])
                - steer(input.phis[j] - FD_STEP, input.bands[j]))
                / C64::new(2.0 * FD_STEP, 0.0)
        })
        .collect();
    for n in 0..n_count {
        for j in 0..k {
            let (phi, band, f, a) = (
                input.phis[j],
                input.bands[j],
                input.residual_frequencies[j],
                input.amplitudes[j],
            );
            let carrier =
                |f: f64| C64::from_polar(root_l, 2.0 * std::f64::consts::PI * f / rate * n as f64);
            jac.set_column(4 * j, &(&dh[j] * (a * carrier(f))));
            let df = (term(phi, band, f + freq_step, a, n) - term(phi, band, f - freq_step, a, n))
                / C64::new(2.0 * freq_step, 0.0);
            jac.set_column(4 * j + 1, &df);
            jac.set_column(4 * j + 2, &(&h0[j] * carrier(f)));
            jac.set_column(4 * j + 3, &(&h0[j] * (C64::new(0.0, 1.0) * carrier(f))));
        }
        info += real_gram(&jac, &jac);
    }
    let info = info * (2.0 / input.sigma2);
    let info = (&info + info.transpose()) * 0.5;
    let inv = spd_inverse(info.clone())?;
    Ok(ToneCrb {
        phase_std: (0..k).map(|j| inv[(4 * j, 4 * j)].sqrt()).collect(),
        frequency_std: (0..k).map(|j| inv[(4 * j + 1, 4 * j + 1)].sqrt()).collect(),
        fim: info,
    })
}
