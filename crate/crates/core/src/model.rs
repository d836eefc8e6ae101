//! Receiver algebra: array and multi-coset geometry, steering vectors and the
//! sampling matrices `A`, `B`, `G = A ⊗ B`, the selection matrix `J` and
//! `H = J·G`.
//!
//! Band indices are 0-based everywhere (`l ∈ 0..L`). Column `k·L + l` of `G`
//! (and of `H`) is the steering of source `k` when it occupies band `l`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    /// Number of sensors `M`.
    pub sensors: usize,
    /// Inter-sensor spacing `d` in meters.
    pub spacing: f64,
    /// Propagation speed in meters per second.
    pub propagation_speed: f64,
}

impl ArrayGeometry {
    pub fn new(sensors: usize, spacing: f64, propagation_speed: f64) -> Result<Self> {
        let geom = Self {
            sensors,
            spacing,
            propagation_speed,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensors < 2 {
            return Err(Error::config(format!(
                "array needs at least 2 sensors, got {}",
                self.sensors
            )));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::config("sensor spacing must be positive"));
        }
        if !(self.propagation_speed > 0.0 && self.propagation_speed.is_finite()) {
            return Err(Error::config("propagation speed must be positive"));
        }
        Ok(())
    }
}

/// Multi-coset sampling pattern: `P` cosets out of every block of `L` Nyquist
/// samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiCosetPattern {
    /// Downsampling factor `L`.
    pub decimation: usize,
    /// Strictly increasing coset offsets `c_1 < … < c_P`, each in `0..L`.
    pub offsets: Vec<usize>,
    /// Nyquist rate `f_N` in Hz.
    pub nyquist_rate: f64,
}

impl MultiCosetPattern {
    pub fn new(decimation: usize, offsets: Vec<usize>, nyquist_rate: f64) -> Result<Self> {
        let pattern = Self {
            decimation,
            offsets,
            nyquist_rate,
        };
        pattern.validate()?;
        Ok(pattern)
    }

    pub fn validate(&self) -> Result<()> {
        if self.decimation == 0 {
            return Err(Error::config("decimation factor L must be at least 1"));
        }
        if self.offsets.is_empty() {
            return Err(Error::config("sampling pattern needs at least one branch"));
        }
        if self.offsets.len() > self.decimation {
            return Err(Error::config(format!(
                "{} branches exceed the decimation factor {}",
                self.offsets.len(),
                self.decimation
            )));
        }
        if self.offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("coset offsets must be strictly increasing"));
        }
        if self.offsets.iter().any(|&c| c >= self.decimation) {
            return Err(Error::config("coset offsets must lie in 0..L"));
        }
        if !(self.nyquist_rate > 0.0 && self.nyquist_rate.is_finite()) {
            return Err(Error::config("Nyquist rate must be positive"));
        }
        Ok(())
    }

    /// Branch count `P`.
    pub fn branches(&self) -> usize {
        self.offsets.len()
    }

    /// Sub-Nyquist rate `f_s = f_N / L`, which is also the width of one band.
    pub fn sub_nyquist_rate(&self) -> f64 {
        self.nyquist_rate / self.decimation as f64
    }

    pub fn nyquist_period(&self) -> f64 {
        1.0 / self.nyquist_rate
    }

    /// Band index `⌊f·L/f_N⌋` of a frequency in `[0, f_N)`.
    pub fn band_of(&self, freq: f64) -> usize {
        let band = (freq / self.sub_nyquist_rate()).floor();
        (band.max(0.0) as usize).min(self.decimation - 1)
    }
}

/// The two receiver structures: every branch of every sensor (`G`, `M·P`
/// channels) or the simplified one kept by `J` (`H`, `M+P−1` channels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    Simplified,
    Full,
}

impl Structure {
    pub fn channels(self, geom: &ArrayGeometry, pattern: &MultiCosetPattern) -> usize {
        match self {
            Structure::Simplified => geom.sensors + pattern.branches() - 1,
            Structure::Full => geom.sensors * pattern.branches(),
        }
    }

    pub fn steering(
        self,
        phi: f64,
        band: usize,
        geom: &ArrayGeometry,
        pattern: &MultiCosetPattern,
    ) -> CVector {
        match self {
            Structure::Simplified => joint_steering(phi, band, geom, pattern),
            Structure::Full => full_steering(phi, band, geom, pattern),
        }
    }

    pub fn steering_derivative(
        self,
        phi: f64,
        band: usize,
        geom: &ArrayGeometry,
        pattern: &MultiCosetPattern,
    ) -> CVector {
        let da = spatial_steering_derivative(phi, geom.sensors);
        let bl = pattern_column(pattern, band);
        let full = kron_vec(&da, &bl);
        match self {
            Structure::Simplified => select_rows(&full, geom.sensors, pattern.branches()),
            Structure::Full => full,
        }
    }

    /// Steering matrix with one column per `(phi, band)` pair.
    pub fn steering_matrix(
        self,
        phis: &[f64],
        bands: &[usize],
        geom: &ArrayGeometry,
        pattern: &MultiCosetPattern,
    ) -> Result<CMatrix> {
        if phis.len() != bands.len() {
            return Err(Error::SizeMismatch {
                expected: phis.len(),
                got: bands.len(),
            });
        }
        let rows = self.channels(geom, pattern);
        if phis.len() > rows.saturating_sub(1) {
            return Err(Error::TooManySources {
                sources: phis.len(),
                rows,
            });
        }
        if let Some(&band) = bands.iter().find(|&&b| b >= pattern.decimation) {
            return Err(Error::config(format!(
                "band index {band} out of range 0..{}",
                pattern.decimation
            )));
        }
        let cols: Vec<CVector> = phis
            .iter()
            .zip(bands)
            .map(|(&phi, &band)| self.steering(phi, band, geom, pattern))
            .collect();
        Ok(CMatrix::from_columns(&cols))
    }
}

/// Spatial phase `φ = 2π·d·sin(θ)·f / c`.
pub fn phase_from_doa(theta: f64, freq: f64, geom: &ArrayGeometry) -> f64 {
    2.0 * PI * geom.spacing * theta.sin() * freq / geom.propagation_speed
}

/// Inverse of [`phase_from_doa`]; fails when the spacing aliases at `freq`.
pub fn doa_from_phase(phi: f64, freq: f64, geom: &ArrayGeometry) -> Result<f64> {
    let arg = phi * geom.propagation_speed / (2.0 * PI * geom.spacing * freq);
    if !arg.is_finite() || arg.abs() > 1.0 {
        return Err(Error::Domain(arg));
    }
    Ok(arg.asin())
}

/// `a(φ)`, element `m` (0-based) is `exp(−j·φ·m)`.
pub fn spatial_steering(phi: f64, sensors: usize) -> CVector {
    CVector::from_fn(sensors, |m, _| C64::from_polar(1.0, -phi * m as f64))
}

/// `da/dφ`, element `m` is `−j·m·exp(−j·φ·m)`.
pub fn spatial_steering_derivative(phi: f64, sensors: usize) -> CVector {
    CVector::from_fn(sensors, |m, _| {
        C64::new(0.0, -(m as f64)) * C64::from_polar(1.0, -phi * m as f64)
    })
}

/// `B[i][l] = exp(j·2π·c_i·l/L) / √L`, a `P × L` partial DFT matrix.
pub fn build_b(pattern: &MultiCosetPattern) -> CMatrix {
    let l_count = pattern.decimation;
    let scale = 1.0 / (l_count as f64).sqrt();
    CMatrix::from_fn(pattern.branches(), l_count, |i, l| {
        let c = pattern.offsets[i];
        // reduce c·l mod L first so the angle stays small
        let k = (c * l) % l_count;
        C64::from_polar(scale, 2.0 * PI * k as f64 / l_count as f64)
    })
}

/// Column `l` of `B`.
pub fn pattern_column(pattern: &MultiCosetPattern, band: usize) -> CVector {
    let l_count = pattern.decimation;
    let scale = 1.0 / (l_count as f64).sqrt();
    CVector::from_iterator(
        pattern.branches(),
        pattern.offsets.iter().map(|&c| {
            let k = (c * band) % l_count;
            C64::from_polar(scale, 2.0 * PI * k as f64 / l_count as f64)
        }),
    )
}

/// Flat channel indices (sensor-major, `m·P + p`, 0-based) kept by `J`:
/// branches `0..P` of sensor 0, then branch 0 of sensors `1..M`.
pub fn selected_channels(sensors: usize, branches: usize) -> Vec<usize> {
    (0..branches)
        .chain((1..sensors).map(|m| m * branches))
        .collect()
}

/// The `(M+P−1) × M·P` 0/1 selection matrix `J`.
pub fn build_j(sensors: usize, branches: usize) -> DMatrix<f64> {
    let picks = selected_channels(sensors, branches);
    let mut j = DMatrix::zeros(picks.len(), sensors * branches);
    for (row, &col) in picks.iter().enumerate() {
        j[(row, col)] = 1.0;
    }
    j
}

fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    CVector::from_fn(a.len() * b.len(), |i, _| a[i / b.len()] * b[i % b.len()])
}

fn select_rows(full: &CVector, sensors: usize, branches: usize) -> CVector {
    let picks = selected_channels(sensors, branches);
    CVector::from_iterator(picks.len(), picks.iter().map(|&i| full[i]))
}

/// `g_l(φ) = a(φ) ⊗ B_l`, the full-structure steering.
pub fn full_steering(
    phi: f64,
    band: usize,
    geom: &ArrayGeometry,
    pattern: &MultiCosetPattern,
) -> CVector {
    kron_vec(
        &spatial_steering(phi, geom.sensors),
        &pattern_column(pattern, band),
    )
}

/// `a_l(φ) = J(a(φ) ⊗ B_l)`, the simplified-structure steering.
pub fn joint_steering(
    phi: f64,
    band: usize,
    geom: &ArrayGeometry,
    pattern: &MultiCosetPattern,
) -> CVector {
    select_rows(
        &full_steering(phi, band, geom, pattern),
        geom.sensors,
        pattern.branches(),
    )
}

/// `H_S`: one joint steering column per `(phi, band)` pair.
pub fn build_h_selected(
    phis: &[f64],
    bands: &[usize],
    geom: &ArrayGeometry,
    pattern: &MultiCosetPattern,
) -> Result<CMatrix> {
    Structure::Simplified.steering_matrix(phis, bands, geom, pattern)
}

/// All sampling matrices for a set of source phases.
#[derive(Debug, Clone)]
pub struct SteeringSet {
    pub a: CMatrix,
    pub b: CMatrix,
    pub j: DMatrix<f64>,
    pub g: CMatrix,
    pub h: CMatrix,
}

impl SteeringSet {
    pub fn new(phis: &[f64], geom: &ArrayGeometry, pattern: &MultiCosetPattern) -> Self {
        let cols: Vec<CVector> = phis
            .iter()
            .map(|&phi| spatial_steering(phi, geom.sensors))
            .collect();
        let a = if cols.is_empty() {
            CMatrix::zeros(geom.sensors, 0)
        } else {
            CMatrix::from_columns(&cols)
        };
        let b = build_b(pattern);
        let j = build_j(geom.sensors, pattern.branches());
        let g = a.kronecker(&b);
        let h = j.map(|v| C64::new(v, 0.0)) * &g;
        Self { a, b, j, g, h }
    }
}
