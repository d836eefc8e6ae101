//! MUSIC null spectra and peak search.
//!
//! For every steering family used here, `a(φ)ᴴu` is a polynomial in
//! `z = exp(jφ)` of degree `M−1` whose coefficients depend only on the noise
//! eigenvector `u` and the band. Coefficients are computed once per
//! decomposition, so a grid point costs `O(M)` per noise vector and band.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::model::{build_b, ArrayGeometry, CMatrix, MultiCosetPattern, Structure, C64};

/// Peaks whose normalized null-spectrum value `‖Uₙᴴa‖²/‖a‖²` exceeds this are
/// not counted as sources.
pub const PEAK_SIGNIFICANCE: f64 = 0.25;

/// Non-maximum suppression radius, in grid cells, for the joint search.
pub const SUPPRESSION_RADIUS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Refinement {
    /// Grid point only.
    None,
    /// Vertex of a parabola through `log p` at the peak and its neighbours.
    Parabolic,
    /// Parabolic vertex, then golden-section minimization of the null
    /// spectrum within one grid step.
    #[default]
    Polished,
}

/// Uniform phase grid over `(−π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub points: usize,
    #[serde(default)]
    pub refine: Refinement,
}

impl Default for PhaseGrid {
    fn default() -> Self {
        Self::with_step(1e-3)
    }
}

impl PhaseGrid {
    pub fn with_step(step: f64) -> Self {
        Self {
            points: (2.0 * PI / step).ceil() as usize,
            refine: Refinement::default(),
        }
    }

    pub fn step(&self) -> f64 {
        2.0 * PI / self.points as f64
    }

    pub fn phase(&self, i: usize) -> f64 {
        -PI + (i + 1) as f64 * self.step()
    }
}

/// `d(φ, l) = ‖Uₙᴴ·a_l(φ)‖²` in polynomial form.
#[derive(Debug, Clone)]
pub struct NullSpectrum {
    /// `coefs[band][col][m]`
    coefs: Vec<Vec<Vec<C64>>>,
    /// `‖a_l(φ)‖²`, constant in `φ` and `l`.
    steering_norm: f64,
}

impl NullSpectrum {
    /// Plain ULA steering `a(φ)`; a single pseudo-band.
    pub fn spatial(noise: &CMatrix) -> Self {
        let coefs = vec![(0..noise.ncols())
            .map(|c| noise.column(c).iter().copied().collect())
            .collect()];
        Self {
            coefs,
            steering_norm: noise.nrows() as f64,
        }
    }

    /// Joint `(φ, band)` steering of the given receiver structure.
    pub fn joint(
        structure: Structure,
        noise: &CMatrix,
        geom: &ArrayGeometry,
        pattern: &MultiCosetPattern,
    ) -> Self {
        let m_count = geom.sensors;
        let p_count = pattern.branches();
        let l_count = pattern.decimation;
        let b = build_b(pattern);
        let poly_for = |l: usize, c: usize| -> Vec<C64> {
            let u = noise.column(c);
            match structure {
                Structure::Simplified => {
                    let mut poly = vec![C64::new(0.0, 0.0); m_count];
                    poly[0] = (0..p_count).map(|p| b[(p, l)].conj() * u[p]).sum();
                    for (m, coef) in poly.iter_mut().enumerate().skip(1) {
                        *coef = b[(0, l)].conj() * u[p_count + m - 1];
                    }
                    poly
                }
                Structure::Full => (0..m_count)
                    .map(|m| {
                        (0..p_count)
                            .map(|p| b[(p, l)].conj() * u[m * p_count + p])
                            .sum()
                    })
                    .collect(),
            }
        };
        let coefs = (0..l_count)
            .map(|l| (0..noise.ncols()).map(|c| poly_for(l, c)).collect())
            .collect();
        Self {
            coefs,
            steering_norm: structure.channels(geom, pattern) as f64 / l_count as f64,
        }
    }

    pub fn bands(&self) -> usize {
        self.coefs.len()
    }

    pub fn null_value(&self, phi: f64, band: usize) -> f64 {
        let z = C64::from_polar(1.0, phi);
        self.coefs[band]
            .iter()
            .map(|poly| {
                poly.iter()
                    .rev()
                    .fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
                    .norm_sqr()
            })
            .sum()
    }

    /// Null spectrum divided by `‖a‖²`, in `[0, 1]`.
    pub fn normalized(&self, phi: f64, band: usize) -> f64 {
        self.null_value(phi, band) / self.steering_norm
    }

    /// Pseudo-spectrum `p(φ, l) = 1 / d(φ, l)`.
    pub fn pseudo(&self, phi: f64, band: usize) -> f64 {
        1.0 / self.null_value(phi, band).max(f64::MIN_POSITIVE)
    }

    /// Null spectrum of one band over the whole grid.
    pub fn evaluate(&self, grid: &PhaseGrid, band: usize) -> Vec<f64> {
        let step = C64::from_polar(1.0, grid.step());
        let mut z = C64::from_polar(1.0, grid.phase(0));
        let mut out = Vec::with_capacity(grid.points);
        for i in 0..grid.points {
            // re-anchor periodically to stop rotation drift
            if i % 256 == 0 {
                z = C64::from_polar(1.0, grid.phase(i));
            }
            let d: f64 = self.coefs[band]
                .iter()
                .map(|poly| {
                    poly.iter()
                        .rev()
                        .fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
                        .norm_sqr()
                })
                .sum();
            out.push(d);
            z *= step;
        }
        out
    }
}

/// A spectral peak: band, phase, and its normalized null value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub band: usize,
    pub phi: f64,
    pub null_value: f64,
}

/// Grid indices of strict local minima of a circular null spectrum.
fn local_minima(null: &[f64]) -> Vec<usize> {
    let n = null.len();
    if n < 3 {
        return (0..n).collect();
    }
    (0..n)
        .filter(|&i| {
            let prev = null[(i + n - 1) % n];
            let next = null[(i + 1) % n];
            null[i] < prev && null[i] <= next
        })
        .collect()
}

fn wrap_phase(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

fn refine_peak(
    spectrum: &NullSpectrum,
    null: &[f64],
    grid: &PhaseGrid,
    band: usize,
    i: usize,
) -> f64 {
    let n = null.len();
    let phi0 = grid.phase(i);
    if grid.refine == Refinement::None || n < 3 {
        return phi0;
    }
    let step = grid.step();
    let ln = |d: f64| -(d.max(f64::MIN_POSITIVE)).ln();
    let (ym, y0, yp) = (
        ln(null[(i + n - 1) % n]),
        ln(null[i]),
        ln(null[(i + 1) % n]),
    );
    let denom = ym - 2.0 * y0 + yp;
    let offset = if denom < 0.0 {
        (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let parabolic = phi0 + offset * step;
    if grid.refine == Refinement::Parabolic {
        return wrap_phase(parabolic);
    }
    let f = |phi: f64| spectrum.null_value(phi, band);
    let (golden, fg) = golden_min(f, phi0 - step, phi0 + step, 1e-12);
    let best = if fg <= f(parabolic) {
        golden
    } else {
        parabolic
    };
    wrap_phase(best)
}

/// The `count` strongest peaks of a spectrum over all its bands, with
/// per-band non-maximum suppression. Returns fewer than `count` peaks when the
/// spectrum does not support that many significant ones.
pub fn find_peaks(spectrum: &NullSpectrum, grid: &PhaseGrid, count: usize) -> Vec<Peak> {
    let n = grid.points;
    let nulls: Vec<Vec<f64>> = (0..spectrum.bands())
        .map(|l| spectrum.evaluate(grid, l))
        .collect();

    let mut candidates: Vec<(usize, usize, f64)> = nulls
        .iter()
        .enumerate()
        .flat_map(|(l, null)| local_minima(null).into_iter().map(move |i| (l, i, null[i])))
        .filter(|&(_, _, d)| d / spectrum.steering_norm < PEAK_SIGNIFICANCE)
        .collect();
    // total order: value, then band, then index
    candidates.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

    let mut picks: Vec<(usize, usize)> = Vec::with_capacity(count);
    for (l, i, _) in candidates {
        if picks.len() == count {
            break;
        }
        let suppressed = picks.iter().any(|&(pl, pi)| {
            let gap = i.abs_diff(pi);
            pl == l && gap.min(n - gap) <= SUPPRESSION_RADIUS
        });
        if !suppressed {
            picks.push((l, i));
        }
    }

    let mut peaks: Vec<Peak> = picks
        .into_iter()
        .map(|(l, i)| {
            let phi = refine_peak(spectrum, &nulls[l], grid, l, i);
            Peak {
                band: l,
                phi,
                null_value: spectrum.normalized(phi, l),
            }
        })
        .collect();
    // collapse duplicates that refinement merged
    let mut unique: Vec<Peak> = Vec::with_capacity(peaks.len());
    for p in peaks.drain(..) {
        if !unique
            .iter()
            .any(|q| q.band == p.band && wrap_phase(q.phi - p.phi).abs() < 1e-9)
        {
            unique.push(p);
        }
    }
    unique
}
