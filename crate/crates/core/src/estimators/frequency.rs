//! Residual (in-band) frequency estimation and unfolding to the carrier.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{MultiCosetPattern, C64};

const ZERO_PAD: usize = 4;

/// `(|X(ω)|², d/dω, d²/dω²)` for `X(ω) = Σ x[n]·exp(−jω(n − n₀))`, `n₀` the
/// record centre.
fn periodogram_derivs(x: &[C64], omega: f64) -> (f64, f64, f64) {
    let center = 0.5 * (x.len() as f64 - 1.0);
    let (mut s0, mut s1, mut s2) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for (n, &v) in x.iter().enumerate() {
        let t = n as f64 - center;
        let e = v * C64::from_polar(1.0, -omega * t);
        s0 += e;
        s1 += e * t;
        s2 += e * (t * t);
    }
    // X = s0, X' = −j·s1, X'' = −s2
    let d1 = C64::new(0.0, -1.0) * s1;
    let d2 = -s2;
    let f = s0.norm_sqr();
    let f1 = 2.0 * (d1 * s0.conj()).re;
    let f2 = 2.0 * ((d2 * s0.conj()).re + d1.norm_sqr());
    (f, f1, f2)
}

/// Frequency of the dominant complex exponential in `x`, sampled at
/// `sample_rate`, as a value in `[0, sample_rate)`.
///
/// Zero-padded FFT peak, then Newton iterations on the periodogram
/// (golden-section inside the peak bin if Newton misbehaves). Exact for a
/// pure tone.
pub fn residual_frequency(x: &[C64], sample_rate: f64) -> Result<f64> {
    let n = x.len();
    if n < 2 {
        return Err(Error::Length {
            what: "frequency estimation",
            need: 2,
            got: n,
        });
    }
    if x.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::ZeroSequence);
    }

    let padded_len = n * ZERO_PAD;
    let mut buf = vec![C64::new(0.0, 0.0); padded_len];
    buf[..n].copy_from_slice(x);
    FftPlanner::new()
        .plan_fft_forward(padded_len)
        .process(&mut buf);
    let k = (0..padded_len)
        .max_by(|&a, &b| {
            buf[a]
                .norm_sqr()
                .total_cmp(&buf[b].norm_sqr())
                .then(b.cmp(&a))
        })
        .unwrap_or(0);
    let bin = 2.0 * PI / padded_len as f64;
    let coarse = k as f64 * bin;
    let (lo, hi) = (coarse - bin, coarse + bin);

    let mut omega = coarse;
    let mut converged = false;
    for _ in 0..50 {
        let (_, f1, f2) = periodogram_derivs(x, omega);
        if f2 >= 0.0 {
            break;
        }
        let next = omega - f1 / f2;
        if !(lo..=hi).contains(&next) {
            break;
        }
        let done = (next - omega).abs() < 1e-15 * (1.0 + omega.abs());
        omega = next;
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        let (newton_f, _, _) = periodogram_derivs(x, omega);
        let golden = golden_max(|w| periodogram_derivs(x, w).0, lo, hi);
        if periodogram_derivs(x, golden).0 > newton_f || !(lo..=hi).contains(&omega) {
            omega = golden;
        }
    }

    let mut f = omega.rem_euclid(2.0 * PI) / (2.0 * PI) * sample_rate;
    if f >= sample_rate {
        f = 0.0;
    }
    Ok(f)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-13 {
        if fc > fd {
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
    0.5 * (a + b)
}

/// `f = band·f_N/L + f_res`.
pub fn unfold_frequency(band: usize, residual: f64, pattern: &MultiCosetPattern) -> Result<f64> {
    let width = pattern.sub_nyquist_rate();
    if !(0.0..width).contains(&residual) {
        return Err(Error::Range {
            value: residual,
            limit: width,
        });
    }
    if band >= pattern.decimation {
        return Err(Error::config(format!(
            "band {band} out of range 0..{}",
            pattern.decimation
        )));
    }
    Ok(band as f64 * width + residual)
}
