use crate::error::{Error, Result, StepExt};
use crate::estimators::ctf::ctf_support;
use crate::estimators::frequency::{residual_frequency, unfold_frequency};
use crate::estimators::lstsq::ls_solve;
use crate::estimators::pairing::pair_supports;
use crate::estimators::spectrum::{find_peaks, NullSpectrum, PhaseGrid};
use crate::estimators::subspace::{decompose, sample_covariance};
use crate::estimators::{Algorithm, EstimationResult, Receiver, SourceEstimate};
use crate::model::{build_b, doa_from_phase, spatial_steering, CMatrix, CVector, Structure};
use crate::siggen::SnapshotSet;

/// Spatial MUSIC on the branch-0 outputs of all sensors (`M × N`).
pub fn music_spatial(q: &CMatrix, sources: usize, grid: &PhaseGrid) -> Result<Vec<f64>> {
    Ok(spatial_search(q, sources, grid)?.0)
}

fn spatial_search(q: &CMatrix, sources: usize, grid: &PhaseGrid) -> Result<(Vec<f64>, bool)> {
    let decomp = decompose(&sample_covariance(q), sources)?;
    let spectrum = NullSpectrum::spatial(&decomp.search_subspace());
    let peaks = find_peaks(&spectrum, grid, sources);
    if peaks.len() < sources {
        return Err(Error::FewerPeaks {
            expected: sources,
            found: peaks.len(),
        });
    }
    Ok((
        peaks.iter().map(|p| p.phi).collect(),
        decomp.weak_separation,
    ))
}

/// LS source reconstruction on the chosen steering columns followed by
/// residual-frequency estimation, unfolding and DOA conversion.
fn reconstruct(
    structure: Structure,
    phis: &[f64],
    bands: &[usize],
    obs: &CMatrix,
    rx: &Receiver,
) -> Result<Vec<SourceEstimate>> {
    let h = structure
        .steering_matrix(phis, bands, &rx.geometry, &rx.pattern)
        .step("build_steering")?;
    let signals = ls_solve(&h, obs).step("ls_reconstruct")?;
    let rate = rx.pattern.sub_nyquist_rate();
    phis.iter()
        .zip(bands)
        .enumerate()
        .map(|(k, (&phi, &band))| {
            let row: Vec<_> = signals.row(k).iter().copied().collect();
            let residual = residual_frequency(&row, rate).step("residual_frequency")?;
            let frequency =
                unfold_frequency(band, residual, &rx.pattern).step("unfold_frequency")?;
            Ok(SourceEstimate {
                phi,
                band,
                residual_frequency: residual,
                frequency,
                theta: doa_from_phase(phi, frequency, &rx.geometry).ok(),
            })
        })
        .collect()
}

fn empty(algorithm: Algorithm) -> EstimationResult {
    EstimationResult {
        algorithm,
        sources: Vec::new(),
        weak_separation: false,
        ambiguous_pairing: false,
    }
}

/// Individual spatial and band estimates, paired by cross-correlation.
pub fn jdfpi(snapshots: &SnapshotSet, rx: &Receiver) -> Result<EstimationResult> {
    let k = rx.sources;
    let m = rx.geometry.sensors;
    let p = rx.pattern.branches();
    if k >= m || k + 1 > p {
        return Err(Error::Config(format!(
            "JDFPI needs K < M and K ≤ P−1 (K={k}, M={m}, P={p})"
        )));
    }
    if k == 0 {
        return Ok(empty(Algorithm::Jdfpi));
    }
    let q = snapshots.q();
    let y1 = snapshots.y1();

    let (phis, weak_separation) = spatial_search(&q, k, &rx.grid).step("music_spatial")?;
    let a = CMatrix::from_columns(
        &phis
            .iter()
            .map(|&phi| spatial_steering(phi, m))
            .collect::<Vec<CVector>>(),
    );
    let z = ls_solve(&a, &q).step("ls_spatial")?;

    let b = build_b(&rx.pattern);
    let omega = ctf_support(&y1, &b, k).step("ctf_support")?;
    let b_omega = b.select_columns(omega.bands.iter());
    let x_omega = ls_solve(&b_omega, &y1).step("ls_bands")?;

    let support =
        pair_supports(&z, &x_omega, &omega, rx.pattern.decimation).step("pair_supports")?;
    let sources = reconstruct(
        Structure::Simplified,
        &phis,
        &support.bands,
        &snapshots.w,
        rx,
    )?;
    Ok(EstimationResult {
        algorithm: Algorithm::Jdfpi,
        sources,
        weak_separation,
        ambiguous_pairing: support.ambiguous.iter().any(|&a| a),
    })
}

fn joint_search(
    structure: Structure,
    algorithm: Algorithm,
    obs: &CMatrix,
    rx: &Receiver,
) -> Result<EstimationResult> {
    let k = rx.sources;
    let rows = structure.channels(&rx.geometry, &rx.pattern);
    if obs.nrows() != rows {
        return Err(Error::SizeMismatch {
            expected: rows,
            got: obs.nrows(),
        });
    }
    if k + 1 > rows {
        return Err(Error::TooManySources { sources: k, rows });
    }
    if k == 0 {
        return Ok(empty(algorithm));
    }
    let decomp = decompose(&sample_covariance(obs), k).step("subspace")?;
    let spectrum = NullSpectrum::joint(
        structure,
        &decomp.search_subspace(),
        &rx.geometry,
        &rx.pattern,
    );
    let peaks = find_peaks(&spectrum, &rx.grid, k);
    if peaks.len() < k {
        return Err(Error::FewerPeaks {
            expected: k,
            found: peaks.len(),
        })
        .step("joint_search");
    }
    let phis: Vec<f64> = peaks.iter().map(|p| p.phi).collect();
    let bands: Vec<usize> = peaks.iter().map(|p| p.band).collect();
    let sources = reconstruct(structure, &phis, &bands, obs, rx)?;
    Ok(EstimationResult {
        algorithm,
        sources,
        weak_separation: decomp.weak_separation,
        ambiguous_pairing: false,
    })
}

/// Joint `(φ, band)` subspace search on the simplified output `W`.
pub fn jdfsdpj(snapshots: &SnapshotSet, rx: &Receiver) -> Result<EstimationResult> {
    joint_search(Structure::Simplified, Algorithm::Jdfsdpj, &snapshots.w, rx)
}

/// Joint subspace search on the full `M·P × N` output (row `m·P + p`).
pub fn jdfsd_full(y_full: &CMatrix, rx: &Receiver) -> Result<EstimationResult> {
    joint_search(Structure::Full, Algorithm::JdfsdFull, y_full, rx)
}
