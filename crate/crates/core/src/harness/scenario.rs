//! Scenario builders: the default experiment and random tone scenarios.

use rand::seq::index::sample;
use rand::Rng;

use crate::model::{doa_from_phase, ArrayGeometry, MultiCosetPattern, C64};
use crate::siggen::{Envelope, ScenarioConfig, SourceTruth};

/// Phases of the default sources.
pub const DEFAULT_PHASES: [f64; 3] = [-0.5, 0.05, 0.6];
/// Bands of the default sources.
pub const DEFAULT_BANDS: [usize; 3] = [4, 7, 10];
/// In-band position of each default tone, as a fraction of the band.
pub const DEFAULT_OFFSETS: [f64; 3] = [0.31, 0.62, 0.45];

/// Normalized units: `f_N = 1`, propagation speed 1, half-wavelength spacing
/// at `f_N`.
pub fn default_geometry() -> ArrayGeometry {
    ArrayGeometry {
        sensors: 8,
        spacing: 0.5,
        propagation_speed: 1.0,
    }
}

pub fn default_pattern() -> MultiCosetPattern {
    MultiCosetPattern {
        decimation: 13,
        offsets: vec![0, 2, 3, 5, 8],
        nyquist_rate: 1.0,
    }
}

/// A pure tone at spatial phase `phi` in `band`, its in-band frequency snapped
/// to the DFT grid of an `snapshots`-long record at `fraction` of the band.
/// Returns `None` if the phase cannot be produced at that frequency.
pub fn tone_source(
    geom: &ArrayGeometry,
    pattern: &MultiCosetPattern,
    snapshots: usize,
    phi: f64,
    band: usize,
    fraction: f64,
    amplitude: C64,
) -> Option<SourceTruth> {
    let bin = (fraction * snapshots as f64)
        .round()
        .clamp(1.0, snapshots as f64 - 1.0);
    let width = pattern.sub_nyquist_rate();
    let carrier = band as f64 * width + bin / snapshots as f64 * width;
    let theta = doa_from_phase(phi, carrier, geom).ok()?;
    if theta.abs() >= std::f64::consts::FRAC_PI_2 * 0.999 {
        return None;
    }
    Some(SourceTruth {
        theta,
        carrier,
        amplitude,
        envelope: Envelope::PureTone,
    })
}

/// Default experiment: 8 sensors, 5 of 13 cosets, three unit-power tones in
/// distinct bands, 4096 snapshots, 20 dB.
pub fn default_scenario() -> ScenarioConfig {
    let geometry = default_geometry();
    let pattern = default_pattern();
    let snapshots = 4096;
    let sources = (0..3)
        .map(|k| {
            let amp = C64::from_polar(1.0, 0.7 * k as f64);
            tone_source(
                &geometry,
                &pattern,
                snapshots,
                DEFAULT_PHASES[k],
                DEFAULT_BANDS[k],
                DEFAULT_OFFSETS[k],
                amp,
            )
            .expect("default sources are representable")
        })
        .collect();
    ScenarioConfig {
        geometry,
        pattern,
        sources,
        snr_db: Some(20.0),
        snapshots,
        seed: 1,
    }
}

/// `k` pure tones on the default receiver with distinct random bands, random
/// phases at least `min_separation` apart, unit-ish amplitudes, interior
/// in-band frequencies.
pub fn random_tone_scenario<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    snapshots: usize,
    min_separation: f64,
) -> ScenarioConfig {
    let geometry = default_geometry();
    let pattern = default_pattern();
    'retry: loop {
        // low bands cannot host large phases at half-wavelength spacing
        let bands: Vec<usize> = sample(rng, pattern.decimation - 3, k)
            .into_iter()
            .map(|b| b + 3)
            .collect();
        let mut sources: Vec<SourceTruth> = Vec::with_capacity(k);
        let mut phis: Vec<f64> = Vec::with_capacity(k);
        for &band in &bands {
            let mut attempts = 0;
            let src = loop {
                attempts += 1;
                if attempts > 100 {
                    continue 'retry;
                }
                let phi = rng.random_range(-1.0..1.0);
                if phis.iter().any(|&p: &f64| (p - phi).abs() < min_separation) {
                    continue;
                }
                let fraction = rng.random_range(0.15..0.85);
                let amp = C64::from_polar(rng.random_range(0.6..1.4), rng.random_range(-3.0..3.0));
                if let Some(s) =
                    tone_source(&geometry, &pattern, snapshots, phi, band, fraction, amp)
                {
                    phis.push(phi);
                    break s;
                }
            };
            sources.push(src);
        }
        return ScenarioConfig {
            geometry,
            pattern,
            sources,
            snr_db: None,
            snapshots,
            seed: rng.random(),
        };
    }
}
