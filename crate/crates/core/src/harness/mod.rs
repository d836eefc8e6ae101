//! Seeded Monte Carlo experiments: RMSE versus SNR or source count, with
//! estimate-to-truth matching and per-point bounds.

pub mod scenario;
pub mod table;

use std::collections::HashSet;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crb::{crb_phase, tone_crb_numerical, CrbInput, ToneCrbInput};
use crate::error::{Error, Result};
use crate::estimators::{
    jdfpi, jdfsd_full, jdfsdpj, Algorithm, EstimationResult, PhaseGrid, Receiver,
};
use crate::model::{CMatrix, CVector, Structure, C64};
use crate::siggen::{
    assemble_full_snapshots, assemble_snapshots, Envelope, ScenarioConfig, SourceTruth,
};

pub use table::{emit_csv, read_csv, Metric, ResultRow, ResultTable, SweepVariable, CSV_HEADER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: ScenarioConfig,
    pub sweep_variable: SweepVariable,
    pub sweep_values: Vec<f64>,
    pub n_trials: usize,
    pub algorithms: Vec<Algorithm>,
    pub master_seed: u64,
    #[serde(default)]
    pub grid: PhaseGrid,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::config("n_trials must be at least 1"));
        }
        if self.sweep_values.is_empty() {
            return Err(Error::config("sweep_values is empty"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("no algorithms selected"));
        }
        if self.algorithms.iter().duplicates().next().is_some() {
            return Err(Error::config("duplicate algorithm in sweep"));
        }
        for i in 0..self.sweep_values.len() {
            self.scenario_at(i)?.validate()?;
        }
        Ok(())
    }

    /// The base scenario with the swept quantity set to its `index`-th value.
    /// Sweeping `n_sources` keeps the first `K` sources of the base.
    pub fn scenario_at(&self, index: usize) -> Result<ScenarioConfig> {
        let value = self.sweep_values[index];
        let mut s = self.base.clone();
        match self.sweep_variable {
            SweepVariable::SnrDb => {
                if !value.is_finite() {
                    return Err(Error::config(format!("SNR {value} is not finite")));
                }
                s.snr_db = Some(value);
            }
            SweepVariable::NSources => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::config(format!(
                        "source count {value} is not a whole number"
                    )));
                }
                let k = value as usize;
                if k > s.sources.len() {
                    return Err(Error::config(format!(
                        "sweep asks for {k} sources but the base scenario defines {}",
                        s.sources.len()
                    )));
                }
                s.sources.truncate(k);
            }
        }
        Ok(s)
    }
}

/// Outcome of one trial. Errors are present iff `failure` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Filled in by the sweep; 0 for a standalone trial.
    pub sweep_value: f64,
    pub algorithm: Algorithm,
    pub trial: usize,
    pub seed: u64,
    /// Matched per-source errors, radians, in truth order.
    pub phase_errors: Vec<f64>,
    /// Matched per-source errors, Hz, in truth order.
    pub frequency_errors: Vec<f64>,
    pub failure: Option<TrialFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    /// Pipeline step that failed, when the estimator tagged one.
    pub step: Option<String>,
    pub message: String,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

fn wrap_phase(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Per-source `(phase error in rad, frequency error in Hz)` in truth order,
/// under the assignment minimizing the normalized squared error. Phase errors
/// are wrapped to (−π, π].
pub fn match_estimates(
    truth: &[SourceTruth],
    config: &ScenarioConfig,
    result: &EstimationResult,
) -> Result<Vec<(f64, f64)>> {
    let k = truth.len();
    if result.sources.len() != k {
        return Err(Error::SizeMismatch {
            expected: k,
            got: result.sources.len(),
        });
    }
    let band_width = config.pattern.sub_nyquist_rate();
    let errors: Vec<Vec<(f64, f64)>> = truth
        .iter()
        .map(|t| {
            let (phi, f) = (t.phase(&config.geometry), t.center_frequency());
            result
                .sources
                .iter()
                .map(|e| (wrap_phase(e.phi - phi), e.frequency - f))
                .collect()
        })
        .collect();
    let cost = |i: usize, j: usize| {
        let (dp, df) = errors[i][j];
        (dp / std::f64::consts::PI).powi(2) + (df / band_width).powi(2)
    };
    let best = (0..k)
        .permutations(k)
        .map(|perm| {
            let c: f64 = perm.iter().enumerate().map(|(i, &j)| cost(i, j)).sum();
            (c, perm)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, perm)| perm)
        .unwrap_or_default();
    Ok(best
        .iter()
        .enumerate()
        .map(|(i, &j)| errors[i][j])
        .collect())
}

/// Runs one algorithm on the scenario with its seed replaced by `seed`.
/// Estimation failures are recorded in the returned record; only
/// configuration errors are returned as `Err`.
pub fn run_trial(
    scenario: &ScenarioConfig,
    algorithm: Algorithm,
    seed: u64,
    grid: &PhaseGrid,
) -> Result<TrialRecord> {
    let mut config = scenario.clone();
    config.seed = seed;
    config.validate()?;
    let rx = Receiver {
        geometry: config.geometry,
        pattern: config.pattern.clone(),
        sources: config.sources.len(),
        grid: *grid,
    };
    let estimate = match algorithm {
        Algorithm::Jdfpi => assemble_snapshots(&config).and_then(|w| jdfpi(&w, &rx)),
        Algorithm::Jdfsdpj => assemble_snapshots(&config).and_then(|w| jdfsdpj(&w, &rx)),
        Algorithm::JdfsdFull => assemble_full_snapshots(&config).and_then(|y| jdfsd_full(&y, &rx)),
    };
    let matched = estimate.and_then(|r| match_estimates(&config.sources, &config, &r));
    let mut record = TrialRecord {
        sweep_value: 0.0,
        algorithm,
        trial: 0,
        seed,
        phase_errors: Vec::new(),
        frequency_errors: Vec::new(),
        failure: None,
    };
    match matched {
        Ok(pairs) => {
            record.phase_errors = pairs.iter().map(|p| p.0).collect();
            record.frequency_errors = pairs.iter().map(|p| p.1).collect();
        }
        Err(e @ Error::Config(_)) => return Err(e),
        Err(e) => {
            record.failure = Some(TrialFailure {
                step: e.step().map(str::to_owned),
                message: e.to_string(),
            })
        }
    }
    Ok(record)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed from `(master, sweep index, algorithm, trial index)`.
pub fn trial_seed(master: u64, sweep_index: usize, algorithm: Algorithm, trial: usize) -> u64 {
    let alg = Algorithm::ALL.iter().position(|&a| a == algorithm).unwrap() as u64;
    [sweep_index as u64, alg, trial as u64]
        .into_iter()
        .fold(splitmix64(master), |h, x| splitmix64(h ^ splitmix64(x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    Sequential,
    #[default]
    Parallel,
}

/// Bounds for one sweep point: `(phase rad, frequency as fraction of f_N)`.
/// NaN where the bound does not apply (no noise model or non-tone sources).
pub fn point_bounds(config: &ScenarioConfig, structure: Structure) -> (f64, f64) {
    let k = config.sources.len();
    let sigma2 = config.noise_variance();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    if config.snr_db.is_none() {
        return (0.0, 0.0);
    }
    let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    let phis = config.phases();
    let bands = config.bands();
    let powers = CVector::from_iterator(k, config.sources.iter().map(|s| C64::new(s.power(), 0.0)));
    let phase = crb_phase(&CrbInput {
        phis: phis.clone(),
        bands: bands.clone(),
        signal_covariance: CMatrix::from_diagonal(&powers),
        sigma2,
        observation_time: config.observation_time(),
        geometry: config.geometry,
        pattern: config.pattern.clone(),
        structure,
    })
    .map(|c| rms(&c.per_source_std))
    .unwrap_or(f64::NAN);
    let tones = config
        .sources
        .iter()
        .all(|s| matches!(s.envelope, Envelope::PureTone));
    let freq = if tones {
        let width = config.pattern.sub_nyquist_rate();
        tone_crb_numerical(&ToneCrbInput {
            phis,
            bands: bands.clone(),
            amplitudes: config.sources.iter().map(|s| s.amplitude).collect(),
            residual_frequencies: config
                .sources
                .iter()
                .zip(&bands)
                .map(|(s, &b)| s.carrier - b as f64 * width)
                .collect(),
            sigma2,
            snapshots: config.snapshots,
            geometry: config.geometry,
            pattern: config.pattern.clone(),
            structure,
        })
        .map(|c| rms(&c.frequency_std) / config.pattern.nyquist_rate)
        .unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    (phase, freq)
}

fn structure_of(algorithm: Algorithm) -> Structure {
    match algorithm {
        Algorithm::JdfsdFull => Structure::Full,
        _ => Structure::Simplified,
    }
}

/// Aggregates the trials of one `(sweep value, algorithm)` cell.
fn aggregate(
    variable: SweepVariable,
    value: f64,
    algorithm: Algorithm,
    trials: &[TrialRecord],
    nyquist_rate: f64,
    bounds: (f64, f64),
) -> [ResultRow; 2] {
    let ok: Vec<&TrialRecord> = trials.iter().filter(|t| !t.failed()).collect();
    let rmse = |errs: &dyn Fn(&TrialRecord) -> &[f64], scale: f64| {
        // sorted reduction keeps the sum independent of trial completion order
        let mut sq: Vec<f64> = ok
            .iter()
            .flat_map(|t| errs(t).iter().map(|e| (e / scale).powi(2)))
            .collect();
        if sq.is_empty() {
            return f64::NAN;
        }
        sq.sort_by(f64::total_cmp);
        (sq.iter().sum::<f64>() / sq.len() as f64).sqrt()
    };
    let row = |metric, rmse, crb| ResultRow {
        sweep_variable: variable,
        sweep_value: value,
        algorithm,
        metric,
        rmse,
        crb,
        n_success: ok.len(),
        n_trials: trials.len(),
    };
    [
        row(Metric::PhaseRmse, rmse(&|t| &t.phase_errors, 1.0), bounds.0),
        row(
            Metric::FreqRmse,
            rmse(&|t| &t.frequency_errors, nyquist_rate),
            bounds.1,
        ),
    ]
}

/// All trial records of a sweep, grouped per sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub table: ResultTable,
    pub trials: Vec<TrialRecord>,
}

/// Runs a sweep. `on_point` sees the rows of every completed sweep point, in
/// sweep order, so callers can flush partial results.
pub fn run_sweep_with(
    config: &SweepConfig,
    schedule: Schedule,
    mut on_point: impl FnMut(&[ResultRow]),
) -> Result<SweepOutput> {
    config.validate()?;
    let mut seeds = HashSet::new();
    for i in 0..config.sweep_values.len() {
        for &alg in &config.algorithms {
            for t in 0..config.n_trials {
                if !seeds.insert(trial_seed(config.master_seed, i, alg, t)) {
                    return Err(Error::config("trial seed collision"));
                }
            }
        }
    }

    let mut rows = Vec::new();
    let mut all_trials = Vec::new();
    for (i, &value) in config.sweep_values.iter().enumerate() {
        let scenario = config.scenario_at(i)?;
        let jobs: Vec<(Algorithm, usize)> = config
            .algorithms
            .iter()
            .flat_map(|&a| (0..config.n_trials).map(move |t| (a, t)))
            .collect();
        let run = |&(alg, t): &(Algorithm, usize)| -> Result<TrialRecord> {
            let seed = trial_seed(config.master_seed, i, alg, t);
            let mut rec = run_trial(&scenario, alg, seed, &config.grid)?;
            rec.sweep_value = value;
            rec.trial = t;
            Ok(rec)
        };
        let trials: Vec<TrialRecord> = match schedule {
            Schedule::Sequential => jobs.iter().map(run).collect::<Result<_>>()?,
            Schedule::Parallel => jobs.par_iter().map(run).collect::<Result<_>>()?,
        };
        let mut point = Vec::new();
        for &alg in &config.algorithms {
            let cell: Vec<TrialRecord> = trials
                .iter()
                .filter(|t| t.algorithm == alg)
                .cloned()
                .collect();
            let bounds = point_bounds(&scenario, structure_of(alg));
            point.extend(aggregate(
                config.sweep_variable,
                value,
                alg,
                &cell,
                scenario.pattern.nyquist_rate,
                bounds,
            ));
        }
        on_point(&ResultTable::new(point.clone()).rows);
        rows.extend(point);
        all_trials.extend(trials);
    }
    Ok(SweepOutput {
        table: ResultTable::new(rows),
        trials: all_trials,
    })
}

pub fn run_sweep(config: &SweepConfig) -> Result<ResultTable> {
    Ok(run_sweep_with(config, Schedule::Parallel, |_| {})?.table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::SourceEstimate;

    #[test]
    fn wrap_is_half_open() {
        use std::f64::consts::PI;
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn seeds_are_distinct() {
        let mut seen = HashSet::new();
        for i in 0..20 {
            for a in Algorithm::ALL {
                for t in 0..200 {
                    assert!(seen.insert(trial_seed(7, i, a, t)));
                }
            }
        }
    }

    #[test]
    fn permuted_estimates_match_exactly() {
        let s = scenario::default_scenario();
        let est: Vec<SourceEstimate> = s
            .sources
            .iter()
            .rev()
            .map(|t| SourceEstimate {
                phi: t.phase(&s.geometry),
                band: t.band(&s.pattern),
                residual_frequency: 0.0,
                frequency: t.center_frequency(),
                theta: Some(t.theta),
            })
            .collect();
        let r = EstimationResult {
            algorithm: Algorithm::Jdfsdpj,
            sources: est,
            weak_separation: false,
            ambiguous_pairing: false,
        };
        for (dp, df) in match_estimates(&s.sources, &s, &r).unwrap() {
            assert!(dp.abs() < 1e-15 && df.abs() < 1e-15);
        }
        let mut short = r.clone();
        short.sources.pop();
        assert!(matches!(
            match_estimates(&s.sources, &s, &short),
            Err(Error::SizeMismatch { .. })
        ));
    }
}
