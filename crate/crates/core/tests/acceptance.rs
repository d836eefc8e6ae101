//! Acceptance suite: one line per criterion, non-zero exit on any failure.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snyq_core::crb::{crb_phase, fim_numerical, orthogonal_projector, CrbInput};
use snyq_core::estimators::{jdfpi, jdfsdpj, sample_covariance, Receiver};
use snyq_core::harness::scenario::{
    default_geometry, default_pattern, default_scenario, random_tone_scenario,
};
use snyq_core::harness::*;
use snyq_core::model::*;
use snyq_core::siggen::{assemble_snapshots, ScenarioConfig};
use snyq_core::{Algorithm, PhaseGrid};

const TRIALS: usize = 500;
const SEED: u64 = 42;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, detail: String, elapsed: Duration) {
        if !ok {
            self.failures += 1;
        }
        let tag = if ok { "[PASS]" } else { "[FAIL]" };
        println!("{tag} {id}: {detail} ({:.1} s)", elapsed.as_secs_f64());
    }
}

fn max_abs<'a>(m: impl IntoIterator<Item = &'a C64>) -> f64 {
    m.into_iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn db(ratio: f64) -> f64 {
    20.0 * ratio.log10()
}

fn random_phases<R: Rng>(rng: &mut R, k: usize, lo: f64, hi: f64, gap: f64) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..k).map(|_| rng.random_range(lo..hi)).collect();
        if p.iter()
            .enumerate()
            .all(|(i, a)| p[..i].iter().all(|b| (a - b).abs() > gap))
        {
            return p;
        }
    }
}

fn structural_identities() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 100 {
        let l = rng.random_range(2..24);
        let p = rng.random_range(1..=l);
        let mut offsets = sample(&mut rng, l, p).into_vec();
        offsets.sort_unstable();
        let pattern = MultiCosetPattern::new(l, offsets, 1.0).unwrap();
        let geom = ArrayGeometry::new(rng.random_range(2..10), 0.5, 1.0).unwrap();
        let rows = geom.sensors + p - 1;
        let k = rng.random_range(1..=3.min(l).min(rows - 1).max(1));
        if k + 1 > rows {
            continue;
        }
        let phis = random_phases(&mut rng, k, -3.0, 3.0, 0.3);
        let bands = sample(&mut rng, l, k).into_vec();

        let b = build_b(&pattern);
        worst = worst.max(max_abs(&(&b * b.adjoint() - CMatrix::identity(p, p))));
        let j = build_j(geom.sensors, p);
        worst = worst.max((&j * j.transpose() - DMatrix::<f64>::identity(rows, rows)).amax());

        // H = J(A ⊗ B), built independently of the library's Kronecker path
        let set = SteeringSet::new(&phis, &geom, &pattern);
        let jc = j.map(|v| C64::new(v, 0.0));
        for (kk, &phi) in phis.iter().enumerate() {
            let a = spatial_steering(phi, geom.sensors);
            for band in 0..l {
                let g = CVector::from_fn(geom.sensors * p, |i, _| a[i / p] * b[(i % p, band)]);
                let h = &jc * &g;
                worst = worst.max(max_abs(&(set.h.column(kk * l + band) - &h)));
                worst = worst.max(max_abs(&(joint_steering(phi, band, &geom, &pattern) - &h)));
            }
        }

        let hs = build_h_selected(&phis, &bands, &geom, &pattern).unwrap();
        let Ok(proj) = orthogonal_projector(&hs) else {
            continue;
        };
        worst = worst.max(max_abs(&(&proj * &proj - &proj)));
        worst = worst.max(max_abs(&(proj.adjoint() - &proj)));
        worst = worst.max(max_abs(&(&proj * &hs)));
        done += 1;
    }
    worst
}

fn whiteness() -> (f64, f64) {
    let n = 100_000;
    let config = ScenarioConfig {
        geometry: ArrayGeometry::new(3, 0.5, 1.0).unwrap(),
        pattern: MultiCosetPattern::new(5, vec![0, 2, 3], 1.0).unwrap(),
        sources: vec![],
        snr_db: Some(0.0),
        snapshots: n,
        seed: 5,
    };
    let sigma2 = config.noise_variance();
    let w = assemble_snapshots(&config).unwrap().w;
    let r = sample_covariance(&w);
    let dev = max_abs(&(r - CMatrix::identity(w.nrows(), w.nrows()) * C64::new(sigma2, 0.0)));
    (dev, 5.0 * sigma2 / (n as f64).sqrt())
}

/// Worst `(|Δφ|, |Δf|/f_N)` and the number of band mismatches or failures.
fn noiseless_recovery() -> (f64, f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut dphi, mut dfreq, mut misses): (f64, f64, usize) = (0.0, 0.0, 0);
    for i in 0..50 {
        let k = 1 + i % 3;
        let s = random_tone_scenario(&mut rng, k, 1024, 0.2);
        let w = assemble_snapshots(&s).unwrap();
        let rx = Receiver {
            geometry: s.geometry,
            pattern: s.pattern.clone(),
            sources: k,
            grid: PhaseGrid::default(),
        };
        for result in [jdfpi(&w, &rx), jdfsdpj(&w, &rx)] {
            let Ok(result) = result else {
                misses += 1;
                continue;
            };
            let mut est: Vec<usize> = result.sources.iter().map(|e| e.band).collect();
            let mut truth = s.bands();
            est.sort_unstable();
            truth.sort_unstable();
            if est != truth {
                misses += 1;
            }
            for (dp, df) in match_estimates(&s.sources, &s, &result).unwrap() {
                dphi = dphi.max(dp.abs());
                dfreq = dfreq.max(df.abs() / s.pattern.nyquist_rate);
            }
        }
    }
    (dphi, dfreq, misses)
}

fn random_crb_input<R: Rng>(rng: &mut R, k: usize, structure: Structure) -> CrbInput {
    let pattern = default_pattern();
    let a = CMatrix::from_fn(k, k, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    CrbInput {
        phis: random_phases(rng, k, -2.5, 2.5, 0.3),
        bands: sample(rng, pattern.decimation, k).into_vec(),
        signal_covariance: &a * a.adjoint() + CMatrix::identity(k, k) * C64::new(0.2, 0.0),
        sigma2: rng.random_range(0.01..1.0),
        observation_time: 13.0 * rng.random_range(64..2048) as f64,
        geometry: default_geometry(),
        pattern,
        structure,
    }
}

fn crb_cross_validation() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    (0..20)
        .map(|i| {
            let input = random_crb_input(&mut rng, 1 + i % 3, Structure::Simplified);
            let closed = crb_phase(&input).unwrap().matrix;
            let oracle = fim_numerical(&input).unwrap().try_inverse().unwrap();
            (&oracle - &closed).norm() / closed.norm()
        })
        .fold(0.0, f64::max)
}

/// Number of scenarios violating the ordering, and of those without a strict gap.
fn bound_ordering() -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut violations, mut ties) = (0, 0);
    for i in 0..20 {
        let k = 1 + i % 3;
        let simple = random_crb_input(&mut rng, k, Structure::Simplified);
        let full = CrbInput {
            structure: Structure::Full,
            ..simple.clone()
        };
        let s = crb_phase(&simple).unwrap().matrix;
        let f = crb_phase(&full).unwrap().matrix;
        if (0..k).any(|j| s[(j, j)] < f[(j, j)]) {
            violations += 1;
        }
        if !(0..k).any(|j| s[(j, j)] > f[(j, j)]) {
            ties += 1;
        }
    }
    (violations, ties)
}

fn sweep(values: Vec<f64>, variable: SweepVariable, algorithms: Vec<Algorithm>) -> SweepConfig {
    SweepConfig {
        base: default_scenario(),
        sweep_variable: variable,
        sweep_values: values,
        n_trials: TRIALS,
        algorithms,
        master_seed: SEED,
        grid: PhaseGrid::default(),
    }
}

fn row(t: &ResultTable, value: f64, alg: Algorithm, metric: Metric) -> &ResultRow {
    t.get(value, alg, metric).expect("row present")
}

fn describe(r: &ResultRow) -> String {
    format!(
        "{}@{}: rmse {:.3e} bound {:.3e} ({:+.2} dB, {}/{} ok)",
        r.algorithm.name(),
        r.sweep_value,
        r.rmse,
        r.crb,
        db(r.rmse / r.crb),
        r.n_success,
        r.n_trials
    )
}

fn within_3db(r: &ResultRow) -> bool {
    r.rmse.is_finite() && r.crb > 0.0 && db(r.rmse / r.crb).abs() < 3.0
}

fn main() {
    let mut report = Report { failures: 0 };

    let t = Instant::now();
    let worst = structural_identities();
    let e = t.elapsed();
    report.line(
        "1 structural identities",
        worst < 1e-10 && e < Duration::from_secs(10),
        format!("max deviation {worst:.2e} over 100 configurations"),
        e,
    );

    let t = Instant::now();
    let (dev, limit) = whiteness();
    let e = t.elapsed();
    report.line(
        "2 noise whiteness",
        dev < limit && e < Duration::from_secs(30),
        format!("max |R − σ²I| {dev:.3e}, limit {limit:.3e}"),
        e,
    );

    let t = Instant::now();
    let (dphi, dfreq, misses) = noiseless_recovery();
    let e = t.elapsed();
    report.line(
        "3 noiseless recovery",
        dphi < 1e-4 && dfreq < 1e-6 && misses == 0 && e < Duration::from_secs(120),
        format!(
            "max |Δφ| {dphi:.2e} rad, max |Δf| {dfreq:.2e}·f_N, {misses} band misses or failures"
        ),
        e,
    );

    let t = Instant::now();
    let rel = crb_cross_validation();
    let e = t.elapsed();
    report.line(
        "4 bound vs numerical information",
        rel < 1e-4 && e < Duration::from_secs(60),
        format!("max relative difference {rel:.2e} over 20 scenarios"),
        e,
    );

    // shared Monte Carlo runs
    let t = Instant::now();
    let joint = run_sweep(&sweep(
        vec![0.0, 10.0, 20.0, 30.0],
        SweepVariable::SnrDb,
        vec![Algorithm::Jdfsdpj],
    ))
    .unwrap();
    let joint_time = t.elapsed();
    let t = Instant::now();
    let separate = run_sweep(&sweep(
        vec![10.0, 20.0, 30.0],
        SweepVariable::SnrDb,
        vec![Algorithm::Jdfpi],
    ))
    .unwrap();
    let separate_time = t.elapsed();

    let rows: Vec<&ResultRow> = [20.0, 30.0]
        .iter()
        .map(|&s| row(&joint, s, Algorithm::Jdfsdpj, Metric::PhaseRmse))
        .collect();
    report.line(
        "5 joint phase RMSE attains bound",
        rows.iter().all(|r| within_3db(r)) && joint_time < Duration::from_secs(600),
        rows.iter()
            .map(|r| describe(r))
            .collect::<Vec<_>>()
            .join("; "),
        joint_time,
    );

    let a = row(&joint, 10.0, Algorithm::Jdfsdpj, Metric::PhaseRmse);
    let b = row(&separate, 10.0, Algorithm::Jdfpi, Metric::PhaseRmse);
    report.line(
        "6 joint beats separate at 10 dB",
        a.rmse < 0.95 * b.rmse,
        format!(
            "JDFSDPJ {:.3e} vs JDFPI {:.3e} (ratio {:.3})",
            a.rmse,
            b.rmse,
            a.rmse / b.rmse
        ),
        separate_time,
    );

    let t = Instant::now();
    let (violations, ties) = bound_ordering();
    let e = t.elapsed();
    report.line(
        "7 simplified bound above full bound",
        violations == 0 && ties == 0 && e < Duration::from_secs(60),
        format!("{violations} ordering violations, {ties} scenarios without a strict gap, of 20"),
        e,
    );

    let t = Instant::now();
    let counts = run_sweep(&sweep(
        vec![1.0, 2.0, 3.0],
        SweepVariable::NSources,
        vec![Algorithm::Jdfpi, Algorithm::Jdfsdpj],
    ))
    .unwrap();
    let e = t.elapsed();
    let by_k = |alg| -> Vec<&ResultRow> {
        [1.0, 2.0, 3.0]
            .iter()
            .map(|&k| row(&counts, k, alg, Metric::PhaseRmse))
            .collect()
    };
    let joint_k = by_k(Algorithm::Jdfsdpj);
    let spread = |rs: &[&ResultRow]| {
        let (lo, hi) = rs.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
            (lo.min(r.rmse), hi.max(r.rmse))
        });
        db(hi / lo)
    };
    let joint_spread = spread(&joint_k);
    let separate_k = by_k(Algorithm::Jdfpi);
    report.line(
        "8 joint phase RMSE robust to source count",
        joint_spread < 3.0 && joint_k.iter().all(|r| within_3db(r)),
        format!(
            "JDFSDPJ spread {joint_spread:.2} dB ({}); JDFPI spread {:.2} dB, rmse {}",
            joint_k
                .iter()
                .map(|r| format!("{:+.2} dB", db(r.rmse / r.crb)))
                .collect::<Vec<_>>()
                .join(", "),
            spread(&separate_k),
            separate_k
                .iter()
                .map(|r| format!("{:.3e}", r.rmse))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        e,
    );

    let freq_rows: Vec<&ResultRow> = [20.0, 30.0]
        .iter()
        .flat_map(|&s| {
            [
                row(&joint, s, Algorithm::Jdfsdpj, Metric::FreqRmse),
                row(&separate, s, Algorithm::Jdfpi, Metric::FreqRmse),
            ]
        })
        .collect();
    report.line(
        "9 frequency RMSE attains bound",
        freq_rows.iter().all(|r| within_3db(r)),
        freq_rows
            .iter()
            .map(|r| describe(r))
            .collect::<Vec<_>>()
            .join("; "),
        joint_time + separate_time,
    );

    let t = Instant::now();
    let mut small = sweep(
        vec![5.0, 25.0],
        SweepVariable::SnrDb,
        Algorithm::ALL.to_vec(),
    );
    small.n_trials = 20;
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (i, schedule) in [Schedule::Parallel, Schedule::Parallel, Schedule::Sequential]
        .into_iter()
        .enumerate()
    {
        let out = run_sweep_with(&small, schedule, |_| {}).unwrap();
        let path = dir.path().join(format!("run{i}.csv"));
        emit_csv(&out.table, &path).unwrap();
        files.push(std::fs::read(&path).unwrap());
    }
    let e = t.elapsed();
    report.line(
        "10 determinism",
        files[0] == files[1] && files[0] == files[2] && !files[0].is_empty(),
        format!(
            "two parallel runs and one sequential run of {} bytes each identical: {}",
            files[0].len(),
            files[0] == files[1] && files[0] == files[2]
        ),
        e,
    );

    let phase: Vec<f64> = [0.0, 10.0, 20.0]
        .iter()
        .map(|&s| row(&joint, s, Algorithm::Jdfsdpj, Metric::PhaseRmse).rmse)
        .collect();
    report.line(
        "harness: RMSE falls by SNR step",
        phase.windows(2).all(|w| w[1] < w[0]),
        format!(
            "JDFSDPJ phase RMSE at 0/10/20 dB: {}",
            phase
                .iter()
                .map(|r| format!("{r:.3e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        joint_time,
    );

    if report.failures > 0 {
        println!("{} criteria failed", report.failures);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
