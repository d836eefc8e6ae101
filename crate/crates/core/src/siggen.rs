//! Synthetic array data: Nyquist-rate sensor streams for narrowband sources,
//! multi-coset sampling, branch delay equalization and assembly of the
//! simplified receiver output `W`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    phase_from_doa, selected_channels, ArrayGeometry, CMatrix, MultiCosetPattern, C64,
};

/// Complex envelope `g_k` of a source.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    /// Constant envelope; the source is a single complex exponential.
    #[default]
    PureTone,
    /// Unit-power circular Gaussian noise low-pass filtered to `[0, bandwidth)` Hz.
    FilteredNoise { bandwidth: f64 },
}

impl Envelope {
    /// Filtered noise occupying 10% of one band.
    pub fn default_filtered(pattern: &MultiCosetPattern) -> Self {
        Envelope::FilteredNoise {
            bandwidth: 0.1 * pattern.sub_nyquist_rate(),
        }
    }

    pub fn bandwidth(&self) -> f64 {
        match *self {
            Envelope::PureTone => 0.0,
            Envelope::FilteredNoise { bandwidth } => bandwidth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTruth {
    /// Direction of arrival in radians, inside `(−π/2, π/2)`.
    pub theta: f64,
    /// Carrier (lower band edge of the occupied spectrum) in Hz, inside `[0, f_N)`.
    pub carrier: f64,
    /// Complex gain, serialized as `[re, im]`.
    pub amplitude: C64,
    #[serde(default)]
    pub envelope: Envelope,
}

impl SourceTruth {
    /// Centre of the occupied spectrum; this is the frequency estimators report.
    pub fn center_frequency(&self) -> f64 {
        self.carrier + 0.5 * self.envelope.bandwidth()
    }

    /// Spatial phase at the centre frequency.
    pub fn phase(&self, geom: &ArrayGeometry) -> f64 {
        phase_from_doa(self.theta, self.center_frequency(), geom)
    }

    pub fn band(&self, pattern: &MultiCosetPattern) -> usize {
        pattern.band_of(self.center_frequency())
    }

    /// Expected power `|amplitude|²·E|g|²` (envelopes have unit power).
    pub fn power(&self) -> f64 {
        self.amplitude.norm_sqr()
    }
}

/// A complete single-trial scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub geometry: ArrayGeometry,
    pub pattern: MultiCosetPattern,
    pub sources: Vec<SourceTruth>,
    /// SNR in dB of the mean source power over the per-sample noise variance;
    /// `null` runs without noise.
    pub snr_db: Option<f64>,
    /// Number of sub-Nyquist snapshots `N`.
    pub snapshots: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.pattern.validate()?;
        let m = self.geometry.sensors;
        let p = self.pattern.branches();
        let k = self.sources.len();
        if k >= m {
            return Err(Error::config(format!(
                "{k} sources need more than {m} sensors"
            )));
        }
        if k + 2 > m + p {
            return Err(Error::config(format!(
                "{k} sources exceed the M+P−2 = {} cap",
                m + p - 2
            )));
        }
        let min_snapshots = 2 * (m + p - 1);
        if self.snapshots < min_snapshots {
            return Err(Error::config(format!(
                "{} snapshots is fewer than 2·(M+P−1) = {min_snapshots}",
                self.snapshots
            )));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::config(
                    "snr_db must be finite (use null for no noise)",
                ));
            }
        }
        let f_n = self.pattern.nyquist_rate;
        for (i, s) in self.sources.iter().enumerate() {
            if !(s.theta.abs() < PI / 2.0) {
                return Err(Error::config(format!(
                    "source {i}: DOA {} outside (−π/2, π/2)",
                    s.theta
                )));
            }
            if !(0.0..f_n).contains(&s.carrier) {
                return Err(Error::config(format!(
                    "source {i}: carrier {} outside [0, f_N)",
                    s.carrier
                )));
            }
            if let Envelope::FilteredNoise { bandwidth } = s.envelope {
                if !(bandwidth > 0.0) {
                    return Err(Error::config(format!(
                        "source {i}: envelope bandwidth must be positive"
                    )));
                }
            }
            let ratio = self.pattern.decimation as f64 / f_n;
            let lo = (s.carrier * ratio).floor();
            let hi = ((s.carrier + s.envelope.bandwidth()) * ratio).floor();
            if lo != hi {
                return Err(Error::config(format!(
                    "source {i}: spectrum [{}, {}] straddles a band edge",
                    s.carrier,
                    s.carrier + s.envelope.bandwidth()
                )));
            }
        }
        Ok(())
    }

    /// Per-sample noise variance `σ²`.
    pub fn noise_variance(&self) -> f64 {
        let Some(snr_db) = self.snr_db else {
            return 0.0;
        };
        let reference = if self.sources.is_empty() {
            1.0
        } else {
            self.sources.iter().map(SourceTruth::power).sum::<f64>() / self.sources.len() as f64
        };
        reference / 10f64.powf(snr_db / 10.0)
    }

    pub fn phases(&self) -> Vec<f64> {
        self.sources
            .iter()
            .map(|s| s.phase(&self.geometry))
            .collect()
    }

    pub fn bands(&self) -> Vec<usize> {
        self.sources.iter().map(|s| s.band(&self.pattern)).collect()
    }

    /// Observation time `N·L·T_N` in seconds.
    pub fn observation_time(&self) -> f64 {
        (self.snapshots * self.pattern.decimation) as f64 * self.pattern.nyquist_period()
    }
}

/// Simplified receiver output for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    /// `(M+P−1) × N`: branches `0..P` of sensor 0, then branch 0 of sensors `1..M`.
    pub w: CMatrix,
    pub sensors: usize,
    pub branches: usize,
    pub sub_nyquist_rate: f64,
}

impl SnapshotSet {
    pub fn snapshots(&self) -> usize {
        self.w.ncols()
    }

    /// Branch 0 of every sensor (`M × N`), sensor 0 first.
    pub fn q(&self) -> CMatrix {
        let rows: Vec<usize> = std::iter::once(0)
            .chain(self.branches..self.branches + self.sensors - 1)
            .collect();
        self.w.select_rows(rows.iter())
    }

    /// Every branch of sensor 0 (`P × N`).
    pub fn y1(&self) -> CMatrix {
        self.w.rows(0, self.branches).into_owned()
    }
}

pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

/// `exp(j·2π·ratio·n)` with the cycle count reduced exactly, so the phase stays
/// accurate for long records.
fn unit_phasor(ratio: f64, n: usize) -> C64 {
    let x = n as f64;
    let p = ratio * x;
    let err = ratio.mul_add(x, -p);
    let cycles = (p - p.floor()) + err;
    C64::from_polar(1.0, 2.0 * PI * cycles)
}

fn filtered_noise<R: Rng + ?Sized>(
    rng: &mut R,
    len: usize,
    bandwidth: f64,
    nyquist_rate: f64,
    planner: &mut FftPlanner<f64>,
) -> Vec<C64> {
    let mut buf: Vec<C64> = (0..len).map(|_| complex_gaussian(rng, 1.0)).collect();
    planner.plan_fft_forward(len).process(&mut buf);
    let kept = ((bandwidth / nyquist_rate * len as f64).ceil() as usize).clamp(1, len);
    for z in &mut buf[kept..] {
        *z = C64::new(0.0, 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let scale = 1.0 / ((kept * len) as f64).sqrt();
    buf.iter_mut().for_each(|z| *z *= scale);
    buf
}

/// Nyquist-rate streams `x_m[n]`, `n = 0..N·L`, one per sensor.
pub fn synthesize_streams<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<Vec<Vec<C64>>> {
    config.validate()?;
    let m_count = config.geometry.sensors;
    let len = config.snapshots * config.pattern.decimation;
    let f_n = config.pattern.nyquist_rate;
    let mut planner = FftPlanner::new();

    let mut streams = vec![vec![C64::new(0.0, 0.0); len]; m_count];
    for src in &config.sources {
        let base: Vec<C64> = match src.envelope {
            Envelope::PureTone => {
                let ratio = src.carrier / f_n;
                (0..len)
                    .map(|n| src.amplitude * unit_phasor(ratio, n))
                    .collect()
            }
            Envelope::FilteredNoise { bandwidth } => {
                let env = filtered_noise(rng, len, bandwidth, f_n, &mut planner);
                let ratio = src.carrier / f_n;
                env.iter()
                    .enumerate()
                    .map(|(n, &g)| src.amplitude * g * unit_phasor(ratio, n))
                    .collect()
            }
        };
        let phi = src.phase(&config.geometry);
        for (m, stream) in streams.iter_mut().enumerate() {
            let steer = C64::from_polar(1.0, -phi * m as f64);
            for (x, &b) in stream.iter_mut().zip(&base) {
                *x += steer * b;
            }
        }
    }

    let sigma2 = config.noise_variance();
    if sigma2 > 0.0 {
        for stream in &mut streams {
            for x in stream.iter_mut() {
                *x += complex_gaussian(rng, sigma2);
            }
        }
    }
    Ok(streams)
}

/// Multi-coset decimation: entry `(p, n)` is `x[n·L + c_p]`.
pub fn multicoset_sample(
    stream: &[C64],
    pattern: &MultiCosetPattern,
    snapshots: usize,
) -> Result<CMatrix> {
    let l_count = pattern.decimation;
    let need = snapshots * l_count;
    if stream.len() < need {
        return Err(Error::Length {
            what: "multi-coset stream",
            need,
            got: stream.len(),
        });
    }
    Ok(CMatrix::from_fn(pattern.branches(), snapshots, |p, n| {
        stream[n * l_count + pattern.offsets[p]]
    }))
}

/// Removes the `exp(j·2π·f·c·T_N)` factor that the coset delay `c` leaves on
/// the baseband spectrum `f ∈ [0, f_s)`, applied on the DFT grid of the record.
/// Exact for components on that grid.
pub fn delay_equalize(
    row: &mut [C64],
    offset: usize,
    decimation: usize,
    planner: &mut FftPlanner<f64>,
) {
    if offset == 0 || row.is_empty() {
        return;
    }
    let n = row.len();
    planner.plan_fft_forward(n).process(row);
    let denom = (n * decimation) as f64;
    for (k, z) in row.iter_mut().enumerate() {
        let cycles = ((k * offset) % (n * decimation)) as f64 / denom;
        *z *= C64::from_polar(1.0 / n as f64, -2.0 * PI * cycles);
    }
    planner.plan_fft_inverse(n).process(row);
}

/// Sampled and equalized outputs for the given flat channels (`m·P + p`).
fn sample_channels(
    streams: &[Vec<C64>],
    pattern: &MultiCosetPattern,
    snapshots: usize,
    channels: &[usize],
) -> Result<CMatrix> {
    let p_count = pattern.branches();
    let l_count = pattern.decimation;
    let mut planner = FftPlanner::new();
    let mut out = CMatrix::zeros(channels.len(), snapshots);
    for (row, &ch) in channels.iter().enumerate() {
        let (m, p) = (ch / p_count, ch % p_count);
        let stream = &streams[m];
        let need = snapshots * l_count;
        if stream.len() < need {
            return Err(Error::Length {
                what: "multi-coset stream",
                need,
                got: stream.len(),
            });
        }
        let c = pattern.offsets[p];
        let mut samples: Vec<C64> = (0..snapshots).map(|n| stream[n * l_count + c]).collect();
        delay_equalize(&mut samples, c, l_count, &mut planner);
        for (n, z) in samples.into_iter().enumerate() {
            out[(row, n)] = z;
        }
    }
    Ok(out)
}

/// Simplified receiver output for a scenario, seeded from `config.seed`.
pub fn assemble_snapshots(config: &ScenarioConfig) -> Result<SnapshotSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let streams = synthesize_streams(config, &mut rng)?;
    snapshots_from_streams(config, &streams)
}

pub fn snapshots_from_streams(
    config: &ScenarioConfig,
    streams: &[Vec<C64>],
) -> Result<SnapshotSet> {
    let channels = selected_channels(config.geometry.sensors, config.pattern.branches());
    let w = sample_channels(streams, &config.pattern, config.snapshots, &channels)?;
    Ok(SnapshotSet {
        w,
        sensors: config.geometry.sensors,
        branches: config.pattern.branches(),
        sub_nyquist_rate: config.pattern.sub_nyquist_rate(),
    })
}

/// Every branch of every sensor (`M·P × N`, row `m·P + p`), for the
/// full-structure baseline. Rows selected by `J` equal [`assemble_snapshots`].
pub fn assemble_full_snapshots(config: &ScenarioConfig) -> Result<CMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let streams = synthesize_streams(config, &mut rng)?;
    let channels: Vec<usize> = (0..config.geometry.sensors * config.pattern.branches()).collect();
    sample_channels(&streams, &config.pattern, config.snapshots, &channels)
}

const MAGIC: &[u8; 4] = b"SNYQ";

/// Writes snapshots as: `"SNYQ"`, u32 rows, u32 cols, u32 reserved (0),
/// u64 seed, then row-major interleaved `re, im` f64 values. Little-endian.
pub fn write_snapshots(path: &Path, w: &CMatrix, seed: u64) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let mut header = Vec::with_capacity(24);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&(w.nrows() as u32).to_le_bytes());
    header.extend_from_slice(&(w.ncols() as u32).to_le_bytes());
    header.extend_from_slice(&0u32.to_le_bytes());
    header.extend_from_slice(&seed.to_le_bytes());
    out.write_all(&header).map_err(io)?;
    for r in 0..w.nrows() {
        for c in 0..w.ncols() {
            let z = w[(r, c)];
            out.write_all(&z.re.to_le_bytes()).map_err(io)?;
            out.write_all(&z.im.to_le_bytes()).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

pub fn read_snapshots(path: &Path) -> Result<(CMatrix, u64)> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut input = BufReader::new(File::open(path).map_err(io)?);
    let mut header = [0u8; 24];
    input.read_exact(&mut header).map_err(io)?;
    if &header[0..4] != MAGIC {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "bad magic".into(),
        });
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
    let (rows, cols) = (word(4), word(8));
    let seed = u64::from_le_bytes(header[16..24].try_into().unwrap());
    let mut data = vec![0u8; rows * cols * 16];
    input.read_exact(&mut data).map_err(io)?;
    let val = |i: usize| f64::from_le_bytes(data[i * 8..i * 8 + 8].try_into().unwrap());
    let w = CMatrix::from_fn(rows, cols, |r, c| {
        let i = 2 * (r * cols + c);
        C64::new(val(i), val(i + 1))
    });
    Ok((w, seed))
}
