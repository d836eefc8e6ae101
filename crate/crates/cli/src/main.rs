//! `snyq`: single trials, Monte Carlo sweeps, bounds and snapshot dumps for
//! the simplified sub-Nyquist array receiver.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snyq_core::crb::{crb_phase, tone_crb_numerical, CrbInput, ToneCrbInput};
use snyq_core::estimators::{jdfpi, jdfsd_full, jdfsdpj};
use snyq_core::harness::scenario::default_scenario;
use snyq_core::harness::{emit_csv, run_sweep_with, Schedule};
use snyq_core::siggen::{assemble_full_snapshots, assemble_snapshots, write_snapshots};
use snyq_core::{
    Algorithm, CMatrix, CVector, Envelope, Error, PhaseGrid, Receiver, ResultTable, ScenarioConfig,
    Structure, SweepConfig, SweepVariable, C64,
};

#[derive(Parser)]
#[command(
    name = "snyq",
    version,
    about = "Joint DOA and carrier estimation on a sub-Nyquist array receiver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial per algorithm and print the estimates as JSON.
    Single(Common),
    /// RMSE versus SNR sweep, written as CSV.
    SweepSnr(Common),
    /// RMSE versus source count sweep, written as CSV.
    SweepK(Common),
    /// Per-source phase and frequency bounds for a scenario, as CSV.
    Crb(Common),
    /// Write the receiver output W of one trial to a binary file.
    DumpSnapshots(Common),
}

#[derive(Args)]
struct Common {
    /// JSON scenario or sweep configuration; the built-in default otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted (required for dumps).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trials per sweep point.
    #[arg(long)]
    trials: Option<usize>,
    /// Scenario seed, or master seed for sweeps.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of JDFPI, JDFSDPJ, JDFSD-full.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<Algorithm>>,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.root() {
            Error::Config(_) | Error::Parse { .. } => 2,
            Error::Io { .. } => 4,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Error::Io {
        path: path.to_owned(),
        source: e,
    }
    .into()
}

fn read_config(path: &Path) -> Result<serde_json::Value, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        }
        .into()
    })
}

fn parse_as<T: serde::de::DeserializeOwned>(
    value: serde_json::Value,
    path: &Path,
) -> Result<T, Failure> {
    serde_json::from_value(value).map_err(|e| {
        Error::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        }
        .into()
    })
}

fn load_scenario(args: &Common) -> Result<ScenarioConfig, Failure> {
    let mut scenario = match &args.config {
        None => default_scenario(),
        Some(path) => parse_as(read_config(path)?, path)?,
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    scenario.validate()?;
    Ok(scenario)
}

/// A sweep file is used as is; a scenario file becomes the base of a default
/// sweep over `variable`.
fn load_sweep(args: &Common, variable: SweepVariable) -> Result<SweepConfig, Failure> {
    let from_base = |base: ScenarioConfig| {
        let sweep_values = match variable {
            SweepVariable::SnrDb => (-10..=30).step_by(5).map(f64::from).collect(),
            SweepVariable::NSources => (1..=base.sources.len()).map(|k| k as f64).collect(),
        };
        SweepConfig {
            master_seed: base.seed,
            base,
            sweep_variable: variable,
            sweep_values,
            n_trials: 500,
            algorithms: vec![Algorithm::Jdfpi, Algorithm::Jdfsdpj],
            grid: PhaseGrid::default(),
        }
    };
    let mut config = match &args.config {
        None => from_base(default_scenario()),
        Some(path) => {
            let value = read_config(path)?;
            if value.get("sweep_variable").is_some() {
                parse_as::<SweepConfig>(value, path)?
            } else {
                from_base(parse_as(value, path)?)
            }
        }
    };
    if config.sweep_variable != variable {
        return Err(Error::Config(format!(
            "configuration sweeps {}, not {}",
            config.sweep_variable.name(),
            variable.name()
        ))
        .into());
    }
    if let Some(n) = args.trials {
        config.n_trials = n;
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(algs) = &args.algorithms {
        config.algorithms = algs.clone();
    }
    config.validate()?;
    Ok(config)
}

fn write_out(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| io_failure(path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| io_failure(Path::new("<stdout>"), e)),
    }
}

fn single(args: &Common) -> Result<(), Failure> {
    let scenario = load_scenario(args)?;
    let rx = Receiver {
        geometry: scenario.geometry,
        pattern: scenario.pattern.clone(),
        sources: scenario.sources.len(),
        grid: PhaseGrid::default(),
    };
    let algorithms = args
        .algorithms
        .clone()
        .unwrap_or_else(|| Algorithm::ALL.to_vec());
    let mut results = Vec::new();
    for alg in algorithms {
        let result = match alg {
            Algorithm::Jdfpi => assemble_snapshots(&scenario).and_then(|w| jdfpi(&w, &rx)),
            Algorithm::Jdfsdpj => assemble_snapshots(&scenario).and_then(|w| jdfsdpj(&w, &rx)),
            Algorithm::JdfsdFull => {
                assemble_full_snapshots(&scenario).and_then(|y| jdfsd_full(&y, &rx))
            }
        };
        match result {
            Ok(r) => results.push(r),
            Err(e @ Error::Config(_)) => return Err(e.into()),
            Err(e) => {
                return Err(Failure {
                    code: 3,
                    message: format!("{alg}: {e}"),
                })
            }
        }
    }
    let text = serde_json::to_string_pretty(&results).expect("estimates serialize");
    write_out(args.out.as_deref(), &(text + "\n"))
}

fn sweep(args: &Common, variable: SweepVariable) -> Result<(), Failure> {
    let config = load_sweep(args, variable)?;
    if let Some(path) = &args.out {
        // fail on an unwritable path before any trial runs
        emit_csv(&ResultTable::new(Vec::new()), path)?;
    }
    let mut done = Vec::new();
    let mut flush_error = None;
    let output = run_sweep_with(&config, Schedule::Parallel, |rows| {
        done.extend_from_slice(rows);
        eprintln!("{} = {} done", variable.name(), rows[0].sweep_value);
        // rewrite after every point so an interrupted sweep leaves its results
        if let Some(path) = &args.out {
            if let Err(e) = emit_csv(&ResultTable::new(done.clone()), path) {
                flush_error.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = flush_error {
        return Err(e.into());
    }
    match &args.out {
        Some(path) => emit_csv(&output.table, path).map_err(Failure::from),
        None => write_out(None, &output.table.to_csv_string()),
    }
}

fn bounds(args: &Common) -> Result<(), Failure> {
    let s = load_scenario(args)?;
    if s.snr_db.is_none() {
        return Err(Error::Config("bounds need a finite snr_db".into()).into());
    }
    if s.sources.is_empty() {
        return Err(Error::Config("bounds need at least one source".into()).into());
    }
    let phis = s.phases();
    let bands = s.bands();
    let powers: Vec<C64> = s.sources.iter().map(|x| C64::new(x.power(), 0.0)).collect();
    let phase = |structure| {
        crb_phase(&CrbInput {
            phis: phis.clone(),
            bands: bands.clone(),
            signal_covariance: CMatrix::from_diagonal(&CVector::from_column_slice(&powers)),
            sigma2: s.noise_variance(),
            observation_time: s.observation_time(),
            geometry: s.geometry,
            pattern: s.pattern.clone(),
            structure,
        })
    };
    let simplified = phase(Structure::Simplified)?;
    let full = phase(Structure::Full)?;
    let tones = s
        .sources
        .iter()
        .all(|x| matches!(x.envelope, Envelope::PureTone));
    let frequency = if tones {
        let width = s.pattern.sub_nyquist_rate();
        let c = tone_crb_numerical(&ToneCrbInput {
            phis: phis.clone(),
            bands: bands.clone(),
            amplitudes: s.sources.iter().map(|x| x.amplitude).collect(),
            residual_frequencies: s
                .sources
                .iter()
                .zip(&bands)
                .map(|(x, &b)| x.carrier - b as f64 * width)
                .collect(),
            sigma2: s.noise_variance(),
            snapshots: s.snapshots,
            geometry: s.geometry,
            pattern: s.pattern.clone(),
            structure: Structure::Simplified,
        })?;
        c.frequency_std
            .iter()
            .map(|f| f / s.pattern.nyquist_rate)
            .collect()
    } else {
        vec![f64::NAN; phis.len()]
    };

    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "source",
        "phi",
        "band",
        "phase_crb_simplified",
        "phase_crb_full",
        "freq_crb",
    ];
    w.write_record(header).expect("in-memory write");
    for k in 0..phis.len() {
        w.write_record([
            k.to_string(),
            format!("{:e}", phis[k]),
            bands[k].to_string(),
            format!("{:e}", simplified.per_source_std[k]),
            format!("{:e}", full.per_source_std[k]),
            format!("{:e}", frequency[k]),
        ])
        .expect("in-memory write");
    }
    let text = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output");
    write_out(args.out.as_deref(), &text)
}

fn dump(args: &Common) -> Result<(), Failure> {
    let Some(path) = &args.out else {
        return Err(Error::Config("dump-snapshots needs --out".into()).into());
    };
    let scenario = load_scenario(args)?;
    let w = assemble_snapshots(&scenario)?.w;
    write_snapshots(path, &w, scenario.seed)?;
    eprintln!(
        "wrote {} × {} snapshots to {}",
        w.nrows(),
        w.ncols(),
        path.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Single(a) => single(a),
        Command::SweepSnr(a) => sweep(a, SweepVariable::SnrDb),
        Command::SweepK(a) => sweep(a, SweepVariable::NSources),
        Command::Crb(a) => bounds(a),
        Command::DumpSnapshots(a) => dump(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
