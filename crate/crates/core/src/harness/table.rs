use std::cmp::Ordering;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Algorithm;

pub const CSV_HEADER: [&str; 8] = [
    "sweep_var",
    "sweep_value",
    "algorithm",
    "metric",
    "rmse",
    "crb",
    "n_success",
    "n_trials",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    SnrDb,
    NSources,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::SnrDb => "snr_db",
            SweepVariable::NSources => "n_sources",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [SweepVariable::SnrDb, SweepVariable::NSources]
            .into_iter()
            .find(|v| v.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Carrier frequency as a fraction of `f_N`.
    FreqRmse,
    /// Spatial phase, radians.
    PhaseRmse,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::FreqRmse => "freq_rmse",
            Metric::PhaseRmse => "phase_rmse",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Metric::FreqRmse, Metric::PhaseRmse]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_variable: SweepVariable,
    pub sweep_value: f64,
    pub algorithm: Algorithm,
    pub metric: Metric,
    /// NaN when no trial succeeded.
    pub rmse: f64,
    /// Square root of the mean per-source bound; NaN when unavailable.
    pub crb: f64,
    pub n_success: usize,
    pub n_trials: usize,
}

impl ResultRow {
    pub fn failure_rate(&self) -> f64 {
        1.0 - self.n_success as f64 / self.n_trials.max(1) as f64
    }
}

/// Rows ordered by sweep value, then algorithm name, then metric name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

fn row_order(a: &ResultRow, b: &ResultRow) -> Ordering {
    a.sweep_value
        .total_cmp(&b.sweep_value)
        .then_with(|| a.algorithm.name().cmp(b.algorithm.name()))
        .then_with(|| a.metric.name().cmp(b.metric.name()))
}

impl ResultTable {
    pub fn new(mut rows: Vec<ResultRow>) -> Self {
        rows.sort_by(row_order);
        Self { rows }
    }

    pub fn get(
        &self,
        sweep_value: f64,
        algorithm: Algorithm,
        metric: Metric,
    ) -> Option<&ResultRow> {
        self.rows.iter().find(|r| {
            r.sweep_value == sweep_value && r.algorithm == algorithm && r.metric == metric
        })
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.sweep_variable.name().to_string(),
                format!("{:e}", r.sweep_value),
                r.algorithm.name().to_string(),
                r.metric.name().to_string(),
                format!("{:e}", r.rmse),
                format!("{:e}", r.crb),
                r.n_success.to_string(),
                r.n_trials.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn from_csv_str(text: &str, path: &Path) -> Result<Self> {
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.iter().ne(CSV_HEADER) {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let num = |i: usize| -> Result<f64> {
                field(i)
                    .parse::<f64>()
                    .map_err(|e| bad(format!("row {}: {e}", line + 2)))
            };
            let count = |i: usize| -> Result<usize> {
                field(i)
                    .parse::<usize>()
                    .map_err(|e| bad(format!("row {}: {e}", line + 2)))
            };
            rows.push(ResultRow {
                sweep_variable: SweepVariable::parse(field(0))
                    .ok_or_else(|| bad(format!("unknown sweep variable {:?}", field(0))))?,
                sweep_value: num(1)?,
                algorithm: field(2).parse()?,
                metric: Metric::parse(field(3))
                    .ok_or_else(|| bad(format!("unknown metric {:?}", field(3))))?,
                rmse: num(4)?,
                crb: num(5)?,
                n_success: count(6)?,
                n_trials: count(7)?,
            });
        }
        Ok(Self::new(rows))
    }
}

/// Writes the table as CSV; see [`CSV_HEADER`].
pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = File::create(path).map_err(io)?;
    f.write_all(table.to_csv_string().as_bytes()).map_err(io)
}

pub fn read_csv(path: &Path) -> Result<ResultTable> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ResultTable::from_csv_str(&text, path)
}
