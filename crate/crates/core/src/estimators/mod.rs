//! Joint DOA / carrier-frequency estimators.
//!
//! * [`jdfpi`]: separate spatial MUSIC and band-support recovery, paired by
//!   cross-correlation of the two signal estimates.
//! * [`jdfsdpj`]: joint `(φ, band)` MUSIC search on the simplified output.
//! * [`jdfsd_full`]: the same search on the full `M·P`-channel output.
//!
//! All three finish with the same reconstruction: least squares on the
//! selected steering columns, per-source residual frequency, unfolding to the
//! carrier and conversion of the phase to a DOA.

pub mod ctf;
pub mod frequency;
pub mod lstsq;
pub mod pairing;
mod pipelines;
pub mod spectrum;
pub mod subspace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{ArrayGeometry, MultiCosetPattern};

pub use ctf::{ctf_support, SupportSet};
pub use frequency::{residual_frequency, unfold_frequency};
pub use lstsq::ls_solve;
pub use pairing::{pair_supports, JointSupport};
pub use pipelines::{jdfpi, jdfsd_full, jdfsdpj, music_spatial};
pub use spectrum::{NullSpectrum, PhaseGrid, Refinement};
pub use subspace::{decompose, sample_covariance, SubspaceDecomposition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "JDFPI")]
    Jdfpi,
    #[serde(rename = "JDFSDPJ")]
    Jdfsdpj,
    #[serde(rename = "JDFSD-full")]
    JdfsdFull,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Jdfpi, Algorithm::Jdfsdpj, Algorithm::JdfsdFull];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Jdfpi => "JDFPI",
            Algorithm::Jdfsdpj => "JDFSDPJ",
            Algorithm::JdfsdFull => "JDFSD-full",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// What the estimators need to know about the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct Receiver {
    pub geometry: ArrayGeometry,
    pub pattern: MultiCosetPattern,
    /// Number of sources `K` (assumed known).
    pub sources: usize,
    pub grid: PhaseGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceEstimate {
    pub phi: f64,
    pub band: usize,
    /// In-band frequency in Hz, in `[0, f_N/L)`.
    pub residual_frequency: f64,
    /// `band·f_N/L + residual_frequency`.
    pub frequency: f64,
    /// `None` when the phase aliases at the estimated frequency.
    pub theta: Option<f64>,
}

/// Unordered per-source estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub algorithm: Algorithm,
    pub sources: Vec<SourceEstimate>,
    /// The covariance eigenvalues did not separate signal from noise cleanly.
    pub weak_separation: bool,
    /// At least one cross-correlation pairing was ambiguous (JDFPI only).
    pub ambiguous_pairing: bool,
}
