//! Shared information of entangled photon-pair links.
//!
//! A source emits `m` photon pairs per outcome slot with probability `P(m)`.
//! Each photon of a pair travels to its own threshold detector through a lossy
//! arm of total efficiency `eta`; each detector also fires spuriously with
//! probability `q`. This crate turns those ingredients into the 2x2 table of
//! joint click probabilities, the Shannon mutual information between the two
//! click records, and the per-photon figures of merit derived from it.
//!
//! - [`photon_stats`]: pair-number distributions and their lossy generating functions
//! - [`detection`]: link parameters and joint click distributions
//! - [`information`]: entropies, mutual information and per-photon rates
//! - [`optimize`]: brightness optimisation and parameter sweeps
//! - [`oracle`]: direct summation and Monte-Carlo cross-checks
//!
//! ```
//! use pairlink::{detection, information, LinkParams, PairDistribution};
//!
//! let source = PairDistribution::poissonian(0.1).unwrap();
//! let link = LinkParams::new(0.8, 3.9e-8).unwrap();
//! let joint = detection::joint_click_distribution(&source, &link);
//! let bits = information::mutual_information(&joint);
//! assert!(bits > 0.0 && bits < 1.0);
//! ```

pub mod detection;
mod error;
pub mod information;
pub mod optimize;
pub mod oracle;
pub mod photon_stats;

pub use detection::{JointClickDistribution, LinkParams};
pub use error::{Error, Result};
pub use information::InfoReport;
pub use optimize::{Objective, OptimizationResult, ParametricSource, SweepCurve};
pub use oracle::SimulationReport;
pub use photon_stats::{PairDistribution, SourceKind};

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            range: "[0, 1]",
        })
    }
}
