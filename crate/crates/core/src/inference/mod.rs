//! Limit laws, Wilks tests, spider confidence sets and bootstrap calibration.

mod bootstrap;
mod confidence;
mod laws;
mod wilks;

use thiserror::Error;

use crate::book::BookElError;
use crate::geometry::GeometryError;

pub use bootstrap::{
    bootstrap_calibrate, bootstrap_calibrate_with, bootstrap_statistics, bootstrap_test, threshold_from_statistics,
    BootstrapCalibration,
};
pub use confidence::{
    confidence_set_spider, write_profile_csv, ConfidenceOutput, ConfidenceSet1D, GridOptions, ProfileRow,
    Segment, SetLaws, TopologyCase,
};
pub use laws::{chi2_tail, LimitLaw};
pub use wilks::{
    asymptotic_law, data_driven_spine_law, wilks_test, wilks_test_with, Calibration, RegimeSource, SpineRegime,
    TestReport, HALF_STICKY_WARNING,
};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("degrees of freedom must be at least 1 (got {0})")]
    InvalidDegrees(u32),
    #[error("significance level must lie in (0, 1) (got {0})")]
    InvalidAlpha(f64),
    #[error("argument is NaN")]
    NotANumber,
    #[error("bootstrap size must be at least 1")]
    EmptyBootstrap,
    #[error("every bootstrap replicate was infeasible; the sample is degenerate")]
    AllReplicatesInfeasible,
    #[error("confidence set is empty: the threshold lies below the minimum of the profile")]
    EmptyConfidenceSet,
    #[error("confidence sets are only available on spiders (page dimension {0})")]
    NotASpider(usize),
    #[error("grid needs at least one point and a positive extent")]
    InvalidGrid,
    #[error(transparent)]
    Book(#[from] BookElError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, InferenceError>;
