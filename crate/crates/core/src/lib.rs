//! Empirical likelihood inference for Fréchet means on open books and spiders.
//!
//! Modules, bottom up:
//!
//! - [`geometry`]: open books, the intrinsic metric, folding maps, sample
//!   Fréchet means and their sticky / half-sticky / non-sticky regime.
//! - [`el`]: Euclidean empirical likelihood for a mean (dual Newton solver).
//! - [`book`]: EL on the open book, off and on the spine.
//! - [`inference`]: limit laws, Wilks tests, spider confidence sets and
//!   bootstrap calibration.
//! - [`simlab`]: exponential mixtures on the 3-spider and the Monte Carlo
//!   error-rate experiments.
//! - [`treeio`]: Newick input for 3-leaf trees mapped onto the 3-spider.

pub mod book;
pub mod el;
pub mod geometry;
pub mod inference;
pub mod json;
pub mod rng;
pub mod simlab;
pub mod treeio;

pub use book::{el_book, el_spider, el_spine, BookElError, BookElOptions, SpineCase, SpineElBreakdown};
pub use el::{el_log_ratio, el_log_ratio_1d, el_log_ratio_with_equality, ElError, ElOptions, ElResult, ElStatus};
pub use geometry::{
    distance, fold, project_spine, sample_frechet_mean, BookPoint, BookShape, GeometryError, MeanReport, Page,
    Regime, Sample,
};
