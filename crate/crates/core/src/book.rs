//! Empirical likelihood for the Fréchet mean on an open book.
//!
//! Off the spine the problem is the Euclidean one for the folded data
//! `F_k(x_i)`. On the spine the Fréchet-mean conditions are one moment
//! equality (`P_s`) plus one inequality per page, and the inequality problem
//! is solved by a case split: first without the inequalities, and if one of
//! them is violated by that solution, as the best of the per-page problems
//! where that page's inequality holds with equality.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::el::{el_log_ratio, el_log_ratio_1d, ElError, ElOptions, ElResult, ElStatus};
use crate::geometry::{BookPoint, GeometryError, Page, Sample};

#[derive(Debug, Error)]
pub enum BookElError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    El(#[from] ElError),
    #[error("the spider routine needs page dimension 1 (got {0})")]
    NotASpider(usize),
}

pub type Result<T> = std::result::Result<T, BookElError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BookElOptions {
    pub el: ElOptions,
    /// A violation check counts as satisfied when it is `< -check_tol`.
    pub check_tol: f64,
}

impl Default for BookElOptions {
    fn default() -> Self {
        BookElOptions {
            el: ElOptions::default(),
            check_tol: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpineCase {
    Unconstrained,
    MaxOverPages,
}

/// How a spine log-ratio was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpineElBreakdown {
    #[serde(with = "crate::json")]
    pub unconstrained_log_ratio: f64,
    /// `sum_i p_i^[0] <F_j(x_i), e_j>` for each page `j`.
    #[serde(with = "crate::json::vec")]
    pub violation_checks: Vec<f64>,
    /// Per-page equality-constrained log-ratios; empty in the unconstrained case.
    #[serde(with = "crate::json::vec")]
    pub per_page_log_ratios: Vec<f64>,
    pub chosen_case: SpineCase,
}

fn folded_1d(sample: &Sample, k: Page) -> Vec<f64> {
    sample.signed_normals(k)
}

fn el_on_page(sample: &Sample, k: Page, normal: f64, tangential: &[f64], opts: &BookElOptions) -> Result<ElResult> {
    if sample.shape().dim() == 1 {
        return Ok(el_log_ratio_1d(&folded_1d(sample, k), normal, &opts.el)?);
    }
    let mut target = Vec::with_capacity(1 + tangential.len());
    target.push(normal);
    target.extend_from_slice(tangential);
    Ok(el_log_ratio(&sample.folded(k), &target, &opts.el)?)
}

/// EL log-ratio of the Fréchet mean at `x`.
pub fn el_book(sample: &Sample, x: &BookPoint, opts: &BookElOptions) -> Result<ElResult> {
    x.check(sample.shape())?;
    match x {
        BookPoint::PageInterior {
            page,
            normal,
            tangential,
        } => el_on_page(sample, *page, *normal, tangential, opts),
        BookPoint::Spine { tangential } => Ok(el_spine(sample, tangential, opts)?.0),
    }
}

/// EL log-ratio at the spine point with tangential coordinates `x1`.
///
/// The breakdown is `None` when the problem without page inequalities is
/// already infeasible (or on its boundary), in which case the result is too.
pub fn el_spine(
    sample: &Sample,
    x1: &[f64],
    opts: &BookElOptions,
) -> Result<(ElResult, Option<SpineElBreakdown>)> {
    let spine = BookPoint::spine(x1.to_vec())?;
    spine.check(sample.shape())?;
    let unconstrained = el_log_ratio(&sample.projected(), x1, &opts.el)?;
    if unconstrained.status != ElStatus::Interior {
        return Ok((unconstrained, None));
    }
    let weights = unconstrained
        .weights
        .as_ref()
        .expect("interior solutions carry weights");
    let shape = sample.shape();
    let checks: Vec<f64> = shape
        .page_iter()
        .map(|j| {
            sample
                .points()
                .iter()
                .zip(weights)
                .map(|(x, p)| p * x.signed_normal(j))
                .sum()
        })
        .collect();
    if checks.iter().all(|&c| c < -opts.check_tol) {
        let breakdown = SpineElBreakdown {
            unconstrained_log_ratio: unconstrained.log_ratio,
            violation_checks: checks,
            per_page_log_ratios: Vec::new(),
            chosen_case: SpineCase::Unconstrained,
        };
        return Ok((unconstrained, Some(breakdown)));
    }
    let per_page = shape
        .page_iter()
        .map(|j| el_on_page(sample, j, 0.0, x1, opts))
        .collect::<Result<Vec<_>>>()?;
    let best = per_page
        .iter()
        .enumerate()
        .fold(0, |best, (j, r)| if r.log_ratio > per_page[best].log_ratio { j } else { best });
    let breakdown = SpineElBreakdown {
        unconstrained_log_ratio: unconstrained.log_ratio,
        violation_checks: checks,
        per_page_log_ratios: per_page.iter().map(|r| r.log_ratio).collect(),
        chosen_case: SpineCase::MaxOverPages,
    };
    Ok((per_page[best].clone(), Some(breakdown)))
}

/// EL on a spider by the direct two-case procedure: folded scalar EL off
/// the centre; at the centre, uniform weights when every leg's folded mean
/// is negative, otherwise the problem with `sum p_i F_k(x_i) = 0` for the leg
/// whose folded mean is non-negative.
pub fn el_spider(sample: &Sample, x: &BookPoint, opts: &BookElOptions) -> Result<ElResult> {
    let dim = sample.shape().dim();
    if dim != 1 {
        return Err(BookElError::NotASpider(dim));
    }
    x.check(sample.shape())?;
    match x.page() {
        Some(k) => Ok(el_log_ratio_1d(&folded_1d(sample, k), x.normal(), &opts.el)?),
        None => {
            let n = sample.len() as f64;
            let leg = sample
                .shape()
                .page_iter()
                .find(|&k| folded_1d(sample, k).iter().sum::<f64>() / n >= 0.0);
            match leg {
                None => Ok(ElResult::uniform(sample.len(), 1)),
                Some(k) => Ok(el_log_ratio_1d(&folded_1d(sample, k), 0.0, &opts.el)?),
            }
        }
    }
}
