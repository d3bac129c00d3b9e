//! Confidence sets for the Fréchet mean on a spider.
//!
//! Each leg is profiled on a grid together with its spine end (the folded
//! statistic at `0+`, which differs from the spine value itself). The set is
//! the sub-level set of the profile, with interval ends refined by bisection
//! inside the grid cell where the profile crosses the threshold.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::laws::LimitLaw;
use super::wilks::{asymptotic_law, check_alpha, SpineRegime};
use super::{InferenceError, Result};
use crate::book::{el_book, BookElOptions};
use crate::el::{el_log_ratio_1d, ElOptions};
use crate::geometry::{BookPoint, Page, Regime, Sample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Grid points per leg, excluding the spine end.
    pub points: usize,
    /// Leg length covered by the grid; `None` means twice the largest
    /// observed leg coordinate.
    pub extent: Option<f64>,
    /// Width below which bisection of an interval end stops.
    pub tol: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            points: 512,
            extent: None,
            tol: 1e-7,
        }
    }
}

/// Laws used to threshold the leg profiles and the spine value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetLaws {
    pub leg: LimitLaw,
    pub spine: LimitLaw,
}

impl SetLaws {
    /// The laws a Wilks test would use at leg points and at the spine.
    pub fn for_sample(sample: &Sample, regime: Option<SpineRegime>) -> SetLaws {
        SetLaws {
            leg: asymptotic_law(sample, &BookPoint::leg(1, 1.0), None).0,
            spine: asymptotic_law(sample, &BookPoint::centre(), regime).0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub leg: Page,
    pub lower: f64,
    pub upper: f64,
    /// Whether the segment reaches the spine end of its leg (`lower = 0`).
    pub touches_spine: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopologyCase {
    /// One leg, away from the spine.
    #[serde(rename = "i")]
    I,
    /// One leg, attached to the spine.
    #[serde(rename = "ii")]
    Ii,
    /// Several legs but not all.
    #[serde(rename = "iii")]
    Iii,
    /// Every leg.
    #[serde(rename = "iv")]
    Iv,
    /// The spine point alone.
    #[serde(rename = "spine_only")]
    SpineOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSet1D {
    pub alpha: f64,
    pub segments: Vec<Segment>,
    pub includes_spine: bool,
    pub topology_case: TopologyCase,
    pub laws: SetLaws,
    #[serde(with = "crate::json")]
    pub leg_threshold: f64,
    #[serde(with = "crate::json")]
    pub spine_threshold: f64,
    /// Per leg, the level at which the leg threshold meets the statistic at
    /// the leg's spine end; the segment reaches the spine iff `alpha` is at
    /// most this level.
    pub crossing_levels: Vec<f64>,
}

impl ConfidenceSet1D {
    pub fn contains(&self, x: &BookPoint) -> bool {
        match x.page() {
            None => self.includes_spine,
            Some(k) => {
                let v = x.normal();
                self.segments
                    .iter()
                    .any(|s| s.leg == k && s.lower <= v && v <= s.upper)
            }
        }
    }
}

/// One profile value; `leg` is 1-based with `0` for the spine point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub leg: usize,
    pub grid_point: f64,
    #[serde(with = "crate::json")]
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceOutput {
    pub set: ConfidenceSet1D,
    pub profile: Vec<ProfileRow>,
}

fn leg_statistic(folded: &[f64], x: f64, opts: &ElOptions) -> Result<f64> {
    let r = el_log_ratio_1d(folded, x, opts).map_err(crate::book::BookElError::from)?;
    Ok(r.statistic())
}

fn refine(
    folded: &[f64],
    mut inside: f64,
    mut outside: f64,
    threshold: f64,
    tol: f64,
    opts: &ElOptions,
) -> Result<f64> {
    while (outside - inside).abs() > tol {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if leg_statistic(folded, mid, opts)? <= threshold {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    Ok(inside)
}

fn topology(segments: &[Segment], includes_spine: bool, legs: usize) -> Option<TopologyCase> {
    let mut touched: Vec<Page> = segments.iter().map(|s| s.leg).collect();
    touched.dedup();
    match touched.len() {
        0 if includes_spine => Some(TopologyCase::SpineOnly),
        0 => None,
        1 if includes_spine || segments.iter().any(|s| s.touches_spine) => Some(TopologyCase::Ii),
        1 => Some(TopologyCase::I),
        m if m == legs => Some(TopologyCase::Iv),
        _ => Some(TopologyCase::Iii),
    }
}

/// Confidence set `{x : -2 log R(x) <= threshold}` at level `1 - alpha`.
pub fn confidence_set_spider(
    sample: &Sample,
    alpha: f64,
    laws: &SetLaws,
    grid: &GridOptions,
) -> Result<ConfidenceOutput> {
    check_alpha(alpha)?;
    let shape = *sample.shape();
    if shape.dim() != 1 {
        return Err(InferenceError::NotASpider(shape.dim()));
    }
    let max_normal = sample.points().iter().map(|x| x.normal()).fold(0.0, f64::max);
    let extent = grid.extent.unwrap_or(if max_normal > 0.0 { 2.0 * max_normal } else { 1.0 });
    if grid.points == 0 || !(extent > 0.0 && extent.is_finite()) || !(grid.tol > 0.0) {
        return Err(InferenceError::InvalidGrid);
    }
    let leg_threshold = laws.leg.quantile(alpha)?;
    let spine_threshold = laws.spine.quantile(alpha)?;
    let opts = BookElOptions::default();
    let mean = sample.frechet_mean()?;

    let spine_stat = el_book(sample, &BookPoint::centre(), &opts)?.statistic();
    let mut profile = vec![ProfileRow {
        leg: 0,
        grid_point: 0.0,
        statistic: spine_stat,
    }];
    let mut segments = Vec::new();
    let mut crossing_levels = Vec::with_capacity(shape.pages());

    for k in shape.page_iter() {
        let folded = sample.signed_normals(k);
        let mut xs: Vec<f64> = (0..=grid.points)
            .map(|j| extent * j as f64 / grid.points as f64)
            .collect();
        if let Regime::NonSticky { page } = mean.regime {
            let m = mean.mean.normal();
            if page == k && m < extent {
                let at = xs.partition_point(|&x| x < m);
                if xs[at] != m {
                    xs.insert(at, m);
                }
            }
        }
        let stats = xs
            .iter()
            .map(|&x| leg_statistic(&folded, x, &opts.el))
            .collect::<Result<Vec<f64>>>()?;
        crossing_levels.push(laws.leg.tail(stats[0]));
        for (&x, &s) in xs.iter().zip(&stats) {
            profile.push(ProfileRow {
                leg: k.number(),
                grid_point: x,
                statistic: s,
            });
        }

        let inside: Vec<bool> = stats.iter().map(|&s| s <= leg_threshold).collect();
        let mut j = 0;
        while j < xs.len() {
            if !inside[j] {
                j += 1;
                continue;
            }
            let start = j;
            while j + 1 < xs.len() && inside[j + 1] {
                j += 1;
            }
            let lower = if start == 0 {
                0.0
            } else {
                refine(&folded, xs[start], xs[start - 1], leg_threshold, grid.tol, &opts.el)?
            };
            let upper = if j + 1 == xs.len() {
                xs[j]
            } else {
                refine(&folded, xs[j], xs[j + 1], leg_threshold, grid.tol, &opts.el)?
            };
            if upper > lower {
                segments.push(Segment {
                    leg: k,
                    lower,
                    upper,
                    touches_spine: start == 0,
                });
            }
            j += 1;
        }
    }

    let includes_spine = spine_stat <= spine_threshold;
    let topology_case =
        topology(&segments, includes_spine, shape.pages()).ok_or(InferenceError::EmptyConfidenceSet)?;
    Ok(ConfidenceOutput {
        set: ConfidenceSet1D {
            alpha,
            segments,
            includes_spine,
            topology_case,
            laws: *laws,
            leg_threshold,
            spine_threshold,
            crossing_levels,
        },
        profile,
    })
}

/// Writes the profile as `leg,grid_point,statistic` rows.
pub fn write_profile_csv<W: Write>(writer: W, rows: &[ProfileRow]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["leg", "grid_point", "statistic"])?;
    for r in rows {
        let stat = if r.statistic == f64::INFINITY {
            "inf".to_string()
        } else {
            r.statistic.to_string()
        };
        w.write_record([r.leg.to_string(), r.grid_point.to_string(), stat])?;
    }
    w.flush()?;
    Ok(())
}
