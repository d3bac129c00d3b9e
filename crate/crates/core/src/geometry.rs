//! Open books, their metric, the folding maps and sample Fréchet means.
//!
//! An open book with `L` pages of dimension `p` is `L` closed half-spaces
//! `R_{>=0} x R^{p-1}` glued along their common boundary, the spine. A point
//! on page `k` has a normal coordinate (distance from the spine) and `p - 1`
//! tangential coordinates; a spine point only has the tangential ones. The
//! `p = 1` book is the `L`-spider: half-lines (legs) joined at one point.
//!
//! Page indices are 0-based inside the library ([`Page::index`]) and 1-based
//! everywhere a human or another program sees them: `Display`, JSON and the
//! sample CSV ([`Page::number`]).

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("an open book needs at least 3 pages and dimension >= 1 (got pages={pages}, dim={dim})")]
    InvalidShape { pages: usize, dim: usize },
    #[error("page {page} does not exist in a book with {pages} pages")]
    PageOutOfRange { page: usize, pages: usize },
    #[error("point has {found} tangential coordinates, shape expects {expected}")]
    TangentialLength { expected: usize, found: usize },
    #[error("normal coordinate must be finite and >= 0 (got {0})")]
    InvalidNormal(f64),
    #[error("coordinates must be finite")]
    NonFinite,
    #[error("a sample needs at least one point")]
    EmptySample,
    #[error("shapes differ: {0} vs {1}")]
    ShapeMismatch(BookShape, BookShape),
    #[error("folded normal means are positive on more than one page ({pages:?}); input is corrupted")]
    AmbiguousMean { pages: Vec<usize> },
    #[error("sample CSV line {line}: {message}")]
    Csv { line: u64, message: String },
}

impl From<csv::Error> for GeometryError {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        GeometryError::Csv {
            line,
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Page of an open book. Stores the 0-based index; serializes 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Page(usize);

impl Page {
    pub const fn from_index(index: usize) -> Self {
        Page(index)
    }

    /// Builds a page from its 1-based number. Returns `None` for 0.
    pub fn from_number(number: usize) -> Option<Self> {
        number.checked_sub(1).map(Page)
    }

    pub const fn index(self) -> usize {
        self.0
    }

    pub const fn number(self) -> usize {
        self.0 + 1
    }
}

impl fmt::Display for Page {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl Serialize for Page {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u64(self.number() as u64)
    }
}

impl<'de> Deserialize<'de> for Page {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let n = u64::deserialize(d)?;
        Page::from_number(n as usize)
            .ok_or_else(|| serde::de::Error::custom("page numbers start at 1"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawShape")]
pub struct BookShape {
    pages: usize,
    dim: usize,
}

#[derive(Deserialize)]
struct RawShape {
    pages: usize,
    dim: usize,
}

impl TryFrom<RawShape> for BookShape {
    type Error = GeometryError;

    fn try_from(raw: RawShape) -> Result<Self> {
        BookShape::new(raw.pages, raw.dim)
    }
}

impl BookShape {
    pub fn new(pages: usize, dim: usize) -> Result<Self> {
        if pages < 3 || dim < 1 {
            return Err(GeometryError::InvalidShape { pages, dim });
        }
        Ok(BookShape { pages, dim })
    }

    /// The `L`-spider (`p = 1`).
    pub fn spider(legs: usize) -> Result<Self> {
        Self::new(legs, 1)
    }

    pub fn pages(&self) -> usize {
        self.pages
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spine_dim(&self) -> usize {
        self.dim - 1
    }

    pub fn page_iter(&self) -> impl Iterator<Item = Page> {
        (0..self.pages).map(Page)
    }
}

impl fmt::Display for BookShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{pages: {}, dim: {}}}", self.pages, self.dim)
    }
}

/// A location on the open book.
///
/// Constructors canonicalize: a page point with zero normal coordinate is
/// the spine point with the same tangential coordinates, so equality is
/// plain coordinate equality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "location", rename_all = "snake_case")]
pub enum BookPoint {
    PageInterior {
        page: Page,
        normal: f64,
        tangential: Vec<f64>,
    },
    Spine {
        tangential: Vec<f64>,
    },
}

impl BookPoint {
    pub fn on_page(page: Page, normal: f64, tangential: Vec<f64>) -> Result<Self> {
        if !normal.is_finite() || normal < 0.0 {
            return Err(GeometryError::InvalidNormal(normal));
        }
        if tangential.iter().any(|t| !t.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if normal == 0.0 {
            return Ok(BookPoint::Spine { tangential });
        }
        Ok(BookPoint::PageInterior {
            page,
            normal,
            tangential,
        })
    }

    pub fn spine(tangential: Vec<f64>) -> Result<Self> {
        if tangential.iter().any(|t| !t.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(BookPoint::Spine { tangential })
    }

    /// Point at distance `x` from the centre of a spider on 1-based leg `leg`.
    ///
    /// # Panics
    /// If `leg` is 0 or `x` is negative or non-finite.
    pub fn leg(leg: usize, x: f64) -> Self {
        let page = Page::from_number(leg).expect("legs are numbered from 1");
        Self::on_page(page, x, Vec::new()).expect("leg coordinate must be finite and >= 0")
    }

    /// The spider's centre.
    pub fn centre() -> Self {
        BookPoint::Spine {
            tangential: Vec::new(),
        }
    }

    pub fn page(&self) -> Option<Page> {
        match self {
            BookPoint::PageInterior { page, .. } => Some(*page),
            BookPoint::Spine { .. } => None,
        }
    }

    pub fn is_spine(&self) -> bool {
        matches!(self, BookPoint::Spine { .. })
    }

    /// Distance from the spine, `x^(0)`.
    pub fn normal(&self) -> f64 {
        match self {
            BookPoint::PageInterior { normal, .. } => *normal,
            BookPoint::Spine { .. } => 0.0,
        }
    }

    pub fn tangential(&self) -> &[f64] {
        match self {
            BookPoint::PageInterior { tangential, .. } | BookPoint::Spine { tangential } => {
                tangential
            }
        }
    }

    pub fn check(&self, shape: &BookShape) -> Result<()> {
        if let Some(page) = self.page() {
            if page.index() >= shape.pages {
                return Err(GeometryError::PageOutOfRange {
                    page: page.number(),
                    pages: shape.pages,
                });
            }
        }
        let found = self.tangential().len();
        if found != shape.spine_dim() {
            return Err(GeometryError::TangentialLength {
                expected: shape.spine_dim(),
                found,
            });
        }
        if let BookPoint::PageInterior { normal, .. } = self {
            if !normal.is_finite() || *normal <= 0.0 {
                return Err(GeometryError::InvalidNormal(*normal));
            }
        }
        if self.tangential().iter().any(|t| !t.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(())
    }

    /// `<F_k(x), e_k>`: the normal coordinate signed by whether `x` sits on `k`.
    pub fn signed_normal(&self, k: Page) -> f64 {
        match self {
            BookPoint::PageInterior { page, normal, .. } if *page == k => *normal,
            BookPoint::PageInterior { normal, .. } => -normal,
            BookPoint::Spine { .. } => 0.0,
        }
    }
}

impl fmt::Display for BookPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BookPoint::PageInterior {
                page,
                normal,
                tangential,
            } => {
                write!(f, "page{page} {normal}")?;
                for t in tangential {
                    write!(f, " {t}")?;
                }
                Ok(())
            }
            BookPoint::Spine { tangential } => {
                write!(f, "spine")?;
                for t in tangential {
                    write!(f, " {t}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    shape: BookShape,
    points: Vec<BookPoint>,
}

impl Sample {
    pub fn new(shape: BookShape, points: Vec<BookPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(GeometryError::EmptySample);
        }
        for p in &points {
            p.check(&shape)?;
        }
        Ok(Sample { shape, points })
    }

    /// Spider sample from `(leg, x)` pairs with 1-based legs; `x = 0` is the centre.
    pub fn spider(legs: usize, coords: &[(usize, f64)]) -> Result<Self> {
        let shape = BookShape::spider(legs)?;
        let points = coords
            .iter()
            .map(|&(leg, x)| {
                let page = Page::from_number(leg).ok_or(GeometryError::PageOutOfRange {
                    page: 0,
                    pages: legs,
                })?;
                BookPoint::on_page(page, x, Vec::new())
            })
            .collect::<Result<Vec<_>>>()?;
        Sample::new(shape, points)
    }

    pub fn shape(&self) -> &BookShape {
        &self.shape
    }

    pub fn points(&self) -> &[BookPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest absolute coordinate, or 1 when every coordinate is zero.
    pub fn scale(&self) -> f64 {
        let m = self
            .points
            .iter()
            .flat_map(|p| std::iter::once(p.normal()).chain(p.tangential().iter().copied()))
            .fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }

    /// `<F_k(x_i), e_k>` for every observation.
    pub fn signed_normals(&self, k: Page) -> Vec<f64> {
        self.points.iter().map(|x| x.signed_normal(k)).collect()
    }

    /// Sample means of `<F_k(x_i), e_k>`, one per page.
    pub fn folded_normal_means(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.shape
            .page_iter()
            .map(|k| self.points.iter().map(|x| x.signed_normal(k)).sum::<f64>() / n)
            .collect()
    }

    /// Folds every observation with `F_k`.
    pub fn folded(&self, k: Page) -> Vec<Vec<f64>> {
        self.points.iter().map(|x| fold_unchecked(k, x)).collect()
    }

    /// Spine projections `P_s(x_i)`.
    pub fn projected(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|x| x.tangential().to_vec()).collect()
    }

    pub fn spine_mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut acc = vec![0.0; self.shape.spine_dim()];
        for x in &self.points {
            for (a, t) in acc.iter_mut().zip(x.tangential()) {
                *a += t;
            }
        }
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// A sample with the same shape made of the points at `indices`.
    pub fn resample(&self, indices: &[usize]) -> Sample {
        assert!(!indices.is_empty());
        Sample {
            shape: self.shape,
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
        }
    }
}

fn check_pair(a: &BookPoint, b: &BookPoint, shape: &BookShape) -> Result<()> {
    a.check(shape)?;
    b.check(shape)
}

/// Intrinsic distance on the open book.
///
/// Points on the same page, or with either on the spine, are compared as
/// plain vectors of `R^p`; otherwise `b` is reflected across the spine first.
pub fn distance(a: &BookPoint, b: &BookPoint, shape: &BookShape) -> Result<f64> {
    check_pair(a, b, shape)?;
    let same_side = match (a.page(), b.page()) {
        (Some(i), Some(j)) => i == j,
        _ => true,
    };
    let dn = if same_side {
        a.normal() - b.normal()
    } else {
        a.normal() + b.normal()
    };
    let tang: f64 = a
        .tangential()
        .iter()
        .zip(b.tangential())
        .map(|(s, t)| (s - t) * (s - t))
        .sum();
    Ok((dn * dn + tang).sqrt())
}

fn fold_unchecked(k: Page, x: &BookPoint) -> Vec<f64> {
    let mut v = Vec::with_capacity(1 + x.tangential().len());
    v.push(x.signed_normal(k));
    v.extend_from_slice(x.tangential());
    v
}

/// Folding map `F_k`: identity on page `k`, reflection on every other page.
pub fn fold(k: Page, x: &BookPoint, shape: &BookShape) -> Result<Vec<f64>> {
    if k.index() >= shape.pages {
        return Err(GeometryError::PageOutOfRange {
            page: k.number(),
            pages: shape.pages,
        });
    }
    x.check(shape)?;
    Ok(fold_unchecked(k, x))
}

/// Spine projection `P_s`. Empty for the spider.
pub fn project_spine(x: &BookPoint) -> Vec<f64> {
    x.tangential().to_vec()
}

/// Location regime of a Fréchet mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    NonSticky { page: Page },
    Sticky,
    HalfSticky { page: Page },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanReport {
    pub mean: BookPoint,
    pub regime: Regime,
    pub folded_normal_means: Vec<f64>,
}

/// Default stickiness tolerance for data of the given scale.
pub fn default_tolerance(scale: f64) -> f64 {
    1e-10 * scale
}

/// Locates and classifies the Fréchet mean from its folded normal means
/// `m_k` and the spine coordinates of the mean.
///
/// `m_k > tol` puts the mean at normal `m_k` on page `k`; all `m_k < -tol`
/// is sticky; `|m_k| <= tol` with the rest negative is half-sticky. When
/// several `m_k` are within `tol` of zero (only possible when no mass lies
/// off those pages) the lowest such page is reported as half-sticky.
pub fn classify_mean(
    folded_normal_means: Vec<f64>,
    spine_mean: Vec<f64>,
    tol: f64,
) -> Result<MeanReport> {
    let positive: Vec<usize> = folded_normal_means
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > tol)
        .map(|(k, _)| k)
        .collect();
    if positive.len() > 1 {
        return Err(GeometryError::AmbiguousMean {
            pages: positive.iter().map(|k| k + 1).collect(),
        });
    }
    if let Some(&k) = positive.first() {
        let page = Page(k);
        return Ok(MeanReport {
            mean: BookPoint::on_page(page, folded_normal_means[k], spine_mean)?,
            regime: Regime::NonSticky { page },
            folded_normal_means,
        });
    }
    let regime = match folded_normal_means.iter().position(|m| m.abs() <= tol) {
        Some(k) => Regime::HalfSticky { page: Page(k) },
        None => Regime::Sticky,
    };
    Ok(MeanReport {
        mean: BookPoint::spine(spine_mean)?,
        regime,
        folded_normal_means,
    })
}

/// Sample Fréchet mean with its stickiness classification.
///
/// `tol` guards the sign tests against rounding; see [`default_tolerance`].
pub fn sample_frechet_mean(sample: &Sample, tol: f64) -> Result<MeanReport> {
    classify_mean(sample.folded_normal_means(), sample.spine_mean(), tol)
}

impl Sample {
    /// [`sample_frechet_mean`] with the default tolerance.
    pub fn frechet_mean(&self) -> Result<MeanReport> {
        sample_frechet_mean(self, default_tolerance(self.scale()))
    }
}

/// Empirical Fréchet function `x -> (1/n) sum d(x, x_i)^2`.
pub fn frechet_function(sample: &Sample, x: &BookPoint) -> Result<f64> {
    let mut acc = 0.0;
    for xi in sample.points() {
        let d = distance(x, xi, sample.shape())?;
        acc += d * d;
    }
    Ok(acc / sample.len() as f64)
}

/// Reads the sample CSV format: header `page,normal,t1,...,t{p-1}`, one row
/// per observation, `page = 0` for spine points (whose normal must be 0).
pub fn read_sample_csv<R: Read>(reader: R, shape: BookShape) -> Result<Sample> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = expected_header(&shape);
    let found: Vec<&str> = headers.iter().collect();
    if found != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(GeometryError::Csv {
            line: 1,
            message: format!(
                "header must be `{}` (got `{}`)",
                expected.join(","),
                found.join(",")
            ),
        });
    }
    let mut points = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| GeometryError::Csv { line, message };
        let field = |i: usize| -> Result<f64> {
            let raw = &record[i];
            raw.parse::<f64>()
                .map_err(|_| bad(format!("`{raw}` is not a number")))
        };
        let page: usize = record[0]
            .parse()
            .map_err(|_| bad(format!("page `{}` is not a non-negative integer", &record[0])))?;
        let normal = field(1)?;
        let tangential = (2..record.len()).map(field).collect::<Result<Vec<_>>>()?;
        let point = if page == 0 {
            if normal != 0.0 {
                return Err(bad("spine rows (page 0) must have normal 0".into()));
            }
            BookPoint::spine(tangential)
        } else {
            BookPoint::on_page(Page(page - 1), normal, tangential)
        };
        let point = point.map_err(|e| bad(e.to_string()))?;
        point.check(&shape).map_err(|e| bad(e.to_string()))?;
        points.push(point);
    }
    Sample::new(shape, points)
}

fn expected_header(shape: &BookShape) -> Vec<String> {
    let mut h = vec!["page".to_string(), "normal".to_string()];
    h.extend((1..shape.dim).map(|i| format!("t{i}")));
    h
}

pub fn write_sample_csv<W: Write>(writer: W, sample: &Sample) -> Result<()> {
    write_points_csv(writer, sample.shape(), sample.points())
}

pub fn write_points_csv<W: Write>(writer: W, shape: &BookShape, points: &[BookPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(expected_header(shape))?;
    for p in points {
        let mut row = vec![
            p.page().map(|k| k.number()).unwrap_or(0).to_string(),
            p.normal().to_string(),
        ];
        row.extend(p.tangential().iter().map(|t| t.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| GeometryError::Csv {
        line: 0,
        message: e.to_string(),
    })?;
    Ok(())
}
