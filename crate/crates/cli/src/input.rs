//! Parsing of command-line values: shapes, points and sample files.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use openbook_el::geometry::read_sample_csv;
use openbook_el::{BookPoint, BookShape, Page, Sample};

/// `L,p`, inline JSON such as `{"pages":3,"dim":1}`, or a path to a JSON file.
pub fn parse_shape(text: &str) -> Result<BookShape> {
    let trimmed = text.trim();
    if trimmed.starts_with('{') {
        return serde_json::from_str(trimmed).with_context(|| format!("invalid shape JSON `{trimmed}`"));
    }
    if let Some((l, p)) = trimmed.split_once(',') {
        let pages: usize = l.trim().parse().with_context(|| format!("invalid page count `{l}`"))?;
        let dim: usize = p.trim().parse().with_context(|| format!("invalid dimension `{p}`"))?;
        return Ok(BookShape::new(pages, dim)?);
    }
    let body = std::fs::read_to_string(trimmed).with_context(|| format!("cannot read shape file `{trimmed}`"))?;
    serde_json::from_str(&body).with_context(|| format!("invalid shape JSON in `{trimmed}`"))
}

/// `spine [t1 ...]`, `centre`, or `page<k> normal [t1 ...]` (`leg<k>` is a
/// synonym of `page<k>`). Tokens are separated by spaces or commas.
pub fn parse_point(text: &str, shape: &BookShape) -> Result<BookPoint> {
    let mut tokens = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty());
    let head = tokens.next().ok_or_else(|| anyhow!("empty point"))?.to_ascii_lowercase();
    let numbers = tokens
        .map(|t| t.parse::<f64>().with_context(|| format!("`{t}` is not a number in point `{text}`")))
        .collect::<Result<Vec<f64>>>()?;
    let point = if head == "spine" || head == "centre" || head == "center" {
        BookPoint::spine(numbers)?
    } else {
        let digits = head
            .strip_prefix("page")
            .or_else(|| head.strip_prefix("leg"))
            .ok_or_else(|| anyhow!("point `{text}` must start with `spine`, `page<k>` or `leg<k>`"))?;
        let number: usize = digits
            .parse()
            .with_context(|| format!("invalid page number in point `{text}`"))?;
        let page = Page::from_number(number).ok_or_else(|| anyhow!("page numbers start at 1"))?;
        let Some((&normal, tangential)) = numbers.split_first() else {
            bail!("point `{text}` needs a normal coordinate");
        };
        if normal <= 0.0 {
            bail!("point `{text}`: page points need a positive normal coordinate (use `spine` for the spine)");
        }
        BookPoint::on_page(page, normal, tangential.to_vec())?
    };
    point.check(shape)?;
    Ok(point)
}

pub fn read_sample(path: &Path, shape: BookShape) -> Result<Sample> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open sample `{}`", path.display()))?;
    read_sample_csv(file, shape).with_context(|| format!("invalid sample `{}`", path.display()))
}
