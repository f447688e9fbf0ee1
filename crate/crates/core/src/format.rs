//! Text formats: distance matrices (`n`, then `n` rows) and point clouds
//! (`id x1 ... xd` per line, Euclidean distances).

use std::fmt::Write as _;

use thiserror::Error;

use crate::instances::euclidean_metric;
use crate::metric::{Metric, MetricError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse { line, message: message.into() }
}

/// Nonempty lines with their 1-based line numbers; `#` starts a comment.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn number(line: usize, token: &str) -> Result<f64, FormatError> {
    token.parse::<f64>().map_err(|_| parse_err(line, format!("not a number: {token:?}")))
}

/// Writes values with the shortest representation that parses back exactly.
pub fn write_metric(m: &Metric) -> String {
    let n = m.n();
    let mut out = format!("{n}\n");
    for i in 0..n {
        let row = m.row(i);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_metric(text: &str) -> Result<Metric, FormatError> {
    let mut lines = content_lines(text);
    let (first, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let n: usize = header.parse().map_err(|_| parse_err(first, format!("expected point count, got {header:?}")))?;
    if n == 0 {
        return Err(parse_err(first, "point count must be positive"));
    }
    let mut flat = Vec::with_capacity(n * n);
    let mut last = first;
    for (row, (line, content)) in lines.by_ref().take(n).enumerate() {
        last = line;
        let before = flat.len();
        for tok in content.split_whitespace() {
            flat.push(number(line, tok)?);
        }
        if flat.len() - before != n {
            return Err(parse_err(line, format!("row {row} has {} entries, expected {n}", flat.len() - before)));
        }
    }
    if flat.len() != n * n {
        return Err(parse_err(last, format!("expected {n} rows, found {}", flat.len() / n)));
    }
    if let Some((line, _)) = lines.next() {
        return Err(parse_err(line, "trailing content after the matrix"));
    }
    Ok(Metric::from_flat(n, &flat)?)
}

pub fn write_points(points: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for (id, p) in points.iter().enumerate() {
        write!(out, "{id}").unwrap();
        for x in p {
            write!(out, " {x}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Points indexed by id. Ids must be exactly `0..n` (in any order) and every
/// point must have the same dimension.
pub fn parse_points(text: &str) -> Result<Vec<Vec<f64>>, FormatError> {
    let mut slots: Vec<Option<Vec<f64>>> = Vec::new();
    let mut dim = None;
    for (line, content) in content_lines(text) {
        let mut toks = content.split_whitespace();
        let id_tok = toks.next().expect("nonempty line");
        let id: usize = id_tok.parse().map_err(|_| parse_err(line, format!("bad point id {id_tok:?}")))?;
        let coords = toks.map(|t| number(line, t)).collect::<Result<Vec<_>, _>>()?;
        if coords.is_empty() {
            return Err(parse_err(line, "point has no coordinates"));
        }
        if *dim.get_or_insert(coords.len()) != coords.len() {
            return Err(parse_err(line, format!("dimension {} differs from {}", coords.len(), dim.unwrap())));
        }
        if id >= slots.len() {
            slots.resize(id + 1, None);
        }
        if slots[id].replace(coords).is_some() {
            return Err(parse_err(line, format!("duplicate point id {id}")));
        }
    }
    if slots.is_empty() {
        return Err(parse_err(1, "empty input"));
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(id, p)| p.ok_or_else(|| parse_err(0, format!("missing point id {id}"))))
        .collect()
}

pub fn parse_point_metric(text: &str) -> Result<Metric, FormatError> {
    Ok(euclidean_metric(&parse_points(text)?)?)
}

/// Reads either format: a lone integer on the first content line marks a
/// matrix, anything else a point cloud.
pub fn parse_any(text: &str) -> Result<Metric, FormatError> {
    let first = content_lines(text).next().map(|(_, l)| l.split_whitespace().count());
    match first {
        Some(1) => parse_metric(text),
        Some(_) => parse_point_metric(text),
        None => Err(parse_err(1, "empty input")),
    }
}
