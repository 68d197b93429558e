//! File formats: points CSV (coordinates then weight, decimal or num/den
//! strings), range files (JSON array of range objects), tree containers.

use anyhow::{bail, Context, Result};
use num_rational::BigRational;
use polypart::numeric::{parse_rational_str, rational_to_string};
use polypart::polycore::RationalPoint;
use polypart::ranges::{RangeJson, SemialgebraicRange};
use polypart::tree::{PartitionTree, TreeJson};
use polypart::WeightedPointSet;
use std::fs;
use std::path::Path;

/// One point per row: d coordinate columns then a weight column.
pub fn read_points_csv(path: &Path) -> Result<WeightedPointSet> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read points file {}", path.display()))?;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            bail!(
                "{} line {lineno}: expected at least 2 comma-separated columns",
                path.display()
            );
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => bail!(
                "{} line {lineno}: {} columns, expected {w}",
                path.display(),
                fields.len()
            ),
            _ => {}
        }
        let mut values: Vec<BigRational> = Vec::with_capacity(fields.len());
        for (col, field) in fields.iter().enumerate() {
            let v = parse_rational_str(field).with_context(|| {
                format!(
                    "{} line {lineno}, column {}: invalid rational {field:?}",
                    path.display(),
                    col + 1
                )
            })?;
            values.push(v);
        }
        let weight = values.pop().unwrap();
        points.push(RationalPoint::new(values));
        weights.push(weight);
    }
    if points.is_empty() {
        bail!("{}: no points", path.display());
    }
    Ok(WeightedPointSet::new(points, weights)?)
}

pub fn write_points_csv(path: &Path, pts: &WeightedPointSet) -> Result<()> {
    let mut out = String::new();
    for i in 0..pts.len() {
        let p = pts.point(i);
        for c in p.coords() {
            out.push_str(&rational_to_string(c));
            out.push(',');
        }
        out.push_str(&rational_to_string(pts.weight(i)));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

/// A ranges file holds a JSON array of range objects (a single object is
/// also accepted).
pub fn read_ranges(path: &Path) -> Result<Vec<SemialgebraicRange>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read ranges file {}", path.display()))?;
    let jsons: Vec<RangeJson> = match serde_json::from_str::<Vec<RangeJson>>(&text) {
        Ok(v) => v,
        Err(list_err) => match serde_json::from_str::<RangeJson>(&text) {
            Ok(single) => vec![single],
            Err(_) => bail!(
                "{}: malformed ranges file: {list_err}",
                path.display()
            ),
        },
    };
    jsons
        .iter()
        .enumerate()
        .map(|(i, j)| {
            SemialgebraicRange::from_json(j)
                .with_context(|| format!("{}: range {i} invalid", path.display()))
        })
        .collect()
}

pub fn write_ranges(path: &Path, ranges: &[SemialgebraicRange]) -> Result<()> {
    let jsons: Vec<RangeJson> = ranges.iter().map(|r| r.to_json()).collect();
    fs::write(path, serde_json::to_string_pretty(&jsons)?)
        .with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_tree(path: &Path) -> Result<PartitionTree> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read tree file {}", path.display()))?;
    let json: TreeJson = serde_json::from_str(&text)
        .with_context(|| format!("{}: malformed tree file", path.display()))?;
    Ok(PartitionTree::from_json(&json)?)
}

pub fn write_tree(path: &Path, tree: &PartitionTree) -> Result<()> {
    fs::write(path, serde_json::to_string(&tree.to_json())?)
        .with_context(|| format!("cannot write {}", path.display()))
}
