use std::io::{Read, Write};

use super::PairedDataset;
use crate::error::{input, Result};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Columns `x1..xm`, then `y1..yn` (or `px_r_c` for images), `group`, and
/// `outcome` when the dataset carries one.
pub fn write_dataset<W: Write>(ds: &PairedDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=ds.char_dim()).map(|j| format!("x{j}")).collect();
    match ds.image_shape {
        Some((h, wd)) => {
            for r in 0..h {
                for c in 0..wd {
                    header.push(format!("px_{r}_{c}"));
                }
            }
        }
        None => header.extend((1..=ds.expr_dim()).map(|j| format!("y{j}"))),
    }
    header.push("group".into());
    if ds.outcomes.is_some() {
        header.push("outcome".into());
    }
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = ds.characteristics[i]
            .iter()
            .chain(&ds.expressions[i])
            .map(|&v| format_float(v))
            .collect();
        rec.push(ds.groups[i].to_string());
        if let Some(o) = &ds.outcomes {
            rec.push(o[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

enum Column {
    Characteristic,
    Expression,
    Pixel(usize, usize),
    Group,
    Outcome,
}

fn classify(name: &str) -> Option<Column> {
    let name = name.trim();
    if name == "group" {
        return Some(Column::Group);
    }
    if name == "outcome" {
        return Some(Column::Outcome);
    }
    if let Some(rest) = name.strip_prefix("px_") {
        let (r, c) = rest.split_once('_')?;
        return Some(Column::Pixel(r.parse().ok()?, c.parse().ok()?));
    }
    let digits_after = |p: &str| {
        name.strip_prefix(p)
            .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
    };
    if digits_after("x") {
        Some(Column::Characteristic)
    } else if digits_after("y") {
        Some(Column::Expression)
    } else {
        None
    }
}

/// Reads the schema written by [`write_dataset`]. Unknown columns are
/// rejected; the group count is the largest label present.
pub fn read_dataset<R: Read>(source: R) -> Result<PairedDataset> {
    let mut rdr = csv::Reader::from_reader(source);
    let headers = rdr.headers()?.clone();
    let mut kinds = Vec::with_capacity(headers.len());
    for name in headers.iter() {
        kinds.push(
            classify(name).ok_or_else(|| input(format!("unrecognised CSV column `{name}`")))?,
        );
    }
    if !kinds.iter().any(|k| matches!(k, Column::Group)) {
        return Err(input("CSV has no `group` column"));
    }
    let pixels: Vec<(usize, usize)> = kinds
        .iter()
        .filter_map(|k| match k {
            Column::Pixel(r, c) => Some((*r, *c)),
            _ => None,
        })
        .collect();
    let image_shape = if pixels.is_empty() {
        None
    } else {
        let h = pixels.iter().map(|p| p.0).max().unwrap_or(0) + 1;
        let w = pixels.iter().map(|p| p.1).max().unwrap_or(0) + 1;
        if pixels.len() != h * w || pixels.iter().enumerate().any(|(i, &(r, c))| r * w + c != i) {
            return Err(input(
                "pixel columns must cover the grid in row-major order",
            ));
        }
        Some((h, w))
    };
    let has_outcome = kinds.iter().any(|k| matches!(k, Column::Outcome));

    let mut characteristics = Vec::new();
    let mut expressions = Vec::new();
    let mut groups = Vec::new();
    let mut outcomes = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (kind, field) in kinds.iter().zip(rec.iter()) {
            let parse_f = || {
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| input(format!("data row {}: `{field}` is not a number", line + 1)))
            };
            match kind {
                Column::Characteristic => x.push(parse_f()?),
                Column::Expression | Column::Pixel(..) => y.push(parse_f()?),
                Column::Group => groups.push(field.trim().parse::<usize>().map_err(|_| {
                    input(format!("data row {}: bad group label `{field}`", line + 1))
                })?),
                Column::Outcome => {
                    outcomes.push(field.trim().parse::<u8>().map_err(|_| {
                        input(format!("data row {}: bad outcome `{field}`", line + 1))
                    })?)
                }
            }
        }
        characteristics.push(x);
        expressions.push(y);
    }
    let group_count = groups.iter().copied().max().unwrap_or(0);
    let mut ds = PairedDataset::new(characteristics, expressions, groups, group_count)?;
    if let Some((h, w)) = image_shape {
        ds = ds.with_image_shape(h, w)?;
    }
    if has_outcome {
        ds = ds.with_outcomes(outcomes)?;
    }
    Ok(ds)
}
