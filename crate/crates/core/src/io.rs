//! CSV formats. Floats are written in shortest round-trip form, so a
//! dump read back is bit-identical.
//!
//! * grid CD: header `theta,H`
//! * sample CD: header `atom,weight`
//! * data: one value per row, optional header
//! * paired data / clouds: `k` columns per row, optional header
//! * u-values: header `u`

use std::io::{Read, Write};
use std::path::Path;

use crate::cd::{ConfidenceDistribution, Repr};
use crate::error::{Error, Result};

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r)
}

/// Numeric rows of width `k` (any width if `None`); a first row that does
/// not parse is taken as a header.
pub fn read_rows<R: Read>(r: R, k: Option<usize>) -> Result<(Option<Vec<String>>, Vec<Vec<f64>>)> {
    let mut header = None;
    let mut rows = Vec::new();
    let mut width = k;
    for (i, rec) in reader(r).records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) => {
                let w = *width.get_or_insert(v.len());
                if v.len() != w {
                    return Err(Error::InvalidData(format!(
                        "row {} has {} fields, expected {w}",
                        i + 1,
                        v.len()
                    )));
                }
                if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                    return Err(Error::InvalidData(format!("row {} holds non-finite value {bad}", i + 1)));
                }
                rows.push(v);
            }
            Err(_) if i == 0 => header = Some(rec.iter().map(str::to_owned).collect()),
            Err(e) => return Err(Error::InvalidData(format!("row {}: {e}", i + 1))),
        }
    }
    Ok((header, rows))
}

pub fn read_values<R: Read>(r: R) -> Result<Vec<f64>> {
    Ok(read_rows(r, Some(1))?.1.into_iter().map(|v| v[0]).collect())
}

pub fn read_pairs<R: Read>(r: R) -> Result<Vec<(f64, f64)>> {
    Ok(read_rows(r, Some(2))?.1.into_iter().map(|v| (v[0], v[1])).collect())
}

pub fn read_cd<R: Read>(r: R) -> Result<ConfidenceDistribution> {
    let (header, rows) = read_rows(r, Some(2))?;
    let header = header.ok_or_else(|| Error::InvalidData("CD file needs a header".into()))?;
    let (a, b): (Vec<f64>, Vec<f64>) = rows.into_iter().map(|v| (v[0], v[1])).unzip();
    match (header[0].as_str(), header[1].as_str()) {
        ("theta", "H") => ConfidenceDistribution::grid(a, b),
        ("atom", "weight") => ConfidenceDistribution::weighted_sample(a, b),
        (x, y) => Err(Error::InvalidData(format!(
            "unknown CD header `{x},{y}` (expected `theta,H` or `atom,weight`)"
        ))),
    }
}

pub fn read_cd_file(path: &Path) -> Result<ConfidenceDistribution> {
    read_cd(std::fs::File::open(path)?)
}

/// Writes a header and rows of floats.
pub fn write_table<W: Write, I>(w: W, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut wr = csv::Writer::from_writer(w);
    if !header.is_empty() {
        wr.write_record(header)?;
    }
    for r in rows {
        wr.write_record(r.iter().map(|v| v.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

/// Grid and sample CDs only; convert analytic CDs with `to_grid` first.
pub fn write_cd<W: Write>(w: W, h: &ConfidenceDistribution) -> Result<()> {
    match h.repr() {
        Repr::Grid(g) => write_table(
            w,
            &["theta", "H"],
            g.theta().iter().zip(g.values()).map(|(&a, &b)| vec![a, b]),
        ),
        Repr::WeightedSample(s) => write_table(
            w,
            &["atom", "weight"],
            s.atoms().iter().zip(s.weights()).map(|(&a, &b)| vec![a, b]),
        ),
        Repr::Analytic(_) => Err(Error::UnsupportedRepresentation("analytic")),
    }
}

pub fn write_cd_file(path: &Path, h: &ConfidenceDistribution) -> Result<()> {
    write_cd(std::fs::File::create(path)?, h)
}
