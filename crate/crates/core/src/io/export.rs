//! CSV writers and loaders. Floats are written in Rust's shortest
//! round-trip form, so `load(write(x)) == x` bit for bit.

use std::io::{Read, Write};

use serde::Serialize;

use crate::control::ControlWord;
use crate::error::{Error, Result};
use crate::funnel::{BundlePaths, FunnelCloud, TrajectoryBundle};
use crate::metrics::DistanceReport;
use crate::sphere::SigmaNet;

fn columns(prefix: &str, k: usize) -> impl Iterator<Item = String> + '_ {
    (1..=k).map(move |i| format!("{prefix}{i}"))
}

fn parse_f64(s: &str, line: u64) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::input(format!("CSV line {line}: `{s}` is not a number")))
}

fn parse_usize(s: &str, line: u64) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::input(format!("CSV line {line}: `{s}` is not an index")))
}

/// Records tagged with their line numbers.
type Rows = Vec<(u64, Vec<String>)>;

/// Header and numeric rows of a CSV file.
fn read_numeric<R: Read>(input: R) -> Result<(Vec<String>, Rows)> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok((header, rows))
}

pub fn write_net_csv<W: Write>(net: &SigmaNet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string()];
    header.extend(columns("b", net.m));
    w.write_record(&header)?;
    for (k, b) in net.points.iter().enumerate() {
        let mut rec = vec![k.to_string()];
        rec.extend(b.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_net_csv<R: Read>(input: R) -> Result<Vec<Vec<f64>>> {
    let (_, rows) = read_numeric(input)?;
    rows.iter()
        .map(|(line, r)| r[1..].iter().map(|s| parse_f64(s, *line)).collect())
        .collect()
}

pub fn write_words_csv<W: Write>(
    words: impl Iterator<Item = ControlWord>,
    n_steps: usize,
    out: W,
) -> Result<u64> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string()];
    header.extend(columns("j", n_steps));
    header.extend(columns("l", n_steps));
    w.write_record(&header)?;
    let mut count = 0u64;
    for (k, word) in words.enumerate() {
        let mut rec = vec![k.to_string()];
        rec.extend(word.magnitudes.iter().map(u32::to_string));
        rec.extend(word.directions.iter().map(u32::to_string));
        w.write_record(&rec)?;
        count += 1;
    }
    w.flush()?;
    Ok(count)
}

pub fn load_words_csv<R: Read>(input: R) -> Result<Vec<ControlWord>> {
    let (header, rows) = read_numeric(input)?;
    let n = (header.len() - 1) / 2;
    rows.iter()
        .map(|(line, r)| {
            let idx = |s: &String| parse_usize(s, *line).map(|v| v as u32);
            Ok(ControlWord {
                magnitudes: r[1..=n].iter().map(idx).collect::<Result<_>>()?,
                directions: r[n + 1..].iter().map(idx).collect::<Result<_>>()?,
            })
        })
        .collect()
}

/// One sample of one trajectory in a bundle export.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleRow {
    pub word_index: usize,
    pub t: f64,
    pub x: Vec<f64>,
}

/// Euler bundles export their nodes; oracle bundles every sample.
pub fn write_bundle_csv<W: Write>(bundle: &TrajectoryBundle, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["word_index".to_string(), "t".to_string()];
    header.extend(columns("x", bundle.dim));
    w.write_record(&header)?;
    let mut emit = |k: usize, t: f64, x: &[f64]| -> Result<()> {
        let mut rec = vec![k.to_string(), t.to_string()];
        rec.extend(x.iter().map(f64::to_string));
        w.write_record(&rec)?;
        Ok(())
    };
    match &bundle.paths {
        BundlePaths::Euler(v) => {
            for z in v {
                for i in 0..=z.steps {
                    emit(z.word_index, z.time(i), z.node(i))?;
                }
            }
        }
        BundlePaths::Oracle(v) => {
            for x in v {
                for (k, &t) in x.times.iter().enumerate() {
                    emit(x.word_index, t, x.state(k))?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_bundle_csv<R: Read>(input: R) -> Result<Vec<BundleRow>> {
    let (_, rows) = read_numeric(input)?;
    rows.iter()
        .map(|(line, r)| {
            Ok(BundleRow {
                word_index: parse_usize(&r[0], *line)?,
                t: parse_f64(&r[1], *line)?,
                x: r[2..]
                    .iter()
                    .map(|s| parse_f64(s, *line))
                    .collect::<Result<_>>()?,
            })
        })
        .collect()
}

pub fn write_funnel_csv<W: Write>(cloud: &FunnelCloud, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["i".to_string(), "t".to_string()];
    header.extend(columns("x", cloud.dim));
    w.write_record(&header)?;
    for (i, (t, slice)) in cloud.times.iter().zip(&cloud.slices).enumerate() {
        for z in slice {
            let mut rec = vec![i.to_string(), t.to_string()];
            rec.extend(z.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows are grouped by their `i` column; empty slices are not representable
/// and cannot occur in a built funnel.
pub fn load_funnel_csv<R: Read>(input: R) -> Result<FunnelCloud> {
    let (header, rows) = read_numeric(input)?;
    if header.len() < 3 || header[0] != "i" || header[1] != "t" {
        return Err(Error::input("funnel CSV needs columns i, t, x1..xn"));
    }
    let dim = header.len() - 2;
    let mut cloud = FunnelCloud {
        dim,
        times: Vec::new(),
        slices: Vec::new(),
    };
    for (line, r) in &rows {
        let i = parse_usize(&r[0], *line)?;
        let t = parse_f64(&r[1], *line)?;
        let x: Vec<f64> = r[2..]
            .iter()
            .map(|s| parse_f64(s, *line))
            .collect::<Result<_>>()?;
        if i == cloud.times.len() {
            cloud.times.push(t);
            cloud.slices.push(Vec::new());
        } else if i + 1 != cloud.times.len() || cloud.times[i] != t {
            return Err(Error::input(format!(
                "CSV line {line}: funnel rows out of order"
            )));
        }
        cloud.slices[i].push(x);
    }
    Ok(cloud)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRow {
    pub metric: String,
    pub forward: f64,
    pub backward: f64,
    pub hausdorff: f64,
    pub forward_a: usize,
    pub forward_b: usize,
    pub backward_b: usize,
    pub backward_a: usize,
}

impl DistanceRow {
    pub fn new(metric: impl Into<String>, r: &DistanceReport) -> Self {
        DistanceRow {
            metric: metric.into(),
            forward: r.forward,
            backward: r.backward,
            hausdorff: r.hausdorff,
            forward_a: r.forward_witness.0,
            forward_b: r.forward_witness.1,
            backward_b: r.backward_witness.0,
            backward_a: r.backward_witness.1,
        }
    }
}

pub fn write_distance_csv<W: Write>(rows: &[DistanceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
