//! Plain-text keypoint and descriptor files.
//!
//! Descriptor lines are `x y sigma orientation hex`, keypoint lines are
//! `x y sigma`. Reals are written in Rust's shortest round-trip form so a
//! parse of a written file reproduces the records exactly. Lines starting
//! with `#` and blank lines are ignored on input.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::freak::FreakDescriptor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: usize,
    pub y: usize,
    pub sigma: f64,
}

impl Keypoint {
    pub fn new(x: usize, y: usize, sigma: f64) -> Self {
        Self { x, y, sigma }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorRecord {
    pub keypoint: Keypoint,
    /// Radians in `[-π, π)`.
    pub orientation: f64,
    pub bits: FreakDescriptor,
}

/// Write one `x y sigma orientation hex` line per record. Returns bytes written.
pub fn write_descriptor_file(records: &[DescriptorRecord], mut sink: impl Write) -> Result<usize> {
    let mut written = 0;
    for r in records {
        let line = format!(
            "{} {} {} {} {}\n",
            r.keypoint.x,
            r.keypoint.y,
            r.keypoint.sigma,
            r.orientation,
            r.bits.to_hex()
        );
        sink.write_all(line.as_bytes())?;
        written += line.len();
    }
    sink.flush()?;
    Ok(written)
}

pub fn parse_descriptor_file(source: impl BufRead) -> Result<Vec<DescriptorRecord>> {
    parse_lines(source, |lineno, fields| {
        if fields.len() != 5 {
            return Err(Error::parse(
                lineno,
                format!("expected 5 fields, found {}", fields.len()),
            ));
        }
        let keypoint = parse_keypoint_fields(lineno, &fields[..3])?;
        let orientation = parse_real(lineno, fields[3], "orientation")?;
        if !(-PI..PI).contains(&orientation) {
            return Err(Error::parse(lineno, "orientation outside [-pi, pi)"));
        }
        let bits = FreakDescriptor::from_hex(fields[4]).map_err(|e| Error::parse(lineno, e.to_string()))?;
        Ok(DescriptorRecord {
            keypoint,
            orientation,
            bits,
        })
    })
}

/// Write one `x y sigma` line per keypoint. Returns bytes written.
pub fn write_keypoint_file(keypoints: &[Keypoint], mut sink: impl Write) -> Result<usize> {
    let mut written = 0;
    for k in keypoints {
        let line = format!("{} {} {}\n", k.x, k.y, k.sigma);
        sink.write_all(line.as_bytes())?;
        written += line.len();
    }
    sink.flush()?;
    Ok(written)
}

pub fn parse_keypoint_file(source: impl BufRead) -> Result<Vec<Keypoint>> {
    parse_lines(source, |lineno, fields| {
        if fields.len() != 3 {
            return Err(Error::parse(
                lineno,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        parse_keypoint_fields(lineno, fields)
    })
}

fn parse_lines<T>(source: impl BufRead, mut row: impl FnMut(usize, &[&str]) -> Result<T>) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_ascii_whitespace().collect();
        out.push(row(i + 1, &fields)?);
    }
    Ok(out)
}

fn parse_keypoint_fields(lineno: usize, fields: &[&str]) -> Result<Keypoint> {
    let x = fields[0]
        .parse()
        .map_err(|_| Error::parse(lineno, format!("bad x coordinate {:?}", fields[0])))?;
    let y = fields[1]
        .parse()
        .map_err(|_| Error::parse(lineno, format!("bad y coordinate {:?}", fields[1])))?;
    let sigma = parse_real(lineno, fields[2], "sigma")?;
    if sigma <= 0.0 {
        return Err(Error::parse(lineno, "sigma must be positive"));
    }
    Ok(Keypoint { x, y, sigma })
}

fn parse_real(lineno: usize, field: &str, what: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(lineno, format!("bad {what} {field:?}")))
}
