//! Point files.
//!
//! Binary: magic `PKD1`, `u32` dimension, `u64` count, then the coordinates
//! row-major as `f64`, all little-endian. Text: one point per line,
//! whitespace-separated, dimension taken from the first line. Point ids are
//! row indices in both formats.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{KdError, Result};
use crate::geometry::Point;

const MAGIC: &[u8; 4] = b"PKD1";
const HEADER: u64 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Binary,
    Text,
}

impl Format {
    /// `.txt`, `.csv` and `.tsv` are text, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt" | "csv" | "tsv") => Format::Text,
            _ => Format::Binary,
        }
    }
}

pub fn read_points(path: &Path, format: Format) -> Result<Vec<Point>> {
    match format {
        Format::Binary => read_binary(path),
        Format::Text => read_text(path),
    }
}

/// Writes `points` (ids are not stored). All points must share a dimension.
pub fn write_points(path: &Path, points: &[Point], format: Format) -> Result<()> {
    let d = points.first().map_or(0, Point::dim);
    if let Some(p) = points.iter().find(|p| p.dim() != d) {
        return Err(KdError::DimensionMismatch {
            expected: d,
            got: p.dim(),
        });
    }
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        Format::Binary => {
            let d32 = u32::try_from(d)
                .map_err(|_| KdError::InvalidArgument(format!("dimension {d} too large")))?;
            w.write_all(MAGIC)?;
            w.write_all(&d32.to_le_bytes())?;
            w.write_all(&(points.len() as u64).to_le_bytes())?;
            for p in points {
                for x in p.coords() {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
        Format::Text => {
            for p in points {
                let mut first = true;
                for x in p.coords() {
                    if !first {
                        w.write_all(b" ")?;
                    }
                    write!(w, "{x}")?;
                    first = false;
                }
                w.write_all(b"\n")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_err(path: &Path, row: u64, msg: impl Into<String>) -> KdError {
    KdError::Parse {
        path: path.to_path_buf(),
        row,
        msg: msg.into(),
    }
}

fn read_binary(path: &Path) -> Result<Vec<Point>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let actual = bytes.len() as u64;
    if actual < HEADER {
        if actual >= 4 && &bytes[..4] != MAGIC {
            return Err(KdError::BadMagic {
                path: path.to_path_buf(),
            });
        }
        return Err(KdError::Truncated {
            path: path.to_path_buf(),
            expected: HEADER,
            actual,
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(KdError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    let d = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as u64;
    let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let expected = n
        .checked_mul(d)
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(HEADER))
        .ok_or_else(|| parse_err(path, 0, "header size overflows"))?;
    if d == 0 && n > 0 {
        return Err(parse_err(path, 0, "dimension 0 in header"));
    }
    if actual < expected {
        return Err(KdError::Truncated {
            path: path.to_path_buf(),
            expected,
            actual,
        });
    }
    if actual > expected {
        return Err(parse_err(
            path,
            n,
            format!("{} trailing bytes after {expected}", actual - expected),
        ));
    }
    let d = d as usize;
    let payload = &bytes[HEADER as usize..];
    payload
        .chunks_exact(d.max(1) * 8)
        .enumerate()
        .map(|(row, raw)| {
            let coords = raw
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            Point::new(row as u64, coords)
                .map_err(|_| parse_err(path, row as u64, "non-finite coordinate"))
        })
        .collect()
}

fn read_text(path: &Path) -> Result<Vec<Point>> {
    let reader = BufReader::new(File::open(path)?);
    let mut points = Vec::new();
    let mut dim = None;
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let row = points.len() as u64;
        if line.trim().is_empty() {
            continue;
        }
        let coords = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| {
                    parse_err(path, row, format!("line {}: bad number {tok:?}", line_no + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let d = *dim.get_or_insert(coords.len());
        if coords.len() != d {
            return Err(parse_err(
                path,
                row,
                format!("expected {d} values, found {}", coords.len()),
            ));
        }
        let p = Point::new(row, coords).map_err(|_| parse_err(path, row, "non-finite coordinate"))?;
        points.push(p);
    }
    Ok(points)
}
