//! Inertial CSV and PGM depth-frame readers and writers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{DepthSequence, InertialSequence, INERTIAL_CHANNELS};
use crate::io::{read_file, write_file};
use crate::numerics::Matrix;
use crate::{Error, Result};

/// Parses inertial CSV text: one sample per line, six comma-separated
/// floats. A leading non-numeric header line is skipped; blank lines are
/// ignored. Returns the `6 × T` channel matrix.
pub fn parse_inertial_csv(text: &str) -> Result<Matrix> {
    let mut columns: Vec<[f64; INERTIAL_CHANNELS]> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if columns.is_empty() && lineno == 0 => continue,
            Err(e) => {
                return Err(Error::format(
                    "inertial csv",
                    format!("line {}: {e}", lineno + 1),
                ))
            }
        };
        if values.len() != INERTIAL_CHANNELS {
            return Err(Error::format(
                "inertial csv",
                format!(
                    "line {} has {} columns, expected {INERTIAL_CHANNELS}",
                    lineno + 1,
                    values.len()
                ),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(
                "inertial csv",
                format!("line {} has a non-finite value", lineno + 1),
            ));
        }
        columns.push(values.try_into().unwrap());
    }
    if columns.is_empty() {
        return Err(Error::format("inertial csv", "no samples"));
    }
    Ok(Matrix::from_fn(INERTIAL_CHANNELS, columns.len(), |r, c| {
        columns[c][r]
    }))
}

pub fn read_inertial_csv(path: impl AsRef<Path>, rate_hz: f64) -> Result<InertialSequence> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let invalid = |e: Error| Error::InvalidFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let m = parse_inertial_csv(&text).map_err(invalid)?;
    InertialSequence::new(m, rate_hz).map_err(invalid)
}

pub fn write_inertial_csv(path: impl AsRef<Path>, seq: &InertialSequence) -> Result<()> {
    let mut out = String::from("ax,ay,az,gx,gy,gz\n");
    for t in 0..seq.len() {
        for c in 0..INERTIAL_CHANNELS {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{}", seq.channel(c)[t]).unwrap();
        }
        out.push('\n');
    }
    write_file(path.as_ref(), out.as_bytes())
}

/// Decoded binary (P5) PGM.
#[derive(Debug, Clone, PartialEq)]
pub struct Pgm {
    pub maxval: u16,
    pub pixels: Matrix,
}

/// Reads the next whitespace-delimited header token, skipping `#` comments.
fn header_token<'a>(buf: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < buf.len() && buf[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < buf.len() && buf[*pos] == b'#' {
            while *pos < buf.len() && buf[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < buf.len() && !buf[*pos].is_ascii_whitespace() && buf[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format("pgm", "truncated header"));
    }
    Ok(&buf[start..*pos])
}

fn header_number(buf: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = header_token(buf, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| Error::format("pgm", format!("bad {what}")))
}

/// Decodes a binary PGM; 16-bit samples are big-endian.
pub fn parse_pgm(bytes: &[u8]) -> Result<Pgm> {
    let mut pos = 0;
    if header_token(bytes, &mut pos)? != b"P5" {
        return Err(Error::format("pgm", "expected P5 magic"));
    }
    let width = header_number(bytes, &mut pos, "width")?;
    let height = header_number(bytes, &mut pos, "height")?;
    let maxval = header_number(bytes, &mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format("pgm", "zero-sized image"));
    }
    if maxval == 0 || maxval > u16::MAX as usize {
        return Err(Error::format(
            "pgm",
            format!("maxval {maxval} out of range"),
        ));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::format("pgm", "missing raster"));
    }
    pos += 1;
    let bpp = if maxval > 255 { 2 } else { 1 };
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(bpp))
        .ok_or_else(|| Error::format("pgm", "dimensions overflow"))?;
    let raster = &bytes[pos..];
    if raster.len() < need {
        return Err(Error::format(
            "pgm",
            format!("raster has {} bytes, need {need}", raster.len()),
        ));
    }
    let data: Vec<f64> = if bpp == 2 {
        raster[..need]
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64)
            .collect()
    } else {
        raster[..need].iter().map(|&b| b as f64).collect()
    };
    Ok(Pgm {
        maxval: maxval as u16,
        pixels: Matrix::new(height, width, data)?,
    })
}

fn pgm_bytes(pixels: &Matrix, maxval: u16, sample: impl Fn(f64) -> u16) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", pixels.cols(), pixels.rows(), maxval).into_bytes();
    for &v in pixels.as_slice() {
        let s = sample(v);
        if maxval > 255 {
            out.extend_from_slice(&s.to_be_bytes());
        } else {
            out.push(s as u8);
        }
    }
    out
}

/// Writes depth values (rounded, clamped to `0..=65535`) as a 16-bit PGM.
pub fn write_pgm16(path: impl AsRef<Path>, depth_mm: &Matrix) -> Result<()> {
    let bytes = pgm_bytes(depth_mm, u16::MAX, |v| v.round().clamp(0.0, 65535.0) as u16);
    write_file(path.as_ref(), &bytes)
}

/// Writes an image in `[0, 1]` as an 8-bit PGM for inspection.
pub fn write_pgm8(path: impl AsRef<Path>, unit: &Matrix) -> Result<()> {
    let bytes = pgm_bytes(unit, 255, |v| (v.clamp(0.0, 1.0) * 255.0).round() as u16);
    write_file(path.as_ref(), &bytes)
}

/// Loads every `*.pgm` in `dir`, in lexicographic file-name order.
pub fn read_depth_dir(dir: impl AsRef<Path>) -> Result<DepthSequence> {
    let dir = dir.as_ref();
    let mut names: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    names.sort();
    let mut frames = Vec::with_capacity(names.len());
    for p in &names {
        let pgm = parse_pgm(&read_file(p)?).map_err(|e| Error::InvalidFile {
            path: p.clone(),
            reason: e.to_string(),
        })?;
        frames.push(pgm.pixels);
    }
    DepthSequence::new(frames).map_err(|e| Error::InvalidFile {
        path: dir.to_path_buf(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_and_without_header() {
        let with = "ax,ay,az,gx,gy,gz\n1,2,3,4,5,6\n7,8,9,10,11,12\n";
        let without = "1,2,3,4,5,6\n\n7,8,9,10,11,12";
        let a = parse_inertial_csv(with).unwrap();
        assert_eq!(a, parse_inertial_csv(without).unwrap());
        assert_eq!(a.shape(), (6, 2));
        assert_eq!(a.row(5), &[6.0, 12.0]);
    }

    #[test]
    fn csv_rejects_wrong_width() {
        let err = parse_inertial_csv("1,2,3,4,5\n").unwrap_err();
        assert!(err.to_string().contains("5 columns"));
        assert!(parse_inertial_csv("1,2,3,4,5,6\nx,2,3,4,5,6\n").is_err());
        assert!(parse_inertial_csv("").is_err());
        assert!(parse_inertial_csv("1,2,3,4,5,NaN\n").is_err());
    }

    #[test]
    fn pgm16_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Matrix::from_fn(3, 4, |r, c| (r * 1000 + c * 7) as f64);
        let p = dir.path().join("f.pgm");
        write_pgm16(&p, &m).unwrap();
        let pgm = parse_pgm(&fs::read(&p).unwrap()).unwrap();
        assert_eq!(pgm.maxval, 65535);
        assert_eq!(pgm.pixels, m);
    }

    #[test]
    fn pgm_header_with_comment() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 200]);
        let pgm = parse_pgm(&bytes).unwrap();
        assert_eq!(pgm.pixels.as_slice(), &[0.0, 200.0]);
    }

    #[test]
    fn pgm_rejects_garbage() {
        assert!(parse_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(parse_pgm(b"P5\n2 2\n255\n\x00").is_err());
        assert!(parse_pgm(b"P5\n1 1\n70000\n\x00\x00").is_err());
        assert!(parse_pgm(b"P5\n99999999999 99999999999\n255\n").is_err());
        assert!(parse_pgm(b"P5").is_err());
    }

    #[test]
    fn depth_dir_is_sorted() {
        let dir = tempfile::tempdir().unwrap();
        for (name, v) in [("b.pgm", 2.0), ("a.pgm", 1.0), ("c.pgm", 3.0)] {
            write_pgm16(dir.path().join(name), &Matrix::filled(2, 2, v)).unwrap();
        }
        fs::write(dir.path().join("notes.txt"), "skip").unwrap();
        let seq = read_depth_dir(dir.path()).unwrap();
        let firsts: Vec<f64> = seq.frames().iter().map(|f| f[(0, 0)]).collect();
        assert_eq!(firsts, vec![1.0, 2.0, 3.0]);
    }
}
