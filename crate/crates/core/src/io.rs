//! Matrix input (CSV and `COHM` binary) and table output.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matgen::DataMatrix;

/// Magic bytes of the binary matrix format: `"COHM"`, then `u32` n and `u32`
/// p (little-endian), 8 reserved bytes, then `n * p` little-endian `f64` in
/// row-major order.
pub const BINARY_MAGIC: &[u8; 4] = b"COHM";
pub const BINARY_HEADER_LEN: usize = 16;

/// Formats a float with 17 significant digits, which round-trips `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Reads comma-separated rows. A first line that does not parse as numbers
/// is taken as a header; blank lines are skipped.
pub fn read_csv(reader: impl BufRead) -> Result<DataMatrix> {
    let mut entries = Vec::new();
    let mut p: Option<usize> = None;
    let mut n = 0;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let parsed: Vec<std::result::Result<f64, usize>> = fields
            .iter()
            .enumerate()
            .map(|(c, f)| f.parse::<f64>().map_err(|_| c + 1))
            .collect();
        if n == 0 && p.is_none() && parsed.iter().all(|r| r.is_err()) {
            p = Some(fields.len());
            continue;
        }
        let mut row = Vec::with_capacity(fields.len());
        for (c, r) in parsed.into_iter().enumerate() {
            match r {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(Error::Parse {
                        line: lineno,
                        column: c + 1,
                        message: format!("'{}' is not a finite number", fields[c]),
                    })
                }
            }
        }
        match p {
            Some(width) if width != row.len() => {
                return Err(Error::Parse {
                    line: lineno,
                    column: row.len().min(width) + 1,
                    message: format!("expected {width} fields, found {}", row.len()),
                })
            }
            _ => p = Some(row.len()),
        }
        entries.extend(row);
        n += 1;
    }
    DataMatrix::new(n, p.unwrap_or(0), entries)
}

pub fn write_csv(x: &DataMatrix, mut w: impl Write) -> Result<()> {
    for i in 0..x.n() {
        let row: Vec<String> = x.row(i).iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_binary(mut reader: impl Read) -> Result<DataMatrix> {
    let mut header = [0u8; BINARY_HEADER_LEN];
    reader.read_exact(&mut header).map_err(|_| Error::Parse {
        line: 0,
        column: 0,
        message: "truncated binary header".into(),
    })?;
    if &header[..4] != BINARY_MAGIC {
        return Err(Error::Parse {
            line: 0,
            column: 0,
            message: "missing COHM magic".into(),
        });
    }
    let n = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let p = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    if body.len() != n * p * 8 {
        return Err(Error::Parse {
            line: 0,
            column: 0,
            message: format!(
                "expected {} payload bytes for {n}x{p}, found {}",
                n * p * 8,
                body.len()
            ),
        });
    }
    let entries = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DataMatrix::new(n, p, entries)
}

pub fn write_binary(x: &DataMatrix, mut w: impl Write) -> Result<()> {
    let too_big = |v: usize| {
        u32::try_from(v).map_err(|_| Error::InvalidDimensions {
            n: x.n(),
            p: x.p(),
            reason: "dimension exceeds u32".into(),
        })
    };
    let mut header = [0u8; BINARY_HEADER_LEN];
    header[..4].copy_from_slice(BINARY_MAGIC);
    header[4..8].copy_from_slice(&too_big(x.n())?.to_le_bytes());
    header[8..12].copy_from_slice(&too_big(x.p())?.to_le_bytes());
    w.write_all(&header)?;
    for v in x.entries() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a matrix, choosing the format from the magic bytes.
pub fn read_matrix(path: &Path) -> Result<DataMatrix> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        read_binary(bytes.as_slice())
    } else {
        read_csv(bytes.as_slice())
    }
}

/// `replication,value` lines.
pub fn write_samples_csv(samples: &[f64], mut w: impl Write) -> Result<()> {
    writeln!(w, "replication,value")?;
    for (r, v) in samples.iter().enumerate() {
        writeln!(w, "{},{}", r, fmt_f64(*v))?;
    }
    Ok(())
}

pub fn write_correlation_csv(r: &[f64], p: usize, mut w: impl Write) -> Result<()> {
    for row in r.chunks(p) {
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_table_csv(rows: &[crate::limits::TableRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "y,gumbel_cdf,intermediate_cdf")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{}",
            fmt_f64(row.y),
            fmt_f64(row.gumbel),
            fmt_f64(row.intermediate)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_header() {
        let x = read_csv("a,b\n1,2\n\n2,1\n3,3\n".as_bytes()).unwrap();
        assert_eq!((x.n(), x.p()), (3, 2));
        assert_eq!(x.get(2, 1), 3.0);
    }

    #[test]
    fn csv_errors_locate_the_problem() {
        match read_csv("1,2\n3,x\n".as_bytes()) {
            Err(Error::Parse {
                line: 2, column: 2, ..
            }) => {}
            other => panic!("{other:?}"),
        }
        match read_csv("1,2\n3,4,5\n".as_bytes()) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(read_csv("1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let x = DataMatrix::new(2, 3, vec![1.0, -2.5, 3.25, 1e-300, 7.0, f64::MAX]).unwrap();
        let mut buf = Vec::new();
        write_binary(&x, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 48);
        assert_eq!(read_binary(buf.as_slice()).unwrap(), x);
        buf.truncate(40);
        assert!(read_binary(buf.as_slice()).is_err());
        assert!(read_binary(&b"XXXX0000000000000000"[..]).is_err());
    }

    #[test]
    fn seventeen_digit_floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -1234.5678e-3, 1e-310, 6.02214076e23] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
