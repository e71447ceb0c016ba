//! CSV input: pseudo-observations directly, or raw data converted through
//! column ranks.

use std::path::Path;

use ellcop::PseudoSample;
use thiserror::Error;

/// Values outside `(0, 1)` in uniform input are clamped into this range.
pub const CLAMP_LO: f64 = 1e-12;
pub const CLAMP_HI: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// Pseudo-observations in (0, 1).
    Uniform,
    /// Raw data; each column is replaced by rank / (n + 1).
    Ranks,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}, column {column}: cannot parse {value:?} as a number")]
    Parse { line: u64, column: usize, value: String },
    #[error("line {line} has {got} columns, expected {expected}")]
    Dimension { line: u64, expected: usize, got: usize },
    #[error("no data rows in input")]
    EmptyInput,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Sample(#[from] ellcop::Error),
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub sample: PseudoSample,
    /// Number of uniform values that had to be clamped.
    pub clamped: usize,
}

fn parse_field(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| !v.is_nan())
}

/// Reads a numeric table. A first row that does not parse as numbers is
/// taken as a header.
fn read_table(data: &[u8]) -> Result<(usize, Vec<f64>), IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(data);
    let mut d = 0;
    let mut values = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if first {
            first = false;
            if record.iter().any(|f| parse_field(f).is_none()) {
                continue;
            }
        }
        if d == 0 {
            d = record.len();
        } else if record.len() != d {
            return Err(IngestError::Dimension { line, expected: d, got: record.len() });
        }
        for (column, field) in record.iter().enumerate() {
            let v = parse_field(field).ok_or_else(|| IngestError::Parse {
                line,
                column: column + 1,
                value: field.to_string(),
            })?;
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    Ok((d, values))
}

/// Ranks from 1 to n, ties sharing their average rank.
fn average_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &k in &idx[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

pub fn ingest_bytes(data: &[u8], format: InputFormat) -> Result<Ingested, IngestError> {
    let (d, mut values) = read_table(data)?;
    let n = values.len() / d;
    let mut clamped = 0;
    match format {
        InputFormat::Uniform => {
            for v in values.iter_mut() {
                if !(*v > 0.0 && *v < 1.0) {
                    *v = v.clamp(CLAMP_LO, CLAMP_HI);
                    clamped += 1;
                }
            }
        }
        InputFormat::Ranks => {
            for j in 0..d {
                let column: Vec<f64> = (0..n).map(|t| values[t * d + j]).collect();
                for (t, r) in average_ranks(&column).into_iter().enumerate() {
                    values[t * d + j] = r / (n as f64 + 1.0);
                }
            }
        }
    }
    Ok(Ingested { sample: PseudoSample::new(d, values)?, clamped })
}

fn read_file(path: &Path) -> Result<Vec<u8>, IngestError> {
    std::fs::read(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

/// A numeric CSV table as rows, header auto-detected as for samples.
pub fn read_numeric_rows(path: &Path) -> Result<Vec<Vec<f64>>, IngestError> {
    let (d, values) = read_table(&read_file(path)?)?;
    Ok(values.chunks(d).map(<[f64]>::to_vec).collect())
}

pub fn ingest(path: &Path, format: InputFormat) -> Result<Ingested, IngestError> {
    ingest_bytes(&read_file(path)?, format)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_three_by_two() {
        let got = ingest_bytes(b"0.1,0.2\n0.3,0.4\n0.5,0.6\n", InputFormat::Uniform).unwrap();
        assert_eq!((got.sample.n(), got.sample.d(), got.clamped), (3, 2, 0));
        assert_eq!(got.sample.row(2), &[0.5, 0.6]);
    }

    #[test]
    fn header_is_detected() {
        let got = ingest_bytes(b"x,y\n0.1,0.2\n0.3,0.4\n", InputFormat::Uniform).unwrap();
        assert_eq!(got.sample.n(), 2);
    }

    #[test]
    fn ranks_of_increasing_column() {
        let got = ingest_bytes(b"10,3\n20,1\n30,2\n", InputFormat::Ranks).unwrap();
        let col0: Vec<f64> = got.sample.rows().map(|r| r[0]).collect();
        assert_eq!(col0, vec![0.25, 0.5, 0.75]);
        let col1: Vec<f64> = got.sample.rows().map(|r| r[1]).collect();
        assert_eq!(col1, vec![0.75, 0.25, 0.5]);
    }

    #[test]
    fn ties_get_average_rank() {
        let got = ingest_bytes(b"1,5\n2,5\n2,6\n4,7\n", InputFormat::Ranks).unwrap();
        let col0: Vec<f64> = got.sample.rows().map(|r| r[0]).collect();
        assert_eq!(col0, vec![0.2, 0.5, 0.5, 0.8]);
    }

    #[test]
    fn value_one_is_clamped() {
        let got = ingest_bytes(b"0.5,1.0\n0.2,0.3\n", InputFormat::Uniform).unwrap();
        assert_eq!(got.clamped, 1);
        assert_eq!(got.sample.row(0)[1], CLAMP_HI);
    }

    #[test]
    fn errors_carry_coordinates() {
        match ingest_bytes(b"0.1,0.2\n0.3,abc\n", InputFormat::Uniform) {
            Err(IngestError::Parse { line: 2, column: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match ingest_bytes(b"0.1,0.2\n0.3\n", InputFormat::Uniform) {
            Err(IngestError::Dimension { line: 2, expected: 2, got: 1 }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(ingest_bytes(b"", InputFormat::Uniform), Err(IngestError::EmptyInput)));
        assert!(matches!(ingest_bytes(b"a,b\n", InputFormat::Uniform), Err(IngestError::EmptyInput)));
    }
}
