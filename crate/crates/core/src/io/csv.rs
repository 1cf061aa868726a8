use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::result::write_atomic;
use crate::error::{Error, Result};
use crate::permutation::Permutation;
use crate::sample::SampleSet;

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a header-less comma-separated matrix; `label` names the source in
/// error messages.
pub fn read_matrix<R: Read>(reader: R, label: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = ::csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(::csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(label, line, e.to_string())
        })?;
        let line = record.position().map_or(rows as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(parse_error(
                    label,
                    line,
                    format!("expected {c} columns, found {}", record.len()),
                ))
            }
            Some(_) => {}
        }
        for (k, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_error(label, line, format!("column {}: not a number: {cell:?}", k + 1)))?;
            if !v.is_finite() {
                return Err(parse_error(label, line, format!("column {}: non-finite value", k + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    let Some(cols) = cols else {
        return Err(parse_error(label, 1, "empty file"));
    };
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix(BufReader::new(file), path)
}

/// One row per line, comma separated, newline terminated.
pub fn write_matrix<W: Write>(mut w: W, m: &DMatrix<f64>) -> std::io::Result<()> {
    let mut line = String::new();
    for i in 0..m.nrows() {
        line.clear();
        for j in 0..m.ncols() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format_f64(m[(i, j)]));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()
}

pub fn save_matrix(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_matrix(&mut buf, m).map_err(|e| Error::io(path.as_ref(), e))?;
    write_atomic(path.as_ref(), &buf)
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<SampleSet> {
    let m = load_matrix(path)?;
    SampleSet::new(m.transpose().as_slice().to_vec(), m.nrows(), m.ncols())
}

pub fn save_samples(s: &SampleSet, path: impl AsRef<Path>) -> Result<()> {
    save_matrix(&s.to_matrix(), path)
}

/// One 0-based index per line.
pub fn load_permutation(path: impl AsRef<Path>) -> Result<Permutation> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut map = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let idx = t
            .parse::<usize>()
            .map_err(|_| parse_error(path, k as u64 + 1, format!("not an index: {t:?}")))?;
        map.push(idx);
    }
    if map.is_empty() {
        return Err(parse_error(path, 1, "empty file"));
    }
    Permutation::new(map)
}

pub fn save_permutation(p: &Permutation, path: impl AsRef<Path>) -> Result<()> {
    let mut text = String::with_capacity(p.len() * 4);
    for &i in p.as_slice() {
        text.push_str(&i.to_string());
        text.push('\n');
    }
    write_atomic(path.as_ref(), text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn parse(text: &str) -> Result<DMatrix<f64>> {
        read_matrix(text.as_bytes(), Path::new("mem.csv"))
    }

    #[test]
    fn parses_small_file() {
        let m = parse("1,2\n3,4").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(parse("1, 2\r\n3 ,4\n\n").unwrap(), m);
    }

    #[test]
    fn reports_line_numbers() {
        let err = |t: &str| match parse(t) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(err(""), 1);
        assert_eq!(err("1,2\n3\n"), 2);
        assert_eq!(err("1,2\n3,4\n5,x\n"), 3);
        assert_eq!(err("1,inf\n"), 1);
    }

    #[test]
    fn formatting_is_shortest_round_trip() {
        assert_eq!(format_f64(0.1), "0.1");
        assert_eq!(format_f64(1.0), "1.0");
        assert_eq!(format_f64(-2.5e-7), "-2.5e-7");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let v: f64 = rng.random_range(-1e6..1e6) * 10f64.powi(rng.random_range(-30..30));
            assert_eq!(format_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn samples_and_permutations_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = SampleSet::new((0..100 * 50).map(|_| rng.random_range(-1e3..1e3)).collect(), 100, 50).unwrap();
        let path = dir.path().join("s.csv");
        save_samples(&s, &path).unwrap();
        let back = load_samples(&path).unwrap();
        assert!(s.as_slice().iter().zip(back.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!((back.len(), back.dim()), (100, 50));
        assert!(std::fs::read_to_string(&path).unwrap().ends_with('\n'));

        let p = Permutation::random(30, &mut rng);
        let pp = dir.path().join("p.txt");
        save_permutation(&p, &pp).unwrap();
        assert_eq!(load_permutation(&pp).unwrap(), p);

        std::fs::write(&pp, "0\n0\n").unwrap();
        assert!(matches!(load_permutation(&pp), Err(Error::InvalidPermutation(_))));
        assert!(matches!(load_samples(dir.path().join("missing.csv")), Err(Error::Io { .. })));
    }
}
