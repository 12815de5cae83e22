//! Dataset files: LIBSVM sparse text, dense numeric CSV and price CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::{Dataset, Features};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub fn parse_libsvm(path: &Path) -> Result<Dataset> {
    parse_libsvm_str(&fs::read_to_string(path)?)
}

/// Parses `label idx:val ...` lines with 1-based, strictly increasing
/// indices. Blank lines and `#` comments are skipped. Two distinct labels
/// are mapped by sorted order to `-1` and `+1`; a single label keeps its sign.
pub fn parse_libsvm_str(text: &str) -> Result<Dataset> {
    let mut raw_labels = Vec::new();
    let mut indptr = vec![0];
    let mut indices = Vec::new();
    let mut values = Vec::new();
    let mut ncols = 0;
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line");
        let label: f64 =
            label_tok.parse().map_err(|_| Error::data_at(lineno, format!("bad label '{label_tok}'")))?;
        if !label.is_finite() {
            return Err(Error::data_at(lineno, "non-finite label"));
        }
        let mut prev = 0;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| Error::data_at(lineno, format!("expected idx:val, got '{tok}'")))?;
            let idx: usize = idx.parse().map_err(|_| Error::data_at(lineno, format!("bad index '{idx}'")))?;
            let val: f64 = val.parse().map_err(|_| Error::data_at(lineno, format!("bad value '{val}'")))?;
            if idx == 0 {
                return Err(Error::data_at(lineno, "indices are 1-based"));
            }
            if idx <= prev {
                return Err(Error::data_at(lineno, format!("index {idx} after {prev} is not increasing")));
            }
            if !val.is_finite() {
                return Err(Error::data_at(lineno, "non-finite value"));
            }
            prev = idx;
            indices.push(idx - 1);
            values.push(val);
        }
        ncols = ncols.max(prev);
        indptr.push(indices.len());
        raw_labels.push((label, lineno));
    }
    if raw_labels.is_empty() {
        return Err(Error::data("no samples"));
    }
    let mut distinct: Vec<f64> = raw_labels.iter().map(|&(l, _)| l).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() > 2 {
        let line = raw_labels.iter().find(|&&(l, _)| l == distinct[2]).map_or(0, |&(_, n)| n);
        return Err(Error::data_at(line, format!("more than two label values: {distinct:?}")));
    }
    let labels = raw_labels
        .iter()
        .map(|&(l, _)| {
            if distinct.len() == 2 {
                if l == distinct[0] {
                    -1.0
                } else {
                    1.0
                }
            } else if l > 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let features = CsrMatrix::new(raw_labels.len(), ncols, indptr, indices, values)?;
    Ok(Dataset { features: Features::Sparse(features), labels: Some(labels) })
}

/// Writes a labelled dataset in LIBSVM format; values use the shortest
/// representation that parses back to the same float.
pub fn write_libsvm(data: &Dataset, out: &mut dyn Write) -> Result<()> {
    let labels = data.labels.as_ref().ok_or_else(|| Error::data("LIBSVM output needs labels"))?;
    let sparse = data.to_sparse();
    for (r, &y) in labels.iter().enumerate() {
        write!(out, "{}", if y > 0.0 { "+1" } else { "-1" })?;
        for (c, v) in sparse.row(r) {
            write!(out, " {}:{}", c + 1, v)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_error)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Data { line, msg: format!("{kind:?}") },
    }
}

/// Reads rows of strings, keeping their 1-based line numbers.
fn read_records(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rows = Vec::new();
    for rec in csv_reader(path)?.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(rows)
}

fn to_matrix(rows: &[(usize, Vec<f64>)]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, |r| r.1.len());
    if rows.is_empty() || ncols == 0 {
        return Err(Error::data("empty matrix"));
    }
    for (line, r) in rows {
        if r.len() != ncols {
            return Err(Error::data_at(*line, format!("expected {ncols} columns, got {}", r.len())));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i].1[j]))
}

fn parse_row(line: usize, fields: &[String]) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            let v: f64 = f.parse().map_err(|_| Error::data_at(line, format!("bad number '{f}'")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::data_at(line, "non-finite value"))
            }
        })
        .collect()
}

/// Numeric CSV, one matrix row per line. A first line that does not parse
/// as numbers is treated as a header.
pub fn read_dense_csv(path: &Path) -> Result<DMatrix<f64>> {
    let records = read_records(path)?;
    let mut rows = Vec::with_capacity(records.len());
    for (k, (line, fields)) in records.iter().enumerate() {
        match parse_row(*line, fields) {
            Ok(r) => rows.push((*line, r)),
            Err(_) if k == 0 => continue,
            Err(e) => return Err(e),
        }
    }
    to_matrix(&rows)
}

pub fn write_dense_csv(m: &DMatrix<f64>, out: &mut dyn Write) -> Result<()> {
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Price table with a header row, one period per line and one asset per
/// column; a leading non-numeric column (dates) is dropped. Returns the
/// `(periods - 1) x assets` matrix of ratios `price_t / price_{t-1}`.
pub fn read_price_csv(path: &Path) -> Result<DMatrix<f64>> {
    let records = read_records(path)?;
    if records.len() < 3 {
        return Err(Error::data("price table needs a header and at least two periods"));
    }
    let body = &records[1..];
    let skip_first = body.iter().any(|(_, f)| f.first().is_some_and(|s| s.parse::<f64>().is_err()));
    let mut prices = Vec::with_capacity(body.len());
    for (line, fields) in body {
        let fields = if skip_first { &fields[1.min(fields.len())..] } else { &fields[..] };
        let row = parse_row(*line, fields)?;
        if let Some(v) = row.iter().find(|&&v| v <= 0.0) {
            return Err(Error::data_at(*line, format!("price {v} is not positive")));
        }
        prices.push((*line, row));
    }
    let prices = to_matrix(&prices)?;
    let periods = prices.nrows();
    Ok(DMatrix::from_fn(periods - 1, prices.ncols(), |i, j| prices[(i + 1, j)] / prices[(i, j)]))
}
