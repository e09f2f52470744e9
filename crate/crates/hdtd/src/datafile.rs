//! Text formats for transposable samples.
//!
//! The native "matrix stack" format:
//!
//! ```text
//! # hdtd v1 N=<n> r=<r> c=<c>
//! <c comma-separated values>   (r lines, first matrix)
//!                              (one blank line between matrices)
//! <c comma-separated values>   (r lines, second matrix)
//! ...
//! ```
//!
//! Alternatively a long-form CSV with header `sample,row,col,value` and
//! exactly n*r*c rows covering every (sample,row,col) triple once, indices
//! 1-based. [`read_data`] sniffs the format from the first line.
//!
//! Values are written with 17 significant digits, so a write/read round trip
//! reproduces every f64 bit for bit.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::matrix::{MatrixSample, SymMatrix};

const MAGIC: &str = "# hdtd v1";
const LONG_HEADER: &str = "sample,row,col,value";

fn fmt_value(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serialize a sample in the matrix-stack format.
pub fn write_stack(s: &MatrixSample) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{MAGIC} N={} r={} c={}\n",
        s.n(),
        s.rows(),
        s.cols()
    ));
    for i in 0..s.n() {
        if i > 0 {
            out.push('\n');
        }
        let m = s.mat(i);
        for a in 0..s.rows() {
            let line: Vec<String> = (0..s.cols()).map(|b| fmt_value(m[[a, b]])).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
    }
    out
}

fn parse_value(tok: &str, line_no: usize) -> Result<f64> {
    let v: f64 = tok.trim().parse().map_err(|_| {
        Error::MalformedInput(format!(
            "line {line_no}: cannot parse '{}' as a number",
            tok.trim()
        ))
    })?;
    if !v.is_finite() {
        return Err(Error::MalformedInput(format!(
            "line {line_no}: value '{}' is not finite",
            tok.trim()
        )));
    }
    Ok(v)
}

fn parse_header(line: &str) -> Result<(usize, usize, usize)> {
    let rest = line
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::MalformedInput(format!("expected '{MAGIC}' header, got '{line}'")))?;
    let (mut n, mut r, mut c) = (None, None, None);
    for tok in rest.split_whitespace() {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| Error::MalformedInput(format!("bad header token '{tok}'")))?;
        let parsed: usize = val
            .parse()
            .map_err(|_| Error::MalformedInput(format!("bad header value '{tok}'")))?;
        match key {
            "N" => n = Some(parsed),
            "r" => r = Some(parsed),
            "c" => c = Some(parsed),
            _ => return Err(Error::MalformedInput(format!("unknown header key '{key}'"))),
        }
    }
    match (n, r, c) {
        (Some(n), Some(r), Some(c)) if n > 0 && r > 0 && c > 0 => Ok((n, r, c)),
        (Some(_), Some(_), Some(_)) => Err(Error::MalformedInput(
            "header dimensions must be positive".into(),
        )),
        _ => Err(Error::MalformedInput(
            "header must declare N=, r= and c=".into(),
        )),
    }
}

fn read_stack(text: &str) -> Result<MatrixSample> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::MalformedInput("empty file".into()))?;
    let (n, r, c) = parse_header(header)?;

    let mut data: Vec<f64> = Vec::with_capacity(n * r * c);
    let mut rows_in_block = 0usize;
    let mut blocks = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            if rows_in_block == 0 {
                continue; // stray blank lines between blocks or at EOF
            }
            if rows_in_block != r {
                return Err(Error::DimensionMismatch(format!(
                    "matrix {} has {} rows, declared r={}",
                    blocks + 1,
                    rows_in_block,
                    r
                )));
            }
            rows_in_block = 0;
            blocks += 1;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != c {
            return Err(Error::DimensionMismatch(format!(
                "line {line_no}: {} values, declared c={}",
                fields.len(),
                c
            )));
        }
        if rows_in_block == r {
            return Err(Error::DimensionMismatch(format!(
                "matrix {} has more than the declared r={} rows (line {line_no})",
                blocks + 1,
                r
            )));
        }
        for tok in fields {
            data.push(parse_value(tok, line_no)?);
        }
        rows_in_block += 1;
    }
    if rows_in_block > 0 {
        if rows_in_block != r {
            return Err(Error::DimensionMismatch(format!(
                "matrix {} has {} rows, declared r={}",
                blocks + 1,
                rows_in_block,
                r
            )));
        }
        blocks += 1;
    }
    if blocks != n {
        return Err(Error::DimensionMismatch(format!(
            "found {blocks} matrices, declared N={n}"
        )));
    }
    MatrixSample::new(n, r, c, data)
}

fn read_long_csv(text: &str) -> Result<MatrixSample> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::MalformedInput("empty file".into()))?;
    if header.trim() != LONG_HEADER {
        return Err(Error::MalformedInput(format!(
            "expected header '{LONG_HEADER}', got '{}'",
            header.trim()
        )));
    }
    let mut triples: Vec<(usize, usize, usize, f64)> = Vec::new();
    let (mut n, mut r, mut c) = (0usize, 0usize, 0usize);
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::MalformedInput(format!(
                "line {line_no}: expected 4 fields, got {}",
                fields.len()
            )));
        }
        let parse_idx = |tok: &str, what: &str| -> Result<usize> {
            let v: usize = tok.trim().parse().map_err(|_| {
                Error::MalformedInput(format!("line {line_no}: bad {what} index '{}'", tok.trim()))
            })?;
            if v == 0 {
                return Err(Error::MalformedInput(format!(
                    "line {line_no}: {what} index must be 1-based"
                )));
            }
            Ok(v)
        };
        let i = parse_idx(fields[0], "sample")?;
        let a = parse_idx(fields[1], "row")?;
        let b = parse_idx(fields[2], "col")?;
        let v = parse_value(fields[3], line_no)?;
        n = n.max(i);
        r = r.max(a);
        c = c.max(b);
        triples.push((i - 1, a - 1, b - 1, v));
    }
    if triples.is_empty() {
        return Err(Error::MalformedInput("no data rows".into()));
    }
    if triples.len() != n * r * c {
        return Err(Error::DimensionMismatch(format!(
            "{} rows cannot cover every (sample,row,col) triple of a {n}x{r}x{c} sample exactly once",
            triples.len()
        )));
    }
    let mut data = vec![f64::NAN; n * r * c];
    let mut seen = vec![false; n * r * c];
    for (i, a, b, v) in triples {
        let pos = i * r * c + a * c + b;
        if seen[pos] {
            return Err(Error::DimensionMismatch(format!(
                "triple (sample={}, row={}, col={}) appears more than once",
                i + 1,
                a + 1,
                b + 1
            )));
        }
        seen[pos] = true;
        data[pos] = v;
    }
    // every triple seen exactly once: count matches and no duplicates
    MatrixSample::new(n, r, c, data)
}

/// Parse either supported format, sniffing from the first line.
pub fn read_data(text: &str) -> Result<MatrixSample> {
    let first = text.lines().next().unwrap_or("");
    if first.starts_with('#') {
        read_stack(text)
    } else if first.trim() == LONG_HEADER {
        read_long_csv(text)
    } else {
        Err(Error::MalformedInput(format!(
            "unrecognized format: first line is neither '{MAGIC} ...' nor '{LONG_HEADER}'"
        )))
    }
}

/// Plain CSV matrix: one row per line, comma-separated values.
pub fn read_matrix_csv(text: &str) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for tok in line.split(',') {
            row.push(parse_value(tok, idx + 1)?);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::DimensionMismatch(format!(
                    "line {}: {} values, earlier rows have {}",
                    idx + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::MalformedInput("empty matrix file".into()));
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((nr, nc), flat).expect("row lengths checked"))
}

/// Square symmetric CSV matrix (for a known covariance).
pub fn read_square_csv(text: &str) -> Result<SymMatrix> {
    let m = read_matrix_csv(text)?;
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            if (m[[i, j]] - m[[j, i]]).abs() > 1e-8 * scale.max(1.0) {
                return Err(Error::MalformedInput(format!(
                    "matrix is not symmetric at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    SymMatrix::new(m)
}
