//! Dense matrix files: Matrix Market (array and coordinate, real or integer) and
//! headerless numeric CSV.
//!
//! Values are written in shortest round-trip scientific notation, so a save/load
//! cycle reproduces every entry exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixFormat {
    MatrixMarket,
    Csv,
}

impl MatrixFormat {
    /// `.mtx` / `.mm` are Matrix Market, `.csv` / `.txt` are CSV.
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("mtx") | Some("mm") => Ok(Self::MatrixMarket),
            Some("csv") | Some("txt") => Ok(Self::Csv),
            _ => Err(Error::InvalidInput(format!(
                "cannot infer matrix format from {}; use .mtx or .csv",
                path.display()
            ))),
        }
    }
}

impl std::str::FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mtx" | "mm" | "matrix-market" | "matrixmarket" => Ok(Self::MatrixMarket),
            "csv" => Ok(Self::Csv),
            other => Err(Error::InvalidInput(format!("unknown matrix format {other:?}"))),
        }
    }
}

pub fn load_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path.as_ref())?;
    match format {
        MatrixFormat::MatrixMarket => parse_matrix_market(&text),
        MatrixFormat::Csv => parse_csv(&text),
    }
}

/// Loads with the format inferred from the extension.
pub fn load_matrix_auto(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let format = MatrixFormat::from_path(path.as_ref())?;
    load_matrix(path, format)
}

pub fn save_matrix(x: &DenseMatrix, path: impl AsRef<Path>, format: MatrixFormat) -> Result<()> {
    let text = match format {
        MatrixFormat::MatrixMarket => write_matrix_market(x),
        MatrixFormat::Csv => write_csv(x),
    };
    fs::write(path, text)?;
    Ok(())
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_value(token: &str, line: usize) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| parse_error(line, format!("not a number: {token:?}")))?;
    if !v.is_finite() {
        return Err(parse_error(line, format!("non-finite value {token:?}")));
    }
    Ok(v)
}

fn parse_count(token: &str, line: usize, what: &str) -> Result<usize> {
    token
        .parse()
        .map_err(|_| parse_error(line, format!("bad {what}: {token:?}")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Layout {
    Array,
    Coordinate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

struct Header {
    layout: Layout,
    symmetry: Symmetry,
}

fn parse_header(first: &str) -> Result<Header> {
    let tokens: Vec<String> = first.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_error(1, "expected '%%MatrixMarket matrix <layout> <field> <symmetry>'"));
    }
    let layout = match tokens[2].as_str() {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => return Err(parse_error(1, format!("unknown layout {other:?}"))),
    };
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(parse_error(1, format!("unsupported field {other:?}; only real data"))),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(parse_error(1, format!("unsupported symmetry {other:?}"))),
    };
    Ok(Header { layout, symmetry })
}

/// Parses a Matrix Market document. Coordinate entries not listed are zero and
/// repeated coordinates are summed.
pub fn parse_matrix_market(text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, first) = lines.next().ok_or_else(|| parse_error(1, "empty file"))?;
    let header = parse_header(first)?;
    let mut body = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));

    let (size_line, size) = body.next().ok_or_else(|| parse_error(1, "missing size line"))?;
    let size: Vec<&str> = size.split_whitespace().collect();
    let expected_tokens = if header.layout == Layout::Array { 2 } else { 3 };
    if size.len() != expected_tokens {
        return Err(parse_error(size_line, format!("size line needs {expected_tokens} integers")));
    }
    let m = parse_count(size[0], size_line, "row count")?;
    let n = parse_count(size[1], size_line, "column count")?;
    if m == 0 || n == 0 {
        return Err(parse_error(size_line, "matrix dimensions must be positive"));
    }
    if header.symmetry != Symmetry::General && m != n {
        return Err(parse_error(size_line, "symmetric storage needs a square matrix"));
    }
    let mut x = DenseMatrix::zeros(m, n);

    match header.layout {
        Layout::Array => {
            // column-major; symmetric variants store the lower triangle only
            let slots: Vec<(usize, usize)> = (0..n)
                .flat_map(|j| (0..m).map(move |i| (i, j)))
                .filter(|&(i, j)| match header.symmetry {
                    Symmetry::General => true,
                    Symmetry::Symmetric => i >= j,
                    Symmetry::SkewSymmetric => i > j,
                })
                .collect();
            let mut filled = 0;
            let mut last_line = size_line;
            for (line, content) in body {
                last_line = line;
                for token in content.split_whitespace() {
                    let &(i, j) = slots
                        .get(filled)
                        .ok_or_else(|| parse_error(line, "more values than the size line allows"))?;
                    let v = parse_value(token, line)?;
                    x[(i, j)] = v;
                    match header.symmetry {
                        Symmetry::General => {}
                        Symmetry::Symmetric => x[(j, i)] = v,
                        Symmetry::SkewSymmetric => x[(j, i)] = -v,
                    }
                    filled += 1;
                }
            }
            if filled != slots.len() {
                return Err(parse_error(
                    last_line,
                    format!("expected {} values, found {filled}", slots.len()),
                ));
            }
        }
        Layout::Coordinate => {
            let nnz = parse_count(size[2], size_line, "entry count")?;
            let mut seen = 0;
            let mut last_line = size_line;
            for (line, content) in body {
                last_line = line;
                let tokens: Vec<&str> = content.split_whitespace().collect();
                if tokens.len() != 3 {
                    return Err(parse_error(line, "coordinate entry needs 'row col value'"));
                }
                let i = parse_count(tokens[0], line, "row index")?;
                let j = parse_count(tokens[1], line, "column index")?;
                if i == 0 || i > m || j == 0 || j > n {
                    return Err(parse_error(line, format!("index ({i}, {j}) outside {m} x {n}")));
                }
                let v = parse_value(tokens[2], line)?;
                let (i, j) = (i - 1, j - 1);
                x[(i, j)] += v;
                if i != j {
                    match header.symmetry {
                        Symmetry::General => {}
                        Symmetry::Symmetric => x[(j, i)] += v,
                        Symmetry::SkewSymmetric => x[(j, i)] -= v,
                    }
                } else if header.symmetry == Symmetry::SkewSymmetric {
                    return Err(parse_error(line, "skew-symmetric matrices have no diagonal entries"));
                }
                seen += 1;
                if seen > nnz {
                    return Err(parse_error(line, format!("more than the declared {nnz} entries")));
                }
            }
            if seen != nnz {
                return Err(parse_error(last_line, format!("expected {nnz} entries, found {seen}")));
            }
        }
    }
    Ok(x)
}

/// Parses a comma-separated grid without header; blank lines are skipped.
pub fn parse_csv(text: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() {
            continue;
        }
        let row = content
            .split(',')
            .map(|t| parse_value(t.trim(), line))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_error(
                    line,
                    format!("row has {} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(1, "no data rows"));
    }
    let (m, n) = (rows.len(), rows[0].len());
    Ok(DenseMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

/// Array-format, real, general Matrix Market text.
pub fn write_matrix_market(x: &DenseMatrix) -> String {
    let mut out = String::from("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{} {}", x.nrows(), x.ncols());
    for v in x.iter() {
        let _ = writeln!(out, "{v:e}");
    }
    out
}

pub fn write_csv(x: &DenseMatrix) -> String {
    let mut out = String::new();
    for row in x.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_matrix, gaussian_matrix};

    #[test]
    fn csv_example() {
        let x = parse_csv("4,0\n0,1").unwrap();
        assert_eq!(x, diag_matrix(&[4.0, 1.0]));
        let x = parse_csv(" 1.5 , -2e3\n\n3,4\n").unwrap();
        assert_eq!(x[(0, 1)], -2000.0);
        assert_eq!(x.nrows(), 2);
    }

    #[test]
    fn csv_rejects_ragged_and_garbage() {
        match parse_csv("1,2\n3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_csv("1,x\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_csv("").is_err());
        assert!(parse_csv("1,NaN").is_err());
    }

    #[test]
    fn round_trips_are_exact() {
        let mut x = gaussian_matrix(7, 4, 3).unwrap();
        x[(0, 0)] = 1e-300;
        x[(1, 2)] = -0.1;
        x[(2, 3)] = 1.0 / 3.0;
        let a = parse_matrix_market(&write_matrix_market(&x)).unwrap();
        let b = parse_csv(&write_csv(&x)).unwrap();
        assert_eq!(a, x);
        assert_eq!(b, x);
    }

    #[test]
    fn coordinate_duplicates_are_summed() {
        let text = "%%MatrixMarket matrix coordinate real general\n% comment\n2 3 4\n1 1 1.5\n2 3 -1\n1 1 2.5\n2 3 4\n";
        let x = parse_matrix_market(text).unwrap();
        let mut expected = DenseMatrix::zeros(2, 3);
        expected[(0, 0)] = 4.0;
        expected[(1, 2)] = 3.0;
        assert_eq!(x, expected);
    }

    #[test]
    fn array_layout_is_column_major() {
        let text = "%%MatrixMarket matrix array integer general\n2 2\n1\n2\n3\n4\n";
        let x = parse_matrix_market(text).unwrap();
        assert_eq!(x[(1, 0)], 2.0);
        assert_eq!(x[(0, 1)], 3.0);
    }

    #[test]
    fn symmetric_storage_is_mirrored() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1\n2 1 5\n";
        let x = parse_matrix_market(text).unwrap();
        assert_eq!(x[(0, 1)], 5.0);
        assert_eq!(x[(1, 0)], 5.0);
        let text = "%%MatrixMarket matrix array real symmetric\n2 2\n1\n5\n2\n";
        let y = parse_matrix_market(text).unwrap();
        assert_eq!(y[(0, 1)], 5.0);
        assert_eq!(y[(1, 1)], 2.0);
    }

    #[test]
    fn rejects_unsupported_fields_and_bad_entries() {
        for field in ["complex", "pattern"] {
            let text = format!("%%MatrixMarket matrix coordinate {field} general\n1 1 1\n1 1\n");
            assert!(matches!(parse_matrix_market(&text), Err(Error::Parse { line: 1, .. })));
        }
        let bad = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        assert!(matches!(parse_matrix_market(bad), Err(Error::Parse { line: 3, .. })));
        let short = "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n";
        assert!(matches!(parse_matrix_market(short), Err(Error::Parse { .. })));
        let count = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n";
        assert!(parse_matrix_market(count).is_err());
        assert!(parse_matrix_market("1 2\n").is_err());
    }

    #[test]
    fn files_round_trip_and_formats_are_inferred() {
        let dir = tempfile::tempdir().unwrap();
        let x = gaussian_matrix(3, 5, 1).unwrap();
        for name in ["a.mtx", "b.csv"] {
            let path = dir.path().join(name);
            let format = MatrixFormat::from_path(&path).unwrap();
            save_matrix(&x, &path, format).unwrap();
            assert_eq!(load_matrix_auto(&path).unwrap(), x);
        }
        assert!(MatrixFormat::from_path(Path::new("x.bin")).is_err());
        assert_eq!("csv".parse::<MatrixFormat>().unwrap(), MatrixFormat::Csv);
    }
}
