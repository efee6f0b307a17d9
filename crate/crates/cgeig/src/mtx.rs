//! Matrix Market coordinate files (real, integer or pattern; general or
//! symmetric storage).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cgeig_core::CsrMatrix;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

/// Reads a sparse real matrix. Symmetric files are expanded to both triangles.
pub fn read_mtx(path: &Path) -> Result<CsrMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_mtx(&text, path)
}

/// Parses Matrix Market text; `path` only labels errors.
pub fn parse_mtx(text: &str, path: &Path) -> Result<CsrMatrix<f64>> {
    let err = |line: usize, msg: String| HarnessError::Parse { path: path.to_path_buf(), line, msg };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let h: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" {
        return Err(err(1, format!("bad header '{header}'")));
    }
    if h[2] != "coordinate" {
        return Err(err(1, format!("only coordinate storage is supported, got '{}'", h[2])));
    }
    let field = match h[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(err(1, format!("unsupported field '{other}'"))),
    };
    let symmetry = match h[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (k, line) in lines {
        let lineno = k + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut next_usize = |what: &str| -> Result<usize> {
            it.next()
                .ok_or_else(|| err(lineno, format!("missing {what}")))?
                .parse::<usize>()
                .map_err(|e| err(lineno, format!("{what}: {e}")))
        };
        match size {
            None => {
                let r = next_usize("rows")?;
                let c = next_usize("cols")?;
                let nnz = next_usize("nnz")?;
                triplets.reserve(if symmetry == Symmetry::Symmetric { 2 * nnz } else { nnz });
                size = Some((r, c, nnz));
            }
            Some((r, c, _)) => {
                let i = next_usize("row index")?;
                let j = next_usize("column index")?;
                if i == 0 || j == 0 || i > r || j > c {
                    return Err(err(lineno, format!("index ({i}, {j}) out of range")));
                }
                let v = match field {
                    Field::Pattern => 1.0,
                    Field::Real | Field::Integer => it
                        .next()
                        .ok_or_else(|| err(lineno, "missing value".into()))?
                        .parse::<f64>()
                        .map_err(|e| err(lineno, format!("value: {e}")))?,
                };
                triplets.push((i - 1, j - 1, v));
                if symmetry == Symmetry::Symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (r, c, nnz) = size.ok_or_else(|| err(1, "missing size line".into()))?;
    let stored =
        if symmetry == Symmetry::Symmetric { triplets.iter().filter(|t| t.0 >= t.1).count() } else { triplets.len() };
    if stored != nnz {
        return Err(err(1, format!("header announces {nnz} entries, found {stored}")));
    }
    Ok(CsrMatrix::from_triplets(r, c, triplets)?)
}

/// Writes the lower triangle in `coordinate real symmetric` form.
pub fn write_mtx_symmetric(path: &Path, a: &CsrMatrix<f64>) -> Result<()> {
    let mut out = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    let mut entries = Vec::new();
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j <= i {
                entries.push((i, j, v));
            }
        }
    }
    let _ = writeln!(out, "{} {} {}", a.nrows(), a.ncols(), entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
    }
    fs::write(path, out).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_file_expands() {
        let text =
            "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 4\n1 1 2\n2 1 -1\n2 2 2\n3 3 1.5e0\n";
        let a = parse_mtx(text, Path::new("t.mtx")).unwrap();
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(2, 2), 1.5);
        assert_eq!(a.nnz(), 5);
    }

    #[test]
    fn pattern_and_general() {
        let text = "%%MatrixMarket matrix coordinate pattern general\n2 2 2\n1 2\n2 1\n";
        let a = parse_mtx(text, Path::new("p.mtx")).unwrap();
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(0, 0), 0.0);
    }

    #[test]
    fn bad_inputs_name_the_line() {
        let bad = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        let e = parse_mtx(bad, Path::new("b.mtx")).unwrap_err().to_string();
        assert!(e.contains("b.mtx:3"), "{e}");
        assert!(parse_mtx("%%MatrixMarket matrix array real general\n", Path::new("x")).is_err());
        assert!(parse_mtx("%%MatrixMarket matrix coordinate complex hermitian\n", Path::new("x")).is_err());
        let short = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n";
        assert!(parse_mtx(short, Path::new("x")).is_err());
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.mtx");
        let a = CsrMatrix::from_triplets(3, 3, vec![(0, 0, 4.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 4.0), (2, 2, 0.1)])
            .unwrap();
        write_mtx_symmetric(&p, &a).unwrap();
        assert_eq!(read_mtx(&p).unwrap(), a);
    }
}
