//! MatrixMarket coordinate export/import for debugging assembled operators.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Writes a symmetric matrix in coordinate format (lower triangle).
pub fn write_matrix_market(a: &CsrMatrix, path: &Path) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    let symmetric = a.is_symmetric(0.0);
    writeln!(
        out,
        "%%MatrixMarket matrix coordinate real {}",
        if symmetric { "symmetric" } else { "general" }
    )
    .unwrap();
    let mut entries = Vec::new();
    for r in 0..a.n_rows() {
        let (cols, vals) = a.row(r);
        for (c, v) in cols.iter().zip(vals) {
            if *v != 0.0 && (!symmetric || *c <= r) {
                entries.push((r, *c, *v));
            }
        }
    }
    writeln!(out, "{} {} {}", a.n_rows(), a.n_cols(), entries.len()).unwrap();
    for (r, c, v) in entries {
        writeln!(out, "{} {} {v:e}", r + 1, c + 1).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a real coordinate-format matrix (general or symmetric).
pub fn read_matrix_market(text: &str) -> Result<CsrMatrix> {
    let path = "<matrix-market>";
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::parse(path, "empty file"))?;
    let fields: Vec<String> = header.split_whitespace().map(|f| f.to_lowercase()).collect();
    if fields.len() < 5
        || fields[0] != "%%matrixmarket"
        || fields[1] != "matrix"
        || fields[2] != "coordinate"
        || fields[3] != "real"
    {
        return Err(Error::parse(path, "unsupported MatrixMarket header"));
    }
    let symmetric = match fields[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => {
            return Err(Error::parse(
                path,
                format!("unsupported symmetry kind {other:?}"),
            ))
        }
    };
    let mut lines = lines.filter(|l| !l.trim_start().starts_with('%'));
    let size_line = lines
        .next()
        .ok_or_else(|| Error::parse(path, "missing size line"))?;
    let sizes: Vec<&str> = size_line.split_whitespace().collect();
    if sizes.len() != 3 {
        return Err(Error::parse(path, "malformed size line"));
    }
    let n_rows: usize = sizes[0]
        .parse()
        .map_err(|_| Error::parse(path, "bad row count"))?;
    let n_cols: usize = sizes[1]
        .parse()
        .map_err(|_| Error::parse(path, "bad column count"))?;
    let nnz: usize = sizes[2]
        .parse()
        .map_err(|_| Error::parse(path, "bad entry count"))?;
    if n_rows > (1 << 28) || n_cols > (1 << 28) || nnz > (1 << 28) {
        return Err(Error::parse(path, "sizes out of range"));
    }
    let mut triplets = Vec::with_capacity(nnz * 2);
    let mut count = 0usize;
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::parse(path, format!("malformed entry {line:?}")));
        }
        let r: usize = toks[0]
            .parse()
            .map_err(|_| Error::parse(path, "bad row index"))?;
        let c: usize = toks[1]
            .parse()
            .map_err(|_| Error::parse(path, "bad column index"))?;
        let v: f64 = toks[2]
            .parse()
            .map_err(|_| Error::parse(path, "bad value"))?;
        if r == 0 || c == 0 || r > n_rows || c > n_cols {
            return Err(Error::parse(path, format!("index out of range in {line:?}")));
        }
        triplets.push((r - 1, c - 1, v));
        if symmetric && r != c {
            triplets.push((c - 1, r - 1, v));
        }
        count += 1;
    }
    if count != nnz {
        return Err(Error::parse(
            path,
            format!("expected {nnz} entries, found {count}"),
        ));
    }
    Ok(CsrMatrix::from_triplets(n_rows, n_cols, &triplets))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_round_trip() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 2.0), (1, 0, -1.0), (0, 1, -1.0), (1, 1, 2.0), (2, 2, 1.5)],
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.mtx");
        write_matrix_market(&a, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric"));
        let b = read_matrix_market(&text).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_entries_rejected() {
        assert!(read_matrix_market("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1.0\n").is_err());
        assert!(read_matrix_market("%%MatrixMarket matrix array real general\n").is_err());
    }
}
