//! Vector snapshot format: `VECFMT 1 <len>` followed by one full-precision
//! value per line. Solution snapshots reuse this format.

use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &str = "VECFMT";
const VERSION: u32 = 1;

pub fn save_vector(v: &[f64], path: &Path) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::with_capacity(v.len() * 24 + 32);
    writeln!(out, "{MAGIC} {VERSION} {}", v.len()).unwrap();
    for x in v {
        writeln!(out, "{x:e}").unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_vector(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    load_vector_str(&text).map_err(|e| match e {
        Error::Parse { msg, .. } => Error::parse(path.display().to_string(), msg),
        other => other,
    })
}

pub fn load_vector_str(text: &str) -> Result<Vec<f64>> {
    let path = "<memory>";
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::parse(path, "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != MAGIC {
        return Err(Error::parse(path, "malformed header"));
    }
    let version: u32 = fields[1]
        .parse()
        .map_err(|_| Error::parse(path, "bad version"))?;
    if version != VERSION {
        return Err(Error::parse(path, format!("unsupported version {version}")));
    }
    let len: usize = fields[2]
        .parse()
        .map_err(|_| Error::parse(path, "bad length"))?;
    if len > (1 << 30) {
        return Err(Error::parse(path, "length out of range"));
    }
    let mut out = Vec::with_capacity(len);
    for line in lines {
        let x: f64 = line
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, format!("bad value {line:?}")))?;
        out.push(x);
    }
    if out.len() != len {
        return Err(Error::parse(
            path,
            format!("expected {len} values, found {}", out.len()),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.txt");
        let v = vec![1.0, -2.5e-8, 0.0, 3.25e17];
        save_vector(&v, &path).unwrap();
        assert_eq!(load_vector(&path).unwrap(), v);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(load_vector_str("VECFMT 1 3\n1.0\n2.0\n").is_err());
        assert!(load_vector_str("VECFMT 1 1\n1.0\n2.0\n").is_err());
    }
}
