//! Network file format.
//!
//! Text variant:
//! ```text
//! NETFMT 1 <d> <n_nodes> <n_edges> <n_boundary>
//! <coordinate line per node, full-precision scientific notation>
//! <edge line per edge: two node indices>
//! <boundary line per Dirichlet node: one node index>
//! ```
//!
//! Binary variant: magic `NETB`, version u32, then d / n_nodes / n_edges /
//! n_boundary as little-endian u64, coordinates as little-endian f64, edge
//! pairs and boundary indices as little-endian u64, and a trailing CRC32 of
//! everything before it.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::Network;

const TEXT_MAGIC: &str = "NETFMT";
const BINARY_MAGIC: &[u8; 4] = b"NETB";
const VERSION: u32 = 1;

pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    let mut out = String::new();
    format_network(net, &mut out);
    std::fs::write(path, out)?;
    Ok(())
}

fn format_network(net: &Network, out: &mut String) {
    use std::fmt::Write as _;
    let d = net.dim();
    writeln!(
        out,
        "{TEXT_MAGIC} {VERSION} {d} {} {} {}",
        net.n_nodes(),
        net.n_edges(),
        net.n_boundary()
    )
    .unwrap();
    for node in 0..net.n_nodes() {
        let c = net.coord(node);
        for (i, x) in c.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{x:e}").unwrap();
        }
        out.push('\n');
    }
    for e in net.edges() {
        writeln!(out, "{} {}", e[0], e[1]).unwrap();
    }
    for b in net.boundary_nodes() {
        writeln!(out, "{b}").unwrap();
    }
}

pub fn load_network(path: &Path) -> Result<Network> {
    let bytes = std::fs::read(path)?;
    let name = path.display().to_string();
    if bytes.starts_with(BINARY_MAGIC) {
        return load_network_binary_bytes(&bytes).map_err(|e| rename(e, &name));
    }
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Error::parse(&name, "file is neither NETFMT text nor NETB binary"))?;
    load_network_bytes(text).map_err(|e| rename(e, &name))
}

fn rename(e: Error, name: &str) -> Error {
    match e {
        Error::Parse { msg, .. } => Error::parse(name, msg),
        Error::Checksum(_) => Error::Checksum(name.into()),
        other => other,
    }
}

/// Parses the text format from a string.
pub fn load_network_bytes(text: &str) -> Result<Network> {
    let path = "<memory>";
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 6 || fields[0] != TEXT_MAGIC {
        return Err(Error::parse(path, "malformed header"));
    }
    let version: u32 = parse_field(path, fields[1], "version")?;
    if version != VERSION {
        return Err(Error::parse(path, format!("unsupported version {version}")));
    }
    let d: usize = parse_field(path, fields[2], "dimension")?;
    let n_nodes: usize = parse_field(path, fields[3], "node count")?;
    let n_edges: usize = parse_field(path, fields[4], "edge count")?;
    let n_boundary: usize = parse_field(path, fields[5], "boundary count")?;
    if d == 0 || d > 8 {
        return Err(Error::parse(path, format!("unreasonable dimension {d}")));
    }
    let limit = 1usize << 28;
    if n_nodes > limit || n_edges > limit || n_boundary > n_nodes {
        return Err(Error::parse(path, "header counts out of range"));
    }

    let mut coords = Vec::with_capacity(n_nodes * d);
    for _ in 0..n_nodes {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, "unexpected end of file in node block"))?;
        let mut count = 0;
        for tok in line.split_whitespace() {
            let x: f64 = tok
                .parse()
                .map_err(|_| Error::parse(path, format!("bad coordinate on line {}", ln + 1)))?;
            coords.push(x);
            count += 1;
        }
        if count != d {
            return Err(Error::parse(
                path,
                format!("expected {d} coordinates on line {}", ln + 1),
            ));
        }
    }
    let mut edges = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, "unexpected end of file in edge block"))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(Error::parse(path, format!("bad edge on line {}", ln + 1)));
        }
        let a: usize = parse_field(path, toks[0], "edge endpoint")?;
        let b: usize = parse_field(path, toks[1], "edge endpoint")?;
        edges.push([a, b]);
    }
    let mut boundary = Vec::with_capacity(n_boundary);
    for _ in 0..n_boundary {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, "unexpected end of file in boundary block"))?;
        let b: usize = line
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, format!("bad boundary index on line {}", ln + 1)))?;
        boundary.push(b);
    }
    if lines.next().is_some() {
        return Err(Error::parse(path, "trailing content after boundary block"));
    }
    Network::new(d, coords, edges, &boundary)
        .map_err(|e| Error::parse(path, format!("invalid network: {e}")))
}

fn parse_field<T: std::str::FromStr>(path: &str, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(path, format!("cannot parse {what} from {tok:?}")))
}

pub fn save_network_binary(net: &Network, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(BINARY_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for v in [
        net.dim() as u64,
        net.n_nodes() as u64,
        net.n_edges() as u64,
        net.n_boundary() as u64,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for x in net.coords() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    for e in net.edges() {
        buf.extend_from_slice(&(e[0] as u64).to_le_bytes());
        buf.extend_from_slice(&(e[1] as u64).to_le_bytes());
    }
    for b in net.boundary_nodes() {
        buf.extend_from_slice(&(b as u64).to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Parses the binary format from raw bytes.
pub fn load_network_binary_bytes(bytes: &[u8]) -> Result<Network> {
    let path = "<memory>";
    let mut cursor = Cursor::new(bytes, path);
    let magic = cursor.take(4)?;
    if magic != BINARY_MAGIC {
        return Err(Error::parse(path, "missing NETB magic"));
    }
    if bytes.len() < 4 {
        return Err(Error::parse(path, "truncated file"));
    }
    let payload_len = bytes.len().checked_sub(4).ok_or_else(|| Error::parse(path, "truncated file"))?;
    let crc_stored = u32::from_le_bytes(bytes[payload_len..].try_into().unwrap());
    if crc32fast::hash(&bytes[..payload_len]) != crc_stored {
        return Err(Error::Checksum(path.into()));
    }

    let version = cursor.u32()?;
    if version != VERSION {
        return Err(Error::parse(path, format!("unsupported version {version}")));
    }
    let d = cursor.u64()? as usize;
    let n_nodes = cursor.u64()? as usize;
    let n_edges = cursor.u64()? as usize;
    let n_boundary = cursor.u64()? as usize;
    if d == 0 || d > 8 {
        return Err(Error::parse(path, format!("unreasonable dimension {d}")));
    }
    let expect = n_nodes
        .checked_mul(d)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(n_edges.checked_mul(16)?))
        .and_then(|c| c.checked_add(n_boundary.checked_mul(8)?))
        .ok_or_else(|| Error::parse(path, "header counts overflow"))?;
    if cursor.remaining() != expect + 4 {
        return Err(Error::parse(path, "payload size does not match header"));
    }

    let mut coords = Vec::with_capacity(n_nodes * d);
    for _ in 0..n_nodes * d {
        coords.push(cursor.f64()?);
    }
    let mut edges = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let a = cursor.u64()? as usize;
        let b = cursor.u64()? as usize;
        edges.push([a, b]);
    }
    let mut boundary = Vec::with_capacity(n_boundary);
    for _ in 0..n_boundary {
        boundary.push(cursor.u64()? as usize);
    }
    Network::new(d, coords, edges, &boundary)
        .map_err(|e| Error::parse(path, format!("invalid network: {e}")))
}

pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(bytes: &'a [u8], path: &'a str) -> Self {
        Cursor { bytes, pos: 0, path }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::parse(self.path, "truncated file"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_fiber_network, GeneratorConfig};

    #[test]
    fn text_round_trip_is_bitwise_exact() {
        let net = generate_fiber_network(&GeneratorConfig::new(30.0, 1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.txt");
        save_network(&net, &path).unwrap();
        let loaded = load_network(&path).unwrap();
        assert_eq!(net.coords(), loaded.coords());
        assert_eq!(net.edges(), loaded.edges());
        assert_eq!(net.boundary_nodes(), loaded.boundary_nodes());
    }

    #[test]
    fn binary_round_trip_is_bitwise_exact() {
        let net = generate_fiber_network(&GeneratorConfig::new(30.0, 2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        save_network_binary(&net, &path).unwrap();
        let loaded = load_network(&path).unwrap();
        assert_eq!(net.coords(), loaded.coords());
        assert_eq!(net.edges(), loaded.edges());
        assert_eq!(net.boundary_nodes(), loaded.boundary_nodes());
    }

    #[test]
    fn dangling_edge_index_is_rejected() {
        let text = "NETFMT 1 2 2 1 1\n0e0 0e0\n1e0 0e0\n0 5\n0\n";
        match load_network_bytes(text) {
            Err(Error::Parse { .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn corrupted_binary_fails_checksum() {
        let net = generate_fiber_network(&GeneratorConfig::new(30.0, 3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        save_network_binary(&net, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        match load_network_binary_bytes(&bytes) {
            Err(Error::Checksum(_)) | Err(Error::Parse { .. }) => {}
            other => panic!("expected checksum/parse failure, got {other:?}"),
        }
    }

    #[test]
    fn malformed_header_is_rejected() {
        assert!(load_network_bytes("BOGUS 1 2 3 4 5\n").is_err());
        assert!(load_network_bytes("NETFMT 9 2 1 0 0\n0e0 0e0\n").is_err());
        assert!(load_network_bytes("").is_err());
    }
}
