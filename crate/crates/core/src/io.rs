//! Plain-text network files.
//!
//! * edges: one `u v` pair per line, 0-indexed, whitespace separated
//! * attributes: one row of whitespace-separated reals per node
//! * labels: one non-negative integer per line
//!
//! Blank lines are ignored. Self-loops are dropped and repeated edges collapse.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::AttributedNetwork;
use crate::linalg::{DenseMatrix, SparseMatrix};

pub const EDGE_FILE: &str = "edges.txt";
pub const ATTR_FILE: &str = "attrs.txt";
pub const LABEL_FILE: &str = "labels.txt";

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Non-blank lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn read_attributes(path: &Path) -> Result<DenseMatrix> {
    let text = read(path)?;
    let mut rows = Vec::new();
    for (ln, line) in content_lines(&text) {
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(path, ln, format!("bad attribute value `{tok}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(parse_err(
                    path,
                    ln,
                    format!("{} attributes, expected {first}", row.len()),
                ));
            }
        }
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows)
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = read(path)?;
    content_lines(&text)
        .map(|(ln, line)| {
            line.parse::<usize>()
                .map_err(|_| parse_err(path, ln, format!("bad label `{line}`")))
        })
        .collect()
}

/// Reads an edge list for `n` nodes. The flag is set when the file lists some
/// edges in both directions but others in only one.
fn read_edges(path: &Path, n: usize) -> Result<(SparseMatrix, bool)> {
    let text = read(path)?;
    let mut pairs = Vec::new();
    for (ln, line) in content_lines(&text) {
        let mut it = line.split_whitespace();
        let node = |it: &mut std::str::SplitWhitespace<'_>| -> Result<usize> {
            let tok = it
                .next()
                .ok_or_else(|| parse_err(path, ln, "expected two node ids"))?;
            let v = tok
                .parse::<usize>()
                .map_err(|_| parse_err(path, ln, format!("bad node id `{tok}`")))?;
            if v >= n {
                return Err(parse_err(path, ln, format!("node {v} out of range for {n} nodes")));
            }
            Ok(v)
        };
        let u = node(&mut it)?;
        let v = node(&mut it)?;
        if it.next().is_some() {
            return Err(parse_err(path, ln, "trailing fields after edge"));
        }
        if u != v {
            pairs.push((u, v));
        }
    }
    let directed: std::collections::HashSet<(usize, usize)> = pairs.iter().copied().collect();
    let has_reverse = |&(u, v): &(usize, usize)| directed.contains(&(v, u));
    let listed_both_ways = directed.iter().any(has_reverse);
    let symmetrized = listed_both_ways && !directed.iter().all(has_reverse);
    Ok((SparseMatrix::adjacency_from_pairs(n, pairs)?, symmetrized))
}

pub fn load_network(
    edge_path: &Path,
    attr_path: &Path,
    label_path: Option<&Path>,
) -> Result<AttributedNetwork> {
    let attributes = read_attributes(attr_path)?;
    let n = attributes.rows();
    let (adjacency, symmetrized) = read_edges(edge_path, n)?;
    let labels = label_path.map(read_labels).transpose()?;
    if let (Some(p), Some(l)) = (label_path, &labels) {
        if l.len() != n {
            return Err(Error::Labels(format!(
                "{}: {} labels for {n} nodes",
                p.display(),
                l.len()
            )));
        }
    }
    let mut net = AttributedNetwork::new(adjacency, attributes, labels)?;
    net.symmetrized_input = symmetrized;
    Ok(net)
}

/// Loads `edges.txt`, `attrs.txt` and (if present) `labels.txt` from `dir`.
pub fn load_network_dir(dir: &Path) -> Result<AttributedNetwork> {
    let labels = dir.join(LABEL_FILE);
    load_network(
        &dir.join(EDGE_FILE),
        &dir.join(ATTR_FILE),
        labels.exists().then_some(labels.as_path()),
    )
}

fn write_file(path: PathBuf, body: &str) -> Result<()> {
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| Error::io(&path, e))
}

/// Writes the network into `dir` (created if missing). Each undirected edge
/// is written once as `u v` with `u < v`; reals use shortest round-trip form.
pub fn save_network(net: &AttributedNetwork, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut edges = String::new();
    for (i, j, _) in net.adjacency().triplets().filter(|&(i, j, _)| i < j) {
        edges.push_str(&format!("{i} {j}\n"));
    }
    write_file(dir.join(EDGE_FILE), &edges)?;

    let mut attrs = String::new();
    for row in net.attributes().iter_rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        attrs.push_str(&line.join(" "));
        attrs.push('\n');
    }
    write_file(dir.join(ATTR_FILE), &attrs)?;

    if let Some(labels) = net.labels() {
        write_labels(&dir.join(LABEL_FILE), labels)?;
    }
    Ok(())
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut body = String::with_capacity(labels.len() * 3);
    for l in labels {
        body.push_str(&format!("{l}\n"));
    }
    write_file(path.to_path_buf(), &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn empty_edges_two_nodes() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e", "");
        let a = write(dir.path(), "a", "1 0\n0 1\n");
        let net = load_network(&e, &a, None).unwrap();
        assert_eq!(net.num_nodes(), 2);
        assert_eq!(net.num_edges(), 0);
    }

    #[test]
    fn duplicates_collapse_and_order_does_not_matter() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a", "0\n0\n0\n");
        let e1 = write(dir.path(), "e1", "0 1\n0 1\n1 2\n");
        let e2 = write(dir.path(), "e2", "1 2\n0 1\n");
        let n1 = load_network(&e1, &a, None).unwrap();
        let n2 = load_network(&e2, &a, None).unwrap();
        assert_eq!(n1.num_edges(), 2);
        assert_eq!(n1, n2);
    }

    #[test]
    fn self_loops_are_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a", "0\n0\n");
        let e = write(dir.path(), "e", "0 0\n0 1\n");
        assert_eq!(load_network(&e, &a, None).unwrap().num_edges(), 1);
    }

    #[test]
    fn partially_directed_listing_sets_flag() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a", "0\n0\n0\n");
        let e = write(dir.path(), "e", "0 1\n1 0\n1 2\n");
        let net = load_network(&e, &a, None).unwrap();
        assert!(net.symmetrized_input);
        assert!(net.adjacency().is_symmetric());
        assert_eq!(net.num_edges(), 2);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a", "0 1\n0 x\n");
        let e = write(dir.path(), "e", "");
        match load_network(&e, &a, None).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let a = write(dir.path(), "a2", "0\n0\n");
        let e = write(dir.path(), "e2", "0 1\n\n1 5\n");
        match load_network(&e, &a, None).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_network(Path::new("/nope/e"), Path::new("/nope/a"), None).unwrap_err();
        assert!(err.to_string().contains("/nope/a"));
    }

    #[test]
    fn label_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a", "0\n0\n");
        let e = write(dir.path(), "e", "");
        let l = write(dir.path(), "l", "0\n");
        assert!(matches!(
            load_network(&e, &a, Some(&l)),
            Err(Error::Labels(_))
        ));
    }
}
