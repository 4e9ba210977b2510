//! Text formats for graphs: a TSV edge list, a TSV label file and JSON params.

use std::io::{BufRead, Write};

use super::{Graph, SbmParams};
use crate::error::{Error, Result};

/// One `u\tv` line per edge, 0-indexed, sorted by `(u, v)`.
pub fn write_edge_list<W: Write>(graph: &Graph, mut out: W) -> Result<()> {
    for (u, v) in graph.edges() {
        writeln!(out, "{u}\t{v}")?;
    }
    Ok(())
}

/// One `node\tblock` line per node; blocks are written 1-based.
pub fn write_labels<W: Write>(graph: &Graph, mut out: W) -> Result<()> {
    for (v, &b) in graph.labels().iter().enumerate() {
        writeln!(out, "{v}\t{}", b + 1)?;
    }
    Ok(())
}

pub fn write_params<W: Write>(params: &SbmParams, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, params)?;
    Ok(())
}

pub fn read_params<R: std::io::Read>(input: R) -> Result<SbmParams> {
    let params: SbmParams = serde_json::from_reader(input)?;
    params.validate()?;
    Ok(params)
}

fn parse_pair(line: &str, lineno: usize) -> Result<(usize, usize)> {
    let mut parts = line.split('\t');
    let mut field = |name: &str| -> Result<usize> {
        parts
            .next()
            .ok_or_else(|| Error::Parse(format!("line {lineno}: missing {name}")))?
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("line {lineno}: bad {name}: {e}")))
    };
    let a = field("first column")?;
    let b = field("second column")?;
    Ok((a, b))
}

pub fn read_edge_list<R: BufRead>(input: R) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        edges.push(parse_pair(&line, i + 1)?);
    }
    Ok(edges)
}

/// Reads a label file back into 0-based block ids indexed by node.
pub fn read_labels<R: BufRead>(input: R) -> Result<Vec<usize>> {
    let mut pairs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (node, block) = parse_pair(&line, i + 1)?;
        if block == 0 {
            return Err(Error::Parse(format!("line {}: block ids start at 1", i + 1)));
        }
        pairs.push((node, block - 1));
    }
    let n = pairs.len();
    let mut labels = vec![usize::MAX; n];
    for (node, block) in pairs {
        if node >= n || labels[node] != usize::MAX {
            return Err(Error::Parse(format!("label file must list nodes 0..{n} exactly once")));
        }
        labels[node] = block;
    }
    Ok(labels)
}

pub fn read_graph<E: BufRead, L: BufRead>(edges: E, labels: L, directed: bool) -> Result<Graph> {
    let labels = read_labels(labels)?;
    let edges = read_edge_list(edges)?;
    Graph::from_edges(labels.len(), directed, &edges, labels)
}
