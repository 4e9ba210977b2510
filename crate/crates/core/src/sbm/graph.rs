use crate::error::{Error, Result};

/// An immutable realized graph in compressed-row form, with block labels.
///
/// Undirected graphs store every edge in both endpoint rows (a self-loop
/// once), so `out_neighbors` is the neighborhood. Directed graphs keep a
/// transposed copy for `in_neighbors`. Neighbor lists are sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    directed: bool,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    in_offsets: Vec<usize>,
    in_sources: Vec<u32>,
    labels: Vec<usize>,
    block_sizes: Vec<usize>,
    edge_count: usize,
}

impl Graph {
    /// Builds a graph from an edge list. Duplicate edges collapse; for
    /// undirected graphs `(u, v)` and `(v, u)` name the same edge.
    pub fn from_edges(n: usize, directed: bool, edges: &[(usize, usize)], labels: Vec<usize>) -> Result<Graph> {
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: labels.len() });
        }
        if n > u32::MAX as usize {
            return Err(Error::invalid("node count exceeds u32 range"));
        }
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::invalid(format!("edge ({u}, {v}) has an endpoint outside 0..{n}")));
            }
            if directed {
                rows[u].push(v as u32);
            } else {
                let (a, b) = if u <= v { (u, v) } else { (v, u) };
                rows[a].push(b as u32);
            }
        }
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
        }
        Ok(Graph::from_sorted_rows(n, directed, rows, labels))
    }

    /// Graph with every node in block 0.
    pub fn unlabeled(n: usize, directed: bool, edges: &[(usize, usize)]) -> Result<Graph> {
        Graph::from_edges(n, directed, edges, vec![0; n])
    }

    /// `rows[u]` holds sorted successors of `u`; for undirected graphs only
    /// the successors `v >= u`.
    pub(crate) fn from_sorted_rows(n: usize, directed: bool, rows: Vec<Vec<u32>>, labels: Vec<usize>) -> Graph {
        let num_blocks = labels.iter().max().map_or(0, |&m| m + 1);
        let mut block_sizes = vec![0usize; num_blocks];
        for &l in &labels {
            block_sizes[l] += 1;
        }

        let (offsets, targets, edge_count) = if directed {
            let edge_count = rows.iter().map(Vec::len).sum();
            let (o, t) = flatten(&rows);
            (o, t, edge_count)
        } else {
            let mut degree = vec![0usize; n];
            let mut edge_count = 0;
            for (u, row) in rows.iter().enumerate() {
                for &v in row {
                    edge_count += 1;
                    degree[u] += 1;
                    if v as usize != u {
                        degree[v as usize] += 1;
                    }
                }
            }
            let offsets = prefix_sums(&degree);
            let mut fill = offsets[..n].to_vec();
            let mut targets = vec![0u32; offsets[n]];
            // Ascending u keeps every row sorted: entries u < v arrive first,
            // then v's own upper successors.
            for (u, row) in rows.iter().enumerate() {
                for &v in row {
                    let v = v as usize;
                    targets[fill[u]] = v as u32;
                    fill[u] += 1;
                    if v != u {
                        targets[fill[v]] = u as u32;
                        fill[v] += 1;
                    }
                }
            }
            (offsets, targets, edge_count)
        };
        drop(rows);

        let (in_offsets, in_sources) = if directed {
            let mut indeg = vec![0usize; n];
            for &v in &targets {
                indeg[v as usize] += 1;
            }
            let in_offsets = prefix_sums(&indeg);
            let mut fill = in_offsets[..n].to_vec();
            let mut in_sources = vec![0u32; targets.len()];
            for u in 0..n {
                for &v in &targets[offsets[u]..offsets[u + 1]] {
                    in_sources[fill[v as usize]] = u as u32;
                    fill[v as usize] += 1;
                }
            }
            (in_offsets, in_sources)
        } else {
            (Vec::new(), Vec::new())
        };

        Graph { directed, offsets, targets, in_offsets, in_sources, labels, block_sizes, edge_count }
    }

    /// Same graph with node `v` renamed `perm[v]`; labels move with their nodes.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: perm.len() });
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::invalid("node relabeling is not a permutation"));
            }
        }
        let edges: Vec<(usize, usize)> = self.edges().map(|(u, v)| (perm[u], perm[v])).collect();
        let mut labels = vec![0; n];
        for (v, &l) in self.labels.iter().enumerate() {
            labels[perm[v]] = l;
        }
        let mut g = Graph::from_edges(n, self.directed, &edges, labels)?;
        // keep empty trailing blocks that relabeling cannot see
        g.block_sizes = self.block_sizes.clone();
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Edges for undirected graphs, arcs for directed ones.
    pub fn num_edges(&self) -> usize {
        self.edge_count
    }

    pub fn out_neighbors(&self, u: usize) -> &[u32] {
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn in_neighbors(&self, u: usize) -> &[u32] {
        if self.directed {
            &self.in_sources[self.in_offsets[u]..self.in_offsets[u + 1]]
        } else {
            self.out_neighbors(u)
        }
    }

    /// Position of `u`'s first out-neighbor in the flat neighbor array, so
    /// `row_offset(u) + i` indexes the arc to `out_neighbors(u)[i]`.
    pub fn row_offset(&self, u: usize) -> usize {
        self.offsets[u]
    }

    pub fn out_degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.out_neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    /// 0-based block id per node.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    /// Edges sorted by `(u, v)`; undirected edges are reported once with `u <= v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n()).flat_map(move |u| {
            self.out_neighbors(u)
                .iter()
                .map(move |&v| (u, v as usize))
                .filter(move |&(u, v)| self.directed || u <= v)
        })
    }
}

fn prefix_sums(counts: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(counts.len() + 1);
    offsets.push(0);
    let mut acc = 0;
    for &c in counts {
        acc += c;
        offsets.push(acc);
    }
    offsets
}

fn flatten(rows: &[Vec<u32>]) -> (Vec<usize>, Vec<u32>) {
    let counts: Vec<usize> = rows.iter().map(Vec::len).collect();
    let offsets = prefix_sums(&counts);
    let mut targets = Vec::with_capacity(offsets[rows.len()]);
    for row in rows {
        targets.extend_from_slice(row);
    }
    (offsets, targets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undirected_edges_are_mirrored() {
        let g = Graph::unlabeled(4, false, &[(0, 1), (2, 1), (3, 3), (1, 0)]).unwrap();
        assert_eq!(g.num_edges(), 3);
        assert_eq!(g.out_neighbors(1), &[0, 2]);
        assert_eq!(g.out_neighbors(3), &[3]);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2), (3, 3)]);
    }

    #[test]
    fn directed_in_neighbors() {
        let g = Graph::unlabeled(3, true, &[(0, 1), (2, 1), (1, 0)]).unwrap();
        assert_eq!(g.in_neighbors(1), &[0, 2]);
        assert_eq!(g.out_neighbors(1), &[0]);
        assert_eq!(g.num_edges(), 3);
    }

    #[test]
    fn rejects_bad_endpoints() {
        assert!(Graph::unlabeled(2, false, &[(0, 2)]).is_err());
        assert!(Graph::from_edges(2, false, &[], vec![0]).is_err());
    }

    #[test]
    fn block_sizes_from_labels() {
        let g = Graph::from_edges(5, false, &[], vec![0, 0, 1, 2, 2]).unwrap();
        assert_eq!(g.block_sizes(), &[2, 1, 2]);
    }

    #[test]
    fn permuting_preserves_structure() {
        let g = Graph::from_edges(4, false, &[(0, 1), (1, 2), (3, 3)], vec![0, 0, 1, 1]).unwrap();
        let p = g.permuted(&[2, 0, 3, 1]).unwrap();
        assert_eq!(p.edges().collect::<Vec<_>>(), vec![(0, 2), (0, 3), (1, 1)]);
        assert_eq!(p.labels(), &[0, 1, 0, 1]);
        assert_eq!(p.block_sizes(), g.block_sizes());
        assert!(g.permuted(&[0, 0, 1, 2]).is_err());
        assert!(g.permuted(&[0, 1]).is_err());
    }
}
