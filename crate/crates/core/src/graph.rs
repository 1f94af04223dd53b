//! Pixel neighbourhood graphs: which pairs of sites interact in the
//! smoothing prior, and the per-site degrees `n_i` the weighted metric and
//! the mixing bounds depend on.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Grid adjacency scheme: orthogonal neighbours only, or orthogonal plus
/// diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridScheme {
    N4,
    N8,
}

/// Symmetric, loop-free, duplicate-free adjacency structure over `N` sites.
///
/// Immutable after construction; cheap to share across threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodGraph {
    num_sites: usize,
    adjacency: Vec<Vec<usize>>,
    degrees: Vec<usize>,
    n_max: usize,
    n_min: usize,
}

/// JSON document form: `{"num_sites": N, "edges": [[i,j], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDocument {
    pub num_sites: usize,
    pub edges: Vec<(usize, usize)>,
}

impl NeighborhoodGraph {
    fn from_adjacency(adjacency: Vec<Vec<usize>>) -> Self {
        let degrees: Vec<usize> = adjacency.iter().map(Vec::len).collect();
        let n_max = degrees.iter().copied().max().unwrap_or(0);
        let n_min = degrees.iter().copied().min().unwrap_or(0);
        NeighborhoodGraph {
            num_sites: adjacency.len(),
            adjacency,
            degrees,
            n_max,
            n_min,
        }
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    /// Neighbours of site `i`, sorted ascending.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    /// Degree `n_i`.
    pub fn degree(&self, i: usize) -> usize {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn n_min(&self) -> usize {
        self.n_min
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.degrees.iter().sum::<usize>() / 2
    }

    /// Edge list with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for (i, adj) in self.adjacency.iter().enumerate() {
            for &j in adj {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Sum of `x` over the neighbours of `i`.
    pub fn neighbor_sum(&self, x: &[f64], i: usize) -> f64 {
        self.adjacency[i].iter().map(|&j| x[j]).sum()
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            num_sites: self.num_sites,
            edges: self.edges(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: GraphDocument = serde_json::from_str(s)?;
        build_custom_graph(&doc.edges, doc.num_sites)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("graph document serializes")
    }
}

/// Builds a `width x height` grid graph with row-major site indexing
/// (site = `row * width + col`). `N4` connects orthogonal neighbours, `N8`
/// additionally the diagonals. Boundary pixels simply have fewer
/// neighbours; there is no wrap-around.
pub fn build_grid_graph(width: usize, height: usize, scheme: GridScheme) -> Result<NeighborhoodGraph> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimension { width, height });
    }
    let offsets: &[(i64, i64)] = match scheme {
        GridScheme::N4 => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
        GridScheme::N8 => &[
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ],
    };
    let mut adjacency = vec![Vec::new(); width * height];
    for row in 0..height {
        for col in 0..width {
            let site = row * width + col;
            for &(dr, dc) in offsets {
                let (nr, nc) = (row as i64 + dr, col as i64 + dc);
                if nr >= 0 && nr < height as i64 && nc >= 0 && nc < width as i64 {
                    adjacency[site].push(nr as usize * width + nc as usize);
                }
            }
            adjacency[site].sort_unstable();
        }
    }
    Ok(NeighborhoodGraph::from_adjacency(adjacency))
}

/// Builds a graph from an explicit unordered edge list. Edges are
/// symmetrized and deduplicated; self-loops and out-of-range endpoints are
/// rejected.
pub fn build_custom_graph(edges: &[(usize, usize)], num_sites: usize) -> Result<NeighborhoodGraph> {
    let mut adjacency = vec![Vec::new(); num_sites];
    for &(a, b) in edges {
        if a == b {
            return Err(Error::SelfLoop(a));
        }
        for endpoint in [a, b] {
            if endpoint >= num_sites {
                return Err(Error::EndpointOutOfRange {
                    endpoint,
                    num_sites,
                });
            }
        }
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
        adj.dedup();
    }
    Ok(NeighborhoodGraph::from_adjacency(adjacency))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_site_has_no_neighbors() {
        let g = build_grid_graph(1, 1, GridScheme::N4).unwrap();
        assert_eq!(g.num_sites(), 1);
        assert_eq!(g.degree(0), 0);
        assert_eq!(g.n_max(), 0);
        assert_eq!(g.n_min(), 0);
    }

    #[test]
    fn two_by_two_n4_is_2_regular() {
        let g = build_grid_graph(2, 2, GridScheme::N4).unwrap();
        assert_eq!(g.num_sites(), 4);
        for i in 0..4 {
            assert_eq!(g.degree(i), 2, "site {i}");
        }
        assert_eq!(g.n_max(), 2);
        assert_eq!(g.n_min(), 2);
        assert_eq!(g.num_edges(), 4);
    }

    #[test]
    fn three_by_three_n4_degrees() {
        let g = build_grid_graph(3, 3, GridScheme::N4).unwrap();
        // corners 2, edge-midpoints 3, center 4
        assert_eq!(g.degree(0), 2);
        assert_eq!(g.degree(1), 3);
        assert_eq!(g.degree(4), 4);
        assert_eq!(g.n_max(), 4);
        assert_eq!(g.n_min(), 2);
        // |edges| = w(h-1) + h(w-1) for N4
        assert_eq!(g.num_edges(), 3 * 2 + 3 * 2);
    }

    #[test]
    fn two_by_two_n8_adds_diagonals() {
        let g = build_grid_graph(2, 2, GridScheme::N8).unwrap();
        for i in 0..4 {
            assert_eq!(g.degree(i), 3);
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            build_grid_graph(0, 3, GridScheme::N4),
            Err(Error::InvalidDimension { .. })
        ));
        assert!(matches!(
            build_grid_graph(3, 0, GridScheme::N8),
            Err(Error::InvalidDimension { .. })
        ));
    }

    #[test]
    fn custom_graph_basics() {
        let g = build_custom_graph(&[], 3).unwrap();
        assert_eq!(g.degrees(), &[0, 0, 0]);

        let g = build_custom_graph(&[(0, 1)], 2).unwrap();
        assert_eq!(g.degrees(), &[1, 1]);

        // duplicate (in either orientation) collapses
        let g2 = build_custom_graph(&[(0, 1), (1, 0)], 2).unwrap();
        assert_eq!(g2, g);
    }

    #[test]
    fn custom_graph_rejects_bad_edges() {
        assert!(matches!(
            build_custom_graph(&[(1, 1)], 3),
            Err(Error::SelfLoop(1))
        ));
        assert!(matches!(
            build_custom_graph(&[(0, 5)], 3),
            Err(Error::EndpointOutOfRange { .. })
        ));
    }

    #[test]
    fn degree_sum_is_twice_edges() {
        for (w, h) in [(2, 2), (3, 5), (7, 1), (4, 4)] {
            for scheme in [GridScheme::N4, GridScheme::N8] {
                let g = build_grid_graph(w, h, scheme).unwrap();
                let degree_sum: usize = g.degrees().iter().sum();
                assert_eq!(degree_sum, 2 * g.num_edges(), "{w}x{h} {scheme:?}");
            }
        }
    }

    #[test]
    fn grid_roundtrips_through_edge_list() {
        let g = build_grid_graph(4, 3, GridScheme::N8).unwrap();
        let rebuilt = build_custom_graph(&g.edges(), g.num_sites()).unwrap();
        assert_eq!(g, rebuilt);
    }

    #[test]
    fn json_roundtrip() {
        let g = build_custom_graph(&[(0, 1), (1, 2)], 4).unwrap();
        let s = g.to_json_string();
        let back = NeighborhoodGraph::from_json_str(&s).unwrap();
        assert_eq!(g, back);
    }
}
