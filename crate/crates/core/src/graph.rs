//! Weighted, connected finite graphs with leaf (unbounded) edges.
//!
//! A leaf edge has exactly one endpoint in the graph; the one-valent vertex
//! at its far end is never materialized — downstream modules tag leaf edges
//! with a role instead. Vertex and edge ids are dense integers assigned at
//! construction, and every iteration order is id-ascending, so all derived
//! output is deterministic.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub usize);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

impl fmt::Debug for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V{}", self.0)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V{}", self.0)
    }
}

impl fmt::Debug for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "E{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "E{}", self.0)
    }
}

/// A flag is a vertex together with an incident edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Flag {
    pub vertex: VertexId,
    pub edge: EdgeId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeEnds {
    /// Bounded edge between two distinct vertices.
    Bounded(VertexId, VertexId),
    /// Unbounded edge attached at a single vertex.
    Leaf(VertexId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub id: EdgeId,
    pub ends: EdgeEnds,
    pub weight: u64,
}

impl Edge {
    pub fn is_leaf(&self) -> bool {
        matches!(self.ends, EdgeEnds::Leaf(_))
    }

    pub fn is_bounded(&self) -> bool {
        !self.is_leaf()
    }

    /// The endpoints actually present in the graph.
    pub fn vertices(&self) -> Vec<VertexId> {
        match self.ends {
            EdgeEnds::Bounded(v, w) => vec![v, w],
            EdgeEnds::Leaf(v) => vec![v],
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph is not connected")]
    Disconnected,
    #[error("graph has no vertices")]
    Empty,
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("edge weight must be at least 1")]
    ZeroWeight,
    #[error("self-loops are not supported")]
    SelfLoop,
    #[error("graph is not a tree")]
    NotATree,
    #[error("edge {0} is not bounded")]
    NotBounded(EdgeId),
}

/// Weighted connected graph with leaf edges. Immutable after construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<Edge>,
    incident: Vec<Vec<EdgeId>>,
}

#[derive(Default)]
pub struct GraphBuilder {
    vertex_count: usize,
    edges: Vec<(EdgeEnds, u64)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self) -> VertexId {
        let id = VertexId(self.vertex_count);
        self.vertex_count += 1;
        id
    }

    pub fn add_edge(&mut self, v: VertexId, w: VertexId, weight: u64) -> EdgeId {
        let id = EdgeId(self.edges.len());
        self.edges.push((EdgeEnds::Bounded(v, w), weight));
        id
    }

    pub fn add_leaf(&mut self, v: VertexId, weight: u64) -> EdgeId {
        let id = EdgeId(self.edges.len());
        self.edges.push((EdgeEnds::Leaf(v), weight));
        id
    }

    /// Validates weights, endpoints and connectivity.
    pub fn build(self) -> Result<Graph, GraphError> {
        if self.vertex_count == 0 {
            return Err(GraphError::Empty);
        }
        let mut incident = vec![Vec::new(); self.vertex_count];
        let mut edges = Vec::with_capacity(self.edges.len());
        for (i, (ends, weight)) in self.edges.into_iter().enumerate() {
            if weight == 0 {
                return Err(GraphError::ZeroWeight);
            }
            let id = EdgeId(i);
            match ends {
                EdgeEnds::Bounded(v, w) => {
                    if v == w {
                        return Err(GraphError::SelfLoop);
                    }
                    for x in [v, w] {
                        if x.0 >= self.vertex_count {
                            return Err(GraphError::UnknownVertex(x));
                        }
                    }
                    incident[v.0].push(id);
                    incident[w.0].push(id);
                }
                EdgeEnds::Leaf(v) => {
                    if v.0 >= self.vertex_count {
                        return Err(GraphError::UnknownVertex(v));
                    }
                    incident[v.0].push(id);
                }
            }
            edges.push(Edge { id, ends, weight });
        }
        let g = Graph {
            vertex_count: self.vertex_count,
            edges,
            incident,
        };
        if !g.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(g)
    }
}

impl Graph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::new()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        (0..self.vertex_count).map(VertexId)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    pub fn bounded_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.is_bounded())
    }

    pub fn leaf_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.is_leaf())
    }

    pub fn bounded_count(&self) -> usize {
        self.bounded_edges().count()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_edges().count()
    }

    /// Edge ids incident to `v`, ascending.
    pub fn incident_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.incident[v.0]
    }

    /// All flags, ordered by (vertex, edge).
    pub fn flags(&self) -> Vec<Flag> {
        let mut out = Vec::new();
        for v in self.vertices() {
            for &e in self.incident_edges(v) {
                out.push(Flag { vertex: v, edge: e });
            }
        }
        out
    }

    /// Number of edge-ends at `v`, leaf edges included.
    pub fn valence(&self, v: VertexId) -> Result<usize, GraphError> {
        if v.0 >= self.vertex_count {
            return Err(GraphError::UnknownVertex(v));
        }
        Ok(self.incident[v.0].len())
    }

    pub fn is_trivalent(&self) -> bool {
        self.incident.iter().all(|inc| inc.len() == 3)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.vertex_count];
        let mut stack = vec![VertexId(0)];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &e in self.incident_edges(v) {
                if let EdgeEnds::Bounded(a, b) = self.edge(e).ends {
                    let w = if a == v { b } else { a };
                    if !seen[w.0] {
                        seen[w.0] = true;
                        stack.push(w);
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// First Betti number. Leaf edges carry a single endpoint and add no
    /// cycles, so only bounded edges enter the count.
    pub fn first_betti(&self) -> usize {
        self.bounded_count() + 1 - self.vertex_count
    }

    pub fn is_tree(&self) -> bool {
        self.first_betti() == 0
    }

    /// For a tree, removing the bounded edge `e = (v, w)` splits the leaf
    /// edges into the `v`-side and `w`-side sets, in that order.
    pub fn split_by_edge(
        &self,
        e: EdgeId,
    ) -> Result<(BTreeSet<EdgeId>, BTreeSet<EdgeId>), GraphError> {
        if !self.is_tree() {
            return Err(GraphError::NotATree);
        }
        if e.0 >= self.edges.len() {
            return Err(GraphError::UnknownEdge(e));
        }
        let EdgeEnds::Bounded(v, w) = self.edge(e).ends else {
            return Err(GraphError::NotBounded(e));
        };
        let side = |start: VertexId| -> BTreeSet<EdgeId> {
            let mut seen = vec![false; self.vertex_count];
            let mut leaves = BTreeSet::new();
            let mut stack = vec![start];
            seen[start.0] = true;
            while let Some(x) = stack.pop() {
                for &f in self.incident_edges(x) {
                    if f == e {
                        continue;
                    }
                    match self.edge(f).ends {
                        EdgeEnds::Leaf(_) => {
                            leaves.insert(f);
                        }
                        EdgeEnds::Bounded(a, b) => {
                            let y = if a == x { b } else { a };
                            if !seen[y.0] {
                                seen[y.0] = true;
                                stack.push(y);
                            }
                        }
                    }
                }
            }
            leaves
        };
        Ok((side(v), side(w)))
    }

    /// The other endpoint of a bounded edge.
    pub fn other_end(&self, e: EdgeId, v: VertexId) -> Option<VertexId> {
        match self.edge(e).ends {
            EdgeEnds::Bounded(a, b) if a == v => Some(b),
            EdgeEnds::Bounded(a, b) if b == v => Some(a),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Path on 3 vertices: V0—V1—V2.
    fn path3() -> Graph {
        let mut b = Graph::builder();
        let v0 = b.add_vertex();
        let v1 = b.add_vertex();
        let v2 = b.add_vertex();
        b.add_edge(v0, v1, 1);
        b.add_edge(v1, v2, 1);
        b.build().unwrap()
    }

    #[test]
    fn betti_of_tree_is_zero() {
        assert_eq!(path3().first_betti(), 0);
    }

    #[test]
    fn betti_of_triangle_is_one() {
        let mut b = Graph::builder();
        let v: Vec<_> = (0..3).map(|_| b.add_vertex()).collect();
        b.add_edge(v[0], v[1], 1);
        b.add_edge(v[1], v[2], 1);
        b.add_edge(v[2], v[0], 1);
        assert_eq!(b.build().unwrap().first_betti(), 1);
    }

    #[test]
    fn betti_of_theta_graph_is_two() {
        let mut b = Graph::builder();
        let v0 = b.add_vertex();
        let v1 = b.add_vertex();
        for _ in 0..3 {
            b.add_edge(v0, v1, 1);
        }
        assert_eq!(b.build().unwrap().first_betti(), 2);
    }

    #[test]
    fn tripod_betti_and_valence() {
        let mut b = Graph::builder();
        let v0 = b.add_vertex();
        for _ in 0..3 {
            b.add_leaf(v0, 1);
        }
        let g = b.build().unwrap();
        assert_eq!(g.first_betti(), 0);
        assert_eq!(g.valence(v0).unwrap(), 3);
        assert!(g.is_trivalent());
    }

    #[test]
    fn valence_counts_leaves_and_bounded() {
        let mut b = Graph::builder();
        let v0 = b.add_vertex();
        let v1 = b.add_vertex();
        b.add_edge(v0, v1, 1);
        b.add_leaf(v0, 1);
        b.add_leaf(v0, 1);
        let g = b.build().unwrap();
        assert_eq!(g.valence(v0).unwrap(), 3);
        assert_eq!(g.valence(v1).unwrap(), 1);
        assert_eq!(g.valence(VertexId(7)), Err(GraphError::UnknownVertex(VertexId(7))));
    }

    #[test]
    fn disconnected_graphs_are_rejected() {
        let mut b = Graph::builder();
        b.add_vertex();
        b.add_vertex();
        assert_eq!(b.build().unwrap_err(), GraphError::Disconnected);
    }

    #[test]
    fn split_tripod_with_stem() {
        // Center with leaves b, c; bounded edge to a vertex carrying leaf a.
        let mut b = Graph::builder();
        let center = b.add_vertex();
        let va = b.add_vertex();
        let stem = b.add_edge(center, va, 1);
        let la = b.add_leaf(va, 1);
        let lb = b.add_leaf(center, 1);
        let lc = b.add_leaf(center, 1);
        let g = b.build().unwrap();
        let (center_side, a_side) = g.split_by_edge(stem).unwrap();
        assert_eq!(center_side, BTreeSet::from([lb, lc]));
        assert_eq!(a_side, BTreeSet::from([la]));
    }

    #[test]
    fn split_caterpillar_middle_edge() {
        // 4 internal vertices in a path, 6 leaves: 2 at each end, 1 at each middle.
        let mut b = Graph::builder();
        let v: Vec<_> = (0..4).map(|_| b.add_vertex()).collect();
        let _e01 = b.add_edge(v[0], v[1], 1);
        let e12 = b.add_edge(v[1], v[2], 1);
        let _e23 = b.add_edge(v[2], v[3], 1);
        let l0a = b.add_leaf(v[0], 1);
        let l0b = b.add_leaf(v[0], 1);
        let l1 = b.add_leaf(v[1], 1);
        let l2 = b.add_leaf(v[2], 1);
        let l3a = b.add_leaf(v[3], 1);
        let l3b = b.add_leaf(v[3], 1);
        let g = b.build().unwrap();
        let (left, right) = g.split_by_edge(e12).unwrap();
        assert_eq!(left, BTreeSet::from([l0a, l0b, l1]));
        assert_eq!(right, BTreeSet::from([l2, l3a, l3b]));
    }

    #[test]
    fn split_rejects_leaf_edges_and_cycles() {
        let mut b = Graph::builder();
        let v0 = b.add_vertex();
        let v1 = b.add_vertex();
        b.add_edge(v0, v1, 1);
        let leaf = b.add_leaf(v0, 1);
        let g = b.build().unwrap();
        assert_eq!(g.split_by_edge(leaf), Err(GraphError::NotBounded(leaf)));

        let mut b = Graph::builder();
        let v0 = b.add_vertex();
        let v1 = b.add_vertex();
        let e = b.add_edge(v0, v1, 1);
        b.add_edge(v0, v1, 1);
        let g = b.build().unwrap();
        assert_eq!(g.split_by_edge(e), Err(GraphError::NotATree));
    }

    #[test]
    fn flag_count_identity() {
        let g = path3();
        let total: usize = g.vertices().map(|v| g.valence(v).unwrap()).sum();
        assert_eq!(total, 2 * g.bounded_count() + g.leaf_count());
    }
}
