//! Obstruction calculus on the components of a maximally degenerate rational
//! curve.
//!
//! Each trivalent vertex corresponds to a ℙ¹ component sitting inside the
//! orbit closure of a two-dimensional subtorus. With no special conditions
//! its normal sheaf is 𝒪(1) ⊕ 𝒪^{n−3}: the 𝒪(1) summand is normal inside the
//! orbit closure, the trivial block transverse to it. Two of the three edge
//! roles perturb the calculation:
//!
//! - every node twists the dualizing sheaf by one point, raising each dual
//!   degree by one;
//! - every non-free edge drops the 𝒪(1) summand by one.
//!
//! The dual obstruction space on a component is H⁰ of the dualized normal
//! sheaf twisted by the node-adjusted canonical sheaf; its degree vector is
//! computed by [`dual_degrees`]. The global obstruction vanishes when the
//! only glued section is zero. Two independent routes decide that:
//!
//! - [`propagate_vanishing`] — the zero-propagation argument: a section
//!   vanishing at more points of a component than any summand degree is zero
//!   there, and zeros spread across nodes. Sound but deliberately
//!   incomplete; anything it cannot force is reported `Inconclusive`.
//! - [`section_space_dim`] — an explicit glued-section model whose exact
//!   dimension is computed by rational elimination. Serves as the oracle:
//!   a `Vanishes` verdict must coincide with dimension zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::degeneration::{EdgeRole, LabeledCurve};
use crate::graph::{EdgeEnds, VertexId};
use crate::rational::{rank, rati, Rat};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ObstructionError {
    #[error("curve must have genus zero")]
    NotGenusZero,
    #[error("curve must be trivalent")]
    NotTrivalent,
}

/// Edge-role census at one trivalent vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexProfile {
    pub nodes: usize,
    pub free: usize,
    pub nonfree: usize,
}

impl VertexProfile {
    /// Panics unless the profile is trivalent; profiles always come from
    /// trivalent vertices.
    pub fn new(nodes: usize, free: usize, nonfree: usize) -> Self {
        assert_eq!(nodes + free + nonfree, 3, "vertex profiles are trivalent");
        VertexProfile {
            nodes,
            free,
            nonfree,
        }
    }
}

/// Degree of the distinguished normal summand: the base 𝒪(1) reduced once
/// per non-free edge.
pub fn normal_first_degree(p: &VertexProfile) -> i64 {
    1 - p.nonfree as i64
}

/// Summand degrees of the Serre-dual obstruction space on one component:
/// first the orbit-closure normal direction, then n − 3 transverse ones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeVector(Vec<i64>);

impl DegreeVector {
    pub fn entries(&self) -> &[i64] {
        &self.0
    }

    /// dim H⁰ of the sum: Σ max(0, d + 1).
    pub fn dual_dim(&self) -> usize {
        self.0.iter().map(|&d| h0_dim(d)).sum()
    }

    pub fn max_degree(&self) -> i64 {
        *self.0.iter().max().expect("nonempty for n ≥ 3")
    }
}

/// Dual obstruction degrees of a profile: the dualized normal summands
/// twisted by ω(k_node), which has degree k_node − 2.
pub fn dual_degrees(p: &VertexProfile, n: usize) -> DegreeVector {
    assert!(n >= 3, "dual_degrees needs n ≥ 3");
    let twist = p.nodes as i64 - 2;
    let first = -normal_first_degree(p) + twist;
    let mut degs = vec![first];
    degs.extend(std::iter::repeat(twist).take(n - 3));
    DegreeVector(degs)
}

/// dim H⁰(ℙ¹, 𝒪(d)) = max(0, d + 1).
pub fn h0_dim(d: i64) -> usize {
    (d + 1).max(0) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Vanishes,
    Inconclusive,
}

/// Outcome of the zero-propagation argument.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObstructionReport {
    pub verdict: Verdict,
    /// Dual obstruction dimension per vertex, id-ascending.
    pub vertex_dims: Vec<usize>,
    /// Vertices in the order they were forced to zero.
    pub trace: Vec<VertexId>,
}

/// Role-labeled tree data the calculus actually consumes: dual degrees per
/// vertex and the node edges between vertices. Geometry-free so randomized
/// soundness checks can hit the same code path as real curves.
#[derive(Clone, Debug)]
pub struct ComponentModel {
    pub degrees: Vec<DegreeVector>,
    /// Node edges as vertex index pairs, in edge order.
    pub node_edges: Vec<(usize, usize)>,
    /// For each vertex, its three special points indexed by incident edge
    /// slot; `point_of[v][i]` is the slot of the i-th node edge at v in the
    /// vertex's full flag ordering.
    pub node_slots: Vec<Vec<(usize, usize)>>,
}

impl ComponentModel {
    /// Builds the model from per-vertex profiles and node edges, placing
    /// each vertex's node flags first in its flag ordering. The glued
    /// dimension is independent of which of the three special points a node
    /// occupies (a Möbius change of coordinate is a linear isomorphism), so
    /// any deterministic placement works.
    pub fn new(degrees: Vec<DegreeVector>, node_edges: Vec<(usize, usize)>) -> Self {
        let mut counters = vec![0usize; degrees.len()];
        let mut node_slots = vec![Vec::new(); degrees.len()];
        for (i, &(a, b)) in node_edges.iter().enumerate() {
            node_slots[a].push((i, counters[a]));
            counters[a] += 1;
            node_slots[b].push((i, counters[b]));
            counters[b] += 1;
        }
        ComponentModel {
            degrees,
            node_edges,
            node_slots,
        }
    }

    fn vertex_count(&self) -> usize {
        self.degrees.len()
    }

    fn node_neighbors(&self, v: usize) -> Vec<usize> {
        self.node_edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }
}

fn model_from_curve(lc: &LabeledCurve, n: usize) -> Result<ComponentModel, ObstructionError> {
    let g = lc.curve().graph();
    if g.first_betti() != 0 {
        return Err(ObstructionError::NotGenusZero);
    }
    if !g.is_trivalent() {
        return Err(ObstructionError::NotTrivalent);
    }
    let degrees: Vec<DegreeVector> = g
        .vertices()
        .map(|v| dual_degrees(&lc.vertex_profile(v), n))
        .collect();
    let node_edges: Vec<(usize, usize)> = g
        .bounded_edges()
        .filter(|e| lc.role(e.id) == EdgeRole::Node)
        .map(|e| {
            let EdgeEnds::Bounded(a, b) = e.ends else { unreachable!() };
            (a.0, b.0)
        })
        .collect();
    Ok(ComponentModel::new(degrees, node_edges))
}

/// Zero propagation over a component model with an explicit scan priority.
/// Marking one vertex at a time, the next marked vertex is the first
/// qualifying one in priority order; a vertex qualifies when the number of
/// already-marked node neighbors exceeds every summand degree. The verdict
/// is order-independent; only the trace changes.
pub fn propagate_with_priority(model: &ComponentModel, priority: &[usize]) -> ObstructionReport {
    let nv = model.vertex_count();
    let mut marked = vec![false; nv];
    let mut trace = Vec::new();
    loop {
        let next = priority.iter().copied().find(|&v| {
            if marked[v] {
                return false;
            }
            let zeros = model
                .node_neighbors(v)
                .into_iter()
                .filter(|&w| marked[w])
                .count() as i64;
            zeros > model.degrees[v].max_degree()
        });
        match next {
            Some(v) => {
                marked[v] = true;
                trace.push(VertexId(v));
            }
            None => break,
        }
    }
    let verdict = if marked.iter().all(|&m| m) {
        Verdict::Vanishes
    } else {
        Verdict::Inconclusive
    };
    ObstructionReport {
        verdict,
        vertex_dims: model.degrees.iter().map(DegreeVector::dual_dim).collect(),
        trace,
    }
}

pub fn propagate_model(model: &ComponentModel) -> ObstructionReport {
    let priority: Vec<usize> = (0..model.vertex_count()).collect();
    propagate_with_priority(model, &priority)
}

/// The paper-shaped vanishing argument on a labeled curve.
pub fn propagate_vanishing(
    lc: &LabeledCurve,
    n: usize,
) -> Result<ObstructionReport, ObstructionError> {
    Ok(propagate_model(&model_from_curve(lc, n)?))
}

/// Exact dimension of the glued-section model: on each component, one
/// polynomial of degree ≤ d per summand of degree d ≥ 0 in an affine
/// coordinate placing the special points at 0, 1, ∞; negative summands
/// contribute the zero space. Across every node the boundary values of
/// corresponding summands must be negatives of each other. The dimension is
/// independent of the sign convention, and only the dimension is consumed.
pub fn section_dim_model(model: &ComponentModel) -> usize {
    // Special-point coordinate per slot: 0, 1, ∞. The value at ∞ of a
    // degree-≤d polynomial is its leading coefficient.
    let nv = model.vertex_count();
    let summands = if nv > 0 { model.degrees[0].entries().len() } else { 0 };
    // Coefficient layout: per vertex, per summand with degree ≥ 0, a block of
    // (degree + 1) unknowns.
    let mut offset = vec![vec![None; summands]; nv];
    let mut total = 0usize;
    for v in 0..nv {
        for (i, &d) in model.degrees[v].entries().iter().enumerate() {
            if d >= 0 {
                offset[v][i] = Some(total);
                total += (d + 1) as usize;
            }
        }
    }
    // Value functional of summand i of vertex v at its slot point, as a row.
    let value_row = |row: &mut [Rat], v: usize, i: usize, slot: usize, sign: i64| {
        let Some(off) = offset[v][i] else { return };
        let d = model.degrees[v].entries()[i];
        match slot {
            0 => row[off] += rati(sign),
            1 => {
                for j in 0..=(d as usize) {
                    row[off + j] += rati(sign);
                }
            }
            2 => row[off + d as usize] += rati(sign),
            _ => unreachable!("trivalent components have three special points"),
        }
    };
    let mut rows: Vec<Vec<Rat>> = Vec::new();
    for (e, &(a, b)) in model.node_edges.iter().enumerate() {
        let slot_a = model.node_slots[a]
            .iter()
            .find(|(edge, _)| *edge == e)
            .map(|(_, s)| *s)
            .expect("node edge registered at endpoint");
        let slot_b = model.node_slots[b]
            .iter()
            .find(|(edge, _)| *edge == e)
            .map(|(_, s)| *s)
            .expect("node edge registered at endpoint");
        for i in 0..summands {
            if offset[a][i].is_none() && offset[b][i].is_none() {
                continue;
            }
            let mut row = vec![Rat::zero(); total];
            value_row(&mut row, a, i, slot_a, 1);
            value_row(&mut row, b, i, slot_b, 1);
            if row.iter().all(num_traits::Zero::is_zero) {
                continue;
            }
            rows.push(row);
        }
    }
    total - rank(&rows)
}

/// Oracle: exact dimension of the global obstruction-dual section space of a
/// labeled curve. Independent of [`propagate_vanishing`]; agreement on
/// `Vanishes` ⟺ zero is enforced by callers.
pub fn section_space_dim(lc: &LabeledCurve, n: usize) -> Result<usize, ObstructionError> {
    Ok(section_dim_model(&model_from_curve(lc, n)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degeneration::{assign_anchors, classify_edges, make_scenario, AnchorMode};

    fn profile(nodes: usize, free: usize, nonfree: usize) -> VertexProfile {
        VertexProfile::new(nodes, free, nonfree)
    }

    #[test]
    fn normal_degree_drops_per_nonfree_edge() {
        assert_eq!(normal_first_degree(&profile(2, 1, 0)), 1);
        assert_eq!(normal_first_degree(&profile(1, 1, 1)), 0);
        assert_eq!(normal_first_degree(&profile(1, 0, 2)), -1);
    }

    #[test]
    fn dual_degrees_reproduce_the_four_vertex_types() {
        let n = 5;
        // (1 non-free, 1 node, 1 free): all degrees −1, dimension 0.
        let d = dual_degrees(&profile(1, 1, 1), n);
        assert_eq!(d.entries(), &[-1, -1, -1]);
        assert_eq!(d.dual_dim(), 0);
        // (0 non-free, 2 nodes, 1 free): [−1, 0, 0], dimension n − 3.
        let d = dual_degrees(&profile(2, 1, 0), n);
        assert_eq!(d.entries(), &[-1, 0, 0]);
        assert_eq!(d.dual_dim(), n - 3);
        // (2 non-free, 1 node): [0, −1, −1], dimension 1.
        let d = dual_degrees(&profile(1, 0, 2), n);
        assert_eq!(d.entries(), &[0, -1, -1]);
        assert_eq!(d.dual_dim(), 1);
        // (1 non-free, 2 nodes): [0, 0, 0], dimension n − 2.
        let d = dual_degrees(&profile(2, 0, 1), n);
        assert_eq!(d.entries(), &[0, 0, 0]);
        assert_eq!(d.dual_dim(), n - 2);
    }

    #[test]
    fn dual_degrees_at_n3_have_no_transverse_block() {
        assert_eq!(dual_degrees(&profile(1, 1, 1), 3).entries(), &[-1]);
        assert_eq!(dual_degrees(&profile(2, 0, 1), 3).entries(), &[0]);
    }

    #[test]
    fn degree_bookkeeping_identity() {
        // Σ dual degrees = −(normal degree sum) + (n−2)(k_node − 2).
        for n in 3..=8usize {
            for nodes in 0..=3 {
                for free in 0..=(3 - nodes) {
                    let nonfree = 3 - nodes - free;
                    let p = profile(nodes, free, nonfree);
                    let dual_sum: i64 = dual_degrees(&p, n).entries().iter().sum();
                    let normal_sum = normal_first_degree(&p); // transverse block is trivial
                    let expected = -normal_sum + (n as i64 - 2) * (nodes as i64 - 2);
                    assert_eq!(dual_sum, expected, "n={n} profile={p:?}");
                }
            }
        }
    }

    #[test]
    fn first_dual_degree_rises_by_one_per_nonfree_edge() {
        for n in 3..=6usize {
            for nodes in 0..=2 {
                for free in 0..=(2 - nodes) {
                    let nonfree = 2 - nodes - free;
                    let p = profile(nodes, free, nonfree + 1);
                    let q = profile(nodes, free + 1, nonfree);
                    assert_eq!(
                        dual_degrees(&p, n).entries()[0],
                        dual_degrees(&q, n).entries()[0] + 1
                    );
                }
            }
        }
    }

    #[test]
    fn h0_dims() {
        assert_eq!(h0_dim(-1), 0);
        assert_eq!(h0_dim(0), 1);
        assert_eq!(h0_dim(2), 3);
    }

    fn conic_labeled() -> LabeledCurve {
        let s = make_scenario(3, 3, None).unwrap();
        assign_anchors(
            classify_edges(crate::curve::tests::conic(), s).unwrap(),
            AnchorMode::FromCurve,
        )
    }

    #[test]
    fn conic_obstruction_vanishes_in_vertex_order() {
        let report = propagate_vanishing(&conic_labeled(), 3).unwrap();
        assert_eq!(report.verdict, Verdict::Vanishes);
        assert_eq!(report.vertex_dims, vec![0, 1, 1, 0]);
        assert_eq!(
            report.trace,
            vec![VertexId(0), VertexId(1), VertexId(2), VertexId(3)]
        );
    }

    #[test]
    fn no_seed_means_inconclusive() {
        // Two components with degrees [0] each, one node: no vertex has a
        // zero-dimensional dual space, so propagation cannot start.
        let model = ComponentModel::new(
            vec![DegreeVector(vec![0]), DegreeVector(vec![0])],
            vec![(0, 1)],
        );
        let report = propagate_model(&model);
        assert_eq!(report.verdict, Verdict::Inconclusive);
        assert!(report.trace.is_empty());
        // The oracle agrees there is a surviving section: dimension 1.
        assert_eq!(section_dim_model(&model), 1);
    }

    #[test]
    fn all_negative_vertex_vanishes_immediately() {
        // Single vertex, (1 non-free, 0 nodes, 2 free), n = 4: degrees
        // [−2, −2], zero-dimensional from the start.
        let p = profile(0, 2, 1);
        let d = dual_degrees(&p, 4);
        assert_eq!(d.entries(), &[-2, -2]);
        let model = ComponentModel::new(vec![d], vec![]);
        let report = propagate_model(&model);
        assert_eq!(report.verdict, Verdict::Vanishes);
        assert_eq!(section_dim_model(&model), 0);
    }

    #[test]
    fn conic_oracle_dimension_is_zero() {
        assert_eq!(section_space_dim(&conic_labeled(), 3).unwrap(), 0);
    }

    #[test]
    fn matched_constants_across_one_node() {
        // Two components with degrees [0, 0, 0] each (n = 5) joined by one
        // node: constants matched pairwise leave n − 2 = 3 dimensions.
        let d = DegreeVector(vec![0, 0, 0]);
        let model = ComponentModel::new(vec![d.clone(), d], vec![(0, 1)]);
        assert_eq!(section_dim_model(&model), 3);
    }

    #[test]
    fn verdict_is_priority_independent_on_the_conic() {
        let lc = conic_labeled();
        let model = model_from_curve(&lc, 3).unwrap();
        let orders: Vec<Vec<usize>> = vec![
            vec![0, 1, 2, 3],
            vec![3, 2, 1, 0],
            vec![2, 0, 3, 1],
            vec![1, 3, 0, 2],
        ];
        for order in orders {
            let report = propagate_with_priority(&model, &order);
            assert_eq!(report.verdict, Verdict::Vanishes);
        }
    }
}
