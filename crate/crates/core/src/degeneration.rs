//! Combinatorial shadow of a degenerating hypersurface: free vs. non-free
//! toric divisors, edge roles, and incidence anchors.
//!
//! A scenario fixes the ambient projective space ℙⁿ and the hypersurface
//! degree d ≤ n. The central fiber is a union of d copies of ℙ^{n−1}; each
//! component keeps n − d + 1 toric divisors to itself (free) and shares the
//! other d − 1 (non-free). A curve's unbounded edges are classified by
//! whether their direction hits a free or non-free divisor; bounded edges are
//! nodes. Intersections with non-free divisors must land in the singular
//! locus, modeled per leaf as an affine anchor line that the adjacent vertex
//! has to stay on.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::curve::{degree_map, TropicalCurve};
use crate::graph::{EdgeEnds, EdgeId, VertexId};
use crate::rational::{IntVec, Rat};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("need 3 ≤ n and 2 ≤ d ≤ n, got n = {n}, d = {d}")]
    BadDegree { n: usize, d: usize },
    #[error("free directions must be {expected} distinct projective directions")]
    BadFreeSet { expected: usize },
    #[error("curve degree map is not δ copies of each projective direction")]
    NotProjectiveDegree,
    #[error("curve ambient dimension {got} does not match scenario (n − 1 = {expected})")]
    AmbientMismatch { expected: usize, got: usize },
}

/// The n projective directions of ℙ^{n−1} ⊂ ℚ^{n−1}:
/// −e₁, …, −e_{n−1} and (1, …, 1).
pub fn projective_directions(n: usize) -> Vec<IntVec> {
    assert!(n >= 3, "projective_directions needs n ≥ 3");
    let m = n - 1;
    let mut dirs: Vec<IntVec> = (0..m).map(|i| IntVec::neg_unit(m, i)).collect();
    dirs.push(IntVec::ones(m));
    dirs
}

/// Ambient ℙⁿ, hypersurface degree d, and the free divisor directions of a
/// component of the central fiber.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    n: usize,
    d: usize,
    free_dirs: BTreeSet<IntVec>,
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Ambient dimension of the tropical picture, m = n − 1.
    pub fn ambient_dim(&self) -> usize {
        self.n - 1
    }

    pub fn free_dirs(&self) -> &BTreeSet<IntVec> {
        &self.free_dirs
    }

    pub fn is_free(&self, dir: &IntVec) -> bool {
        self.free_dirs.contains(dir)
    }
}

/// Builds a scenario. With `free_dirs` omitted the first n − d + 1
/// projective directions −e₁, −e₂, … are free; for d = n that is exactly
/// {−e₁}.
pub fn make_scenario(
    n: usize,
    d: usize,
    free_dirs: Option<Vec<IntVec>>,
) -> Result<Scenario, ScenarioError> {
    if n < 3 || d < 2 || d > n {
        return Err(ScenarioError::BadDegree { n, d });
    }
    let dirs = projective_directions(n);
    let expected = n - d + 1;
    let free: BTreeSet<IntVec> = match free_dirs {
        None => dirs.iter().take(expected).cloned().collect(),
        Some(list) => {
            let set: BTreeSet<IntVec> = list.into_iter().collect();
            if set.len() != expected || !set.iter().all(|v| dirs.contains(v)) {
                return Err(ScenarioError::BadFreeSet { expected });
            }
            set
        }
    };
    Ok(Scenario {
        n,
        d,
        free_dirs: free,
    })
}

/// Role of an edge in the degeneration picture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeRole {
    Node,
    FreeDivisor,
    NonFreeDivisor,
}

/// An affine line `{ base + t·direction }` constraining the vertex adjacent
/// to a non-free leaf; the tropical shadow of the singular locus.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchorLine {
    pub base: Vec<Rat>,
    pub direction: IntVec,
}

/// A tropical curve with degeneration roles on its edges and (optionally)
/// incidence anchors on its non-free leaves.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledCurve {
    curve: TropicalCurve,
    scenario: Scenario,
    delta: u64,
    roles: Vec<EdgeRole>,
    anchors: BTreeMap<EdgeId, AnchorLine>,
    /// The transversality assumption on orbit closures meeting the singular
    /// locus is assumed, never checked; surfaced in reports.
    pub transversality_assumed: bool,
}

/// How anchors are placed on the non-free leaves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnchorMode {
    /// Anchor each non-free leaf with the line its ray actually spans, so
    /// the generating curve satisfies its own anchors.
    FromCurve,
    /// Generic rational base points from a seeded generator, deterministic
    /// per seed. Heights are kept small so elimination stays exact and fast.
    Random { seed: u64 },
}

impl LabeledCurve {
    pub fn curve(&self) -> &TropicalCurve {
        &self.curve
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Projective degree δ of the underlying curve.
    pub fn delta(&self) -> u64 {
        self.delta
    }

    pub fn role(&self, e: EdgeId) -> EdgeRole {
        self.roles[e.0]
    }

    pub fn roles(&self) -> &[EdgeRole] {
        &self.roles
    }

    pub fn anchors(&self) -> &BTreeMap<EdgeId, AnchorLine> {
        &self.anchors
    }

    pub fn node_count(&self) -> usize {
        self.roles.iter().filter(|r| **r == EdgeRole::Node).count()
    }

    pub fn free_leaf_count(&self) -> usize {
        self.roles
            .iter()
            .filter(|r| **r == EdgeRole::FreeDivisor)
            .count()
    }

    pub fn nonfree_leaf_count(&self) -> usize {
        self.roles
            .iter()
            .filter(|r| **r == EdgeRole::NonFreeDivisor)
            .count()
    }

    /// Vertices carrying a free leaf in the given direction.
    pub fn free_vertices(&self) -> Vec<(VertexId, IntVec)> {
        let mut out = Vec::new();
        for e in self.curve.graph().leaf_edges() {
            if self.roles[e.id.0] == EdgeRole::FreeDivisor {
                if let EdgeEnds::Leaf(v) = e.ends {
                    out.push((v, self.curve.leaf_direction(e.id).unwrap().clone()));
                }
            }
        }
        out
    }

    /// Per-vertex count of (node, free, non-free) flags.
    pub fn vertex_profile(&self, v: VertexId) -> crate::obstruction::VertexProfile {
        let g = self.curve.graph();
        let mut nodes = 0;
        let mut free = 0;
        let mut nonfree = 0;
        for &e in g.incident_edges(v) {
            match self.roles[e.0] {
                EdgeRole::Node => nodes += 1,
                EdgeRole::FreeDivisor => free += 1,
                EdgeRole::NonFreeDivisor => nonfree += 1,
            }
        }
        crate::obstruction::VertexProfile {
            nodes,
            free,
            nonfree,
        }
    }
}

/// Classifies edges by role: bounded edges are nodes; unbounded edges hit a
/// free or non-free divisor according to their direction. Requires the curve
/// to have a projective degree in the scenario's dimension; the role
/// assignment depends only on directions, never on positions.
pub fn classify_edges(curve: TropicalCurve, scenario: Scenario) -> Result<LabeledCurve, ScenarioError> {
    if curve.ambient_dim() != scenario.ambient_dim() {
        return Err(ScenarioError::AmbientMismatch {
            expected: scenario.ambient_dim(),
            got: curve.ambient_dim(),
        });
    }
    let dm = degree_map(&curve);
    let dirs = projective_directions(scenario.n);
    let delta = dm
        .uniform_multiplicity_over(&dirs)
        .ok_or(ScenarioError::NotProjectiveDegree)?;
    let roles: Vec<EdgeRole> = curve
        .graph()
        .edges()
        .iter()
        .map(|e| match e.ends {
            EdgeEnds::Bounded(..) => EdgeRole::Node,
            EdgeEnds::Leaf(_) => {
                let dir = curve.leaf_direction(e.id).expect("leaf direction");
                if scenario.is_free(dir) {
                    EdgeRole::FreeDivisor
                } else {
                    EdgeRole::NonFreeDivisor
                }
            }
        })
        .collect();
    let lc = LabeledCurve {
        curve,
        scenario,
        delta,
        roles,
        anchors: BTreeMap::new(),
        transversality_assumed: true,
    };
    debug_assert_eq!(
        lc.free_leaf_count() as u64,
        delta * lc.scenario.free_dirs.len() as u64
    );
    debug_assert_eq!(
        lc.nonfree_leaf_count() as u64,
        delta * (lc.scenario.d as u64 - 1)
    );
    Ok(lc)
}

/// Assigns an anchor line to every non-free leaf.
pub fn assign_anchors(mut lc: LabeledCurve, mode: AnchorMode) -> LabeledCurve {
    let m = lc.curve.ambient_dim();
    let mut rng = match mode {
        AnchorMode::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        AnchorMode::FromCurve => None,
    };
    let mut anchors = BTreeMap::new();
    for e in lc.curve.graph().leaf_edges() {
        if lc.roles[e.id.0] != EdgeRole::NonFreeDivisor {
            continue;
        }
        let EdgeEnds::Leaf(v) = e.ends else { unreachable!() };
        let direction = lc.curve.leaf_direction(e.id).unwrap().clone();
        let base: Vec<Rat> = match &mut rng {
            None => lc.curve.position(v).to_vec(),
            Some(rng) => (0..m)
                .map(|_| {
                    let num = rng.gen_range(-100i64..=100);
                    let den = rng.gen_range(1i64..=100);
                    Rat::new(BigInt::from(num), BigInt::from(den))
                })
                .collect(),
        };
        anchors.insert(e.id, AnchorLine { base, direction });
    }
    lc.anchors = anchors;
    lc
}

/// Weight matching across nodes. In this model a node is a single edge
/// carrying one weight, so both branch indices agree by construction; the
/// check is kept explicit so the invariant survives future model changes.
pub fn validate_prelog(lc: &LabeledCurve) -> bool {
    lc.curve
        .graph()
        .bounded_edges()
        .all(|e| {
            let w_first = e.weight;
            let w_second = e.weight;
            w_first == w_second
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::TropicalCurve;
    use crate::graph::Graph;
    use crate::rational::rati;
    use std::collections::BTreeMap;

    fn iv(v: &[i64]) -> IntVec {
        IntVec::from_i64s(v)
    }

    fn conic() -> TropicalCurve {
        crate::curve::tests::conic()
    }

    #[test]
    fn projective_directions_for_small_n() {
        assert_eq!(
            projective_directions(3),
            vec![iv(&[-1, 0]), iv(&[0, -1]), iv(&[1, 1])]
        );
        assert_eq!(
            projective_directions(4),
            vec![
                iv(&[-1, 0, 0]),
                iv(&[0, -1, 0]),
                iv(&[0, 0, -1]),
                iv(&[1, 1, 1])
            ]
        );
    }

    #[test]
    fn projective_directions_sum_to_zero() {
        for n in 3..=8 {
            let mut sum = IntVec::zeros(n - 1);
            for d in projective_directions(n) {
                sum = &sum + &d;
            }
            assert!(sum.is_zero());
        }
    }

    #[test]
    fn scenario_default_free_sets() {
        let s = make_scenario(4, 4, None).unwrap();
        assert_eq!(s.free_dirs().len(), 1);
        assert!(s.is_free(&iv(&[-1, 0, 0])));

        let s = make_scenario(5, 3, None).unwrap();
        assert_eq!(s.free_dirs().len(), 3);
    }

    #[test]
    fn scenario_rejects_bad_degrees() {
        assert_eq!(
            make_scenario(4, 5, None),
            Err(ScenarioError::BadDegree { n: 4, d: 5 })
        );
        assert_eq!(
            make_scenario(4, 1, None),
            Err(ScenarioError::BadDegree { n: 4, d: 1 })
        );
    }

    #[test]
    fn scenario_rejects_bad_free_sets() {
        assert_eq!(
            make_scenario(3, 3, Some(vec![iv(&[-1, 0]), iv(&[0, -1])])),
            Err(ScenarioError::BadFreeSet { expected: 1 })
        );
        assert_eq!(
            make_scenario(3, 3, Some(vec![iv(&[2, 0])])),
            Err(ScenarioError::BadFreeSet { expected: 1 })
        );
    }

    #[test]
    fn classify_conic_in_cubic_scenario() {
        let s = make_scenario(3, 3, None).unwrap();
        let lc = classify_edges(conic(), s).unwrap();
        assert_eq!(lc.delta(), 2);
        assert_eq!(lc.free_leaf_count(), 2);
        assert_eq!(lc.nonfree_leaf_count(), 4);
        assert_eq!(lc.node_count(), 3);
        assert!(validate_prelog(&lc));
    }

    #[test]
    fn classify_line_in_quadric_scenario() {
        // Tripod of projective degree 1 in the n = 3, d = 2 scenario:
        // free set has size 2, so 2 free and 1 non-free leaves.
        let mut b = Graph::builder();
        let v = b.add_vertex();
        let l0 = b.add_leaf(v, 1);
        let l1 = b.add_leaf(v, 1);
        let l2 = b.add_leaf(v, 1);
        let g = b.build().unwrap();
        let c = TropicalCurve::new(
            g,
            2,
            vec![vec![rati(0), rati(0)]],
            BTreeMap::from([
                (l0, iv(&[-1, 0])),
                (l1, iv(&[0, -1])),
                (l2, iv(&[1, 1])),
            ]),
        )
        .unwrap();
        let s = make_scenario(3, 2, None).unwrap();
        let lc = classify_edges(c, s).unwrap();
        assert_eq!(lc.delta(), 1);
        assert_eq!(lc.free_leaf_count(), 2);
        assert_eq!(lc.nonfree_leaf_count(), 1);
        assert_eq!(lc.node_count(), 0);
    }

    #[test]
    fn classify_rejects_non_projective_degree() {
        // Weight-2 tripod: degree map {(−2,0), (0,−2), (2,2)} is not δ copies
        // of the projective directions.
        let mut b = Graph::builder();
        let v = b.add_vertex();
        let l0 = b.add_leaf(v, 2);
        let l1 = b.add_leaf(v, 2);
        let l2 = b.add_leaf(v, 2);
        let g = b.build().unwrap();
        let c = TropicalCurve::new(
            g,
            2,
            vec![vec![rati(0), rati(0)]],
            BTreeMap::from([
                (l0, iv(&[-1, 0])),
                (l1, iv(&[0, -1])),
                (l2, iv(&[1, 1])),
            ]),
        )
        .unwrap();
        let s = make_scenario(3, 3, None).unwrap();
        assert_eq!(
            classify_edges(c, s).unwrap_err(),
            ScenarioError::NotProjectiveDegree
        );
    }

    #[test]
    fn from_curve_anchors_pass_through_leaf_vertices() {
        let s = make_scenario(3, 3, None).unwrap();
        let lc = assign_anchors(classify_edges(conic(), s).unwrap(), AnchorMode::FromCurve);
        assert_eq!(lc.anchors().len(), 4);
        // Leaf (0,−1) at V0 = (0,0): the anchor line is x = 0.
        let a = &lc.anchors()[&EdgeId(4)];
        assert_eq!(a.base, vec![rati(0), rati(0)]);
        assert_eq!(a.direction, iv(&[0, -1]));
        // Leaf (0,−1) at V1 = (1,1): the anchor line is x = 1.
        let a = &lc.anchors()[&EdgeId(5)];
        assert_eq!(a.base, vec![rati(1), rati(1)]);
    }

    #[test]
    fn random_anchors_are_deterministic_per_seed() {
        let s = make_scenario(3, 3, None).unwrap();
        let lc = classify_edges(conic(), s).unwrap();
        let a = assign_anchors(lc.clone(), AnchorMode::Random { seed: 7 });
        let b = assign_anchors(lc.clone(), AnchorMode::Random { seed: 7 });
        let c = assign_anchors(lc, AnchorMode::Random { seed: 8 });
        assert_eq!(a.anchors(), b.anchors());
        assert_ne!(a.anchors(), c.anchors());
    }

    #[test]
    fn classification_is_position_independent() {
        // Classify, then move every vertex by (1, 1): identical roles.
        let s = make_scenario(3, 3, None).unwrap();
        let base = classify_edges(conic(), s.clone()).unwrap();
        let c = conic();
        let shifted = TropicalCurve::new(
            c.graph().clone(),
            2,
            c.positions()
                .iter()
                .map(|p| p.iter().map(|x| x + &rati(1)).collect())
                .collect(),
            c.graph()
                .leaf_edges()
                .map(|e| (e.id, c.leaf_direction(e.id).unwrap().clone()))
                .collect(),
        )
        .unwrap();
        let moved = classify_edges(shifted, s).unwrap();
        assert_eq!(base.roles(), moved.roles());
    }
}
