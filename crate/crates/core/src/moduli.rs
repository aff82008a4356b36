//! Dimension arithmetic and exact deformation spaces.
//!
//! The count for a degree-δ rational curve in ℙ^{n−1}: moduli δn + n − 4,
//! one incidence condition per intersection point with a non-free divisor
//! (δ points on each of the d − 1 non-free divisors), expected dimension
//! moduli − incidence, and sweep threshold n − 2. A component has at most
//! n − 1 non-free divisors (attained when d = n), so δ(n − 1) bounds the
//! incidence count from above; the report carries both the actual count and
//! this worst-case bound so the two arithmetics can be compared at a glance
//! instead of silently substituting one for the other.
//!
//! The deformation space of a labeled curve is computed exactly: unknowns
//! are one root position plus one length per bounded edge; bounded edges
//! keep their primitive direction, cycles must close up, and every non-free
//! leaf pins its vertex to its anchor line. Mobility measures how much a
//! free vertex moves transversally to its free direction inside the family.

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::degeneration::{EdgeRole, LabeledCurve};
use crate::graph::{EdgeEnds, EdgeId, Flag, VertexId};
use crate::rational::{solve_affine, IntVec, LinSys, Rat};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModuliError {
    #[error("total degree {d} exceeds the Fano bound {bound}")]
    NotFano { d: u64, bound: u64 },
    #[error("complete intersection degrees must all be at least 2")]
    BadCiDegree,
    #[error("base curve violates anchor on edge {0}")]
    BaseInfeasible(EdgeId),
    #[error("vertex {0} has no free leaf in the given direction")]
    NotFreeVertex(VertexId),
}

/// The dimension count for one (curve degree, ambient, hypersurface degree)
/// triple; `ci_degrees` is set for complete intersections.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub curve_degree: u64,
    pub n: usize,
    pub hypersurface_degree: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ci_degrees: Option<Vec<u64>>,
    pub moduli: i64,
    pub incidence: i64,
    pub expected: i64,
    /// Worst-case incidence count δ(n − 1), attained at d = n.
    pub incidence_bound: i64,
    /// Expected dimension under the worst-case incidence count: n + δ − 4.
    pub expected_min: i64,
    pub threshold: i64,
    pub sweeps: bool,
}

/// Moduli of smooth degree-δ rational curves in ℙ^{n−1}: δn + n − 4.
pub fn moduli_dim(delta: u64, n: usize) -> i64 {
    assert!(delta >= 1 && n >= 3);
    (delta * n as u64 + n as u64) as i64 - 4
}

/// Incidence conditions: δ intersection points on each of the d − 1
/// non-free divisors, one condition each.
pub fn incidence_dim(delta: u64, n: usize, d: u64) -> i64 {
    assert!(delta >= 1 && n >= 3 && d >= 2 && d <= n as u64);
    (delta * (d - 1)) as i64
}

/// Full dimension report for a hypersurface scenario.
pub fn expected_dim(delta: u64, n: usize, d: u64) -> DimensionReport {
    let moduli = moduli_dim(delta, n);
    let incidence = incidence_dim(delta, n, d);
    let expected = moduli - incidence;
    let incidence_bound = (delta * (n as u64 - 1)) as i64;
    let expected_min = moduli - incidence_bound;
    let threshold = n as i64 - 2;
    DimensionReport {
        curve_degree: delta,
        n,
        hypersurface_degree: d,
        ci_degrees: None,
        moduli,
        incidence,
        expected,
        incidence_bound,
        expected_min,
        threshold,
        sweeps: expected >= threshold,
    }
}

/// Dimension report for a Fano complete intersection of hypersurfaces of
/// degrees n₁, …, n_k in ℙ^{k+n−1}. Components of the degenerate fiber are
/// ℙ^{n−1} with Σ(nᵢ − 1) = d − k non-free divisors, so the arithmetic is the
/// hypersurface one with incidence δ(d − k).
pub fn ci_expected(degrees: &[u64], n: usize, delta: u64) -> Result<DimensionReport, ModuliError> {
    if degrees.is_empty() || degrees.iter().any(|&x| x < 2) {
        return Err(ModuliError::BadCiDegree);
    }
    assert!(delta >= 1 && n >= 3);
    let k = degrees.len() as u64;
    let d: u64 = degrees.iter().sum();
    let bound = k + n as u64 - 1;
    if d > bound {
        return Err(ModuliError::NotFano { d, bound });
    }
    let moduli = moduli_dim(delta, n);
    let incidence = (delta * (d - k)) as i64;
    let expected = moduli - incidence;
    let incidence_bound = (delta * (n as u64 - 1)) as i64;
    let threshold = n as i64 - 2;
    Ok(DimensionReport {
        curve_degree: delta,
        n,
        hypersurface_degree: d,
        ci_degrees: Some(degrees.to_vec()),
        moduli,
        incidence,
        expected,
        incidence_bound,
        expected_min: moduli - incidence_bound,
        threshold,
        sweeps: expected >= threshold,
    })
}

/// One first-order deformation: a velocity vector per vertex.
pub type VelocityField = Vec<Vec<Rat>>;

/// Exact solution space of the incidence-constrained deformation problem.
#[derive(Clone, Debug)]
pub struct DeformationSpace {
    pub dimension: usize,
    pub basis: Vec<VelocityField>,
    /// The anchored curve the space was computed at.
    pub base: LabeledCurve,
}

/// Symbolic vertex positions over (root, lengths): per vertex and ambient
/// coordinate, a row of coefficients over the length unknowns. The root
/// coefficient is the identity on coordinates and is kept implicit.
struct PathExpr {
    /// expr[v][k][e] = coefficient of length e in coordinate k of pos(v).
    expr: Vec<Vec<Vec<Rat>>>,
    bounded: Vec<EdgeId>,
    in_tree: Vec<bool>,
}

fn path_expressions(lc: &LabeledCurve) -> PathExpr {
    let c = lc.curve();
    let g = c.graph();
    let m = c.ambient_dim();
    let bounded: Vec<EdgeId> = g.bounded_edges().map(|e| e.id).collect();
    let nb = bounded.len();
    let idx_of = |e: EdgeId| bounded.iter().position(|&x| x == e).expect("bounded");
    let mut expr: Vec<Option<Vec<Vec<Rat>>>> = vec![None; g.vertex_count()];
    let mut in_tree = vec![false; g.edges().len()];
    expr[0] = Some(vec![vec![Rat::zero(); nb]; m]);
    let mut queue = std::collections::VecDeque::from([VertexId(0)]);
    while let Some(v) = queue.pop_front() {
        let here = expr[v.0].clone().expect("visited");
        for &e in g.incident_edges(v) {
            if let Some(w) = g.other_end(e, v) {
                if expr[w.0].is_none() {
                    in_tree[e.0] = true;
                    let (u, _) = c.bounded_direction(e);
                    let u = if matches!(g.edge(e).ends, EdgeEnds::Bounded(a, _) if a == v) {
                        u
                    } else {
                        -&u
                    };
                    let mut next = here.clone();
                    let j = idx_of(e);
                    for (k, row) in next.iter_mut().enumerate() {
                        row[j] += Rat::from_integer(u.entries()[k].clone());
                    }
                    expr[w.0] = Some(next);
                    queue.push_back(w);
                }
            }
        }
    }
    PathExpr {
        expr: expr.into_iter().map(|x| x.expect("connected")).collect(),
        bounded,
        in_tree,
    }
}

/// Integer rows spanning the orthogonal complement of a primitive direction:
/// for pivot p (first nonzero entry), the rows u_i·e_p − u_p·e_i, i ≠ p.
fn complement_rows(dir: &IntVec) -> Vec<Vec<Rat>> {
    let m = dir.dim();
    let p = dir
        .entries()
        .iter()
        .position(|x| !x.is_zero())
        .expect("primitive directions are nonzero");
    let mut rows = Vec::with_capacity(m - 1);
    for i in 0..m {
        if i == p {
            continue;
        }
        let mut row = vec![Rat::zero(); m];
        row[p] = Rat::from_integer(dir.entries()[i].clone());
        row[i] = -Rat::from_integer(dir.entries()[p].clone());
        rows.push(row);
    }
    rows
}

fn dot(row: &[Rat], v: &[Rat]) -> Rat {
    row.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Exact deformation space of an anchored curve. Unknowns are the root
/// position plus one length per bounded edge; constraints are cycle closure
/// and, per non-free leaf, membership of the adjacent vertex in its anchor
/// line. Verifies that the base curve satisfies every anchor. Edge-length
/// positivity holds at the base point and is therefore preserved in a
/// neighborhood; the reported dimension is that of the linear solution
/// space.
pub fn deformation_space(lc: &LabeledCurve) -> Result<DeformationSpace, ModuliError> {
    let c = lc.curve();
    let g = c.graph();
    let m = c.ambient_dim();
    let paths = path_expressions(lc);
    let nb = paths.bounded.len();
    let unknowns = m + nb;
    let mut rows: Vec<Vec<Rat>> = Vec::new();
    let mut rhs: Vec<Rat> = Vec::new();
    // Cycle closure for non-tree bounded edges.
    for (j, &e) in paths.bounded.iter().enumerate() {
        if paths.in_tree[e.0] {
            continue;
        }
        let EdgeEnds::Bounded(a, b) = g.edge(e).ends else { unreachable!() };
        let (u, _) = c.bounded_direction(e);
        for k in 0..m {
            let mut row = vec![Rat::zero(); unknowns];
            for (jj, (xb, xa)) in paths.expr[b.0][k].iter().zip(&paths.expr[a.0][k]).enumerate() {
                row[m + jj] = xb - xa;
            }
            row[m + j] -= Rat::from_integer(u.entries()[k].clone());
            rows.push(row);
            rhs.push(Rat::zero());
        }
    }
    // Anchor membership for non-free leaves.
    for e in g.leaf_edges() {
        if lc.role(e.id) != EdgeRole::NonFreeDivisor {
            continue;
        }
        let Some(anchor) = lc.anchors().get(&e.id) else {
            continue;
        };
        let EdgeEnds::Leaf(v) = e.ends else { unreachable!() };
        for crow in complement_rows(&anchor.direction) {
            let mut row = vec![Rat::zero(); unknowns];
            for k in 0..m {
                row[k] = crow[k].clone();
            }
            for j in 0..nb {
                let mut acc = Rat::zero();
                for k in 0..m {
                    acc += &crow[k] * &paths.expr[v.0][k][j];
                }
                row[m + j] = acc;
            }
            rows.push(row);
            rhs.push(dot(&crow, &anchor.base));
            // The base curve must satisfy the anchor exactly.
            if dot(&crow, c.position(v)) != dot(&crow, &anchor.base) {
                return Err(ModuliError::BaseInfeasible(e.id));
            }
        }
    }
    // The base point in (root, lengths) coordinates.
    let base_point: Vec<Rat> = {
        let mut p: Vec<Rat> = c.position(VertexId(0)).to_vec();
        for &e in &paths.bounded {
            let (_, len) = c.bounded_direction(e);
            p.push(len);
        }
        p
    };
    debug_assert!(
        crate::rational::residual(&LinSys::new(rows.clone(), rhs.clone(), unknowns), &base_point)
            .iter()
            .all(Rat::is_zero),
        "base curve satisfies its own constraint system"
    );
    let homogeneous = LinSys::new(rows, vec![Rat::zero(); rhs.len()], unknowns);
    let space = solve_affine(&homogeneous).expect("homogeneous systems are consistent");
    let basis: Vec<VelocityField> = space
        .basis
        .iter()
        .map(|vec| {
            (0..g.vertex_count())
                .map(|v| {
                    (0..m)
                        .map(|k| {
                            let mut acc = vec[k].clone();
                            for j in 0..nb {
                                acc += &paths.expr[v][k][j] * &vec[m + j];
                            }
                            acc
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(DeformationSpace {
        dimension: basis.len(),
        basis,
        base: lc.clone(),
    })
}

impl DeformationSpace {
    /// Restricts to the deformations that keep `v` fixed.
    pub fn pin_vertex(&self, v: VertexId) -> DeformationSpace {
        let m = self.base.curve().ambient_dim();
        let k = self.basis.len();
        let rows: Vec<Vec<Rat>> = (0..m)
            .map(|coord| {
                (0..k)
                    .map(|i| self.basis[i][v.0][coord].clone())
                    .collect()
            })
            .collect();
        let sys = LinSys::new(rows.clone(), vec![Rat::zero(); rows.len()], k);
        let space = solve_affine(&sys).expect("homogeneous");
        let basis: Vec<VelocityField> = space
            .basis
            .iter()
            .map(|c| {
                let mut field = vec![vec![Rat::zero(); m]; self.basis[0].len()];
                for (ci, bi) in c.iter().zip(&self.basis) {
                    for (fv, bv) in field.iter_mut().zip(bi) {
                        for (fx, bx) in fv.iter_mut().zip(bv) {
                            *fx += ci * bx;
                        }
                    }
                }
                field
            })
            .collect();
        DeformationSpace {
            dimension: basis.len(),
            basis,
            base: self.base.clone(),
        }
    }
}

/// Rank of (deformation basis) → (velocity of `v`) → ℚ^{m}/⟨free_direction⟩:
/// the dimension swept inside the free face by moving `v` through the family.
/// The quotient uses the fixed complement given by dropping the pivot
/// coordinate of the free direction.
pub fn mobility(
    ds: &DeformationSpace,
    v: VertexId,
    free_direction: &IntVec,
) -> Result<usize, ModuliError> {
    let lc = &ds.base;
    let has_free_leaf = lc
        .free_vertices()
        .iter()
        .any(|(w, dir)| *w == v && dir == free_direction);
    if !has_free_leaf {
        return Err(ModuliError::NotFreeVertex(v));
    }
    let m = lc.curve().ambient_dim();
    let p = free_direction
        .entries()
        .iter()
        .position(|x| !x.is_zero())
        .expect("free direction is primitive");
    let up = Rat::from_integer(free_direction.entries()[p].clone());
    let rows: Vec<Vec<Rat>> = ds
        .basis
        .iter()
        .map(|field| {
            let vel = &field[v.0];
            let t = &vel[p] / &up;
            (0..m)
                .filter(|&i| i != p)
                .map(|i| &vel[i] - &(&t * &Rat::from_integer(free_direction.entries()[i].clone())))
                .collect()
        })
        .collect();
    Ok(crate::rational::rank(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degeneration::{assign_anchors, classify_edges, make_scenario, AnchorMode};
    use crate::rational::rati;

    #[test]
    fn moduli_counts() {
        assert_eq!(moduli_dim(4, 4), 16);
        assert_eq!(moduli_dim(2, 4), 8);
        assert_eq!(moduli_dim(1, 3), 2);
    }

    #[test]
    fn incidence_counts() {
        assert_eq!(incidence_dim(4, 4, 4), 12);
        assert_eq!(incidence_dim(2, 5, 5), 8);
        assert_eq!(incidence_dim(1, 5, 3), 2);
    }

    #[test]
    fn expected_dimension_reports() {
        let r = expected_dim(2, 6, 6);
        assert_eq!(r.expected, 4);
        assert_eq!(r.threshold, 4);
        assert!(r.sweeps);
        assert_eq!(r.expected, r.moduli - r.incidence);
        assert_eq!(r.expected_min, 6 + 2 - 4);

        let r = expected_dim(1, 6, 4);
        assert_eq!(r.expected, 5);
        assert!(r.sweeps);

        let r = expected_dim(1, 4, 4);
        assert_eq!(r.expected, 1);
        assert!(!r.sweeps);
    }

    #[test]
    fn degree_two_at_maximal_degree_meets_threshold_exactly() {
        for n in 3..=64 {
            let r = expected_dim(2, n, n as u64);
            assert_eq!(r.expected, n as i64 - 2);
            assert_eq!(r.expected, r.threshold);
            assert!(r.sweeps);
        }
    }

    #[test]
    fn worst_case_identity_matches_specialized_formula() {
        for n in 3..=64usize {
            for d in 2..=(n as u64) {
                let r = expected_dim(d, n, d);
                assert_eq!(r.expected_min, n as i64 + d as i64 - 4);
                assert_eq!(r.moduli - r.incidence_bound, r.expected_min);
                if d == n as u64 {
                    assert_eq!(r.expected, r.expected_min);
                }
            }
        }
    }

    #[test]
    fn ci_reports() {
        // Degrees (2,2) in ℙ⁴: k = 2, n = 3, d = 4 = k + n − 1.
        let r = ci_expected(&[2, 2], 3, 2).unwrap();
        assert!(r.sweeps);
        assert_eq!(r.expected, r.threshold);
        // Same degrees in ℙ⁵ (n = 4, d = 4 < 5): lines sweep.
        let r = ci_expected(&[2, 2], 4, 1).unwrap();
        assert!(r.sweeps);
        assert_eq!(r.expected, 2);
        // Degrees (3,3) in ℙ⁵: d = 6 > 5.
        assert_eq!(
            ci_expected(&[3, 3], 4, 1),
            Err(ModuliError::NotFano { d: 6, bound: 5 })
        );
        // Degree 1 factors are not allowed.
        assert_eq!(ci_expected(&[1, 2], 4, 1), Err(ModuliError::BadCiDegree));
    }

    fn conic_anchored() -> LabeledCurve {
        let s = make_scenario(3, 3, None).unwrap();
        assign_anchors(
            classify_edges(crate::curve::tests::conic(), s).unwrap(),
            AnchorMode::FromCurve,
        )
    }

    #[test]
    fn conic_deformation_dimension_is_one() {
        let ds = deformation_space(&conic_anchored()).unwrap();
        assert_eq!(ds.dimension, 1);
        // The family moves V0 vertically: velocity (0, ±1) up to scale, and
        // V2, V3 along (−1, −1) with the same parameter.
        let field = &ds.basis[0];
        assert!(field[0][0].is_zero());
        assert!(!field[0][1].is_zero());
        let t = &field[0][1];
        assert_eq!(&field[1][1], t);
        assert_eq!(&field[2][0], &-t.clone());
        assert_eq!(&field[2][1], &-t.clone());
        assert_eq!(&field[3][0], &-t.clone());
        assert_eq!(&field[3][1], &-t.clone());
    }

    #[test]
    fn conic_without_anchors_has_full_tropical_moduli() {
        let s = make_scenario(3, 3, None).unwrap();
        let lc = classify_edges(crate::curve::tests::conic(), s).unwrap();
        let ds = deformation_space(&lc).unwrap();
        // e + m − 3 = 6 + 2 − 3.
        assert_eq!(ds.dimension, 5);
    }

    #[test]
    fn single_tripod_moves_by_translations_only() {
        let s = make_scenario(3, 2, None).unwrap();
        let mut b = crate::graph::Graph::builder();
        let v = b.add_vertex();
        let l0 = b.add_leaf(v, 1);
        let l1 = b.add_leaf(v, 1);
        let l2 = b.add_leaf(v, 1);
        let g = b.build().unwrap();
        let c = crate::curve::TropicalCurve::new(
            g,
            2,
            vec![vec![rati(0), rati(0)]],
            std::collections::BTreeMap::from([
                (l0, IntVec::from_i64s(&[-1, 0])),
                (l1, IntVec::from_i64s(&[0, -1])),
                (l2, IntVec::from_i64s(&[1, 1])),
            ]),
        )
        .unwrap();
        let lc = classify_edges(c, s).unwrap();
        let ds = deformation_space(&lc).unwrap();
        assert_eq!(ds.dimension, 2);
    }

    #[test]
    fn conic_mobility_against_free_face() {
        let ds = deformation_space(&conic_anchored()).unwrap();
        let dir = IntVec::from_i64s(&[-1, 0]);
        assert_eq!(mobility(&ds, VertexId(0), &dir).unwrap(), 1);
        assert_eq!(mobility(&ds, VertexId(3), &dir).unwrap(), 1);
        // Pinning V0 exhausts the family; V3 has no residual motion.
        let pinned = ds.pin_vertex(VertexId(0));
        assert_eq!(pinned.dimension, 0);
        assert_eq!(mobility(&pinned, VertexId(3), &dir).unwrap(), 0);
    }

    #[test]
    fn mobility_requires_a_free_leaf() {
        let ds = deformation_space(&conic_anchored()).unwrap();
        let dir = IntVec::from_i64s(&[-1, 0]);
        assert_eq!(
            mobility(&ds, VertexId(1), &dir),
            Err(ModuliError::NotFreeVertex(VertexId(1)))
        );
    }

    #[test]
    fn random_anchors_miss_the_base_curve() {
        let s = make_scenario(3, 3, None).unwrap();
        let lc = assign_anchors(
            classify_edges(crate::curve::tests::conic(), s).unwrap(),
            AnchorMode::Random { seed: 1 },
        );
        assert!(matches!(
            deformation_space(&lc),
            Err(ModuliError::BaseInfeasible(_))
        ));
    }
}
