//! Parametrized tropical curves in ℚ^m and their combinatorial types.
//!
//! A curve stores exact rational vertex positions and primitive integer
//! directions on leaf edges; bounded-edge directions are derived from the
//! positions. A combinatorial type forgets positions and keeps the direction
//! map on flags. Balancing, degree maps, immersiveness (exact segment/ray
//! intersection), direction inference on trees, and realization all live
//! here.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::graph::{Edge, EdgeEnds, EdgeId, Flag, Graph, VertexId};
use crate::rational::{primitive, rati, solve_affine, strictly_positive_point, IntVec, LinSys, Rat};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CurveError {
    #[error("position or direction has wrong dimension (expected {expected}, got {got})")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("missing position for vertex {0}")]
    MissingPosition(VertexId),
    #[error("leaf edge {0} has no direction")]
    MissingLeafDirection(EdgeId),
    #[error("edge {0} is not a leaf edge")]
    NotLeaf(EdgeId),
    #[error("direction on edge {0} is zero")]
    ZeroDirection(EdgeId),
    #[error("direction on edge {0} is not primitive")]
    NotPrimitive(EdgeId),
    #[error("bounded edge {0} has coincident endpoint positions")]
    ZeroDisplacement(EdgeId),
    #[error("balancing forces edge {0} to be contracted")]
    Contracted(EdgeId),
    #[error("graph is not a tree")]
    NotATree,
    #[error("edge weight does not fit the weight type")]
    WeightOverflow,
    #[error("no realization with positive edge lengths and immersive image")]
    Infeasible,
}

/// Combinatorial type: graph plus the primitive direction map on flags,
/// positions forgotten. For a bounded edge the stored direction is the one
/// emanating from the first stored endpoint; the opposite flag gets its
/// negative.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombinatorialType {
    graph: Graph,
    ambient_dim: usize,
    dir: Vec<IntVec>,
}

impl CombinatorialType {
    pub fn new(graph: Graph, ambient_dim: usize, dir: Vec<IntVec>) -> Result<Self, CurveError> {
        assert_eq!(dir.len(), graph.edges().len(), "one direction per edge");
        for e in graph.edges() {
            let d = &dir[e.id.0];
            if d.dim() != ambient_dim {
                return Err(CurveError::DimensionMismatch {
                    expected: ambient_dim,
                    got: d.dim(),
                });
            }
            if d.is_zero() {
                return Err(CurveError::ZeroDirection(e.id));
            }
            let (_, g) = primitive(d).expect("nonzero");
            if !g.is_one() {
                return Err(CurveError::NotPrimitive(e.id));
            }
        }
        Ok(CombinatorialType {
            graph,
            ambient_dim,
            dir,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn weight(&self, e: EdgeId) -> u64 {
        self.graph.edge(e).weight
    }

    /// Primitive direction emanating from the flag's vertex.
    pub fn flag_direction(&self, f: Flag) -> IntVec {
        let edge = self.graph.edge(f.edge);
        match edge.ends {
            EdgeEnds::Leaf(_) => self.dir[f.edge.0].clone(),
            EdgeEnds::Bounded(a, _) if a == f.vertex => self.dir[f.edge.0].clone(),
            EdgeEnds::Bounded(..) => -&self.dir[f.edge.0],
        }
    }

    /// Direction stored at the edge's first endpoint (or at the leaf vertex).
    pub fn edge_direction(&self, e: EdgeId) -> &IntVec {
        &self.dir[e.0]
    }
}

/// A parametrized tropical curve: graph, exact vertex positions in ℚ^m, and
/// primitive directions on leaf edges.
#[derive(Clone, Debug, PartialEq)]
pub struct TropicalCurve {
    graph: Graph,
    ambient_dim: usize,
    positions: Vec<Vec<Rat>>,
    leaf_dirs: Vec<Option<IntVec>>,
}

impl TropicalCurve {
    pub fn new(
        graph: Graph,
        ambient_dim: usize,
        positions: Vec<Vec<Rat>>,
        leaf_dirs: BTreeMap<EdgeId, IntVec>,
    ) -> Result<Self, CurveError> {
        if positions.len() != graph.vertex_count() {
            return Err(CurveError::MissingPosition(VertexId(positions.len())));
        }
        for p in &positions {
            if p.len() != ambient_dim {
                return Err(CurveError::DimensionMismatch {
                    expected: ambient_dim,
                    got: p.len(),
                });
            }
        }
        let mut dirs: Vec<Option<IntVec>> = vec![None; graph.edges().len()];
        for e in graph.edges() {
            match e.ends {
                EdgeEnds::Leaf(_) => {
                    let d = leaf_dirs
                        .get(&e.id)
                        .ok_or(CurveError::MissingLeafDirection(e.id))?;
                    if d.dim() != ambient_dim {
                        return Err(CurveError::DimensionMismatch {
                            expected: ambient_dim,
                            got: d.dim(),
                        });
                    }
                    if d.is_zero() {
                        return Err(CurveError::ZeroDirection(e.id));
                    }
                    let (_, g) = primitive(d).expect("nonzero");
                    if !g.is_one() {
                        return Err(CurveError::NotPrimitive(e.id));
                    }
                    dirs[e.id.0] = Some(d.clone());
                }
                EdgeEnds::Bounded(a, b) => {
                    if positions[a.0] == positions[b.0] {
                        return Err(CurveError::ZeroDisplacement(e.id));
                    }
                }
            }
        }
        if let Some((e, _)) = leaf_dirs
            .iter()
            .find(|(e, _)| !graph.edge(**e).is_leaf())
        {
            return Err(CurveError::NotLeaf(*e));
        }
        Ok(TropicalCurve {
            graph,
            ambient_dim,
            positions,
            leaf_dirs: dirs,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn position(&self, v: VertexId) -> &[Rat] {
        &self.positions[v.0]
    }

    pub fn positions(&self) -> &[Vec<Rat>] {
        &self.positions
    }

    pub fn leaf_direction(&self, e: EdgeId) -> Option<&IntVec> {
        self.leaf_dirs[e.0].as_ref()
    }

    /// Primitive direction and lattice length of a bounded edge, measured
    /// from its first stored endpoint: `pos(b) − pos(a) = len · u`.
    pub fn bounded_direction(&self, e: EdgeId) -> (IntVec, Rat) {
        let EdgeEnds::Bounded(a, b) = self.graph.edge(e).ends else {
            panic!("bounded_direction on leaf edge {e}");
        };
        let disp: Vec<Rat> = self.positions[b.0]
            .iter()
            .zip(&self.positions[a.0])
            .map(|(q, p)| q - p)
            .collect();
        rational_to_primitive(&disp).expect("constructor rejects zero displacements")
    }

    /// The combinatorial type underlying this curve.
    pub fn combinatorial_type(&self) -> CombinatorialType {
        let dir: Vec<IntVec> = self
            .graph
            .edges()
            .iter()
            .map(|e| match e.ends {
                EdgeEnds::Leaf(_) => self.leaf_dirs[e.id.0].clone().expect("leaf has direction"),
                EdgeEnds::Bounded(..) => self.bounded_direction(e.id).0,
            })
            .collect();
        CombinatorialType {
            graph: self.graph.clone(),
            ambient_dim: self.ambient_dim,
            dir,
        }
    }

    /// Primitive direction emanating from the flag's vertex.
    pub fn flag_direction(&self, f: Flag) -> IntVec {
        let edge = self.graph.edge(f.edge);
        match edge.ends {
            EdgeEnds::Leaf(_) => self.leaf_dirs[f.edge.0].clone().expect("leaf has direction"),
            EdgeEnds::Bounded(a, _) => {
                let (u, _) = self.bounded_direction(f.edge);
                if a == f.vertex {
                    u
                } else {
                    -&u
                }
            }
        }
    }
}

/// Writes a nonzero rational vector as `len · u` with `u` a primitive integer
/// vector and `len > 0`.
fn rational_to_primitive(v: &[Rat]) -> Option<(IntVec, Rat)> {
    let mut denom_lcm = BigInt::one();
    for x in v {
        denom_lcm = denom_lcm.lcm(x.denom());
    }
    let ints = IntVec::new(
        v.iter()
            .map(|x| x.numer() * (&denom_lcm / x.denom()))
            .collect(),
    );
    let (u, g) = primitive(&ints).ok()?;
    Some((u, Rat::new(g, denom_lcm)))
}

/// Per-vertex balancing residues `Σ w(E)·u_(V,E)`; balanced iff all zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BalanceReport {
    pub balanced: bool,
    /// Residue vector for every vertex, id-ascending.
    pub residues: Vec<IntVec>,
}

pub fn check_balancing_type(ct: &CombinatorialType) -> BalanceReport {
    let g = ct.graph();
    let mut residues = Vec::with_capacity(g.vertex_count());
    for v in g.vertices() {
        let mut sum = IntVec::zeros(ct.ambient_dim());
        for &e in g.incident_edges(v) {
            let u = ct.flag_direction(Flag { vertex: v, edge: e });
            sum = &sum + &u.scaled_u64(ct.weight(e));
        }
        residues.push(sum);
    }
    BalanceReport {
        balanced: residues.iter().all(|r| r.is_zero()),
        residues,
    }
}

pub fn check_balancing(c: &TropicalCurve) -> BalanceReport {
    check_balancing_type(&c.combinatorial_type())
}

/// Degree map Δ: weighted leaf direction ↦ multiplicity, finite support.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DegreeMap(pub BTreeMap<IntVec, u64>);

impl DegreeMap {
    /// e = |Δ|, the number of unbounded edges.
    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    /// If the support is exactly `dirs` with one common multiplicity δ,
    /// returns δ.
    pub fn uniform_multiplicity_over(&self, dirs: &[IntVec]) -> Option<u64> {
        if self.0.len() != dirs.len() {
            return None;
        }
        let mut delta = None;
        for d in dirs {
            let m = *self.0.get(d)?;
            match delta {
                None => delta = Some(m),
                Some(x) if x == m => {}
                Some(_) => return None,
            }
        }
        delta
    }
}

pub fn degree_map_type(ct: &CombinatorialType) -> DegreeMap {
    let mut map = BTreeMap::new();
    for e in ct.graph().leaf_edges() {
        let weighted = ct.edge_direction(e.id).scaled_u64(e.weight);
        *map.entry(weighted).or_insert(0) += 1;
    }
    DegreeMap(map)
}

pub fn degree_map(c: &TropicalCurve) -> DegreeMap {
    degree_map_type(&c.combinatorial_type())
}

pub fn is_trivalent_type(ct: &CombinatorialType) -> bool {
    ct.graph().is_trivalent()
}

pub fn is_trivalent(c: &TropicalCurve) -> bool {
    c.graph().is_trivalent()
}

/// The image of one edge: a segment (`len = Some`) or ray (`len = None`)
/// starting at `base` in the primitive direction `dir`.
struct EdgeImage {
    edge: EdgeId,
    base: Vec<Rat>,
    dir: IntVec,
    len: Option<Rat>,
}

enum ImageMeet {
    Empty,
    Point(Vec<Rat>),
    Overlap,
}

fn meet(a: &EdgeImage, b: &EdgeImage) -> ImageMeet {
    let m = a.base.len();
    let u = a.dir.entries();
    let w = b.dir.entries();
    let d: Vec<Rat> = b
        .base
        .iter()
        .zip(&a.base)
        .map(|(q, p)| q - p)
        .collect();
    // Both directions are primitive, so parallel means w = ±u.
    let parallel = if b.dir == a.dir {
        Some(1)
    } else if b.dir == -&a.dir {
        Some(-1)
    } else {
        None
    };
    match parallel {
        None => {
            // Independent directions: at most one point of intersection.
            let pair = (0..m)
                .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
                .find(|&(i, j)| &u[i] * &w[j] != &u[j] * &w[i])
                .expect("non-parallel vectors have an independent coordinate pair");
            let (i, j) = pair;
            let det = Rat::from_integer(&w[i] * &u[j] - &u[i] * &w[j]);
            let s = (&d[j] * &Rat::from_integer(w[i].clone())
                - &(&d[i] * &Rat::from_integer(w[j].clone())))
                / det.clone();
            let t = (&d[j] * &Rat::from_integer(u[i].clone())
                - &(&d[i] * &Rat::from_integer(u[j].clone())))
                / det;
            // The chosen 2×2 block solves the system; the remaining
            // coordinates must agree too.
            for k in 0..m {
                let lhs = &(&s * &Rat::from_integer(u[k].clone()))
                    - &(&t * &Rat::from_integer(w[k].clone()));
                if lhs != d[k] {
                    return ImageMeet::Empty;
                }
            }
            let in_range = |x: &Rat, hi: &Option<Rat>| {
                !x.is_negative() && hi.as_ref().map_or(true, |h| x <= h)
            };
            if in_range(&s, &a.len) && in_range(&t, &b.len) {
                let p: Vec<Rat> = a
                    .base
                    .iter()
                    .zip(u)
                    .map(|(pb, uk)| pb + &(&s * &Rat::from_integer(uk.clone())))
                    .collect();
                ImageMeet::Point(p)
            } else {
                ImageMeet::Empty
            }
        }
        Some(sigma) => {
            // Same line or disjoint parallel lines.
            let c = match d.iter().position(|x| !x.is_zero()) {
                None => Rat::zero(),
                Some(i) => {
                    if u[i].is_zero() {
                        return ImageMeet::Empty;
                    }
                    &d[i] / &Rat::from_integer(u[i].clone())
                }
            };
            for k in 0..m {
                if &c * &Rat::from_integer(u[k].clone()) != d[k] {
                    return ImageMeet::Empty;
                }
            }
            // b's parameter interval measured in a's coordinate s.
            let (b_lo, b_hi): (Option<Rat>, Option<Rat>) = if sigma == 1 {
                (Some(c.clone()), b.len.as_ref().map(|l| &c + l))
            } else {
                (b.len.as_ref().map(|l| &c - l), Some(c.clone()))
            };
            // a's interval is [0, a.len].
            let lo = match b_lo {
                None => Rat::zero(),
                Some(x) => {
                    if x.is_negative() {
                        Rat::zero()
                    } else {
                        x
                    }
                }
            };
            let hi: Option<Rat> = match (&a.len, &b_hi) {
                (None, None) => None,
                (Some(x), None) | (None, Some(x)) => Some(x.clone()),
                (Some(x), Some(y)) => Some(if x <= y { x.clone() } else { y.clone() }),
            };
            match hi {
                Some(h) if h < lo => ImageMeet::Empty,
                Some(h) if h == lo => {
                    let p: Vec<Rat> = a
                        .base
                        .iter()
                        .zip(u)
                        .map(|(pb, uk)| pb + &(&lo * &Rat::from_integer(uk.clone())))
                        .collect();
                    ImageMeet::Point(p)
                }
                _ => ImageMeet::Overlap,
            }
        }
    }
}

/// Immersiveness: all vertex images distinct, no contracted edge image, and
/// images of distinct edges meet only in shared endpoint images. All
/// intersections are decided exactly over ℚ, rays included.
pub fn is_immersive(c: &TropicalCurve) -> bool {
    let g = c.graph();
    let n = g.vertex_count();
    for i in 0..n {
        for j in (i + 1)..n {
            if c.positions[i] == c.positions[j] {
                return false;
            }
        }
    }
    let mut images = Vec::new();
    for e in g.edges() {
        match e.ends {
            EdgeEnds::Bounded(a, b) => {
                if c.positions[a.0] == c.positions[b.0] {
                    return false;
                }
                let (u, len) = c.bounded_direction(e.id);
                images.push(EdgeImage {
                    edge: e.id,
                    base: c.positions[a.0].clone(),
                    dir: u,
                    len: Some(len),
                });
            }
            EdgeEnds::Leaf(v) => {
                let dir = c.leaf_dirs[e.id.0].clone().expect("leaf direction");
                images.push(EdgeImage {
                    edge: e.id,
                    base: c.positions[v.0].clone(),
                    dir,
                    len: None,
                });
            }
        }
    }
    for i in 0..images.len() {
        for j in (i + 1)..images.len() {
            match meet(&images[i], &images[j]) {
                ImageMeet::Empty => {}
                ImageMeet::Overlap => return false,
                ImageMeet::Point(p) => {
                    let ei = g.edge(images[i].edge);
                    let ej = g.edge(images[j].edge);
                    let shared_ok = ei.vertices().iter().any(|v| {
                        ej.vertices().contains(v) && c.positions[v.0] == p
                    });
                    if !shared_ok {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Infers bounded-edge directions on a tree from weighted leaf directions.
///
/// For each bounded edge, global balancing of the component behind it forces
/// the weighted direction toward the other side to be minus the sum of the
/// weighted leaf directions behind; a zero sum means the edge would be
/// contracted, which is rejected.
pub fn infer_directions(
    tree: &Graph,
    leaf_dirs: &BTreeMap<EdgeId, IntVec>,
) -> Result<CombinatorialType, CurveError> {
    if !tree.is_tree() {
        return Err(CurveError::NotATree);
    }
    let ambient_dim = leaf_dirs
        .values()
        .next()
        .map(IntVec::dim)
        .unwrap_or(0);
    let mut dir: Vec<Option<IntVec>> = vec![None; tree.edges().len()];
    let mut weight: Vec<u64> = tree.edges().iter().map(|e| e.weight).collect();
    for e in tree.edges() {
        match e.ends {
            EdgeEnds::Leaf(_) => {
                let wd = leaf_dirs
                    .get(&e.id)
                    .ok_or(CurveError::MissingLeafDirection(e.id))?;
                if wd.dim() != ambient_dim {
                    return Err(CurveError::DimensionMismatch {
                        expected: ambient_dim,
                        got: wd.dim(),
                    });
                }
                let (u, g) = primitive(wd).map_err(|_| CurveError::ZeroDirection(e.id))?;
                dir[e.id.0] = Some(u);
                weight[e.id.0] = g.to_u64().ok_or(CurveError::WeightOverflow)?;
            }
            EdgeEnds::Bounded(..) => {
                let (first_side, _) = tree.split_by_edge(e.id).expect("tree with bounded edge");
                let mut sum = IntVec::zeros(ambient_dim);
                for leaf in &first_side {
                    let wd = leaf_dirs
                        .get(leaf)
                        .ok_or(CurveError::MissingLeafDirection(*leaf))?;
                    sum = &sum + wd;
                }
                let toward_other = -&sum;
                let (u, g) =
                    primitive(&toward_other).map_err(|_| CurveError::Contracted(e.id))?;
                dir[e.id.0] = Some(u);
                weight[e.id.0] = g.to_u64().ok_or(CurveError::WeightOverflow)?;
            }
        }
    }
    // Rebuild the graph with the inferred weights, ids unchanged.
    let mut b = Graph::builder();
    for _ in 0..tree.vertex_count() {
        b.add_vertex();
    }
    for e in tree.edges() {
        match e.ends {
            EdgeEnds::Bounded(v, w) => {
                b.add_edge(v, w, weight[e.id.0]);
            }
            EdgeEnds::Leaf(v) => {
                b.add_leaf(v, weight[e.id.0]);
            }
        }
    }
    let graph = b.build().expect("same topology as validated input");
    CombinatorialType::new(graph, ambient_dim, dir.into_iter().map(Option::unwrap).collect())
}

/// Deterministic edge-length schedules tried by [`realize`]: all-unit
/// lengths first, then injective generic ones to break image coincidences.
fn length_schedules(count: usize) -> Vec<Vec<Rat>> {
    let unit = vec![Rat::one(); count];
    let pow2: Vec<Rat> = (0..count)
        .map(|i| Rat::from_integer(BigInt::from(2u64).pow(i as u32)))
        .collect();
    let pow3: Vec<Rat> = (0..count)
        .map(|i| Rat::from_integer(BigInt::from(3u64).pow(i as u32)))
        .collect();
    vec![unit, pow2, pow3]
}

/// Produces a representative parametrized curve of the type: vertex V0 is
/// pinned at the origin, all-unit edge lengths are preferred, and the result
/// must be immersive with strictly positive lengths. Deterministic.
pub fn realize(ct: &CombinatorialType) -> Result<TropicalCurve, CurveError> {
    let g = ct.graph();
    // Two flags with the same direction at one vertex have overlapping
    // images for every choice of lengths.
    for v in g.vertices() {
        let inc = g.incident_edges(v);
        for (i, &e1) in inc.iter().enumerate() {
            for &e2 in &inc[i + 1..] {
                let d1 = ct.flag_direction(Flag { vertex: v, edge: e1 });
                let d2 = ct.flag_direction(Flag { vertex: v, edge: e2 });
                if d1 == d2 {
                    return Err(CurveError::Infeasible);
                }
            }
        }
    }
    let bounded: Vec<EdgeId> = g.bounded_edges().map(|e| e.id).collect();
    let leaf_dirs: BTreeMap<EdgeId, IntVec> = g
        .leaf_edges()
        .map(|e| (e.id, ct.edge_direction(e.id).clone()))
        .collect();
    let lengths_to_try: Vec<Vec<Rat>> = if g.is_tree() {
        length_schedules(bounded.len())
    } else {
        // With cycles the lengths must close up: solve the closure system and
        // pick a strictly positive point, preferring all-unit lengths.
        let closure = cycle_closure_system(ct, &bounded);
        let space = solve_affine(&closure).map_err(|_| CurveError::Infeasible)?;
        let mut candidates = Vec::new();
        let unit = vec![Rat::one(); bounded.len()];
        if crate::rational::residual(&closure, &unit).iter().all(Rat::is_zero) {
            candidates.push(unit);
        }
        let all: Vec<usize> = (0..bounded.len()).collect();
        if let Some(p) = strictly_positive_point(&space, &all) {
            candidates.push(p);
        }
        if candidates.is_empty() {
            return Err(CurveError::Infeasible);
        }
        candidates
    };
    for lengths in lengths_to_try {
        let positions = place_vertices(ct, &bounded, &lengths);
        let curve = TropicalCurve::new(
            g.clone(),
            ct.ambient_dim(),
            positions,
            leaf_dirs.clone(),
        )?;
        if is_immersive(&curve) {
            return Ok(curve);
        }
    }
    Err(CurveError::Infeasible)
}

/// Positions from edge lengths: BFS over a spanning tree from V0 at the
/// origin. For graphs with cycles the lengths must already satisfy closure.
fn place_vertices(ct: &CombinatorialType, bounded: &[EdgeId], lengths: &[Rat]) -> Vec<Vec<Rat>> {
    let g = ct.graph();
    let m = ct.ambient_dim();
    let len_of = |e: EdgeId| -> &Rat {
        let idx = bounded.iter().position(|&x| x == e).expect("bounded edge");
        &lengths[idx]
    };
    let mut pos: Vec<Option<Vec<Rat>>> = vec![None; g.vertex_count()];
    pos[0] = Some(vec![Rat::zero(); m]);
    let mut queue = std::collections::VecDeque::from([VertexId(0)]);
    while let Some(v) = queue.pop_front() {
        let here = pos[v.0].clone().expect("visited");
        for &e in g.incident_edges(v) {
            if let Some(w) = g.other_end(e, v) {
                if pos[w.0].is_none() {
                    let u = ct.flag_direction(Flag { vertex: v, edge: e });
                    let l = len_of(e);
                    let next: Vec<Rat> = here
                        .iter()
                        .zip(u.entries())
                        .map(|(p, uk)| p + &(l * &Rat::from_integer(uk.clone())))
                        .collect();
                    pos[w.0] = Some(next);
                    queue.push_back(w);
                }
            }
        }
    }
    pos.into_iter().map(|p| p.expect("connected graph")).collect()
}

/// Closure equations for non-tree bounded edges, over the edge lengths.
fn cycle_closure_system(ct: &CombinatorialType, bounded: &[EdgeId]) -> LinSys {
    let g = ct.graph();
    let m = ct.ambient_dim();
    // Symbolic positions: coefficient of each length in each vertex position.
    let mut coeff: Vec<Option<Vec<Rat>>> = vec![None; g.vertex_count()];
    let zero_row = |_: ()| vec![Rat::zero(); bounded.len()];
    let mut in_tree = vec![false; g.edges().len()];
    coeff[0] = Some(zero_row(()));
    // coefficient vectors store, per length, the scalar multiple; actual
    // position = Σ coeff_e · len_e · u_e, tracked per ambient coordinate below.
    let mut pos_expr: Vec<Option<Vec<Vec<Rat>>>> = vec![None; g.vertex_count()];
    pos_expr[0] = Some(vec![vec![Rat::zero(); bounded.len()]; m]);
    let mut queue = std::collections::VecDeque::from([VertexId(0)]);
    while let Some(v) = queue.pop_front() {
        let here = pos_expr[v.0].clone().expect("visited");
        for &e in g.incident_edges(v) {
            if let Some(w) = g.other_end(e, v) {
                if pos_expr[w.0].is_none() {
                    in_tree[e.0] = true;
                    let u = ct.flag_direction(Flag { vertex: v, edge: e });
                    let idx = bounded.iter().position(|&x| x == e).expect("bounded");
                    let mut next = here.clone();
                    for (k, row) in next.iter_mut().enumerate() {
                        row[idx] += Rat::from_integer(u.entries()[k].clone());
                    }
                    pos_expr[w.0] = Some(next);
                    queue.push_back(w);
                }
            }
        }
    }
    let _ = coeff;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for &e in bounded {
        if in_tree[e.0] {
            continue;
        }
        let EdgeEnds::Bounded(a, b) = g.edge(e).ends else {
            unreachable!()
        };
        let u = ct.edge_direction(e);
        let idx = bounded.iter().position(|&x| x == e).expect("bounded");
        let ea = pos_expr[a.0].as_ref().expect("connected");
        let eb = pos_expr[b.0].as_ref().expect("connected");
        for k in 0..m {
            let mut row: Vec<Rat> = eb[k]
                .iter()
                .zip(&ea[k])
                .map(|(x, y)| x - y)
                .collect();
            row[idx] -= Rat::from_integer(u.entries()[k].clone());
            rows.push(row);
            rhs.push(Rat::zero());
        }
    }
    LinSys::new(rows, rhs, bounded.len())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rational::rat;

    fn iv(v: &[i64]) -> IntVec {
        IntVec::from_i64s(v)
    }

    fn rv(v: &[i64]) -> Vec<Rat> {
        v.iter().map(|&x| rati(x)).collect()
    }

    /// Standard tripod: one vertex, leaves (1,0), (0,1), (−1,−1).
    fn tripod(weights: [u64; 3]) -> TropicalCurve {
        let mut b = Graph::builder();
        let v = b.add_vertex();
        let l0 = b.add_leaf(v, weights[0]);
        let l1 = b.add_leaf(v, weights[1]);
        let l2 = b.add_leaf(v, weights[2]);
        let g = b.build().unwrap();
        TropicalCurve::new(
            g,
            2,
            vec![rv(&[0, 0])],
            BTreeMap::from([
                (l0, iv(&[1, 0])),
                (l1, iv(&[0, 1])),
                (l2, iv(&[-1, -1])),
            ]),
        )
        .unwrap()
    }

    /// The degree-2 curve used throughout: caterpillar on 4 vertices with
    /// positions (0,0), (1,1), (2,3), (2,4).
    pub(crate) fn conic() -> TropicalCurve {
        let mut b = Graph::builder();
        let v: Vec<_> = (0..4).map(|_| b.add_vertex()).collect();
        b.add_edge(v[0], v[1], 1);
        b.add_edge(v[1], v[2], 1);
        b.add_edge(v[2], v[3], 1);
        let l0a = b.add_leaf(v[0], 1);
        let l0b = b.add_leaf(v[0], 1);
        let l1 = b.add_leaf(v[1], 1);
        let l2 = b.add_leaf(v[2], 1);
        let l3a = b.add_leaf(v[3], 1);
        let l3b = b.add_leaf(v[3], 1);
        let g = b.build().unwrap();
        TropicalCurve::new(
            g,
            2,
            vec![rv(&[0, 0]), rv(&[1, 1]), rv(&[2, 3]), rv(&[2, 4])],
            BTreeMap::from([
                (l0a, iv(&[-1, 0])),
                (l0b, iv(&[0, -1])),
                (l1, iv(&[0, -1])),
                (l2, iv(&[1, 1])),
                (l3a, iv(&[-1, 0])),
                (l3b, iv(&[1, 1])),
            ]),
        )
        .unwrap()
    }

    #[test]
    fn tripod_balances_with_unit_weights() {
        let report = check_balancing(&tripod([1, 1, 1]));
        assert!(report.balanced);
        assert!(report.residues.iter().all(|r| r.is_zero()));
    }

    #[test]
    fn unbalanced_tripod_reports_residue() {
        let report = check_balancing(&tripod([2, 1, 1]));
        assert!(!report.balanced);
        assert_eq!(report.residues[0], iv(&[1, 0]));
    }

    #[test]
    fn conic_balances_at_every_vertex() {
        // Hand check at V2 (position (2,3)): (−1,−2) + (1,1) + (0,1) = 0.
        let report = check_balancing(&conic());
        assert!(report.balanced, "residues: {:?}", report.residues);
    }

    #[test]
    fn conic_degree_map() {
        let dm = degree_map(&conic());
        assert_eq!(
            dm.0,
            BTreeMap::from([(iv(&[-1, 0]), 2), (iv(&[0, -1]), 2), (iv(&[1, 1]), 2)])
        );
        assert_eq!(dm.total(), 6);
    }

    #[test]
    fn tripod_degree_map_is_three_singletons() {
        let dm = degree_map(&tripod([1, 1, 1]));
        assert_eq!(dm.0.len(), 3);
        assert_eq!(dm.total(), 3);
    }

    #[test]
    fn weight_two_leaf_scales_degree_entry() {
        // Tripod with a weight-2 leaf in direction (1,1): balancing needs
        // (−2,0) and (0,−2) weighted branches; use weights 2,2,2 shape:
        // leaves (−1,0) w2, (0,−1) w2, (1,1) w2.
        let mut b = Graph::builder();
        let v = b.add_vertex();
        let l0 = b.add_leaf(v, 2);
        let l1 = b.add_leaf(v, 2);
        let l2 = b.add_leaf(v, 2);
        let g = b.build().unwrap();
        let c = TropicalCurve::new(
            g,
            2,
            vec![rv(&[0, 0])],
            BTreeMap::from([
                (l0, iv(&[-1, 0])),
                (l1, iv(&[0, -1])),
                (l2, iv(&[1, 1])),
            ]),
        )
        .unwrap();
        let dm = degree_map(&c);
        assert_eq!(dm.0.get(&iv(&[2, 2])), Some(&1));
        assert!(check_balancing(&c).balanced);
    }

    #[test]
    fn trivalence() {
        assert!(is_trivalent(&tripod([1, 1, 1])));
        assert!(is_trivalent(&conic()));
        let mut b = Graph::builder();
        let v = b.add_vertex();
        for _ in 0..4 {
            b.add_leaf(v, 1);
        }
        let g = b.build().unwrap();
        let star = TropicalCurve::new(
            g,
            2,
            vec![rv(&[0, 0])],
            BTreeMap::from([
                (EdgeId(0), iv(&[1, 0])),
                (EdgeId(1), iv(&[0, 1])),
                (EdgeId(2), iv(&[-1, 0])),
                (EdgeId(3), iv(&[0, -1])),
            ]),
        )
        .unwrap();
        assert!(!is_trivalent(&star));
    }

    #[test]
    fn conic_is_immersive() {
        assert!(is_immersive(&conic()));
    }

    #[test]
    fn coincident_vertex_images_are_not_immersive() {
        // Path V0—V1—V2 with V0 and V2 both at the origin.
        let mut b = Graph::builder();
        let v0 = b.add_vertex();
        let v1 = b.add_vertex();
        let v2 = b.add_vertex();
        b.add_edge(v0, v1, 1);
        b.add_edge(v1, v2, 1);
        let l0 = b.add_leaf(v0, 1);
        let l2 = b.add_leaf(v2, 1);
        let g = b.build().unwrap();
        let c = TropicalCurve::new(
            g,
            2,
            vec![rv(&[0, 0]), rv(&[1, 0]), rv(&[0, 0])],
            BTreeMap::from([(l0, iv(&[0, 1])), (l2, iv(&[0, -1]))]),
        )
        .unwrap();
        assert!(!is_immersive(&c));
    }

    #[test]
    fn interior_crossing_is_not_immersive() {
        // X shape: two bounded edges crossing at (1/2, 1/2).
        let mut b = Graph::builder();
        let v: Vec<_> = (0..4).map(|_| b.add_vertex()).collect();
        b.add_edge(v[0], v[1], 1);
        b.add_edge(v[2], v[3], 1);
        b.add_edge(v[0], v[2], 1); // connector to keep the graph connected
        let g = b.build().unwrap();
        let c = TropicalCurve::new(
            g,
            2,
            vec![rv(&[0, 0]), rv(&[1, 1]), rv(&[1, 0]), rv(&[0, 1])],
            BTreeMap::new(),
        )
        .unwrap();
        assert!(!is_immersive(&c));
    }

    #[test]
    fn infer_directions_on_conic_tree() {
        let c = conic();
        let g = c.graph().clone();
        let leaf_dirs: BTreeMap<EdgeId, IntVec> = g
            .leaf_edges()
            .map(|e| (e.id, c.leaf_direction(e.id).unwrap().clone()))
            .collect();
        let ct = infer_directions(&g, &leaf_dirs).unwrap();
        // Edge V0V1 faces away from leaves (−1,0) and (0,−1): direction (1,1).
        assert_eq!(ct.edge_direction(EdgeId(0)), &iv(&[1, 1]));
        // Edge V1V2: behind it sit (−1,0), (0,−1), (0,−1): direction (1,2).
        assert_eq!(ct.edge_direction(EdgeId(1)), &iv(&[1, 2]));
        assert_eq!(ct.edge_direction(EdgeId(2)), &iv(&[0, 1]));
        assert!(check_balancing_type(&ct).balanced);
    }

    #[test]
    fn infer_detects_contracted_edge() {
        // Path of two vertices whose leaf sums cancel across the middle edge.
        let mut b = Graph::builder();
        let v0 = b.add_vertex();
        let v1 = b.add_vertex();
        let e = b.add_edge(v0, v1, 1);
        let l0a = b.add_leaf(v0, 1);
        let l0b = b.add_leaf(v0, 1);
        let l1a = b.add_leaf(v1, 1);
        let l1b = b.add_leaf(v1, 1);
        let g = b.build().unwrap();
        let dirs = BTreeMap::from([
            (l0a, iv(&[1, 0])),
            (l0b, iv(&[-1, 0])),
            (l1a, iv(&[0, 1])),
            (l1b, iv(&[0, -1])),
        ]);
        assert_eq!(infer_directions(&g, &dirs), Err(CurveError::Contracted(e)));
    }

    #[test]
    fn realize_conic_type_reproduces_unit_length_positions() {
        let ct = conic().combinatorial_type();
        let r = realize(&ct).unwrap();
        assert_eq!(r.position(VertexId(0)), rv(&[0, 0]).as_slice());
        assert_eq!(r.position(VertexId(1)), rv(&[1, 1]).as_slice());
        assert_eq!(r.position(VertexId(2)), rv(&[2, 3]).as_slice());
        assert_eq!(r.position(VertexId(3)), rv(&[2, 4]).as_slice());
        assert_eq!(degree_map(&r), degree_map_type(&ct));
    }

    #[test]
    fn realize_tripod_at_origin() {
        let ct = tripod([1, 1, 1]).combinatorial_type();
        let r = realize(&ct).unwrap();
        assert_eq!(r.position(VertexId(0)), rv(&[0, 0]).as_slice());
    }

    #[test]
    fn realize_rejects_duplicate_flag_directions() {
        // Vertex with two leaves in the same direction can never be immersive.
        let mut b = Graph::builder();
        let v = b.add_vertex();
        b.add_leaf(v, 1);
        b.add_leaf(v, 1);
        b.add_leaf(v, 1);
        let g = b.build().unwrap();
        let ct = CombinatorialType::new(
            g,
            2,
            vec![iv(&[-1, 0]), iv(&[-1, 0]), iv(&[1, 0])],
        )
        .unwrap();
        assert_eq!(realize(&ct), Err(CurveError::Infeasible));
    }

    #[test]
    fn global_balancing_from_local() {
        // Weighted leaf directions of a balanced curve sum to zero.
        let c = conic();
        let mut sum = IntVec::zeros(2);
        for e in c.graph().leaf_edges() {
            sum = &sum + &c.leaf_direction(e.id).unwrap().scaled_u64(e.weight);
        }
        assert!(sum.is_zero());
    }

    #[test]
    fn displacement_factors_into_primitive_times_length() {
        let c = conic();
        let (u, len) = c.bounded_direction(EdgeId(1));
        assert_eq!(u, iv(&[1, 2]));
        assert_eq!(len, rati(1));
        // Fractional positions still factor exactly.
        let v = vec![rat(3, 2), rat(3, 2)];
        let (u2, l2) = rational_to_primitive(&v).unwrap();
        assert_eq!(u2, iv(&[1, 1]));
        assert_eq!(l2, rat(3, 2));
    }
}
