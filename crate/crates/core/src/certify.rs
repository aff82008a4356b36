//! Sweeping certificates: construction, end-to-end verification, and a
//! small-scale exhaustive census.
//!
//! A sweeping certificate is a balanced, immersive, realizable degree-2
//! rational tropical curve whose obstruction vanishes and whose free-face
//! vertex has the full n − 2 dimensional mobility inside the anchored
//! family. [`canonical_certificate`] builds one by deterministic search on a
//! caterpillar tree; [`enumerate_types`] sweeps all trivalent trees at desk
//! scale and re-verifies everything it finds, cross-checking the
//! zero-propagation verdict against the glued-section oracle on every
//! candidate.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{
    check_balancing, infer_directions, is_immersive, realize, CurveError,
};
use crate::degeneration::{
    assign_anchors, classify_edges, make_scenario, projective_directions, AnchorMode, EdgeRole,
    LabeledCurve, Scenario,
};
use crate::graph::{EdgeEnds, EdgeId, Graph, VertexId};
use crate::moduli::{deformation_space, mobility};
use crate::obstruction::{propagate_vanishing, section_space_dim, ObstructionReport, Verdict};
use crate::rational::IntVec;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CertifyError {
    #[error("no certificate found in the search space for n = {0}")]
    SearchExhausted(usize),
    /// Propagation said the obstruction vanishes but the section oracle
    /// found a nonzero space. This is an implementation bug, never a data
    /// condition, and is never suppressed.
    #[error("oracle mismatch: propagation gave Vanishes but the section space has dimension {oracle_dim}")]
    OracleMismatch { oracle_dim: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum CertVerdict {
    Certificate,
    NotCertificate(String),
}

/// Verdict bundle for one labeled curve.
#[derive(Clone, Debug)]
pub struct CertificateReport {
    pub curve: LabeledCurve,
    pub n: usize,
    pub balanced: bool,
    pub immersive: bool,
    pub realizable: bool,
    pub obstruction: Option<ObstructionReport>,
    /// Exact dimension from the glued-section oracle, when computed.
    pub oracle_dim: Option<usize>,
    pub deformation_dim: Option<usize>,
    /// Maximal mobility over the free-leaf vertices.
    pub mobility: Option<usize>,
    pub verdict: CertVerdict,
    pub transversality_assumed: bool,
}

/// Runs the whole verification chain on a labeled curve: balancing,
/// immersiveness, realizability of the type, zero propagation with the
/// section oracle cross-check, and the anchored deformation/mobility count
/// with anchors re-derived from the curve itself. A `Vanishes` verdict that
/// the oracle contradicts is a hard error.
pub fn verify_certificate(lc: &LabeledCurve, n: usize) -> Result<CertificateReport, CertifyError> {
    let mut reasons: Vec<String> = Vec::new();
    let balanced = check_balancing(lc.curve()).balanced;
    if !balanced {
        reasons.push("not balanced".into());
    }
    let immersive = is_immersive(lc.curve());
    if !immersive {
        reasons.push("not immersive".into());
    }
    let realizable = realize(&lc.curve().combinatorial_type()).is_ok();
    if !realizable {
        reasons.push("not realizable".into());
    }
    let mut obstruction = None;
    let mut oracle_dim = None;
    match propagate_vanishing(lc, n) {
        Err(e) => reasons.push(format!("obstruction calculus refused: {e}")),
        Ok(report) => {
            let dim = section_space_dim(lc, n).expect("same preconditions as propagation");
            if report.verdict == Verdict::Vanishes && dim != 0 {
                return Err(CertifyError::OracleMismatch { oracle_dim: dim });
            }
            if report.verdict == Verdict::Inconclusive {
                reasons.push("obstruction inconclusive".into());
            }
            obstruction = Some(report);
            oracle_dim = Some(dim);
        }
    }
    let anchored = assign_anchors(lc.clone(), AnchorMode::FromCurve);
    let mut deformation_dim = None;
    let mut best_mobility = None;
    match deformation_space(&anchored) {
        Err(e) => reasons.push(format!("deformation space failed: {e}")),
        Ok(ds) => {
            deformation_dim = Some(ds.dimension);
            let mut best = 0usize;
            for (v, dir) in anchored.free_vertices() {
                let rank = mobility(&ds, v, &dir).expect("free vertex by construction");
                best = best.max(rank);
            }
            best_mobility = Some(best);
            if best != n - 2 {
                reasons.push(format!("mobility {best} < {}", n - 2));
            }
        }
    }
    let verdict = if reasons.is_empty() {
        CertVerdict::Certificate
    } else {
        CertVerdict::NotCertificate(reasons.join("; "))
    };
    Ok(CertificateReport {
        curve: lc.clone(),
        n,
        balanced,
        immersive,
        realizable,
        obstruction,
        oracle_dim,
        deformation_dim,
        mobility: best_mobility,
        verdict,
        transversality_assumed: lc.transversality_assumed,
    })
}

/// A caterpillar skeleton: 2n − 2 vertices in a path, two leaf slots at each
/// end, one at each middle vertex. Returns the graph together with the leaf
/// edge id of every slot, in slot order.
fn caterpillar(n: usize) -> (Graph, Vec<EdgeId>) {
    let nv = 2 * n - 2;
    let mut b = Graph::builder();
    let vs: Vec<VertexId> = (0..nv).map(|_| b.add_vertex()).collect();
    for i in 0..nv - 1 {
        b.add_edge(vs[i], vs[i + 1], 1);
    }
    let mut slots = Vec::new();
    for (i, &v) in vs.iter().enumerate() {
        let count = if i == 0 || i == nv - 1 { 2 } else { 1 };
        for _ in 0..count {
            slots.push(b.add_leaf(v, 1));
        }
    }
    (b.build().expect("caterpillar is connected"), slots)
}

/// Candidate evaluation shared by the canonical search and the census:
/// everything except the oracle cross-check, which the final
/// [`verify_certificate`] run performs.
fn quick_check(
    tree: &Graph,
    leaf_dirs: &BTreeMap<EdgeId, IntVec>,
    scenario: &Scenario,
    n: usize,
) -> Option<LabeledCurve> {
    let ct = infer_directions(tree, leaf_dirs).ok()?;
    let curve = realize(&ct).ok()?;
    let lc = classify_edges(curve, scenario.clone()).ok()?;
    let report = propagate_vanishing(&lc, n).ok()?;
    if report.verdict != Verdict::Vanishes {
        return None;
    }
    let anchored = assign_anchors(lc, AnchorMode::FromCurve);
    let ds = deformation_space(&anchored).ok()?;
    let best = anchored
        .free_vertices()
        .into_iter()
        .map(|(v, dir)| mobility(&ds, v, &dir).expect("free vertex"))
        .max()
        .unwrap_or(0);
    if best != n - 2 {
        return None;
    }
    Some(anchored)
}

/// Lexicographic multiset search over the open caterpillar slots.
struct CaterpillarSearch<'a> {
    tree: &'a Graph,
    /// Open leaf slots in vertex order.
    open_slots: Vec<EdgeId>,
    open_vertices: Vec<usize>,
    nv: usize,
    dirs: &'a [IntVec],
    /// Weighted free-leaf contribution of vertices 0..=i.
    free_prefix: Vec<IntVec>,
    free_slots: (EdgeId, EdgeId),
    scenario: &'a Scenario,
    n: usize,
}

impl CaterpillarSearch<'_> {
    /// DFS in lexicographic direction order; prefixes forcing a contracted
    /// bounded edge are pruned. The ith bounded edge joins V_i and V_{i+1}
    /// and is determined as soon as all slots of vertices ≤ i are filled:
    /// its weighted direction is minus the prefix leaf sum.
    fn run(
        &self,
        counts: &mut [usize],
        chosen: &mut Vec<usize>,
        running: &mut IntVec,
    ) -> Option<LabeledCurve> {
        let pos = chosen.len();
        if pos == self.open_slots.len() {
            return self.check(chosen);
        }
        let v = self.open_vertices[pos];
        let next_v = if pos + 1 < self.open_slots.len() {
            self.open_vertices[pos + 1]
        } else {
            self.nv
        };
        for dir_idx in 0..counts.len() {
            if counts[dir_idx] == 0 {
                continue;
            }
            counts[dir_idx] -= 1;
            chosen.push(dir_idx);
            let saved = running.clone();
            *running = &*running + &self.dirs[dir_idx];
            let mut dead = false;
            for i in v..next_v.min(self.nv - 1) {
                let prefix = &*running + &self.free_prefix[i];
                if prefix.is_zero() {
                    dead = true;
                    break;
                }
            }
            if !dead {
                if let Some(hit) = self.run(counts, chosen, running) {
                    return Some(hit);
                }
            }
            *running = saved;
            chosen.pop();
            counts[dir_idx] += 1;
        }
        None
    }

    fn check(&self, assignment: &[usize]) -> Option<LabeledCurve> {
        let mut leaf_dirs: BTreeMap<EdgeId, IntVec> = BTreeMap::new();
        leaf_dirs.insert(self.free_slots.0, self.dirs[0].clone());
        leaf_dirs.insert(self.free_slots.1, self.dirs[0].clone());
        for (&slot, &dir_idx) in self.open_slots.iter().zip(assignment) {
            leaf_dirs.insert(slot, self.dirs[dir_idx].clone());
        }
        quick_check(self.tree, &leaf_dirs, self.scenario, self.n)
    }
}

/// Constructs the canonical degree-2 certificate for ℙⁿ⁻¹ inside the degree
/// d = n scenario: a caterpillar with 2n − 2 vertices and 2n leaves, its two
/// free leaves (direction −e₁) at distinct vertices — the two ends are tried
/// first — and the remaining directions placed by lexicographic search. The
/// first assignment that is realizable, has vanishing obstruction and full
/// free-vertex mobility wins; the final report re-verifies everything
/// including the oracle.
pub fn canonical_certificate(n: usize) -> Result<CertificateReport, CertifyError> {
    assert!(n >= 3, "canonical_certificate needs n ≥ 3");
    let scenario = make_scenario(n, n, None).expect("d = n scenario");
    let dirs = projective_directions(n);
    let free_dir = dirs[0].clone();
    let (tree, slots) = caterpillar(n);
    let nv = tree.vertex_count();
    let slot_vertex: Vec<usize> = slots
        .iter()
        .map(|&e| match tree.edge(e).ends {
            EdgeEnds::Leaf(v) => v.0,
            _ => unreachable!(),
        })
        .collect();
    // Free-leaf placements: the two ends first, then every other vertex pair.
    let mut placements: Vec<(usize, usize)> = vec![(0, nv - 1)];
    for i in 0..nv {
        for j in (i + 1)..nv {
            if (i, j) != (0, nv - 1) {
                placements.push((i, j));
            }
        }
    }
    for (fi, fj) in placements {
        let mut open_slots = Vec::new();
        let mut open_vertices = Vec::new();
        let mut taken = [None, None];
        for (idx, &e) in slots.iter().enumerate() {
            let v = slot_vertex[idx];
            if v == fi && taken[0].is_none() {
                taken[0] = Some(e);
            } else if v == fj && taken[1].is_none() {
                taken[1] = Some(e);
            } else {
                open_slots.push(e);
                open_vertices.push(v);
            }
        }
        let (Some(free_a), Some(free_b)) = (taken[0], taken[1]) else {
            continue;
        };
        let free_prefix: Vec<IntVec> = (0..nv)
            .map(|i| {
                let mut acc = IntVec::zeros(n - 1);
                if fi <= i {
                    acc = &acc + &free_dir;
                }
                if fj <= i {
                    acc = &acc + &free_dir;
                }
                acc
            })
            .collect();
        let search = CaterpillarSearch {
            tree: &tree,
            open_slots,
            open_vertices,
            nv,
            dirs: &dirs,
            free_prefix,
            free_slots: (free_a, free_b),
            scenario: &scenario,
            n,
        };
        let mut counts = vec![2usize; n];
        counts[0] = 0; // both −e₁ leaves are already placed
        let mut chosen = Vec::new();
        let mut running = IntVec::zeros(n - 1);
        if let Some(lc) = search.run(&mut counts, &mut chosen, &mut running) {
            return verify_certificate(&lc, n);
        }
    }
    Err(CertifyError::SearchExhausted(n))
}

/// Enumeration caps for [`enumerate_types`].
#[derive(Clone, Copy, Debug, Default)]
pub struct CensusCaps {
    pub max_trees: Option<usize>,
    pub max_assignments: Option<usize>,
}

/// Census over all trivalent genus-0 types of projective degree δ: tree
/// topologies on δ·n labeled leaves, direction assignments up to colored
/// tree isomorphism, realization, labeling and full verification.
#[derive(Clone, Debug)]
pub struct TypeCensus {
    pub n: usize,
    pub delta: u64,
    /// Hypersurface degree of the scenario the census verifies against.
    pub d: usize,
    pub trees_enumerated: usize,
    pub assignments_enumerated: usize,
    /// Distinct candidate types after canonical-form deduplication.
    pub types_examined: usize,
    /// Types that realize to a balanced immersive curve.
    pub balanced_immersive: usize,
    pub certificates: usize,
    pub capped: bool,
    /// Canonical key and anchored curve of every certificate, key order.
    pub representatives: Vec<(String, LabeledCurve)>,
}

#[derive(Clone, Debug)]
enum SketchEdge {
    Bounded(usize, usize),
    Leaf(usize, usize),
}

/// All trivalent trees on `nleaves` labeled leaves, by recursive edge
/// subdivision: (2L−5)!! topologies, deterministic order.
fn enumerate_trivalent_trees(nleaves: usize, cap: Option<usize>) -> (Vec<Vec<SketchEdge>>, bool) {
    assert!(nleaves >= 3);
    let mut done = Vec::new();
    let mut capped = false;
    let start = vec![
        SketchEdge::Leaf(0, 0),
        SketchEdge::Leaf(0, 1),
        SketchEdge::Leaf(0, 2),
    ];
    let mut stack: Vec<(usize, Vec<SketchEdge>, usize)> = vec![(1, start, 3)];
    while let Some((internal, edges, next_leaf)) = stack.pop() {
        if let Some(c) = cap {
            if done.len() >= c {
                capped = true;
                break;
            }
        }
        if next_leaf == nleaves {
            done.push(edges);
            continue;
        }
        // Subdivide each edge in reverse order so the stack pops them in
        // forward order.
        for i in (0..edges.len()).rev() {
            let w = internal;
            let mut next = edges.clone();
            let replaced = next[i].clone();
            match replaced {
                SketchEdge::Bounded(a, b) => {
                    next[i] = SketchEdge::Bounded(a, w);
                    next.push(SketchEdge::Bounded(w, b));
                }
                SketchEdge::Leaf(a, label) => {
                    next[i] = SketchEdge::Bounded(a, w);
                    next.push(SketchEdge::Leaf(w, label));
                }
            }
            next.push(SketchEdge::Leaf(w, next_leaf));
            stack.push((internal + 1, next, next_leaf + 1));
        }
    }
    (done, capped)
}

/// Distinct permutations of the direction multiset over the labeled leaves.
fn enumerate_assignments(n_dirs: usize, delta: u64, nleaves: usize) -> Vec<Vec<usize>> {
    let mut counts = vec![delta as usize; n_dirs];
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(nleaves);
    fn rec(
        counts: &mut Vec<usize>,
        current: &mut Vec<usize>,
        nleaves: usize,
        out: &mut Vec<Vec<usize>>,
    ) {
        if current.len() == nleaves {
            out.push(current.clone());
            return;
        }
        for i in 0..counts.len() {
            if counts[i] > 0 {
                counts[i] -= 1;
                current.push(i);
                rec(counts, current, nleaves, out);
                current.pop();
                counts[i] += 1;
            }
        }
    }
    rec(&mut counts, &mut current, nleaves, &mut out);
    out
}

/// Canonical string form of a tree sketch with colored leaves, invariant
/// under graph isomorphism: rooted AHU codes at the tree center (or the
/// ordered pair across the center edge).
fn canonical_key(internal: usize, edges: &[SketchEdge], colors: &[usize]) -> String {
    // Nodes: internal vertices 0..internal, then one node per leaf.
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); internal];
    let mut color: Vec<Option<usize>> = vec![None; internal];
    for e in edges {
        match *e {
            SketchEdge::Bounded(a, b) => {
                adj[a].push(b);
                adj[b].push(a);
            }
            SketchEdge::Leaf(a, label) => {
                let id = adj.len();
                adj.push(vec![a]);
                adj[a].push(id);
                color.push(Some(colors[label]));
            }
        }
    }
    let total = adj.len();
    // Tree center: peel leaves layer by layer.
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut removed = vec![false; total];
    let mut frontier: Vec<usize> = (0..total).filter(|&v| degree[v] <= 1).collect();
    let mut remaining = total;
    while remaining > 2 {
        let mut next = Vec::new();
        for &v in &frontier {
            removed[v] = true;
            remaining -= 1;
            for &w in &adj[v] {
                if !removed[w] {
                    degree[w] -= 1;
                    if degree[w] == 1 {
                        next.push(w);
                    }
                }
            }
        }
        frontier = next;
    }
    let centers: Vec<usize> = (0..total).filter(|&v| !removed[v]).collect();
    fn ahu(v: usize, parent: Option<usize>, adj: &[Vec<usize>], color: &[Option<usize>]) -> String {
        let mut children: Vec<String> = adj[v]
            .iter()
            .filter(|&&w| Some(w) != parent)
            .map(|&w| ahu(w, Some(v), adj, color))
            .collect();
        children.sort();
        let tag = match color[v] {
            Some(c) => format!("L{c}"),
            None => "*".to_string(),
        };
        format!("({tag}{})", children.concat())
    }
    match centers.as_slice() {
        [c] => ahu(*c, None, &adj, &color),
        [a, b] => {
            let mut pair = [ahu(*a, Some(*b), &adj, &color), ahu(*b, Some(*a), &adj, &color)];
            pair.sort();
            format!("[{}{}]", pair[0], pair[1])
        }
        _ => unreachable!("trees have one or two centers"),
    }
}

/// Materializes a sketch as a graph; returns the leaf edge id per label.
fn sketch_to_graph(internal: usize, edges: &[SketchEdge], nleaves: usize) -> (Graph, Vec<EdgeId>) {
    let mut b = Graph::builder();
    for _ in 0..internal {
        b.add_vertex();
    }
    let mut leaf_edge = vec![EdgeId(usize::MAX); nleaves];
    for e in edges {
        match *e {
            SketchEdge::Bounded(x, y) => {
                b.add_edge(VertexId(x), VertexId(y), 1);
            }
            SketchEdge::Leaf(v, label) => {
                leaf_edge[label] = b.add_leaf(VertexId(v), 1);
            }
        }
    }
    (b.build().expect("tree sketches are connected"), leaf_edge)
}

/// Scenario degree used by the census: the regime in which a degree-δ curve
/// is the sweeping witness — d = n for conics and above, d = n − 1 for
/// lines.
fn census_scenario_degree(n: usize, delta: u64) -> usize {
    if delta == 1 {
        n - 1
    } else {
        n
    }
}

/// Exhaustive type census at desk scale. Deterministic: candidates are
/// deduplicated by canonical form and processed in key order, so counts and
/// representatives do not depend on enumeration or thread order.
pub fn enumerate_types(
    n: usize,
    delta: u64,
    caps: CensusCaps,
) -> Result<TypeCensus, CertifyError> {
    assert!(n >= 3 && delta >= 1);
    let d = census_scenario_degree(n, delta);
    let scenario = make_scenario(n, d, None).expect("census scenario");
    let dirs = projective_directions(n);
    let nleaves = (delta as usize) * n;
    let (trees, mut capped) = enumerate_trivalent_trees(nleaves, caps.max_trees);
    let assignments = enumerate_assignments(n, delta, nleaves);
    let mut unique: BTreeMap<String, (usize, Vec<usize>)> = BTreeMap::new();
    let mut assignments_enumerated = 0usize;
    'outer: for (t_idx, sketch) in trees.iter().enumerate() {
        let internal = nleaves - 2;
        for assignment in &assignments {
            if let Some(cap) = caps.max_assignments {
                if assignments_enumerated >= cap {
                    capped = true;
                    break 'outer;
                }
            }
            assignments_enumerated += 1;
            let key = canonical_key(internal, sketch, assignment);
            unique.entry(key).or_insert_with(|| (t_idx, assignment.clone()));
        }
    }
    let candidates: Vec<(&String, &(usize, Vec<usize>))> = unique.iter().collect();
    let results: Vec<(String, Option<LabeledCurve>)> = candidates
        .par_iter()
        .map(|(key, (t_idx, assignment))| {
            let sketch = &trees[*t_idx];
            let (tree, leaf_edge) = sketch_to_graph(nleaves - 2, sketch, nleaves);
            let leaf_dirs: BTreeMap<EdgeId, IntVec> = leaf_edge
                .iter()
                .zip(assignment)
                .map(|(&e, &dir_idx)| (e, dirs[dir_idx].clone()))
                .collect();
            let Ok(ct) = infer_directions(&tree, &leaf_dirs) else {
                return ((*key).clone(), None);
            };
            let Ok(curve) = realize(&ct) else {
                return ((*key).clone(), None);
            };
            let lc = classify_edges(curve, scenario.clone())
                .expect("census assignments have projective degree");
            ((*key).clone(), Some(lc))
        })
        .collect();
    let mut balanced_immersive = 0usize;
    let mut representatives = Vec::new();
    for (key, lc) in results {
        let Some(lc) = lc else { continue };
        balanced_immersive += 1;
        let report = verify_certificate(&lc, n)?;
        if report.verdict == CertVerdict::Certificate {
            representatives.push((key, report.curve));
        }
    }
    Ok(TypeCensus {
        n,
        delta,
        d,
        trees_enumerated: trees.len(),
        assignments_enumerated,
        types_examined: unique.len(),
        balanced_immersive,
        certificates: representatives.len(),
        capped,
        representatives,
    })
}

/// Canonical key of a labeled curve's type, comparable with census keys.
/// Only defined for trees whose leaves all carry projective directions.
pub fn type_key(lc: &LabeledCurve) -> String {
    let g = lc.curve().graph();
    let dirs = projective_directions(lc.scenario().n());
    let mut edges = Vec::new();
    let mut colors = Vec::new();
    let mut label = 0usize;
    for e in g.edges() {
        match e.ends {
            EdgeEnds::Bounded(a, b) => edges.push(SketchEdge::Bounded(a.0, b.0)),
            EdgeEnds::Leaf(v) => {
                let dir = lc.curve().leaf_direction(e.id).expect("leaf direction");
                let idx = dirs
                    .iter()
                    .position(|d| d == dir)
                    .expect("projective leaf direction");
                edges.push(SketchEdge::Leaf(v.0, label));
                colors.push(idx);
                label += 1;
            }
        }
    }
    canonical_key(g.vertex_count(), &edges, &colors)
}
