//! Serialization: curve documents (JSON, format version 1), machine-readable
//! report documents, and DOT export.
//!
//! Rationals travel as JSON integers when integral and as `"p/q"` strings in
//! lowest terms otherwise, so nothing is ever rounded. Curve documents
//! round-trip exactly; every structural invariant is enforced at parse time
//! with a positioned error.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::certify::{CertVerdict, CertificateReport, TypeCensus};
use crate::curve::{check_balancing, degree_map, is_immersive, TropicalCurve};
use crate::degeneration::{
    classify_edges, make_scenario, AnchorLine, EdgeRole, LabeledCurve, Scenario,
};
use crate::graph::{EdgeEnds, EdgeId, Graph, VertexId};
use crate::moduli::DimensionReport;
use crate::obstruction::ObstructionReport;
use crate::rational::{IntVec, Rat};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IoError {
    #[error("parse error at line {line}, column {column}: {reason}")]
    Parse {
        line: usize,
        column: usize,
        reason: String,
    },
    #[error("invariant violation at {path}: {reason}")]
    Invariant { path: String, reason: String },
    #[error("document has no scenario; this operation needs one")]
    MissingScenario,
}

fn invariant(path: impl Into<String>, reason: impl std::fmt::Display) -> IoError {
    IoError::Invariant {
        path: path.into(),
        reason: reason.to_string(),
    }
}

/// A rational in transit: integer when integral, `"p/q"` otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct JsonRat(pub Rat);

impl Serialize for JsonRat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use num_traits::ToPrimitive;
        if self.0.denom().is_one() {
            if let Some(v) = self.0.numer().to_i64() {
                return serializer.serialize_i64(v);
            }
        }
        serializer.serialize_str(&format!("{}", self.0))
    }
}

impl<'de> Deserialize<'de> for JsonRat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(i64),
            Text(String),
        }
        let raw = Raw::deserialize(deserializer)?;
        match raw {
            Raw::Num(v) => Ok(JsonRat(Rat::from_integer(BigInt::from(v)))),
            Raw::Text(s) => {
                let (numer, denom) = match s.split_once('/') {
                    None => (s.as_str(), "1"),
                    Some((n, d)) => (n, d),
                };
                let n: BigInt = numer
                    .trim()
                    .parse()
                    .map_err(|_| serde::de::Error::custom(format!("bad rational {s:?}")))?;
                let d: BigInt = denom
                    .trim()
                    .parse()
                    .map_err(|_| serde::de::Error::custom(format!("bad rational {s:?}")))?;
                if d.is_zero() {
                    return Err(serde::de::Error::custom(format!(
                        "zero denominator in {s:?}"
                    )));
                }
                Ok(JsonRat(Rat::new(n, d)))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexDoc {
    pub id: usize,
    pub pos: Vec<JsonRat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EdgeDoc {
    Bounded {
        id: usize,
        endpoints: [usize; 2],
        weight: u64,
    },
    Leaf {
        id: usize,
        vertex: usize,
        weight: u64,
        direction: IntVec,
    },
}

impl EdgeDoc {
    fn id(&self) -> usize {
        match self {
            EdgeDoc::Bounded { id, .. } | EdgeDoc::Leaf { id, .. } => *id,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub n: usize,
    pub d: usize,
    pub free_dirs: Vec<IntVec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorDoc {
    pub edge: usize,
    pub base: Vec<JsonRat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoleDoc {
    pub edge: usize,
    pub role: EdgeRole,
}

/// Curve document, format version 1. Scenario, anchors and roles are
/// optional; roles are derivable from the scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveDocument {
    pub format_version: String,
    pub ambient_dim: usize,
    pub vertices: Vec<VertexDoc>,
    pub edges: Vec<EdgeDoc>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scenario: Option<ScenarioDoc>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub anchors: Option<Vec<AnchorDoc>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub roles: Option<Vec<RoleDoc>>,
}

/// A parsed curve with whatever scenario data the document carried.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedCurve {
    pub curve: TropicalCurve,
    pub scenario: Option<Scenario>,
    pub anchor_bases: BTreeMap<EdgeId, Vec<Rat>>,
    pub roles: Option<Vec<RoleDoc>>,
}

impl ParsedCurve {
    /// Labels the curve with its scenario; errors without one. Stored roles,
    /// if any, must agree with the classification; anchors are installed on
    /// their non-free leaves.
    pub fn to_labeled(&self) -> Result<LabeledCurve, IoError> {
        let scenario = self.scenario.clone().ok_or(IoError::MissingScenario)?;
        let mut lc = classify_edges(self.curve.clone(), scenario)
            .map_err(|e| invariant("scenario", e))?;
        if let Some(roles) = &self.roles {
            for r in roles {
                let got = lc.role(EdgeId(r.edge));
                if got != r.role {
                    return Err(invariant(
                        format!("roles[{}]", r.edge),
                        format!("stored role {:?} but classification gives {got:?}", r.role),
                    ));
                }
            }
        }
        if !self.anchor_bases.is_empty() {
            let mut anchors = BTreeMap::new();
            for (&e, base) in &self.anchor_bases {
                if lc.role(e) != EdgeRole::NonFreeDivisor {
                    return Err(invariant(
                        format!("anchors[{}]", e.0),
                        "anchors may only sit on non-free leaves",
                    ));
                }
                let direction = lc.curve().leaf_direction(e).expect("leaf").clone();
                anchors.insert(
                    e,
                    AnchorLine {
                        base: base.clone(),
                        direction,
                    },
                );
            }
            lc = lc.with_anchors(anchors);
        }
        Ok(lc)
    }
}

/// Parses and validates a curve document.
pub fn parse_curve(text: &str) -> Result<ParsedCurve, IoError> {
    let doc: CurveDocument = serde_json::from_str(text).map_err(|e| IoError::Parse {
        line: e.line(),
        column: e.column(),
        reason: e.to_string(),
    })?;
    document_to_curve(&doc)
}

/// Converts a document to a validated curve.
pub fn document_to_curve(doc: &CurveDocument) -> Result<ParsedCurve, IoError> {
    if doc.format_version != "1" {
        return Err(invariant(
            "format_version",
            format!("unsupported version {:?}", doc.format_version),
        ));
    }
    let m = doc.ambient_dim;
    for (i, v) in doc.vertices.iter().enumerate() {
        if v.id != i {
            return Err(invariant(
                format!("vertices[{i}].id"),
                "vertex ids must be dense and ascending",
            ));
        }
        if v.pos.len() != m {
            return Err(invariant(
                format!("vertices[{i}].pos"),
                format!("expected {m} coordinates, got {}", v.pos.len()),
            ));
        }
    }
    let mut b = Graph::builder();
    for _ in &doc.vertices {
        b.add_vertex();
    }
    let mut leaf_dirs = BTreeMap::new();
    for (i, e) in doc.edges.iter().enumerate() {
        if e.id() != i {
            return Err(invariant(
                format!("edges[{i}].id"),
                "edge ids must be dense and ascending",
            ));
        }
        match e {
            EdgeDoc::Bounded {
                endpoints, weight, ..
            } => {
                let [x, y] = endpoints;
                if *x >= doc.vertices.len() || *y >= doc.vertices.len() {
                    return Err(invariant(
                        format!("edges[{i}].endpoints"),
                        "endpoint is not a vertex id",
                    ));
                }
                b.add_edge(VertexId(*x), VertexId(*y), *weight);
            }
            EdgeDoc::Leaf {
                vertex,
                weight,
                direction,
                ..
            } => {
                if *vertex >= doc.vertices.len() {
                    return Err(invariant(
                        format!("edges[{i}].vertex"),
                        "vertex is not a vertex id",
                    ));
                }
                if direction.dim() != m {
                    return Err(invariant(
                        format!("edges[{i}].direction"),
                        format!("expected {m} coordinates, got {}", direction.dim()),
                    ));
                }
                if direction.is_zero() {
                    return Err(invariant(format!("edges[{i}].direction"), "zero direction"));
                }
                let (_, g) = crate::rational::primitive(direction).expect("nonzero");
                if !g.is_one() {
                    return Err(invariant(
                        format!("edges[{i}].direction"),
                        "direction is not primitive",
                    ));
                }
                let id = b.add_leaf(VertexId(*vertex), *weight);
                leaf_dirs.insert(id, direction.clone());
            }
        }
    }
    let graph = b.build().map_err(|e| invariant("edges", e))?;
    let positions: Vec<Vec<Rat>> = doc
        .vertices
        .iter()
        .map(|v| v.pos.iter().map(|r| r.0.clone()).collect())
        .collect();
    let curve = TropicalCurve::new(graph, m, positions, leaf_dirs)
        .map_err(|e| invariant("edges", e))?;
    let scenario = match &doc.scenario {
        None => None,
        Some(s) => Some(
            make_scenario(s.n, s.d, Some(s.free_dirs.clone()))
                .map_err(|e| invariant("scenario", e))?,
        ),
    };
    let mut anchor_bases = BTreeMap::new();
    if let Some(anchors) = &doc.anchors {
        for (i, a) in anchors.iter().enumerate() {
            if a.edge >= doc.edges.len() {
                return Err(invariant(
                    format!("anchors[{i}].edge"),
                    "anchor edge is not an edge id",
                ));
            }
            if a.base.len() != m {
                return Err(invariant(
                    format!("anchors[{i}].base"),
                    format!("expected {m} coordinates, got {}", a.base.len()),
                ));
            }
            if !curve.graph().edge(EdgeId(a.edge)).is_leaf() {
                return Err(invariant(
                    format!("anchors[{i}].edge"),
                    "anchors must sit on leaf edges",
                ));
            }
            anchor_bases.insert(EdgeId(a.edge), a.base.iter().map(|r| r.0.clone()).collect());
        }
    }
    Ok(ParsedCurve {
        curve,
        scenario,
        anchor_bases,
        roles: doc.roles.clone(),
    })
}

/// Serializes a labeled curve as a document, scenario, roles and anchors
/// included.
pub fn curve_to_document(lc: &LabeledCurve) -> CurveDocument {
    let c = lc.curve();
    let g = c.graph();
    let vertices = g
        .vertices()
        .map(|v| VertexDoc {
            id: v.0,
            pos: c.position(v).iter().map(|r| JsonRat(r.clone())).collect(),
        })
        .collect();
    let edges = g
        .edges()
        .iter()
        .map(|e| match e.ends {
            EdgeEnds::Bounded(a, b) => EdgeDoc::Bounded {
                id: e.id.0,
                endpoints: [a.0, b.0],
                weight: e.weight,
            },
            EdgeEnds::Leaf(v) => EdgeDoc::Leaf {
                id: e.id.0,
                vertex: v.0,
                weight: e.weight,
                direction: c.leaf_direction(e.id).expect("leaf").clone(),
            },
        })
        .collect();
    let scenario = Some(ScenarioDoc {
        n: lc.scenario().n(),
        d: lc.scenario().d(),
        free_dirs: lc.scenario().free_dirs().iter().cloned().collect(),
    });
    let anchors = if lc.anchors().is_empty() {
        None
    } else {
        Some(
            lc.anchors()
                .iter()
                .map(|(e, a)| AnchorDoc {
                    edge: e.0,
                    base: a.base.iter().map(|r| JsonRat(r.clone())).collect(),
                })
                .collect(),
        )
    };
    let roles = Some(
        g.edges()
            .iter()
            .map(|e| RoleDoc {
                edge: e.id.0,
                role: lc.role(e.id),
            })
            .collect(),
    );
    CurveDocument {
        format_version: "1".into(),
        ambient_dim: c.ambient_dim(),
        vertices,
        edges,
        scenario,
        anchors,
        roles,
    }
}

pub fn serialize_curve(lc: &LabeledCurve) -> String {
    let doc = curve_to_document(lc);
    let mut s = serde_json::to_string_pretty(&doc).expect("documents serialize");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// Report documents

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DegreeEntryDoc {
    pub direction: IntVec,
    pub multiplicity: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveInfoDoc {
    pub ambient_dim: usize,
    pub vertices: usize,
    pub bounded_edges: usize,
    pub unbounded_edges: usize,
    pub genus: usize,
    pub trivalent: bool,
    pub immersive: bool,
    pub balanced: bool,
    pub degree: Vec<DegreeEntryDoc>,
    pub degree_total: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub projective_degree: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scenario: Option<ScenarioDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationDoc {
    pub balanced: bool,
    pub immersive: bool,
    pub prelog: Option<bool>,
    pub ok: bool,
    pub residues: Vec<IntVec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MobilityDoc {
    pub vertex: usize,
    pub direction: IntVec,
    pub rank: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeformationDoc {
    pub dimension: usize,
    pub mobility: Vec<MobilityDoc>,
    /// Basis of velocity fields: per field, per vertex, per coordinate.
    pub basis: Vec<Vec<Vec<JsonRat>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateReportDoc {
    pub n: usize,
    pub balanced: bool,
    pub immersive: bool,
    pub realizable: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub obstruction: Option<ObstructionReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub deformation_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mobility: Option<usize>,
    #[serde(flatten)]
    pub verdict: CertVerdict,
    pub transversality_assumed: bool,
    pub curve: CurveDocument,
}

impl From<&CertificateReport> for CertificateReportDoc {
    fn from(r: &CertificateReport) -> Self {
        CertificateReportDoc {
            n: r.n,
            balanced: r.balanced,
            immersive: r.immersive,
            realizable: r.realizable,
            obstruction: r.obstruction.clone(),
            oracle_dim: r.oracle_dim,
            deformation_dim: r.deformation_dim,
            mobility: r.mobility,
            verdict: r.verdict.clone(),
            transversality_assumed: r.transversality_assumed,
            curve: curve_to_document(&r.curve),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepresentativeDoc {
    pub key: String,
    pub curve: CurveDocument,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypeCensusDoc {
    pub n: usize,
    pub delta: u64,
    pub d: usize,
    pub trees_enumerated: usize,
    pub assignments_enumerated: usize,
    pub types_examined: usize,
    pub balanced_immersive: usize,
    pub certificates: usize,
    pub capped: bool,
    pub representatives: Vec<RepresentativeDoc>,
}

impl From<&TypeCensus> for TypeCensusDoc {
    fn from(c: &TypeCensus) -> Self {
        TypeCensusDoc {
            n: c.n,
            delta: c.delta,
            d: c.d,
            trees_enumerated: c.trees_enumerated,
            assignments_enumerated: c.assignments_enumerated,
            types_examined: c.types_examined,
            balanced_immersive: c.balanced_immersive,
            certificates: c.certificates,
            capped: c.capped,
            representatives: c
                .representatives
                .iter()
                .map(|(key, lc)| RepresentativeDoc {
                    key: key.clone(),
                    curve: curve_to_document(lc),
                })
                .collect(),
        }
    }
}

/// Machine-readable union of every report the tool emits.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportDocument {
    DimensionReport(DimensionReport),
    ObstructionReport(ObstructionReport),
    CertificateReport(CertificateReportDoc),
    TypeCensus(TypeCensusDoc),
    CurveInfo(CurveInfoDoc),
    ValidationReport(ValidationDoc),
    DeformationReport(DeformationDoc),
}

impl ReportDocument {
    /// Internal consistency check run before emission.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            ReportDocument::DimensionReport(r) => {
                if r.expected != r.moduli - r.incidence {
                    return Err("expected ≠ moduli − incidence".into());
                }
                if r.sweeps != (r.expected >= r.threshold) {
                    return Err("sweeps flag contradicts the arithmetic".into());
                }
            }
            ReportDocument::CertificateReport(r) => {
                let all_good = r.balanced
                    && r.immersive
                    && r.realizable
                    && r.oracle_dim == Some(0)
                    && r.obstruction.as_ref().map(|o| o.verdict)
                        == Some(crate::obstruction::Verdict::Vanishes)
                    && r.mobility == Some(r.n - 2);
                let is_cert = matches!(r.verdict, CertVerdict::Certificate);
                if all_good != is_cert {
                    return Err("certificate verdict contradicts its flags".into());
                }
            }
            ReportDocument::TypeCensus(c) => {
                if c.certificates != c.representatives.len() {
                    return Err("certificate count ≠ representatives".into());
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

// ---------------------------------------------------------------------------
// DOT export

/// Fixed-precision decimal rendering of a rational, exact integer
/// arithmetic, round half away from zero.
fn rat_decimal(r: &Rat, places: u32) -> String {
    let scale = BigInt::from(10u32).pow(places);
    let num = r.numer() * &scale * 2 + r.denom() * BigInt::from(if r.numer().is_negative() { -1 } else { 1 });
    let q = num / (r.denom() * 2);
    let neg = q.is_negative();
    let digits = q.abs().to_string();
    let digits = if digits.len() <= places as usize {
        format!("{}{}", "0".repeat(places as usize + 1 - digits.len()), digits)
    } else {
        digits
    };
    let split = digits.len() - places as usize;
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push_str(&digits[..split]);
    out.push('.');
    out.push_str(&digits[split..]);
    out
}

/// DOT rendering of a labeled curve. Vertices are positioned in 2D (labeled
/// with coordinates in higher dimension); node edges are solid, non-free
/// leaves end in an open arrowhead, free leaves in a filled terminal dot.
/// Output is deterministic.
pub fn export_dot(lc: &LabeledCurve) -> String {
    let c = lc.curve();
    let g = c.graph();
    let two_d = c.ambient_dim() == 2;
    let mut out = String::new();
    out.push_str("graph curve {\n");
    out.push_str("  layout=neato;\n");
    out.push_str("  node [shape=circle, fontsize=10, width=0.3];\n");
    for v in g.vertices() {
        let pos = c.position(v);
        if two_d {
            let _ = writeln!(
                out,
                "  v{} [label=\"V{}\", pos=\"{},{}!\"];",
                v.0,
                v.0,
                rat_decimal(&pos[0], 4),
                rat_decimal(&pos[1], 4)
            );
        } else {
            let coords: Vec<String> = pos.iter().map(|x| format!("{x}")).collect();
            let _ = writeln!(
                out,
                "  v{} [label=\"V{} ({})\"];",
                v.0,
                v.0,
                coords.join(",")
            );
        }
    }
    for e in g.leaf_edges() {
        let EdgeEnds::Leaf(v) = e.ends else { unreachable!() };
        let role = lc.role(e.id);
        let style = match role {
            EdgeRole::FreeDivisor => "shape=point, width=0.12",
            _ => "shape=none, label=\"\", width=0",
        };
        if two_d {
            let pos = c.position(v);
            let dir = c.leaf_direction(e.id).expect("leaf");
            let tip: Vec<Rat> = pos
                .iter()
                .zip(dir.entries())
                .map(|(p, d)| p + Rat::from_integer(d.clone()))
                .collect();
            let _ = writeln!(
                out,
                "  t{} [{}, pos=\"{},{}!\"];",
                e.id.0,
                style,
                rat_decimal(&tip[0], 4),
                rat_decimal(&tip[1], 4)
            );
        } else {
            let _ = writeln!(out, "  t{} [{}];", e.id.0, style);
        }
    }
    for e in g.edges() {
        match e.ends {
            EdgeEnds::Bounded(a, b) => {
                let _ = writeln!(out, "  v{} -- v{} [label=\"{}\"];", a.0, b.0, e.id);
            }
            EdgeEnds::Leaf(v) => {
                let attrs = match lc.role(e.id) {
                    EdgeRole::NonFreeDivisor => " [dir=forward, arrowhead=open]",
                    _ => "",
                };
                let _ = writeln!(out, "  v{} -- t{}{};", v.0, e.id.0, attrs);
            }
        }
    }
    out.push_str("}\n");
    out
}
