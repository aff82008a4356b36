//! Exact combinatorial machinery for rational curves in toric degenerations.
//!
//! Everything here is computed over the rationals: balancing conditions,
//! ranks, deformation dimensions and obstruction spaces are discrete
//! quantities and must not depend on floating-point tolerances. The crate is
//! organized bottom-up:
//!
//! - [`rational`] — arbitrary-precision rationals, integer vectors, exact
//!   linear solving, rank, and strict-positivity search.
//! - [`graph`] — weighted finite graphs with unbounded (leaf) edges, flags,
//!   genus and valence.
//! - [`curve`] — parametrized tropical curves in ℚ^m and their combinatorial
//!   types: balancing, degree maps, immersiveness, direction inference,
//!   realization.
//! - [`degeneration`] — the combinatorial shadow of a degenerating
//!   hypersurface: free vs. non-free toric divisors, edge roles, incidence
//!   anchors.
//! - [`obstruction`] — per-component normal-sheaf degrees, dual obstruction
//!   spaces, zero propagation, and an independent glued-section oracle.
//! - [`moduli`] — dimension arithmetic (moduli / incidence / expected /
//!   sweep threshold) and exact deformation spaces with vertex mobility.
//! - [`certify`] — construction, search and end-to-end verification of
//!   sweeping certificates, plus a small-scale exhaustive census.
//! - [`io`] — JSON curve documents, report documents, and DOT export.

pub mod certify;
pub mod curve;
pub mod degeneration;
pub mod graph;
pub mod io;
pub mod moduli;
pub mod obstruction;
pub mod rational;

pub use certify::{CertVerdict, CertificateReport, TypeCensus};
pub use curve::{CombinatorialType, DegreeMap, TropicalCurve};
pub use degeneration::{AnchorLine, AnchorMode, EdgeRole, LabeledCurve, Scenario};
pub use graph::{EdgeId, Flag, Graph, VertexId};
pub use moduli::{DeformationSpace, DimensionReport};
pub use obstruction::{DegreeVector, ObstructionReport, Verdict, VertexProfile};
pub use rational::{IntVec, Rat};
