//! Gauss-diagram knot model with triple-point homotopy traces.
//!
//! A knot diagram is stored as a signed, directed Gauss diagram: a circle of
//! crossing passages with one arrow per crossing, directed over→under and
//! signed by the crossing writhe. On top of that the crate provides
//!
//! * the degree-2 Vassiliev invariant `v2`, both as a frozen two-arrow
//!   Gauss-sum and as an independent skein-descent oracle,
//! * elementary move schemas (R1, R2, R3 and coherent triple passages),
//!   triple-site detection, zone decomposition and the per-site writhe,
//! * traces: replayable move sequences with an index and a W-invariant,
//!   plus rewrites (star→braid conversion, disjoint commutation, reversal,
//!   composition, connected sum),
//! * bounded breadth-first search over the move graph,
//! * a deterministic corpus generator used by the test suites.
//!
//! All values are immutable after construction and every operation is a pure
//! function, so diagrams and traces can be shared freely across threads.

pub mod corpus;
pub mod diagram;
pub mod faces;
pub mod homotopy;
pub mod invariants;
pub mod moves;
pub mod render;
pub mod search;

pub use diagram::{
    Arrow, ArrowId, BasePoint, CanonOptions, CanonicalForm, DiagramError, End, Endpoint,
    GaussDiagram, ParseError, Pos, Sign,
};
pub use invariants::{InvariantError, PairConfiguration, FROZEN_V2_CONFIG};
