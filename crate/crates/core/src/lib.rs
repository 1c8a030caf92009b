//! Diagnosis of clustered element failures on an intelligent reflecting
//! surface from received-signal measurements.
//!
//! Defective elements are stuck at unknown phases and occupy a rectangle of
//! the element grid. The library estimates the rectangle boundaries either
//! with sorted posterior matching ([`sortpm`]) or three-phase bisection
//! ([`bisect`]), on top of a two-slot channel initialization ([`airlink`])
//! and likelihood-ratio region tests ([`detect`]).

pub mod airlink;
pub mod bisect;
pub mod channel;
pub mod detect;
pub mod error;
pub mod harness;
pub mod model;
pub mod sortpm;

pub use error::{Error, Result};
pub use model::{Axis, Boundary, DefectRect, FailureScene, GridDims, PhaseAssignment};
