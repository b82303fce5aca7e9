//! Type checker for a small homotopy type theory with the circle and the
//! torus as higher inductive types.

// Diagnostics carry printed terms and are returned by value throughout.
#![allow(clippy::result_large_err)]

pub mod context;
pub mod diagnostic;
pub mod eval;
pub mod print;
pub mod surface;
pub mod term;
pub mod unify;
pub mod value;
pub mod kernel;
pub mod prims;
pub mod driver;
pub mod corpus;
