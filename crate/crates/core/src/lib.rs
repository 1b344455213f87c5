//! Checker, reference interpreter, symbolic test generator and differential
//! checker for a small 3D-style binary format description language.

pub mod ast;
pub mod corpus;
pub mod diffcheck;
pub mod eval;
pub mod frontend;
pub mod interp;
pub mod refine;
pub mod samples;
pub mod smt;
pub mod solver;
pub mod specialize;
pub mod testgen;
