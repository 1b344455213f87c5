//! SMT-LIB2 encoding of first-order programs.
//!
//! A program becomes a function from `State` to `State` over an unbounded
//! input modeled as `Input : Int -> Int`. Queries combine the prelude, one
//! or two encoded programs, constraints on the initial state and a goal.

mod encode;
mod model;
mod prelude;
mod query;

pub use encode::{encode_program, function_name};
pub use model::{paren_depth, parse_model, parse_value, ModelError};
pub use prelude::{emit_prelude, reader_name};
pub use query::{
    build_query, build_query_with, packet_equals, Dialect, EvalPlan, QueryKind, QuerySpec,
    SmtScript, DEFAULT_MAX_PACKET,
};

#[cfg(test)]
mod tests;
