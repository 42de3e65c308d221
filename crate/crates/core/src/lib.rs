//! Sharp lower and upper bounds on `E[g(X)]` for a random vector supported in
//! a set `S` under expectation constraints `E[f_i(X)] = φ_i`.

pub mod cli;
pub mod closed_form;
pub mod config;
pub mod dual;
pub mod expr;
pub mod extended;
pub mod inner;
pub mod oracle;
pub mod problem;
pub mod recovery;
pub mod report;
pub mod simplex;
