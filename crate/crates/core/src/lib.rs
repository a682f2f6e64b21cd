//! Agentic proof automation for tactic-based interactive theorem provers.

pub mod prover;
pub mod sanitize;
pub mod source;
pub mod tokens;
pub mod transcript;
pub mod tree;
pub mod context;
pub mod feedback;
pub mod history;
pub mod gateway;
pub mod agent;
pub mod corpus;
pub mod cli;
