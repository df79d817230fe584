//! Documentation-driven, test-guided API migration for straight-line
//! programs.

pub mod bench;
pub mod cli;
pub mod constraints;
pub mod corpus;
pub mod errmsg;
pub mod literal;
pub mod matching;
pub mod orchestrator;
pub mod program;
pub mod report;
pub mod runtime;
pub mod sketch;
