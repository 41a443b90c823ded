//! Autoformalization pipeline: LaTeX statements to a strictly building Lean 4
//! library through an LLM compile-fix loop, and back to a LaTeX blueprint.

pub mod canonical;
pub mod clock;
pub mod gateway;
pub mod extract;
pub mod graph;
pub mod lean;
pub mod prompts;
pub mod statement;
pub mod engine;
pub mod informal;
pub mod report;
pub mod config;
pub mod cli;
