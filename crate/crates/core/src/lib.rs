//! Executable field calculus: a parser for a small aggregate-programming
//! language, a per-device round engine, a deterministic network simulator,
//! a library of self-stabilising building blocks, and tools that check
//! resilience properties on simulated traces.

pub mod analysis;
pub mod blocks;
pub mod builtins;
pub mod engine;
pub mod lang;
pub mod sim;
