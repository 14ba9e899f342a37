//! Building-block library.
//!
//! The blocks are ordinary field-calculus definitions kept in `stdlib.fc` and
//! compiled into every program that asks for them. Host code composes them by
//! writing a main expression; the helpers here build such expressions.

use std::sync::{Arc, OnceLock};

use indexmap::IndexMap;

use crate::lang::{parse, parse_with_prelude, pretty, ParseError, Program};

/// Source text of the standard library.
pub const STDLIB_SOURCE: &str = include_str!("../stdlib.fc");

/// Public blocks, in the order they are documented.
pub const BLOCKS: &[&str] = &["G", "C", "T", "distance", "hopCountDistance", "gossipMin", "broadcast", "summarize", "replicatedGossip"];

/// Parsed standard library.
pub fn stdlib() -> &'static Program {
    static LIB: OnceLock<Program> = OnceLock::new();
    LIB.get_or_init(|| parse(STDLIB_SOURCE).expect("embedded standard library parses"))
}

/// Parses `main` with every library definition in scope.
pub fn compile(main: &str) -> Result<Program, ParseError> {
    parse_with_prelude(main, stdlib())
}

/// Named view over the library definitions.
pub struct BlockLibrary {
    program: &'static Program,
}

impl Default for BlockLibrary {
    fn default() -> Self {
        Self { program: stdlib() }
    }
}

impl BlockLibrary {
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.program.defs.keys().map(|n| n.as_ref())
    }

    /// Canonical source of one definition.
    pub fn source(&self, name: &str) -> Option<String> {
        let def = self.program.def(name)?;
        let mut defs = IndexMap::new();
        defs.insert(def.name.clone(), Arc::clone(def));
        Some(pretty(&Program { defs, main: None }))
    }

    pub fn program(&self) -> &'static Program {
        self.program
    }
}

fn call(name: &str, args: &[&str]) -> String {
    format!("{name}({})", args.join(", "))
}

/// `G(source, init, metric, accumulate)`.
pub fn g(source: &str, init: &str, metric: &str, accumulate: &str) -> String {
    call("G", &[source, init, metric, accumulate])
}

/// `C(potential, accumulate, local, null)`.
pub fn c(potential: &str, accumulate: &str, local: &str, null: &str) -> String {
    call("C", &[potential, accumulate, local, null])
}

/// `T(initial, floor, decay)`.
pub fn t(initial: &str, floor: &str, decay: &str) -> String {
    call("T", &[initial, floor, decay])
}

pub fn distance_to(source: &str) -> String {
    call("distanceTo", &[source])
}

pub fn broadcast(source: &str, value: &str) -> String {
    call("broadcast", &[source, value])
}

pub fn summarize(source: &str, local: &str) -> String {
    call("summarize", &[source, local])
}

pub fn replicated_gossip(field: &str, k: usize, lifetime: usize) -> String {
    call("replicatedGossip", &[field, &k.to_string(), &lifetime.to_string()])
}
