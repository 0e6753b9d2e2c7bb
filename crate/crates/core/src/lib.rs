//! Synthesis of controllers for timeline-based games.
//!
//! Specifications made of state variables and synchronization rules are
//! compiled into deterministic automata over event sequences. The automata
//! are turned into a turn-based arena, the reachability game on it is solved,
//! and a winning strategy is emitted as a Moore machine. A brute-force oracle
//! provides the reference semantics used by the test suites.

pub mod arena;
pub mod automaton;
pub mod controller;
pub mod dbm;
pub mod events;
pub mod format;
pub mod matching;
pub mod model;
pub mod oracle;
pub mod solver;
