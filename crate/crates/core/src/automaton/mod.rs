//! Deterministic automata over event sequences.
//!
//! Every automaton is lazy: states are values and the successor function is
//! computed on demand. [`explore`] materializes the reachable part.

mod combinators;
mod explore;
mod sync;
mod tv;

use std::fmt::Debug;
use std::hash::Hash;
use std::sync::Arc;

use crate::events::{Event, EventSequence};
use crate::matching::{CompileError, CompiledProblem};
use crate::model::{desugar_durations, PlanningProblem};

pub use combinators::{complement, intersect, union, Complement, NonEmpty, Product, ProductMode, Viable};
pub use explore::{explore, full_alphabet, full_alphabet_len, state_budget, ExploreError, ExploredDfa, DEFAULT_STATE_BUDGET};
pub use sync::{DeltaMode, SyncAutomaton, SyncData, SyncState};
pub use tv::{TvAutomaton, TvState};

/// A deterministic automaton given by its successor function.
///
/// `successor` must be total: failure is encoded by a sink state that is
/// non-final and for which `is_dead` holds.
pub trait LazyDfa {
    type State: Clone + Eq + Hash + Ord + Debug;

    fn initial(&self) -> Self::State;
    fn successor(&self, state: &Self::State, event: &Event) -> Self::State;
    fn is_final(&self, state: &Self::State) -> bool;

    /// No word read from `state` is accepted. May under-approximate.
    fn is_dead(&self, _state: &Self::State) -> bool {
        false
    }

    /// The canonical dead state, if the automaton has one.
    fn sink(&self) -> Option<Self::State> {
        None
    }

    /// One-line label used in DOT output.
    fn summary(&self, state: &Self::State) -> String {
        format!("{state:?}")
    }
}

impl<A: LazyDfa + ?Sized> LazyDfa for &A {
    type State = A::State;

    fn initial(&self) -> Self::State {
        (**self).initial()
    }
    fn successor(&self, state: &Self::State, event: &Event) -> Self::State {
        (**self).successor(state, event)
    }
    fn is_final(&self, state: &Self::State) -> bool {
        (**self).is_final(state)
    }
    fn is_dead(&self, state: &Self::State) -> bool {
        (**self).is_dead(state)
    }
    fn sink(&self) -> Option<Self::State> {
        (**self).sink()
    }
    fn summary(&self, state: &Self::State) -> String {
        (**self).summary(state)
    }
}

/// Runs `dfa` along `seq` from its initial state.
pub fn run<A: LazyDfa>(dfa: &A, seq: &EventSequence) -> A::State {
    seq.events.iter().fold(dfa.initial(), |s, e| dfa.successor(&s, e))
}

pub fn accepts<A: LazyDfa>(dfa: &A, seq: &EventSequence) -> bool {
    dfa.is_final(&run(dfa, seq))
}

/// The planning automaton: rule automaton over the desugared rules
/// intersected with the transition-function automaton over every variable.
pub fn planning_automaton(problem: &PlanningProblem) -> Result<Product<SyncAutomaton, TvAutomaton>, CompileError> {
    let compiled = Arc::new(CompiledProblem::new(&desugar_durations(problem))?);
    let tv = TvAutomaton::all(compiled.sig.clone());
    Ok(intersect(SyncAutomaton::new(compiled), tv))
}
