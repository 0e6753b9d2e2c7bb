use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use super::LazyDfa;
use crate::events::{Action, Event, Signature, VarId};

pub const DEFAULT_STATE_BUDGET: usize = 1_000_000;

/// State budget for exploration, overridable with `TBSYNTH_STATE_BUDGET`.
pub fn state_budget() -> usize {
    std::env::var("TBSYNTH_STATE_BUDGET").ok().and_then(|s| s.parse().ok()).unwrap_or(DEFAULT_STATE_BUDGET)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExploreError {
    #[error("state budget of {limit} exceeded after {count} states")]
    Budget { limit: usize, count: usize },
}

#[derive(Debug, Clone)]
pub struct ExploredDfa<S> {
    pub states: Vec<S>,
    pub edges: Vec<(usize, Event, usize)>,
    pub initial: usize,
    pub finals: BTreeSet<usize>,
}

impl<S> ExploredDfa<S> {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn stats(&self) -> String {
        format!("states={} edges={} finals={}", self.states.len(), self.edges.len(), self.finals.len())
    }

    pub fn to_dot(&self, sig: &Signature, label: impl Fn(&S) -> String, dead: impl Fn(&S) -> bool) -> String {
        let mut out = String::from("digraph dfa {\n  rankdir=LR;\n");
        for (i, s) in self.states.iter().enumerate() {
            let shape = if self.finals.contains(&i) { "doublecircle" } else { "circle" };
            let fill = if dead(s) { ", style=filled, fillcolor=gray" } else { "" };
            let text = label(s).replace('"', "\\\"");
            let _ = writeln!(out, "  q{i} [shape={shape}, label=\"{i}: {text}\"{fill}];");
        }
        let _ = writeln!(out, "  start [shape=point];\n  start -> q{};", self.initial);
        for (from, e, to) in &self.edges {
            let text = sig.show_event(e).replace('"', "\\\"");
            let _ = writeln!(out, "  q{from} -> q{to} [label=\"{text}\"];");
        }
        out.push_str("}\n");
        out
    }
}

/// Breadth-first closure from the initial state, with the symbols returned
/// by `symbols` for each state.
pub fn explore<A, F>(dfa: &A, mut symbols: F, budget: usize) -> Result<ExploredDfa<A::State>, ExploreError>
where
    A: LazyDfa,
    F: FnMut(&A::State) -> Vec<Event>,
{
    let mut index: HashMap<A::State, usize> = HashMap::new();
    let mut states = Vec::new();
    let mut edges = Vec::new();
    let mut queue = VecDeque::new();
    let init = dfa.initial();
    index.insert(init.clone(), 0);
    states.push(init);
    queue.push_back(0);
    while let Some(i) = queue.pop_front() {
        let s = states[i].clone();
        for e in symbols(&s) {
            let t = dfa.successor(&s, &e);
            let j = match index.get(&t) {
                Some(&j) => j,
                None => {
                    if states.len() >= budget {
                        return Err(ExploreError::Budget { limit: budget, count: states.len() });
                    }
                    let j = states.len();
                    index.insert(t.clone(), j);
                    states.push(t);
                    queue.push_back(j);
                    j
                }
            };
            edges.push((i, e, j));
        }
    }
    let finals = states.iter().enumerate().filter(|(_, s)| dfa.is_final(s)).map(|(i, _)| i).collect();
    Ok(ExploredDfa { states, edges, initial: 0, finals })
}

/// Every well-typed event over `vars` with delay in `1..=max_delta`.
/// Number of events `full_alphabet` would return, saturating.
pub fn full_alphabet_len(sig: &Signature, vars: &[VarId], max_delta: u64) -> usize {
    vars.iter()
        .map(|&x| {
            let k = sig.var(x).value_ids().count();
            1 + 2 * k + k * k
        })
        .fold(max_delta as usize, usize::saturating_mul)
}

pub fn full_alphabet(sig: &Signature, vars: &[VarId], max_delta: u64) -> Vec<Event> {
    let mut action_sets: Vec<Vec<Action>> = vec![Vec::new()];
    for &x in vars {
        let values: Vec<_> = sig.var(x).value_ids().collect();
        let mut options: Vec<Vec<Action>> = vec![Vec::new()];
        for &v in &values {
            options.push(vec![Action::start(x, v)]);
            options.push(vec![Action::end(x, v)]);
            for &w in &values {
                options.push(vec![Action::end(x, v), Action::start(x, w)]);
            }
        }
        action_sets = action_sets
            .iter()
            .flat_map(|base| options.iter().map(move |o| base.iter().chain(o).copied().collect()))
            .collect();
    }
    let mut out = Vec::new();
    for set in action_sets {
        for d in 1..=max_delta {
            out.push(Event::new(set.iter().copied(), d));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{intersect, SyncAutomaton, TvAutomaton};
    use crate::matching::CompiledProblem;
    use crate::model::{PlanningProblem, StateVariable};
    use std::sync::Arc;

    fn one_value_problem() -> (Signature, SyncAutomaton, TvAutomaton) {
        let p = PlanningProblem::new(vec![StateVariable::new("x", &["v"])], vec![]);
        let c = Arc::new(CompiledProblem::new(&p).unwrap());
        let sig = c.sig.clone();
        (sig.clone(), SyncAutomaton::new(c), TvAutomaton::all(sig))
    }

    #[test]
    fn alphabet_size() {
        let (sig, _, _) = one_value_problem();
        let x: Vec<_> = sig.var_ids().collect();
        // nothing, start, end, end+start
        assert_eq!(full_alphabet(&sig, &x, 1).len(), 4);
        assert_eq!(full_alphabet(&sig, &x, 2).len(), 8);
        assert!(full_alphabet(&sig, &x, 2).iter().all(Event::is_well_typed));
        assert_eq!(full_alphabet_len(&sig, &x, 2), 8);
    }

    #[test]
    fn empty_symbol_set_gives_one_state() {
        let (_, sync, _) = one_value_problem();
        let d = explore(&sync, |_| Vec::new(), 10).unwrap();
        assert_eq!(d.state_count(), 1);
        assert!(d.edges.is_empty());
        assert_eq!(d.finals.len(), 1);
    }

    #[test]
    fn trivial_problem_state_count_and_determinism() {
        let (sig, sync, tv) = one_value_problem();
        let a = intersect(&sync, &tv);
        let x: Vec<_> = sig.var_ids().collect();
        let alpha = full_alphabet(&sig, &x, 1);
        let d = explore(&a, |_| alpha.clone(), 100).unwrap();
        // initial, idle after an empty first event, open, ended, sink
        assert_eq!(d.state_count(), 5);
        for (i, _) in d.states.iter().enumerate() {
            let out: Vec<_> = d.edges.iter().filter(|(f, _, _)| *f == i).map(|(_, e, _)| e.clone()).collect();
            let unique: BTreeSet<_> = out.iter().cloned().collect();
            assert_eq!(out.len(), unique.len());
            assert_eq!(out.len(), alpha.len());
        }
        for (f, e, t) in &d.edges {
            assert_eq!(a.successor(&d.states[*f], e), d.states[*t]);
        }
        assert!(d.to_dot(&sig, |s| a.summary(s), |s| a.is_dead(s)).starts_with("digraph"));
    }

    #[test]
    fn budget_is_enforced() {
        let (sig, sync, tv) = one_value_problem();
        let a = intersect(&sync, &tv);
        let x: Vec<_> = sig.var_ids().collect();
        let alpha = full_alphabet(&sig, &x, 1);
        assert_eq!(explore(&a, |_| alpha.clone(), 2).unwrap_err(), ExploreError::Budget { limit: 2, count: 2 });
    }
}
