//! Matching structures: a statement's DBM together with the set of terms
//! matched so far and the time elapsed since its trigger started.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::dbm::{end_term, init_dbm, start_term, term_labels, Bound, Dbm, DbmError, TermSet};
use crate::events::{Action, Event, Signature, ValueId, VarId};
use crate::model::{self, PlanningProblem, StateVariable, SyncRule, Term};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledStatement {
    pub rule: usize,
    /// Position among the statements of its rule.
    pub local: usize,
    /// Variable and value of every token; token 0 is the trigger.
    pub tokens: Vec<(VarId, ValueId)>,
    pub dbm: Dbm,
    pub labels: Vec<Term>,
}

impl CompiledStatement {
    pub fn dim(&self) -> usize {
        2 * self.tokens.len()
    }

    pub fn all_terms(&self) -> TermSet {
        TermSet::full(self.dim())
    }

    pub fn start_action(&self, token: usize) -> Action {
        let (x, v) = self.tokens[token];
        Action::start(x, v)
    }

    pub fn end_action(&self, token: usize) -> Action {
        let (x, v) = self.tokens[token];
        Action::end(x, v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledRule {
    pub trigger: (VarId, ValueId),
    pub statements: Vec<usize>,
}

impl CompiledRule {
    pub fn triggered_by(&self, e: &Event) -> bool {
        e.contains(&Action::start(self.trigger.0, self.trigger.1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("invalid specification: {0}")]
    Invalid(String),
    #[error(transparent)]
    Dbm(#[from] DbmError),
}

/// Index-based form of a set of rules over a set of variables, shared by
/// every matching structure of one automaton.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledProblem {
    pub sig: Signature,
    pub rules: Vec<CompiledRule>,
    pub statements: Vec<CompiledStatement>,
    pub window: u64,
    pub horizon: u64,
    /// Finite DBM entries above this value are clamped after every match.
    pub entry_cap: i64,
    /// Clocks saturate here.
    pub clock_cap: u64,
}

impl CompiledProblem {
    /// Compiles the rules as given; durations must already be desugared for
    /// the automaton to check them.
    pub fn new(problem: &PlanningProblem) -> Result<Self, CompileError> {
        Self::from_parts(&problem.variables, &problem.rules)
    }

    pub fn from_parts(variables: &[StateVariable], rules: &[SyncRule]) -> Result<Self, CompileError> {
        let report = model::validate_problem(&PlanningProblem::new(variables.to_vec(), rules.to_vec()));
        if let Some(d) = report.diagnostics.first() {
            return Err(CompileError::Invalid(d.to_string()));
        }
        let sig = Signature::new(variables);
        let lookup = |var: &str, value: &str| -> (VarId, ValueId) {
            let x = sig.var_id(var).expect("validated variable");
            (x, sig.value_id(x, value).expect("validated value"))
        };
        let mut compiled_rules = Vec::new();
        let mut statements = Vec::new();
        for (r, rule) in rules.iter().enumerate() {
            let trigger = rule.trigger.as_ref().expect("validated trigger");
            let mut ids = Vec::new();
            for (local, st) in rule.statements.iter().enumerate() {
                let tokens = std::iter::once(trigger)
                    .chain(&st.quantifiers)
                    .map(|q| lookup(&q.variable, &q.value))
                    .collect();
                ids.push(statements.len());
                statements.push(CompiledStatement {
                    rule: r,
                    local,
                    tokens,
                    dbm: init_dbm(st, trigger, variables)?,
                    labels: term_labels(st, trigger),
                });
            }
            compiled_rules.push(CompiledRule { trigger: lookup(&trigger.variable, &trigger.value), statements: ids });
        }
        let window = model::window_of(rules);
        let horizon = model::horizon_of(rules);
        let entry_cap = statements.iter().map(|s| s.dbm.max_abs()).max().unwrap_or(0);
        Ok(CompiledProblem {
            sig,
            rules: compiled_rules,
            statements,
            window,
            horizon,
            entry_cap,
            clock_cap: window + horizon,
        })
    }

    pub fn statement(&self, ms: &MatchingStructure) -> &CompiledStatement {
        &self.statements[ms.stmt as usize]
    }

    pub fn initial_structures(&self) -> Vec<MatchingStructure> {
        (0..self.statements.len()).map(|i| MatchingStructure::initial(self, i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatchingStructure {
    pub stmt: u32,
    pub matched: TermSet,
    pub dbm: Dbm,
    pub clock: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Initial,
    Active,
    Closed,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("term set is not an I-match for this event")]
    NotAMatch,
    #[error(transparent)]
    Dbm(#[from] DbmError),
}

impl MatchingStructure {
    pub fn initial(problem: &CompiledProblem, stmt: usize) -> Self {
        MatchingStructure { stmt: stmt as u32, matched: TermSet::EMPTY, dbm: problem.statements[stmt].dbm.clone(), clock: 0 }
    }

    fn all(&self) -> TermSet {
        TermSet::full(self.dbm.dim())
    }

    pub fn is_closed(&self) -> bool {
        self.matched == self.all()
    }

    pub fn is_initial(&self) -> bool {
        self.matched.is_empty()
    }

    pub fn is_active(&self) -> bool {
        self.matched.contains(start_term(0)) && !self.is_closed()
    }

    pub fn status(&self) -> Status {
        if self.is_closed() {
            Status::Closed
        } else if self.is_initial() {
            Status::Initial
        } else if self.is_active() {
            Status::Active
        } else {
            Status::Other
        }
    }

    fn unmatched(&self) -> TermSet {
        TermSet(!self.matched.0 & self.all().0)
    }

    /// Active, and no finite bound from an unmatched term to a matched one.
    pub fn is_residual(&self) -> bool {
        self.is_active()
            && self
                .matched
                .iter()
                .all(|t| self.unmatched().iter().all(|u| self.dbm.get(u, t).is_inf()))
    }

    /// The elapsed time `δ` respects every bound from an unmatched term to a
    /// matched one.
    pub fn admissible(&self, event: &Event) -> bool {
        let delta = event.delta as i64;
        self.matched
            .iter()
            .all(|t| self.unmatched().iter().all(|u| self.dbm.get(u, t).at_least(delta)))
    }

    /// End terms that must be matched: the token started before and its end
    /// action occurs in the event.
    pub fn forced_ends(&self, st: &CompiledStatement, event: &Event) -> TermSet {
        (0..st.tokens.len())
            .filter(|&k| {
                self.matched.contains(start_term(k))
                    && !self.matched.contains(end_term(k))
                    && event.contains(&st.end_action(k))
            })
            .map(end_term)
            .collect()
    }

    /// Ordering and distance conditions on a candidate set `I`: predecessors
    /// with a non-positive bound are matched already or now, lower bounds
    /// from matched terms have elapsed, and terms matched together allow a
    /// zero distance.
    fn relations_hold(&self, i: TermSet, delta: u64) -> bool {
        let delta = delta as i64;
        let known = self.matched.union(i);
        for t in i.iter() {
            for u in 0..self.dbm.dim() {
                if u == t {
                    continue;
                }
                let d = self.dbm.get(u, t);
                if !d.at_least(1) && !known.contains(u) {
                    return false;
                }
                if self.matched.contains(u) && !d.at_least(-delta) {
                    return false;
                }
                if i.contains(u) && !(d.at_least(0) && self.dbm.get(t, u).at_least(0)) {
                    return false;
                }
            }
        }
        true
    }

    /// Checks every condition of an I-match event directly.
    pub fn is_i_match(&self, st: &CompiledStatement, event: &Event, i: TermSet) -> bool {
        if i.intersects(self.matched) || !self.admissible(event) {
            return false;
        }
        for k in 0..st.tokens.len() {
            if i.contains(start_term(k)) && !event.contains(&st.start_action(k)) {
                return false;
            }
            let must_end = self.matched.contains(start_term(k))
                && !self.matched.contains(end_term(k))
                && event.contains(&st.end_action(k));
            if i.contains(end_term(k)) != must_end {
                return false;
            }
        }
        self.relations_hold(i, event.delta)
    }

    /// All sets `I` for which the event is an I-match event, ascending.
    pub fn i_match_candidates(&self, st: &CompiledStatement, event: &Event) -> Vec<TermSet> {
        if !self.admissible(event) {
            return Vec::new();
        }
        let forced = self.forced_ends(st, event);
        let optional: Vec<usize> = (0..st.tokens.len())
            .filter(|&k| !self.matched.contains(start_term(k)) && event.contains(&st.start_action(k)))
            .map(start_term)
            .collect();
        let mut out = Vec::new();
        for mask in 0u64..(1 << optional.len()) {
            let mut i = forced;
            for (b, &t) in optional.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    i.insert(t);
                }
            }
            if self.relations_hold(i, event.delta) {
                out.push(i);
            }
        }
        out.sort();
        out
    }

    /// Shifts by the event's δ (with the pre-match matched set), then adds
    /// `chosen` to the matched terms.
    pub fn apply(
        &self,
        problem: &CompiledProblem,
        event: &Event,
        chosen: TermSet,
    ) -> Result<MatchingStructure, MatchError> {
        let st = problem.statement(self);
        if !self.is_i_match(st, event, chosen) {
            return Err(MatchError::NotAMatch);
        }
        Ok(self.apply_unchecked(problem, event, chosen)?)
    }

    fn apply_unchecked(
        &self,
        problem: &CompiledProblem,
        event: &Event,
        chosen: TermSet,
    ) -> Result<MatchingStructure, DbmError> {
        let mut dbm = self.dbm.shift(self.matched, event.delta)?;
        dbm.saturate(problem.entry_cap);
        let clock = if self.is_active() {
            (self.clock + event.delta).min(problem.clock_cap)
        } else {
            self.clock
        };
        Ok(MatchingStructure { stmt: self.stmt, matched: self.matched.union(chosen), dbm, clock })
    }

    /// The same structure up to behaviour: bounds between matched terms are
    /// never read again, and a non-negative bound from a matched term to an
    /// unmatched one has already elapsed, so both become +∞.
    pub fn canonical(&self) -> MatchingStructure {
        let mut out = self.clone();
        out.dbm.forget(self.matched);
        for m in self.matched.iter() {
            for u in self.unmatched().iter() {
                if self.dbm.get(m, u).at_least(0) {
                    out.dbm.relax(m, u);
                }
            }
        }
        out
    }

    /// Every structure reachable by one I-match event.
    pub fn successors(&self, problem: &CompiledProblem, event: &Event) -> Vec<MatchingStructure> {
        let st = problem.statement(self);
        self.i_match_candidates(st, event)
            .into_iter()
            .map(|i| self.apply_unchecked(problem, event, i).expect("entries stay within the clamped range"))
            .collect()
    }

    pub fn render(&self, problem: &CompiledProblem) -> String {
        let st = problem.statement(self);
        let matched: Vec<String> = self.matched.iter().map(|t| st.labels[t].to_string()).collect();
        format!(
            "statement {} (rule {}), matched {{{}}}, clock {}\n{}",
            self.stmt,
            st.rule,
            matched.join(", "),
            self.clock,
            self.dbm.render(&st.labels)
        )
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Initial => "initial",
            Status::Active => "active",
            Status::Closed => "closed",
            Status::Other => "other",
        })
    }
}

/// `step(Υ, e)`: all successors of all structures, deduplicated.
pub fn step<'a>(
    problem: &CompiledProblem,
    structures: impl IntoIterator<Item = &'a MatchingStructure>,
    event: &Event,
) -> BTreeSet<MatchingStructure> {
    structures.into_iter().flat_map(|ms| ms.successors(problem, event)).collect()
}

/// Bound entry accessor kept public for diagnostics and tests.
pub fn entry(ms: &MatchingStructure, row: usize, col: usize) -> Bound {
    ms.dbm.get(row, col)
}
