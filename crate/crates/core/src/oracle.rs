//! Brute-force reference semantics.
//!
//! Nothing here uses matching structures or DBMs: rules are checked by
//! searching assignments of token names to tokens of the plan, and games by
//! bounded backward induction over rounds.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::events::{
    check_event_sequence, is_closed, is_partial_plan, time_of, tokens_of, Action, Event, EventSequence, Signature, TokenView, VarId,
};
use crate::model::{
    duration_rule, horizon_of, Controllability, Endpoint, ExistentialStatement, GameSpec, PlanningProblem, SyncRule, Term,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("enumeration guard exceeded: more than {limit} items")]
    Guard { limit: usize },
    #[error("rule mentions an undeclared variable or value")]
    Undeclared,
}

/// Default cap on the number of sequences or nodes the oracle will visit.
pub const DEFAULT_GUARD: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumBounds {
    pub max_length: usize,
    pub max_delta: u64,
    /// Variables whose actions may appear; all when `None`.
    pub variables: Option<Vec<VarId>>,
    pub guard: usize,
}

impl EnumBounds {
    pub fn new(max_length: usize, max_delta: u64) -> Self {
        EnumBounds { max_length, max_delta, variables: None, guard: DEFAULT_GUARD }
    }
}

/// Where each term of a statement may sit within a prefix `ε≤j`: at a
/// position, or not yet occurred.
type Slot = Option<usize>;

struct Scope<'a> {
    seq: &'a EventSequence,
    /// Last position considered; tokens ending later count as open.
    horizon: usize,
    times: Vec<u64>,
}

impl Scope<'_> {
    fn time(&self, p: usize) -> i64 {
        self.times[p - 1] as i64
    }
}

fn names_of(rule: &SyncRule, st: &ExistentialStatement) -> Vec<String> {
    let mut names = vec![rule.trigger.as_ref().map(|q| q.token.clone()).unwrap_or_default()];
    names.extend(st.quantifiers.iter().map(|q| q.token.clone()));
    names
}

fn slot_of(assignment: &[Option<(Slot, Slot)>], names: &[String], term: &Term) -> Option<Slot> {
    let k = names.iter().position(|n| *n == term.token)?;
    let (s, e) = assignment[k]?;
    Some(match term.endpoint {
        Endpoint::Start => s,
        Endpoint::End => e,
    })
}

/// Candidate placements of a token name: tokens of the right variable and
/// value that started within the scope, plus "not started yet" when partial
/// assignments are allowed.
fn candidates(scope: &Scope<'_>, sig: &Signature, var: &str, value: &str, partial: bool) -> Option<Vec<(Slot, Slot)>> {
    let x = sig.var_id(var)?;
    let v = sig.value_id(x, value)?;
    let mut out: Vec<(Slot, Slot)> = tokens_of(scope.seq, x)
        .into_iter()
        .filter(|t| t.value == v)
        .filter_map(|t| {
            let s = t.start.filter(|&p| p <= scope.horizon)?;
            let e = t.end.filter(|&p| p <= scope.horizon);
            (partial || e.is_some()).then_some((Some(s), e))
        })
        .collect();
    if partial {
        out.push((None, None));
    }
    Some(out)
}

/// Checks every atom whose terms are both placed. With `partial`, an atom
/// `X ≤[l,u] Y` with only `X` placed must leave room for `Y` after the scope.
fn atoms_ok(scope: &Scope<'_>, names: &[String], st: &ExistentialStatement, asg: &[Option<(Slot, Slot)>], partial: bool) -> bool {
    st.clause.iter().all(|atom| {
        let (Some(x), Some(y)) = (slot_of(asg, names, &atom.lhs), slot_of(asg, names, &atom.rhs)) else {
            return true;
        };
        match (x, y) {
            (Some(px), Some(py)) => {
                let d = scope.time(py) - scope.time(px);
                d >= atom.lower as i64 && atom.upper.is_none_or(|u| d <= u as i64)
            }
            (None, Some(_)) => false,
            (Some(px), None) => {
                debug_assert!(partial);
                atom.upper.is_none_or(|u| u != 0 && scope.time(scope.horizon) - scope.time(px) <= u as i64)
            }
            (None, None) => true,
        }
    })
}

fn search(
    scope: &Scope<'_>,
    names: &[String],
    st: &ExistentialStatement,
    cands: &[Vec<(Slot, Slot)>],
    asg: &mut Vec<Option<(Slot, Slot)>>,
    k: usize,
    partial: bool,
) -> bool {
    if k == cands.len() {
        return true;
    }
    for &c in &cands[k] {
        asg[k] = Some(c);
        if atoms_ok(scope, names, st, asg, partial) && search(scope, names, st, cands, asg, k + 1, partial) {
            return true;
        }
    }
    asg[k] = None;
    false
}

fn statement_holds(
    scope: &Scope<'_>,
    sig: &Signature,
    rule: &SyncRule,
    st: &ExistentialStatement,
    trigger: &TokenView,
    partial: bool,
) -> Result<bool, OracleError> {
    let names = names_of(rule, st);
    let trig = (trigger.start, trigger.end.filter(|&p| p <= scope.horizon));
    let mut cands = vec![vec![trig]];
    for q in &st.quantifiers {
        cands.push(candidates(scope, sig, &q.variable, &q.value, partial).ok_or(OracleError::Undeclared)?);
    }
    let mut asg = vec![None; cands.len()];
    Ok(search(scope, &names, st, &cands, &mut asg, 0, partial))
}

fn trigger_tokens(seq: &EventSequence, sig: &Signature, rule: &SyncRule) -> Result<Vec<TokenView>, OracleError> {
    let Some(q) = &rule.trigger else { return Ok(Vec::new()) };
    let x = sig.var_id(&q.variable).ok_or(OracleError::Undeclared)?;
    let v = sig.value_id(x, &q.value).ok_or(OracleError::Undeclared)?;
    Ok(tokens_of(seq, x).into_iter().filter(|t| t.value == v && t.start.is_some()).collect())
}

fn times(seq: &EventSequence) -> Vec<u64> {
    (1..=seq.len()).map(|p| time_of(seq, p)).collect()
}

/// Every token starting a trigger is matched by some statement, with every
/// term placed on closed tokens. An open trigger token is not yet satisfied.
pub fn satisfies_rule(seq: &EventSequence, sig: &Signature, rule: &SyncRule) -> Result<bool, OracleError> {
    let scope = Scope { seq, horizon: seq.len(), times: times(seq) };
    for t in trigger_tokens(seq, sig, rule)? {
        if t.end.is_none() {
            return Ok(false);
        }
        let mut ok = false;
        for st in &rule.statements {
            if statement_holds(&scope, sig, rule, st, &t, false)? {
                ok = true;
                break;
            }
        }
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Consecutive tokens of every listed variable follow its transition
/// function.
pub fn respects_transitions(seq: &EventSequence, sig: &Signature, vars: &[VarId]) -> bool {
    vars.iter().all(|&x| {
        let info = sig.var(x);
        tokens_of(seq, x).windows(2).all(|w| info.allows(w[0].value, w[1].value))
    })
}

/// Every closed token of the listed variables lasts within its bounds.
pub fn respects_durations(seq: &EventSequence, sig: &Signature, vars: &[VarId]) -> bool {
    vars.iter().all(|&x| {
        let info = sig.var(x);
        tokens_of(seq, x).iter().all(|t| match (t.start, t.end) {
            (Some(s), Some(e)) => info.durations[t.value.index()].contains(time_of(seq, e) - time_of(seq, s)),
            _ => true,
        })
    })
}

/// Well-formed, closed, within transition functions and durations, and
/// satisfying every rule.
pub fn is_solution_plan(seq: &EventSequence, problem: &PlanningProblem) -> Result<bool, OracleError> {
    let sig = Signature::new(&problem.variables);
    is_solution_plan_in(seq, &sig, &problem.rules)
}

pub fn is_solution_plan_in(seq: &EventSequence, sig: &Signature, rules: &[SyncRule]) -> Result<bool, OracleError> {
    let vars: Vec<VarId> = sig.var_ids().collect();
    if !matches!(check_event_sequence(seq, sig), Ok(Ok(()))) || !is_closed(seq, sig) {
        return Ok(false);
    }
    if !respects_transitions(seq, sig, &vars) || !respects_durations(seq, sig, &vars) {
        return Ok(false);
    }
    for r in rules {
        if !satisfies_rule(seq, sig, r)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Some trigger of `rule` admits no partial assignment of any statement on
/// `seq`: terms not placed yet must still fit after the last event.
pub fn refuted(seq: &EventSequence, sig: &Signature, rule: &SyncRule) -> Result<bool, OracleError> {
    let scope = Scope { seq, horizon: seq.len(), times: times(seq) };
    for t in trigger_tokens(seq, sig, rule)? {
        let mut viable = false;
        for st in &rule.statements {
            if statement_holds(&scope, sig, rule, st, &t, true)? {
                viable = true;
                break;
            }
        }
        if !viable {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Every well-typed event over `vars` with delay in `1..=max_delta`.
fn events_over(sig: &Signature, vars: &[VarId], max_delta: u64) -> Vec<Event> {
    let mut sets: Vec<Vec<Action>> = vec![Vec::new()];
    for &x in vars {
        let values: Vec<_> = sig.var(x).value_ids().collect();
        let mut next = Vec::new();
        for base in &sets {
            next.push(base.clone());
            for &v in &values {
                next.push([base.as_slice(), &[Action::start(x, v)]].concat());
                next.push([base.as_slice(), &[Action::end(x, v)]].concat());
                for &w in &values {
                    next.push([base.as_slice(), &[Action::end(x, v), Action::start(x, w)]].concat());
                }
            }
        }
        sets = next;
    }
    sets.into_iter().flat_map(|s| (1..=max_delta).map(move |d| Event::new(s.clone(), d))).collect()
}

/// Visits every well-formed sequence without left-open tokens within
/// `bounds` (first delay fixed to 1) in a deterministic depth-first order.
/// Left-open tokens cannot be closed, so such sequences are never plans.
pub fn for_each_sequence(
    sig: &Signature,
    bounds: &EnumBounds,
    mut f: impl FnMut(&EventSequence),
) -> Result<usize, OracleError> {
    let vars: Vec<VarId> = bounds.variables.clone().unwrap_or_else(|| sig.var_ids().collect());
    let first: Vec<Event> = events_over(sig, &vars, 1);
    let later: Vec<Event> = events_over(sig, &vars, bounds.max_delta);
    let mut seq = EventSequence::default();
    let mut count = 0usize;
    fn go(
        sig: &Signature,
        bounds: &EnumBounds,
        first: &[Event],
        later: &[Event],
        seq: &mut EventSequence,
        count: &mut usize,
        f: &mut dyn FnMut(&EventSequence),
    ) -> Result<(), OracleError> {
        *count += 1;
        if *count > bounds.guard {
            return Err(OracleError::Guard { limit: bounds.guard });
        }
        f(seq);
        if seq.len() == bounds.max_length {
            return Ok(());
        }
        let options = if seq.is_empty() { first } else { later };
        for e in options {
            seq.push(e.clone());
            if is_partial_plan(seq, sig) {
                go(sig, bounds, first, later, seq, count, f)?;
            }
            seq.events.pop();
        }
        Ok(())
    }
    go(sig, bounds, &first, &later, &mut seq, &mut count, &mut f)?;
    Ok(count)
}

pub fn enumerate_sequences(sig: &Signature, bounds: &EnumBounds) -> Result<Vec<EventSequence>, OracleError> {
    let mut out = Vec::new();
    for_each_sequence(sig, bounds, |s| out.push(s.clone()))?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Charlie,
    Eve,
    Unknown,
}

impl Verdict {
    fn best_for_charlie(vs: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::Eve;
        for v in vs {
            match v {
                Verdict::Charlie => return Verdict::Charlie,
                Verdict::Unknown => out = Verdict::Unknown,
                Verdict::Eve => {}
            }
        }
        out
    }
}

/// Game semantics on plans, by bounded backward induction over rounds.
///
/// Each event is one ending round followed by one starting round (the first
/// event has only the starting round). Charlie has won once the plan meets
/// his obligations or Eve can no longer meet hers. Eve has won when Charlie
/// is stuck, or when Charlie's obligations are refuted and Eve's cannot be
/// broken at all (no domain rules and no bounded uncontrollable durations).
struct GameOracle {
    sig: Signature,
    controlled: Vec<bool>,
    success_rules: Vec<SyncRule>,
    domain_rules: Vec<SyncRule>,
    max_wait: u64,
    eve_unbreakable: bool,
    nodes: usize,
    guard: usize,
}

impl GameOracle {
    fn new(game: &GameSpec, guard: usize) -> Self {
        let vars = game.variables();
        let sig = Signature::new(&vars);
        let controlled = (0..vars.len()).map(|i| i < game.controlled.len()).collect();
        let mut success_rules = game.system_rules.clone();
        let mut domain_rules = game.domain_rules.clone();
        for var in &vars {
            for value in &var.values {
                let d = var.duration(value);
                if d.is_trivial() {
                    continue;
                }
                let rule = duration_rule(&var.name, value, d);
                match var.controllability_of(value) {
                    Controllability::Controllable => success_rules.push(rule),
                    Controllability::Uncontrollable => domain_rules.push(rule),
                }
            }
        }
        let max_wait = horizon_of(success_rules.iter().chain(&domain_rules));
        let eve_unbreakable = domain_rules.is_empty();
        GameOracle { sig, controlled, success_rules, domain_rules, max_wait, eve_unbreakable, nodes: 0, guard }
    }

    fn vars(&self, charlie: bool) -> Vec<VarId> {
        self.sig.var_ids().filter(|x| self.controlled[x.index()] == charlie).collect()
    }

    fn charlie_ends(&self, a: &Action) -> bool {
        self.sig.controllability(a.var, a.value) == Controllability::Controllable
    }

    fn all_hold(&self, seq: &EventSequence, rules: &[SyncRule]) -> Result<bool, OracleError> {
        for r in rules {
            if !satisfies_rule(seq, &self.sig, r)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn any_refuted(&self, seq: &EventSequence, rules: &[SyncRule]) -> Result<bool, OracleError> {
        for r in rules {
            if refuted(seq, &self.sig, r)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn successful(&self, seq: &EventSequence) -> Result<bool, OracleError> {
        let mine = self.vars(true);
        Ok(!seq.is_empty()
            && mine.iter().all(|&x| crate::events::open_value(seq, x).is_none())
            && respects_transitions(seq, &self.sig, &mine)
            && self.all_hold(seq, &self.success_rules)?)
    }

    fn eve_broke(&self, seq: &EventSequence) -> Result<bool, OracleError> {
        Ok(!respects_transitions(seq, &self.sig, &self.vars(false)) || self.any_refuted(seq, &self.domain_rules)?)
    }

    fn charlie_hopeless(&self, seq: &EventSequence) -> Result<bool, OracleError> {
        Ok(!respects_transitions(seq, &self.sig, &self.vars(true)) || self.any_refuted(seq, &self.success_rules)?)
    }

    fn tick(&mut self) -> Result<(), OracleError> {
        self.nodes += 1;
        if self.nodes > self.guard {
            return Err(OracleError::Guard { limit: self.guard });
        }
        Ok(())
    }

    /// Sets with, for each variable, one start or, if optional, nothing.
    fn start_sets(&self, vars: &[(VarId, bool)]) -> Vec<Vec<Action>> {
        let mut out = vec![Vec::new()];
        for &(x, optional) in vars {
            let mut next = Vec::new();
            for base in &out {
                if optional {
                    next.push(base.clone());
                }
                for v in self.sig.var(x).value_ids() {
                    next.push([base.as_slice(), &[Action::start(x, v)]].concat());
                }
            }
            out = next;
        }
        out
    }

    fn end_sets(&self, seq: &EventSequence, charlie: bool) -> Vec<Vec<Action>> {
        let endable: Vec<Action> = self
            .sig
            .var_ids()
            .filter_map(|x| crate::events::open_value(seq, x).map(|v| Action::end(x, v)))
            .filter(|a| self.charlie_ends(a) == charlie)
            .collect();
        let mut out = vec![Vec::new()];
        for a in endable {
            let with: Vec<Vec<Action>> = out.iter().map(|s| [s.as_slice(), &[a]].concat()).collect();
            out.extend(with);
        }
        out
    }

    /// A plan between events: Charlie to move.
    fn at_event(&mut self, seq: &EventSequence, depth: usize) -> Result<Verdict, OracleError> {
        self.tick()?;
        if self.successful(seq)? || (!seq.is_empty() && self.eve_broke(seq)?) {
            return Ok(Verdict::Charlie);
        }
        if self.eve_unbreakable && self.charlie_hopeless(seq)? {
            return Ok(Verdict::Eve);
        }
        let finished = self.sig.var_ids().any(|x| {
            let ts = tokens_of(seq, x);
            !ts.is_empty() && ts.last().is_some_and(|t| t.end.is_some())
        });
        if finished {
            return Ok(Verdict::Eve);
        }
        if depth == 0 {
            return Ok(Verdict::Unknown);
        }
        let mut options: Vec<Verdict> = Vec::new();
        if seq.is_empty() {
            let mine: Vec<_> = self.vars(true).into_iter().map(|x| (x, true)).collect();
            let theirs: Vec<_> = self.vars(false).into_iter().map(|x| (x, true)).collect();
            for c in self.start_sets(&mine) {
                let mut worst = Vec::new();
                for e in self.start_sets(&theirs) {
                    let next = EventSequence::new(vec![Event::new(c.iter().chain(&e).copied(), 1)]);
                    let v = self.at_event(&next, depth - 1)?;
                    worst.push(v);
                    if v == Verdict::Eve {
                        break;
                    }
                }
                let v = worst_for_charlie(&worst);
                if v == Verdict::Charlie {
                    return Ok(v);
                }
                options.push(v);
            }
            return Ok(Verdict::best_for_charlie(options));
        }
        let eve_ends = self.end_sets(seq, false);
        let mut rounds: Vec<Vec<(Vec<Action>, u64)>> = Vec::new();
        for c in self.end_sets(seq, true).into_iter().filter(|c| !c.is_empty()) {
            rounds.push(eve_ends.iter().map(|e| ([c.as_slice(), e].concat(), 1)).collect());
        }
        for wait in 1..=self.max_wait {
            rounds.push((1..=wait).flat_map(|d| eve_ends.iter().map(move |e| (e.clone(), d))).collect());
        }
        for replies in rounds {
            let mut worst = Vec::new();
            for (actions, delta) in replies {
                let mut next = seq.clone();
                next.push(Event::new(actions, delta));
                let v = self.mid_event(&next, depth - 1)?;
                worst.push(v);
                if v == Verdict::Eve {
                    break;
                }
            }
            let v = worst_for_charlie(&worst);
            if v == Verdict::Charlie {
                return Ok(v);
            }
            options.push(v);
        }
        Ok(Verdict::best_for_charlie(options))
    }

    /// After an ending round: Charlie may restart what ended; Eve must,
    /// unless the ended value has no successor.
    fn mid_event(&mut self, seq: &EventSequence, depth: usize) -> Result<Verdict, OracleError> {
        self.tick()?;
        if depth == 0 {
            return Ok(Verdict::Unknown);
        }
        let last = seq.events.last().expect("mid-event plans are nonempty").clone();
        let mine: Vec<_> = self.vars(true).into_iter().filter(|&x| last.end_of(x).is_some()).map(|x| (x, true)).collect();
        let theirs: Vec<_> = self
            .vars(false)
            .into_iter()
            .filter_map(|x| {
                let v = last.end_of(x)?;
                let info = self.sig.var(x);
                Some((x, !info.value_ids().any(|w| info.allows(v, w))))
            })
            .collect();
        let mut options = Vec::new();
        for c in self.start_sets(&mine) {
            let mut worst = Vec::new();
            for e in self.start_sets(&theirs) {
                let mut next = seq.clone();
                next.events.last_mut().expect("nonempty").actions.extend(c.iter().chain(&e).copied());
                let v = self.at_event(&next, depth - 1)?;
                worst.push(v);
                if v == Verdict::Eve {
                    break;
                }
            }
            let v = worst_for_charlie(&worst);
            if v == Verdict::Charlie {
                return Ok(v);
            }
            options.push(v);
        }
        Ok(Verdict::best_for_charlie(options))
    }
}

fn worst_for_charlie(vs: &[Verdict]) -> Verdict {
    if vs.contains(&Verdict::Eve) {
        Verdict::Eve
    } else if vs.contains(&Verdict::Unknown) {
        Verdict::Unknown
    } else {
        Verdict::Charlie
    }
}

/// Winner of `game` when looking at most `depth` rounds ahead.
pub fn minimax_winner(game: &GameSpec, depth: usize) -> Result<Verdict, OracleError> {
    minimax_winner_guarded(game, depth, DEFAULT_GUARD)
}

pub fn minimax_winner_guarded(game: &GameSpec, depth: usize, guard: usize) -> Result<Verdict, OracleError> {
    GameOracle::new(game, guard).at_event(&EventSequence::default(), depth)
}

/// Tokens grouped by variable, for diagnostics.
pub fn timelines(seq: &EventSequence, sig: &Signature) -> BTreeMap<String, Vec<TokenView>> {
    sig.var_ids().map(|x| (sig.var(x).name.clone(), tokens_of(seq, x))).collect()
}
