//! Plans as words: actions, events, event sequences, well-formedness and
//! token extraction. Positions are 1-based.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::model::{Controllability, DurationBound, Name, StateVariable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValueId(pub u16);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ValueId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Index-based view of a variable declaration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarInfo {
    pub name: Name,
    pub values: Vec<Name>,
    /// `transitions[v][w]` iff `w ∈ T_x(v)`.
    pub transitions: Vec<Vec<bool>>,
    pub durations: Vec<DurationBound>,
    pub controllability: Vec<Controllability>,
}

impl VarInfo {
    pub fn value_ids(&self) -> impl Iterator<Item = ValueId> {
        (0..self.values.len() as u16).map(ValueId)
    }

    pub fn allows(&self, from: ValueId, to: ValueId) -> bool {
        self.transitions[from.index()][to.index()]
    }
}

/// The alphabet of a set of state variables, with name lookup.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Signature {
    pub vars: Vec<VarInfo>,
}

impl Signature {
    pub fn new(variables: &[StateVariable]) -> Self {
        let vars = variables
            .iter()
            .map(|v| VarInfo {
                name: v.name.clone(),
                values: v.values.clone(),
                transitions: v
                    .values
                    .iter()
                    .map(|from| v.values.iter().map(|to| v.allows(from, to)).collect())
                    .collect(),
                durations: v.values.iter().map(|x| v.duration(x)).collect(),
                controllability: v.values.iter().map(|x| v.controllability_of(x)).collect(),
            })
            .collect();
        Signature { vars }
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> {
        (0..self.vars.len() as u16).map(VarId)
    }

    pub fn var(&self, id: VarId) -> &VarInfo {
        &self.vars[id.index()]
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(|i| VarId(i as u16))
    }

    pub fn value_id(&self, var: VarId, value: &str) -> Option<ValueId> {
        self.var(var).values.iter().position(|v| v == value).map(|i| ValueId(i as u16))
    }

    pub fn controllability(&self, var: VarId, value: ValueId) -> Controllability {
        self.var(var).controllability[value.index()]
    }

    pub fn action(&self, kind: ActionKind, var: &str, value: &str) -> Result<Action, EventsError> {
        let v = self.var_id(var).ok_or_else(|| EventsError::UndeclaredVariable(var.to_string()))?;
        let val = self
            .value_id(v, value)
            .ok_or_else(|| EventsError::UndeclaredValue { variable: var.to_string(), value: value.to_string() })?;
        Ok(Action { kind, var: v, value: val })
    }

    pub fn start(&self, var: &str, value: &str) -> Action {
        self.action(ActionKind::Start, var, value).expect("declared action")
    }

    pub fn end(&self, var: &str, value: &str) -> Action {
        self.action(ActionKind::End, var, value).expect("declared action")
    }

    pub fn declares(&self, a: &Action) -> bool {
        a.var.index() < self.vars.len() && a.value.index() < self.var(a.var).values.len()
    }

    /// Every action over the signature, in canonical order.
    pub fn all_actions(&self) -> Vec<Action> {
        let mut out = Vec::new();
        for kind in [ActionKind::End, ActionKind::Start] {
            for var in self.var_ids() {
                for value in self.var(var).value_ids() {
                    out.push(Action { kind, var, value });
                }
            }
        }
        out
    }

    pub fn show_action(&self, a: &Action) -> String {
        let var = self.var(a.var);
        format!("{}({},{})", a.kind, var.name, var.values[a.value.index()])
    }

    pub fn show_actions<'a>(&self, actions: impl IntoIterator<Item = &'a Action>) -> String {
        let parts: Vec<String> = actions.into_iter().map(|a| self.show_action(a)).collect();
        format!("{{{}}}", parts.join(", "))
    }

    pub fn show_event(&self, e: &Event) -> String {
        format!("({}, {})", self.show_actions(&e.actions), e.delta)
    }

    pub fn show_sequence(&self, seq: &EventSequence) -> String {
        let parts: Vec<String> = seq.events.iter().map(|e| self.show_event(e)).collect();
        format!("⟨{}⟩", parts.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionKind {
    End,
    Start,
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionKind::Start => "start",
            ActionKind::End => "end",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub kind: ActionKind,
    pub var: VarId,
    pub value: ValueId,
}

impl Action {
    pub fn start(var: VarId, value: ValueId) -> Self {
        Action { kind: ActionKind::Start, var, value }
    }

    pub fn end(var: VarId, value: ValueId) -> Self {
        Action { kind: ActionKind::End, var, value }
    }

    pub fn is_start(&self) -> bool {
        self.kind == ActionKind::Start
    }

    pub fn is_end(&self) -> bool {
        self.kind == ActionKind::End
    }
}

pub type ActionSet = BTreeSet<Action>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Event {
    pub actions: ActionSet,
    pub delta: u64,
}

impl Event {
    pub fn new(actions: impl IntoIterator<Item = Action>, delta: u64) -> Self {
        Event { actions: actions.into_iter().collect(), delta }
    }

    pub fn empty(delta: u64) -> Self {
        Event { actions: ActionSet::new(), delta }
    }

    pub fn contains(&self, a: &Action) -> bool {
        self.actions.contains(a)
    }

    pub fn start_of(&self, var: VarId) -> Option<ValueId> {
        self.actions.iter().find(|a| a.is_start() && a.var == var).map(|a| a.value)
    }

    pub fn end_of(&self, var: VarId) -> Option<ValueId> {
        self.actions.iter().find(|a| a.is_end() && a.var == var).map(|a| a.value)
    }

    /// At most one start and one end action per variable.
    pub fn is_well_typed(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.actions.iter().all(|a| seen.insert((a.kind, a.var)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct EventSequence {
    pub events: Vec<Event>,
}

impl EventSequence {
    pub fn new(events: Vec<Event>) -> Self {
        EventSequence { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// 1-based access.
    pub fn at(&self, position: usize) -> &Event {
        &self.events[position - 1]
    }

    pub fn push(&mut self, e: Event) {
        self.events.push(e);
    }

    /// Sets δ_1 to 1; returns whether anything changed.
    pub fn canonicalize(&mut self) -> bool {
        match self.events.first_mut() {
            Some(e) if e.delta != 1 => {
                e.delta = 1;
                true
            }
            _ => false,
        }
    }

    /// Total elapsed time δ(ε) = Σ_{1<k≤n} δ_k.
    pub fn duration(&self) -> u64 {
        self.events.iter().skip(1).map(|e| e.delta).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EventsError {
    #[error("undeclared variable `{0}`")]
    UndeclaredVariable(String),
    #[error("undeclared value `{value}` of variable `{variable}`")]
    UndeclaredValue { variable: String, value: String },
    #[error("event {position} mentions an undeclared action")]
    UndeclaredAction { position: usize },
    #[error("event {position} has two {kind} actions on variable `{variable}`")]
    MalformedEvent { position: usize, kind: ActionKind, variable: String },
    #[error("position range {i}..{j} is outside 1..={len}")]
    OutOfRange { i: usize, j: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceViolation {
    pub position: usize,
    /// Violated conditions (1–4), ascending.
    pub conditions: Vec<u8>,
}

impl fmt::Display for SequenceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let conds: Vec<String> = self.conditions.iter().map(|c| c.to_string()).collect();
        write!(f, "violation at position {} (condition {})", self.position, conds.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Track {
    /// No action seen yet: a first end is an open-left token.
    Idle,
    Open(ValueId),
    /// The last token ended without a successor.
    Closed,
}

/// Checks the four well-formedness conditions on event sequences; the
/// earliest violating position is reported with all conditions it breaks.
///
/// Per variable: (1) no second start before the current token ends, (2) no
/// second end without an intervening start, (3) an end without a restart only
/// in the last event, (4) a start after the first event only together with an
/// end.
pub fn check_event_sequence(
    seq: &EventSequence,
    sig: &Signature,
) -> Result<Result<(), SequenceViolation>, EventsError> {
    for (i, e) in seq.events.iter().enumerate() {
        if !e.actions.iter().all(|a| sig.declares(a)) {
            return Err(EventsError::UndeclaredAction { position: i + 1 });
        }
        let mut seen = BTreeSet::new();
        for a in &e.actions {
            if !seen.insert((a.kind, a.var)) {
                return Err(EventsError::MalformedEvent {
                    position: i + 1,
                    kind: a.kind,
                    variable: sig.var(a.var).name.clone(),
                });
            }
        }
    }
    let n = seq.len();
    let mut track = vec![Track::Idle; sig.len()];
    for (idx, e) in seq.events.iter().enumerate() {
        let pos = idx + 1;
        let mut conds = BTreeSet::new();
        for var in sig.var_ids() {
            let ended = e.end_of(var);
            let started = e.start_of(var);
            let t = &mut track[var.index()];
            if let Some(v) = ended {
                match *t {
                    Track::Open(w) if w != v => {
                        conds.insert(2);
                    }
                    Track::Closed => {
                        conds.insert(2);
                    }
                    _ => {}
                }
            }
            if started.is_some() {
                if matches!(*t, Track::Open(_)) && ended.is_none() {
                    conds.insert(1);
                }
                if pos > 1 && ended.is_none() {
                    conds.insert(4);
                }
            }
            if ended.is_some() && started.is_none() && pos < n {
                conds.insert(3);
            }
            *t = match (ended, started) {
                (_, Some(v)) => Track::Open(v),
                (Some(_), None) => Track::Closed,
                (None, None) => *t,
            };
        }
        if !conds.is_empty() {
            return Ok(Err(SequenceViolation { position: pos, conditions: conds.into_iter().collect() }));
        }
    }
    Ok(Ok(()))
}

pub fn is_well_formed(seq: &EventSequence, sig: &Signature) -> bool {
    matches!(check_event_sequence(seq, sig), Ok(Ok(())))
}

/// δ_{i,j} = Σ_{i<k≤j} δ_k.
pub fn duration_between(seq: &EventSequence, i: usize, j: usize) -> Result<u64, EventsError> {
    if i < 1 || i > j || j > seq.len() {
        return Err(EventsError::OutOfRange { i, j, len: seq.len() });
    }
    Ok(seq.events[i..j].iter().map(|e| e.delta).sum())
}

/// Elapsed time from the first event to position `p`.
pub fn time_of(seq: &EventSequence, p: usize) -> u64 {
    seq.events[1..p].iter().map(|e| e.delta).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenView {
    pub variable: VarId,
    pub value: ValueId,
    /// `None` for a token open to the left.
    pub start: Option<usize>,
    /// `None` for a token open to the right.
    pub end: Option<usize>,
}

impl TokenView {
    pub fn is_closed(&self) -> bool {
        self.start.is_some() && self.end.is_some()
    }
}

/// Tokens of one variable in order of occurrence.
pub fn tokens_of(seq: &EventSequence, var: VarId) -> Vec<TokenView> {
    let mut out: Vec<TokenView> = Vec::new();
    for (idx, e) in seq.events.iter().enumerate() {
        let pos = idx + 1;
        if let Some(v) = e.end_of(var) {
            match out.last_mut() {
                Some(t) if t.end.is_none() => t.end = Some(pos),
                _ => out.push(TokenView { variable: var, value: v, start: None, end: Some(pos) }),
            }
        }
        if let Some(v) = e.start_of(var) {
            out.push(TokenView { variable: var, value: v, start: Some(pos), end: None });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Openness {
    Closed,
    OpenRight,
    OpenLeft,
    OpenBoth,
}

impl Openness {
    pub fn open_left(self) -> bool {
        matches!(self, Openness::OpenLeft | Openness::OpenBoth)
    }

    pub fn open_right(self) -> bool {
        matches!(self, Openness::OpenRight | Openness::OpenBoth)
    }
}

pub fn openness(seq: &EventSequence, var: VarId) -> Openness {
    let tokens = tokens_of(seq, var);
    let left = tokens.first().is_some_and(|t| t.start.is_none());
    let right = tokens.last().is_some_and(|t| t.end.is_none());
    match (left, right) {
        (false, false) => Openness::Closed,
        (false, true) => Openness::OpenRight,
        (true, false) => Openness::OpenLeft,
        (true, true) => Openness::OpenBoth,
    }
}

/// The value of the open token of `var` at the end of `seq`, if any.
pub fn open_value(seq: &EventSequence, var: VarId) -> Option<ValueId> {
    tokens_of(seq, var).last().filter(|t| t.end.is_none()).map(|t| t.value)
}

pub fn is_closed(seq: &EventSequence, sig: &Signature) -> bool {
    sig.var_ids().all(|v| openness(seq, v) == Openness::Closed)
}

/// Well-formed and closed to the left on every variable.
pub fn is_partial_plan(seq: &EventSequence, sig: &Signature) -> bool {
    is_well_formed(seq, sig) && sig.var_ids().all(|v| !openness(seq, v).open_left())
}


#[cfg(test)]
mod tests {
    use super::*;

    fn one_var() -> Signature {
        Signature::new(&[StateVariable::new("x", &["v", "w"])])
    }

    #[test]
    fn single_closed_token_is_well_formed() {
        let sig = one_var();
        let seq = EventSequence::new(vec![Event::new([sig.start("x", "v")], 1), Event::new([sig.end("x", "v")], 2)]);
        assert_eq!(check_event_sequence(&seq, &sig), Ok(Ok(())));
    }

    #[test]
    fn second_start_before_end_breaks_conditions_one_and_four() {
        let sig = one_var();
        let seq = EventSequence::new(vec![Event::new([sig.start("x", "v")], 1), Event::new([sig.start("x", "w")], 2)]);
        assert_eq!(
            check_event_sequence(&seq, &sig),
            Ok(Err(SequenceViolation { position: 2, conditions: vec![1, 4] }))
        );
    }

    #[test]
    fn end_without_restart_must_be_last() {
        let sig = one_var();
        let seq = EventSequence::new(vec![
            Event::new([sig.start("x", "v")], 1),
            Event::new([sig.end("x", "v")], 1),
            Event::empty(1),
        ]);
        assert_eq!(
            check_event_sequence(&seq, &sig),
            Ok(Err(SequenceViolation { position: 2, conditions: vec![3] }))
        );
    }

    #[test]
    fn mismatched_end_value_is_rejected() {
        let sig = one_var();
        let seq = EventSequence::new(vec![Event::new([sig.start("x", "v")], 1), Event::new([sig.end("x", "w")], 1)]);
        assert_eq!(
            check_event_sequence(&seq, &sig),
            Ok(Err(SequenceViolation { position: 2, conditions: vec![2] }))
        );
    }

    #[test]
    fn undeclared_and_duplicate_actions_are_input_errors() {
        let sig = one_var();
        let bogus = Action::start(VarId(3), ValueId(0));
        let seq = EventSequence::new(vec![Event::new([bogus], 1)]);
        assert!(check_event_sequence(&seq, &sig).is_err());
        let seq = EventSequence::new(vec![Event::new([sig.start("x", "v"), sig.start("x", "w")], 1)]);
        assert!(matches!(check_event_sequence(&seq, &sig), Err(EventsError::MalformedEvent { .. })));
        assert!(sig.action(ActionKind::Start, "y", "v").is_err());
        assert!(sig.action(ActionKind::Start, "x", "q").is_err());
    }

    #[test]
    fn figure_timelines_are_well_formed() {
        let (sig, seq) = fixtures::three_var_plan();
        assert_eq!(check_event_sequence(&seq, &sig), Ok(Ok(())));
        assert!(is_closed(&seq, &sig));
        let x0 = sig.var_id("x0").unwrap();
        let toks = tokens_of(&seq, x0);
        assert_eq!(toks.len(), 2);
        assert_eq!(sig.var(x0).values[toks[0].value.index()], "v0");
        assert_eq!(sig.var(x0).values[toks[1].value.index()], "v0p");
        assert_eq!(time_of(&seq, toks[0].end.unwrap()), 16);
        assert_eq!(seq.duration(), 20);
    }

    #[test]
    fn durations_between_positions() {
        let seq = EventSequence::new(vec![Event::empty(1), Event::empty(5), Event::empty(1)]);
        assert_eq!(duration_between(&seq, 1, 3), Ok(6));
        assert_eq!(duration_between(&seq, 2, 2), Ok(0));
        assert_eq!(duration_between(&seq, 1, 3).unwrap(), seq.duration());
        assert!(duration_between(&seq, 2, 4).is_err());
        assert!(duration_between(&seq, 3, 2).is_err());
    }

    #[test]
    fn openness_classification() {
        let sig = one_var();
        let x = VarId(0);
        assert_eq!(openness(&EventSequence::default(), x), Openness::Closed);
        let right = EventSequence::new(vec![Event::new([sig.start("x", "v")], 1)]);
        assert_eq!(openness(&right, x), Openness::OpenRight);
        assert_eq!(tokens_of(&right, x).last().unwrap().end, None);
        let left = EventSequence::new(vec![Event::new([sig.end("x", "v")], 1)]);
        assert_eq!(openness(&left, x), Openness::OpenLeft);
        let both = EventSequence::new(vec![Event::new([sig.end("x", "v"), sig.start("x", "w")], 1)]);
        assert_eq!(openness(&both, x), Openness::OpenBoth);
        assert!(is_partial_plan(&right, &sig));
        assert!(!is_partial_plan(&left, &sig));
    }

    #[test]
    fn canonicalization_fixes_the_first_delta() {
        let mut seq = EventSequence::new(vec![Event::empty(0), Event::empty(3)]);
        assert!(seq.canonicalize());
        assert_eq!(seq.events[0].delta, 1);
        assert!(!seq.canonicalize());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_seq() -> impl Strategy<Value = EventSequence> {
            proptest::collection::vec((0u8..6, 1u64..5), 0..7).prop_map(|steps| {
                let sig = Signature::new(&[StateVariable::new("x", &["v", "w"])]);
                let mut seq = EventSequence::default();
                let mut open: Option<&str> = None;
                for (i, (choice, delta)) in steps.into_iter().enumerate() {
                    let next = if choice % 3 == 0 { "v" } else { "w" };
                    let mut actions = vec![];
                    match open {
                        None if i == 0 && choice % 2 == 0 => {
                            actions.push(sig.start("x", next));
                            open = Some(next);
                        }
                        Some(cur) if choice % 2 == 0 => {
                            actions.push(sig.end("x", cur));
                            actions.push(sig.start("x", next));
                            open = Some(next);
                        }
                        _ => {}
                    }
                    seq.push(Event::new(actions, delta));
                }
                seq
            })
        }

        proptest! {
            #[test]
            fn duration_is_additive(seq in arb_seq(), a in 0usize..8, b in 0usize..8, c in 0usize..8) {
                prop_assume!(!seq.is_empty());
                let mut idx = [a % seq.len() + 1, b % seq.len() + 1, c % seq.len() + 1];
                idx.sort();
                let [i, j, k] = idx;
                prop_assert_eq!(
                    duration_between(&seq, i, k).unwrap(),
                    duration_between(&seq, i, j).unwrap() + duration_between(&seq, j, k).unwrap()
                );
            }

            #[test]
            fn tokens_round_trip(seq in arb_seq()) {
                let sig = Signature::new(&[StateVariable::new("x", &["v", "w"])]);
                prop_assert!(is_well_formed(&seq, &sig));
                let x = VarId(0);
                let mut rebuilt: Vec<(usize, Action)> = Vec::new();
                for t in tokens_of(&seq, x) {
                    if let Some(s) = t.start { rebuilt.push((s, Action::start(x, t.value))); }
                    if let Some(e) = t.end { rebuilt.push((e, Action::end(x, t.value))); }
                }
                rebuilt.sort();
                let mut original: Vec<(usize, Action)> = Vec::new();
                for (i, e) in seq.events.iter().enumerate() {
                    for a in &e.actions { original.push((i + 1, *a)); }
                }
                original.sort();
                prop_assert_eq!(rebuilt, original);
            }

            #[test]
            fn generated_plans_are_partial_plans(seq in arb_seq()) {
                let sig = Signature::new(&[StateVariable::new("x", &["v", "w"])]);
                prop_assert!(is_partial_plan(&seq, &sig));
            }
        }
    }
}
