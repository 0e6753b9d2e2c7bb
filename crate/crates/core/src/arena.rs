//! Game-side constructions: the action partition, moves and rounds, the game
//! automaton, transition pruning and the turn-based arena obtained by
//! splitting every event into a chain of moves.
//!
//! An event is produced by two rounds. The ending round is either
//! `play(C-ends)` answered by `play(E-ends)` with δ = 1, or `wait(δ_C)`
//! answered by `play(δ_E, E-ends)`. The starting round is `play(C-starts)`
//! answered by `play(E-starts)`. The first event only has a starting round.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use thiserror::Error;

use crate::automaton::{
    complement, intersect, state_budget, union, Complement, LazyDfa, NonEmpty, Product, SyncAutomaton, TvAutomaton,
    Viable,
};
use crate::events::{
    check_event_sequence, is_partial_plan, open_value, Action, ActionSet, Event, EventSequence, Signature, ValueId,
    VarId,
};
use crate::format::{parse_action, FormatError};
use crate::matching::{CompileError, CompiledProblem};
use crate::model::{duration_rule, horizon_of, Controllability, DurationBound, GameSpec, PlanningProblem, SyncRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Player {
    Charlie,
    Eve,
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Player::Charlie => "Charlie",
            Player::Eve => "Eve",
        })
    }
}

/// Which ending actions make a delayed event undefined after pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PruneMode {
    /// Ends of controllable values, i.e. the ends Charlie plays.
    #[default]
    Controllability,
    /// Ends on controlled variables, whatever their controllability.
    Ownership,
}

/// Everything the game constructions need to know about a game.
#[derive(Debug, Clone)]
pub struct GameContext {
    pub game: GameSpec,
    pub sig: Signature,
    /// `controlled[x]` iff `x ∈ SV_C`.
    pub controlled: Vec<bool>,
    pub charlie_actions: ActionSet,
    pub eve_actions: ActionSet,
    /// Largest delay a player may wait.
    pub d: u64,
    pub prune: PruneMode,
}

impl GameContext {
    pub fn new(game: &GameSpec) -> Self {
        let sig = Signature::new(&game.variables());
        let controlled = (0..sig.len()).map(|i| i < game.controlled.len()).collect();
        let (charlie_actions, eve_actions) = partition_actions(game);
        let (s, d) = game_sides(game);
        let d = horizon_of(s.rules.iter().chain(&d.rules));
        GameContext { game: game.clone(), sig, controlled, charlie_actions, eve_actions, d, prune: PruneMode::default() }
    }

    pub fn with_prune(mut self, prune: PruneMode) -> Self {
        self.prune = prune;
        self
    }

    pub fn owner(&self, a: &Action) -> Player {
        if self.charlie_actions.contains(a) {
            Player::Charlie
        } else {
            Player::Eve
        }
    }

    pub fn vars_of(&self, player: Player) -> impl Iterator<Item = VarId> + '_ {
        self.sig.var_ids().filter(move |x| self.controlled[x.index()] == (player == Player::Charlie))
    }

    pub fn show_move(&self, m: &Move) -> String {
        match m {
            Move::Charlie(m) => show_move_c(&self.sig, m),
            Move::Eve(m) => show_move_e(&self.sig, m),
        }
    }
}

/// Charlie plays the starts of controlled variables and the ends of
/// controllable values; Eve plays the rest.
pub fn partition_actions(game: &GameSpec) -> (ActionSet, ActionSet) {
    let sig = Signature::new(&game.variables());
    let mut charlie = ActionSet::new();
    let mut eve = ActionSet::new();
    for a in sig.all_actions() {
        let mine = if a.is_start() {
            a.var.index() < game.controlled.len()
        } else {
            sig.controllability(a.var, a.value) == Controllability::Controllable
        };
        if mine {
            charlie.insert(a);
        } else {
            eve.insert(a);
        }
    }
    (charlie, eve)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MoveC {
    Play(ActionSet),
    Wait(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MoveE {
    Play(ActionSet),
    PlayDelayed(u64, ActionSet),
}

impl MoveE {
    pub fn actions(&self) -> &ActionSet {
        match self {
            MoveE::Play(a) | MoveE::PlayDelayed(_, a) => a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Move {
    Charlie(MoveC),
    Eve(MoveE),
}

impl Move {
    pub fn player(&self) -> Player {
        match self {
            Move::Charlie(_) => Player::Charlie,
            Move::Eve(_) => Player::Eve,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Round {
    pub charlie: MoveC,
    pub eve: MoveE,
}

impl Round {
    pub fn new(charlie: MoveC, eve: MoveE) -> Self {
        Round { charlie, eve }
    }

    /// A round made only of starting actions, including the empty
    /// bookkeeping round.
    pub fn is_starting(&self) -> bool {
        match (&self.charlie, &self.eve) {
            (MoveC::Play(c), MoveE::Play(e)) => c.iter().chain(e).all(Action::is_start),
            _ => false,
        }
    }
}

pub fn show_move_c(sig: &Signature, m: &MoveC) -> String {
    match m {
        MoveC::Play(a) => format!("play{}", sig.show_actions(a)),
        MoveC::Wait(d) => format!("wait({d})"),
    }
}

pub fn show_move_e(sig: &Signature, m: &MoveE) -> String {
    match m {
        MoveE::Play(a) => format!("play{}", sig.show_actions(a)),
        MoveE::PlayDelayed(d, a) => format!("play({d}){}", sig.show_actions(a)),
    }
}

fn parse_action_set(sig: &Signature, text: &str) -> Result<ActionSet, FormatError> {
    let bad = || FormatError::Action(text.to_string());
    let inner = text.trim().strip_prefix('{').and_then(|t| t.strip_suffix('}')).ok_or_else(bad)?;
    let mut out = ActionSet::new();
    let (mut depth, mut from) = (0usize, 0usize);
    for (i, ch) in inner.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                out.insert(parse_action(sig, &inner[from..i])?);
                from = i + 1;
            }
            _ => {}
        }
    }
    if !inner[from..].trim().is_empty() {
        out.insert(parse_action(sig, &inner[from..])?);
    }
    Ok(out)
}

fn parse_delay(text: &str) -> Option<(u64, &str)> {
    let rest = text.strip_prefix('(')?;
    let (num, rest) = rest.split_once(')')?;
    Some((num.trim().parse().ok()?, rest))
}

pub fn parse_move_c(sig: &Signature, text: &str) -> Result<MoveC, FormatError> {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix("wait") {
        let (d, tail) = parse_delay(rest).ok_or_else(|| FormatError::Action(t.to_string()))?;
        if !tail.trim().is_empty() {
            return Err(FormatError::Action(t.to_string()));
        }
        return Ok(MoveC::Wait(d));
    }
    let rest = t.strip_prefix("play").ok_or_else(|| FormatError::Action(t.to_string()))?;
    Ok(MoveC::Play(parse_action_set(sig, rest)?))
}

pub fn parse_move_e(sig: &Signature, text: &str) -> Result<MoveE, FormatError> {
    let t = text.trim();
    let rest = t.strip_prefix("play").ok_or_else(|| FormatError::Action(t.to_string()))?;
    match parse_delay(rest) {
        Some((d, tail)) => Ok(MoveE::PlayDelayed(d, parse_action_set(sig, tail)?)),
        None => Ok(MoveE::Play(parse_action_set(sig, rest)?)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoundError {
    #[error("malformed round: {0}")]
    Malformed(String),
    #[error("not applicable (a): {0}")]
    Structure(String),
    #[error("not applicable (b): {0}")]
    Alternation(String),
}

/// Applies `round` to the partial plan `seq`. A starting round adds its
/// actions to the last event (to a fresh first event on ε); an ending round
/// appends a new event.
pub fn round_outcome(ctx: &GameContext, seq: &EventSequence, round: &Round) -> Result<EventSequence, RoundError> {
    let bad = |m: &str| Err(RoundError::Malformed(m.to_string()));
    let (c, e, delta) = match (&round.charlie, &round.eve) {
        (MoveC::Play(c), MoveE::Play(e)) => (c, e, 1),
        (MoveC::Wait(dc), MoveE::PlayDelayed(de, e)) => {
            if *de == 0 || de > dc {
                return bad("Eve's delay must lie in 1..=δ_C");
            }
            (&ActionSet::new(), e, *de)
        }
        _ => return bad("wait must be answered by a delayed play and play by play"),
    };
    if !c.is_subset(&ctx.charlie_actions) || !e.is_subset(&ctx.eve_actions) {
        return bad("an action is played by the wrong player");
    }
    let homogeneous = |s: &ActionSet| s.iter().all(Action::is_start) || s.iter().all(Action::is_end);
    if !homogeneous(c) || !homogeneous(e) {
        return bad("a move mixes starting and ending actions");
    }
    let starting = round.is_starting();
    if !starting && c.iter().chain(e).any(Action::is_start) {
        return bad("a starting move is paired with an ending one");
    }
    if !starting && c.is_empty() && matches!(round.charlie, MoveC::Play(_)) {
        return bad("Charlie's ending play must be nonempty");
    }
    if seq.is_empty() && !starting {
        return Err(RoundError::Alternation("the first round must be starting".into()));
    }
    let actions: ActionSet = c.union(e).copied().collect();
    for a in &actions {
        let open = open_value(seq, a.var).is_some();
        if open != !starting {
            let what = if starting { "open" } else { "not open" };
            return Err(RoundError::Alternation(format!("{} is {what}", ctx.sig.var(a.var).name)));
        }
    }
    let mut out = seq.clone();
    if starting {
        match out.events.last_mut() {
            Some(last) => last.actions.extend(actions),
            None => out.push(Event::new(actions, 1)),
        }
    } else {
        out.push(Event::new(actions, delta));
    }
    match check_event_sequence(&out, &ctx.sig) {
        Ok(Ok(())) if is_partial_plan(&out, &ctx.sig) => Ok(out),
        Ok(Err(v)) => Err(RoundError::Structure(v.to_string())),
        Ok(Ok(())) => Err(RoundError::Structure("token open to the left".into())),
        Err(err) => Err(RoundError::Structure(err.to_string())),
    }
}

/// Folds `round_outcome` over a play starting from ε.
pub fn play_outcome(ctx: &GameContext, rounds: &[Round]) -> Result<EventSequence, (usize, RoundError)> {
    let mut seq = EventSequence::default();
    for (i, r) in rounds.iter().enumerate() {
        seq = round_outcome(ctx, &seq, r).map_err(|e| (i, e))?;
    }
    Ok(seq)
}

/// The success side and the admissibility side as planning problems over all
/// variables. Duration bounds become rules: controllable values on the
/// success side, uncontrollable ones on the admissibility side.
pub fn game_sides(game: &GameSpec) -> (PlanningProblem, PlanningProblem) {
    let mut vars = game.variables();
    let mut dur_c = Vec::new();
    let mut dur_u = Vec::new();
    for var in &mut vars {
        for value in &var.values {
            let d = var.duration(value);
            if d.is_trivial() {
                continue;
            }
            let rule = duration_rule(&var.name, value, d);
            match var.controllability_of(value) {
                Controllability::Controllable => dur_c.push(rule),
                Controllability::Uncontrollable => dur_u.push(rule),
            }
            var.durations.insert(value.clone(), DurationBound::UNBOUNDED);
        }
    }
    let with = |rules: &[SyncRule], extra: Vec<SyncRule>| PlanningProblem::new(vars.clone(), rules.iter().cloned().chain(extra).collect());
    (with(&game.system_rules, dur_c), with(&game.domain_rules, dur_u))
}

pub type SideDfa = Product<SyncAutomaton, TvAutomaton>;
pub type GameDfa = Product<NonEmpty<SideDfa>, Complement<Viable<SideDfa>>>;

/// Accepts the nonempty plans that meet Charlie's obligations (system rules,
/// transitions of his variables, closed on his variables) and the plans on
/// which Eve can no longer meet hers.
pub fn build_game_dfa(game: &GameSpec) -> Result<GameDfa, CompileError> {
    let ctx = GameContext::new(game);
    let (s, d) = game_sides(game);
    let sc = Arc::new(CompiledProblem::new(&s)?);
    let dc = Arc::new(CompiledProblem::new(&d)?);
    let tv_c = TvAutomaton::new(ctx.sig.clone(), ctx.vars_of(Player::Charlie).collect(), true);
    let tv_e = TvAutomaton::new(ctx.sig.clone(), ctx.vars_of(Player::Eve).collect(), false);
    let success = NonEmpty(intersect(SyncAutomaton::new(sc), tv_c));
    let admissible = Viable(intersect(SyncAutomaton::new(dc), tv_e));
    Ok(union(success, complement(admissible)))
}

/// A partial automaton: `successor` is undefined on delayed events that
/// contain a pruned ending action.
#[derive(Debug, Clone)]
pub struct Pruned<A> {
    pub inner: A,
    pruned_ends: BTreeSet<Action>,
}

pub fn prune<A: LazyDfa>(inner: A, ctx: &GameContext) -> Pruned<A> {
    let pruned_ends = ctx
        .sig
        .all_actions()
        .into_iter()
        .filter(|a| a.is_end())
        .filter(|a| match ctx.prune {
            PruneMode::Controllability => ctx.charlie_actions.contains(a),
            PruneMode::Ownership => ctx.controlled[a.var.index()],
        })
        .collect();
    Pruned { inner, pruned_ends }
}

impl<A: LazyDfa> Pruned<A> {
    pub fn is_defined(&self, e: &Event) -> bool {
        e.delta <= 1 || e.actions.is_disjoint(&self.pruned_ends)
    }

    pub fn successor(&self, q: &A::State, e: &Event) -> Option<A::State> {
        self.is_defined(e).then(|| self.inner.successor(q, e))
    }

    pub fn run(&self, seq: &EventSequence) -> Option<A::State> {
        seq.events.iter().try_fold(self.inner.initial(), |q, e| self.successor(&q, e))
    }

    pub fn accepts(&self, seq: &EventSequence) -> bool {
        self.run(seq).is_some_and(|q| self.inner.is_final(&q))
    }

    /// Replaces every undefined event `(A, δ)` by `(∅, δ−1)` then `(A, 1)`.
    pub fn detour(&self, seq: &EventSequence) -> EventSequence {
        let mut out = EventSequence::default();
        for e in &seq.events {
            if self.is_defined(e) {
                out.push(e.clone());
            } else {
                out.push(Event::empty(e.delta - 1));
                out.push(Event::new(e.actions.iter().copied(), 1));
            }
        }
        out
    }
}

/// Token-openness profile of the plan read so far.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Shape {
    pub started: bool,
    /// A token ended without a successor: no further event is possible.
    pub finished: bool,
    pub open: Vec<Option<ValueId>>,
}

impl Shape {
    fn initial(n: usize) -> Self {
        Shape { started: false, finished: false, open: vec![None; n] }
    }

    fn after(&self, e: &Event) -> Self {
        let mut next = self.clone();
        next.started = true;
        for (i, slot) in next.open.iter_mut().enumerate() {
            let x = VarId(i as u16);
            if e.end_of(x).is_some() {
                *slot = None;
                if e.start_of(x).is_none() {
                    next.finished = true;
                }
            }
            if let Some(v) = e.start_of(x) {
                *slot = Some(v);
            }
        }
        next
    }
}

/// Position inside an event chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    EveEnding,
    CharlieStarting,
    EveStarting,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArenaState<Q> {
    Original { base: Q, shape: Shape },
    AfterWait { base: Q, shape: Shape, wait: u64 },
    Partial { base: Q, shape: Shape, delta: u64, actions: ActionSet, stage: Stage },
}

impl<Q> ArenaState<Q> {
    pub fn turn(&self) -> Player {
        match self {
            ArenaState::Original { .. } => Player::Charlie,
            ArenaState::AfterWait { .. } => Player::Eve,
            ArenaState::Partial { stage, .. } => match stage {
                Stage::CharlieStarting => Player::Charlie,
                Stage::EveEnding | Stage::EveStarting => Player::Eve,
            },
        }
    }

    pub fn base(&self) -> &Q {
        match self {
            ArenaState::Original { base, .. } | ArenaState::AfterWait { base, .. } | ArenaState::Partial { base, .. } => base,
        }
    }

    pub fn is_original(&self) -> bool {
        matches!(self, ArenaState::Original { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArenaError {
    #[error("arena exceeds the state budget of {limit}")]
    Budget { limit: usize },
    #[error("move {index} is not an edge of the arena")]
    Undefined { index: usize },
}

#[derive(Debug, Clone)]
pub struct Arena<Q> {
    pub states: Vec<ArenaState<Q>>,
    /// Outgoing edges per state, sorted by move.
    pub edges: Vec<Vec<(Move, usize)>>,
    pub finals: Vec<bool>,
    pub initial: usize,
}

impl<Q> Arena<Q> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn turn(&self, q: usize) -> Player {
        self.states[q].turn()
    }

    pub fn is_final(&self, q: usize) -> bool {
        self.finals[q]
    }

    pub fn successor(&self, q: usize, m: &Move) -> Option<usize> {
        self.edges[q].iter().find(|(mv, _)| mv == m).map(|&(_, t)| t)
    }

    pub fn stats(&self) -> String {
        let charlie = (0..self.len()).filter(|&q| self.turn(q) == Player::Charlie).count();
        format!(
            "states={} charlie={} eve={} edges={} finals={}",
            self.len(),
            charlie,
            self.len() - charlie,
            self.edge_count(),
            self.finals.iter().filter(|f| **f).count()
        )
    }

    pub fn to_dot(&self, ctx: &GameContext) -> String {
        let mut out = String::from("digraph arena {\n");
        for q in 0..self.len() {
            let shape = match self.turn(q) {
                Player::Charlie => "box",
                Player::Eve => "diamond",
            };
            let border = if self.finals[q] { ", peripheries=2" } else { "" };
            let _ = writeln!(out, "  a{q} [shape={shape}, label=\"{q}\"{border}];");
        }
        let _ = writeln!(out, "  start [shape=point];\n  start -> a{};", self.initial);
        for (q, es) in self.edges.iter().enumerate() {
            for (m, t) in es {
                let _ = writeln!(out, "  a{q} -> a{t} [label=\"{}\"];", ctx.show_move(m).replace('"', "\\\""));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Walks `play` from the initial state.
pub fn read_play<Q>(arena: &Arena<Q>, play: &[Move]) -> Result<usize, ArenaError> {
    play.iter()
        .enumerate()
        .try_fold(arena.initial, |q, (i, m)| arena.successor(q, m).ok_or(ArenaError::Undefined { index: i }))
}

pub fn rounds_to_moves(rounds: &[Round]) -> Vec<Move> {
    rounds.iter().flat_map(|r| [Move::Charlie(r.charlie.clone()), Move::Eve(r.eve.clone())]).collect()
}

/// All sets picking, for each `(choices, optional)`, one of the actions or,
/// when optional, nothing.
fn choice_sets(options: &[(Vec<Action>, bool)]) -> Vec<ActionSet> {
    let mut out = vec![ActionSet::new()];
    for (opts, optional) in options {
        let mut next = Vec::new();
        for base in &out {
            if *optional {
                next.push(base.clone());
            }
            for a in opts {
                let mut s = base.clone();
                s.insert(*a);
                next.push(s);
            }
        }
        out = next;
    }
    out
}

fn subsets(items: &[Action]) -> Vec<ActionSet> {
    choice_sets(&items.iter().map(|a| (vec![*a], true)).collect::<Vec<_>>())
}

/// Splits the pruned game automaton into the turn-based arena, generating
/// only moves that form applicable rounds. Eve restarts every variable of
/// hers that ended unless its value has no successor. A variable left ended
/// finishes the plan.
pub fn split<A: LazyDfa>(dfa: &Pruned<A>, ctx: &GameContext) -> Result<Arena<A::State>, ArenaError> {
    let limit = state_budget();
    let mut index: HashMap<ArenaState<A::State>, usize> = HashMap::new();
    let mut states: Vec<ArenaState<A::State>> = Vec::new();
    let mut edges: Vec<Vec<(Move, usize)>> = Vec::new();
    let mut queue = VecDeque::new();
    let init = ArenaState::Original { base: dfa.inner.initial(), shape: Shape::initial(ctx.sig.len()) };
    index.insert(init.clone(), 0);
    states.push(init);
    edges.push(Vec::new());
    queue.push_back(0);

    let endable = |shape: &Shape, player: Player| -> Vec<Action> {
        ctx.sig
            .var_ids()
            .filter_map(|x| shape.open[x.index()].map(|v| Action::end(x, v)))
            .filter(|a| ctx.owner(a) == player)
            .collect()
    };
    let start_options = |x: VarId| -> Vec<Action> { ctx.sig.var(x).value_ids().map(|v| Action::start(x, v)).collect() };
    let is_terminal = |x: VarId, v: ValueId| !ctx.sig.var(x).value_ids().any(|w| ctx.sig.var(x).allows(v, w));

    while let Some(q) = queue.pop_front() {
        let state = states[q].clone();
        let mut out: Vec<(Move, ArenaState<A::State>)> = Vec::new();
        match &state {
            ArenaState::Original { base, shape } if !shape.started => {
                let opts: Vec<_> = ctx.vars_of(Player::Charlie).map(|x| (start_options(x), true)).collect();
                for s in choice_sets(&opts) {
                    let next = ArenaState::Partial {
                        base: base.clone(),
                        shape: shape.clone(),
                        delta: 1,
                        actions: s.clone(),
                        stage: Stage::EveStarting,
                    };
                    out.push((Move::Charlie(MoveC::Play(s)), next));
                }
            }
            ArenaState::Original { shape, .. } if shape.finished => {}
            ArenaState::Original { base, shape } => {
                for s in subsets(&endable(shape, Player::Charlie)).into_iter().filter(|s| !s.is_empty()) {
                    let next = ArenaState::Partial {
                        base: base.clone(),
                        shape: shape.clone(),
                        delta: 1,
                        actions: s.clone(),
                        stage: Stage::EveEnding,
                    };
                    out.push((Move::Charlie(MoveC::Play(s)), next));
                }
                for wait in 1..=ctx.d {
                    out.push((Move::Charlie(MoveC::Wait(wait)), ArenaState::AfterWait { base: base.clone(), shape: shape.clone(), wait }));
                }
            }
            ArenaState::AfterWait { base, shape, wait } => {
                for s in subsets(&endable(shape, Player::Eve)) {
                    for delta in 1..=*wait {
                        if !dfa.is_defined(&Event::new(s.iter().copied(), delta)) {
                            continue;
                        }
                        let next = ArenaState::Partial {
                            base: base.clone(),
                            shape: shape.clone(),
                            delta,
                            actions: s.clone(),
                            stage: Stage::CharlieStarting,
                        };
                        out.push((Move::Eve(MoveE::PlayDelayed(delta, s.clone())), next));
                    }
                }
            }
            ArenaState::Partial { base, shape, delta, actions, stage } => {
                let ended = |x: VarId| actions.iter().find(|a| a.is_end() && a.var == x).map(|a| a.value);
                let with = |s: &ActionSet, stage: Stage| ArenaState::Partial {
                    base: base.clone(),
                    shape: shape.clone(),
                    delta: *delta,
                    actions: actions.union(s).copied().collect(),
                    stage,
                };
                match stage {
                    Stage::EveEnding => {
                        for s in subsets(&endable(shape, Player::Eve)) {
                            let next = with(&s, Stage::CharlieStarting);
                            out.push((Move::Eve(MoveE::Play(s)), next));
                        }
                    }
                    Stage::CharlieStarting => {
                        let opts: Vec<_> =
                            ctx.vars_of(Player::Charlie).filter(|&x| ended(x).is_some()).map(|x| (start_options(x), true)).collect();
                        for s in choice_sets(&opts) {
                            let next = with(&s, Stage::EveStarting);
                            out.push((Move::Charlie(MoveC::Play(s)), next));
                        }
                    }
                    Stage::EveStarting => {
                        let first = !shape.started;
                        let opts: Vec<_> = ctx
                            .vars_of(Player::Eve)
                            .filter_map(|x| match ended(x) {
                                _ if first => Some((start_options(x), true)),
                                Some(v) => Some((start_options(x), is_terminal(x, v))),
                                None => None,
                            })
                            .collect();
                        for s in choice_sets(&opts) {
                            let event = Event::new(actions.union(&s).copied(), *delta);
                            let Some(next_base) = dfa.successor(base, &event) else { continue };
                            let next = ArenaState::Original { base: next_base, shape: shape.after(&event) };
                            out.push((Move::Eve(MoveE::Play(s)), next));
                        }
                    }
                }
            }
        }
        let mut labelled = Vec::with_capacity(out.len());
        for (m, next) in out {
            let t = match index.get(&next) {
                Some(&t) => t,
                None => {
                    if states.len() >= limit {
                        return Err(ArenaError::Budget { limit });
                    }
                    let t = states.len();
                    index.insert(next.clone(), t);
                    states.push(next);
                    edges.push(Vec::new());
                    queue.push_back(t);
                    t
                }
            };
            labelled.push((m, t));
        }
        labelled.sort();
        edges[q] = labelled;
    }
    let finals = states.iter().map(|s| s.is_original() && dfa.inner.is_final(s.base())).collect();
    Ok(Arena { states, edges, finals, initial: 0 })
}

pub type GameArena = Arena<<GameDfa as LazyDfa>::State>;

/// Game automaton, pruned automaton and arena of a game in one go.
pub fn build_arena(ctx: &GameContext) -> Result<(Pruned<GameDfa>, GameArena), ArenaBuildError> {
    let dfa = prune(build_game_dfa(&ctx.game)?, ctx);
    let arena = split(&dfa, ctx)?;
    Ok((dfa, arena))
}

#[derive(Debug, Error)]
pub enum ArenaBuildError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Arena(#[from] ArenaError),
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::model::{Atom, ExistentialStatement, Quantifier, StateVariable, Term};

    /// Charlie owns `x ∈ {v}`, Eve owns `y ∈ {w}`; no rules.
    pub fn free_game() -> GameSpec {
        GameSpec {
            controlled: vec![StateVariable::new("x", &["v"])],
            external: vec![StateVariable::new("y", &["w"])],
            ..Default::default()
        }
    }

    /// Eve's `p` needs Charlie's `q` to start one unit earlier, which is
    /// impossible when `p` starts the plan.
    pub fn unsatisfiable_game() -> GameSpec {
        GameSpec {
            controlled: vec![StateVariable::new("x", &["q"])],
            external: vec![
                StateVariable::new("y", &["p"]).with_controllability("p", Controllability::Uncontrollable),
            ],
            system_rules: vec![SyncRule::new(
                Quantifier::new("b", "y", "p"),
                vec![ExistentialStatement::new(
                    vec![Quantifier::new("a", "x", "q")],
                    vec![Atom::new(Term::start("a"), Term::start("b"), 1, Some(1))],
                )],
            )],
            domain_rules: vec![],
        }
    }
}
