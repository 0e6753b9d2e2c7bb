//! Moore-machine controllers built from a winning strategy, simulation
//! against Eve policies, and the `tbsynth-controller/1` JSON format.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::{
    parse_move_c, parse_move_e, round_outcome, show_move_c, show_move_e, Arena, GameContext, Move, MoveC, MoveE, Player,
    Round, RoundError,
};
use crate::events::{EventSequence, Signature};
use crate::format::FormatError;
use crate::solver::{AttractorResult, StrategyTable};

pub const CONTROLLER_FORMAT: &str = "tbsynth-controller/1";

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("Eve wins this game; no controller exists")]
    SynthesisImpossible,
    #[error("illegal Eve move `{given}`; legal moves: {}", .legal.join(", "))]
    IllegalMove { given: String, legal: Vec<String> },
    #[error(transparent)]
    Round(#[from] RoundError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("unsupported format `{0}`")]
    Version(String),
    #[error("bad controller document: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllerState {
    /// Arena state this controller state stands for.
    pub arena: usize,
    /// Charlie's move; `None` when the goal is met and no move keeps it.
    pub output: Option<MoveC>,
    pub goal: bool,
    pub transitions: BTreeMap<MoveE, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MooreController {
    pub states: Vec<ControllerState>,
    pub initial: usize,
}

/// One state per Charlie state reachable from the initial one while
/// following the strategy; Eve's moves are those legal after the output.
pub fn build_controller<Q>(
    arena: &Arena<Q>,
    attr: &AttractorResult,
    strategy: &StrategyTable,
) -> Result<MooreController, ControllerError> {
    if !attr.winning_c(arena.initial) {
        return Err(ControllerError::SynthesisImpossible);
    }
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut states: Vec<ControllerState> = Vec::new();
    let mut queue = VecDeque::new();
    let mut intern = |q: usize, states: &mut Vec<ControllerState>, queue: &mut VecDeque<usize>| {
        *index.entry(q).or_insert_with(|| {
            states.push(ControllerState {
                arena: q,
                output: strategy.get(q).cloned(),
                goal: arena.is_final(q),
                transitions: BTreeMap::new(),
            });
            queue.push_back(states.len() - 1);
            states.len() - 1
        })
    };
    intern(arena.initial, &mut states, &mut queue);
    while let Some(i) = queue.pop_front() {
        let Some(out) = states[i].output.clone() else { continue };
        let q = states[i].arena;
        let Some(e) = arena.successor(q, &Move::Charlie(out)) else {
            return Err(ControllerError::Invalid(format!("strategy move at {q} is not an edge")));
        };
        let mut trans = BTreeMap::new();
        for (m, t) in &arena.edges[e] {
            let Move::Eve(m) = m else { continue };
            debug_assert!(attr.winning_c(*t) && arena.turn(*t) == Player::Charlie);
            let j = intern(*t, &mut states, &mut queue);
            trans.insert(m.clone(), j);
        }
        states[i].transitions = trans;
    }
    Ok(MooreController { states, initial: 0 })
}

impl MooreController {
    pub fn output(&self, s: usize) -> Option<&MoveC> {
        self.states[s].output.as_ref()
    }

    pub fn legal(&self, s: usize) -> Vec<MoveE> {
        self.states[s].transitions.keys().cloned().collect()
    }

    pub fn step(&self, s: usize, eve: &MoveE, sig: &Signature) -> Result<(usize, Option<&MoveC>), ControllerError> {
        match self.states[s].transitions.get(eve) {
            Some(&t) => Ok((t, self.output(t))),
            None => Err(ControllerError::IllegalMove {
                given: show_move_e(sig, eve),
                legal: self.legal(s).iter().map(|m| show_move_e(sig, m)).collect(),
            }),
        }
    }

    pub fn to_json(&self, sig: &Signature) -> String {
        let doc = ControllerDoc {
            format: CONTROLLER_FORMAT.to_string(),
            initial: self.initial,
            states: self
                .states
                .iter()
                .enumerate()
                .map(|(id, s)| StateDoc { id, arena: s.arena, goal: s.goal, output: s.output.as_ref().map(|m| show_move_c(sig, m)) })
                .collect(),
            transitions: self
                .states
                .iter()
                .enumerate()
                .flat_map(|(from, s)| {
                    s.transitions.iter().map(move |(m, &to)| TransitionDoc { from, eve: show_move_e(sig, m), to })
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("controller documents serialize")
    }

    pub fn from_json(text: &str, sig: &Signature) -> Result<Self, ControllerError> {
        let doc: ControllerDoc = serde_json::from_str(text).map_err(FormatError::from)?;
        if doc.format != CONTROLLER_FORMAT {
            return Err(ControllerError::Version(doc.format));
        }
        let mut states = Vec::with_capacity(doc.states.len());
        for (i, s) in doc.states.iter().enumerate() {
            if s.id != i {
                return Err(ControllerError::Invalid(format!("state ids must be 0..n, found {} at {i}", s.id)));
            }
            let output = s.output.as_deref().map(|t| parse_move_c(sig, t)).transpose()?;
            states.push(ControllerState { arena: s.arena, output, goal: s.goal, transitions: BTreeMap::new() });
        }
        for t in &doc.transitions {
            if t.from >= states.len() || t.to >= states.len() {
                return Err(ControllerError::Invalid(format!("transition {} -> {} out of range", t.from, t.to)));
            }
            let m = parse_move_e(sig, &t.eve)?;
            states[t.from].transitions.insert(m, t.to);
        }
        if doc.initial >= states.len() {
            return Err(ControllerError::Invalid("initial state out of range".into()));
        }
        Ok(MooreController { states, initial: doc.initial })
    }

    pub fn to_dot(&self, sig: &Signature) -> String {
        let mut out = String::from("digraph controller {\n  node [shape=box];\n");
        for (i, s) in self.states.iter().enumerate() {
            let output = s.output.as_ref().map_or("none".to_string(), |m| show_move_c(sig, m));
            let border = if s.goal { ", peripheries=2" } else { "" };
            let _ = writeln!(out, "  m{i} [label=\"{i}\\n{}\"{border}];", output.replace('"', "\\\""));
        }
        let _ = writeln!(out, "  start [shape=point];\n  start -> m{};", self.initial);
        for (i, s) in self.states.iter().enumerate() {
            for (m, t) in &s.transitions {
                let _ = writeln!(out, "  m{i} -> m{t} [label=\"{}\"];", show_move_e(sig, m).replace('"', "\\\""));
            }
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ControllerDoc {
    format: String,
    initial: usize,
    states: Vec<StateDoc>,
    transitions: Vec<TransitionDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StateDoc {
    id: usize,
    arena: usize,
    goal: bool,
    output: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TransitionDoc {
    from: usize,
    eve: String,
    to: usize,
}

pub type EveCallback<'a> = Box<dyn FnMut(&EventSequence, &[MoveE]) -> Option<usize> + 'a>;

/// How Eve picks her reply. Returning no move ends the playout.
pub enum EvePolicy<'a> {
    Scripted(VecDeque<MoveE>),
    Random { seed: u64, rng: ChaCha8Rng },
    Interactive(EveCallback<'a>),
}

impl<'a> EvePolicy<'a> {
    pub fn scripted(moves: impl IntoIterator<Item = MoveE>) -> Self {
        EvePolicy::Scripted(moves.into_iter().collect())
    }

    pub fn random(seed: u64) -> Self {
        EvePolicy::Random { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn interactive(f: impl FnMut(&EventSequence, &[MoveE]) -> Option<usize> + 'a) -> Self {
        EvePolicy::Interactive(Box::new(f))
    }

    fn choose(&mut self, plan: &EventSequence, legal: &[MoveE]) -> Option<MoveE> {
        match self {
            EvePolicy::Scripted(moves) => moves.pop_front(),
            EvePolicy::Random { rng, .. } => legal.choose(rng).cloned(),
            EvePolicy::Interactive(f) => f(plan, legal).and_then(|i| legal.get(i).cloned()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Playout {
    pub play: Vec<Round>,
    /// Arena state reached.
    pub final_state: usize,
    pub reached_goal: bool,
    pub plan: EventSequence,
}

/// Alternates controller outputs and Eve replies until the goal is met, the
/// policy stops, or `max_rounds` rounds were played.
pub fn simulate(
    ctrl: &MooreController,
    ctx: &GameContext,
    policy: &mut EvePolicy<'_>,
    max_rounds: usize,
) -> Result<Playout, ControllerError> {
    let mut s = ctrl.initial;
    let mut play = Vec::new();
    let mut plan = EventSequence::default();
    while !ctrl.states[s].goal && play.len() < max_rounds {
        let Some(out) = ctrl.output(s).cloned() else { break };
        let legal = ctrl.legal(s);
        let Some(eve) = policy.choose(&plan, &legal) else { break };
        let (t, _) = ctrl.step(s, &eve, &ctx.sig)?;
        let round = Round::new(out, eve);
        plan = round_outcome(ctx, &plan, &round)?;
        play.push(round);
        s = t;
    }
    Ok(Playout { play, final_state: ctrl.states[s].arena, reached_goal: ctrl.states[s].goal, plan })
}

/// Every sequence of Eve replies of at most `max_rounds` rounds; returns the
/// first playout that misses the goal, if any, and the number of playouts.
pub fn exhaustive_check(ctrl: &MooreController, max_rounds: usize) -> (Option<Vec<MoveE>>, usize) {
    fn go(ctrl: &MooreController, s: usize, left: usize, path: &mut Vec<MoveE>, count: &mut usize) -> Option<Vec<MoveE>> {
        let st = &ctrl.states[s];
        if st.goal {
            *count += 1;
            return None;
        }
        if left == 0 || st.output.is_none() || st.transitions.is_empty() {
            *count += 1;
            return Some(path.clone());
        }
        for (m, &t) in &st.transitions {
            path.push(m.clone());
            if let Some(bad) = go(ctrl, t, left - 1, path, count) {
                return Some(bad);
            }
            path.pop();
        }
        None
    }
    let mut count = 0;
    let bad = go(ctrl, ctrl.initial, max_rounds, &mut Vec::new(), &mut count);
    (bad, count)
}

/// A JSON line per round, for transcripts.
pub fn transcript_line(ctx: &GameContext, index: usize, round: &Round, plan: &EventSequence) -> String {
    serde_json::json!({
        "round": index,
        "charlie": show_move_c(&ctx.sig, &round.charlie),
        "eve": show_move_e(&ctx.sig, &round.eve),
        "plan": ctx.sig.show_sequence(plan),
    })
    .to_string()
}
