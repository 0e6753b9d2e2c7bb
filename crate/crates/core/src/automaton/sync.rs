//! The rule automaton: states `⟨Υ, Δ, Φ⟩` plus a sink.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::LazyDfa;
use crate::dbm::start_term;
use crate::events::Event;
use crate::matching::{step, CompiledProblem, MatchingStructure};

/// Υ keeps recent triggers. Triggers older than the window are kept either
/// in `pending`, one group of structures per trigger, or (in
/// [`DeltaMode::Summary`]) in Δ, one set per statement indexed by global
/// statement id, with Φ grouping statements whose Δ sets track the same
/// triggers (a bitmask over the rule-local statement indices).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SyncData {
    pub upsilon: Vec<MatchingStructure>,
    pub pending: Vec<Vec<MatchingStructure>>,
    pub delta: Vec<Vec<MatchingStructure>>,
    pub phi: Vec<u64>,
}

/// How triggers older than the window are tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaMode {
    /// Each promoted group keeps evolving on its own: it is dropped once it
    /// holds a closed structure, and an empty step rejects. Groups that
    /// contain another group are dropped.
    #[default]
    PerTrigger,
    /// One set per statement, replaced by newer promotions, with the Φ
    /// grouping. A set whose structures all die simply becomes empty, so
    /// some violations surface only as acceptance.
    Summary,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SyncState {
    Bottom,
    Live(Arc<SyncData>),
}

impl SyncState {
    pub fn data(&self) -> Option<&SyncData> {
        match self {
            SyncState::Bottom => None,
            SyncState::Live(d) => Some(d),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyncAutomaton {
    problem: Arc<CompiledProblem>,
    mode: DeltaMode,
}

fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn has_closed<'a>(it: impl IntoIterator<Item = &'a MatchingStructure>) -> bool {
    it.into_iter().any(|m| m.is_closed())
}

impl SyncAutomaton {
    pub fn new(problem: Arc<CompiledProblem>) -> Self {
        SyncAutomaton { problem, mode: DeltaMode::default() }
    }

    pub fn with_mode(problem: Arc<CompiledProblem>, mode: DeltaMode) -> Self {
        SyncAutomaton { problem, mode }
    }

    pub fn mode(&self) -> DeltaMode {
        self.mode
    }

    pub fn problem(&self) -> &CompiledProblem {
        &self.problem
    }

    fn rule_of(&self, ms: &MatchingStructure) -> usize {
        self.problem.statement(ms).rule
    }

    fn local_of(&self, ms: &MatchingStructure) -> usize {
        self.problem.statement(ms).local
    }

    fn succ(&self, s: &SyncData, e: &Event) -> SyncState {
        let p = &*self.problem;
        let w = p.window;

        let mut bot = Vec::new();
        let mut groups: BTreeMap<(usize, u64), Vec<&MatchingStructure>> = BTreeMap::new();
        for ms in &s.upsilon {
            if ms.is_active() {
                groups.entry((self.rule_of(ms), ms.clock)).or_default().push(ms);
            } else {
                bot.push(ms);
            }
        }

        let mut upsilon = step(p, bot, e);
        // Per rule, promoted groups in increasing pre-step clock order.
        let mut promoted: Vec<Vec<BTreeSet<MatchingStructure>>> = vec![Vec::new(); p.rules.len()];
        for ((rule, t), members) in groups {
            let next = step(p, members, e);
            if next.is_empty() {
                return SyncState::Bottom;
            }
            if t + e.delta <= w {
                if !has_closed(&next) {
                    upsilon.extend(next);
                }
            } else {
                promoted[rule].push(next);
            }
        }

        let (pending, delta, phi) = match self.mode {
            DeltaMode::PerTrigger => match self.advance_pending(s, e, promoted) {
                Some(pending) => (pending, s.delta.clone(), s.phi.clone()),
                None => return SyncState::Bottom,
            },
            DeltaMode::Summary => {
                let (delta, phi) = self.advance_summary(s, e, promoted);
                (Vec::new(), delta, phi)
            }
        };

        for (r, rule) in p.rules.iter().enumerate() {
            if rule.triggered_by(e) {
                let captured = upsilon.iter().any(|ms| {
                    self.rule_of(ms) == r
                        && ms.clock == 0
                        && ms.matched.contains(start_term(0))
                });
                if !captured {
                    return SyncState::Bottom;
                }
            }
        }
        upsilon.retain(|ms| !ms.is_closed());
        let upsilon: BTreeSet<_> = upsilon.iter().map(MatchingStructure::canonical).collect();

        SyncState::Live(Arc::new(SyncData { upsilon: upsilon.into_iter().collect(), pending, delta, phi }))
    }

    fn advance_pending(
        &self,
        s: &SyncData,
        e: &Event,
        promoted: Vec<Vec<BTreeSet<MatchingStructure>>>,
    ) -> Option<Vec<Vec<MatchingStructure>>> {
        // Clocks of promoted triggers are no longer read.
        let settle = |g: BTreeSet<MatchingStructure>| -> BTreeSet<MatchingStructure> {
            g.iter()
                .map(|ms| MatchingStructure { clock: self.problem.clock_cap, ..ms.canonical() })
                .collect()
        };
        let mut groups: BTreeSet<BTreeSet<MatchingStructure>> = BTreeSet::new();
        for g in &s.pending {
            let next = step(&self.problem, g, e);
            if next.is_empty() {
                return None;
            }
            if !has_closed(&next) {
                groups.insert(settle(next));
            }
        }
        groups.extend(promoted.into_iter().flatten().filter(|g| !has_closed(g)).map(settle));
        let groups: Vec<_> = groups.into_iter().collect();
        let minimal = groups
            .iter()
            .enumerate()
            .filter(|(i, g)| !groups.iter().enumerate().any(|(j, h)| j != *i && h.len() < g.len() && h.is_subset(g)))
            .map(|(_, g)| g.iter().cloned().collect())
            .collect();
        Some(minimal)
    }

    fn advance_summary(
        &self,
        s: &SyncData,
        e: &Event,
        promoted: Vec<Vec<BTreeSet<MatchingStructure>>>,
    ) -> (Vec<Vec<MatchingStructure>>, Vec<u64>) {
        let p = &*self.problem;
        let n_stmts = p.statements.len();
        let psi: Vec<Vec<u64>> = promoted
            .iter()
            .map(|gs| gs.iter().map(|g| g.iter().fold(0u64, |m, ms| m | 1 << self.local_of(ms))).collect())
            .collect();

        let mut delta_next: Vec<BTreeSet<MatchingStructure>> = Vec::with_capacity(n_stmts);
        let mut from_step = vec![false; n_stmts];
        for (id, st) in p.statements.iter().enumerate() {
            let projected = promoted[st.rule].iter().find_map(|g| {
                let proj: BTreeSet<_> = g.iter().filter(|ms| ms.stmt as usize == id).cloned().collect();
                (!proj.is_empty()).then_some(proj)
            });
            match projected {
                Some(proj) => delta_next.push(proj),
                None => {
                    from_step[id] = true;
                    delta_next.push(step(p, &s.delta[id], e));
                }
            }
        }
        let closed: Vec<bool> = delta_next.iter().map(has_closed).collect();

        let mut phi = vec![0u64; n_stmts];
        for (id, st) in p.statements.iter().enumerate() {
            let rule = &p.rules[st.rule];
            let bit = 1u64 << st.local;
            let reset = rule.statements.iter().any(|&other| {
                if !closed[other] {
                    return false;
                }
                let other_bit = 1u64 << p.statements[other].local;
                let together = psi[st.rule].iter().any(|&m| m & bit != 0 && m & other_bit != 0);
                let tracked = from_step[other] && s.phi[other] & bit != 0;
                together || tracked
            });
            phi[id] = if reset {
                full_mask(rule.statements.len())
            } else {
                let split = psi[st.rule].iter().filter(|&&m| m & bit == 0).fold(0u64, |acc, &m| acc | m);
                s.phi[id] & !split
            };
        }

        let delta: Vec<Vec<MatchingStructure>> = p
            .statements
            .iter()
            .enumerate()
            .map(|(id, st)| {
                let bit = 1u64 << st.local;
                let discharged = p.rules[st.rule].statements.iter().any(|&o| closed[o] && phi[o] & bit != 0);
                if discharged {
                    Vec::new()
                } else {
                    std::mem::take(&mut delta_next[id]).into_iter().collect()
                }
            })
            .collect();
        (delta, phi)
    }
}

impl LazyDfa for SyncAutomaton {
    type State = SyncState;

    fn initial(&self) -> SyncState {
        let p = &*self.problem;
        SyncState::Live(Arc::new(SyncData {
            upsilon: p.initial_structures(),
            pending: Vec::new(),
            delta: vec![Vec::new(); p.statements.len()],
            phi: p.statements.iter().map(|st| full_mask(p.rules[st.rule].statements.len())).collect(),
        }))
    }

    fn successor(&self, state: &SyncState, event: &Event) -> SyncState {
        match state {
            SyncState::Bottom => SyncState::Bottom,
            SyncState::Live(d) => self.succ(d, event),
        }
    }

    fn is_final(&self, state: &SyncState) -> bool {
        match state {
            SyncState::Bottom => false,
            SyncState::Live(d) => {
                !d.upsilon.iter().any(|m| m.is_active())
                    && d.pending.is_empty()
                    && d.delta.iter().all(|s| s.is_empty())
            }
        }
    }

    fn sink(&self) -> Option<SyncState> {
        Some(SyncState::Bottom)
    }

    fn is_dead(&self, state: &SyncState) -> bool {
        matches!(state, SyncState::Bottom)
    }

    fn summary(&self, state: &SyncState) -> String {
        match state {
            SyncState::Bottom => "⊥".to_string(),
            SyncState::Live(d) => {
                let active = d.upsilon.iter().filter(|m| m.is_active()).count();
                let sizes: Vec<String> = d.delta.iter().map(|s| s.len().to_string()).collect();
                match self.mode {
                    DeltaMode::PerTrigger => {
                        format!("|Υ|={} active={} pending={}", d.upsilon.len(), active, d.pending.len())
                    }
                    DeltaMode::Summary => {
                        format!("|Υ|={} active={} Δ=[{}]", d.upsilon.len(), active, sizes.join(","))
                    }
                }
            }
        }
    }
}
