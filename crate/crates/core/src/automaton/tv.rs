//! Per-variable token bookkeeping: values, transition functions and the
//! boundary conditions of well-formed sequences.

use super::LazyDfa;
use crate::events::{Event, Signature, ValueId, VarId};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TvState {
    Bottom,
    Live {
        /// At least one event has been read.
        started: bool,
        /// Some tracked token ended without a successor; nothing may follow.
        finished: bool,
        /// Open value per tracked variable.
        open: Vec<Option<ValueId>>,
    },
}

/// Tracks a subset of the variables. With `closed_final` every tracked
/// variable must be closed at the end; otherwise only the sequence so far is
/// checked.
#[derive(Debug, Clone)]
pub struct TvAutomaton {
    sig: Signature,
    tracked: Vec<VarId>,
    closed_final: bool,
}

impl TvAutomaton {
    pub fn new(sig: Signature, tracked: Vec<VarId>, closed_final: bool) -> Self {
        TvAutomaton { sig, tracked, closed_final }
    }

    pub fn all(sig: Signature) -> Self {
        let tracked = sig.var_ids().collect();
        TvAutomaton { sig, tracked, closed_final: true }
    }

    pub fn tracked(&self) -> &[VarId] {
        &self.tracked
    }

    fn succ(&self, started: bool, finished: bool, open: &[Option<ValueId>], e: &Event) -> TvState {
        if finished {
            return TvState::Bottom;
        }
        let mut counts = vec![(0u8, 0u8); self.tracked.len()];
        for a in &e.actions {
            if let Some(i) = self.tracked.iter().position(|&x| x == a.var) {
                if a.is_start() {
                    counts[i].0 += 1;
                } else {
                    counts[i].1 += 1;
                }
            }
        }
        if counts.iter().any(|&(s, t)| s > 1 || t > 1) {
            return TvState::Bottom;
        }
        let mut next = open.to_vec();
        let mut now_finished = false;
        for (i, &x) in self.tracked.iter().enumerate() {
            let (start, end) = (e.start_of(x), e.end_of(x));
            if !started {
                if end.is_some() {
                    return TvState::Bottom;
                }
                next[i] = start;
                continue;
            }
            match (open[i], end, start) {
                (_, None, None) => {}
                (Some(v), Some(w), restart) if v == w => match restart {
                    Some(v2) if self.sig.var(x).allows(v, v2) => next[i] = Some(v2),
                    Some(_) => return TvState::Bottom,
                    None => {
                        next[i] = None;
                        now_finished = true;
                    }
                },
                _ => return TvState::Bottom,
            }
        }
        TvState::Live { started: true, finished: now_finished, open: next }
    }
}

impl LazyDfa for TvAutomaton {
    type State = TvState;

    fn initial(&self) -> TvState {
        TvState::Live { started: false, finished: false, open: vec![None; self.tracked.len()] }
    }

    fn successor(&self, state: &TvState, event: &Event) -> TvState {
        match state {
            TvState::Bottom => TvState::Bottom,
            TvState::Live { started, finished, open } => self.succ(*started, *finished, open, event),
        }
    }

    fn is_final(&self, state: &TvState) -> bool {
        match state {
            TvState::Bottom => false,
            TvState::Live { open, .. } => !self.closed_final || open.iter().all(Option::is_none),
        }
    }

    fn sink(&self) -> Option<TvState> {
        Some(TvState::Bottom)
    }

    fn is_dead(&self, state: &TvState) -> bool {
        matches!(state, TvState::Bottom)
    }

    fn summary(&self, state: &TvState) -> String {
        match state {
            TvState::Bottom => "⊥".to_string(),
            TvState::Live { open, finished, .. } => {
                let parts: Vec<String> = self
                    .tracked
                    .iter()
                    .zip(open)
                    .map(|(&x, v)| {
                        let info = self.sig.var(x);
                        match v {
                            Some(v) => format!("{}={}", info.name, info.values[v.index()]),
                            None => format!("{}=·", info.name),
                        }
                    })
                    .collect();
                format!("{}{}", parts.join(" "), if *finished { " (ended)" } else { "" })
            }
        }
    }
}
