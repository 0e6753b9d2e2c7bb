//! Reachability games on the arena: attractor, winning regions and a
//! rank-decreasing strategy for Charlie.

use std::collections::{BTreeMap, VecDeque};

use crate::arena::{Arena, Move, MoveC, Player};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttractorResult {
    /// Least `i` with the state in `Attr^i(F)`; `None` outside the attractor.
    pub rank: Vec<Option<usize>>,
    /// Index at which the iteration becomes stationary.
    pub stabilization: usize,
}

impl AttractorResult {
    pub fn winning_c(&self, q: usize) -> bool {
        self.rank[q].is_some()
    }

    pub fn winning_c_set(&self) -> Vec<usize> {
        (0..self.rank.len()).filter(|&q| self.winning_c(q)).collect()
    }

    pub fn winning_e_set(&self) -> Vec<usize> {
        (0..self.rank.len()).filter(|&q| !self.winning_c(q)).collect()
    }

    pub fn summary(&self) -> String {
        let wc = self.winning_c_set().len();
        format!("|W_C|={} |W_E|={} stabilization={}", wc, self.rank.len() - wc, self.stabilization)
    }
}

/// Backward induction with predecessor counters. Charlie states join as
/// soon as one successor is attracted, Eve states once all of them are; an
/// Eve state without moves is attracted at rank 1, a Charlie state without
/// moves only if final.
pub fn attractor<Q>(arena: &Arena<Q>) -> AttractorResult {
    let n = arena.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (q, es) in arena.edges.iter().enumerate() {
        for &(_, t) in es {
            preds[t].push(q);
        }
    }
    let mut remaining: Vec<usize> = arena.edges.iter().map(Vec::len).collect();
    let mut rank: Vec<Option<usize>> = vec![None; n];
    let mut queue = VecDeque::new();
    for q in 0..n {
        if arena.is_final(q) {
            rank[q] = Some(0);
            queue.push_back(q);
        }
    }
    for q in 0..n {
        if rank[q].is_none() && arena.turn(q) == Player::Eve && remaining[q] == 0 {
            rank[q] = Some(1);
            queue.push_back(q);
        }
    }
    let mut stabilization = 0;
    while let Some(t) = queue.pop_front() {
        let r = rank[t].expect("queued states are ranked");
        stabilization = stabilization.max(r);
        for &p in &preds[t] {
            if rank[p].is_some() {
                continue;
            }
            let attract = match arena.turn(p) {
                Player::Charlie => true,
                Player::Eve => {
                    remaining[p] -= 1;
                    remaining[p] == 0
                }
            };
            if attract {
                rank[p] = Some(r + 1);
                queue.push_back(p);
            }
        }
    }
    AttractorResult { rank, stabilization }
}

pub fn winner<Q>(arena: &Arena<Q>, attr: &AttractorResult) -> Player {
    if attr.winning_c(arena.initial) {
        Player::Charlie
    } else {
        Player::Eve
    }
}

/// Every state is in exactly one winning region, and the regions are
/// closed under the moves of their owners.
pub fn check_determinacy<Q>(arena: &Arena<Q>, attr: &AttractorResult) -> Result<(), String> {
    for q in 0..arena.len() {
        if arena.is_final(q) {
            continue;
        }
        let succ: Vec<bool> = arena.edges[q].iter().map(|&(_, t)| attr.winning_c(t)).collect();
        let forced = match arena.turn(q) {
            Player::Charlie => succ.iter().any(|&w| w),
            Player::Eve => succ.iter().all(|&w| w),
        };
        if forced != attr.winning_c(q) {
            return Err(format!("state {q} is misclassified"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StrategyTable {
    pub moves: BTreeMap<usize, MoveC>,
}

impl StrategyTable {
    pub fn get(&self, q: usize) -> Option<&MoveC> {
        self.moves.get(&q)
    }
}

/// For a Charlie state of rank `r > 0`, the least move into rank `< r`; for
/// a final Charlie state, the least move that stays winning, if any.
pub fn extract_strategy<Q>(arena: &Arena<Q>, attr: &AttractorResult) -> StrategyTable {
    let mut moves = BTreeMap::new();
    for q in 0..arena.len() {
        if arena.turn(q) != Player::Charlie {
            continue;
        }
        let Some(r) = attr.rank[q] else { continue };
        let pick = arena.edges[q].iter().find(|&&(_, t)| match attr.rank[t] {
            Some(rt) => r == 0 || rt < r,
            None => false,
        });
        if let Some((Move::Charlie(m), _)) = pick {
            moves.insert(q, m.clone());
        }
    }
    StrategyTable { moves }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::fixtures::{free_game, unsatisfiable_game};
    use crate::arena::{build_arena, ArenaState, GameContext, MoveE, Shape};
    use crate::events::ActionSet;

    /// Hand-made arena: 0 (C) -a-> 1 (E), 0 -b-> 2 (C, final), 1 -> 2, 1 -> 3 (C, dead end).
    fn toy() -> Arena<u8> {
        let shape = Shape { started: true, finished: false, open: vec![] };
        let c = |b: u8| ArenaState::Original { base: b, shape: shape.clone() };
        let e = |b: u8| ArenaState::AfterWait { base: b, shape: shape.clone(), wait: 1 };
        let w = |d| Move::Charlie(MoveC::Wait(d));
        let p = |d| Move::Eve(MoveE::PlayDelayed(d, ActionSet::new()));
        Arena {
            states: vec![c(0), e(1), c(2), c(3)],
            edges: vec![vec![(w(1), 1), (w(2), 2)], vec![(p(1), 2), (p(2), 3)], vec![], vec![]],
            finals: vec![false, false, true, false],
            initial: 0,
        }
    }

    #[test]
    fn toy_ranks_and_strategy() {
        let a = toy();
        let attr = attractor(&a);
        assert_eq!(attr.rank, vec![Some(1), None, Some(0), None]);
        assert_eq!(winner(&a, &attr), Player::Charlie);
        check_determinacy(&a, &attr).unwrap();
        let s = extract_strategy(&a, &attr);
        assert_eq!(s.get(0), Some(&MoveC::Wait(2)));
        assert_eq!(s.get(2), None);
    }

    #[test]
    fn no_finals_means_eve() {
        let mut a = toy();
        a.finals = vec![false; 4];
        let attr = attractor(&a);
        assert_eq!(winner(&a, &attr), Player::Eve);
        assert!(attr.winning_c_set().is_empty());
    }

    #[test]
    fn final_initial_state_means_charlie() {
        let mut a = toy();
        a.finals[0] = true;
        let attr = attractor(&a);
        assert_eq!(attr.rank[0], Some(0));
        assert_eq!(winner(&a, &attr), Player::Charlie);
    }

    #[test]
    fn eve_dead_end_is_attracted() {
        let mut a = toy();
        a.edges[1].clear();
        a.edges[0].truncate(1);
        let attr = attractor(&a);
        assert_eq!(attr.rank[1], Some(1));
        assert_eq!(attr.rank[0], Some(2));
        assert_eq!(extract_strategy(&a, &attr).get(0), Some(&MoveC::Wait(1)));
    }

    #[test]
    fn small_games() {
        for (game, expected) in [(free_game(), Player::Charlie), (unsatisfiable_game(), Player::Eve)] {
            let ctx = GameContext::new(&game);
            let (_, arena) = build_arena(&ctx).unwrap();
            let attr = attractor(&arena);
            check_determinacy(&arena, &attr).unwrap();
            assert_eq!(winner(&arena, &attr), expected);
            let s = extract_strategy(&arena, &attr);
            for (&q, m) in &s.moves {
                let t = arena.successor(q, &Move::Charlie(m.clone())).unwrap();
                let (rq, rt) = (attr.rank[q].unwrap(), attr.rank[t].unwrap());
                assert!(rq == 0 || rt < rq);
            }
        }
    }
}
