//! One function per acceptance criterion. Each returns a short summary on
//! success and the first counterexamples on failure.

use std::collections::HashSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tbsynth::arena::{
    build_arena, play_outcome, read_play, GameArena, GameContext, Move, Player, Pruned, Round,
};
use tbsynth::automaton::{
    accepts, complement, explore, full_alphabet, intersect, planning_automaton, LazyDfa, SyncAutomaton, TvAutomaton,
};
use tbsynth::controller::{build_controller, exhaustive_check, simulate, EvePolicy};
use tbsynth::dbm::{end_term, init_dbm, start_term, Bound, TermSet};
use tbsynth::events::{Event, EventSequence, Signature};
use tbsynth::format::PlanDocument;
use tbsynth::matching::{CompiledProblem, MatchingStructure};
use tbsynth::model::{desugar_durations, window, GameSpec, PlanningProblem};
use tbsynth::oracle::{for_each_sequence, is_solution_plan, minimax_winner, EnumBounds, Verdict};
use tbsynth::solver::{attractor, check_determinacy, extract_strategy, winner};

use super::{corpus_dir, load};

pub type Outcome = Result<String, String>;

const MAX_REPORTED: usize = 5;

fn fail(mut found: Vec<String>) -> Outcome {
    found.truncate(MAX_REPORTED);
    Err(found.join("; "))
}

fn within(limit: Duration, start: Instant, summary: String) -> Outcome {
    let t = start.elapsed();
    if t > limit {
        return Err(format!("{summary}, but took {t:.2?} (limit {limit:?})"));
    }
    Ok(format!("{summary} in {t:.2?}"))
}

pub fn problems() -> Vec<(String, PlanningProblem)> {
    load("problems").into_iter().map(|(n, d)| (n, d.problem().unwrap())).collect()
}

pub fn games() -> Vec<(String, GameSpec)> {
    load("games").into_iter().map(|(n, d)| (n, d.game().unwrap())).collect()
}

pub fn solved(game: &GameSpec) -> (GameContext, Pruned<tbsynth::arena::GameDfa>, GameArena) {
    let ctx = GameContext::new(game);
    let (dfa, arena) = build_arena(&ctx).unwrap();
    (ctx, dfa, arena)
}

pub fn worked_example() -> Outcome {
    let start = Instant::now();
    let dir = corpus_dir("worked");
    let spec = tbsynth::format::SpecDocument::parse(&std::fs::read_to_string(dir.join("three_var.json")).unwrap())
        .unwrap()
        .problem()
        .unwrap();
    let plan = PlanDocument::parse(&std::fs::read_to_string(dir.join("three_var.plan.json")).unwrap()).unwrap();
    let sig = Signature::new(&spec.variables);
    let seq = plan.sequence(&sig).unwrap();

    let rule = &spec.rules[0];
    let d = init_dbm(&rule.statements[0], rule.trigger.as_ref().unwrap(), &spec.variables).unwrap();
    let (s, e) = (start_term, end_term);
    let expected = [((e(0), s(1)), 14), ((s(1), e(0)), -4), ((e(0), e(2)), 0), ((e(3), s(2)), 3), ((s(2), e(3)), 0)];
    let mut bad = Vec::new();
    for r in 0..d.dim() {
        for c in 0..d.dim() {
            let want = if r == c {
                Bound::ZERO
            } else {
                expected.iter().find(|(k, _)| *k == (r, c)).map_or(Bound::INF, |(_, v)| Bound::finite(*v))
            };
            if d.get(r, c) != want {
                bad.push(format!("D[{r},{c}] = {} expected {want}", d.get(r, c)));
            }
        }
    }
    let w = window(&desugar_durations(&spec));
    if w != 17 {
        bad.push(format!("window {w} expected 17"));
    }
    if !is_solution_plan(&seq, &spec).unwrap() {
        bad.push("oracle rejects the plan".into());
    }
    if !accepts(&planning_automaton(&spec).unwrap(), &seq) {
        bad.push("automaton rejects the plan".into());
    }
    if !bad.is_empty() {
        return fail(bad);
    }
    within(Duration::from_secs(1), start, "dbm exact, window 17, plan accepted by both".into())
}

pub fn master_equivalence() -> Outcome {
    let start = Instant::now();
    let corpus = problems();
    if corpus.len() < 5 {
        return Err(format!("only {} problems in the corpus", corpus.len()));
    }
    let mut bad = Vec::new();
    let mut total = 0;
    for (name, problem) in &corpus {
        let sig = Signature::new(&problem.variables);
        let a = planning_automaton(problem).unwrap();
        total += for_each_sequence(&sig, &EnumBounds::new(4, 2), |seq| {
            let want = is_solution_plan(seq, problem).unwrap();
            if accepts(&a, seq) != want {
                bad.push(format!("{name}: oracle={want} on {}", sig.show_sequence(seq)));
            }
        })
        .unwrap();
    }
    if !bad.is_empty() {
        return fail(bad);
    }
    within(Duration::from_secs(60), start, format!("{} problems, {total} sequences, 0 disagreements", corpus.len()))
}

/// Exactly one successor per state and symbol, dead states absorbing and
/// non-final, for an explored automaton.
fn check_explored<A: LazyDfa>(name: &str, dfa: &A, alphabet: &[Event], bad: &mut Vec<String>) -> usize {
    let Ok(x) = explore(dfa, |_| alphabet.to_vec(), 200_000) else {
        bad.push(format!("{name}: exploration budget exceeded"));
        return 0;
    };
    if x.edges.len() != x.states.len() * alphabet.len() {
        bad.push(format!("{name}: {} edges for {} states", x.edges.len(), x.states.len()));
    }
    let mut seen = HashSet::new();
    for (from, e, to) in &x.edges {
        if !seen.insert((*from, e.clone())) {
            bad.push(format!("{name}: two successors from {from}"));
        }
        if dfa.successor(&x.states[*from], e) != x.states[*to] {
            bad.push(format!("{name}: successor of {from} is not stable"));
        }
        if dfa.is_dead(&x.states[*from]) && !dfa.is_dead(&x.states[*to]) {
            bad.push(format!("{name}: dead state {from} escapes to {to}"));
        }
    }
    for (i, s) in x.states.iter().enumerate() {
        if dfa.is_dead(s) && dfa.is_final(s) {
            bad.push(format!("{name}: dead state {i} is final"));
        }
    }
    x.states.len()
}

pub fn determinism() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut explored = 0;
    let mut words = 0;
    for (name, problem) in problems() {
        let desugared = desugar_durations(&problem);
        let compiled = Arc::new(CompiledProblem::new(&desugared).unwrap());
        let sig = compiled.sig.clone();
        let vars: Vec<_> = sig.var_ids().collect();
        let alphabet = full_alphabet(&sig, &vars, compiled.horizon.max(1));
        let a = planning_automaton(&problem).unwrap();
        check_explored(&name, &a, &alphabet, &mut bad);
        explored += 1;
        let cc = complement(complement(&a));
        words += for_each_sequence(&sig, &EnumBounds::new(3, 2), |seq| {
            if accepts(&cc, seq) != accepts(&a, seq) {
                bad.push(format!("{name}: double complement differs on {}", sig.show_sequence(seq)));
            }
        })
        .unwrap();
    }
    for (name, game) in games() {
        let (sys, env) = tbsynth::arena::game_sides(&game);
        for (side, p) in [("system", sys), ("domain", env)] {
            let compiled = Arc::new(CompiledProblem::new(&p).unwrap());
            let sig = compiled.sig.clone();
            let vars: Vec<_> = sig.var_ids().collect();
            let alphabet = full_alphabet(&sig, &vars, compiled.horizon.max(1));
            let a = intersect(SyncAutomaton::new(compiled), TvAutomaton::new(sig.clone(), vars, false));
            check_explored(&format!("{name}/{side}"), &a, &alphabet, &mut bad);
            explored += 1;
        }
    }
    if !bad.is_empty() {
        return fail(bad);
    }
    within(
        Duration::from_secs(10),
        start,
        format!("{explored} automata explored, {words} words through double complement, 0 violations"),
    )
}

/// Walks `plays` random paths through the arena. At every state that closes
/// a round, arena finality must match the game automaton on the outcome of
/// the rounds played so far.
pub fn arena_soundness_for(game: &GameSpec, plays: usize, seed: u64) -> Result<usize, Vec<String>> {
    let (ctx, dfa, arena) = solved(game);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    let mut compared = 0;
    for _ in 0..plays {
        let len = rng.gen_range(2..=20);
        let mut q = arena.initial;
        let mut moves: Vec<Move> = Vec::new();
        while moves.len() < len {
            let Some((m, t)) = arena.edges[q].choose(&mut rng) else { break };
            moves.push(m.clone());
            q = *t;
            if !arena.states[q].is_original() {
                continue;
            }
            let rounds: Vec<Round> = moves
                .chunks(2)
                .map(|p| match p {
                    [Move::Charlie(c), Move::Eve(e)] => Round::new(c.clone(), e.clone()),
                    _ => unreachable!("moves alternate"),
                })
                .collect();
            let seq = match play_outcome(&ctx, &rounds) {
                Ok(seq) => seq,
                Err((i, err)) => {
                    bad.push(format!("arena play has no outcome at round {i}: {err}"));
                    break;
                }
            };
            if read_play(&arena, &moves) != Ok(q) {
                bad.push("read_play disagrees with the walk".into());
            }
            let want = accepts(&dfa.inner, &seq);
            if arena.is_final(q) != want {
                bad.push(format!("final={} base={want} on {}", arena.is_final(q), ctx.sig.show_sequence(&seq)));
            }
            compared += 1;
        }
    }
    if bad.is_empty() {
        Ok(compared)
    } else {
        Err(bad)
    }
}

pub fn arena_soundness() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut compared = 0;
    let corpus = games();
    for (i, (name, game)) in corpus.iter().enumerate() {
        match arena_soundness_for(game, 1000, 0x5eed + i as u64) {
            Ok(n) => compared += n,
            Err(b) => bad.extend(b.into_iter().map(|m| format!("{name}: {m}"))),
        }
    }
    if !bad.is_empty() {
        return fail(bad);
    }
    within(
        Duration::from_secs(30),
        start,
        format!("{} games x 1000 plays, {compared} round boundaries compared, 0 disagreements", corpus.len()),
    )
}

pub fn prune_preservation() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut total = 0;
    let mut detoured = 0;
    for (name, game) in games() {
        let (ctx, dfa, _) = solved(&game);
        total += for_each_sequence(&ctx.sig, &EnumBounds::new(4, 2), |seq| {
            let d = dfa.detour(seq);
            detoured += (d.len() != seq.len()) as usize;
            let want = accepts(&dfa.inner, seq);
            if dfa.accepts(&d) != want {
                bad.push(format!("{name}: base={want} on {}", ctx.sig.show_sequence(seq)));
            }
        })
        .unwrap();
    }
    if !bad.is_empty() {
        return fail(bad);
    }
    within(
        Duration::from_secs(60),
        start,
        format!("{total} sequences ({detoured} rewritten by detours), 0 disagreements"),
    )
}

pub fn solver_correctness() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut verdicts = Vec::new();
    for (name, game) in games() {
        let (_, _, arena) = solved(&game);
        let attr = attractor(&arena);
        let (wc, we) = (attr.winning_c_set(), attr.winning_e_set());
        if wc.len() + we.len() != arena.len() || wc.iter().any(|q| we.binary_search(q).is_ok()) {
            bad.push(format!("{name}: winning regions do not partition the arena"));
        }
        if let Err(e) = check_determinacy(&arena, &attr) {
            bad.push(format!("{name}: {e}"));
        }
        let w = winner(&arena, &attr);
        let m = minimax_winner(&game, 6).unwrap();
        let agree = match m {
            Verdict::Charlie => w == Player::Charlie,
            Verdict::Eve => w == Player::Eve,
            Verdict::Unknown => true,
        };
        if !agree {
            bad.push(format!("{name}: solver says {w}, minimax says {m:?}"));
        }
        verdicts.push(format!("{name}={w}/{m:?}"));
    }
    if !bad.is_empty() {
        return fail(bad);
    }
    within(Duration::from_secs(60), start, format!("solver/minimax(6): {}", verdicts.join(" ")))
}

pub fn controller_soundness() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut notes = Vec::new();
    for (name, game) in games() {
        let (ctx, _, arena) = solved(&game);
        let attr = attractor(&arena);
        if winner(&arena, &attr) != Player::Charlie {
            continue;
        }
        let ctrl = build_controller(&arena, &attr, &extract_strategy(&arena, &attr)).unwrap();
        let (miss, count) = exhaustive_check(&ctrl, arena.len());
        if let Some(path) = miss {
            let shown: Vec<String> = path.iter().map(|m| ctx.show_move(&Move::Eve(m.clone()))).collect();
            bad.push(format!("{name}: goal missed after Eve plays {}", shown.join(", ")));
        }
        for seed in 0..1000 {
            let p = simulate(&ctrl, &ctx, &mut EvePolicy::random(seed), arena.len()).unwrap();
            if !p.reached_goal {
                bad.push(format!("{name}: seed {seed} misses the goal on {}", ctx.sig.show_sequence(&p.plan)));
                break;
            }
        }
        notes.push(format!("{name}: {count} playouts"));
    }
    if !bad.is_empty() {
        return fail(bad);
    }
    within(Duration::from_secs(120), start, format!("{} + 1000 random each", notes.join(", ")))
}

/// Every run of the single statement `stmt` along `seq`, as the list of
/// structures after each event.
fn runs(p: &CompiledProblem, stmt: usize, seq: &EventSequence, mut f: impl FnMut(&[MatchingStructure])) {
    fn go(
        p: &CompiledProblem,
        seq: &EventSequence,
        path: &mut Vec<MatchingStructure>,
        f: &mut dyn FnMut(&[MatchingStructure]),
    ) {
        let i = path.len() - 1;
        if i == seq.len() {
            f(path);
            return;
        }
        let cur = path[i].clone();
        for next in cur.successors(p, &seq.events[i]) {
            path.push(next);
            go(p, seq, path, f);
            path.pop();
        }
    }
    go(p, seq, &mut vec![MatchingStructure::initial(p, stmt)], &mut f);
}

/// Along a run, once the trigger has been matched for longer than the
/// window, some structure since the trigger match was residual.
pub fn residual_existence_in(p: &CompiledProblem, path: &[MatchingStructure]) -> Result<bool, String> {
    let Some(trig) = path.iter().position(|ms| !ms.matched.is_empty()) else { return Ok(false) };
    let mut checked = false;
    for n in trig..path.len() {
        if !path[n].is_active() || path[n].clock <= p.window {
            continue;
        }
        checked = true;
        if !path[trig..n].iter().any(MatchingStructure::is_residual) {
            return Err(format!("no residual structure between positions {trig} and {n}"));
        }
    }
    Ok(checked)
}

/// From a residual structure, an event that forces no end is admissible,
/// the empty match applies, and only the clock and the lower bounds from
/// matched to unmatched terms move, towards +∞.
pub fn residual_persistence_at(p: &CompiledProblem, ms: &MatchingStructure, event: &Event) -> Result<(), String> {
    let st = p.statement(ms);
    if !ms.forced_ends(st, event).is_empty() {
        return Err("event forces an end".into());
    }
    if !ms.admissible(event) {
        return Err("event not admissible".into());
    }
    if !ms.is_i_match(st, event, TermSet::EMPTY) {
        return Err("empty match not available".into());
    }
    let next = ms.apply(p, event, TermSet::EMPTY).map_err(|e| e.to_string())?;
    if next.matched != ms.matched || !next.is_residual() {
        return Err("structure left the residual state".into());
    }
    for r in 0..ms.dbm.dim() {
        for c in 0..ms.dbm.dim() {
            let (a, b) = (ms.dbm.get(r, c), next.dbm.get(r, c));
            let relaxing = ms.matched.contains(r) && !ms.matched.contains(c);
            if (relaxing && b < a) || (!relaxing && a != b) {
                return Err(format!("entry [{r},{c}] moved from {a} to {b}"));
            }
        }
    }
    Ok(())
}

pub fn residual_lemmas() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut old_runs = 0usize;
    let mut pairs = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0x12e5);
    for (name, problem) in problems() {
        let p = CompiledProblem::new(&desugar_durations(&problem)).unwrap();
        let sig = p.sig.clone();
        let bounds = EnumBounds::new(5, 2);
        for_each_sequence(&sig, &bounds, |seq| {
            for stmt in 0..p.statements.len() {
                runs(&p, stmt, seq, |path| match residual_existence_in(&p, path) {
                    Ok(true) => old_runs += 1,
                    Ok(false) => {}
                    Err(e) => bad.push(format!("{name}: {e} on {}", sig.show_sequence(seq))),
                });
            }
        })
        .unwrap();

        let vars: Vec<_> = sig.var_ids().collect();
        let alphabet = full_alphabet(&sig, &vars, p.horizon + 2);
        let mut found = 0;
        for _ in 0..20_000 {
            if found >= 1000 || p.statements.is_empty() {
                break;
            }
            let stmt = rng.gen_range(0..p.statements.len());
            let mut ms = MatchingStructure::initial(&p, stmt);
            for _ in 0..rng.gen_range(1..=6) {
                let e = alphabet.choose(&mut rng).unwrap();
                match ms.successors(&p, e).choose(&mut rng) {
                    Some(next) => ms = next.clone(),
                    None => break,
                }
                if ms.is_residual() {
                    let st = p.statement(&ms);
                    let free: Vec<&Event> = alphabet.iter().filter(|e| ms.forced_ends(st, e).is_empty()).collect();
                    let e = free.choose(&mut rng).unwrap();
                    found += 1;
                    if let Err(err) = residual_persistence_at(&p, &ms, e) {
                        bad.push(format!("{name}: {err} for {} after {}", ms.render(&p), sig.show_event(e)));
                    }
                    break;
                }
            }
        }
        pairs += found;
    }
    if !bad.is_empty() {
        return fail(bad);
    }
    if pairs == 0 || old_runs == 0 {
        return Err(format!("vacuous: {old_runs} old runs, {pairs} residual pairs"));
    }
    within(
        Duration::from_secs(60),
        start,
        format!("{old_runs} runs past the window, {pairs} residual structure/event pairs, 0 violations"),
    )
}

/// Pinned regression budgets: explored states of the planning automaton of
/// each corpus problem, and arena sizes of each corpus game.
pub const PROBLEM_BUDGETS: &[(&str, usize)] = &[
    ("deadline", 75),
    ("durations", 20),
    ("either", 150),
    ("meets", 30),
    ("outlive", 32),
    ("precedes", 600),
    ("successor", 12),
];
pub const ARENA_BUDGETS: &[(&str, usize)] = &[
    ("alarm", 96),
    ("free", 60),
    ("handoff", 1440),
    ("job", 3750),
    ("respond", 2400),
    ("stall", 280),
    ("unsatisfiable", 130),
];

pub fn planning_state_count(problem: &PlanningProblem) -> Result<usize, String> {
    let desugared = desugar_durations(problem);
    let compiled = CompiledProblem::new(&desugared).unwrap();
    let vars: Vec<_> = compiled.sig.var_ids().collect();
    let alphabet = full_alphabet(&compiled.sig, &vars, compiled.horizon.max(1));
    let a = planning_automaton(problem).unwrap();
    explore(&a, |_| alphabet.clone(), 200_000).map(|x| x.state_count()).map_err(|e| e.to_string())
}

pub fn size_sanity() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut sizes = Vec::new();
    for (name, problem) in problems() {
        let mut counts = Vec::new();
        for k in 0..=problem.rules.len() {
            let prefix = PlanningProblem::new(problem.variables.clone(), problem.rules[..k].to_vec());
            match planning_state_count(&prefix) {
                Ok(n) => counts.push(n),
                Err(e) => {
                    bad.push(format!("{name} with {k} rules: {e}"));
                    break;
                }
            }
        }
        if counts.len() <= problem.rules.len() {
            continue;
        }
        if counts.windows(2).any(|w| w[1] < w[0]) {
            bad.push(format!("{name}: state counts {counts:?} shrink with added rules"));
        }
        let n = *counts.last().unwrap();
        match PROBLEM_BUDGETS.iter().find(|(b, _)| *b == name) {
            Some(&(_, limit)) if n > limit => bad.push(format!("{name}: {n} states over budget {limit}")),
            None => bad.push(format!("{name}: no budget pinned ({n} states)")),
            _ => {}
        }
        sizes.push(format!("{name}={n}"));
    }
    for (name, game) in games() {
        let mut counts = Vec::new();
        for k in 0..=game.system_rules.len() {
            let mut prefix = game.clone();
            prefix.system_rules.truncate(k);
            counts.push(solved(&prefix).2.len());
        }
        if counts.windows(2).any(|w| w[1] < w[0]) {
            bad.push(format!("{name}: arena sizes {counts:?} shrink with added rules"));
        }
        let n = *counts.last().unwrap();
        match ARENA_BUDGETS.iter().find(|(b, _)| *b == name) {
            Some(&(_, limit)) if n > limit => bad.push(format!("{name}: arena of {n} states over budget {limit}")),
            None => bad.push(format!("{name}: no arena budget pinned ({n} states)")),
            _ => {}
        }
        sizes.push(format!("{name}={n}"));
    }
    if !bad.is_empty() {
        return fail(bad);
    }
    within(Duration::from_secs(60), start, format!("within budgets: {}", sizes.join(" ")))
}
