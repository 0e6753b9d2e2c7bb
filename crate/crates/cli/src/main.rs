use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tbsynth::arena::{build_arena, round_outcome, ArenaBuildError, ArenaError, GameArena, GameContext, Round};
use tbsynth::automaton::{
    accepts, explore, full_alphabet, full_alphabet_len, planning_automaton, state_budget, ExploreError, LazyDfa,
};
use tbsynth::controller::{build_controller, transcript_line, MooreController, CONTROLLER_FORMAT};
use tbsynth::events::{EventSequence, Signature};
use tbsynth::format::{Owner, PlanDocument, Role, SpecDocument};
use tbsynth::matching::CompileError;
use tbsynth::model::{constants, desugar_durations, GameSpec, PlanningProblem};
use tbsynth::oracle::{for_each_sequence, is_solution_plan, EnumBounds, OracleError};
use tbsynth::solver::{attractor, extract_strategy, winner, AttractorResult};

#[derive(Parser)]
#[command(name = "tbsynth", version, about = "Controller synthesis for timeline-based games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a specification and print its constants.
    Validate { spec: PathBuf },
    /// Judge a plan with both the oracle and the automaton.
    CheckPlan { spec: PathBuf, plan: PathBuf },
    /// Explore the planning automaton, or the arena of a game.
    Compile {
        spec: PathBuf,
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Largest delay in the explored alphabet; defaults to the horizon.
        #[arg(long)]
        max_delta: Option<u64>,
        /// Treat the specification as a game even without external
        /// variables or domain rules.
        #[arg(long)]
        game: bool,
    },
    /// Print the winner of a game. Exit status 0 for Charlie, 1 for Eve.
    Winner { spec: PathBuf },
    /// Write a controller for a game Charlie wins.
    Synth {
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Play Eve against the synthesized controller.
    Play {
        spec: PathBuf,
        /// Controller to play against; synthesized when missing.
        #[arg(long)]
        controller: Option<PathBuf>,
        #[arg(long, default_value = "transcript.jsonl")]
        transcript: PathBuf,
    },
    /// Compare automaton and oracle on every sequence within the bounds.
    OracleDiff {
        #[arg(required = true)]
        specs: Vec<PathBuf>,
        #[arg(long, default_value_t = 4)]
        max_len: usize,
        #[arg(long, default_value_t = 2)]
        max_delta: u64,
    },
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Guard(String),
    Disagreement(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) | Failure::Io(_) => 2,
            Failure::Disagreement(_) => 3,
            Failure::Guard(_) => 4,
        }
    }

    fn line(&self) -> String {
        let (kind, msg) = match self {
            Failure::Input(m) => ("input", m),
            Failure::Guard(m) => ("guard", m),
            Failure::Disagreement(m) => ("disagreement", m),
            Failure::Io(m) => ("io", m),
        };
        format!("tbsynth: error kind={kind} {msg}")
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<CompileError> for Failure {
    fn from(e: CompileError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Guard { .. } => Failure::Guard(e.to_string()),
            OracleError::Undeclared => Failure::Input(e.to_string()),
        }
    }
}

impl From<ExploreError> for Failure {
    fn from(e: ExploreError) -> Self {
        Failure::Guard(e.to_string())
    }
}

impl From<ArenaBuildError> for Failure {
    fn from(e: ArenaBuildError) -> Self {
        match e {
            ArenaBuildError::Arena(ArenaError::Budget { .. }) => Failure::Guard(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load_spec(path: &Path) -> Result<SpecDocument, Failure> {
    SpecDocument::parse(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn is_game(doc: &SpecDocument) -> bool {
    doc.variables.iter().any(|v| v.owner == Owner::External) || doc.rules.iter().any(|r| r.role == Role::Domain)
}

fn problem_of(doc: &SpecDocument) -> Result<PlanningProblem, Failure> {
    doc.problem().map_err(|e| Failure::Input(e.to_string()))
}

fn game_of(doc: &SpecDocument) -> Result<GameSpec, Failure> {
    doc.game().map_err(|e| Failure::Input(e.to_string()))
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

struct Solved {
    ctx: GameContext,
    arena: GameArena,
    attr: AttractorResult,
}

fn solve(game: &GameSpec) -> Result<Solved, Failure> {
    let ctx = GameContext::new(game);
    let (_, arena) = build_arena(&ctx)?;
    let attr = attractor(&arena);
    Ok(Solved { ctx, arena, attr })
}

fn controller_for(s: &Solved) -> Option<MooreController> {
    let strategy = extract_strategy(&s.arena, &s.attr);
    build_controller(&s.arena, &s.attr, &strategy).ok()
}

fn validate(spec: &Path) -> Result<u8, Failure> {
    let doc = load_spec(spec)?;
    let problem = problem_of(&doc)?;
    let c = constants(&desugar_durations(&problem));
    let kind = if is_game(&doc) {
        game_of(&doc)?;
        "game"
    } else {
        "problem"
    };
    println!("valid {kind}: {} variables, {} rules, window={} d={}", problem.variables.len(), problem.rules.len(), c.window, c.horizon);
    Ok(0)
}

fn check_plan(spec: &Path, plan: &Path) -> Result<u8, Failure> {
    let problem = problem_of(&load_spec(spec)?)?;
    let sig = Signature::new(&problem.variables);
    let doc = PlanDocument::parse(&read(plan)?).map_err(|e| Failure::Input(format!("{}: {e}", plan.display())))?;
    let seq = doc.sequence(&sig).map_err(|e| Failure::Input(e.to_string()))?;
    let solution = is_solution_plan(&seq, &problem)?;
    let accepted = accepts(&planning_automaton(&problem)?, &seq);
    println!("solution: {} / accepted: {}", yes_no(solution), yes_no(accepted));
    if solution != accepted {
        return Err(Failure::Disagreement(format!("oracle and automaton disagree on {}", sig.show_sequence(&seq))));
    }
    Ok(if solution { 0 } else { 1 })
}

const MAX_SYMBOLS: usize = 20_000;

fn compile(spec: &Path, dot: Option<&Path>, max_delta: Option<u64>, force_game: bool) -> Result<u8, Failure> {
    let doc = load_spec(spec)?;
    if force_game || is_game(&doc) {
        let s = solve(&game_of(&doc)?)?;
        println!("arena: {} d={}", s.arena.stats(), s.ctx.d);
        if let Some(path) = dot {
            fs::write(path, s.arena.to_dot(&s.ctx))?;
        }
        return Ok(0);
    }
    let problem = problem_of(&doc)?;
    let a = planning_automaton(&problem)?;
    let c = constants(&desugar_durations(&problem));
    let sig = Signature::new(&problem.variables);
    let vars: Vec<_> = sig.var_ids().collect();
    let delta = max_delta.unwrap_or(c.horizon).max(1);
    let symbols = full_alphabet_len(&sig, &vars, delta);
    if symbols > MAX_SYMBOLS {
        return Err(Failure::Guard(format!("alphabet of {symbols} symbols exceeds {MAX_SYMBOLS}; lower --max-delta")));
    }
    let alphabet = full_alphabet(&sig, &vars, delta);
    let x = explore(&a, |_| alphabet.clone(), state_budget())?;
    println!("automaton: {} symbols={} window={} d={}", x.stats(), alphabet.len(), c.window, c.horizon);
    if let Some(path) = dot {
        fs::write(path, x.to_dot(&sig, |s| a.summary(s), |s| a.is_dead(s)))?;
    }
    Ok(0)
}

fn print_winner(spec: &Path) -> Result<u8, Failure> {
    let s = solve(&game_of(&load_spec(spec)?)?)?;
    let w = winner(&s.arena, &s.attr);
    println!("{w}");
    eprintln!("tbsynth: info arena {} {}", s.arena.stats(), s.attr.summary());
    Ok(if w == tbsynth::arena::Player::Charlie { 0 } else { 1 })
}

fn synth(spec: &Path, output: &Path, dot: Option<&Path>) -> Result<u8, Failure> {
    let s = solve(&game_of(&load_spec(spec)?)?)?;
    let Some(ctrl) = controller_for(&s) else {
        println!("Eve");
        eprintln!("tbsynth: info no controller exists");
        return Ok(1);
    };
    fs::write(output, ctrl.to_json(&s.ctx.sig))?;
    if let Some(path) = dot {
        fs::write(path, ctrl.to_dot(&s.ctx.sig))?;
    }
    println!("controller: {} states written to {}", ctrl.states.len(), output.display());
    Ok(0)
}

/// Runs the play loop on `input`/`output`. Returns whether the goal was
/// reached.
fn play_loop(
    s: &Solved,
    ctrl: &MooreController,
    input: &mut dyn BufRead,
    output: &mut dyn Write,
    transcript: &mut dyn Write,
) -> Result<bool, Failure> {
    let sig = &s.ctx.sig;
    let mut state = ctrl.initial;
    let mut plan = EventSequence::default();
    let mut round_no = 0;
    loop {
        let st = &ctrl.states[state];
        if st.goal {
            writeln!(output, "goal reached: {}", sig.show_sequence(&plan))?;
            return Ok(true);
        }
        let Some(charlie) = st.output.clone() else {
            writeln!(output, "the controller has no move")?;
            return Ok(false);
        };
        let legal = ctrl.legal(state);
        writeln!(output, "round {round_no}: Charlie plays {}", tbsynth::arena::show_move_c(sig, &charlie))?;
        for (i, m) in legal.iter().enumerate() {
            writeln!(output, "  [{i}] {}", tbsynth::arena::show_move_e(sig, m))?;
        }
        let pick = loop {
            write!(output, "eve> ")?;
            output.flush()?;
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                writeln!(output)?;
                return Ok(false);
            }
            let line = line.trim();
            if line == "q" || line == "quit" {
                return Ok(false);
            }
            match line.parse::<usize>() {
                Ok(i) if i < legal.len() => break i,
                _ => writeln!(output, "enter a number from 0 to {}, or q", legal.len().saturating_sub(1))?,
            }
        };
        let eve = legal[pick].clone();
        let round = Round::new(charlie, eve.clone());
        plan = round_outcome(&s.ctx, &plan, &round).map_err(|e| Failure::Input(e.to_string()))?;
        let (next, _) = ctrl.step(state, &eve, sig).map_err(|e| Failure::Input(e.to_string()))?;
        writeln!(transcript, "{}", transcript_line(&s.ctx, round_no, &round, &plan))?;
        writeln!(output, "plan: {}", sig.show_sequence(&plan))?;
        state = next;
        round_no += 1;
    }
}

fn play(spec: &Path, controller: Option<&Path>, transcript: &Path) -> Result<u8, Failure> {
    let s = solve(&game_of(&load_spec(spec)?)?)?;
    let ctrl = match controller {
        Some(path) => MooreController::from_json(&read(path)?, &s.ctx.sig).map_err(|e| Failure::Input(e.to_string()))?,
        None => match controller_for(&s) {
            Some(c) => c,
            None => {
                println!("Eve wins this game; there is no controller to play against");
                return Ok(1);
            }
        },
    };
    let mut log = fs::File::create(transcript)?;
    let header = serde_json::json!({
        "tool": "tbsynth",
        "version": env!("CARGO_PKG_VERSION"),
        "spec": spec.display().to_string(),
        "controller": CONTROLLER_FORMAT,
        "seed": null,
    });
    writeln!(log, "{header}")?;
    let stdin = io::stdin();
    let reached = play_loop(&s, &ctrl, &mut stdin.lock(), &mut io::stdout(), &mut log)?;
    println!("transcript saved to {}", transcript.display());
    Ok(if reached { 0 } else { 1 })
}

fn oracle_diff(specs: &[PathBuf], max_len: usize, max_delta: u64) -> Result<u8, Failure> {
    for spec in specs {
        let problem = problem_of(&load_spec(spec)?)?;
        let sig = Signature::new(&problem.variables);
        let a = planning_automaton(&problem)?;
        let mut first: Option<String> = None;
        let mut oracle_err = None;
        let count = for_each_sequence(&sig, &EnumBounds::new(max_len, max_delta), |seq| {
            if first.is_some() || oracle_err.is_some() {
                return;
            }
            match is_solution_plan(seq, &problem) {
                Ok(want) if want != accepts(&a, seq) => {
                    first = Some(format!("oracle={} automaton={} on {}", want, !want, sig.show_sequence(seq)))
                }
                Ok(_) => {}
                Err(e) => oracle_err = Some(e),
            }
        })?;
        if let Some(e) = oracle_err {
            return Err(e.into());
        }
        if let Some(m) = first {
            return Err(Failure::Disagreement(format!("{}: {m}", spec.display())));
        }
        println!("{}: {count} sequences, 0 disagreements", spec.display());
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Validate { spec } => validate(&spec),
        Command::CheckPlan { spec, plan } => check_plan(&spec, &plan),
        Command::Compile { spec, dot, max_delta, game } => compile(&spec, dot.as_deref(), max_delta, game),
        Command::Winner { spec } => print_winner(&spec),
        Command::Synth { spec, output, dot } => synth(&spec, &output, dot.as_deref()),
        Command::Play { spec, controller, transcript } => play(&spec, controller.as_deref(), &transcript),
        Command::OracleDiff { specs, max_len, max_delta } => oracle_diff(&specs, max_len, max_delta),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("{}", f.line());
            ExitCode::from(f.code())
        }
    }
}
