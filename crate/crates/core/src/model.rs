//! Specifications: state variables, synchronization rules, planning problems
//! and games, plus validation and the derived constants used by the automata.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Name = String;

/// Largest finite bound accepted anywhere in a specification. Keeps every
/// DBM entry and sum of bounds far away from `i64` overflow.
pub const MAX_BOUND: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Controllability {
    #[serde(rename = "c")]
    Controllable,
    #[serde(rename = "u")]
    Uncontrollable,
}

/// Token duration bounds `(dmin, dmax)`; `max = None` is +∞.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DurationBound {
    pub min: u64,
    pub max: Option<u64>,
}

impl DurationBound {
    pub const UNBOUNDED: DurationBound = DurationBound { min: 0, max: None };

    pub fn new(min: u64, max: Option<u64>) -> Self {
        DurationBound { min, max }
    }

    pub fn is_trivial(&self) -> bool {
        *self == Self::UNBOUNDED
    }

    pub fn contains(&self, d: u64) -> bool {
        d >= self.min && self.max.is_none_or(|m| d <= m)
    }
}

impl Default for DurationBound {
    fn default() -> Self {
        Self::UNBOUNDED
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateVariable {
    pub name: Name,
    pub values: Vec<Name>,
    pub transitions: BTreeMap<Name, BTreeSet<Name>>,
    pub durations: BTreeMap<Name, DurationBound>,
    pub controllability: BTreeMap<Name, Controllability>,
}

impl StateVariable {
    /// A variable where every value may follow every value, durations are
    /// unbounded and every value is controllable.
    pub fn new<S: Into<Name>>(name: S, values: &[&str]) -> Self {
        let values: Vec<Name> = values.iter().map(|v| v.to_string()).collect();
        let all: BTreeSet<Name> = values.iter().cloned().collect();
        StateVariable {
            name: name.into(),
            transitions: values.iter().map(|v| (v.clone(), all.clone())).collect(),
            durations: values.iter().map(|v| (v.clone(), DurationBound::UNBOUNDED)).collect(),
            controllability: values.iter().map(|v| (v.clone(), Controllability::Controllable)).collect(),
            values,
        }
    }

    pub fn with_transitions(mut self, from: &str, to: &[&str]) -> Self {
        self.transitions.insert(from.to_string(), to.iter().map(|v| v.to_string()).collect());
        self
    }

    pub fn with_duration(mut self, value: &str, min: u64, max: Option<u64>) -> Self {
        self.durations.insert(value.to_string(), DurationBound::new(min, max));
        self
    }

    pub fn with_controllability(mut self, value: &str, c: Controllability) -> Self {
        self.controllability.insert(value.to_string(), c);
        self
    }

    pub fn has_value(&self, value: &str) -> bool {
        self.values.iter().any(|v| v == value)
    }

    pub fn duration(&self, value: &str) -> DurationBound {
        self.durations.get(value).copied().unwrap_or_default()
    }

    pub fn controllability_of(&self, value: &str) -> Controllability {
        self.controllability.get(value).copied().unwrap_or(Controllability::Controllable)
    }

    pub fn allows(&self, from: &str, to: &str) -> bool {
        self.transitions.get(from).is_some_and(|s| s.contains(to))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Start,
    End,
}

/// `start(a)` or `end(a)`. Serialized in that textual form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    pub endpoint: Endpoint,
    pub token: Name,
}

impl Term {
    pub fn start<S: Into<Name>>(token: S) -> Self {
        Term { endpoint: Endpoint::Start, token: token.into() }
    }

    pub fn end<S: Into<Name>>(token: S) -> Self {
        Term { endpoint: Endpoint::End, token: token.into() }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.endpoint {
            Endpoint::Start => write!(f, "start({})", self.token),
            Endpoint::End => write!(f, "end({})", self.token),
        }
    }
}

impl FromStr for Term {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (endpoint, rest) = if let Some(rest) = s.strip_prefix("start(") {
            (Endpoint::Start, rest)
        } else if let Some(rest) = s.strip_prefix("end(") {
            (Endpoint::End, rest)
        } else {
            return Err(format!("malformed term `{s}`: expected start(name) or end(name)"));
        };
        let token = rest
            .strip_suffix(')')
            .ok_or_else(|| format!("malformed term `{s}`: missing `)`"))?
            .trim();
        Ok(Term { endpoint, token: token.to_string() })
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `lhs ≤_{lower,upper} rhs`: the distance from `lhs` to `rhs` lies in
/// `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub lhs: Term,
    pub rhs: Term,
    pub lower: u64,
    pub upper: Option<u64>,
}

impl Atom {
    pub fn new(lhs: Term, rhs: Term, lower: u64, upper: Option<u64>) -> Self {
        Atom { lhs, rhs, lower, upper }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Quantifier {
    pub token: Name,
    #[serde(rename = "var")]
    pub variable: Name,
    pub value: Name,
}

impl Quantifier {
    pub fn new(token: &str, variable: &str, value: &str) -> Self {
        Quantifier { token: token.into(), variable: variable.into(), value: value.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ExistentialStatement {
    #[serde(default)]
    pub quantifiers: Vec<Quantifier>,
    #[serde(default)]
    pub clause: Vec<Atom>,
}

impl ExistentialStatement {
    pub fn new(quantifiers: Vec<Quantifier>, clause: Vec<Atom>) -> Self {
        ExistentialStatement { quantifiers, clause }
    }
}

/// `a0[x0=v0] ⇒ E1 ∨ … ∨ Ek`. A missing trigger is representable only so
/// that validation can reject it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SyncRule {
    pub trigger: Option<Quantifier>,
    pub statements: Vec<ExistentialStatement>,
}

impl SyncRule {
    pub fn new(trigger: Quantifier, statements: Vec<ExistentialStatement>) -> Self {
        SyncRule { trigger: Some(trigger), statements }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlanningProblem {
    pub variables: Vec<StateVariable>,
    pub rules: Vec<SyncRule>,
}

impl PlanningProblem {
    pub fn new(variables: Vec<StateVariable>, rules: Vec<SyncRule>) -> Self {
        PlanningProblem { variables, rules }
    }

    pub fn variable(&self, name: &str) -> Option<&StateVariable> {
        self.variables.iter().find(|v| v.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GameSpec {
    pub controlled: Vec<StateVariable>,
    pub external: Vec<StateVariable>,
    pub system_rules: Vec<SyncRule>,
    pub domain_rules: Vec<SyncRule>,
}

impl GameSpec {
    /// Controlled variables first, then external ones.
    pub fn variables(&self) -> Vec<StateVariable> {
        self.controlled.iter().chain(self.external.iter()).cloned().collect()
    }

    pub fn all_rules(&self) -> impl Iterator<Item = &SyncRule> {
        self.system_rules.iter().chain(self.domain_rules.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemConstants {
    pub horizon: u64,
    pub window: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticKind {
    BadIdentifier,
    DuplicateName,
    UndeclaredVariable,
    UndeclaredValue,
    UndeclaredToken,
    BadTransition,
    BadDuration,
    BadBound,
    PartialMap,
    EmptyRule,
    Triggerless,
    TooLarge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub location: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.diagnostics.is_empty()
    }

    fn push(&mut self, kind: DiagnosticKind, location: impl Into<String>, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic { kind, location: location.into(), message: message.into() });
    }
}

/// Caps that keep the bitmask-based matching representation valid.
pub const MAX_TOKENS_PER_STATEMENT: usize = 32;
pub const MAX_STATEMENTS_PER_RULE: usize = 64;

pub fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

pub fn validate_problem(problem: &PlanningProblem) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_variables(&problem.variables, "variables", &mut report);
    for (i, rule) in problem.rules.iter().enumerate() {
        check_rule(rule, &problem.variables, &format!("rules[{i}]"), &mut report);
    }
    report
}

pub fn validate_game(game: &GameSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let vars = game.variables();
    check_variables(&vars, "variables", &mut report);
    let controlled: BTreeSet<&str> = game.controlled.iter().map(|v| v.name.as_str()).collect();
    for v in &game.external {
        if controlled.contains(v.name.as_str()) {
            report.push(
                DiagnosticKind::DuplicateName,
                format!("variables.{}", v.name),
                format!("variable `{}` is both controlled and external", v.name),
            );
        }
    }
    for (i, rule) in game.system_rules.iter().enumerate() {
        check_rule(rule, &vars, &format!("system_rules[{i}]"), &mut report);
    }
    for (i, rule) in game.domain_rules.iter().enumerate() {
        check_rule(rule, &vars, &format!("domain_rules[{i}]"), &mut report);
    }
    report
}

fn check_bound(b: u64, loc: &str, report: &mut ValidationReport) {
    if b > MAX_BOUND {
        report.push(DiagnosticKind::TooLarge, loc, format!("bound {b} exceeds the supported maximum {MAX_BOUND}"));
    }
}

fn check_variables(vars: &[StateVariable], loc: &str, report: &mut ValidationReport) {
    let mut seen = BTreeSet::new();
    for var in vars {
        let at = format!("{loc}.{}", var.name);
        if !is_identifier(&var.name) {
            report.push(DiagnosticKind::BadIdentifier, &at, format!("`{}` is not a valid identifier", var.name));
        }
        if !seen.insert(var.name.as_str()) {
            report.push(DiagnosticKind::DuplicateName, &at, format!("variable `{}` declared twice", var.name));
        }
        let mut values = BTreeSet::new();
        for v in &var.values {
            if !is_identifier(v) {
                report.push(DiagnosticKind::BadIdentifier, &at, format!("value `{v}` is not a valid identifier"));
            }
            if !values.insert(v.as_str()) {
                report.push(DiagnosticKind::DuplicateName, &at, format!("value `{v}` declared twice"));
            }
        }
        if var.values.len() > u16::MAX as usize {
            report.push(DiagnosticKind::TooLarge, &at, "too many values");
        }
        for (from, targets) in &var.transitions {
            if !values.contains(from.as_str()) {
                report.push(DiagnosticKind::UndeclaredValue, &at, format!("transition source `{from}` is not a value"));
            }
            for to in targets {
                if !values.contains(to.as_str()) {
                    report.push(
                        DiagnosticKind::BadTransition,
                        &at,
                        format!("transition target `{to}` of `{from}` is not a value"),
                    );
                }
            }
        }
        for (v, d) in &var.durations {
            if !values.contains(v.as_str()) {
                report.push(DiagnosticKind::UndeclaredValue, &at, format!("duration for undeclared value `{v}`"));
            }
            if let Some(max) = d.max {
                if d.min > max {
                    report.push(DiagnosticKind::BadDuration, &at, format!("duration of `{v}` has dmin {} > dmax {max}", d.min));
                }
                check_bound(max, &at, report);
            }
            check_bound(d.min, &at, report);
        }
        for v in var.controllability.keys() {
            if !values.contains(v.as_str()) {
                report.push(DiagnosticKind::UndeclaredValue, &at, format!("controllability for undeclared value `{v}`"));
            }
        }
        for v in &var.values {
            if !var.durations.contains_key(v) {
                report.push(DiagnosticKind::PartialMap, &at, format!("no duration for value `{v}`"));
            }
            if !var.controllability.contains_key(v) {
                report.push(DiagnosticKind::PartialMap, &at, format!("no controllability for value `{v}`"));
            }
        }
    }
}

fn check_quantifier(q: &Quantifier, vars: &[StateVariable], at: &str, report: &mut ValidationReport) {
    if !is_identifier(&q.token) {
        report.push(DiagnosticKind::BadIdentifier, at, format!("token name `{}` is not a valid identifier", q.token));
    }
    match vars.iter().find(|v| v.name == q.variable) {
        None => report.push(
            DiagnosticKind::UndeclaredVariable,
            at,
            format!("quantifier {}[{}={}] uses undeclared variable `{}`", q.token, q.variable, q.value, q.variable),
        ),
        Some(var) if !var.has_value(&q.value) => report.push(
            DiagnosticKind::UndeclaredValue,
            at,
            format!("quantifier {}[{}={}] uses undeclared value `{}`", q.token, q.variable, q.value, q.value),
        ),
        Some(_) => {}
    }
}

fn check_rule(rule: &SyncRule, vars: &[StateVariable], loc: &str, report: &mut ValidationReport) {
    let Some(trigger) = &rule.trigger else {
        report.push(DiagnosticKind::Triggerless, loc, "unsupported: triggerless rule");
        return;
    };
    check_quantifier(trigger, vars, &format!("{loc}.trigger"), report);
    if rule.statements.is_empty() {
        report.push(DiagnosticKind::EmptyRule, loc, "rule has no existential statements");
    }
    if rule.statements.len() > MAX_STATEMENTS_PER_RULE {
        report.push(DiagnosticKind::TooLarge, loc, format!("more than {MAX_STATEMENTS_PER_RULE} statements"));
    }
    for (j, st) in rule.statements.iter().enumerate() {
        let at = format!("{loc}.statements[{j}]");
        let mut tokens = BTreeSet::new();
        tokens.insert(trigger.token.as_str());
        for q in &st.quantifiers {
            check_quantifier(q, vars, &at, report);
            if !tokens.insert(q.token.as_str()) {
                report.push(DiagnosticKind::DuplicateName, &at, format!("token `{}` quantified twice", q.token));
            }
        }
        if tokens.len() > MAX_TOKENS_PER_STATEMENT {
            report.push(DiagnosticKind::TooLarge, &at, format!("more than {MAX_TOKENS_PER_STATEMENT} tokens"));
        }
        for atom in &st.clause {
            for term in [&atom.lhs, &atom.rhs] {
                if !tokens.contains(term.token.as_str()) {
                    report.push(DiagnosticKind::UndeclaredToken, &at, format!("term {term} names an unquantified token"));
                }
            }
            if let Some(u) = atom.upper {
                if atom.lower > u {
                    report.push(
                        DiagnosticKind::BadBound,
                        &at,
                        format!("atom {} ≤[{},{u}] {} has lower > upper", atom.lhs, atom.lower, atom.rhs),
                    );
                }
                check_bound(u, &at, report);
            }
            check_bound(atom.lower, &at, report);
        }
    }
}

/// Moves every nontrivial duration bound into a rule
/// `a[x=v] ⇒ start(a) ≤_{dmin,dmax} end(a)` and resets the bound to (0,+∞).
pub fn desugar_durations(problem: &PlanningProblem) -> PlanningProblem {
    let mut out = problem.clone();
    for var in &mut out.variables {
        for value in &var.values {
            let d = var.duration(value);
            if d.is_trivial() {
                continue;
            }
            out.rules.push(duration_rule(&var.name, value, d));
            var.durations.insert(value.clone(), DurationBound::UNBOUNDED);
        }
    }
    out
}

pub fn duration_rule(variable: &str, value: &str, d: DurationBound) -> SyncRule {
    SyncRule::new(
        Quantifier::new("a", variable, value),
        vec![ExistentialStatement::new(
            vec![],
            vec![Atom::new(Term::start("a"), Term::end("a"), d.min, d.max)],
        )],
    )
}

fn atoms<'a>(rules: impl IntoIterator<Item = &'a SyncRule>) -> impl Iterator<Item = &'a Atom> {
    rules.into_iter().flat_map(|r| r.statements.iter().flat_map(|s| s.clause.iter()))
}

/// `d = max(L, U) + 1` over the lower and finite upper bounds of the rules.
pub fn horizon_of<'a>(rules: impl IntoIterator<Item = &'a SyncRule>) -> u64 {
    atoms(rules)
        .flat_map(|a| std::iter::once(a.lower).chain(a.upper))
        .max()
        .map_or(1, |m| m + 1)
}

/// Sum of all finite upper bounds of the rules.
pub fn window_of<'a>(rules: impl IntoIterator<Item = &'a SyncRule>) -> u64 {
    atoms(rules).filter_map(|a| a.upper).sum()
}

pub fn horizon_d(problem: &PlanningProblem) -> u64 {
    horizon_of(&problem.rules)
}

pub fn window(problem: &PlanningProblem) -> u64 {
    window_of(&problem.rules)
}

pub fn constants(problem: &PlanningProblem) -> ProblemConstants {
    ProblemConstants { horizon: horizon_d(problem), window: window(problem) }
}

/// `lhs − rhs ≤ bound`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DifferenceConstraint {
    pub lhs: Term,
    pub rhs: Term,
    pub bound: i64,
}

impl fmt::Display for DifferenceConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} − {} ≤ {}", self.lhs, self.rhs, self.bound)
    }
}

/// Rewrites the clause into upper-bound difference constraints and adds the
/// duration constraints of every token with a nontrivial duration bound.
pub fn clause_to_constraints(
    statement: &ExistentialStatement,
    trigger: &Quantifier,
    variables: &[StateVariable],
) -> Vec<DifferenceConstraint> {
    let mut out = Vec::new();
    for atom in &statement.clause {
        if let Some(u) = atom.upper {
            out.push(DifferenceConstraint { lhs: atom.rhs.clone(), rhs: atom.lhs.clone(), bound: u as i64 });
        }
        out.push(DifferenceConstraint { lhs: atom.lhs.clone(), rhs: atom.rhs.clone(), bound: -(atom.lower as i64) });
    }
    for q in std::iter::once(trigger).chain(&statement.quantifiers) {
        let d = variables
            .iter()
            .find(|v| v.name == q.variable)
            .map_or(DurationBound::UNBOUNDED, |v| v.duration(&q.value));
        if d.is_trivial() {
            continue;
        }
        out.push(DifferenceConstraint { lhs: Term::start(&q.token), rhs: Term::end(&q.token), bound: -(d.min as i64) });
        if let Some(max) = d.max {
            out.push(DifferenceConstraint { lhs: Term::end(&q.token), rhs: Term::start(&q.token), bound: max as i64 });
        }
    }
    out
}
