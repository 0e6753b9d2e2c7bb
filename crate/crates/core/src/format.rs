//! JSON documents: specifications (`tbsynth-spec/1`) and plans
//! (`tbsynth-plan/1`). Upper bounds use `null` for +∞.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{Action, ActionKind, Event, EventSequence, Signature};
use crate::model::{
    validate_game, validate_problem, Controllability, Diagnostic, DurationBound, ExistentialStatement, GameSpec,
    Name, PlanningProblem, Quantifier, StateVariable, SyncRule,
};

pub const SPEC_FORMAT: &str = "tbsynth-spec/1";
pub const PLAN_FORMAT: &str = "tbsynth-plan/1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format `{found}`, expected `{expected}`")]
    Version { found: String, expected: &'static str },
    #[error("invalid specification: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("bad action `{0}`: expected start(var,value) or end(var,value)")]
    Action(String),
    #[error("event {position}: {message}")]
    Event { position: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Owner {
    #[default]
    Controlled,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    #[default]
    System,
    Domain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableDoc {
    pub name: Name,
    pub values: Vec<Name>,
    #[serde(default)]
    pub owner: Owner,
    /// Missing: every value may follow every value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transitions: Option<BTreeMap<Name, BTreeSet<Name>>>,
    /// `value → [min, max]`, `max = null` for +∞. Missing values are
    /// unbounded.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub durations: BTreeMap<Name, (u64, Option<u64>)>,
    /// Missing values are controllable.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub controllability: BTreeMap<Name, Controllability>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleDoc {
    #[serde(default)]
    pub role: Role,
    pub trigger: Option<Quantifier>,
    #[serde(default)]
    pub statements: Vec<ExistentialStatement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecDocument {
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub variables: Vec<VariableDoc>,
    #[serde(default)]
    pub rules: Vec<RuleDoc>,
}

impl VariableDoc {
    fn to_variable(&self) -> StateVariable {
        let names: Vec<&str> = self.values.iter().map(String::as_str).collect();
        let mut v = StateVariable::new(self.name.clone(), &names);
        if let Some(t) = &self.transitions {
            for value in &self.values {
                v.transitions.insert(value.clone(), t.get(value).cloned().unwrap_or_default());
            }
            for (from, to) in t {
                v.transitions.entry(from.clone()).or_insert_with(|| to.clone());
            }
        }
        for (value, &(min, max)) in &self.durations {
            v.durations.insert(value.clone(), DurationBound::new(min, max));
        }
        for (value, &c) in &self.controllability {
            v.controllability.insert(value.clone(), c);
        }
        v
    }

    fn from_variable(v: &StateVariable, owner: Owner) -> Self {
        let all: BTreeSet<Name> = v.values.iter().cloned().collect();
        let complete = v.values.iter().all(|x| v.transitions.get(x) == Some(&all));
        VariableDoc {
            name: v.name.clone(),
            values: v.values.clone(),
            owner,
            transitions: (!complete).then(|| v.transitions.clone()),
            durations: v.durations.iter().filter(|(_, d)| !d.is_trivial()).map(|(k, d)| (k.clone(), (d.min, d.max))).collect(),
            controllability: v
                .controllability
                .iter()
                .filter(|(_, &c)| c == Controllability::Uncontrollable)
                .map(|(k, &c)| (k.clone(), c))
                .collect(),
        }
    }
}

impl SpecDocument {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let doc: SpecDocument = serde_json::from_str(text)?;
        if doc.format != SPEC_FORMAT {
            return Err(FormatError::Version { found: doc.format, expected: SPEC_FORMAT });
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize")
    }

    fn rule(r: &RuleDoc) -> SyncRule {
        SyncRule { trigger: r.trigger.clone(), statements: r.statements.clone() }
    }

    /// Every variable and every rule, regardless of owner and role.
    pub fn problem(&self) -> Result<PlanningProblem, FormatError> {
        let p = PlanningProblem::new(
            self.variables.iter().map(VariableDoc::to_variable).collect(),
            self.rules.iter().map(Self::rule).collect(),
        );
        let report = validate_problem(&p);
        if !report.is_valid() {
            return Err(FormatError::Invalid(report.diagnostics));
        }
        Ok(p)
    }

    pub fn game(&self) -> Result<GameSpec, FormatError> {
        let pick = |o: Owner| self.variables.iter().filter(|v| v.owner == o).map(VariableDoc::to_variable).collect();
        let rules = |r: Role| self.rules.iter().filter(|x| x.role == r).map(Self::rule).collect();
        let g = GameSpec {
            controlled: pick(Owner::Controlled),
            external: pick(Owner::External),
            system_rules: rules(Role::System),
            domain_rules: rules(Role::Domain),
        };
        let report = validate_game(&g);
        if !report.is_valid() {
            return Err(FormatError::Invalid(report.diagnostics));
        }
        Ok(g)
    }

    pub fn from_problem(p: &PlanningProblem) -> Self {
        SpecDocument {
            format: SPEC_FORMAT.into(),
            name: None,
            variables: p.variables.iter().map(|v| VariableDoc::from_variable(v, Owner::Controlled)).collect(),
            rules: p
                .rules
                .iter()
                .map(|r| RuleDoc { role: Role::System, trigger: r.trigger.clone(), statements: r.statements.clone() })
                .collect(),
        }
    }

    pub fn from_game(g: &GameSpec) -> Self {
        let vars = g
            .controlled
            .iter()
            .map(|v| VariableDoc::from_variable(v, Owner::Controlled))
            .chain(g.external.iter().map(|v| VariableDoc::from_variable(v, Owner::External)))
            .collect();
        let rule = |role, r: &SyncRule| RuleDoc { role, trigger: r.trigger.clone(), statements: r.statements.clone() };
        let rules = g
            .system_rules
            .iter()
            .map(|r| rule(Role::System, r))
            .chain(g.domain_rules.iter().map(|r| rule(Role::Domain, r)))
            .collect();
        SpecDocument { format: SPEC_FORMAT.into(), name: None, variables: vars, rules }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventDoc {
    pub delta: u64,
    pub actions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub format: String,
    pub events: Vec<EventDoc>,
}

/// Parses `start(x,v)` or `end(x,v)`.
pub fn parse_action(sig: &Signature, text: &str) -> Result<Action, FormatError> {
    let bad = || FormatError::Action(text.to_string());
    let t = text.trim();
    let (kind, rest) = if let Some(r) = t.strip_prefix("start(") {
        (ActionKind::Start, r)
    } else if let Some(r) = t.strip_prefix("end(") {
        (ActionKind::End, r)
    } else {
        return Err(bad());
    };
    let inner = rest.strip_suffix(')').ok_or_else(bad)?;
    let (var, value) = inner.split_once(',').ok_or_else(bad)?;
    let x = sig.var_id(var.trim()).ok_or_else(bad)?;
    let v = sig.value_id(x, value.trim()).ok_or_else(bad)?;
    Ok(Action { kind, var: x, value: v })
}

impl PlanDocument {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let doc: PlanDocument = serde_json::from_str(text)?;
        if doc.format != PLAN_FORMAT {
            return Err(FormatError::Version { found: doc.format, expected: PLAN_FORMAT });
        }
        Ok(doc)
    }

    /// Resolves actions against `sig`. The first delay is normalized to 1.
    pub fn sequence(&self, sig: &Signature) -> Result<EventSequence, FormatError> {
        let mut events = Vec::new();
        for (i, e) in self.events.iter().enumerate() {
            let actions = e.actions.iter().map(|a| parse_action(sig, a)).collect::<Result<Vec<_>, _>>()?;
            let event = Event::new(actions, e.delta);
            if event.actions.len() != e.actions.len() || !event.is_well_typed() {
                return Err(FormatError::Event { position: i + 1, message: "repeated action kind on a variable".into() });
            }
            if i > 0 && e.delta == 0 {
                return Err(FormatError::Event { position: i + 1, message: "delay must be positive".into() });
            }
            events.push(event);
        }
        let mut seq = EventSequence::new(events);
        seq.canonicalize();
        Ok(seq)
    }

    pub fn from_sequence(sig: &Signature, seq: &EventSequence) -> Self {
        PlanDocument {
            format: PLAN_FORMAT.into(),
            events: seq
                .events
                .iter()
                .map(|e| EventDoc { delta: e.delta, actions: e.actions.iter().map(|a| sig.show_action(a)).collect() })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize")
    }
}
