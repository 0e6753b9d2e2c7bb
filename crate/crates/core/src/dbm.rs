//! Term-indexed difference bound matrices. Entries are kept exactly as the
//! initialization and time shifts produce them; no closure is ever computed.
//!
//! Token `k` of a statement (the trigger is token 0) owns the terms
//! `start = 2k` and `end = 2k + 1`.

use std::fmt;

use thiserror::Error;

use crate::model::{clause_to_constraints, Endpoint, ExistentialStatement, Quantifier, StateVariable, Term};

/// A bound on `T − T'`, or +∞.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bound(i64);

impl Bound {
    pub const INF: Bound = Bound(i64::MAX);
    pub const ZERO: Bound = Bound(0);

    pub fn finite(n: i64) -> Self {
        assert!(n != i64::MAX, "finite bound collides with the +∞ sentinel");
        Bound(n)
    }

    pub fn is_inf(self) -> bool {
        self == Self::INF
    }

    pub fn value(self) -> Option<i64> {
        (!self.is_inf()).then_some(self.0)
    }

    /// `self ≥ n`, with +∞ above every integer.
    pub fn at_least(self, n: i64) -> bool {
        self.is_inf() || self.0 >= n
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            Some(n) => write!(f, "{n}"),
            None => f.write_str("+∞"),
        }
    }
}

pub fn start_term(token: usize) -> usize {
    2 * token
}

pub fn end_term(token: usize) -> usize {
    2 * token + 1
}

/// Set of term indices (at most 64 terms).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TermSet(pub u64);

impl TermSet {
    pub const EMPTY: TermSet = TermSet(0);

    pub fn full(dim: usize) -> Self {
        if dim >= 64 {
            TermSet(u64::MAX)
        } else {
            TermSet((1u64 << dim) - 1)
        }
    }

    pub fn singleton(t: usize) -> Self {
        TermSet(1 << t)
    }

    pub fn contains(self, t: usize) -> bool {
        self.0 >> t & 1 == 1
    }

    pub fn insert(&mut self, t: usize) {
        self.0 |= 1 << t;
    }

    pub fn union(self, other: TermSet) -> TermSet {
        TermSet(self.0 | other.0)
    }

    pub fn intersects(self, other: TermSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let t = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(t)
            }
        })
    }
}

impl FromIterator<usize> for TermSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = TermSet::EMPTY;
        for t in iter {
            s.insert(t);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DbmError {
    #[error("shifting entry [{row},{col}] by {delta} overflows")]
    Overflow { row: usize, col: usize, delta: u64 },
    #[error("constraint mentions token `{0}` that the statement does not quantify")]
    UnknownToken(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dbm {
    dim: usize,
    entries: Box<[Bound]>,
}

impl Dbm {
    /// Diagonal 0, +∞ elsewhere.
    pub fn unconstrained(dim: usize) -> Self {
        let mut entries = vec![Bound::INF; dim * dim].into_boxed_slice();
        for i in 0..dim {
            entries[i * dim + i] = Bound::ZERO;
        }
        Dbm { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Bound {
        self.entries[row * self.dim + col]
    }

    /// Tightens `[row, col]` to `min(current, b)`.
    pub fn constrain(&mut self, row: usize, col: usize, b: Bound) {
        let e = &mut self.entries[row * self.dim + col];
        if b < *e {
            *e = b;
        }
    }

    pub fn relax(&mut self, row: usize, col: usize) {
        self.entries[row * self.dim + col] = Bound::INF;
    }

    /// Sets every entry between two distinct terms of `terms` to +∞.
    pub fn forget(&mut self, terms: TermSet) {
        for r in terms.iter() {
            for c in terms.iter() {
                if r != c {
                    self.entries[r * self.dim + c] = Bound::INF;
                }
            }
        }
    }

    /// Shifts time by `delta`: bounds from matched to unmatched terms grow,
    /// bounds from unmatched to matched terms shrink, the rest stay.
    pub fn shift(&self, matched: TermSet, delta: u64) -> Result<Dbm, DbmError> {
        let mut out = self.clone();
        let d = i64::try_from(delta).map_err(|_| DbmError::Overflow { row: 0, col: 0, delta })?;
        for row in 0..self.dim {
            for col in 0..self.dim {
                let e = self.get(row, col);
                if e.is_inf() {
                    continue;
                }
                let shifted = match (matched.contains(row), matched.contains(col)) {
                    (true, false) => e.0.checked_add(d),
                    (false, true) => e.0.checked_sub(d),
                    _ => continue,
                };
                match shifted {
                    Some(v) if v != i64::MAX => out.entries[row * self.dim + col] = Bound(v),
                    _ => return Err(DbmError::Overflow { row, col, delta }),
                }
            }
        }
        Ok(out)
    }

    /// Clamps every finite entry above `cap` down to `cap`.
    pub fn saturate(&mut self, cap: i64) {
        for e in self.entries.iter_mut() {
            if !e.is_inf() && e.0 > cap {
                e.0 = cap;
            }
        }
    }

    /// Largest absolute value of a finite entry.
    pub fn max_abs(&self) -> i64 {
        self.entries.iter().filter_map(|e| e.value()).map(i64::abs).max().unwrap_or(0)
    }

    pub fn render(&self, labels: &[Term]) -> String {
        let names: Vec<String> = labels.iter().map(|t| t.to_string()).collect();
        let cell = |b: Bound| if b.is_inf() { String::new() } else { b.to_string() };
        let width = names
            .iter()
            .map(|n| n.chars().count())
            .chain(self.entries.iter().map(|b| cell(*b).chars().count()))
            .max()
            .unwrap_or(1);
        let mut out = String::new();
        out.push_str(&" ".repeat(width));
        for n in &names {
            out.push_str(&format!(" {n:>width$}"));
        }
        out.push('\n');
        for (r, n) in names.iter().enumerate() {
            out.push_str(&format!("{n:>width$}"));
            for c in 0..self.dim {
                out.push_str(&format!(" {:>width$}", cell(self.get(r, c))));
            }
            out.push('\n');
        }
        out
    }
}

/// Terms of a statement in matrix order: start/end of the trigger, then of
/// each quantified token.
pub fn term_labels(statement: &ExistentialStatement, trigger: &Quantifier) -> Vec<Term> {
    std::iter::once(&trigger.token)
        .chain(statement.quantifiers.iter().map(|q| &q.token))
        .flat_map(|t| [Term::start(t.clone()), Term::end(t.clone())])
        .collect()
}

pub fn term_index(statement: &ExistentialStatement, trigger: &Quantifier, term: &Term) -> Option<usize> {
    let token = if term.token == trigger.token {
        0
    } else {
        1 + statement.quantifiers.iter().position(|q| q.token == term.token)?
    };
    Some(match term.endpoint {
        Endpoint::Start => start_term(token),
        Endpoint::End => end_term(token),
    })
}

/// The initial DBM of a statement: diagonal 0, the constraints of the
/// rewritten clause (minimum on collisions), +∞ elsewhere.
pub fn init_dbm(
    statement: &ExistentialStatement,
    trigger: &Quantifier,
    variables: &[StateVariable],
) -> Result<Dbm, DbmError> {
    let dim = 2 * (statement.quantifiers.len() + 1);
    let mut dbm = Dbm::unconstrained(dim);
    for c in clause_to_constraints(statement, trigger, variables) {
        let row = term_index(statement, trigger, &c.lhs).ok_or_else(|| DbmError::UnknownToken(c.lhs.token.clone()))?;
        let col = term_index(statement, trigger, &c.rhs).ok_or_else(|| DbmError::UnknownToken(c.rhs.token.clone()))?;
        dbm.constrain(row, col, Bound::finite(c.bound));
    }
    Ok(dbm)
}
