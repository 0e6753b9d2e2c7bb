use super::LazyDfa;
use crate::events::Event;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductMode {
    Intersection,
    Union,
}

#[derive(Debug, Clone)]
pub struct Product<A, B> {
    pub left: A,
    pub right: B,
    pub mode: ProductMode,
}

pub fn intersect<A: LazyDfa, B: LazyDfa>(left: A, right: B) -> Product<A, B> {
    Product { left, right, mode: ProductMode::Intersection }
}

pub fn union<A: LazyDfa, B: LazyDfa>(left: A, right: B) -> Product<A, B> {
    Product { left, right, mode: ProductMode::Union }
}

impl<A: LazyDfa, B: LazyDfa> LazyDfa for Product<A, B> {
    type State = (A::State, B::State);

    fn initial(&self) -> Self::State {
        (self.left.initial(), self.right.initial())
    }

    /// Intersections collapse into the sink as soon as one side dies, without
    /// stepping the other side.
    fn successor(&self, (a, b): &Self::State, event: &Event) -> Self::State {
        if self.mode == ProductMode::Intersection {
            if let Some(dead) = self.sink() {
                let b2 = self.right.successor(b, event);
                if self.right.is_dead(&b2) {
                    return dead;
                }
                let a2 = self.left.successor(a, event);
                if self.left.is_dead(&a2) {
                    return dead;
                }
                return (a2, b2);
            }
        }
        (self.left.successor(a, event), self.right.successor(b, event))
    }

    fn sink(&self) -> Option<Self::State> {
        Some((self.left.sink()?, self.right.sink()?))
    }

    fn is_final(&self, (a, b): &Self::State) -> bool {
        match self.mode {
            ProductMode::Intersection => self.left.is_final(a) && self.right.is_final(b),
            ProductMode::Union => self.left.is_final(a) || self.right.is_final(b),
        }
    }

    fn is_dead(&self, (a, b): &Self::State) -> bool {
        match self.mode {
            ProductMode::Intersection => self.left.is_dead(a) || self.right.is_dead(b),
            ProductMode::Union => self.left.is_dead(a) && self.right.is_dead(b),
        }
    }

    fn summary(&self, (a, b): &Self::State) -> String {
        format!("{} | {}", self.left.summary(a), self.right.summary(b))
    }
}

#[derive(Debug, Clone)]
pub struct Complement<A>(pub A);

pub fn complement<A: LazyDfa>(a: A) -> Complement<A> {
    Complement(a)
}

impl<A: LazyDfa> LazyDfa for Complement<A> {
    type State = A::State;

    fn initial(&self) -> Self::State {
        self.0.initial()
    }
    fn successor(&self, state: &Self::State, event: &Event) -> Self::State {
        self.0.successor(state, event)
    }
    fn is_final(&self, state: &Self::State) -> bool {
        !self.0.is_final(state)
    }
    fn summary(&self, state: &Self::State) -> String {
        format!("¬({})", self.0.summary(state))
    }
}

/// Accepts the words along which the inner automaton is not yet dead, i.e.
/// the prefix-closed set of words that can still be extended to an accepted
/// one (exactly so when `is_dead` is exact).
#[derive(Debug, Clone)]
pub struct Viable<A>(pub A);

impl<A: LazyDfa> LazyDfa for Viable<A> {
    type State = A::State;

    fn initial(&self) -> Self::State {
        self.0.initial()
    }
    fn successor(&self, state: &Self::State, event: &Event) -> Self::State {
        self.0.successor(state, event)
    }
    fn is_final(&self, state: &Self::State) -> bool {
        !self.0.is_dead(state)
    }
    fn is_dead(&self, state: &Self::State) -> bool {
        self.0.is_dead(state)
    }
    fn sink(&self) -> Option<Self::State> {
        self.0.sink()
    }
    fn summary(&self, state: &Self::State) -> String {
        self.0.summary(state)
    }
}

/// Rejects the empty word.
#[derive(Debug, Clone)]
pub struct NonEmpty<A>(pub A);

impl<A: LazyDfa> LazyDfa for NonEmpty<A> {
    type State = (bool, A::State);

    fn initial(&self) -> Self::State {
        (false, self.0.initial())
    }
    fn successor(&self, (_, s): &Self::State, event: &Event) -> Self::State {
        (true, self.0.successor(s, event))
    }
    fn is_final(&self, (seen, s): &Self::State) -> bool {
        *seen && self.0.is_final(s)
    }
    fn is_dead(&self, (_, s): &Self::State) -> bool {
        self.0.is_dead(s)
    }
    fn sink(&self) -> Option<Self::State> {
        Some((true, self.0.sink()?))
    }
    fn summary(&self, (_, s): &Self::State) -> String {
        self.0.summary(s)
    }
}
