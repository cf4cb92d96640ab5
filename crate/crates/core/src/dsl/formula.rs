use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::model::VarId;

/// Propositional condition over state atoms `variable=value`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(VarId, usize),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("formula mentions variable #{} which has no value in the atom set", .0 .0)]
pub struct EvalError(pub VarId);

/// Lookup of the value assigned to a variable in a set of atoms.
pub trait AtomLookup {
    fn value_of(&self, var: VarId) -> Option<usize>;
}

/// A full assignment indexed by variable id. Expanded states work too: state
/// variables come first.
impl AtomLookup for [usize] {
    fn value_of(&self, var: VarId) -> Option<usize> {
        self.get(var.0).copied()
    }
}

impl AtomLookup for Vec<usize> {
    fn value_of(&self, var: VarId) -> Option<usize> {
        self.as_slice().value_of(var)
    }
}

impl AtomLookup for BTreeMap<VarId, usize> {
    fn value_of(&self, var: VarId) -> Option<usize> {
        self.get(&var).copied()
    }
}

impl Formula {
    pub fn atom(var: VarId, value: usize) -> Self {
        Formula::Atom(var, value)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    /// Disjunction of all formulas; `false` for an empty list.
    pub fn any(items: impl IntoIterator<Item = Formula>) -> Self {
        items.into_iter().reduce(Formula::or).unwrap_or(Formula::False)
    }

    /// Evaluates against a complete assignment. Panics if a mentioned variable
    /// is out of range; use [`Formula::eval`] for partial atom sets.
    pub fn holds(&self, state: &[usize]) -> bool {
        match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(var, value) => state[var.0] == *value,
            Formula::Not(f) => !f.holds(state),
            Formula::And(a, b) => a.holds(state) && b.holds(state),
            Formula::Or(a, b) => a.holds(state) || b.holds(state),
        }
    }

    /// Evaluates against an arbitrary atom set. Every variable the formula
    /// mentions must have a value, even in branches short-circuiting would skip.
    pub fn eval<A: AtomLookup + ?Sized>(&self, atoms: &A) -> Result<bool, EvalError> {
        Ok(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(var, value) => atoms.value_of(*var).ok_or(EvalError(*var))? == *value,
            Formula::Not(f) => !f.eval(atoms)?,
            Formula::And(a, b) => {
                let (a, b) = (a.eval(atoms)?, b.eval(atoms)?);
                a && b
            }
            Formula::Or(a, b) => {
                let (a, b) = (a.eval(atoms)?, b.eval(atoms)?);
                a || b
            }
        })
    }

    pub fn variables(&self) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables(&self, out: &mut BTreeSet<VarId>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(var, _) => {
                out.insert(*var);
            }
            Formula::Not(f) => f.collect_variables(out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_variables(out);
                b.collect_variables(out);
            }
        }
    }
}

/// Evaluates `f` on `atoms`, failing when a mentioned variable is unassigned.
pub fn eval_formula<A: AtomLookup + ?Sized>(f: &Formula, atoms: &A) -> Result<bool, EvalError> {
    f.eval(atoms)
}
