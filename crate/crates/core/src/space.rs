//! Enumeration and indexing of expanded states.
//!
//! A state assigns every state variable and every requirement variable a
//! value. States are indexed lexicographically over the variable order (state
//! variables in declaration order, then requirements), the first variable
//! being the most significant, each domain in declaration order.

use thiserror::Error;

use crate::dsl::DomainModel;
use crate::reqauto::{RequirementAutomaton, Status};

pub const DEFAULT_MAX_STATES: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("model has {count} expanded states, above the limit of {limit}")]
pub struct StateLimitExceeded {
    /// Saturates at `u128::MAX` on overflow.
    pub count: u128,
    pub limit: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateSpace {
    names: Vec<String>,
    domains: Vec<Vec<String>>,
    n_base: usize,
    strides: Vec<usize>,
    len: usize,
}

/// Product of the domain sizes, saturating.
pub fn state_count(sizes: impl IntoIterator<Item = usize>) -> u128 {
    sizes.into_iter().fold(1u128, |acc, n| acc.saturating_mul(n as u128))
}

impl StateSpace {
    pub fn new(
        model: &DomainModel,
        automata: &[RequirementAutomaton],
        max_states: usize,
    ) -> Result<Self, StateLimitExceeded> {
        let mut names: Vec<String> = model.variables.iter().map(|v| v.name.clone()).collect();
        let mut domains: Vec<Vec<String>> = model.variables.iter().map(|v| v.values.clone()).collect();
        for a in automata {
            names.push(a.name().to_string());
            domains.push(a.statuses.iter().map(Status::to_string).collect());
        }
        Self::from_parts(names, domains, model.variables.len(), max_states)
    }

    pub fn from_parts(
        names: Vec<String>,
        domains: Vec<Vec<String>>,
        n_base: usize,
        max_states: usize,
    ) -> Result<Self, StateLimitExceeded> {
        assert_eq!(names.len(), domains.len());
        assert!(n_base <= names.len());
        let count = state_count(domains.iter().map(Vec::len));
        if count > max_states as u128 {
            return Err(StateLimitExceeded { count, limit: max_states });
        }
        let len = count as usize;
        let mut strides = vec![1usize; domains.len()];
        for i in (0..domains.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * domains[i + 1].len();
        }
        Ok(StateSpace { names, domains, n_base, strides, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of state (non-requirement) variables.
    pub fn base_len(&self) -> usize {
        self.n_base
    }

    pub fn num_variables(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn domains(&self) -> &[Vec<String>] {
        &self.domains
    }

    pub fn decode_into(&self, mut index: usize, out: &mut Vec<usize>) {
        debug_assert!(index < self.len);
        out.clear();
        for (stride, domain) in self.strides.iter().zip(&self.domains) {
            let v = index / stride;
            index -= v * stride;
            debug_assert!(v < domain.len());
            out.push(v);
        }
    }

    pub fn decode(&self, index: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.names.len());
        self.decode_into(index, &mut out);
        out
    }

    pub fn encode(&self, values: &[usize]) -> usize {
        debug_assert_eq!(values.len(), self.strides.len());
        values.iter().zip(&self.strides).map(|(v, s)| v * s).sum()
    }

    /// Atom labels `name=value` for a state, in variable order.
    pub fn atoms(&self, index: usize) -> Vec<String> {
        self.decode(index)
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{}={}", self.names[i], self.domains[i][*v]))
            .collect()
    }

    /// Index of the state with exactly these atoms, if it exists.
    pub fn find(&self, atoms: &[(&str, &str)]) -> Option<usize> {
        if atoms.len() != self.names.len() {
            return None;
        }
        let mut values = vec![usize::MAX; self.names.len()];
        for (name, value) in atoms {
            let i = self.names.iter().position(|n| n == name)?;
            values[i] = self.domains[i].iter().position(|v| v == value)?;
        }
        if values.contains(&usize::MAX) {
            return None;
        }
        Some(self.encode(&values))
    }
}
