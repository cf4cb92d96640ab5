//! Uniform-cost forward search over a determinized model.
//!
//! Each applicable action is replaced by its most likely outcome (ties go to
//! the first declared effect; the no-change residual competes as if declared
//! last). Events are ignored. Requirement statuses play no part, so the search
//! runs over base states only.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use num_traits::Zero;

use crate::compiler::Dynamics;
use crate::dsl::{Effect, Formula};
use crate::prob::{self, Prob};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plan {
    /// Action ids, `noop` excluded.
    pub actions: Vec<usize>,
    /// Predicted base state after each action.
    pub states: Vec<Vec<usize>>,
    pub cost: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlanResult {
    Found(Plan),
    /// The reachable determinized space holds no goal state.
    NoPlan,
    /// The expansion budget ran out first.
    Exhausted,
}

/// Deterministic successor of `base` under action `id`, or `None` when no
/// branch applies or the likeliest outcome changes nothing.
pub fn determinized_successor(dynamics: &Dynamics, id: usize, base: &[usize]) -> Option<Vec<usize>> {
    if id == 0 {
        return None;
    }
    let action = &dynamics.model().actions[id - 1];
    let branch = action.branches.iter().find(|b| b.precondition.holds(base))?;
    let effect = most_likely(&branch.effects)?;
    let mut next = base.to_vec();
    for &(var, value) in &effect.assignments {
        next[var.0] = value;
    }
    (next != base).then_some(next)
}

/// The most likely effect, or `None` when the residual is strictly likelier.
fn most_likely(effects: &[Effect]) -> Option<&Effect> {
    let mut best: Option<&Effect> = None;
    for e in effects {
        if best.is_none_or(|b| e.prob > b.prob) {
            best = Some(e);
        }
    }
    let total = prob::checked_sum(effects.iter().map(|e| &e.prob))?;
    let residual = prob::complement(&total).unwrap_or_else(Prob::zero);
    match best {
        Some(b) if b.prob >= residual => Some(b),
        _ => None,
    }
}

/// Cheapest plan from `start` to a base state satisfying `goal`; ties broken by
/// length, then by the action sequence in declaration order. `budget` caps the
/// number of expanded states.
pub fn plan(dynamics: &Dynamics, start: &[usize], goal: &Formula, budget: usize) -> PlanResult {
    type Key = (u64, usize, Vec<usize>);
    let mut frontier: BinaryHeap<Reverse<(Key, Vec<Vec<usize>>)>> = BinaryHeap::new();
    let mut closed: HashSet<Vec<usize>> = HashSet::new();
    frontier.push(Reverse(((0, 0, Vec::new()), vec![start.to_vec()])));
    let mut expanded = 0usize;
    while let Some(Reverse(((cost, len, actions), path))) = frontier.pop() {
        let here = path.last().expect("path starts at the start state");
        if !closed.insert(here.clone()) {
            continue;
        }
        if goal.holds(here) {
            return PlanResult::Found(Plan { actions, states: path[1..].to_vec(), cost });
        }
        if expanded == budget {
            return PlanResult::Exhausted;
        }
        expanded += 1;
        for id in 1..dynamics.num_actions() {
            if let Some(next) = determinized_successor(dynamics, id, here) {
                if closed.contains(&next) {
                    continue;
                }
                let mut a = actions.clone();
                a.push(id);
                let mut p = path.clone();
                p.push(next);
                frontier.push(Reverse(((cost + dynamics.action_cost(id), len + 1, a), p)));
            }
        }
    }
    PlanResult::NoPlan
}
