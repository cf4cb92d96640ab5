use std::collections::{HashSet, VecDeque};

use crate::compiler::Dynamics;
use crate::dsl::{Formula, RequirementKind};
use crate::reqauto::Status;
use crate::solver::Strategy;

use super::planner::{self, PlanResult};
use super::rng::SeededSource;

/// Chooses the agent's next action from the current expanded state.
pub trait Controller {
    fn name(&self) -> &str;

    /// Action id for `state`; 0 is `noop`.
    fn decide(&mut self, dynamics: &Dynamics, state: usize) -> usize;

    /// Called after each step with the state actually reached.
    fn observe(&mut self, _dynamics: &Dynamics, _from: usize, _action: usize, _to: usize) {}

    fn plan_failures(&self) -> u64 {
        0
    }
}

/// Table lookup in a precomputed strategy.
#[derive(Clone, Debug)]
pub struct ReflexController {
    table: Vec<usize>,
}

impl ReflexController {
    pub fn new(strategy: &Strategy) -> Self {
        ReflexController { table: strategy.actions.clone() }
    }

    pub fn from_table(table: Vec<usize>) -> Self {
        ReflexController { table }
    }
}

impl Controller for ReflexController {
    fn name(&self) -> &str {
        "reflex"
    }

    #[inline]
    fn decide(&mut self, _dynamics: &Dynamics, state: usize) -> usize {
        self.table[state]
    }
}

/// Uniform choice among `noop` and the actions with an applicable branch.
#[derive(Clone, Debug)]
pub struct RandomController {
    rng: SeededSource,
}

impl RandomController {
    pub fn new(seed: u64) -> Self {
        RandomController { rng: SeededSource::with_stream(seed, 1) }
    }
}

impl Controller for RandomController {
    fn name(&self) -> &str {
        "random"
    }

    fn decide(&mut self, dynamics: &Dynamics, state: usize) -> usize {
        let values = dynamics.space().decode(state);
        let base = dynamics.base(&values);
        let mut candidates = vec![0];
        candidates.extend((1..dynamics.num_actions()).filter(|&id| {
            dynamics.model().actions[id - 1].branches.iter().any(|b| b.precondition.holds(base))
        }));
        candidates[self.rng.below(candidates.len())]
    }
}

pub const DEFAULT_PLANNER_BUDGET: usize = 10_000;

/// Monitor-analyze-plan-execute baseline: plans toward the active achieve
/// goals on a determinized model and follows the plan until the observed state
/// departs from the prediction.
#[derive(Clone, Debug)]
pub struct ReplanningController {
    goals: Vec<usize>,
    budget: usize,
    plan: VecDeque<(usize, Vec<usize>)>,
    expected: Option<Vec<usize>>,
    /// (base, active goals) pairs known to have no plan.
    hopeless: HashSet<(Vec<usize>, Vec<usize>)>,
    divergences: u64,
    exhaustions: u64,
}

impl ReplanningController {
    pub fn new(dynamics: &Dynamics, budget: usize) -> Self {
        use RequirementKind::*;
        let goals = dynamics
            .automata()
            .iter()
            .enumerate()
            .filter(|(_, a)| matches!(a.requirement.kind, UA | CA | DEA | DFA))
            .map(|(i, _)| i)
            .collect();
        ReplanningController {
            goals,
            budget,
            plan: VecDeque::new(),
            expected: None,
            hopeless: HashSet::new(),
            divergences: 0,
            exhaustions: 0,
        }
    }

    /// Requirements tracked as planning goals.
    pub fn goals(&self) -> &[usize] {
        &self.goals
    }

    /// Plans abandoned because the state departed from the prediction.
    pub fn divergences(&self) -> u64 {
        self.divergences
    }

    /// Planner calls that ran out of budget.
    pub fn exhaustions(&self) -> u64 {
        self.exhaustions
    }

    /// Goals whose required condition should currently be pursued.
    pub fn active_goals(&self, dynamics: &Dynamics, values: &[usize]) -> Vec<usize> {
        use RequirementKind::*;
        self.goals
            .iter()
            .copied()
            .filter(|&r| {
                let auto = &dynamics.automata()[r];
                match (auto.requirement.kind, dynamics.status(values, r)) {
                    (UA, _) => !auto.requirement.required.holds(dynamics.base(values)),
                    (CA, Status::InForce) => true,
                    (DEA | DFA, Status::Deadline(_)) => true,
                    _ => false,
                }
            })
            .collect()
    }
}

impl Controller for ReplanningController {
    fn name(&self) -> &str {
        "replan"
    }

    fn decide(&mut self, dynamics: &Dynamics, state: usize) -> usize {
        if self.plan.is_empty() {
            let values = dynamics.space().decode(state);
            let active = self.active_goals(dynamics, &values);
            if active.is_empty() {
                self.expected = None;
                return 0;
            }
            let base = dynamics.base(&values).to_vec();
            let key = (base, active);
            if self.hopeless.contains(&key) {
                self.expected = None;
                return 0;
            }
            let goal = Formula::any(key.1.iter().map(|&r| dynamics.automata()[r].requirement.required.clone()));
            match planner::plan(dynamics, &key.0, &goal, self.budget) {
                PlanResult::Found(p) => self.plan = p.actions.into_iter().zip(p.states).collect(),
                PlanResult::NoPlan => {
                    self.hopeless.insert(key);
                }
                PlanResult::Exhausted => {
                    self.exhaustions += 1;
                    self.hopeless.insert(key);
                }
            }
        }
        match self.plan.pop_front() {
            Some((action, predicted)) => {
                self.expected = Some(predicted);
                action
            }
            None => {
                self.expected = None;
                0
            }
        }
    }

    fn observe(&mut self, dynamics: &Dynamics, _from: usize, _action: usize, to: usize) {
        if let Some(expected) = self.expected.take() {
            let values = dynamics.space().decode(to);
            if dynamics.base(&values) != expected.as_slice() {
                self.divergences += 1;
                self.plan.clear();
            }
        }
    }

    fn plan_failures(&self) -> u64 {
        self.divergences + self.exhaustions
    }
}
