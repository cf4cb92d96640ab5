//! Discrete-time simulation of an agent driven by a controller.
//!
//! One tick: the controller picks an action, one outcome of the action is
//! sampled, then every event in declaration order whose precondition holds in
//! the running state fires with its occurrence probability and, when it fires,
//! one of its outcomes is sampled. This mirrors the compiled matrix product, so
//! simulated frequencies converge to the compiled transition rows.
//!
//! A draw is consumed only for a genuine choice: an outcome list with more than
//! one entry, or an occurrence probability strictly between 0 and 1.

mod controller;
mod planner;
mod rng;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::compiler::{Dynamics, Outcomes};
use crate::par::{self, Execution};
use crate::prob;
use crate::solver::Strategy;

pub use controller::{Controller, RandomController, ReflexController, ReplanningController, DEFAULT_PLANNER_BUDGET};
pub use planner::{determinized_successor, plan, Plan, PlanResult};
pub use rng::{RandomSource, ScriptedSource, SeededSource};

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next: usize,
    /// Requirement rewards minus the action cost.
    pub reward: f64,
    /// Requirements satisfied on this transition.
    pub satisfied: Vec<usize>,
}

fn sample<R: RandomSource + ?Sized>(outcomes: &Outcomes, rng: &mut R) -> usize {
    if outcomes.len() == 1 {
        return 0;
    }
    let u = rng.next_unit();
    let mut cumulative = 0.0;
    for (i, (_, p)) in outcomes.iter().enumerate() {
        cumulative += prob::to_f64(p);
        if u < cumulative {
            return i;
        }
    }
    outcomes.len() - 1
}

/// Advances `state` by one tick under `action`.
///
/// # Panics
///
/// If two branch preconditions hold at once; [`crate::compiler::compile`]
/// rejects such models.
pub fn step<R: RandomSource + ?Sized>(dynamics: &Dynamics, state: usize, action: usize, rng: &mut R) -> StepOutcome {
    let space = dynamics.space();
    let before = space.decode(state);
    let outcomes = dynamics.action_outcomes(action, &before).unwrap_or_else(|e| panic!("{e}"));
    let mut current = outcomes[sample(&outcomes, rng)].0.clone();
    for event in 0..dynamics.model().events.len() {
        let (occurrence, outcomes) = dynamics.event_outcomes(event, &current).unwrap_or_else(|e| panic!("{e}"));
        if occurrence.is_zero() {
            continue;
        }
        if !occurrence.is_one() && rng.next_unit() >= prob::to_f64(&occurrence) {
            continue;
        }
        current = outcomes[sample(&outcomes, rng)].0.clone();
    }
    let satisfied = (0..dynamics.automata().len()).filter(|&r| dynamics.satisfied(r, &before, &current)).collect();
    StepOutcome {
        next: space.encode(&current),
        reward: dynamics.transition_reward(action, &before, &current),
        satisfied,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub controller: String,
    pub seed: u64,
    pub ticks: u64,
    /// Satisfaction count per requirement.
    pub satisfactions: Vec<u64>,
    pub goals_per_tick: f64,
    pub total_reward: f64,
    pub mean_reward: f64,
    pub mean_latency_ns: f64,
    pub median_latency_ns: f64,
    pub plan_failures: u64,
}

impl Metrics {
    pub fn total_satisfactions(&self) -> u64 {
        self.satisfactions.iter().sum()
    }
}

fn median(sorted: &[u64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2] as f64,
        n => (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0,
    }
}

/// Runs `controller` for `ticks` steps from the initial state. Everything but
/// the latency figures is a function of the inputs.
pub fn run(dynamics: &Dynamics, controller: &mut dyn Controller, ticks: u64, seed: u64) -> Metrics {
    let mut rng = SeededSource::new(seed);
    let mut state = dynamics.initial_state();
    let mut satisfactions = vec![0u64; dynamics.automata().len()];
    let mut total_reward = 0.0;
    let mut latencies = Vec::with_capacity(ticks as usize);
    for _ in 0..ticks {
        let start = Instant::now();
        let action = controller.decide(dynamics, state);
        latencies.push(start.elapsed().as_nanos() as u64);
        let outcome = step(dynamics, state, action, &mut rng);
        controller.observe(dynamics, state, action, outcome.next);
        for r in &outcome.satisfied {
            satisfactions[*r] += 1;
        }
        total_reward += outcome.reward;
        state = outcome.next;
    }
    let per_tick = |x: f64| if ticks == 0 { 0.0 } else { x / ticks as f64 };
    let total: u64 = satisfactions.iter().sum();
    let mean_latency_ns = per_tick(latencies.iter().map(|&l| l as f64).sum());
    latencies.sort_unstable();
    Metrics {
        controller: controller.name().to_string(),
        seed,
        ticks,
        goals_per_tick: per_tick(total as f64),
        satisfactions,
        total_reward,
        mean_reward: per_tick(total_reward),
        mean_latency_ns,
        median_latency_ns: median(&latencies),
        plan_failures: controller.plan_failures(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ControllerKind {
    Reflex,
    Replan,
    Random,
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControllerKind::Reflex => "reflex",
            ControllerKind::Replan => "replan",
            ControllerKind::Random => "random",
        })
    }
}

impl FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reflex" => Ok(ControllerKind::Reflex),
            "replan" => Ok(ControllerKind::Replan),
            "random" => Ok(ControllerKind::Random),
            other => Err(format!("unknown controller `{other}` (expected reflex, replan or random)")),
        }
    }
}

/// Builds a fresh controller for one run. Reflex needs a strategy.
pub fn make_controller(
    kind: ControllerKind,
    dynamics: &Dynamics,
    strategy: Option<&Strategy>,
    budget: usize,
    seed: u64,
) -> Option<Box<dyn Controller + Send>> {
    Some(match kind {
        ControllerKind::Reflex => Box::new(ReflexController::new(strategy?)),
        ControllerKind::Replan => Box::new(ReplanningController::new(dynamics, budget)),
        ControllerKind::Random => Box::new(RandomController::new(seed)),
    })
}

/// One run per (controller, seed) pair, controller-major. Runs are independent
/// and may execute concurrently.
///
/// # Panics
///
/// If `kinds` contains [`ControllerKind::Reflex`] and `strategy` is `None`.
pub fn run_many(
    dynamics: &Dynamics,
    kinds: &[ControllerKind],
    seeds: &[u64],
    ticks: u64,
    strategy: Option<&Strategy>,
    budget: usize,
    exec: Execution,
) -> Vec<Metrics> {
    let jobs: Vec<(ControllerKind, u64)> = kinds.iter().flat_map(|&k| seeds.iter().map(move |&s| (k, s))).collect();
    par::map_slice(exec, &jobs, |&(kind, seed)| {
        let mut controller =
            make_controller(kind, dynamics, strategy, budget, seed).expect("reflex controller requires a strategy");
        run(dynamics, controller.as_mut(), ticks, seed)
    })
}
