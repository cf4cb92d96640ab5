//! Optimal memoryless strategies by value iteration and policy iteration.

use std::fmt;

use thiserror::Error;

use crate::compiler::MdpModel;
use crate::linsolve::{self, SparseSystem};
use crate::par::{self, Execution};

pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Above this many states policy evaluation is iterative.
pub const DEFAULT_DIRECT_LIMIT: usize = 50_000;

/// Relative tolerance under which two action values count as tied.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("epsilon must be positive, got {0}")]
    Epsilon(f64),
    #[error("discount factor {0} is not strictly between 0 and 1")]
    Gamma(f64),
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("policy evaluation failed to converge")]
    Evaluation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub epsilon: f64,
    pub execution: Execution,
    /// Largest state count evaluated by a direct sparse solve.
    pub direct_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { epsilon: DEFAULT_EPSILON, execution: Execution::default(), direct_limit: DEFAULT_DIRECT_LIMIT }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    ValueIteration,
    PolicyIteration,
    Greedy,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ValueIteration => "value",
            Method::PolicyIteration => "policy",
            Method::Greedy => "greedy",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Strategy {
    /// Chosen action index per state.
    pub actions: Vec<usize>,
    pub values: Vec<f64>,
    pub method: Method,
    pub iterations: usize,
    /// Max-norm change of the last sweep (value iteration) or 0.
    pub residual: f64,
}

impl Strategy {
    pub fn action(&self, state: usize) -> usize {
        self.actions[state]
    }
}

/// Expected immediate reward `r_a(s) = Σ_j P_a(s,j)·R_a(s,j)` per action.
fn expected_rewards(mdp: &MdpModel, exec: Execution) -> Vec<Vec<f64>> {
    par::map_slice(exec, &mdp.actions, |a| {
        (0..mdp.num_states())
            .map(|s| a.transitions.row(s).1.iter().zip(a.rewards.row(s).1).map(|(p, r)| p * r).sum())
            .collect()
    })
}

struct Backup<'a> {
    mdp: &'a MdpModel,
    rewards: Vec<Vec<f64>>,
}

impl<'a> Backup<'a> {
    fn new(mdp: &'a MdpModel, exec: Execution) -> Result<Self, SolveError> {
        mdp.check().map_err(SolveError::Malformed)?;
        Ok(Backup { mdp, rewards: expected_rewards(mdp, exec) })
    }

    fn q(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        let (cols, probs) = self.mdp.actions[a].transitions.row(s);
        let future: f64 = cols.iter().zip(probs).map(|(&j, p)| p * v[j]).sum();
        self.rewards[a][s] + self.mdp.gamma * future
    }

    /// Best action by lowest index among those within `tol` of the maximum.
    fn best(&self, s: usize, v: &[f64], tol: f64) -> (usize, f64) {
        let qs: Vec<f64> = (0..self.mdp.num_actions()).map(|a| self.q(s, a, v)).collect();
        let max = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let slack = tol.max(TIE_TOLERANCE * (1.0 + max.abs()));
        let a = qs.iter().position(|&q| q >= max - slack).expect("at least one action");
        (a, max)
    }
}

/// Greedy strategy for `values`; ties go to the lowest action index.
pub fn greedy_policy(mdp: &MdpModel, values: &[f64], exec: Execution) -> Result<Strategy, SolveError> {
    let backup = Backup::new(mdp, exec)?;
    let actions = par::map_range(exec, mdp.num_states(), |s| backup.best(s, values, 0.0).0);
    Ok(Strategy { actions, values: values.to_vec(), method: Method::Greedy, iterations: 0, residual: 0.0 })
}

fn check_inputs(mdp: &MdpModel, options: &SolverOptions) -> Result<(), SolveError> {
    if options.epsilon.is_nan() || options.epsilon <= 0.0 {
        return Err(SolveError::Epsilon(options.epsilon));
    }
    if !(mdp.gamma > 0.0 && mdp.gamma < 1.0) {
        return Err(SolveError::Gamma(mdp.gamma));
    }
    Ok(())
}

/// Synchronous Bellman backups from `V ≡ 0`, stopping once the max-norm
/// change drops below `ε(1−γ)/(2γ)`, which bounds the distance to the optimum
/// by `ε/2`.
pub fn value_iteration(mdp: &MdpModel, options: &SolverOptions) -> Result<Strategy, SolveError> {
    check_inputs(mdp, options)?;
    let exec = options.execution;
    let backup = Backup::new(mdp, exec)?;
    let gamma = mdp.gamma;
    let threshold = options.epsilon * (1.0 - gamma) / (2.0 * gamma);
    let n = mdp.num_states();
    let mut v = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while residual >= threshold {
        let next = par::map_range(exec, n, |s| backup.best(s, &v, 0.0).1);
        residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        iterations += 1;
    }
    // action values carry an error of at most γε; actions that close to the
    // best are indistinguishable and resolve to the lowest index
    let tol = gamma * options.epsilon;
    let actions = par::map_range(exec, n, |s| backup.best(s, &v, tol).0);
    Ok(Strategy { actions, values: v, method: Method::ValueIteration, iterations, residual })
}

/// Exact value of following `actions` forever: solves `(I − γP_π)V = r_π`
/// directly when small enough, otherwise iterates the fixed point.
pub fn evaluate_policy(mdp: &MdpModel, actions: &[usize], options: &SolverOptions) -> Result<Vec<f64>, SolveError> {
    check_inputs(mdp, options)?;
    let backup = Backup::new(mdp, options.execution)?;
    evaluate(&backup, actions, options)
}

fn evaluate(backup: &Backup<'_>, actions: &[usize], options: &SolverOptions) -> Result<Vec<f64>, SolveError> {
    let mdp = backup.mdp;
    let n = mdp.num_states();
    let gamma = mdp.gamma;
    let r: Vec<f64> = (0..n).map(|s| backup.rewards[actions[s]][s]).collect();
    if n <= options.direct_limit {
        let rows = (0..n)
            .map(|s| {
                let (cols, probs) = mdp.actions[actions[s]].transitions.row(s);
                let mut row: Vec<(usize, f64)> = cols.iter().zip(probs).map(|(&j, p)| (j, -gamma * p)).collect();
                match row.binary_search_by_key(&s, |e| e.0) {
                    Ok(k) => row[k].1 += 1.0,
                    Err(k) => row.insert(k, (s, 1.0)),
                }
                row
            })
            .collect();
        let system = SparseSystem { rows };
        let nnz: usize = system.rows.iter().map(Vec::len).sum();
        if let Some(v) = linsolve::solve(&system, &r, 16 * nnz + 100_000) {
            return Ok(v);
        }
    }
    // fixed point; stops when the distance to the true value is below ε/1000
    let threshold = options.epsilon * 1e-3 * (1.0 - gamma) / gamma;
    let mut v = r.clone();
    for _ in 0..1_000_000 {
        let next = par::map_range(options.execution, n, |s| {
            let (cols, probs) = mdp.actions[actions[s]].transitions.row(s);
            r[s] + gamma * cols.iter().zip(probs).map(|(&j, p)| p * v[j]).sum::<f64>()
        });
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta < threshold {
            return Ok(v);
        }
    }
    Err(SolveError::Evaluation)
}

/// Howard's policy iteration starting from the all-`noop` policy. `observe`
/// sees each evaluated policy with its values.
pub fn policy_iteration_with(
    mdp: &MdpModel,
    options: &SolverOptions,
    mut observe: impl FnMut(&[usize], &[f64]),
) -> Result<Strategy, SolveError> {
    check_inputs(mdp, options)?;
    let exec = options.execution;
    let backup = Backup::new(mdp, exec)?;
    let n = mdp.num_states();
    let mut policy = vec![0usize; n];
    let mut iterations = 0;
    loop {
        let v = evaluate(&backup, &policy, options)?;
        observe(&policy, &v);
        iterations += 1;
        let improved = par::map_range(exec, n, |s| {
            let (best, max) = backup.best(s, &v, 0.0);
            let current = backup.q(s, policy[s], &v);
            // switching needs a strict improvement beyond rounding noise
            if max > current + TIE_TOLERANCE * (1.0 + max.abs()) {
                best
            } else {
                policy[s]
            }
        });
        if improved == policy {
            // any greedy policy for the optimal values is optimal; report the
            // canonical lowest-index one
            let actions = par::map_range(exec, n, |s| backup.best(s, &v, 0.0).0);
            return Ok(Strategy { actions, values: v, method: Method::PolicyIteration, iterations, residual: 0.0 });
        }
        policy = improved;
    }
}

pub fn policy_iteration(mdp: &MdpModel, options: &SolverOptions) -> Result<Strategy, SolveError> {
    policy_iteration_with(mdp, options, |_, _| {})
}

pub fn solve(mdp: &MdpModel, method: Method, options: &SolverOptions) -> Result<Strategy, SolveError> {
    match method {
        Method::ValueIteration => value_iteration(mdp, options),
        Method::PolicyIteration => policy_iteration(mdp, options),
        Method::Greedy => greedy_policy(mdp, &vec![0.0; mdp.num_states()], options.execution),
    }
}

/// Largest deviation of any transition row sum from 1.
pub fn max_row_error(mdp: &MdpModel) -> f64 {
    mdp.actions
        .iter()
        .flat_map(|a| (0..mdp.num_states()).map(move |s| (a.transitions.row_sum(s) - 1.0).abs()))
        .fold(0.0, f64::max)
}
