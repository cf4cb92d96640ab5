//! Compilation of a domain model into an implicit-event MDP.
//!
//! Per action `a` the pipeline is
//!
//! ```text
//! Pr_a              explicit action matrix (exact rationals)
//! Ê_e = diag(O_e)·Pr_e + diag(1 − O_e)     effective event matrix
//! Pr_ev = Ê_1 × … × Ê_n                    declaration order
//! P̂r_a = Pr_a × Pr_ev                      the action happens before the events
//! R_a(s, s') = Σ_r reward_r(s, s') − cost(a)   on the support of P̂r_a
//! ```
//!
//! Action id 0 is always `noop`; id `k > 0` is `model.actions[k - 1]`.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::dsl::{self, Diagnostic, DomainModel, Formula, Severity, Subject, VarId};
use crate::par::{self, Execution};
use crate::prob::{self, Prob};
use crate::reqauto::{build_automaton, RequirementAutomaton, Snapshot, Status, Step};
use crate::space::{StateLimitExceeded, StateSpace, DEFAULT_MAX_STATES};
use crate::sparse::CsrMatrix;

pub const NOOP: &str = "noop";

pub const DEFAULT_GAMMA: f64 = 0.95;

/// Tolerance for row sums and for the commutation check.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("model is invalid: {}", .0.iter().filter(|d| d.severity == Severity::Error).map(|d| d.message.as_str()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    StateLimit(#[from] StateLimitExceeded),
    #[error("{kind} `{name}`: preconditions of branches {first} and {second} both hold in state {{{state}}}")]
    Overlap {
        kind: &'static str,
        name: String,
        first: usize,
        second: usize,
        state: String,
    },
    #[error("discount factor {0} is not strictly between 0 and 1")]
    Gamma(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompileOptions {
    pub gamma: f64,
    pub max_states: usize,
    pub execution: Execution,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { gamma: DEFAULT_GAMMA, max_states: DEFAULT_MAX_STATES, execution: Execution::default() }
    }
}

/// Successor values paired with their probability.
pub type Outcomes = Vec<(Vec<usize>, Prob)>;

/// Operational semantics of a model over its expanded state space.
///
/// A state is a value vector: one value index per state variable followed by
/// one status index per requirement, as laid out by [`StateSpace`].
#[derive(Clone, Debug)]
pub struct Dynamics {
    model: DomainModel,
    automata: Vec<RequirementAutomaton>,
    space: StateSpace,
}

impl Dynamics {
    pub fn new(model: DomainModel, max_states: usize) -> Result<Self, StateLimitExceeded> {
        let automata: Vec<_> = model.requirements.iter().map(build_automaton).collect();
        let space = StateSpace::new(&model, &automata, max_states)?;
        Ok(Dynamics { model, automata, space })
    }

    pub fn model(&self) -> &DomainModel {
        &self.model
    }

    pub fn automata(&self) -> &[RequirementAutomaton] {
        &self.automata
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// Declared actions plus `noop`.
    pub fn num_actions(&self) -> usize {
        self.model.actions.len() + 1
    }

    pub fn action_name(&self, id: usize) -> &str {
        if id == 0 {
            NOOP
        } else {
            &self.model.actions[id - 1].name
        }
    }

    pub fn action_cost(&self, id: usize) -> u64 {
        if id == 0 {
            0
        } else {
            self.model.actions[id - 1].cost
        }
    }

    pub fn action_id(&self, name: &str) -> Option<usize> {
        if name == NOOP {
            Some(0)
        } else {
            self.model.action_index(name).map(|i| i + 1)
        }
    }

    /// Declared initial base state with every requirement at its initial status.
    pub fn initial_values(&self) -> Vec<usize> {
        let mut values = self.model.initial_state.clone();
        values.extend(self.automata.iter().map(|a| a.index_of(a.initial).expect("initial status")));
        values
    }

    pub fn initial_state(&self) -> usize {
        self.space.encode(&self.initial_values())
    }

    pub fn base<'a>(&self, values: &'a [usize]) -> &'a [usize] {
        &values[..self.space.base_len()]
    }

    pub fn status(&self, values: &[usize], requirement: usize) -> Status {
        self.automata[requirement].status_at(values[self.space.base_len() + requirement])
    }

    fn overlap(&self, kind: &'static str, name: &str, first: usize, second: usize, values: &[usize]) -> CompileError {
        CompileError::Overlap {
            kind,
            name: name.to_string(),
            first,
            second,
            state: self.space.atoms(self.space.encode(values)).join(", "),
        }
    }

    /// Index of the branch whose precondition holds, if any.
    fn select<'a>(
        &self,
        kind: &'static str,
        name: &str,
        preconditions: impl Iterator<Item = &'a Formula>,
        values: &[usize],
    ) -> Result<Option<usize>, CompileError> {
        let base = self.base(values);
        let mut chosen = None;
        for (i, pre) in preconditions.enumerate() {
            if pre.holds(base) {
                if let Some(first) = chosen {
                    return Err(self.overlap(kind, name, first, i, values));
                }
                chosen = Some(i);
            }
        }
        Ok(chosen)
    }

    pub fn action_branch(&self, id: usize, values: &[usize]) -> Result<Option<usize>, CompileError> {
        if id == 0 {
            return Ok(None);
        }
        let a = &self.model.actions[id - 1];
        self.select("action", &a.name, a.branches.iter().map(|b| &b.precondition), values)
    }

    pub fn event_branch(&self, event: usize, values: &[usize]) -> Result<Option<usize>, CompileError> {
        let e = &self.model.events[event];
        self.select("event", &e.name, e.branches.iter().map(|b| &b.precondition), values)
    }

    /// Applies `assignments` to the base and advances every requirement status
    /// against the new base.
    pub fn successor(&self, values: &[usize], assignments: &[(VarId, usize)], step: Step) -> Vec<usize> {
        let n = self.space.base_len();
        let mut next = values.to_vec();
        for &(var, value) in assignments {
            next[var.0] = value;
        }
        for (k, auto) in self.automata.iter().enumerate() {
            let status = auto.next(auto.status_at(values[n + k]), &next[..n], step);
            next[n + k] = auto.index_of(status).expect("automaton is closed under its transitions");
        }
        next
    }

    fn effect_outcomes(&self, values: &[usize], effects: &[dsl::Effect], step: Step) -> Outcomes {
        let mut out: Outcomes = effects
            .iter()
            .filter(|e| !e.prob.is_zero())
            .map(|e| (self.successor(values, &e.assignments, step), e.prob))
            .collect();
        let total = prob::checked_sum(effects.iter().map(|e| &e.prob)).expect("effect probabilities are bounded");
        if let Some(rest) = prob::complement(&total).filter(|r| !r.is_zero()) {
            out.push((self.successor(values, &[], step), rest));
        }
        out
    }

    /// Outcome distribution of executing action `id`. When no branch applies
    /// the base is unchanged but statuses still advance.
    pub fn action_outcomes(&self, id: usize, values: &[usize]) -> Result<Outcomes, CompileError> {
        Ok(match self.action_branch(id, values)? {
            Some(b) => self.effect_outcomes(values, &self.model.actions[id - 1].branches[b].effects, Step::Action),
            None => vec![(self.successor(values, &[], Step::Action), Prob::one())],
        })
    }

    /// Occurrence probability of `event` and its outcome distribution given
    /// that it occurs. Outside every precondition the occurrence is 0 and the
    /// event leaves the state untouched apart from event-step status updates.
    pub fn event_outcomes(&self, event: usize, values: &[usize]) -> Result<(Prob, Outcomes), CompileError> {
        Ok(match self.event_branch(event, values)? {
            Some(b) => {
                let branch = &self.model.events[event].branches[b];
                (branch.occurrence, self.effect_outcomes(values, &branch.effects, Step::Event))
            }
            None => (Prob::zero(), vec![(self.successor(values, &[], Step::Event), Prob::one())]),
        })
    }

    /// Whether requirement `r` is satisfied on `before -> after`.
    pub fn satisfied(&self, r: usize, before: &[usize], after: &[usize]) -> bool {
        let auto = &self.automata[r];
        auto.satisfied(self.snapshot(r, before), self.snapshot(r, after))
    }

    fn snapshot<'a>(&self, r: usize, values: &'a [usize]) -> Snapshot<'a> {
        Snapshot { base: self.base(values), status: self.status(values, r) }
    }

    /// Sum of requirement rewards on `before -> after`, without action cost.
    pub fn requirement_reward(&self, before: &[usize], after: &[usize]) -> u64 {
        self.automata
            .iter()
            .enumerate()
            .map(|(r, auto)| auto.reward(self.snapshot(r, before), self.snapshot(r, after)))
            .sum()
    }

    /// Transition reward `Σ rewards − cost` of action `id` on `before -> after`.
    pub fn transition_reward(&self, id: usize, before: &[usize], after: &[usize]) -> f64 {
        self.requirement_reward(before, after) as f64 - self.action_cost(id) as f64
    }
}

fn exact_row(space: &StateSpace, outcomes: Outcomes) -> Vec<(usize, Prob)> {
    let mut row: BTreeMap<usize, Prob> = BTreeMap::new();
    for (values, p) in outcomes {
        *row.entry(space.encode(&values)).or_insert_with(Prob::zero) += p;
    }
    row.into_iter().collect()
}

/// Explicit transition matrix of action `id`, exact.
pub fn explicit_action_matrix(dynamics: &Dynamics, id: usize, exec: Execution) -> Result<CsrMatrix<Prob>, CompileError> {
    let space = dynamics.space();
    let rows = par::try_map_range(exec, space.len(), |s| {
        dynamics.action_outcomes(id, &space.decode(s)).map(|o| exact_row(space, o))
    })?;
    Ok(CsrMatrix::from_rows(space.len(), rows))
}

/// Explicit transition matrix of `event` (outcomes given occurrence), exact.
pub fn explicit_event_matrix(dynamics: &Dynamics, event: usize, exec: Execution) -> Result<CsrMatrix<Prob>, CompileError> {
    let space = dynamics.space();
    let rows = par::try_map_range(exec, space.len(), |s| {
        dynamics.event_outcomes(event, &space.decode(s)).map(|o| exact_row(space, o.1))
    })?;
    Ok(CsrMatrix::from_rows(space.len(), rows))
}

/// `O_e(s)`: the occurrence probability of the branch that holds in `s`, or 0.
pub fn occurrence_vector(dynamics: &Dynamics, event: usize, exec: Execution) -> Result<Vec<Prob>, CompileError> {
    let space = dynamics.space();
    let e = &dynamics.model().events[event];
    par::try_map_range(exec, space.len(), |s| {
        Ok(dynamics.event_branch(event, &space.decode(s))?.map_or(Prob::zero(), |b| e.branches[b].occurrence))
    })
}

/// `diag(O)·Pr_e + diag(1 − O)`.
pub fn effective_event_matrix(explicit: &CsrMatrix<Prob>, occurrence: &[Prob]) -> CsrMatrix<f64> {
    assert_eq!(explicit.n_rows(), occurrence.len());
    let rows = (0..explicit.n_rows())
        .map(|s| {
            let o = occurrence[s];
            let mut row: Vec<(usize, f64)> = if o.is_zero() {
                Vec::new()
            } else {
                explicit.row_entries(s).map(|(j, p)| (j, prob::to_f64(&o) * prob::to_f64(p))).collect()
            };
            let stay = prob::complement(&o).expect("occurrence probability is at most 1");
            if !stay.is_zero() {
                match row.binary_search_by_key(&s, |e| e.0) {
                    Ok(k) => row[k].1 += prob::to_f64(&stay),
                    Err(k) => row.insert(k, (s, prob::to_f64(&stay))),
                }
            }
            row
        })
        .collect();
    CsrMatrix::from_rows(explicit.n_cols(), rows)
}

/// Effective matrix of every event, in declaration order.
pub fn effective_event_matrices(dynamics: &Dynamics, exec: Execution) -> Result<Vec<CsrMatrix<f64>>, CompileError> {
    (0..dynamics.model().events.len())
        .map(|e| {
            let explicit = explicit_event_matrix(dynamics, e, exec)?;
            let occurrence = occurrence_vector(dynamics, e, exec)?;
            Ok(effective_event_matrix(&explicit, &occurrence))
        })
        .collect()
}

/// `Ê_1 × … × Ê_n`; the identity when there are no events.
pub fn events_matrix(n_states: usize, effective: &[CsrMatrix<f64>], exec: Execution) -> CsrMatrix<f64> {
    let mut iter = effective.iter();
    let Some(first) = iter.next() else {
        return CsrMatrix::identity(n_states);
    };
    iter.fold(first.clone(), |acc, m| acc.mul(m, exec))
}

/// `Pr_a × Pr_ev`.
pub fn implicit_action_matrix(explicit: &CsrMatrix<f64>, events: &CsrMatrix<f64>, exec: Execution) -> CsrMatrix<f64> {
    explicit.mul(events, exec)
}

/// Rewards of action `id` on the support of its implicit matrix.
pub fn reward_matrix(dynamics: &Dynamics, id: usize, implicit: &CsrMatrix<f64>, exec: Execution) -> CsrMatrix<f64> {
    let space = dynamics.space();
    let values: Vec<Vec<f64>> = par::map_range(exec, implicit.n_rows(), |s| {
        let before = space.decode(s);
        let mut after = Vec::with_capacity(before.len());
        implicit
            .row(s)
            .0
            .iter()
            .map(|&j| {
                space.decode_into(j, &mut after);
                dynamics.transition_reward(id, &before, &after)
            })
            .collect()
    });
    implicit.with_values(values.into_iter().flatten().collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdpAction {
    pub name: String,
    pub cost: u64,
    pub transitions: CsrMatrix<f64>,
    pub rewards: CsrMatrix<f64>,
}

/// A compiled MDP. Action 0 is `noop`.
#[derive(Clone, Debug, PartialEq)]
pub struct MdpModel {
    pub space: StateSpace,
    pub actions: Vec<MdpAction>,
    pub gamma: f64,
    pub initial_state: usize,
}

impl MdpModel {
    pub fn num_states(&self) -> usize {
        self.space.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a.name == name)
    }

    pub fn num_transitions(&self) -> usize {
        self.actions.iter().map(|a| a.transitions.nnz()).sum()
    }

    /// Checks shapes, row-stochasticity and reward supports.
    pub fn check(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!("discount factor {} is not strictly between 0 and 1", self.gamma));
        }
        let n = self.num_states();
        if self.initial_state >= n.max(1) {
            return Err(format!("initial state {} out of range", self.initial_state));
        }
        if self.actions.is_empty() {
            return Err("model has no actions".into());
        }
        for a in &self.actions {
            if a.transitions.n_rows() != n || a.transitions.n_cols() != n {
                return Err(format!("action `{}`: transition matrix is not {n}x{n}", a.name));
            }
            if !a.transitions.same_pattern(&a.rewards) {
                return Err(format!("action `{}`: rewards are not defined on the transition support", a.name));
            }
            if let Some((row, sum)) = a.transitions.first_non_stochastic_row(STOCHASTIC_TOLERANCE) {
                return Err(format!("action `{}`: row {row} sums to {sum}", a.name));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Compilation {
    pub dynamics: Dynamics,
    pub mdp: MdpModel,
    /// Validation warnings and commutation warnings.
    pub warnings: Vec<Diagnostic>,
}

/// Validates and compiles `model`. Output is deterministic for a fixed model
/// regardless of the execution mode.
pub fn compile(model: &DomainModel, options: &CompileOptions) -> Result<Compilation, CompileError> {
    let mut warnings = dsl::validate(model);
    if dsl::has_errors(&warnings) {
        return Err(CompileError::Invalid(warnings));
    }
    if !(options.gamma > 0.0 && options.gamma < 1.0) {
        return Err(CompileError::Gamma(options.gamma));
    }
    let exec = options.execution;
    let dynamics = Dynamics::new(model.clone(), options.max_states)?;
    let n = dynamics.space().len();

    let effective = effective_event_matrices(&dynamics, exec)?;
    warnings.extend(commutation_warnings(&dynamics, &effective));
    let events = events_matrix(n, &effective, exec);

    let actions = (0..dynamics.num_actions())
        .map(|id| {
            let explicit = explicit_action_matrix(&dynamics, id, exec)?.map(prob::to_f64);
            let transitions = implicit_action_matrix(&explicit, &events, exec);
            let rewards = reward_matrix(&dynamics, id, &transitions, exec);
            Ok(MdpAction {
                name: dynamics.action_name(id).to_string(),
                cost: dynamics.action_cost(id),
                transitions,
                rewards,
            })
        })
        .collect::<Result<Vec<_>, CompileError>>()?;

    let mdp = MdpModel { space: dynamics.space().clone(), actions, gamma: options.gamma, initial_state: dynamics.initial_state() };
    Ok(Compilation { dynamics, mdp, warnings })
}

const COMMUTATION_SAMPLES: usize = 256;

/// Compares `Ê_i × Ê_j` with `Ê_j × Ê_i` on evenly spaced sample rows.
fn commutation_warnings(dynamics: &Dynamics, effective: &[CsrMatrix<f64>]) -> Vec<Diagnostic> {
    let n = dynamics.space().len();
    let stride = n.div_ceil(COMMUTATION_SAMPLES).max(1);
    let events = &dynamics.model().events;
    let mut out = Vec::new();
    for i in 0..effective.len() {
        for j in i + 1..effective.len() {
            let witness = (0..n).step_by(stride).find(|&s| {
                let ij = effective[i].row_product(&effective[j], s);
                let ji = effective[j].row_product(&effective[i], s);
                !rows_close(&ij, &ji, STOCHASTIC_TOLERANCE)
            });
            if let Some(s) = witness {
                out.push(Diagnostic {
                    severity: Severity::Warning,
                    subject: Subject::Event(j),
                    message: format!(
                        "events `{}` and `{}` do not commute in state {{{}}}; they are composed in declaration order",
                        events[i].name,
                        events[j].name,
                        dynamics.space().atoms(s).join(", ")
                    ),
                });
            }
        }
    }
    out
}

fn rows_close(a: &[(usize, f64)], b: &[(usize, f64)], tol: f64) -> bool {
    let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
    for &(j, v) in a {
        *merged.entry(j).or_default() += v;
    }
    for &(j, v) in b {
        *merged.entry(j).or_default() -= v;
    }
    merged.values().all(|d| d.abs() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_domain;
    use crate::prob::parse_prob;

    const TOY: &str = "
        Action a if !x effects <x prob 0.8> <y prob 0.2> cost 10
        Action b if x effects <!x> cost 5
        Event e if !x occur prob 0.2 effects <x prob 0.8> <y prob 0.2>
        ReqID m achieve x if !x reward 100
        Init { x, y }
    ";

    fn toy() -> Dynamics {
        Dynamics::new(parse_domain(TOY).unwrap(), DEFAULT_MAX_STATES).unwrap()
    }

    fn state(d: &Dynamics, x: &str, y: &str, m: &str) -> usize {
        d.space().find(&[("x", x), ("y", y), ("m", m)]).unwrap()
    }

    #[test]
    fn explicit_action_matrix_of_the_toy_model() {
        let d = toy();
        let s2 = state(&d, "ff", "ff", "R");
        let s4 = state(&d, "tt", "ff", "I");
        let pa = explicit_action_matrix(&d, 1, Execution::Sequential).unwrap();
        assert_eq!(pa.get(s2, s4), Some(&parse_prob("0.8").unwrap()));
        // y becomes true, x still false, so m stays in force
        assert_eq!(pa.get(s2, state(&d, "ff", "tt", "R")), Some(&parse_prob("0.2").unwrap()));
        assert_eq!(pa.row(s2).0.len(), 2);
    }

    #[test]
    fn noop_without_requirements_is_identity() {
        let d = Dynamics::new(parse_domain("Action a if true effects <x> Init { x, y }").unwrap(), 100).unwrap();
        let p = explicit_action_matrix(&d, 0, Execution::Sequential).unwrap().map(prob::to_f64);
        assert!(p.is_identity());
    }

    #[test]
    fn residual_mass_self_loops() {
        let d = Dynamics::new(parse_domain("Action a if true effects <x prob 0.6> Init { !x }").unwrap(), 100).unwrap();
        let p = explicit_action_matrix(&d, 1, Execution::Sequential).unwrap();
        // x=tt is state 0, x=ff is state 1
        assert_eq!(p.get(1, 0), Some(&parse_prob("0.6").unwrap()));
        assert_eq!(p.get(1, 1), Some(&parse_prob("0.4").unwrap()));
    }

    #[test]
    fn occurrence_vector_of_the_toy_event() {
        let d = toy();
        let o = occurrence_vector(&d, 0, Execution::Sequential).unwrap();
        for (s, occurrence) in o.iter().enumerate() {
            let x_false = d.space().decode(s)[0] == 1;
            let expected = if x_false { parse_prob("0.2").unwrap() } else { Prob::zero() };
            assert_eq!(*occurrence, expected, "state {s}");
        }
    }

    #[test]
    fn false_event_is_identity() {
        let d = Dynamics::new(parse_domain("Event e if false effects <x> Init { !x }").unwrap(), 100).unwrap();
        let eff = effective_event_matrices(&d, Execution::Sequential).unwrap();
        assert!(eff[0].is_identity());
    }

    #[test]
    fn overlapping_branches_are_rejected_with_a_witness() {
        let d = Dynamics::new(
            parse_domain("Action a if x effects <!y> if y effects <!x> Init { x, y }").unwrap(),
            100,
        )
        .unwrap();
        let err = explicit_action_matrix(&d, 1, Execution::Parallel).unwrap_err();
        match err {
            CompileError::Overlap { name, first, second, state, .. } => {
                assert_eq!((name.as_str(), first, second), ("a", 0, 1));
                assert_eq!(state, "x=tt, y=tt");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn toy_rewards_and_shapes() {
        let c = compile(&parse_domain(TOY).unwrap(), &CompileOptions::default()).unwrap();
        let d = &c.dynamics;
        assert_eq!(c.mdp.num_states(), 8);
        assert_eq!(c.mdp.num_actions(), 3);
        let (s2, s4) = (state(d, "ff", "ff", "R"), state(d, "tt", "ff", "I"));
        assert_eq!(c.mdp.actions[1].rewards.get(s2, s4), Some(&90.0));
        c.mdp.check().unwrap();
    }

    #[test]
    fn non_commuting_events_are_reported() {
        let m = parse_domain("Event e if x effects <y> Event f if true effects <!x> Init { x, !y }").unwrap();
        let c = compile(&m, &CompileOptions::default()).unwrap();
        assert!(c.warnings.iter().any(|w| w.message.contains("do not commute")));
    }

    #[test]
    fn invalid_models_and_gamma_are_rejected() {
        let mut m = parse_domain("ReqID r achieve x reward 1 Init { x }").unwrap();
        let opts = CompileOptions { gamma: 1.0, ..Default::default() };
        assert!(matches!(compile(&m, &opts), Err(CompileError::Gamma(_))));
        m.requirements[0].activation = Some(Formula::True);
        assert!(matches!(compile(&m, &CompileOptions::default()), Err(CompileError::Invalid(_))));
    }
}
