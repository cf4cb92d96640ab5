//! Requirement status automata.
//!
//! Each requirement gets a finite status variable whose value records enough
//! history to make its reward Markovian. Two update functions exist: one for
//! action steps, which advance time and decrement deadline/duration counters,
//! and one for event steps, which never decrement. Everything triggered by a
//! condition (activation, cancellation, satisfaction) behaves the same in both.
//!
//! Rows are checked in order, so cancellation wins over satisfaction.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dsl::{Requirement, RequirementKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Status {
    /// `-`: unconditional requirements carry no state.
    Stateless,
    /// `I`: inactive.
    Inactive,
    /// `R`: in force (conditional kinds).
    InForce,
    /// `A`: activated, waiting for the required condition (duration kinds).
    Active,
    /// `A(k)`: k action steps left before the deadline.
    Deadline(u32),
    /// `R(k)`: k action steps left of the required duration.
    Duration(u32),
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Stateless => f.write_str("-"),
            Status::Inactive => f.write_str("I"),
            Status::InForce => f.write_str("R"),
            Status::Active => f.write_str("A"),
            Status::Deadline(k) => write!(f, "A({k})"),
            Status::Duration(k) => write!(f, "R({k})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomatonError {
    #[error("`{status}` is not a status of requirement `{requirement}`")]
    UnknownStatus { requirement: String, status: String },
    #[error("malformed status label `{0}`")]
    BadLabel(String),
}

impl FromStr for Status {
    type Err = AutomatonError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let counter = |inner: &str| inner.parse::<u32>().map_err(|_| AutomatonError::BadLabel(s.to_string()));
        match s {
            "-" => Ok(Status::Stateless),
            "I" => Ok(Status::Inactive),
            "R" => Ok(Status::InForce),
            "A" => Ok(Status::Active),
            _ => {
                if let Some(inner) = s.strip_prefix("A(").and_then(|r| r.strip_suffix(')')) {
                    Ok(Status::Deadline(counter(inner)?))
                } else if let Some(inner) = s.strip_prefix("R(").and_then(|r| r.strip_suffix(')')) {
                    Ok(Status::Duration(counter(inner)?))
                } else {
                    Err(AutomatonError::BadLabel(s.to_string()))
                }
            }
        }
    }
}

/// Whether an update is caused by the agent's action (time advances) or by an
/// exogenous event occurring in the same tick.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Action,
    Event,
}

/// A base state together with one requirement's status.
#[derive(Clone, Copy, Debug)]
pub struct Snapshot<'a> {
    pub base: &'a [usize],
    pub status: Status,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RequirementAutomaton {
    pub requirement: Requirement,
    pub statuses: Vec<Status>,
    pub initial: Status,
    deadline: u32,
    duration: u32,
}

pub fn build_automaton(req: &Requirement) -> RequirementAutomaton {
    RequirementAutomaton::new(req.clone())
}

impl RequirementAutomaton {
    pub fn new(requirement: Requirement) -> Self {
        use RequirementKind::*;
        let deadline = requirement.deadline.unwrap_or(1).max(1);
        let duration = requirement.duration.unwrap_or(1).max(1);
        let mut statuses = Vec::new();
        match requirement.kind {
            UA | UM => statuses.push(Status::Stateless),
            CA | CM => statuses.extend([Status::Inactive, Status::InForce]),
            DEA | DFA | DEM | DFM => {
                statuses.push(Status::Inactive);
                statuses.extend((1..=deadline).rev().map(Status::Deadline));
            }
            PM | RPM => {
                statuses.extend([Status::Inactive, Status::Active]);
                statuses.extend((1..=duration).rev().map(Status::Duration));
            }
            PDEM | PDFM | RPDEM | RPDFM => {
                statuses.push(Status::Inactive);
                statuses.extend((1..=deadline).rev().map(Status::Deadline));
                statuses.extend((1..=duration).rev().map(Status::Duration));
            }
        }
        let initial = statuses[0];
        RequirementAutomaton { requirement, statuses, initial, deadline, duration }
    }

    pub fn name(&self) -> &str {
        &self.requirement.name
    }

    pub fn len(&self) -> usize {
        self.statuses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statuses.is_empty()
    }

    /// Position of `status` in [`Self::statuses`], computed without a search.
    pub fn index_of(&self, status: Status) -> Option<usize> {
        use RequirementKind::*;
        let kind = self.requirement.kind;
        let (d, p) = (self.deadline, self.duration);
        match (kind, status) {
            (UA | UM, Status::Stateless) => Some(0),
            (UA | UM, _) => None,
            (_, Status::Inactive) => Some(0),
            (CA | CM, Status::InForce) => Some(1),
            (PM | RPM, Status::Active) => Some(1),
            (PM | RPM, Status::Duration(k)) if (1..=p).contains(&k) => Some(2 + (p - k) as usize),
            (DEA | DFA | DEM | DFM | PDEM | PDFM | RPDEM | RPDFM, Status::Deadline(k)) if (1..=d).contains(&k) => {
                Some(1 + (d - k) as usize)
            }
            (PDEM | PDFM | RPDEM | RPDFM, Status::Duration(k)) if (1..=p).contains(&k) => {
                Some(1 + d as usize + (p - k) as usize)
            }
            _ => None,
        }
    }

    pub fn status_at(&self, index: usize) -> Status {
        self.statuses[index]
    }

    fn check(&self, status: Status) -> Result<(), AutomatonError> {
        match self.index_of(status) {
            Some(_) => Ok(()),
            None => Err(AutomatonError::UnknownStatus {
                requirement: self.requirement.name.clone(),
                status: status.to_string(),
            }),
        }
    }

    pub fn update_action(&self, status: Status, new_base: &[usize]) -> Result<Status, AutomatonError> {
        self.check(status)?;
        Ok(self.next(status, new_base, Step::Action))
    }

    pub fn update_event(&self, status: Status, new_base: &[usize]) -> Result<Status, AutomatonError> {
        self.check(status)?;
        Ok(self.next(status, new_base, Step::Event))
    }

    /// Transition function for a status already known to belong to this
    /// automaton.
    pub fn next(&self, status: Status, x: &[usize], step: Step) -> Status {
        use RequirementKind::*;
        let req = &self.requirement;
        let kind = req.kind;
        let tick = step == Step::Action;
        let s = || req.required.holds(x);
        let a = || req.activation.as_ref().is_none_or(|f| f.holds(x));
        let z = || req.cancellation.as_ref().is_some_and(|f| f.holds(x));

        match (kind, status) {
            (UA | UM, _) => Status::Stateless,

            (CA, Status::Inactive) | (CM, Status::Inactive) => {
                if a() {
                    Status::InForce
                } else {
                    Status::Inactive
                }
            }
            (CA, Status::InForce) => {
                if z() || s() {
                    Status::Inactive
                } else {
                    Status::InForce
                }
            }
            (CM, Status::InForce) => {
                if z() {
                    Status::Inactive
                } else {
                    Status::InForce
                }
            }

            (PM | RPM, Status::Inactive) => {
                if a() {
                    Status::Active
                } else {
                    Status::Inactive
                }
            }
            (PM | RPM, Status::Active) => {
                if z() {
                    Status::Inactive
                } else if s() {
                    Status::Duration(self.duration)
                } else {
                    Status::Active
                }
            }

            (_, Status::Inactive) => {
                if a() {
                    Status::Deadline(self.deadline)
                } else {
                    Status::Inactive
                }
            }
            (_, Status::Deadline(k)) => {
                if z() {
                    return Status::Inactive;
                }
                if kind.has_duration() && (k == 1 || !kind.exact_deadline()) && s() {
                    return Status::Duration(self.duration);
                }
                if kind == DFA && s() {
                    return Status::Inactive;
                }
                match (tick, k) {
                    (true, 1) => Status::Inactive,
                    (true, k) => Status::Deadline(k - 1),
                    (false, k) => Status::Deadline(k),
                }
            }
            (_, Status::Duration(k)) => {
                if z() || (kind.is_strict() && !s()) || k == 1 {
                    Status::Inactive
                } else if tick {
                    Status::Duration(k - 1)
                } else {
                    Status::Duration(k)
                }
            }
            (_, other) => other,
        }
    }

    /// Whether the transition `before -> after` satisfies the requirement.
    pub fn satisfied(&self, before: Snapshot<'_>, after: Snapshot<'_>) -> bool {
        use RequirementKind::*;
        let req = &self.requirement;
        let s_before = || req.required.holds(before.base);
        let s_after = || req.required.holds(after.base);
        let in_duration = |st: Status| matches!(st, Status::Duration(_));
        match req.kind {
            UA => !s_before() && s_after(),
            UM => s_before() && s_after(),
            CA => before.status == Status::InForce && !s_before() && s_after(),
            CM => {
                before.status == Status::InForce
                    && s_after()
                    && !req.cancellation.as_ref().is_some_and(|z| z.holds(after.base))
            }
            DEA => before.status == Status::Deadline(1) && s_after(),
            DFA => matches!(before.status, Status::Deadline(_)) && !s_before() && s_after(),
            DEM => before.status == Status::Deadline(1) && s_before() && s_after(),
            DFM => matches!(before.status, Status::Deadline(_)) && s_before() && s_after(),
            PM | PDEM | PDFM => s_before() && in_duration(before.status) && s_after() && in_duration(after.status),
            RPM | RPDEM | RPDFM => before.status == Status::Duration(1) && s_after(),
        }
    }

    /// Reward earned by this requirement on `before -> after`.
    pub fn reward(&self, before: Snapshot<'_>, after: Snapshot<'_>) -> u64 {
        if self.satisfied(before, after) {
            self.requirement.reward
        } else {
            0
        }
    }
}
