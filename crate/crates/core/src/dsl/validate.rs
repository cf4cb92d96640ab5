use std::fmt;

use num_traits::{One, Zero};

use crate::prob;

use super::formula::Formula;
use super::model::*;
use super::parser::SourceMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

/// The declaration a diagnostic refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subject {
    Model,
    Variable(usize),
    Action(usize),
    Event(usize),
    Requirement(usize),
    Init,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub subject: Subject,
    pub message: String,
}

impl Diagnostic {
    fn error(subject: Subject, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, subject, message: message.into() }
    }

    fn warning(subject: Subject, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, subject, message: message.into() }
    }

    /// `file:line:col: severity: message`
    pub fn render(&self, file: &str, spans: Option<&SourceMap>) -> String {
        let pos = spans.and_then(|s| match self.subject {
            Subject::Model => None,
            Subject::Variable(i) => s.variables.get(&i).copied(),
            Subject::Action(i) => s.actions.get(i).copied(),
            Subject::Event(i) => s.events.get(i).copied(),
            Subject::Requirement(i) => s.requirements.get(i).copied(),
            Subject::Init => Some(s.init),
        });
        let (line, col) = pos.map(|p| (p.line, p.col)).unwrap_or((1, 1));
        format!("{file}:{line}:{col}: {}: {}", self.severity, self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

/// Static well-formedness checks. Precondition disjointness is only checked
/// syntactically here; the compiler enforces it state by state.
pub fn validate(model: &DomainModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    check_ranges(model, &mut out);
    for (i, r) in model.requirements.iter().enumerate() {
        check_requirement(r, Subject::Requirement(i), &mut out);
    }
    for (i, a) in model.actions.iter().enumerate() {
        let subject = Subject::Action(i);
        if a.branches.is_empty() {
            out.push(Diagnostic::warning(subject, format!("action `{}` has no branches", a.name)));
        }
        for (bi, b) in a.branches.iter().enumerate() {
            check_effects(&b.effects, subject, &mut out);
            if a.branches[..bi].iter().any(|prev| prev.precondition == b.precondition) {
                out.push(Diagnostic::warning(
                    subject,
                    format!("overlapping preconditions in action `{}` (branch {} repeats an earlier condition)", a.name, bi + 1),
                ));
            }
        }
    }
    for (i, e) in model.events.iter().enumerate() {
        let subject = Subject::Event(i);
        for (bi, b) in e.branches.iter().enumerate() {
            check_effects(&b.effects, subject, &mut out);
            if b.occurrence.is_zero() {
                out.push(Diagnostic::warning(subject, format!("event `{}` has a zero occurrence probability", e.name)));
            } else if b.occurrence > prob::Prob::one() {
                out.push(Diagnostic::error(subject, format!("event `{}` has an occurrence probability above 1", e.name)));
            }
            if e.branches[..bi].iter().any(|prev| prev.precondition == b.precondition) {
                out.push(Diagnostic::warning(
                    subject,
                    format!("overlapping preconditions in event `{}` (branch {} repeats an earlier condition)", e.name, bi + 1),
                ));
            }
        }
    }
    check_reachable_values(model, &mut out);
    out
}

fn check_requirement(r: &Requirement, subject: Subject, out: &mut Vec<Diagnostic>) {
    let kind = r.kind;
    if kind.is_unconditional() {
        if r.activation.is_some() {
            out.push(Diagnostic::error(
                subject,
                format!("`{}`: activation clause forbidden for unconditional kind {kind}", r.name),
            ));
        }
        if r.cancellation.is_some() {
            out.push(Diagnostic::error(
                subject,
                format!("`{}`: cancellation clause forbidden for unconditional kind {kind}", r.name),
            ));
        }
    } else if r.activation.is_none() {
        out.push(Diagnostic::error(subject, format!("`{}`: activation clause required for kind {kind}", r.name)));
    }
    match (kind.has_deadline(), r.deadline) {
        (true, None) => out.push(Diagnostic::error(subject, format!("`{}`: deadline required for kind {kind}", r.name))),
        (false, Some(_)) => {
            out.push(Diagnostic::error(subject, format!("`{}`: deadline forbidden for kind {kind}", r.name)))
        }
        (true, Some(0)) => out.push(Diagnostic::error(subject, format!("`{}`: deadline must be positive", r.name))),
        _ => {}
    }
    match (kind.has_duration(), r.duration) {
        (true, None) => out.push(Diagnostic::error(subject, format!("`{}`: duration required for kind {kind}", r.name))),
        (false, Some(_)) => {
            out.push(Diagnostic::error(subject, format!("`{}`: duration forbidden for kind {kind}", r.name)))
        }
        (true, Some(0)) => out.push(Diagnostic::error(subject, format!("`{}`: duration must be positive", r.name))),
        _ => {}
    }
    match (kind.is_strict(), r.reward_mode) {
        (true, RewardMode::PerSatisfaction) => out.push(Diagnostic::error(
            subject,
            format!("`{}`: strict kind {kind} is rewarded with `reward_once`", r.name),
        )),
        (false, RewardMode::Once) => out.push(Diagnostic::error(
            subject,
            format!("`{}`: `reward_once` is only valid for strict duration kinds", r.name),
        )),
        _ => {}
    }
}

fn check_effects(effects: &[Effect], subject: Subject, out: &mut Vec<Diagnostic>) {
    for e in effects {
        if e.prob.is_zero() {
            out.push(Diagnostic::warning(subject, "zero-probability effect"));
        }
    }
    match prob::checked_sum(effects.iter().map(|e| &e.prob)) {
        Some(sum) if sum > prob::Prob::one() => out.push(Diagnostic::error(
            subject,
            format!("effect probabilities sum to {} (above 1)", prob::format_prob(&sum)),
        )),
        None => out.push(Diagnostic::error(subject, "effect probability sum overflows")),
        _ => {}
    }
}

fn formula_in_range(model: &DomainModel, f: &Formula) -> bool {
    match f {
        Formula::True | Formula::False => true,
        Formula::Atom(var, value) => model.variables.get(var.0).is_some_and(|d| *value < d.values.len()),
        Formula::Not(inner) => formula_in_range(model, inner),
        Formula::And(a, b) | Formula::Or(a, b) => formula_in_range(model, a) && formula_in_range(model, b),
    }
}

fn effects_in_range(model: &DomainModel, effects: &[Effect]) -> bool {
    effects.iter().all(|e| {
        e.assignments
            .iter()
            .all(|(var, value)| model.variables.get(var.0).is_some_and(|d| *value < d.values.len()))
    })
}

fn check_ranges(model: &DomainModel, out: &mut Vec<Diagnostic>) {
    if model.initial_state.len() != model.variables.len()
        || model.initial_state.iter().zip(&model.variables).any(|(v, d)| *v >= d.values.len())
    {
        out.push(Diagnostic::error(Subject::Init, "initial state does not assign every variable a domain value"));
    }
    for (i, v) in model.variables.iter().enumerate() {
        if v.values.is_empty() {
            out.push(Diagnostic::error(Subject::Variable(i), format!("variable `{}` has an empty domain", v.name)));
        }
    }
    for (i, a) in model.actions.iter().enumerate() {
        if a.branches.iter().any(|b| !formula_in_range(model, &b.precondition) || !effects_in_range(model, &b.effects)) {
            out.push(Diagnostic::error(Subject::Action(i), format!("action `{}` references an unknown atom", a.name)));
        }
    }
    for (i, e) in model.events.iter().enumerate() {
        if e.branches.iter().any(|b| !formula_in_range(model, &b.precondition) || !effects_in_range(model, &b.effects)) {
            out.push(Diagnostic::error(Subject::Event(i), format!("event `{}` references an unknown atom", e.name)));
        }
    }
    for (i, r) in model.requirements.iter().enumerate() {
        let ok = formula_in_range(model, &r.required)
            && r.activation.as_ref().is_none_or(|f| formula_in_range(model, f))
            && r.cancellation.as_ref().is_none_or(|f| formula_in_range(model, f));
        if !ok {
            out.push(Diagnostic::error(
                Subject::Requirement(i),
                format!("requirement `{}` references an unknown atom", r.name),
            ));
        }
    }
}

/// Values that are neither initial nor assigned by any effect can never occur.
fn check_reachable_values(model: &DomainModel, out: &mut Vec<Diagnostic>) {
    let mut reached: Vec<Vec<bool>> = model.variables.iter().map(|v| vec![false; v.values.len()]).collect();
    for (i, v) in model.initial_state.iter().enumerate() {
        if let Some(slot) = reached.get_mut(i).and_then(|r| r.get_mut(*v)) {
            *slot = true;
        }
    }
    let effects = model
        .actions
        .iter()
        .flat_map(|a| a.branches.iter().flat_map(|b| b.effects.iter()))
        .chain(model.events.iter().flat_map(|e| e.branches.iter().flat_map(|b| b.effects.iter())));
    for eff in effects {
        for (var, value) in &eff.assignments {
            if let Some(slot) = reached.get_mut(var.0).and_then(|r| r.get_mut(*value)) {
                *slot = true;
            }
        }
    }
    for (i, (decl, flags)) in model.variables.iter().zip(&reached).enumerate() {
        for (value, hit) in decl.values.iter().zip(flags) {
            if !hit {
                out.push(Diagnostic::warning(
                    Subject::Variable(i),
                    format!("value `{value}` of `{}` is never reached (not initial and never assigned)", decl.name),
                ));
            }
        }
    }
}
