use std::fmt::Write;

use crate::prob::format_prob;

use super::formula::Formula;
use super::model::*;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Or,
    And,
    Unary,
}

fn prec(f: &Formula) -> Prec {
    match f {
        Formula::Or(..) => Prec::Or,
        Formula::And(..) => Prec::And,
        _ => Prec::Unary,
    }
}

/// Renders a formula in source syntax. Binary operators parse
/// left-associatively, so a right operand of equal precedence gets parentheses.
pub fn format_formula(model: &DomainModel, f: &Formula) -> String {
    let mut out = String::new();
    write_formula(model, f, &mut out);
    out
}

fn write_operand(model: &DomainModel, f: &Formula, min: Prec, strict: bool, out: &mut String) {
    let p = prec(f);
    if p < min || (strict && p == min) {
        out.push('(');
        write_formula(model, f, out);
        out.push(')');
    } else {
        write_formula(model, f, out);
    }
}

fn write_formula(model: &DomainModel, f: &Formula, out: &mut String) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Atom(var, value) => out.push_str(&model.atom_label(*var, *value)),
        Formula::Not(inner) => {
            out.push_str("!(");
            write_formula(model, inner, out);
            out.push(')');
        }
        Formula::And(a, b) => {
            write_operand(model, a, Prec::And, false, out);
            out.push_str(" & ");
            write_operand(model, b, Prec::And, true, out);
        }
        Formula::Or(a, b) => {
            write_operand(model, a, Prec::Or, false, out);
            out.push_str(" || ");
            write_operand(model, b, Prec::Or, true, out);
        }
    }
}

fn write_effects(model: &DomainModel, effects: &[Effect], out: &mut String) {
    for eff in effects {
        out.push_str(" <");
        let atoms: Vec<String> = eff.assignments.iter().map(|(v, val)| model.atom_label(*v, *val)).collect();
        out.push_str(&atoms.join(", "));
        let _ = write!(out, " prob {}>", format_prob(&eff.prob));
    }
}

/// Pretty-prints a model with every default written out explicitly.
pub fn to_source(model: &DomainModel) -> String {
    let mut out = String::new();
    for v in &model.variables {
        let _ = writeln!(out, "Variable {} domain {{{}}}", v.name, v.values.join(", "));
    }
    for a in &model.actions {
        let _ = writeln!(out, "Action {}", a.name);
        for b in &a.branches {
            let _ = write!(out, "  if {} effects", format_formula(model, &b.precondition));
            write_effects(model, &b.effects, &mut out);
            out.push('\n');
        }
        let _ = writeln!(out, "  cost {}", a.cost);
    }
    for e in &model.events {
        let _ = writeln!(out, "Event {}", e.name);
        for b in &e.branches {
            let _ = write!(
                out,
                "  if {} occur prob {} effects",
                format_formula(model, &b.precondition),
                format_prob(&b.occurrence)
            );
            write_effects(model, &b.effects, &mut out);
            out.push('\n');
        }
    }
    for r in &model.requirements {
        let verb = if r.kind.is_achieve() { "achieve" } else { "maintain" };
        let _ = write!(out, "ReqID {} {} {}", r.name, verb, format_formula(model, &r.required));
        if let Some(p) = r.duration {
            let _ = write!(out, " for {p}");
        }
        if let Some(d) = r.deadline {
            let word = if r.kind.exact_deadline() { "after" } else { "within" };
            let _ = write!(out, " {word} {d}");
        }
        if let Some(a) = &r.activation {
            let _ = write!(out, " if {}", format_formula(model, a));
        }
        if let Some(z) = &r.cancellation {
            let _ = write!(out, " unless {}", format_formula(model, z));
        }
        let word = match r.reward_mode {
            RewardMode::PerSatisfaction => "reward",
            RewardMode::Once => "reward_once",
        };
        let _ = writeln!(out, " {word} {}", r.reward);
    }
    let atoms: Vec<String> = model
        .initial_state
        .iter()
        .enumerate()
        .map(|(i, v)| model.atom_label(VarId(i), *v))
        .collect();
    let _ = writeln!(out, "Init {{ {} }}", atoms.join(", "));
    out
}
