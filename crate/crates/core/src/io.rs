//! Text formats: `obdmdp/1` (compiled MDPs), `obdpolicy/1` (strategies), a JSON
//! strategy export, and Graphviz DOT.
//!
//! Floating-point values are written in Rust's shortest round-trip notation,
//! so reading back a written file reproduces every value bit for bit.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::compiler::{MdpAction, MdpModel};
use crate::solver::{Method, Strategy};
use crate::space::StateSpace;
use crate::sparse::CsrMatrix;

pub const MDP_FORMAT: &str = "obdmdp/1";
pub const POLICY_FORMAT: &str = "obdpolicy/1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

/// Serializes `mdp`:
///
/// ```text
/// obdmdp/1
/// gamma <γ>
/// states <n>
/// initial <index>
/// var <name> <value>...          one per state variable
/// req <name> <status>...         one per requirement
/// actions <count>
/// state <index> <atom>...        one per state
/// action <name> cost <c>         then, per action:
/// transitions <nnz>
/// <row> <col> <probability>      nnz lines
/// rewards <nnz>
/// <row> <col> <reward>           nnz lines
/// end
/// ```
pub fn write_mdp(mdp: &MdpModel) -> String {
    let mut out = String::new();
    let space = &mdp.space;
    let _ = writeln!(out, "{MDP_FORMAT}");
    let _ = writeln!(out, "gamma {}", mdp.gamma);
    let _ = writeln!(out, "states {}", space.len());
    let _ = writeln!(out, "initial {}", mdp.initial_state);
    for (i, (name, domain)) in space.names().iter().zip(space.domains()).enumerate() {
        let tag = if i < space.base_len() { "var" } else { "req" };
        let _ = writeln!(out, "{tag} {name} {}", domain.join(" "));
    }
    let _ = writeln!(out, "actions {}", mdp.actions.len());
    for s in 0..space.len() {
        let _ = writeln!(out, "state {s} {}", space.atoms(s).join(" "));
    }
    for a in &mdp.actions {
        let _ = writeln!(out, "action {} cost {}", a.name, a.cost);
        write_triples(&mut out, "transitions", &a.transitions);
        write_triples(&mut out, "rewards", &a.rewards);
    }
    out.push_str("end\n");
    out
}

fn write_triples(out: &mut String, section: &str, m: &CsrMatrix<f64>) {
    let _ = writeln!(out, "{section} {}", m.nnz());
    for i in 0..m.n_rows() {
        for (j, v) in m.row_entries(i) {
            let _ = writeln!(out, "{i} {j} {v}");
        }
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines { inner: text.lines().enumerate(), line: 0 }
    }

    fn err(&self, message: impl Into<String>) -> FormatError {
        FormatError { line: self.line, message: message.into() }
    }

    fn next_line(&mut self) -> Result<&'a str, FormatError> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(FormatError { line: self.line + 1, message: "unexpected end of file".into() }),
        }
    }

    /// Next line split into words, checking the leading keyword.
    fn keyword(&mut self, key: &str) -> Result<Vec<&'a str>, FormatError> {
        let words: Vec<&str> = self.next_line()?.split_whitespace().collect();
        if words.first() != Some(&key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        Ok(words[1..].to_vec())
    }

    fn single<T: FromStr>(&mut self, key: &str) -> Result<T, FormatError> {
        let words = self.keyword(key)?;
        match words.as_slice() {
            [w] => self.parse(w),
            _ => Err(self.err(format!("`{key}` takes one value"))),
        }
    }

    fn parse<T: FromStr>(&self, word: &str) -> Result<T, FormatError> {
        word.parse().map_err(|_| self.err(format!("invalid number `{word}`")))
    }
}

/// Parses the output of [`write_mdp`] and checks the result is a well-formed
/// MDP.
pub fn read_mdp(text: &str) -> Result<MdpModel, FormatError> {
    let mut lines = Lines::new(text);
    if lines.next_line()?.trim() != MDP_FORMAT {
        return Err(lines.err(format!("missing `{MDP_FORMAT}` header")));
    }
    let gamma: f64 = lines.single("gamma")?;
    let n: usize = lines.single("states")?;
    let initial: usize = lines.single("initial")?;

    let mut names = Vec::new();
    let mut domains = Vec::new();
    let mut n_base = 0;
    let n_actions: usize = loop {
        let line = lines.next_line()?;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["var", name, values @ ..] | ["req", name, values @ ..] if !values.is_empty() => {
                if words[0] == "var" {
                    if names.len() != n_base {
                        return Err(lines.err("state variables must precede requirements"));
                    }
                    n_base += 1;
                }
                names.push(name.to_string());
                domains.push(values.iter().map(|v| v.to_string()).collect::<Vec<_>>());
            }
            ["actions", count] => break lines.parse(count)?,
            _ => return Err(lines.err("expected `var`, `req` or `actions`")),
        }
    };
    let space = StateSpace::from_parts(names, domains, n_base, usize::MAX).map_err(|e| lines.err(e.to_string()))?;
    if space.len() != n {
        return Err(lines.err(format!("declared {n} states but the variables span {}", space.len())));
    }
    for s in 0..n {
        let words = lines.keyword("state")?;
        let expected = space.atoms(s);
        if words.first().map(|w| lines.parse::<usize>(w)).transpose()? != Some(s) || words[1..] != expected[..] {
            return Err(lines.err(format!("state table entry {s} does not match the variable order")));
        }
    }

    let mut actions = Vec::with_capacity(n_actions);
    for _ in 0..n_actions {
        let words = lines.keyword("action")?;
        let (name, cost) = match words.as_slice() {
            [name, "cost", c] => (name.to_string(), lines.parse::<u64>(c)?),
            _ => return Err(lines.err("expected `action <name> cost <c>`")),
        };
        let transitions = read_triples(&mut lines, "transitions", n)?;
        let rewards = read_triples(&mut lines, "rewards", n)?;
        actions.push(MdpAction { name, cost, transitions, rewards });
    }
    if lines.next_line()?.trim() != "end" {
        return Err(lines.err("expected `end`"));
    }
    let mdp = MdpModel { space, actions, gamma, initial_state: initial };
    mdp.check().map_err(|m| lines.err(m))?;
    Ok(mdp)
}

fn read_triples(lines: &mut Lines<'_>, section: &str, n: usize) -> Result<CsrMatrix<f64>, FormatError> {
    let nnz: usize = lines.single(section)?;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for _ in 0..nnz {
        let line = lines.next_line()?;
        let words: Vec<&str> = line.split_whitespace().collect();
        let [i, j, v] = words.as_slice() else {
            return Err(lines.err("expected `<row> <col> <value>`"));
        };
        let (i, j, v): (usize, usize, f64) = (lines.parse(i)?, lines.parse(j)?, lines.parse(v)?);
        if i >= n || j >= n {
            return Err(lines.err(format!("index out of range for {n} states")));
        }
        if rows[i].last().is_some_and(|&(last, _)| last >= j) {
            return Err(lines.err("entries must be sorted by column within a row"));
        }
        rows[i].push((j, v));
    }
    Ok(CsrMatrix::from_rows(n, rows))
}

/// Serializes a strategy:
///
/// ```text
/// obdpolicy/1
/// states <n>
/// method <value|policy|greedy>
/// iterations <k>
/// residual <r>
/// <index> <action> <value>       one per state
/// ```
pub fn write_policy(mdp: &MdpModel, strategy: &Strategy) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{POLICY_FORMAT}");
    let _ = writeln!(out, "states {}", strategy.actions.len());
    let _ = writeln!(out, "method {}", strategy.method);
    let _ = writeln!(out, "iterations {}", strategy.iterations);
    let _ = writeln!(out, "residual {}", strategy.residual);
    for (s, (&a, v)) in strategy.actions.iter().zip(&strategy.values).enumerate() {
        let _ = writeln!(out, "{s} {} {v}", mdp.actions[a].name);
    }
    out
}

/// Parses [`write_policy`] output, resolving action names through
/// `action_names` (index = action id).
pub fn read_policy(text: &str, action_names: &[&str]) -> Result<Strategy, FormatError> {
    let mut lines = Lines::new(text);
    if lines.next_line()?.trim() != POLICY_FORMAT {
        return Err(lines.err(format!("missing `{POLICY_FORMAT}` header")));
    }
    let n: usize = lines.single("states")?;
    let method = match lines.single::<String>("method")?.as_str() {
        "value" => Method::ValueIteration,
        "policy" => Method::PolicyIteration,
        "greedy" => Method::Greedy,
        other => return Err(lines.err(format!("unknown method `{other}`"))),
    };
    let iterations: usize = lines.single("iterations")?;
    let residual: f64 = lines.single("residual")?;
    let mut actions = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for s in 0..n {
        let line = lines.next_line()?;
        let words: Vec<&str> = line.split_whitespace().collect();
        let [idx, name, value] = words.as_slice() else {
            return Err(lines.err("expected `<index> <action> <value>`"));
        };
        if lines.parse::<usize>(idx)? != s {
            return Err(lines.err(format!("expected state {s}")));
        }
        let a = action_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| lines.err(format!("unknown action `{name}`")))?;
        actions.push(a);
        values.push(lines.parse(value)?);
    }
    Ok(Strategy { actions, values, method, iterations, residual })
}

#[derive(Serialize)]
struct PolicyJson<'a> {
    format: &'static str,
    method: String,
    iterations: usize,
    residual: f64,
    gamma: f64,
    initial_state: usize,
    variables: &'a [String],
    states: Vec<PolicyJsonState<'a>>,
}

#[derive(Serialize)]
struct PolicyJsonState<'a> {
    index: usize,
    atoms: Vec<String>,
    action: &'a str,
    value: f64,
}

/// Structured mirror of [`write_policy`], with each state's atoms spelled out.
pub fn policy_json(mdp: &MdpModel, strategy: &Strategy) -> String {
    let doc = PolicyJson {
        format: POLICY_FORMAT,
        method: strategy.method.to_string(),
        iterations: strategy.iterations,
        residual: strategy.residual,
        gamma: mdp.gamma,
        initial_state: mdp.initial_state,
        variables: mdp.space.names(),
        states: (0..mdp.num_states())
            .map(|s| PolicyJsonState {
                index: s,
                atoms: mdp.space.atoms(s),
                action: &mdp.actions[strategy.actions[s]].name,
                value: strategy.values[s],
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
    text.push('\n');
    text
}

/// Up to six decimals, trailing zeros dropped.
fn short(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn signed(x: f64) -> String {
    let s = short(x);
    if s.starts_with('-') {
        s
    } else {
        format!("+{s}")
    }
}

/// DOT graph with one node per state labeled by its atoms. Edges follow the
/// strategy's chosen action, or every action when `strategy` is `None`; each is
/// labeled `action, probability, reward`.
pub fn write_dot(mdp: &MdpModel, strategy: Option<&Strategy>) -> String {
    let mut out = String::new();
    out.push_str("digraph mdp {\n  rankdir=LR;\n  node [shape=box, fontname=\"monospace\"];\n");
    for s in 0..mdp.num_states() {
        let mut label = format!("s{s}");
        for atom in mdp.space.atoms(s) {
            label.push_str("\\n");
            label.push_str(&atom);
        }
        let style = if s == mdp.initial_state { ", style=bold" } else { "" };
        let _ = writeln!(out, "  s{s} [label=\"{label}\"{style}];");
    }
    for s in 0..mdp.num_states() {
        let chosen: Vec<usize> = match strategy {
            Some(st) => vec![st.actions[s]],
            None => (0..mdp.num_actions()).collect(),
        };
        for a in chosen {
            let action = &mdp.actions[a];
            for ((j, p), r) in action.transitions.row_entries(s).zip(action.rewards.row(s).1) {
                let _ = writeln!(out, "  s{s} -> s{j} [label=\"{}, {}, {}\"];", action.name, short(*p), signed(*r));
            }
        }
    }
    out.push_str("}\n");
    out
}
