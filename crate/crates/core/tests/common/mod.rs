//! Shared generators and independent oracles for the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use obd_core::compiler::MdpModel;
use obd_core::dsl::{DomainModel, Effect, RequirementKind};
use obd_core::reqauto::{RequirementAutomaton, Status, Step};
use obd_core::space::StateSpace;

pub const TOY: &str = "
    Action a if !x effects <x prob 0.8> <y prob 0.2> cost 10
    Action b if x effects <!x> cost 5
    Event e if !x occur prob 0.2 effects <x prob 0.8> <y prob 0.2>
    ReqID m achieve x if !x reward 100
    Init { x, y }
";

pub fn model_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name)
}

pub fn read_model(name: &str) -> String {
    std::fs::read_to_string(model_path(name)).expect("model file")
}

// ---------------------------------------------------------------------------
// Random model text

#[derive(Clone, Copy, Debug)]
pub struct GenConfig {
    pub max_vars: usize,
    pub max_actions: usize,
    pub max_events: usize,
    pub max_requirements: usize,
    /// Bound on the expanded state count.
    pub max_states: usize,
    /// Restrict variables to booleans.
    pub booleans_only: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_vars: 3, max_actions: 3, max_events: 3, max_requirements: 2, max_states: 64, booleans_only: false }
    }
}

struct Var {
    name: String,
    values: Vec<&'static str>,
}

impl Var {
    fn boolean(&self) -> bool {
        self.values.is_empty()
    }

    fn size(&self) -> usize {
        if self.boolean() {
            2
        } else {
            self.values.len()
        }
    }

    fn atom(&self, rng: &mut ChaCha8Rng) -> String {
        if self.boolean() {
            if rng.random_bool(0.5) {
                self.name.clone()
            } else {
                format!("!{}", self.name)
            }
        } else {
            format!("{}={}", self.name, self.values.choose(rng).unwrap())
        }
    }
}

fn formula(vars: &[Var], rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..4) {
        0 => vars.choose(rng).unwrap().atom(rng),
        1 => format!("{} & {}", vars.choose(rng).unwrap().atom(rng), vars.choose(rng).unwrap().atom(rng)),
        2 => format!("{} || {}", vars.choose(rng).unwrap().atom(rng), vars.choose(rng).unwrap().atom(rng)),
        _ => format!("!({})", vars.choose(rng).unwrap().atom(rng)),
    }
}

/// Mutually exclusive preconditions for `n` branches.
fn preconditions(vars: &[Var], n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    if n == 1 {
        return vec![if rng.random_bool(0.3) { "true".into() } else { formula(vars, rng) }];
    }
    let split = vars.choose(rng).unwrap().atom(rng);
    let first = if rng.random_bool(0.5) {
        format!("{split} & {}", vars.choose(rng).unwrap().atom(rng))
    } else {
        split.clone()
    };
    vec![first, format!("!({split})")]
}

fn effects(vars: &[Var], rng: &mut ChaCha8Rng) -> String {
    const SINGLE: [Option<&str>; 5] = [None, Some("1"), Some("0.5"), Some("0.8"), Some("0.25")];
    const PAIRS: [(&str, &str); 5] = [("0.5", "0.5"), ("0.8", "0.2"), ("0.3", "0.6"), ("0.25", "0.25"), ("0.7", "0.1")];
    let probs: Vec<Option<&str>> = if rng.random_bool(0.5) {
        vec![*SINGLE.choose(rng).unwrap()]
    } else {
        let (p, q) = *PAIRS.choose(rng).unwrap();
        vec![Some(p), Some(q)]
    };
    let mut out = Vec::new();
    for p in probs {
        let k = rng.random_range(1..=vars.len().min(2));
        let chosen: Vec<&Var> = vars.choose_multiple(rng, k).collect();
        let assigns: Vec<String> = chosen.iter().map(|v| v.atom(rng)).collect();
        let prob = p.map(|p| format!(" prob {p}")).unwrap_or_default();
        out.push(format!("<{}{prob}>", assigns.join(", ")));
    }
    out.join(" ")
}

fn status_count(kind: RequirementKind, deadline: usize, duration: usize) -> usize {
    use RequirementKind::*;
    match kind {
        UA | UM => 1,
        CA | CM => 2,
        DEA | DFA | DEM | DFM => 1 + deadline,
        PM | RPM => 2 + duration,
        _ => 1 + deadline + duration,
    }
}

fn requirement(name: &str, kind: RequirementKind, d: usize, p: usize, vars: &[Var], rng: &mut ChaCha8Rng) -> String {
    use RequirementKind::*;
    let s = formula(vars, rng);
    let a = formula(vars, rng);
    let z = if rng.random_bool(0.4) { format!(" unless {}", vars.choose(rng).unwrap().atom(rng)) } else { String::new() };
    let r = rng.random_range(1..=100);
    let body = match kind {
        UA => format!("achieve {s} reward {r}"),
        UM => format!("maintain {s} reward {r}"),
        CA => format!("achieve {s} if {a}{z} reward {r}"),
        CM => format!("maintain {s} if {a}{z} reward {r}"),
        DEA => format!("achieve {s} after {d} if {a}{z} reward {r}"),
        DFA => format!("achieve {s} within {d} if {a}{z} reward {r}"),
        DEM => format!("maintain {s} after {d} if {a}{z} reward {r}"),
        DFM => format!("maintain {s} within {d} if {a}{z} reward {r}"),
        PM => format!("maintain {s} for {p} if {a}{z} reward {r}"),
        PDEM => format!("maintain {s} for {p} after {d} if {a}{z} reward {r}"),
        PDFM => format!("maintain {s} for {p} within {d} if {a}{z} reward {r}"),
        RPM => format!("maintain {s} for {p} if {a}{z} reward_once {r}"),
        RPDEM => format!("maintain {s} for {p} after {d} if {a}{z} reward_once {r}"),
        RPDFM => format!("maintain {s} for {p} within {d} if {a}{z} reward_once {r}"),
    };
    format!("ReqID {name} {body}")
}

/// A random well-formed model; every branch set is mutually exclusive.
pub fn random_model(seed: u64, cfg: GenConfig) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const DOMAINS: [&[&str]; 2] = [&["a", "b"], &["a", "b", "c"]];
    let n_vars = rng.random_range(1..=cfg.max_vars);
    let vars: Vec<Var> = (0..n_vars)
        .map(|i| {
            let values = if cfg.booleans_only || rng.random_bool(0.6) { vec![] } else { DOMAINS.choose(&mut rng).unwrap().to_vec() };
            Var { name: format!("v{i}"), values }
        })
        .collect();
    let mut lines = Vec::new();
    for v in &vars {
        if v.boolean() {
            lines.push(format!("Variable {}", v.name));
        } else {
            lines.push(format!("Variable {} domain {{{}}}", v.name, v.values.join(", ")));
        }
    }
    for i in 0..rng.random_range(1..=cfg.max_actions) {
        let n = rng.random_range(1..=2);
        let branches: Vec<String> =
            preconditions(&vars, n, &mut rng).into_iter().map(|pre| format!("if {pre} effects {}", effects(&vars, &mut rng))).collect();
        let cost = if rng.random_bool(0.8) { format!(" cost {}", rng.random_range(0..=10)) } else { String::new() };
        lines.push(format!("Action a{i} {}{cost}", branches.join(" ")));
    }
    const OCCUR: [Option<&str>; 5] = [None, Some("0.2"), Some("0.5"), Some("0.9"), Some("1")];
    for i in 0..rng.random_range(0..=cfg.max_events) {
        let n = rng.random_range(1..=2);
        let branches: Vec<String> = preconditions(&vars, n, &mut rng)
            .into_iter()
            .map(|pre| {
                let occur = OCCUR.choose(&mut rng).unwrap().map(|o| format!(" occur prob {o}")).unwrap_or_default();
                format!("if {pre}{occur} effects {}", effects(&vars, &mut rng))
            })
            .collect();
        lines.push(format!("Event e{i} {}", branches.join(" ")));
    }
    let mut states: usize = vars.iter().map(Var::size).product();
    for i in 0..rng.random_range(0..=cfg.max_requirements) {
        let kind = *RequirementKind::ALL.choose(&mut rng).unwrap();
        let (d, p) = (rng.random_range(1..=2), rng.random_range(1..=2));
        let count = status_count(kind, d, p);
        if states * count > cfg.max_states {
            continue;
        }
        states *= count;
        lines.push(requirement(&format!("r{i}"), kind, d, p, &vars, &mut rng));
    }
    let init: Vec<String> = vars.iter().map(|v| v.atom(&mut rng)).collect();
    lines.push(format!("Init {{ {} }}", init.join(", ")));
    lines.join("\n") + "\n"
}

// ---------------------------------------------------------------------------
// Brute-force interleaving oracle, exact arithmetic

pub type Exact = Ratio<u128>;

fn exact(p: &Ratio<u64>) -> Exact {
    Exact::new(*p.numer() as u128, *p.denom() as u128)
}

struct Oracle<'a> {
    model: &'a DomainModel,
    automata: &'a [RequirementAutomaton],
    space: &'a StateSpace,
}

impl Oracle<'_> {
    fn apply(&self, values: &[usize], assignments: &[(obd_core::dsl::VarId, usize)], step: Step) -> Vec<usize> {
        let n = self.model.variables.len();
        let mut next = values.to_vec();
        for &(v, val) in assignments {
            next[v.0] = val;
        }
        for (r, auto) in self.automata.iter().enumerate() {
            let status = auto.next(auto.status_at(values[n + r]), &next[..n], step);
            next[n + r] = auto.statuses.iter().position(|s| *s == status).expect("status in domain");
        }
        next
    }

    /// Each listed effect, then the unassigned remainder as a no-change effect.
    fn branch_outcomes(&self, values: &[usize], effects: &[Effect], step: Step) -> Vec<(Vec<usize>, Exact)> {
        let mut out = Vec::new();
        let mut rest = Exact::from_integer(1);
        for e in effects {
            out.push((self.apply(values, &e.assignments, step), exact(&e.prob)));
            rest -= exact(&e.prob);
        }
        if rest > Exact::from_integer(0) {
            out.push((self.apply(values, &[], step), rest));
        }
        out
    }

    fn row(&self, state: usize, action: usize) -> BTreeMap<Vec<usize>, Exact> {
        let n = self.model.variables.len();
        let values = self.space.decode(state);
        let mut dist: BTreeMap<Vec<usize>, Exact> = BTreeMap::new();
        let branch = (action > 0)
            .then(|| self.model.actions[action - 1].branches.iter().find(|b| b.precondition.holds(&values[..n])))
            .flatten();
        let outcomes = match branch {
            Some(b) => self.branch_outcomes(&values, &b.effects, Step::Action),
            None => vec![(self.apply(&values, &[], Step::Action), Exact::from_integer(1))],
        };
        for (v, p) in outcomes {
            *dist.entry(v).or_default() += p;
        }
        for event in &self.model.events {
            let mut next: BTreeMap<Vec<usize>, Exact> = BTreeMap::new();
            for (v, p) in dist {
                match event.branches.iter().find(|b| b.precondition.holds(&v[..n])) {
                    None => *next.entry(v).or_default() += p,
                    Some(b) => {
                        let o = exact(&b.occurrence);
                        let stay = Exact::from_integer(1) - o;
                        for (w, q) in self.branch_outcomes(&v, &b.effects, Step::Event) {
                            *next.entry(w).or_default() += p * o * q;
                        }
                        if stay > Exact::from_integer(0) {
                            *next.entry(v).or_default() += p * stay;
                        }
                    }
                }
            }
            dist = next;
        }
        dist
    }
}

/// Implicit transition row of `action` in `state` by enumerating every action
/// outcome and every fire/skip/outcome choice of the events in order.
pub fn oracle_row(
    model: &DomainModel,
    automata: &[RequirementAutomaton],
    space: &StateSpace,
    state: usize,
    action: usize,
) -> BTreeMap<usize, Exact> {
    let oracle = Oracle { model, automata, space };
    let mut out: BTreeMap<usize, Exact> = BTreeMap::new();
    for (v, p) in oracle.row(state, action) {
        *out.entry(space.encode(&v)).or_default() += p;
    }
    out.retain(|_, p| *p > Exact::from_integer(0));
    out
}

pub fn to_f64(p: &Exact) -> f64 {
    *p.numer() as f64 / *p.denom() as f64
}

// ---------------------------------------------------------------------------
// Exhaustive policy enumeration with dense linear algebra

/// `V^π = (I − γP_π)⁻¹ r_π`.
pub fn dense_policy_value(mdp: &MdpModel, policy: &[usize]) -> Vec<f64> {
    let n = mdp.num_states();
    let mut m = DMatrix::<f64>::identity(n, n);
    let mut r = DVector::<f64>::zeros(n);
    for s in 0..n {
        let a = &mdp.actions[policy[s]];
        for (j, p) in a.transitions.row_entries(s) {
            m[(s, j)] -= mdp.gamma * p;
            r[s] += p * a.rewards.get(s, j).copied().unwrap_or(0.0);
        }
    }
    m.lu().solve(&r).expect("I − γP is nonsingular").iter().copied().collect()
}

/// Best value per state over every deterministic stationary policy, and the
/// policies attaining the best value in every state simultaneously.
pub fn exhaustive_optimum(mdp: &MdpModel) -> (Vec<f64>, Vec<Vec<usize>>) {
    let n = mdp.num_states();
    let k = mdp.num_actions();
    let total = k.pow(n as u32);
    let mut values = Vec::with_capacity(total);
    let mut policies = Vec::with_capacity(total);
    for code in 0..total {
        let mut c = code;
        let policy: Vec<usize> = (0..n)
            .map(|_| {
                let a = c % k;
                c /= k;
                a
            })
            .collect();
        values.push(dense_policy_value(mdp, &policy));
        policies.push(policy);
    }
    let best: Vec<f64> = (0..n).map(|s| values.iter().map(|v| v[s]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let optimal = policies
        .into_iter()
        .zip(&values)
        .filter(|(_, v)| v.iter().zip(&best).all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + b.abs())))
        .map(|(p, _)| p)
        .collect();
    (best, optimal)
}

// ---------------------------------------------------------------------------
// Requirement automata as plain rule tables
//
// `s`, `a`, `z` are the truth values of the required, activation and
// cancellation conditions in the new base state. Rows are tried top to bottom.

#[allow(clippy::too_many_arguments)]
pub fn table_next(kind: RequirementKind, d: u32, p: u32, st: Status, s: bool, a: bool, z: bool, tick: bool) -> Status {
    use RequirementKind::*;
    use Status::*;
    let pd_exact = matches!(kind, PDEM | RPDEM);
    let pd_flex = matches!(kind, PDFM | RPDFM);
    let strict = matches!(kind, RPM | RPDEM | RPDFM);
    match (kind, st) {
        (UA | UM, Stateless) => Stateless,
        // CA / CM
        (CA | CM, Inactive) if a => InForce,
        (CA | CM, Inactive) => Inactive,
        (CA | CM, InForce) if z => Inactive,
        (CA, InForce) if s => Inactive,
        (CA | CM, InForce) => InForce,
        // PM / RPM waiting phase
        (PM | RPM, Inactive) if a => Active,
        (PM | RPM, Inactive) => Inactive,
        (PM | RPM, Active) if z => Inactive,
        (PM | RPM, Active) if s => Duration(p),
        (PM | RPM, Active) => Active,
        // deadline phase
        (_, Inactive) if a => Deadline(d),
        (_, Inactive) => Inactive,
        (_, Deadline(_)) if z => Inactive,
        (_, Deadline(1)) if pd_exact && s => Duration(p),
        (_, Deadline(_)) if pd_flex && s => Duration(p),
        (DFA, Deadline(_)) if s => Inactive,
        (_, Deadline(1)) if tick => Inactive,
        (_, Deadline(k)) if tick => Deadline(k - 1),
        (_, Deadline(k)) => Deadline(k),
        // duration phase
        (_, Duration(_)) if z => Inactive,
        (_, Duration(_)) if strict && !s => Inactive,
        (_, Duration(1)) => Inactive,
        (_, Duration(k)) if tick => Duration(k - 1),
        (_, Duration(k)) => Duration(k),
        (k, st) => panic!("{st} is not a status of kind {k}"),
    }
}

/// Reward rule; `s0`/`s1` and `z1` are the conditions before and after.
pub fn table_satisfied(kind: RequirementKind, before: Status, after: Status, s0: bool, s1: bool, z1: bool) -> bool {
    use RequirementKind::*;
    use Status::*;
    let dur = |st: Status| matches!(st, Duration(_));
    match kind {
        UA => !s0 && s1,
        UM => s0 && s1,
        CA => before == InForce && !s0 && s1,
        CM => before == InForce && s1 && !z1,
        DEA => before == Deadline(1) && s1,
        DFA => matches!(before, Deadline(_)) && !s0 && s1,
        DEM => before == Deadline(1) && s0 && s1,
        DFM => matches!(before, Deadline(_)) && s0 && s1,
        PM | PDEM | PDFM => s0 && dur(before) && s1 && dur(after),
        RPM | RPDEM | RPDFM => before == Duration(1) && s1,
    }
}
