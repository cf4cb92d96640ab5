//! Recursive-descent parser for `.obd` domain descriptions.
//!
//! Parsing happens in two passes: the token stream is turned into a raw,
//! name-based syntax tree, then names are resolved against the declared
//! variables. Undeclared variables become booleans, appended after the
//! declared ones in order of first reference.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_traits::{One, Zero};

use crate::prob::{self, Prob};

use super::error::{ParseError, ParseErrorKind};
use super::formula::Formula;
use super::lexer::{tokenize, Pos, Tok, Token};
use super::model::*;

const KEYWORDS: &[&str] = &[
    "Variable", "domain", "Action", "Event", "ReqID", "ReqId", "achieve", "maintain", "if", "unless", "effects",
    "occur", "prob", "cost", "reward", "reward_once", "after", "within", "for", "Init", "true", "false",
];

/// Where each declaration starts in the source text.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SourceMap {
    pub variables: BTreeMap<usize, Pos>,
    pub actions: Vec<Pos>,
    pub events: Vec<Pos>,
    pub requirements: Vec<Pos>,
    pub init: Pos,
}

pub fn parse_domain(text: &str) -> Result<DomainModel, ParseError> {
    parse_domain_with_spans(text).map(|(model, _)| model)
}

pub fn parse_domain_with_spans(text: &str) -> Result<(DomainModel, SourceMap), ParseError> {
    let (tokens, end) = tokenize(text)?;
    let items = Parser { tokens, at: 0, end }.items()?;
    resolve(items, end)
}

// ---------------------------------------------------------------------------
// Raw syntax

#[derive(Debug)]
enum RawFormula {
    True,
    False,
    Atom { var: String, value: String, pos: Pos },
    Not(Box<RawFormula>),
    And(Box<RawFormula>, Box<RawFormula>),
    Or(Box<RawFormula>, Box<RawFormula>),
}

#[derive(Debug)]
struct RawAssign {
    var: String,
    value: String,
    pos: Pos,
}

#[derive(Debug)]
struct RawEffect {
    assigns: Vec<RawAssign>,
    prob: Option<(String, Pos)>,
}

#[derive(Debug)]
struct RawBranch {
    pre: RawFormula,
    occur: Option<(String, Pos)>,
    effects: Vec<RawEffect>,
    pos: Pos,
}

#[derive(Debug)]
enum Deadline {
    After(u32),
    Within(u32),
}

#[derive(Debug)]
struct RawRequirement {
    name: String,
    pos: Pos,
    achieve: bool,
    required: RawFormula,
    duration: Option<u32>,
    deadline: Option<Deadline>,
    activation: Option<RawFormula>,
    cancellation: Option<RawFormula>,
    reward: Option<u64>,
    once: bool,
}

#[derive(Debug)]
enum Item {
    Variable { name: String, values: Option<Vec<(String, Pos)>>, pos: Pos },
    Action { name: String, pos: Pos, branches: Vec<RawBranch>, cost: Option<u64> },
    Event { name: String, pos: Pos, branches: Vec<RawBranch> },
    Requirement(RawRequirement),
    Init { atoms: Vec<RawAssign>, pos: Pos },
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    end: Pos,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.at).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.tokens.get(self.at + offset).map(|t| &t.tok)
    }

    fn pos(&self) -> Pos {
        self.tokens.get(self.at).map(|t| t.pos).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.at).cloned();
        if t.is_some() {
            self.at += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        match self.tokens.get(self.at) {
            Some(t) => ParseError::new(
                t.pos,
                ParseErrorKind::Unexpected { expected: expected.to_string(), found: t.tok.describe() },
            ),
            None => ParseError::new(self.end, ParseErrorKind::UnexpectedEof { expected: expected.to_string() }),
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(&format!("`{kw}`")))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.error(&tok.describe()))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Pos)> {
        match self.peek() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let t = self.next().unwrap();
                let Tok::Ident(s) = t.tok else { unreachable!() };
                Ok((s, t.pos))
            }
            _ => Err(self.error(what)),
        }
    }

    /// A value name: an identifier or a plain integer.
    fn value(&mut self) -> PResult<(String, Pos)> {
        match self.peek() {
            Some(Tok::Number(s)) if s.chars().all(|c| c.is_ascii_digit()) => {
                let t = self.next().unwrap();
                let Tok::Number(s) = t.tok else { unreachable!() };
                Ok((s, t.pos))
            }
            _ => self.ident("a value"),
        }
    }

    fn number(&mut self, what: &str) -> PResult<(String, Pos)> {
        match self.peek() {
            Some(Tok::Number(_)) => {
                let t = self.next().unwrap();
                let Tok::Number(s) = t.tok else { unreachable!() };
                Ok((s, t.pos))
            }
            _ => Err(self.error(what)),
        }
    }

    fn integer(&mut self, what: &str) -> PResult<u64> {
        let (s, pos) = self.number(what)?;
        s.parse().map_err(|_| ParseError::new(pos, ParseErrorKind::InvalidInteger(s)))
    }

    fn positive(&mut self, what: &str) -> PResult<u32> {
        let pos = self.pos();
        let n = self.integer(what)?;
        if n == 0 || n > u32::MAX as u64 {
            return Err(ParseError::new(pos, ParseErrorKind::Invalid(format!("{what} must be a positive integer"))));
        }
        Ok(n as u32)
    }

    fn items(mut self) -> PResult<Vec<Item>> {
        let mut items = Vec::new();
        while let Some(tok) = self.peek() {
            let pos = self.pos();
            let item = match tok {
                Tok::Ident(kw) if kw == "Variable" => {
                    self.at += 1;
                    self.variable(pos)?
                }
                Tok::Ident(kw) if kw == "Action" => {
                    self.at += 1;
                    self.action(pos)?
                }
                Tok::Ident(kw) if kw == "Event" => {
                    self.at += 1;
                    self.event(pos)?
                }
                Tok::Ident(kw) if kw == "ReqID" || kw == "ReqId" => {
                    self.at += 1;
                    Item::Requirement(self.requirement(pos)?)
                }
                Tok::Ident(kw) if kw == "Init" => {
                    self.at += 1;
                    self.init(pos)?
                }
                _ => return Err(self.error("`Variable`, `Action`, `Event`, `ReqID` or `Init`")),
            };
            items.push(item);
        }
        Ok(items)
    }

    fn variable(&mut self, pos: Pos) -> PResult<Item> {
        let (name, _) = self.ident("a variable name")?;
        let values = if self.eat_keyword("domain") {
            self.expect(Tok::LBrace)?;
            let mut values = vec![self.value()?];
            while self.eat(&Tok::Comma) {
                values.push(self.value()?);
            }
            self.expect(Tok::RBrace)?;
            Some(values)
        } else {
            None
        };
        Ok(Item::Variable { name, values, pos })
    }

    fn action(&mut self, pos: Pos) -> PResult<Item> {
        let (name, _) = self.ident("an action name")?;
        let mut branches = Vec::new();
        while self.is_keyword("if") {
            branches.push(self.branch(false)?);
        }
        if branches.is_empty() {
            return Err(self.error("`if`"));
        }
        let cost = if self.eat_keyword("cost") { Some(self.integer("a cost")?) } else { None };
        Ok(Item::Action { name, pos, branches, cost })
    }

    fn event(&mut self, pos: Pos) -> PResult<Item> {
        let (name, _) = self.ident("an event name")?;
        let mut branches = Vec::new();
        while self.is_keyword("if") {
            branches.push(self.branch(true)?);
        }
        if branches.is_empty() {
            return Err(self.error("`if`"));
        }
        Ok(Item::Event { name, pos, branches })
    }

    fn branch(&mut self, event: bool) -> PResult<RawBranch> {
        let pos = self.pos();
        self.expect_keyword("if")?;
        let pre = self.formula()?;
        let occur = if event && self.eat_keyword("occur") {
            self.expect_keyword("prob")?;
            Some(self.number("a probability")?)
        } else {
            None
        };
        self.expect_keyword("effects")?;
        let mut effects = Vec::new();
        while self.peek() == Some(&Tok::Lt) {
            effects.push(self.effect()?);
        }
        if effects.is_empty() {
            return Err(self.error("`<`"));
        }
        Ok(RawBranch { pre, occur, effects, pos })
    }

    fn effect(&mut self) -> PResult<RawEffect> {
        self.expect(Tok::Lt)?;
        let mut assigns = Vec::new();
        let mut prob = None;
        loop {
            if self.eat(&Tok::Gt) {
                break;
            }
            if self.eat_keyword("prob") {
                prob = Some(self.number("a probability")?);
                self.expect(Tok::Gt)?;
                break;
            }
            assigns.push(self.assignment()?);
            self.eat(&Tok::Comma);
        }
        Ok(RawEffect { assigns, prob })
    }

    /// `x=v`, `x` (x=tt) or `!x` (x=ff).
    fn assignment(&mut self) -> PResult<RawAssign> {
        if self.eat(&Tok::Bang) {
            let (var, pos) = self.ident("a variable name")?;
            return Ok(RawAssign { var, value: BOOLEAN_DOMAIN[FALSE_VALUE].into(), pos });
        }
        let (var, pos) = self.ident("an assignment")?;
        if self.eat(&Tok::Eq) {
            let (value, _) = self.value()?;
            Ok(RawAssign { var, value, pos })
        } else {
            Ok(RawAssign { var, value: BOOLEAN_DOMAIN[TRUE_VALUE].into(), pos })
        }
    }

    fn requirement(&mut self, pos: Pos) -> PResult<RawRequirement> {
        let (name, _) = self.ident("a requirement name")?;
        let achieve = if self.eat_keyword("achieve") {
            true
        } else if self.eat_keyword("maintain") {
            false
        } else {
            return Err(self.error("`achieve` or `maintain`"));
        };
        let required = self.formula()?;
        let duration = if self.is_keyword("for") {
            if achieve {
                return Err(ParseError::new(
                    self.pos(),
                    ParseErrorKind::Invalid("`for` is only valid for maintain requirements".into()),
                ));
            }
            self.at += 1;
            Some(self.positive("a duration")?)
        } else {
            None
        };
        let deadline = if self.eat_keyword("after") {
            Some(Deadline::After(self.positive("a deadline")?))
        } else if self.eat_keyword("within") {
            Some(Deadline::Within(self.positive("a deadline")?))
        } else {
            None
        };
        let activation = if self.eat_keyword("if") { Some(self.formula()?) } else { None };
        let cancellation = if self.eat_keyword("unless") { Some(self.formula()?) } else { None };
        let (reward, once) = if self.eat_keyword("reward") {
            (Some(self.integer("a reward")?), false)
        } else if self.eat_keyword("reward_once") {
            (Some(self.integer("a reward")?), true)
        } else {
            (None, false)
        };
        Ok(RawRequirement { name, pos, achieve, required, duration, deadline, activation, cancellation, reward, once })
    }

    fn init(&mut self, pos: Pos) -> PResult<Item> {
        self.expect(Tok::LBrace)?;
        let mut atoms = Vec::new();
        if !self.eat(&Tok::RBrace) {
            atoms.push(self.assignment()?);
            while self.eat(&Tok::Comma) {
                atoms.push(self.assignment()?);
            }
            self.expect(Tok::RBrace)?;
        }
        Ok(Item::Init { atoms, pos })
    }

    // Precedence: `!` binds tightest, then `&`, then `||`.
    fn formula(&mut self) -> PResult<RawFormula> {
        let mut lhs = self.conjunction()?;
        while self.eat(&Tok::Pipe2) {
            let rhs = self.conjunction()?;
            lhs = RawFormula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> PResult<RawFormula> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::Amp) {
            let rhs = self.unary()?;
            lhs = RawFormula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<RawFormula> {
        if self.eat(&Tok::Bang) {
            // `!id` not followed by `=` is the boolean shorthand id=ff
            if let (Some(Tok::Ident(s)), next) = (self.peek(), self.peek_at(1)) {
                if !KEYWORDS.contains(&s.as_str()) && next != Some(&Tok::Eq) {
                    let (var, pos) = self.ident("a variable")?;
                    return Ok(RawFormula::Atom { var, value: BOOLEAN_DOMAIN[FALSE_VALUE].into(), pos });
                }
            }
            return Ok(RawFormula::Not(Box::new(self.unary()?)));
        }
        if self.eat(&Tok::LParen) {
            let f = self.formula()?;
            self.expect(Tok::RParen)?;
            return Ok(f);
        }
        if self.eat_keyword("true") {
            return Ok(RawFormula::True);
        }
        if self.eat_keyword("false") {
            return Ok(RawFormula::False);
        }
        let (var, pos) = self.ident("a condition")?;
        if self.eat(&Tok::Eq) {
            let (value, _) = self.value()?;
            Ok(RawFormula::Atom { var, value, pos })
        } else {
            Ok(RawFormula::Atom { var, value: BOOLEAN_DOMAIN[TRUE_VALUE].into(), pos })
        }
    }
}

// ---------------------------------------------------------------------------
// Resolution

struct Resolver {
    variables: Vec<VariableDecl>,
    index: HashMap<String, usize>,
}

impl Resolver {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.variables.len();
        self.variables.push(VariableDecl::boolean(name));
        self.index.insert(name.to_string(), i);
        i
    }

    fn atom(&mut self, var: &str, value: &str, pos: Pos) -> PResult<(VarId, usize)> {
        let i = self.var(var);
        let decl = &self.variables[i];
        match decl.value_index(value) {
            Some(v) => Ok((VarId(i), v)),
            None => Err(ParseError::new(
                pos,
                ParseErrorKind::UnknownValue { variable: var.to_string(), value: value.to_string() },
            )),
        }
    }

    fn formula(&mut self, raw: &RawFormula) -> PResult<Formula> {
        Ok(match raw {
            RawFormula::True => Formula::True,
            RawFormula::False => Formula::False,
            RawFormula::Atom { var, value, pos } => {
                let (v, val) = self.atom(var, value, *pos)?;
                Formula::Atom(v, val)
            }
            RawFormula::Not(f) => Formula::not(self.formula(f)?),
            RawFormula::And(a, b) => Formula::and(self.formula(a)?, self.formula(b)?),
            RawFormula::Or(a, b) => Formula::or(self.formula(a)?, self.formula(b)?),
        })
    }

    fn effects(&mut self, raw: &[RawEffect], branch_pos: Pos) -> PResult<Vec<Effect>> {
        let mut out = Vec::with_capacity(raw.len());
        for eff in raw {
            let mut assignments = Vec::with_capacity(eff.assigns.len());
            let mut seen = HashSet::new();
            for a in &eff.assigns {
                let atom = self.atom(&a.var, &a.value, a.pos)?;
                if !seen.insert(atom.0) {
                    return Err(ParseError::new(a.pos, ParseErrorKind::DuplicateAssignment(a.var.clone())));
                }
                assignments.push(atom);
            }
            let prob = match &eff.prob {
                Some((text, pos)) => probability(text, *pos)?,
                None => Prob::one(),
            };
            out.push(Effect { assignments, prob });
        }
        let sum = prob::checked_sum(out.iter().map(|e| &e.prob));
        match sum {
            Some(s) if s <= Prob::one() => Ok(out),
            Some(s) => Err(ParseError::new(branch_pos, ParseErrorKind::ProbabilitySum { sum: prob::format_prob(&s) })),
            None => Err(ParseError::new(branch_pos, ParseErrorKind::ProbabilitySum { sum: "overflow".into() })),
        }
    }
}

fn probability(text: &str, pos: Pos) -> PResult<Prob> {
    match prob::parse_prob(text) {
        Some(p) if !p.is_zero() && p <= Prob::one() => Ok(p),
        _ => Err(ParseError::new(pos, ParseErrorKind::ProbabilityOutOfRange(text.to_string()))),
    }
}

fn duplicate(pos: Pos, category: &'static str, name: &str) -> ParseError {
    ParseError::new(pos, ParseErrorKind::Duplicate { category, name: name.to_string() })
}

fn requirement_kind(raw: &RawRequirement) -> RequirementKind {
    use RequirementKind::*;
    let conditional = raw.activation.is_some();
    match (raw.achieve, raw.duration.is_some(), &raw.deadline) {
        (true, _, Some(Deadline::After(_))) => DEA,
        (true, _, Some(Deadline::Within(_))) => DFA,
        (true, _, None) if conditional => CA,
        (true, _, None) => UA,
        (false, false, Some(Deadline::After(_))) => DEM,
        (false, false, Some(Deadline::Within(_))) => DFM,
        (false, false, None) if conditional => CM,
        (false, false, None) => UM,
        (false, true, None) if raw.once => RPM,
        (false, true, None) => PM,
        (false, true, Some(Deadline::After(_))) if raw.once => RPDEM,
        (false, true, Some(Deadline::After(_))) => PDEM,
        (false, true, Some(Deadline::Within(_))) if raw.once => RPDFM,
        (false, true, Some(Deadline::Within(_))) => PDFM,
    }
}

fn resolve(items: Vec<Item>, end: Pos) -> PResult<(DomainModel, SourceMap)> {
    let mut resolver = Resolver { variables: Vec::new(), index: HashMap::new() };
    let mut spans = SourceMap::default();

    for item in &items {
        if let Item::Variable { name, values, pos } = item {
            if resolver.index.contains_key(name) {
                return Err(duplicate(*pos, "variable", name));
            }
            let decl = match values {
                None => VariableDecl::boolean(name.clone()),
                Some(values) => {
                    let mut seen = HashSet::new();
                    for (v, vpos) in values {
                        if !seen.insert(v.as_str()) {
                            return Err(duplicate(*vpos, "value", v));
                        }
                    }
                    VariableDecl { name: name.clone(), values: values.iter().map(|(v, _)| v.clone()).collect() }
                }
            };
            spans.variables.insert(resolver.variables.len(), *pos);
            resolver.index.insert(name.clone(), resolver.variables.len());
            resolver.variables.push(decl);
        }
    }

    let mut actions: Vec<ActionDesc> = Vec::new();
    let mut events: Vec<EventDesc> = Vec::new();
    let mut requirements: Vec<Requirement> = Vec::new();
    // resolved atoms with their positions, and the position of the block
    type InitBlock = (Vec<(VarId, usize, Pos)>, Pos);
    let mut init: Option<InitBlock> = None;

    for item in &items {
        match item {
            Item::Variable { .. } => {}
            Item::Action { name, pos, branches, cost } => {
                if name == "noop" || actions.iter().any(|a| &a.name == name) {
                    return Err(duplicate(*pos, "action", name));
                }
                let mut out = Vec::with_capacity(branches.len());
                for b in branches {
                    let precondition = resolver.formula(&b.pre)?;
                    let effects = resolver.effects(&b.effects, b.pos)?;
                    out.push(ActionBranch { precondition, effects });
                }
                actions.push(ActionDesc { name: name.clone(), cost: cost.unwrap_or(0), branches: out });
                spans.actions.push(*pos);
            }
            Item::Event { name, pos, branches } => {
                if events.iter().any(|e| &e.name == name) {
                    return Err(duplicate(*pos, "event", name));
                }
                let mut out = Vec::with_capacity(branches.len());
                for b in branches {
                    let precondition = resolver.formula(&b.pre)?;
                    let occurrence = match &b.occur {
                        Some((text, p)) => probability(text, *p)?,
                        None => Prob::one(),
                    };
                    let effects = resolver.effects(&b.effects, b.pos)?;
                    out.push(EventBranch { precondition, occurrence, effects });
                }
                events.push(EventDesc { name: name.clone(), branches: out });
                spans.events.push(*pos);
            }
            Item::Requirement(raw) => {
                if requirements.iter().any(|r| r.name == raw.name) {
                    return Err(duplicate(raw.pos, "requirement", &raw.name));
                }
                let kind = requirement_kind(raw);
                let required = resolver.formula(&raw.required)?;
                let activation = raw.activation.as_ref().map(|f| resolver.formula(f)).transpose()?;
                let cancellation = raw.cancellation.as_ref().map(|f| resolver.formula(f)).transpose()?;
                let deadline = raw.deadline.as_ref().map(|d| match d {
                    Deadline::After(n) | Deadline::Within(n) => *n,
                });
                requirements.push(Requirement {
                    name: raw.name.clone(),
                    kind,
                    required,
                    activation,
                    cancellation,
                    deadline,
                    duration: raw.duration,
                    reward: raw.reward.unwrap_or(0),
                    reward_mode: if raw.once { RewardMode::Once } else { RewardMode::PerSatisfaction },
                });
                spans.requirements.push(raw.pos);
            }
            Item::Init { atoms, pos } => {
                if init.is_some() {
                    return Err(duplicate(*pos, "block", "Init"));
                }
                let mut resolved = Vec::with_capacity(atoms.len());
                for a in atoms {
                    let (var, value) = resolver.atom(&a.var, &a.value, a.pos)?;
                    resolved.push((var, value, a.pos));
                }
                init = Some((resolved, *pos));
            }
        }
    }

    let Some((atoms, init_pos)) = init else {
        return Err(ParseError::new(if items.is_empty() { Pos { line: 1, col: 1 } } else { end }, ParseErrorKind::MissingInit));
    };
    let mut initial: Vec<Option<usize>> = vec![None; resolver.variables.len()];
    for (var, value, pos) in atoms {
        if initial[var.0].replace(value).is_some() {
            return Err(ParseError::new(
                pos,
                ParseErrorKind::DuplicateAssignment(resolver.variables[var.0].name.clone()),
            ));
        }
    }
    let initial_state = initial
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| {
                ParseError::new(init_pos, ParseErrorKind::InitIncomplete(resolver.variables[i].name.clone()))
            })
        })
        .collect::<PResult<Vec<_>>>()?;
    spans.init = init_pos;

    Ok((
        DomainModel { variables: resolver.variables, actions, events, requirements, initial_state },
        spans,
    ))
}
