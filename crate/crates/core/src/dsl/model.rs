use std::fmt;

use crate::prob::Prob;

use super::formula::Formula;

/// Index of a state variable in declaration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// Domain of variables that are never declared with an explicit `domain`.
pub const BOOLEAN_DOMAIN: [&str; 2] = ["tt", "ff"];
pub const TRUE_VALUE: usize = 0;
pub const FALSE_VALUE: usize = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableDecl {
    pub name: String,
    pub values: Vec<String>,
}

impl VariableDecl {
    pub fn boolean(name: impl Into<String>) -> Self {
        VariableDecl {
            name: name.into(),
            values: BOOLEAN_DOMAIN.iter().map(|v| v.to_string()).collect(),
        }
    }

    pub fn is_boolean(&self) -> bool {
        self.values.len() == 2 && self.values[0] == BOOLEAN_DOMAIN[0] && self.values[1] == BOOLEAN_DOMAIN[1]
    }

    pub fn value_index(&self, value: &str) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }
}

/// One probabilistic outcome: a set of assignments applied together.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Effect {
    pub assignments: Vec<(VarId, usize)>,
    pub prob: Prob,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionBranch {
    pub precondition: Formula,
    pub effects: Vec<Effect>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionDesc {
    pub name: String,
    pub cost: u64,
    pub branches: Vec<ActionBranch>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventBranch {
    pub precondition: Formula,
    pub occurrence: Prob,
    pub effects: Vec<Effect>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventDesc {
    pub name: String,
    pub branches: Vec<EventBranch>,
}

/// The fourteen requirement kinds.
///
/// Letters: U/C unconditional or conditional, A/M achieve or maintain,
/// D deadline with E exact or F flexible, P duration, R strict (rewarded once).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RequirementKind {
    UA,
    UM,
    CA,
    CM,
    DEA,
    DFA,
    DEM,
    DFM,
    PM,
    PDEM,
    PDFM,
    RPM,
    RPDEM,
    RPDFM,
}

impl RequirementKind {
    pub const ALL: [RequirementKind; 14] = [
        RequirementKind::UA,
        RequirementKind::UM,
        RequirementKind::CA,
        RequirementKind::CM,
        RequirementKind::DEA,
        RequirementKind::DFA,
        RequirementKind::DEM,
        RequirementKind::DFM,
        RequirementKind::PM,
        RequirementKind::PDEM,
        RequirementKind::PDFM,
        RequirementKind::RPM,
        RequirementKind::RPDEM,
        RequirementKind::RPDFM,
    ];

    pub fn is_unconditional(self) -> bool {
        matches!(self, RequirementKind::UA | RequirementKind::UM)
    }

    pub fn is_achieve(self) -> bool {
        use RequirementKind::*;
        matches!(self, UA | CA | DEA | DFA)
    }

    pub fn has_deadline(self) -> bool {
        use RequirementKind::*;
        matches!(self, DEA | DFA | DEM | DFM | PDEM | PDFM | RPDEM | RPDFM)
    }

    /// Exact-deadline kinds; the others with a deadline are flexible.
    pub fn exact_deadline(self) -> bool {
        use RequirementKind::*;
        matches!(self, DEA | DEM | PDEM | RPDEM)
    }

    pub fn has_duration(self) -> bool {
        use RequirementKind::*;
        matches!(self, PM | PDEM | PDFM | RPM | RPDEM | RPDFM)
    }

    pub fn is_strict(self) -> bool {
        use RequirementKind::*;
        matches!(self, RPM | RPDEM | RPDFM)
    }
}

impl fmt::Display for RequirementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RewardMode {
    PerSatisfaction,
    Once,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Requirement {
    pub name: String,
    pub kind: RequirementKind,
    pub required: Formula,
    pub activation: Option<Formula>,
    pub cancellation: Option<Formula>,
    pub deadline: Option<u32>,
    pub duration: Option<u32>,
    pub reward: u64,
    pub reward_mode: RewardMode,
}

/// A parsed domain description.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainModel {
    pub variables: Vec<VariableDecl>,
    pub actions: Vec<ActionDesc>,
    pub events: Vec<EventDesc>,
    pub requirements: Vec<Requirement>,
    /// Value index per variable, in declaration order.
    pub initial_state: Vec<usize>,
}

impl DomainModel {
    pub fn variable(&self, var: VarId) -> &VariableDecl {
        &self.variables[var.0]
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a.name == name)
    }

    pub fn atom_label(&self, var: VarId, value: usize) -> String {
        let decl = self.variable(var);
        format!("{}={}", decl.name, decl.values[value])
    }
}
