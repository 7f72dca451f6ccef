use thiserror::Error;

use crate::graph::GraphError;

/// Errors raised by machine construction, simulation and compilation.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MachineError {
    #[error("UnknownLabel: no initial state for label `{0}`")]
    UnknownLabel(String),
    #[error("BudgetExceeded: exploration budget of {0} exhausted")]
    BudgetExceeded(usize),
    #[error("TooLargeToSerialize: {0} guard units exceed 10^6")]
    TooLargeToSerialize(u128),
    #[error("NotEnumerable: machine does not enumerate its states")]
    NotEnumerable,
    #[error("InitNotCore: initial state {0} is not a core state")]
    InitNotCore(String),
    #[error("DegreeBoundExceeded: node {node} has degree {degree} > {bound}")]
    DegreeBoundExceeded { node: usize, degree: usize, bound: usize },
    #[error("NotHalting: rule leaves halted state {0}")]
    NotHalting(String),
    #[error("InvalidMachine: {0}")]
    InvalidMachine(String),
    #[error("NotIndependentSet: broadcast selection {0:?} is empty or not independent")]
    NotIndependentSet(Vec<usize>),
    #[error("BadResolution: {0}")]
    BadResolution(String),
    #[error("NotAdjacent: nodes {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),
    #[error("{0}")]
    Graph(#[from] GraphError),
}

impl MachineError {
    /// Variant name, printed by the command-line front end.
    pub fn name(&self) -> &'static str {
        match self {
            MachineError::UnknownLabel(_) => "UnknownLabel",
            MachineError::BudgetExceeded(_) => "BudgetExceeded",
            MachineError::TooLargeToSerialize(_) => "TooLargeToSerialize",
            MachineError::NotEnumerable => "NotEnumerable",
            MachineError::InitNotCore(_) => "InitNotCore",
            MachineError::DegreeBoundExceeded { .. } => "DegreeBoundExceeded",
            MachineError::NotHalting(_) => "NotHalting",
            MachineError::InvalidMachine(_) => "InvalidMachine",
            MachineError::NotIndependentSet(_) => "NotIndependentSet",
            MachineError::BadResolution(_) => "BadResolution",
            MachineError::NotAdjacent(..) => "NotAdjacent",
            MachineError::Graph(g) => graph_error_name(g),
        }
    }
}

pub fn graph_error_name(g: &GraphError) -> &'static str {
    match g {
        GraphError::Disconnected => "Disconnected",
        GraphError::SelfLoop(_) => "SelfLoop",
        GraphError::DuplicateEdge(..) => "DuplicateEdge",
        GraphError::TooFewNodes(_) => "TooFewNodes",
        GraphError::UnlabelledNode(_) => "UnlabelledNode",
        GraphError::UnknownNode(_) => "UnknownNode",
        GraphError::DuplicateNode(_) => "DuplicateNode",
        GraphError::InfeasibleSpec(_) => "InfeasibleSpec",
        GraphError::NotACycle => "NotACycle",
        GraphError::EdgeNotOnCycle(..) => "EdgeNotOnCycle",
        GraphError::Parse { .. } => "ParseError",
    }
}
