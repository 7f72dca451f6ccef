//! Simulation, compilation and verification of weak asynchronous
//! distributed automata on labelled graphs.

pub mod abstraction;
pub mod engine;
pub mod error;
pub mod compile;
pub mod explore;
pub mod extended;
pub mod formats;
pub mod graph;
pub mod machine;
pub mod protocols;
pub mod semantics;
pub mod state;
pub mod verify;

pub use error::MachineError;
pub use graph::{GraphError, LabelledGraph};
pub use machine::{Machine, MachineRef};
pub use state::{Neighbourhood, State};
