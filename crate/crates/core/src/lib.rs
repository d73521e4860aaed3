//! Many-objective refactoring optimizer for component-based architecture
//! models.
//!
//! A candidate solution is a short sequence of refactoring actions applied to
//! an [`ArchModel`]. Each candidate is scored on performance variation,
//! reliability, fuzzy performance-antipattern count and architectural
//! distance, and NSGA-II searches for the Pareto-optimal sequences.

pub mod antipatterns;
pub mod fixtures;
pub mod harness;
pub mod indicators;
pub mod lqn;
pub mod model;
pub mod nsga2;
pub mod objectives;
pub mod refactoring;
pub mod reliability;

pub use model::{ArchModel, ModelError};
pub use refactoring::{ActionKind, RefactoringAction, RefactoringSequence};
