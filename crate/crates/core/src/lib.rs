//! Repair of property violations in dense feedforward networks.
//!
//! Two strategies share one sampling front end:
//!
//! * [`retrainer`] relabels negative samples with the outputs of nearby
//!   positive samples and retrains under a combined repair/preservation loss.
//! * [`finetuner`] ranks neurons by how differently they behave on negative
//!   and positive samples ([`localizer`]) and searches the incoming weights of
//!   the most responsible ones with particle swarm optimization ([`pso`]).

pub mod cli;
pub mod error;
pub mod finetuner;
pub mod localizer;
pub mod network;
pub mod properties;
pub mod pso;
pub mod report;
pub mod retrainer;
pub mod sampler;
pub mod synthetic;

pub use error::{RepairError, Result};
