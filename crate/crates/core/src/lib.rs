//! Sound overapproximated reach probabilities for ReLU network controllers.
//!
//! The pipeline: load a policy network, overapproximate it on an adaptive
//! partition of the input space with a sound interval verifier, then run
//! cell-level probabilistic model checking against a stochastic dynamics
//! model. Every reported probability is an upper bound on the true
//! probability of reaching the unsafe set from anywhere in the cell.

pub mod adaptive;
pub mod baseline;
pub mod checker;
pub mod dynamics;
pub mod error;
pub mod geom;
pub mod io;
pub mod network;
pub mod partition;
pub mod verifier;

pub use error::{Error, Result};
pub use geom::Rect;
pub use network::{Network, SelectionRule};
pub use partition::{Cell, CellId, PartitionTree};
pub use verifier::{ActionSet, IntervalVector};
