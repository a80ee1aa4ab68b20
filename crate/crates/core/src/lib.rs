pub mod constants;
pub mod cuts;
pub mod degree;
pub mod derandomize;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod heldkarp;
pub mod hierarchy;
pub mod instance;
pub mod linalg;
pub mod linform;
pub mod maxflow;
pub mod pipeline;
pub mod simplex;
pub mod sslack;
pub mod sstar;
pub mod tour;
pub mod treedist;

pub use error::{Error, Result};
pub use graph::{Edge, EdgeId, Graph, VSet};
pub use instance::{LpSolution, MetricInstance, SupportGraph};
pub use treedist::{ParityQuery, PartialAssignment, TreeDistribution};
