//! Classical and quantum causal models over DAGs.

pub mod ccm;
pub mod ci;
pub mod dag_format;
pub mod distribution;
pub mod error;
pub mod graph;
pub mod quantum;
pub mod scenarios;
pub mod separation;
pub mod varset;

pub use ci::{closure, implies, CiRelation, CiSet};
pub use distribution::JointDistribution;
pub use error::{Error, Result};
pub use graph::{Dag, DagBuilder, NodeKind, Role, VarOrder};
pub use varset::{VarId, VarSet};
