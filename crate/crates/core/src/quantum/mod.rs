//! Quantum causal models: parameters, exact state-vector evaluation, and
//! the classical limit.

mod classical;
pub mod format;
mod matrix;
mod model;
mod random;

pub use classical::{ccm_from_qcm, classical_limit};
pub use format::{format_complex, parse_complex, parse_params, write_params};
pub use matrix::{basis_index, norm, CMatrix, C64};
pub use model::{Qcm, QuantumModelParams, DEFAULT_STATE_CAP, LOAD_TOL};
pub use random::{random_qcm_params, random_quantum_dag, random_state, random_unitary};
