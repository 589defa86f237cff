//! MILP-based verification: encoding, branch-and-bound maximization, claim
//! checking, and the exhaustive phase-enumeration oracle.

pub mod encode;
pub mod oracle;
pub mod search;

pub use encode::{encode, MilpSystem, NeuronVars, SparseRow, VarKind};
pub use oracle::{enumerate_phases, ORACLE_MAX_CROSSING};
pub use search::{
    check_claim, check_claim_detailed, maximize, MaximizeOptions, MaximizeResult, SearchMode,
    SearchStatus, DEFAULT_GAP, DEFAULT_TIMEOUT_S,
};
