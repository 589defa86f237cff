//! Safety verification for feed-forward ReLU networks.
//!
//! A claim bounds a linear functional of the network outputs over a
//! polyhedral input region. Claims are decided by encoding the network as a
//! big-M mixed-integer program and maximizing with best-first branch-and-bound
//! over neuron phases, using interval bounds for the big-M constants and a
//! built-in bounded-variable simplex for the relaxations.
//!
//! Around the verifier sit the supporting pieces of a certification workflow:
//! training-data validation against unsafe patterns, neuron-to-feature
//! traceability reports, and a synthetic highway case study that trains
//! several small predictors and verifies each.

pub mod bounds;
pub mod data;
pub mod error;
pub mod lp;
pub mod milp;
pub mod network;
pub mod property;
pub mod scenario;
pub mod trace;

pub use bounds::{propagate_box, propagate_with_fixings, InputBox, LayerBounds, NeuronPhase};
pub use data::{sanitize, validate_dataset, Dataset, Record, UnsafePattern, ValidationReport};
pub use error::{Error, Result};
pub use lp::{solve_lp, LinearConstraint, LinearProgram, LpOutcome, Relation};
pub use milp::{
    check_claim, encode, enumerate_phases, maximize, MaximizeOptions, MaximizeResult, MilpSystem,
    SearchMode, SearchStatus,
};
pub use network::{load_network, save_network, Activation, Layer, Network};
pub use property::{
    parse_claim, replay_witness, InputRegion, SafetyClaim, SolverStats, Verdict, VerdictStatus,
};
pub use trace::{profile, NeuronProfile};
