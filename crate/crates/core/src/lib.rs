//! Process-matrix calculus for quantum circuits with fixed, classically
//! controlled, and quantum-controlled causal order.
//!
//! The crate is organised around a small labeled tensor algebra
//! ([`tensor`]): operators and kets carry named, dimensioned factors, and the
//! link product contracts matching factors by name. On top of that sit
//! process matrices and their validity constraints ([`process`]), circuit
//! descriptions for the four circuit classes together with their
//! trace-preservation checks and process-matrix builders ([`circuits`]),
//! constructive synthesis of circuits from certified process matrices
//! ([`synth`]), and the generalized Born rule with the causal-model
//! extraction for quantum-controlled circuits ([`correlations`]).

pub mod circuits;
pub mod correlations;
pub mod process;
pub mod random;
pub mod synth;
pub mod tensor;

pub use process::{ProcessDims, ProcessMatrix, ValidityReport};
pub use tensor::{LabeledKet, LabeledOperator, SystemLabel};
