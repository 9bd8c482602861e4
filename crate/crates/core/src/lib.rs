//! Linear return estimators for tabular policy evaluation.
//!
//! An estimator is described by the weights it places on future TD errors
//! ([`TdWeights`]) or, equivalently, on n-step returns ([`NStepWeights`]).
//! The crate classifies estimators, computes contraction moduli, applies
//! their expected-update operators exactly, runs sampled TD learning and
//! checks variance bounds and off-policy conditions.

pub mod algebra;
pub mod analysis;
pub mod cli;
pub mod error;
pub mod mrp;
pub mod offpolicy;
pub mod operator;
pub mod rng;
pub mod spec;
pub mod sweep;
pub mod td;
pub mod weights;

pub use algebra::{classify, contraction_modulus, strong_recency, variance_bound, weak_recency, Classification};
pub use error::{Error, Result};
pub use mrp::{Mrp, Trajectory, ValueFunction};
pub use offpolicy::{check_offpolicy_condition, check_state_dependent_recency, OffPolicyTrace, StateWeights};
pub use operator::{apply_operator, apply_operator_nstep_form, iterate, IterateConfig, IterationTrace, Verdict};
pub use spec::ReturnSpec;
pub use sweep::{run_sweep, SweepConfig, SweepResult};
pub use weights::{c_to_h, h_to_c, NStepWeights, Tail, TdWeights, WeightSeq};
