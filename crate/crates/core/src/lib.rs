//! Sequential quantum Bayesian inference over prior sequences.
//!
//! A prior on a sequence of systems is a family of n-system states, each the
//! partial trace of the next. Measuring the first system and discarding it
//! turns a prior into a posterior of the same kind. This crate provides:
//!
//! - [`qalg`]: density operators, tensor products, partial traces, trace distance
//! - [`measure`]: POVMs, Kraus channels, Born probabilities, the Kraus update
//! - [`priors`]: particle (de Finetti) ensembles and the counter-inductive
//!   change-point prior
//! - [`infer`]: reweighting, exact change-point conditioning, the dense
//!   measure-and-discard oracle, resample-move, and trajectory recording

pub mod error;
pub mod infer;
pub mod measure;
pub mod priors;
pub mod qalg;

pub use error::{Error, Result};
pub use infer::{
    bayes_update_ensemble, bayes_update_with_evidence, cip_condition, dense_sequence_update,
    effective_sample_size, predictive_marginal, predictive_probabilities, resample_move,
    resample_move_targeted, run_inference, InferenceTrajectory, LogTarget, MeasurementSchedule,
    Prior, ResampleOptions, RunOptions, StepRecord,
};
pub use measure::{
    born_probabilities, is_informationally_complete, kraus_update, lueders_channel, standard_povm,
    KrausChannel, Povm, PovmKind,
};
pub use priors::{
    counter_inductive_prior, ensemble_state, haar_pure_ensemble, hs_mixed_ensemble,
    plus_product_prior, two_qubit_pair_ensemble, ChangePointPrior, ParticleEnsemble, PriorSequence,
    ReferenceMeasure,
};
pub use qalg::{
    partial_trace, tensor, trace_distance, validate_density, ComplexMatrix, DensityOperator, C64,
};
