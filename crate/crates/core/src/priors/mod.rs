//! Prior sequences: families of n-system states consistent under tracing out
//! the last system.

mod change_point;
mod ensemble;

pub use change_point::{
    counter_inductive_prior, ChangePointPrior, Conditioning, DEFAULT_TRUNCATION,
};
pub use ensemble::{
    ensemble_state, haar_pure_ensemble, hs_mixed_ensemble, plus_product_prior,
    two_qubit_pair_ensemble, ParticleEnsemble, ReferenceMeasure,
};

use crate::error::Result;
use crate::qalg::DensityOperator;

/// A prior on an unbounded sequence of systems, queried through its
/// finite-n marginals.
///
/// Implementations must satisfy `tr_{n+1} state_at(n+1) == state_at(n)`.
pub trait PriorSequence {
    /// Hilbert dimension of one system.
    fn system_dim(&self) -> usize;

    /// Joint state of the first `n >= 1` systems.
    fn state_at(&self, n: usize) -> Result<DensityOperator>;
}
