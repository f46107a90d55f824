//! Outcome streams fed to a run.

use qprior::{born_probabilities, DensityOperator, Povm, Result};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Constant,
    Explicit,
    Sampled { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeStream {
    pub outcomes: Vec<usize>,
    pub provenance: Provenance,
}

impl OutcomeStream {
    pub fn constant(symbol: usize, count: usize) -> Self {
        Self {
            outcomes: vec![symbol; count],
            provenance: Provenance::Constant,
        }
    }

    pub fn explicit(outcomes: Vec<usize>) -> Self {
        Self {
            outcomes,
            provenance: Provenance::Explicit,
        }
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// Replaces each outcome of a product POVM by its factor outcomes, in
    /// factor order.
    pub fn split_factors(&self, povm: &Povm) -> Option<Self> {
        let mut outcomes = Vec::with_capacity(self.outcomes.len() * povm.factors().len());
        for &k in &self.outcomes {
            outcomes.extend(povm.split_outcome(k)?);
        }
        Some(Self {
            outcomes,
            provenance: self.provenance,
        })
    }
}

/// `count` i.i.d. draws from the Born distribution of `true_state`.
pub fn sample_outcomes(
    true_state: &DensityOperator,
    povm: &Povm,
    count: usize,
    seed: u64,
) -> Result<OutcomeStream> {
    let probabilities = born_probabilities(true_state, povm)?;
    let mut outcomes = Vec::with_capacity(count);
    if count > 0 {
        let dist = WeightedIndex::new(&probabilities).map_err(|e| {
            qprior::Error::InvalidParameter(format!("Born distribution not samplable: {e}"))
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        outcomes.extend((0..count).map(|_| dist.sample(&mut rng)));
    }
    Ok(OutcomeStream {
        outcomes,
        provenance: Provenance::Sampled { seed },
    })
}
