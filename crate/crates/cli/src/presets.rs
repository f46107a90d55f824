//! The two canned experiments, expressed as configs for [`crate::run::execute`].

use qprior::measure::PovmKind;

use crate::config::{
    ExperimentConfig, OutcomeSource, OutputSpec, PovmSpec, PriorSpec, ResampleSpec, Schedule,
    StateSpec,
};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_PARTICLES: usize = 100_000;

fn output(stem: &str) -> OutputSpec {
    OutputSpec {
        csv: format!("{stem}.csv"),
        json: format!("{stem}.json"),
    }
}

/// All-zero z-basis data of length `m` against the Haar, plus-product and
/// counter-inductive priors, each tracked against its limit state.
pub fn three_priors(m: usize, particles: usize, seed: u64) -> Vec<ExperimentConfig> {
    let run = |prior: PriorSpec, target: &str, stem: &str| ExperimentConfig {
        prior,
        povm: PovmSpec {
            name: PovmKind::ZBasis,
            schedule: Schedule::PerBlock,
        },
        outcomes: OutcomeSource::Constant { symbol: 0 },
        iterations: m,
        target: StateSpec::Named(target.into()),
        resampling: None,
        output: output(stem),
    };
    vec![
        run(
            PriorSpec::HaarPure { particles, seed },
            "zero",
            "three_priors_haar_pure",
        ),
        run(PriorSpec::PlusProduct, "plus", "three_priors_plus_product"),
        run(
            PriorSpec::CounterInductive,
            "one",
            "three_priors_counter_inductive",
        ),
    ]
}

/// Pair outcomes sampled from the maximally entangled state under
/// product SIC measurements, fed to the pairwise prior (tracked against the
/// entangled state) and, split per qubit, to the single-system prior
/// (tracked against the maximally mixed state).
///
/// Seeds: `seed` for the priors, `seed + 1` for the data, `seed + 2` for
/// resampling.
pub fn entanglement(pairs: usize, particles: usize, seed: u64) -> Vec<ExperimentConfig> {
    let povm = PovmKind::Product(Box::new(PovmKind::SicQubit), Box::new(PovmKind::SicQubit));
    let outcomes = OutcomeSource::Sampled {
        true_state: StateSpec::Named("bell_phi_plus".into()),
        seed: seed.wrapping_add(1),
    };
    let resampling = Some(ResampleSpec {
        seed: seed.wrapping_add(2),
        ..ResampleSpec::default()
    });
    vec![
        ExperimentConfig {
            prior: PriorSpec::HsPairwise { particles, seed },
            povm: PovmSpec {
                name: povm.clone(),
                schedule: Schedule::PerBlock,
            },
            outcomes: outcomes.clone(),
            iterations: pairs,
            target: StateSpec::Named("bell_phi_plus".into()),
            resampling,
            output: output("entanglement_rho_e"),
        },
        ExperimentConfig {
            prior: PriorSpec::HsMixed { particles, seed },
            povm: PovmSpec {
                name: povm,
                schedule: Schedule::PerFactor,
            },
            outcomes,
            iterations: pairs,
            target: StateSpec::Named("maximally_mixed".into()),
            resampling,
            output: output("entanglement_rho_d"),
        },
    ]
}
