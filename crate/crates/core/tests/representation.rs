use proptest::prelude::*;
use qprior::measure::standard_povm_by_name;
use qprior::*;

fn chained_dense(
    mut state: DensityOperator,
    povm: &Povm,
    outcomes: &[usize],
) -> Result<DensityOperator> {
    let channel = lueders_channel(povm);
    for &k in outcomes {
        state = dense_sequence_update(&state, &channel, k)?;
    }
    Ok(state)
}

fn ensemble_with_weights(base: ParticleEnsemble, raw: &[f64]) -> ParticleEnsemble {
    let states = base.states().to_vec();
    let weights = raw.iter().cycle().take(states.len()).copied().collect();
    ParticleEnsemble::new(1, 2, weights, states, base.seed()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ensemble_update_matches_dense_oracle(
        particles in 1usize..=32,
        seed in any::<u64>(),
        pure in any::<bool>(),
        raw in prop::collection::vec(0.05f64..1.0, 1..8),
        povm_name in prop::sample::select(vec!["z_basis", "sic_qubit", "pauli6"]),
        outcomes in prop::collection::vec(0usize..6, 1..=3),
        n in 1usize..=4,
    ) {
        let povm = standard_povm_by_name(povm_name).unwrap();
        let outcomes: Vec<usize> = outcomes.iter().map(|k| k % povm.num_outcomes()).collect();
        let base = if pure {
            haar_pure_ensemble(particles, seed).unwrap()
        } else {
            hs_mixed_ensemble(particles, seed).unwrap()
        };
        let e = ensemble_with_weights(base, &raw);

        let mut updated = Ok(e.clone());
        for &k in &outcomes {
            updated = updated.and_then(|u| bayes_update_ensemble(&u, &povm, k));
        }
        let dense = chained_dense(ensemble_state(&e, n + outcomes.len()).unwrap(), &povm, &outcomes);
        match (updated, dense) {
            (Ok(u), Ok(d)) => {
                let via_weights = ensemble_state(&u, n).unwrap();
                prop_assert!(via_weights.max_abs_diff(&d) <= 1e-9, "diff {}", via_weights.max_abs_diff(&d));
            }
            // both sides see a vanishing outcome probability
            (Err(a), Err(_)) => prop_assert!(a.is_zero_evidence()),
            (u, d) => prop_assert!(false, "ensemble {:?} vs dense {:?}", u.err(), d.err()),
        }
    }
}

#[test]
fn change_point_prefixes_match_dense_oracle() {
    let z = standard_povm_by_name("z_basis").unwrap();
    let fresh = counter_inductive_prior();
    let mut checked = 0;
    for len in 1..=6usize {
        for bits in 0..(1u32 << len) {
            let prefix: Vec<usize> = (0..len).rev().map(|i| ((bits >> i) & 1) as usize).collect();
            let mut conditioned = Ok(fresh.clone());
            for &k in &prefix {
                conditioned = conditioned.and_then(|p| cip_condition(&p, k));
            }
            let runs = 1 + prefix.windows(2).filter(|w| w[0] != w[1]).count();
            match conditioned {
                Ok(p) => {
                    assert!(runs <= 2, "{prefix:?}");
                    for n in 1..=2 {
                        let dense =
                            chained_dense(fresh.cip_state(n + len).unwrap(), &z, &prefix).unwrap();
                        let exact = p.cip_state(n).unwrap();
                        assert!(exact.max_abs_diff(&dense) <= 1e-12, "{prefix:?} n={n}");
                    }
                    checked += 1;
                }
                Err(err) => {
                    assert!(runs > 2 && err.is_zero_evidence(), "{prefix:?}: {err}");
                    assert!(chained_dense(fresh.cip_state(1 + len).unwrap(), &z, &prefix).is_err());
                }
            }
        }
    }
    // prefixes with at most one switch: 2 per length plus 2(len - 1) switch points
    assert_eq!(checked, (1..=6).map(|l| 2 * l).sum::<usize>());
}

#[test]
fn posterior_weights_stay_normalized() {
    let sic = standard_povm_by_name("sic_qubit").unwrap();
    let mut e = hs_mixed_ensemble(500, 3).unwrap();
    for k in [0, 3, 3, 1, 2, 0, 0, 1] {
        e = bayes_update_ensemble(&e, &sic, k).unwrap();
        let total: f64 = e.weights().iter().sum();
        assert!((total - 1.0).abs() <= 1e-12);
    }
}
