use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::PriorSequence;
use crate::error::{Error, Result};
use crate::qalg::{
    check_cap, checked_pow, mixture, ComplexMatrix, DensityOperator, C64, DENSITY_TOL,
};

/// Weights must sum to one within this tolerance after normalization.
const WEIGHT_TOL: f64 = 1e-12;

/// Measure the particles were drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMeasure {
    /// Hilbert–Schmidt measure: flat (Lebesgue) on the state space.
    HilbertSchmidt,
    /// Haar measure on pure states.
    HaarPure,
    /// A single fixed state.
    PointMass,
    /// Caller-supplied particles.
    Unspecified,
}

/// Finite de Finetti mixture: the prior on `n` systems is
/// `sum_i w_i rho_i^{(x) n/b}` where each particle `rho_i` is a state on a
/// block of `b` systems.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    block_size: usize,
    system_dim: usize,
    weights: Vec<f64>,
    states: Vec<DensityOperator>,
    seed: Option<u64>,
    measure: ReferenceMeasure,
}

impl ParticleEnsemble {
    /// Builds an ensemble from raw nonnegative weights (normalized here) and
    /// block states on `block_size` systems of dimension `system_dim`.
    pub fn new(
        block_size: usize,
        system_dim: usize,
        weights: Vec<f64>,
        states: Vec<DensityOperator>,
        seed: Option<u64>,
    ) -> Result<Self> {
        if !(1..=2).contains(&block_size) {
            return Err(Error::InvalidParameter(format!(
                "block size must be 1 or 2, got {block_size}"
            )));
        }
        if states.is_empty() || weights.len() != states.len() {
            return Err(Error::InvalidParameter(format!(
                "{} weights for {} particles",
                weights.len(),
                states.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("weights sum to zero".into()));
        }
        let block_dim = checked_pow(system_dim, block_size)?;
        let factor_dims = vec![system_dim; block_size];
        let mut checked = Vec::with_capacity(states.len());
        for s in states {
            if s.dim() != block_dim {
                return Err(Error::DimensionMismatch {
                    expected: block_dim,
                    actual: s.dim(),
                });
            }
            let report = s.validate(DENSITY_TOL);
            if !report.passes() {
                return Err(Error::InvalidDensity(report));
            }
            checked.push(s.with_factor_dims(factor_dims.clone())?);
        }
        Ok(Self {
            block_size,
            system_dim,
            weights: weights.iter().map(|w| w / total).collect(),
            states: checked,
            seed,
            measure: ReferenceMeasure::Unspecified,
        })
    }

    pub(crate) fn from_parts_unchecked(
        block_size: usize,
        system_dim: usize,
        weights: Vec<f64>,
        states: Vec<DensityOperator>,
        seed: Option<u64>,
        measure: ReferenceMeasure,
    ) -> Self {
        // summing n weights carries up to ~n ulp of rounding
        debug_assert!(
            (weights.iter().sum::<f64>() - 1.0).abs()
                <= WEIGHT_TOL.max(weights.len() as f64 * f64::EPSILON)
        );
        Self {
            block_size,
            system_dim,
            weights,
            states,
            seed,
            measure,
        }
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Hilbert dimension of one particle block.
    pub fn block_dim(&self) -> usize {
        self.system_dim.pow(self.block_size as u32)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    /// Seed the particles were drawn with, if sampled.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn reference_measure(&self) -> ReferenceMeasure {
        self.measure
    }

    pub(crate) fn set_weights(&mut self, weights: Vec<f64>) {
        debug_assert_eq!(weights.len(), self.states.len());
        self.weights = weights;
    }

    /// Weighted mean of the block states.
    pub fn mean_block_state(&self) -> DensityOperator {
        mixture(
            self.weights
                .iter()
                .copied()
                .zip(self.states.iter().map(|s| s.matrix())),
            vec![self.system_dim; self.block_size],
        )
    }
}

impl PriorSequence for ParticleEnsemble {
    fn system_dim(&self) -> usize {
        self.system_dim
    }

    fn state_at(&self, n: usize) -> Result<DensityOperator> {
        ensemble_state(self, n)
    }
}

/// Joint state of the first `n` systems under an ensemble prior.
///
/// For pair blocks and odd `n` the last pair is reduced to its first system,
/// which is the partial trace of the `n + 1` system state.
pub fn ensemble_state(e: &ParticleEnsemble, n: usize) -> Result<DensityOperator> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    check_cap(checked_pow(e.system_dim, n)?)?;
    let full_blocks = n / e.block_size;
    let remainder = n % e.block_size;
    if full_blocks == 1 && remainder == 0 {
        return Ok(e.mean_block_state());
    }
    let d = e.system_dim;
    let dim = d.pow(n as u32);
    let mut acc = ComplexMatrix::zeros(dim, dim);
    for (&w, s) in e.weights.iter().zip(&e.states) {
        if w == 0.0 {
            continue;
        }
        let mut term: Option<DensityOperator> = None;
        if full_blocks > 0 {
            term = Some(s.tensor_power(full_blocks)?);
        }
        if remainder == 1 {
            let head = s.trace_last()?;
            term = Some(match term {
                Some(t) => t.tensor(&head),
                None => head,
            });
        }
        let term = term.expect("n >= 1 yields at least one factor");
        acc.zip_apply(term.matrix(), |a, b| *a += b * w);
    }
    Ok(DensityOperator::from_parts_unchecked(acc, vec![d; n]))
}

fn standard_complex(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

fn require_particles(num_particles: usize) -> Result<()> {
    if num_particles == 0 {
        return Err(Error::InvalidParameter("need at least one particle".into()));
    }
    Ok(())
}

fn equal_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Haar-random pure qubit states, equally weighted.
pub fn haar_pure_ensemble(num_particles: usize, seed: u64) -> Result<ParticleEnsemble> {
    require_particles(num_particles)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = (0..num_particles)
        .map(|_| {
            let amps = [standard_complex(&mut rng), standard_complex(&mut rng)];
            DensityOperator::pure(&amps)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParticleEnsemble::from_parts_unchecked(
        1,
        2,
        equal_weights(num_particles),
        states,
        Some(seed),
        ReferenceMeasure::HaarPure,
    ))
}

/// The point-mass prior on `|+><+|`, i.e. `|+><+|^{(x) n}` for every n.
pub fn plus_product_prior() -> ParticleEnsemble {
    ParticleEnsemble::from_parts_unchecked(
        1,
        2,
        vec![1.0],
        vec![DensityOperator::plus()],
        None,
        ReferenceMeasure::PointMass,
    )
}

/// `G G^dagger / tr(G G^dagger)` with `G` a `dim x dim` complex Ginibre matrix.
fn hilbert_schmidt_state(
    dim: usize,
    factor_dims: &[usize],
    rng: &mut ChaCha8Rng,
) -> DensityOperator {
    let mut g = ComplexMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            g[(i, j)] = standard_complex(rng);
        }
    }
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    let mut m = m.unscale(tr);
    let sym = (&m + m.adjoint()).scale(0.5);
    m = sym;
    DensityOperator::from_parts_unchecked(m, factor_dims.to_vec())
}

/// Hilbert–Schmidt random mixed qubit states, equally weighted.
pub fn hs_mixed_ensemble(num_particles: usize, seed: u64) -> Result<ParticleEnsemble> {
    require_particles(num_particles)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = (0..num_particles)
        .map(|_| hilbert_schmidt_state(2, &[2], &mut rng))
        .collect();
    Ok(ParticleEnsemble::from_parts_unchecked(
        1,
        2,
        equal_weights(num_particles),
        states,
        Some(seed),
        ReferenceMeasure::HilbertSchmidt,
    ))
}

/// Hilbert–Schmidt random two-qubit states used as pair blocks.
pub fn two_qubit_pair_ensemble(num_particles: usize, seed: u64) -> Result<ParticleEnsemble> {
    require_particles(num_particles)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = (0..num_particles)
        .map(|_| hilbert_schmidt_state(4, &[2, 2], &mut rng))
        .collect();
    Ok(ParticleEnsemble::from_parts_unchecked(
        2,
        2,
        equal_weights(num_particles),
        states,
        Some(seed),
        ReferenceMeasure::HilbertSchmidt,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{born_probabilities, standard_povm, PovmKind};
    use crate::qalg::{hermitian_eigenvalues, trace_distance};

    fn swap(dim_factor: usize, m: &ComplexMatrix) -> ComplexMatrix {
        let d = dim_factor;
        ComplexMatrix::from_fn(d * d, d * d, |r, c| {
            let (r1, r2) = (r / d, r % d);
            let (c1, c2) = (c / d, c % d);
            m[(r2 * d + r1, c2 * d + c1)]
        })
    }

    fn partial_transpose_second(m: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::from_fn(4, 4, |r, c| {
            let (a, b) = (r / 2, r % 2);
            let (ap, bp) = (c / 2, c % 2);
            m[(a * 2 + bp, ap * 2 + b)]
        })
    }

    #[test]
    fn single_haar_particle() {
        let e = haar_pure_ensemble(1, 9).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e.weights(), &[1.0]);
        assert!((e.states()[0].purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn haar_statistics() {
        let e = haar_pure_ensemble(100_000, 42).unwrap();
        let mean = e.state_at(1).unwrap();
        assert!(trace_distance(&mean, &DensityOperator::maximally_mixed(2)).unwrap() < 0.01);
        let x: f64 = e
            .states()
            .iter()
            .map(|s| s.matrix()[(0, 0)].re)
            .sum::<f64>()
            / e.len() as f64;
        assert!((x - 0.5).abs() < 0.005, "mean |<0|psi>|^2 = {x}");
    }

    #[test]
    fn plus_prior_states() {
        let e = plus_product_prior();
        assert!(
            e.state_at(1)
                .unwrap()
                .max_abs_diff(&DensityOperator::plus())
                < 1e-15
        );
        let pp = DensityOperator::plus().tensor(&DensityOperator::plus());
        assert!(e.state_at(2).unwrap().max_abs_diff(&pp) < 1e-15);
        let ppp = pp.tensor(&DensityOperator::plus());
        assert!(e.state_at(3).unwrap().max_abs_diff(&ppp) < 1e-15);
        let p =
            born_probabilities(&e.state_at(1).unwrap(), &standard_povm(&PovmKind::ZBasis)).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hs_mixed_statistics() {
        let e = hs_mixed_ensemble(100_000, 42).unwrap();
        assert!(e
            .states()
            .iter()
            .take(1000)
            .all(|s| s.validate(1e-10).passes()));
        let mean = e.state_at(1).unwrap();
        assert!(trace_distance(&mean, &DensityOperator::maximally_mixed(2)).unwrap() < 0.01);
        // E tr(rho^2) = (d + k)/(dk + 1) = 4/5 for the qubit HS measure
        let purity = e.states().iter().map(|s| s.purity()).sum::<f64>() / e.len() as f64;
        assert!((purity - 0.8).abs() < 0.01, "mean purity {purity}");
    }

    #[test]
    fn pair_ensemble_statistics() {
        let e = two_qubit_pair_ensemble(100_000, 42).unwrap();
        assert_eq!(e.block_dim(), 4);
        assert!(e
            .states()
            .iter()
            .take(1000)
            .all(|s| s.validate(1e-10).passes() && s.factor_dims() == [2, 2]));
        let mean = e.state_at(2).unwrap();
        assert!(trace_distance(&mean, &DensityOperator::maximally_mixed(4)).unwrap() < 0.02);
        // NPT probability under the two-qubit HS measure is 1 - 8/33
        let sample = &e.states()[..20_000];
        let npt = sample
            .iter()
            .filter(|s| hermitian_eigenvalues(&partial_transpose_second(s.matrix()))[0] < -1e-12)
            .count() as f64
            / sample.len() as f64;
        assert!((npt - 25.0 / 33.0).abs() < 0.02, "npt fraction {npt}");
    }

    #[test]
    fn pair_ensemble_single_marginal() {
        let e = two_qubit_pair_ensemble(50, 3).unwrap();
        let heads: Vec<ComplexMatrix> = e
            .states()
            .iter()
            .map(|s| s.partial_trace(1).unwrap().into_matrix())
            .collect();
        let want = mixture(e.weights().iter().copied().zip(heads.iter()), vec![2]);
        assert!(e.state_at(1).unwrap().max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn haar_two_system_state_is_swap_symmetric() {
        let e = haar_pure_ensemble(10_000, 5).unwrap();
        let s = e.state_at(2).unwrap();
        assert!((swap(2, s.matrix()) - s.matrix()).camax() < 1e-10);
    }

    #[test]
    fn samplers_are_deterministic() {
        assert_eq!(
            haar_pure_ensemble(100, 11).unwrap(),
            haar_pure_ensemble(100, 11).unwrap()
        );
        assert_eq!(
            hs_mixed_ensemble(100, 11).unwrap(),
            hs_mixed_ensemble(100, 11).unwrap()
        );
        assert_eq!(
            two_qubit_pair_ensemble(100, 11).unwrap(),
            two_qubit_pair_ensemble(100, 11).unwrap()
        );
        assert_ne!(
            haar_pure_ensemble(100, 11).unwrap(),
            haar_pure_ensemble(100, 12).unwrap()
        );
    }

    #[test]
    fn ensemble_state_errors() {
        let e = plus_product_prior();
        assert!(matches!(
            e.state_at(11),
            Err(Error::DenseCapExceeded { .. })
        ));
        assert!(e.state_at(0).is_err());
        assert!(haar_pure_ensemble(0, 1).is_err());
    }

    #[test]
    fn new_normalizes_and_validates() {
        let e = ParticleEnsemble::new(
            1,
            2,
            vec![3.0, 1.0],
            vec![DensityOperator::zero(), DensityOperator::one()],
            None,
        )
        .unwrap();
        assert_eq!(e.weights(), &[0.75, 0.25]);
        assert!(ParticleEnsemble::new(
            1,
            2,
            vec![1.0],
            vec![DensityOperator::bell_phi_plus()],
            None
        )
        .is_err());
        assert!(
            ParticleEnsemble::new(3, 2, vec![1.0], vec![DensityOperator::zero()], None).is_err()
        );
        assert!(
            ParticleEnsemble::new(1, 2, vec![-1.0], vec![DensityOperator::zero()], None).is_err()
        );
    }

    #[test]
    fn consistency_and_exchangeability() {
        let ensembles = [
            haar_pure_ensemble(64, 1).unwrap(),
            hs_mixed_ensemble(64, 2).unwrap(),
            plus_product_prior(),
        ];
        for e in &ensembles {
            for n in 1..=4 {
                let big = e.state_at(n + 1).unwrap();
                let small = e.state_at(n).unwrap();
                assert!(big.trace_last().unwrap().max_abs_diff(&small) < 1e-10);
            }
            let s3 = e.state_at(3).unwrap();
            // cyclic permutation of three factors
            let perm = ComplexMatrix::from_fn(8, 8, |r, c| {
                let rot = |x: usize| ((x & 1) << 2) | (x >> 1);
                s3.matrix()[(rot(r), rot(c))]
            });
            assert!((perm - s3.matrix()).camax() < 1e-10);
        }
        let pairs = two_qubit_pair_ensemble(64, 3).unwrap();
        for n in 1..=3 {
            let big = pairs.state_at(n + 1).unwrap();
            let small = pairs.state_at(n).unwrap();
            assert!(big.trace_last().unwrap().max_abs_diff(&small) < 1e-10);
        }
    }
}
