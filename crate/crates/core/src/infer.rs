//! Sequential updating of prior sequences.
//!
//! Exchangeable priors are updated by reweighting particles (the particle
//! states never change between resampling steps); the change-point prior is
//! conditioned analytically; [`dense_sequence_update`] is the model-free
//! measure-then-discard update on an explicit n-system state and serves as
//! the oracle for the other two.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::{born_probabilities, kraus_update, trace_product, KrausChannel, Povm};
use crate::priors::{ChangePointPrior, ParticleEnsemble, PriorSequence, ReferenceMeasure};
use crate::qalg::{hermitian_function, trace_distance, ComplexMatrix, DensityOperator, C64};

/// Total likelihood at or below this means the prior excludes the data.
pub const EVIDENCE_FLOOR: f64 = 1e-300;

/// Posterior weights below this are set to zero.
pub const WEIGHT_FLUSH: f64 = 1e-300;

/// Iterations between stored two-system marginals.
pub const CHECKPOINT_EVERY: usize = 100;

/// Quantum Bayes rule on an ensemble, returning the posterior and the
/// predictive probability of `outcome`.
pub fn bayes_update_with_evidence(
    e: &ParticleEnsemble,
    povm: &Povm,
    outcome: usize,
) -> Result<(ParticleEnsemble, f64)> {
    if povm.dim() != e.block_dim() {
        return Err(Error::DimensionMismatch {
            expected: e.block_dim(),
            actual: povm.dim(),
        });
    }
    povm.check_outcome(outcome)?;
    let effect = &povm.effects()[outcome];
    // parallel map, ordered reduce: sums are bit-identical across thread counts
    let likelihoods: Vec<f64> = e
        .states()
        .par_iter()
        .map(|s| trace_product(s.matrix(), effect).max(0.0))
        .collect();
    let joint: Vec<f64> = e
        .weights()
        .iter()
        .zip(&likelihoods)
        .map(|(w, l)| w * l)
        .collect();
    let evidence: f64 = joint.iter().sum();
    if evidence.is_nan() || evidence <= EVIDENCE_FLOOR {
        return Err(Error::ZeroEvidence { outcome, evidence });
    }
    let mut weights: Vec<f64> = joint
        .iter()
        .map(|j| {
            let w = j / evidence;
            if w < WEIGHT_FLUSH {
                0.0
            } else {
                w
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mut out = e.clone();
    out.set_weights(weights);
    Ok((out, evidence))
}

/// `w_i' = w_i tr(rho_i E_k) / sum_j w_j tr(rho_j E_k)`.
pub fn bayes_update_ensemble(
    e: &ParticleEnsemble,
    povm: &Povm,
    outcome: usize,
) -> Result<ParticleEnsemble> {
    bayes_update_with_evidence(e, povm, outcome).map(|(e, _)| e)
}

/// Exact conditioning of the change-point prior on the next symbol.
pub fn cip_condition(p: &ChangePointPrior, outcome: usize) -> Result<ChangePointPrior> {
    p.condition(outcome)
}

/// Measures the first system of `state` with `channel`, keeps outcome
/// `outcome`, and discards that system.
pub fn dense_sequence_update(
    state: &DensityOperator,
    channel: &KrausChannel,
    outcome: usize,
) -> Result<DensityOperator> {
    if state.num_sites() < 2 {
        return Err(Error::InvalidParameter(
            "dense update needs at least two systems".into(),
        ));
    }
    kraus_update(state, channel, outcome, 0)?.partial_trace(0)
}

/// The posterior state of the next `n` unmeasured systems; `n = 1` is the
/// Bayesian mean estimator.
pub fn predictive_marginal<P: PriorSequence + ?Sized>(
    prior: &P,
    n: usize,
) -> Result<DensityOperator> {
    prior.state_at(n)
}

/// Born distribution of the next system's outcomes.
pub fn predictive_probabilities<P: PriorSequence + ?Sized>(
    prior: &P,
    povm: &Povm,
) -> Result<Vec<f64>> {
    born_probabilities(&prior.state_at(1)?, povm)
}

/// `1 / sum w_i^2`.
pub fn effective_sample_size(e: &ParticleEnsemble) -> f64 {
    1.0 / e.weights().iter().map(|w| w * w).sum::<f64>()
}

/// Real coordinates of a Hermitian matrix: diagonal, then the real and
/// imaginary parts of the strict upper triangle.
fn hermitian_coords(m: &ComplexMatrix, out: &mut [f64]) {
    let d = m.nrows();
    let mut idx = 0;
    for i in 0..d {
        out[idx] = m[(i, i)].re;
        idx += 1;
    }
    for i in 0..d {
        for j in i + 1..d {
            out[idx] = m[(i, j)].re;
            out[idx + 1] = m[(i, j)].im;
            idx += 2;
        }
    }
}

fn hermitian_from_coords(d: usize, v: &[f64]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(d, d);
    let mut idx = 0;
    for i in 0..d {
        m[(i, i)] = C64::new(v[idx], 0.0);
        idx += 1;
    }
    for i in 0..d {
        for j in i + 1..d {
            let z = C64::new(v[idx], v[idx + 1]);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            idx += 2;
        }
    }
    m
}

/// Nearest valid state in the sense of clipping negative eigenvalues and
/// restoring unit trace. Returns the input unchanged when already valid.
fn clip_to_density(m: ComplexMatrix) -> ComplexMatrix {
    let min = m.clone().symmetric_eigenvalues().min();
    if min >= 0.0 {
        let tr = m.trace().re;
        return m.unscale(tr);
    }
    let clipped = hermitian_function(&m, |l| l.max(0.0));
    let tr = clipped.trace().re;
    let out = clipped.unscale(tr);
    (&out + out.adjoint()).scale(0.5)
}

/// Log posterior density, up to a constant, of a block state in Hermitian
/// coordinates. Only called on valid density matrices.
pub type LogTarget<'a> = &'a (dyn Fn(&ComplexMatrix) -> f64 + Sync);

/// Systematic resampling followed by a Liu–West move.
///
/// Each resampled particle becomes `a rho + (1 - a) mean + h xi` with
/// `h^2 = 1 - a^2` and `xi` Gaussian with the weighted covariance of the input
/// ensemble (in Hermitian coordinates), then has any negative eigenvalues
/// clipped. The kernel leaves the weighted mean and covariance unchanged in
/// expectation. With `a = 1` or a degenerate ensemble it reduces to plain
/// resampling.
pub fn resample_move(e: &ParticleEnsemble, seed: u64, shrink: f64) -> Result<ParticleEnsemble> {
    resample_move_targeted(e, seed, shrink, None, 1)
}

/// [`resample_move`] with the Liu–West step used as a Metropolis–Hastings
/// proposal against `target`, repeated `sweeps` times.
///
/// The Liu–West kernel is reversible with respect to the Gaussian with the
/// ensemble's mean and covariance, so the acceptance ratio reduces to
/// `[log pi(x') - log g(x')] - [log pi(x) - log g(x)]` with `g` that Gaussian.
/// Proposals outside the state space are rejected instead of clipped, which
/// makes each sweep leave `target` invariant.
pub fn resample_move_targeted(
    e: &ParticleEnsemble,
    seed: u64,
    shrink: f64,
    target: Option<LogTarget<'_>>,
    sweeps: usize,
) -> Result<ParticleEnsemble> {
    if !(shrink > 0.0 && shrink <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "shrink must lie in (0, 1], got {shrink}"
        )));
    }
    let n = e.len();
    let d = e.block_dim();
    let k = d * d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // systematic resampling
    let u0: f64 = rng.random::<f64>() / n as f64;
    let mut indices = Vec::with_capacity(n);
    let mut cumulative = e.weights()[0];
    let mut src = 0;
    for i in 0..n {
        let u = u0 + i as f64 / n as f64;
        while u > cumulative && src + 1 < n {
            src += 1;
            cumulative += e.weights()[src];
        }
        indices.push(src);
    }

    // weighted moments in Hermitian coordinates
    let mut coords = vec![0.0; n * k];
    for (chunk, s) in coords.chunks_mut(k).zip(e.states()) {
        hermitian_coords(s.matrix(), chunk);
    }
    let mut mean = vec![0.0; k];
    for (chunk, &w) in coords.chunks(k).zip(e.weights()) {
        for (m, c) in mean.iter_mut().zip(chunk) {
            *m += w * c;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(k, k);
    for (chunk, &w) in coords.chunks(k).zip(e.weights()) {
        if w == 0.0 {
            continue;
        }
        let centered = DVector::from_iterator(k, chunk.iter().zip(&mean).map(|(c, m)| c - m));
        cov.ger(w, &centered, &centered, 1.0);
    }
    let h = (1.0 - shrink * shrink).max(0.0).sqrt();
    let eig = cov.symmetric_eigen();
    let max_var = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut root = eig.eigenvectors.clone();
    // whitening map restricted to the covariance support (the trace
    // direction always has zero variance)
    let mut whiten = eig.eigenvectors.transpose();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        root.column_mut(j).scale_mut(h * l.max(0.0).sqrt());
        let inv = if l > 1e-12 * max_var {
            1.0 / l.sqrt()
        } else {
            0.0
        };
        whiten.row_mut(j).scale_mut(inv);
    }
    let moves = h > 0.0 && max_var > 0.0;

    let factor_dims = vec![e.system_dim(); e.block_size()];
    let mut current: Vec<Vec<f64>> = indices
        .iter()
        .map(|&src| coords[src * k..(src + 1) * k].to_vec())
        .collect();
    let mut changed = vec![false; n];
    let gauss_log = |v: &[f64]| -> f64 {
        let centered = DVector::from_iterator(k, v.iter().zip(&mean).map(|(c, m)| c - m));
        -0.5 * (&whiten * centered).norm_squared()
    };

    let rounds = if !moves {
        0
    } else if target.is_some() {
        sweeps
    } else {
        1
    };
    let mut current_log: Option<Vec<f64>> = None;
    for _ in 0..rounds {
        // draws are sequential so results do not depend on thread scheduling
        let noise: Vec<DVector<f64>> = (0..n)
            .map(|_| {
                let z = DVector::from_iterator(k, (0..k).map(|_| StandardNormal.sample(&mut rng)));
                &root * z
            })
            .collect();
        let uniforms: Vec<f64> = if target.is_some() {
            (0..n).map(|_| rng.random::<f64>()).collect()
        } else {
            Vec::new()
        };
        match target {
            None => {
                current = current
                    .par_iter()
                    .zip(noise.par_iter())
                    .map(|(c, dz)| {
                        let v: Vec<f64> = c
                            .iter()
                            .zip(&mean)
                            .zip(dz.iter())
                            .map(|((x, m), z)| shrink * x + (1.0 - shrink) * m + z)
                            .collect();
                        let mut out = vec![0.0; k];
                        hermitian_coords(&clip_to_density(hermitian_from_coords(d, &v)), &mut out);
                        out
                    })
                    .collect();
                changed.iter_mut().for_each(|c| *c = true);
            }
            Some(target) => {
                let logs = current_log.get_or_insert_with(|| {
                    current
                        .par_iter()
                        .map(|c| target(&hermitian_from_coords(d, c)) - gauss_log(c))
                        .collect()
                });
                let results: Vec<Option<(Vec<f64>, f64)>> = current
                    .par_iter()
                    .zip(noise.par_iter())
                    .zip(logs.par_iter().zip(uniforms.par_iter()))
                    .map(|((c, dz), (&log_here, &u))| {
                        let v: Vec<f64> = c
                            .iter()
                            .zip(&mean)
                            .zip(dz.iter())
                            .map(|((x, m), z)| shrink * x + (1.0 - shrink) * m + z)
                            .collect();
                        let proposal = hermitian_from_coords(d, &v);
                        if proposal.clone().symmetric_eigenvalues().min() < 0.0 {
                            return None;
                        }
                        let log_there = target(&proposal) - gauss_log(&v);
                        if log_there.is_finite() && u.ln() < log_there - log_here {
                            Some((v, log_there))
                        } else {
                            None
                        }
                    })
                    .collect();
                for (i, r) in results.into_iter().enumerate() {
                    if let Some((v, l)) = r {
                        current[i] = v;
                        logs[i] = l;
                        changed[i] = true;
                    }
                }
            }
        }
    }

    let states: Vec<DensityOperator> = current
        .iter()
        .zip(&indices)
        .zip(&changed)
        .map(|((c, &src), &moved)| {
            if moved {
                let m = hermitian_from_coords(d, c);
                let tr = m.trace().re;
                DensityOperator::from_parts_unchecked(m.unscale(tr), factor_dims.clone())
            } else {
                e.states()[src].clone()
            }
        })
        .collect();
    Ok(ParticleEnsemble::from_parts_unchecked(
        e.block_size(),
        e.system_dim(),
        vec![1.0 / n as f64; n],
        states,
        e.seed(),
        e.reference_measure(),
    ))
}

/// Either kind of prior this crate can update sequentially.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    Ensemble(ParticleEnsemble),
    ChangePoint(ChangePointPrior),
}

impl Prior {
    /// Number of systems one measurement step consumes.
    pub fn block_size(&self) -> usize {
        match self {
            Prior::Ensemble(e) => e.block_size(),
            Prior::ChangePoint(_) => 1,
        }
    }

    pub fn ensemble(&self) -> Option<&ParticleEnsemble> {
        match self {
            Prior::Ensemble(e) => Some(e),
            Prior::ChangePoint(_) => None,
        }
    }

    /// Conditions on one outcome, returning its predictive probability.
    pub fn update(&mut self, povm: &Povm, outcome: usize) -> Result<f64> {
        match self {
            Prior::Ensemble(e) => {
                let (post, evidence) = bayes_update_with_evidence(e, povm, outcome)?;
                *e = post;
                Ok(evidence)
            }
            Prior::ChangePoint(p) => {
                if !povm.is_z_basis() {
                    return Err(Error::UnsupportedMeasurement(
                        "the change-point prior is conditioned on computational-basis outcomes only"
                            .into(),
                    ));
                }
                povm.check_outcome(outcome)?;
                let prob = p.predictive()[outcome];
                *p = p.condition(outcome)?;
                Ok(prob)
            }
        }
    }
}

impl PriorSequence for Prior {
    fn system_dim(&self) -> usize {
        match self {
            Prior::Ensemble(e) => e.system_dim(),
            Prior::ChangePoint(p) => p.system_dim(),
        }
    }

    fn state_at(&self, n: usize) -> Result<DensityOperator> {
        match self {
            Prior::Ensemble(e) => e.state_at(n),
            Prior::ChangePoint(p) => p.state_at(n),
        }
    }
}

/// POVMs applied in rotation: step `t` uses `povms[t % len]`.
#[derive(Debug, Clone)]
pub struct MeasurementSchedule {
    povms: Vec<Povm>,
}

impl MeasurementSchedule {
    pub fn fixed(povm: Povm) -> Self {
        Self { povms: vec![povm] }
    }

    pub fn cycle(povms: Vec<Povm>) -> Result<Self> {
        if povms.is_empty() {
            return Err(Error::InvalidParameter("empty measurement schedule".into()));
        }
        Ok(Self { povms })
    }

    pub fn povm_at(&self, step: usize) -> &Povm {
        &self.povms[step % self.povms.len()]
    }

    pub fn povms(&self) -> &[Povm] {
        &self.povms
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResampleOptions {
    /// Resample when ESS falls below `threshold * N`.
    pub threshold: f64,
    pub shrink: f64,
    pub seed: u64,
    /// Metropolis–Hastings sweeps per resampling event, for priors with a
    /// known density (Hilbert–Schmidt ensembles).
    pub sweeps: usize,
}

impl Default for ResampleOptions {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            shrink: 0.98,
            seed: 42,
            sweeps: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Distance target; compared with the one-system marginal when its
    /// dimension is one system's, with the two-system marginal otherwise.
    pub target: Option<DensityOperator>,
    pub resampling: Option<ResampleOptions>,
    pub checkpoint_every: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            target: None,
            resampling: None,
            checkpoint_every: CHECKPOINT_EVERY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based.
    pub iteration: usize,
    pub outcome: usize,
    /// Probability the prior assigned to `outcome` before the update.
    pub predictive_probability: f64,
    /// Posterior one-system marginal.
    pub marginal_1: DensityOperator,
    /// Posterior two-system marginal, stored at checkpoints and the last step.
    pub marginal_2: Option<DensityOperator>,
    pub td_target: Option<f64>,
    /// ESS after reweighting, before any resampling; `None` for non-particle priors.
    pub ess: Option<f64>,
    pub resampled: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InferenceTrajectory {
    pub records: Vec<StepRecord>,
}

impl InferenceTrajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    pub fn checkpoints(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(|r| r.marginal_2.is_some())
    }
}

/// Sufficient statistics of the data seen so far: counts per
/// (schedule slot, outcome).
#[derive(Debug, Default)]
struct OutcomeCounts {
    counts: BTreeMap<(usize, usize), u64>,
}

impl OutcomeCounts {
    fn record(&mut self, schedule: &MeasurementSchedule, step: usize, outcome: usize) {
        *self
            .counts
            .entry((step % schedule.povms.len(), outcome))
            .or_default() += 1;
    }

    fn log_likelihood(&self, schedule: &MeasurementSchedule, block: &ComplexMatrix) -> f64 {
        let mut acc = 0.0;
        for (&(slot, outcome), &count) in &self.counts {
            let p = trace_product(block, &schedule.povms[slot].effects()[outcome]);
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += count as f64 * p.ln();
        }
        acc
    }
}

/// Iterates update, optional resample-move, and record over `outcomes`.
///
/// On an outcome the prior excludes, returns [`Error::Aborted`] with the
/// 1-based iteration.
pub fn run_inference(
    prior: Prior,
    outcomes: &[usize],
    schedule: &MeasurementSchedule,
    options: &RunOptions,
) -> Result<(InferenceTrajectory, Prior)> {
    let system_dim = prior.system_dim();
    let target_sites = match &options.target {
        Some(t) if t.dim() == system_dim => Some(1),
        Some(t) if t.dim() == system_dim * system_dim => Some(2),
        Some(t) => {
            return Err(Error::DimensionMismatch {
                expected: system_dim,
                actual: t.dim(),
            })
        }
        None => None,
    };
    let mut resample_rng = options
        .resampling
        .map(|r| ChaCha8Rng::seed_from_u64(r.seed));
    let checkpoint_every = options.checkpoint_every.max(1);

    let mut prior = prior;
    let mut history = OutcomeCounts::default();
    let mut records = Vec::with_capacity(outcomes.len());
    for (step, &outcome) in outcomes.iter().enumerate() {
        let iteration = step + 1;
        let abort = |source: Error| Error::Aborted {
            iteration,
            source: Box::new(source),
        };
        let predictive_probability = prior
            .update(schedule.povm_at(step), outcome)
            .map_err(abort)?;
        history.record(schedule, step, outcome);

        let ess = prior.ensemble().map(effective_sample_size);
        let mut resampled = false;
        if let (Prior::Ensemble(e), Some(opts), Some(rng)) =
            (&mut prior, options.resampling, resample_rng.as_mut())
        {
            let seed = rng.random::<u64>();
            if ess.unwrap_or(f64::INFINITY) < opts.threshold * e.len() as f64 {
                *e = if e.reference_measure() == ReferenceMeasure::HilbertSchmidt {
                    // flat prior density: the target is the likelihood of all data so far
                    let log_likelihood = |m: &ComplexMatrix| history.log_likelihood(schedule, m);
                    resample_move_targeted(
                        e,
                        seed,
                        opts.shrink,
                        Some(&log_likelihood),
                        opts.sweeps,
                    )?
                } else {
                    resample_move(e, seed, opts.shrink)?
                };
                resampled = true;
            }
        }

        let marginal_1 = prior.state_at(1)?;
        let checkpoint = iteration % checkpoint_every == 0 || iteration == outcomes.len();
        let marginal_2 = if checkpoint || target_sites == Some(2) {
            Some(prior.state_at(2)?)
        } else {
            None
        };
        let td_target = match (&options.target, target_sites) {
            (Some(t), Some(1)) => Some(trace_distance(&marginal_1, t)?),
            (Some(t), Some(_)) => Some(trace_distance(marginal_2.as_ref().expect("computed"), t)?),
            _ => None,
        };
        records.push(StepRecord {
            iteration,
            outcome,
            predictive_probability,
            marginal_1,
            marginal_2: if checkpoint { marginal_2 } else { None },
            td_target,
            ess,
            resampled,
        });
    }
    Ok((InferenceTrajectory { records }, prior))
}
