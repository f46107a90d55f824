//! The single execution path: config in, CSV and JSON out.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qprior::{
    counter_inductive_prior, haar_pure_ensemble, hs_mixed_ensemble, plus_product_prior,
    run_inference, trace_distance, two_qubit_pair_ensemble, DensityOperator, InferenceTrajectory,
    MeasurementSchedule, Prior, PriorSequence, ResampleOptions, RunOptions,
};
use serde::Serialize;
use serde_json::Value;

use crate::config::{ExperimentConfig, OutcomeSource, PriorSpec, Schedule};
use crate::error::CliError;
use crate::outcomes::{sample_outcomes, OutcomeStream};

/// Iterations between two-system marginals in the JSON summary.
pub const CHECKPOINT_EVERY: usize = qprior::infer::CHECKPOINT_EVERY;

pub const CSV_HEADER: [&str; 9] = [
    "iter",
    "outcome",
    "pred_prob",
    "td_target",
    "ess",
    "marg_00_re",
    "marg_01_re",
    "marg_01_im",
    "marg_11_re",
];

pub fn build_prior(spec: &PriorSpec) -> qprior::Result<Prior> {
    Ok(match *spec {
        PriorSpec::HaarPure { particles, seed } => {
            Prior::Ensemble(haar_pure_ensemble(particles, seed)?)
        }
        PriorSpec::PlusProduct => Prior::Ensemble(plus_product_prior()),
        PriorSpec::CounterInductive => Prior::ChangePoint(counter_inductive_prior()),
        PriorSpec::HsMixed { particles, seed } => {
            Prior::Ensemble(hs_mixed_ensemble(particles, seed)?)
        }
        PriorSpec::HsPairwise { particles, seed } => {
            Prior::Ensemble(two_qubit_pair_ensemble(particles, seed)?)
        }
    })
}

/// The outcome stream drawn from the configured POVM, before any
/// per-factor splitting.
pub fn outcome_stream(config: &ExperimentConfig) -> qprior::Result<OutcomeStream> {
    Ok(match &config.outcomes {
        OutcomeSource::Constant { symbol } => OutcomeStream::constant(*symbol, config.iterations),
        OutcomeSource::Explicit { outcomes } => OutcomeStream::explicit(outcomes.clone()),
        OutcomeSource::Sampled { true_state, seed } => {
            let state = true_state
                .density()
                .map_err(qprior::Error::InvalidParameter)?;
            sample_outcomes(&state, &config.povm(), config.iterations, *seed)?
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&DensityOperator> for MatrixJson {
    fn from(s: &DensityOperator) -> Self {
        let m = s.matrix();
        let rows = |f: fn(&qprior::C64) -> f64| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
                .collect()
        };
        Self {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalSummary {
    pub marginal_1: MatrixJson,
    pub marginal_2: MatrixJson,
    pub td_target: Option<f64>,
    /// Two-system marginal against `target ⊗ target`, for one-system targets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub td_target_pair: Option<f64>,
    /// Updates performed.
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub iteration: usize,
    pub td_target: Option<f64>,
    pub marginal_2: MatrixJson,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config_echo: Value,
    #[serde(rename = "final")]
    pub final_summary: FinalSummary,
    pub checkpoints: Vec<Checkpoint>,
}

/// Runs `config` and returns the trajectory and its summary without writing
/// anything.
pub fn simulate(config: &ExperimentConfig) -> Result<(InferenceTrajectory, Report), CliError> {
    let povm = config.povm();
    let stream = outcome_stream(config)?;
    let (schedule, stream) = match config.povm.schedule {
        Schedule::PerBlock => (MeasurementSchedule::fixed(povm), stream),
        Schedule::PerFactor => {
            let split = stream.split_factors(&povm).ok_or_else(|| {
                qprior::Error::UnsupportedMeasurement(format!(
                    "{} is not a product POVM",
                    config.povm.name
                ))
            })?;
            (MeasurementSchedule::cycle(povm.factors().to_vec())?, split)
        }
    };
    let target = config
        .target
        .density()
        .map_err(qprior::Error::InvalidParameter)?;
    let options = RunOptions {
        target: Some(target.clone()),
        resampling: config.resampling.map(|r| ResampleOptions {
            threshold: r.threshold,
            shrink: r.shrink,
            seed: r.seed,
            sweeps: r.sweeps,
        }),
        checkpoint_every: CHECKPOINT_EVERY,
    };
    let prior = build_prior(&config.prior)?;
    let (trajectory, posterior) = run_inference(prior, &stream.outcomes, &schedule, &options)?;

    let marginal_1 = posterior.state_at(1)?;
    let marginal_2 = posterior.state_at(2)?;
    let td_target = trajectory.last().and_then(|r| r.td_target);
    let td_target_pair = if target.num_sites() == 1 {
        Some(trace_distance(&marginal_2, &target.tensor(&target))?)
    } else {
        None
    };
    let checkpoints = trajectory
        .records
        .iter()
        .filter(|r| r.iteration % CHECKPOINT_EVERY == 0)
        .filter_map(|r| {
            r.marginal_2.as_ref().map(|m| Checkpoint {
                iteration: r.iteration,
                td_target: r.td_target,
                marginal_2: m.into(),
            })
        })
        .collect();
    let report = Report {
        config_echo: config.to_json(),
        final_summary: FinalSummary {
            marginal_1: (&marginal_1).into(),
            marginal_2: (&marginal_2).into(),
            td_target,
            td_target_pair,
            iterations: trajectory.len(),
        },
        checkpoints,
    };
    Ok((trajectory, report))
}

/// Writes the per-iteration CSV.
pub fn write_csv<W: Write>(trajectory: &InferenceTrajectory, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in &trajectory.records {
        let m = r.marginal_1.matrix();
        w.write_record([
            r.iteration.to_string(),
            r.outcome.to_string(),
            r.predictive_probability.to_string(),
            opt(r.td_target),
            opt(r.ess),
            m[(0, 0)].re.to_string(),
            m[(0, 1)].re.to_string(),
            m[(0, 1)].im.to_string(),
            m[(1, 1)].re.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_results(
    trajectory: &InferenceTrajectory,
    report: &Report,
    csv_path: &Path,
    json_path: &Path,
) -> Result<(), CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source: std::io::Error| CliError::Io { path, source }
    };
    let file = File::create(csv_path).map_err(io(csv_path))?;
    write_csv(trajectory, BufWriter::new(file)).map_err(|e| CliError::Io {
        path: csv_path.to_path_buf(),
        source: e.into(),
    })?;

    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    std::fs::write(json_path, text).map_err(io(json_path))?;
    Ok(())
}

/// Output paths of `config` resolved against `out_dir`.
pub fn output_paths(config: &ExperimentConfig, out_dir: &Path) -> (PathBuf, PathBuf) {
    (
        out_dir.join(&config.output.csv),
        out_dir.join(&config.output.json),
    )
}

/// Runs `config` and writes its outputs under `out_dir`.
pub fn execute(config: &ExperimentConfig, out_dir: &Path) -> Result<Report, CliError> {
    let (trajectory, report) = simulate(config)?;
    let (csv_path, json_path) = output_paths(config, out_dir);
    for path in [&csv_path, &json_path] {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|source| CliError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    emit_results(&trajectory, &report, &csv_path, &json_path)?;
    Ok(report)
}
