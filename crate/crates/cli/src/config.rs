//! Experiment configuration: a JSON document describing one inference run.
//!
//! ```json
//! {
//!   "prior": {"name": "haar_pure", "particles": 100000, "seed": 42},
//!   "povm": {"name": "z_basis", "schedule": "per_block"},
//!   "outcomes": {"kind": "constant", "symbol": 0},
//!   "iterations": 50,
//!   "target": "zero",
//!   "resampling": {"threshold": 0.5, "shrink": 0.98, "seed": 44, "sweeps": 10},
//!   "output": {"csv": "haar.csv", "json": "haar.json"}
//! }
//! ```
//!
//! Every field except `resampling` is required. Parsing reports every
//! problem found, each tagged with the field it concerns.

use std::fmt;

use qprior::measure::PovmKind;
use qprior::{standard_povm, ComplexMatrix, DensityOperator, Povm, C64};
use serde::Serialize;
use serde_json::{Map, Value};

pub const PRIOR_NAMES: [&str; 5] = [
    "haar_pure",
    "plus_product",
    "counter_inductive",
    "hs_mixed",
    "hs_pairwise",
];

/// Named states accepted for `target` and `true_state`.
pub const STATE_NAMES: [&str; 7] = [
    "zero",
    "one",
    "plus",
    "minus",
    "maximally_mixed",
    "bell_phi_plus",
    "maximally_mixed_2",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum PriorSpec {
    HaarPure { particles: usize, seed: u64 },
    PlusProduct,
    CounterInductive,
    HsMixed { particles: usize, seed: u64 },
    HsPairwise { particles: usize, seed: u64 },
}

impl PriorSpec {
    /// Systems per particle block.
    pub fn block_size(&self) -> usize {
        match self {
            PriorSpec::HsPairwise { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// The POVM acts on one whole prior block per step.
    PerBlock,
    /// The POVM is a product; each of its outcomes is split into one
    /// single-block update per factor.
    PerFactor,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PovmSpec {
    #[serde(serialize_with = "serialize_display")]
    pub name: PovmKind,
    pub schedule: Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum StateSpec {
    Named(String),
    Matrix {
        re: Vec<Vec<f64>>,
        im: Vec<Vec<f64>>,
    },
}

impl StateSpec {
    pub fn density(&self) -> Result<DensityOperator, String> {
        match self {
            StateSpec::Named(name) => named_state(name),
            StateSpec::Matrix { re, im } => {
                let dim = re.len();
                if dim == 0
                    || im.len() != dim
                    || re.iter().chain(im.iter()).any(|row| row.len() != dim)
                {
                    return Err("re and im must be square arrays of equal size".into());
                }
                let m = ComplexMatrix::from_fn(dim, dim, |i, j| C64::new(re[i][j], im[i][j]));
                let factor_dims = if dim == 4 { vec![2, 2] } else { vec![dim] };
                DensityOperator::new(m, factor_dims).map_err(|e| e.to_string())
            }
        }
    }
}

fn named_state(name: &str) -> Result<DensityOperator, String> {
    let state = match name {
        "zero" => DensityOperator::zero(),
        "one" => DensityOperator::one(),
        "plus" => DensityOperator::plus(),
        "minus" => DensityOperator::pure(&[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)])
            .map_err(|e| e.to_string())?,
        "maximally_mixed" => DensityOperator::maximally_mixed(2),
        "bell_phi_plus" => DensityOperator::bell_phi_plus(),
        "maximally_mixed_2" => {
            DensityOperator::maximally_mixed(2).tensor(&DensityOperator::maximally_mixed(2))
        }
        other => {
            return Err(format!(
                "unknown state {other:?}; expected one of {}",
                STATE_NAMES.join(", ")
            ))
        }
    };
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeSource {
    /// The same outcome index every step.
    Constant { symbol: usize },
    /// Outcome indices given in full; the length must equal `iterations`.
    Explicit { outcomes: Vec<usize> },
    /// I.i.d. Born-rule draws from `true_state`.
    Sampled { true_state: StateSpec, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResampleSpec {
    pub threshold: f64,
    pub shrink: f64,
    pub seed: u64,
    pub sweeps: usize,
}

impl Default for ResampleSpec {
    fn default() -> Self {
        let d = qprior::ResampleOptions::default();
        Self {
            threshold: d.threshold,
            shrink: d.shrink,
            seed: d.seed,
            sweeps: d.sweeps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputSpec {
    /// Relative paths are resolved against the output directory.
    pub csv: String,
    pub json: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub prior: PriorSpec,
    pub povm: PovmSpec,
    pub outcomes: OutcomeSource,
    /// Number of outcomes drawn from `povm`. Under `per_factor` each one
    /// yields one update per factor.
    pub iterations: usize,
    pub target: StateSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resampling: Option<ResampleSpec>,
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn povm(&self) -> Povm {
        standard_povm(&self.povm.name)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

fn serialize_display<S: serde::Serializer>(v: &PovmKind, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

/// All problems found in a config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<FieldError>);

impl ConfigErrors {
    pub fn mentions(&self, field: &str) -> bool {
        self.0.iter().any(|e| e.field == field)
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

struct Checker {
    errors: Vec<FieldError>,
}

impl Checker {
    fn fail(&mut self, field: &str, message: impl Into<String>) {
        self.errors.push(FieldError {
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn object<'a>(
        &mut self,
        v: &'a Value,
        field: &str,
        allowed: &[&str],
    ) -> Option<&'a Map<String, Value>> {
        let Some(map) = v.as_object() else {
            self.fail(field, "expected an object");
            return None;
        };
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                self.fail(&join(field, key), "unknown field");
            }
        }
        Some(map)
    }

    fn required<'a>(
        &mut self,
        map: &'a Map<String, Value>,
        parent: &str,
        key: &str,
    ) -> Option<&'a Value> {
        let v = map.get(key);
        if v.is_none() {
            self.fail(&join(parent, key), "missing field");
        }
        v
    }

    fn unsigned(&mut self, v: &Value, field: &str) -> Option<u64> {
        match v.as_u64() {
            Some(x) => Some(x),
            None => {
                self.fail(
                    field,
                    format!("expected an unsigned 64-bit integer, got {v}"),
                );
                None
            }
        }
    }

    fn count(&mut self, v: &Value, field: &str) -> Option<usize> {
        let x = self.unsigned(v, field)?;
        match usize::try_from(x) {
            Ok(0) => {
                self.fail(field, "must be at least 1");
                None
            }
            Ok(n) => Some(n),
            Err(_) => {
                self.fail(field, "too large");
                None
            }
        }
    }

    fn string<'a>(&mut self, v: &'a Value, field: &str) -> Option<&'a str> {
        let s = v.as_str();
        if s.is_none() {
            self.fail(field, format!("expected a string, got {v}"));
        }
        s
    }

    fn real(&mut self, v: &Value, field: &str) -> Option<f64> {
        let x = v.as_f64();
        if x.is_none() {
            self.fail(field, format!("expected a number, got {v}"));
        }
        x
    }

    fn state(&mut self, v: &Value, field: &str) -> Option<StateSpec> {
        let spec = if let Some(name) = v.as_str() {
            StateSpec::Named(name.to_string())
        } else {
            let map = self.object(v, field, &["re", "im"])?;
            let re = self
                .required(map, field, "re")
                .and_then(|v| self.rows(v, &join(field, "re")));
            let im = self
                .required(map, field, "im")
                .and_then(|v| self.rows(v, &join(field, "im")));
            StateSpec::Matrix { re: re?, im: im? }
        };
        if let Err(msg) = spec.density() {
            self.fail(field, msg);
            return None;
        }
        Some(spec)
    }

    fn rows(&mut self, v: &Value, field: &str) -> Option<Vec<Vec<f64>>> {
        let parsed: Option<Vec<Vec<f64>>> = v.as_array().and_then(|rows| {
            rows.iter()
                .map(|r| {
                    r.as_array()
                        .and_then(|r| r.iter().map(Value::as_f64).collect())
                })
                .collect()
        });
        if parsed.is_none() {
            self.fail(field, "expected an array of arrays of numbers");
        }
        parsed
    }
}

fn join(parent: &str, key: &str) -> String {
    if parent.is_empty() {
        key.to_string()
    } else {
        format!("{parent}.{key}")
    }
}

/// Parses and validates a config, returning every error found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let root: Value = serde_json::from_str(text).map_err(|e| {
        ConfigErrors(vec![FieldError {
            field: String::new(),
            message: format!("malformed JSON: {e}"),
        }])
    })?;
    let mut c = Checker { errors: Vec::new() };
    let Some(map) = c.object(
        &root,
        "",
        &[
            "prior",
            "povm",
            "outcomes",
            "iterations",
            "target",
            "resampling",
            "output",
        ],
    ) else {
        return Err(ConfigErrors(c.errors));
    };

    let prior = c
        .required(map, "", "prior")
        .and_then(|v| parse_prior(&mut c, v));
    let povm = c
        .required(map, "", "povm")
        .and_then(|v| parse_povm(&mut c, v));
    let iterations = c
        .required(map, "", "iterations")
        .and_then(|v| c.count(v, "iterations"));
    let outcomes = c
        .required(map, "", "outcomes")
        .and_then(|v| parse_outcomes(&mut c, v));
    let target = c
        .required(map, "", "target")
        .and_then(|v| c.state(v, "target"));
    let resampling = match map.get("resampling") {
        None | Some(Value::Null) => Some(None),
        Some(v) => parse_resampling(&mut c, v).map(Some),
    };
    let output = c
        .required(map, "", "output")
        .and_then(|v| parse_output(&mut c, v));

    match (
        prior, povm, iterations, outcomes, target, resampling, output,
    ) {
        (
            Some(prior),
            Some(povm),
            Some(iterations),
            Some(outcomes),
            Some(target),
            Some(resampling),
            Some(output),
        ) if c.errors.is_empty() => {
            let config = ExperimentConfig {
                prior,
                povm,
                outcomes,
                iterations,
                target,
                resampling,
                output,
            };
            check_consistency(&mut c, &config);
            if c.errors.is_empty() {
                Ok(config)
            } else {
                Err(ConfigErrors(c.errors))
            }
        }
        _ => Err(ConfigErrors(c.errors)),
    }
}

fn parse_prior(c: &mut Checker, v: &Value) -> Option<PriorSpec> {
    let map = c.object(v, "prior", &["name", "particles", "seed"])?;
    let name = c
        .required(map, "prior", "name")
        .and_then(|v| c.string(v, "prior.name"))?;
    let sampled = matches!(name, "haar_pure" | "hs_mixed" | "hs_pairwise");
    if !PRIOR_NAMES.contains(&name) {
        c.fail(
            "prior.name",
            format!(
                "unknown prior {name:?}; expected one of {}",
                PRIOR_NAMES.join(", ")
            ),
        );
        if let Some(v) = map.get("particles") {
            c.count(v, "prior.particles");
        }
        if let Some(v) = map.get("seed") {
            c.unsigned(v, "prior.seed");
        }
        return None;
    }
    if !sampled {
        for key in ["particles", "seed"] {
            if map.contains_key(key) {
                c.fail(&join("prior", key), format!("does not apply to {name}"));
            }
        }
        return Some(if name == "plus_product" {
            PriorSpec::PlusProduct
        } else {
            PriorSpec::CounterInductive
        });
    }
    let particles = c
        .required(map, "prior", "particles")
        .and_then(|v| c.count(v, "prior.particles"));
    let seed = c
        .required(map, "prior", "seed")
        .and_then(|v| c.unsigned(v, "prior.seed"));
    let (particles, seed) = (particles?, seed?);
    Some(match name {
        "haar_pure" => PriorSpec::HaarPure { particles, seed },
        "hs_mixed" => PriorSpec::HsMixed { particles, seed },
        _ => PriorSpec::HsPairwise { particles, seed },
    })
}

fn parse_povm(c: &mut Checker, v: &Value) -> Option<PovmSpec> {
    let map = c.object(v, "povm", &["name", "schedule"])?;
    let name = c
        .required(map, "povm", "name")
        .and_then(|v| c.string(v, "povm.name"))
        .and_then(|s| match s.parse::<PovmKind>() {
            Ok(kind) => Some(kind),
            Err(e) => {
                c.fail("povm.name", e.to_string());
                None
            }
        });
    let schedule = c
        .required(map, "povm", "schedule")
        .and_then(|v| c.string(v, "povm.schedule"))
        .and_then(|s| match s {
            "per_block" => Some(Schedule::PerBlock),
            "per_factor" => Some(Schedule::PerFactor),
            other => {
                c.fail(
                    "povm.schedule",
                    format!("unknown schedule {other:?}; expected per_block or per_factor"),
                );
                None
            }
        });
    Some(PovmSpec {
        name: name?,
        schedule: schedule?,
    })
}

fn parse_outcomes(c: &mut Checker, v: &Value) -> Option<OutcomeSource> {
    let map = c.object(
        v,
        "outcomes",
        &["kind", "symbol", "outcomes", "true_state", "seed"],
    )?;
    let kind = c
        .required(map, "outcomes", "kind")
        .and_then(|v| c.string(v, "outcomes.kind"))?;
    let allowed: &[&str] = match kind {
        "constant" => &["kind", "symbol"],
        "explicit" => &["kind", "outcomes"],
        "sampled" => &["kind", "true_state", "seed"],
        other => {
            c.fail(
                "outcomes.kind",
                format!("unknown outcome source {other:?}; expected constant, explicit or sampled"),
            );
            return None;
        }
    };
    for key in map.keys() {
        if !allowed.contains(&key.as_str())
            && ["symbol", "outcomes", "true_state", "seed"].contains(&key.as_str())
        {
            c.fail(
                &join("outcomes", key),
                format!("does not apply to {kind} outcomes"),
            );
        }
    }
    match kind {
        "constant" => {
            let symbol = c
                .required(map, "outcomes", "symbol")
                .and_then(|v| c.unsigned(v, "outcomes.symbol"))?;
            Some(OutcomeSource::Constant {
                symbol: symbol as usize,
            })
        }
        "explicit" => {
            let list = c.required(map, "outcomes", "outcomes")?;
            let Some(items) = list.as_array() else {
                c.fail("outcomes.outcomes", "expected an array of outcome indices");
                return None;
            };
            let mut outcomes = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                outcomes.push(c.unsigned(item, &format!("outcomes.outcomes[{i}]"))? as usize);
            }
            Some(OutcomeSource::Explicit { outcomes })
        }
        _ => {
            let true_state = c
                .required(map, "outcomes", "true_state")
                .and_then(|v| c.state(v, "outcomes.true_state"));
            let seed = c
                .required(map, "outcomes", "seed")
                .and_then(|v| c.unsigned(v, "outcomes.seed"));
            Some(OutcomeSource::Sampled {
                true_state: true_state?,
                seed: seed?,
            })
        }
    }
}

fn parse_resampling(c: &mut Checker, v: &Value) -> Option<ResampleSpec> {
    let map = c.object(v, "resampling", &["threshold", "shrink", "seed", "sweeps"])?;
    let mut spec = ResampleSpec::default();
    let before = c.errors.len();
    if let Some(v) = map.get("threshold") {
        if let Some(x) = c.real(v, "resampling.threshold") {
            if !(0.0..=1.0).contains(&x) {
                c.fail("resampling.threshold", "must lie in [0, 1]");
            }
            spec.threshold = x;
        }
    }
    if let Some(v) = map.get("shrink") {
        if let Some(x) = c.real(v, "resampling.shrink") {
            if !(x > 0.0 && x <= 1.0) {
                c.fail("resampling.shrink", "must lie in (0, 1]");
            }
            spec.shrink = x;
        }
    }
    if let Some(v) = map.get("seed") {
        if let Some(x) = c.unsigned(v, "resampling.seed") {
            spec.seed = x;
        }
    }
    if let Some(v) = map.get("sweeps") {
        if let Some(x) = c.count(v, "resampling.sweeps") {
            spec.sweeps = x;
        }
    }
    (c.errors.len() == before).then_some(spec)
}

fn parse_output(c: &mut Checker, v: &Value) -> Option<OutputSpec> {
    let map = c.object(v, "output", &["csv", "json"])?;
    let csv = c
        .required(map, "output", "csv")
        .and_then(|v| c.string(v, "output.csv"))
        .map(str::to_string);
    let json = c
        .required(map, "output", "json")
        .and_then(|v| c.string(v, "output.json"))
        .map(str::to_string);
    let (csv, json) = (csv?, json?);
    for (field, path) in [("output.csv", &csv), ("output.json", &json)] {
        if path.is_empty() {
            c.fail(field, "path is empty");
        }
    }
    if csv == json {
        c.fail("output.json", "must differ from output.csv");
    }
    Some(OutputSpec { csv, json })
}

/// Cross-field checks: dimensions, schedule shape, outcome ranges.
fn check_consistency(c: &mut Checker, config: &ExperimentConfig) {
    let povm = config.povm();
    let block_dim = 1usize << config.prior.block_size();
    let update_povms: Vec<Povm> = match config.povm.schedule {
        Schedule::PerBlock => vec![povm.clone()],
        Schedule::PerFactor => {
            if povm.factors().is_empty() {
                c.fail("povm.schedule", "per_factor needs a product POVM");
                return;
            }
            povm.factors().to_vec()
        }
    };
    for p in &update_povms {
        if p.dim() != block_dim {
            c.fail(
                "povm.name",
                format!(
                    "acts on dimension {} but the prior's blocks have dimension {block_dim}",
                    p.dim()
                ),
            );
            return;
        }
    }
    if config.prior == PriorSpec::CounterInductive && !update_povms.iter().all(Povm::is_z_basis) {
        c.fail(
            "povm.name",
            "counter_inductive supports z_basis measurements only",
        );
    }
    if config.resampling.is_some() && config.prior == PriorSpec::CounterInductive {
        c.fail("resampling", "applies to particle priors only");
    }

    let outcomes = povm.num_outcomes();
    match &config.outcomes {
        OutcomeSource::Constant { symbol } => {
            if *symbol >= outcomes {
                c.fail(
                    "outcomes.symbol",
                    format!("{symbol} is not an outcome of {}", config.povm.name),
                );
            }
        }
        OutcomeSource::Explicit { outcomes: list } => {
            if list.len() != config.iterations {
                c.fail(
                    "outcomes.outcomes",
                    format!(
                        "has {} entries but iterations is {}",
                        list.len(),
                        config.iterations
                    ),
                );
            }
            for (i, k) in list.iter().enumerate() {
                if *k >= outcomes {
                    c.fail(
                        &format!("outcomes.outcomes[{i}]"),
                        format!("{k} is not an outcome of {}", config.povm.name),
                    );
                }
            }
        }
        OutcomeSource::Sampled { true_state, .. } => {
            let dim = true_state.density().map(|s| s.dim()).unwrap_or(0);
            if dim != povm.dim() {
                c.fail(
                    "outcomes.true_state",
                    format!(
                        "has dimension {dim} but {} acts on dimension {}",
                        config.povm.name,
                        povm.dim()
                    ),
                );
            }
        }
    }

    let target_dim = config.target.density().map(|s| s.dim()).unwrap_or(0);
    if target_dim != 2 && target_dim != 4 {
        c.fail(
            "target",
            format!("must be a one- or two-qubit state, got dimension {target_dim}"),
        );
    }
}
