//! POVMs, Kraus channels, Born probabilities and the single-measurement
//! state update.
//!
//! Effects are induced from Kraus operators as `E_k = sum_j A_kj^dagger A_kj`,
//! which is the ordering under which `tr(sum_j A rho A^dagger) = tr(rho E_k)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::qalg::{
    apply_local, hermitian_eigenvalues, hermitian_function, kron, ComplexMatrix, DensityOperator,
    C64,
};

/// Tolerance for effect positivity and completeness.
pub const POVM_TOL: f64 = 1e-10;

/// Outcomes with Born probability at or below this are rejected by
/// [`kraus_update`].
pub const ZERO_PROBABILITY_FLOOR: f64 = 1e-12;

/// Relative singular-value cutoff used by [`is_informationally_complete`].
pub const RANK_TOL: f64 = 1e-8;

const SQRT_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    dim: usize,
    effects: Vec<ComplexMatrix>,
    labels: Vec<String>,
    /// Factor POVMs for a product measurement, first factor most significant.
    factors: Vec<Povm>,
}

impl Povm {
    pub fn new(effects: Vec<ComplexMatrix>, labels: Vec<String>) -> Result<Self> {
        let Some(first) = effects.first() else {
            return Err(Error::InvalidPovm("no effects".into()));
        };
        let dim = first.nrows();
        if labels.len() != effects.len() {
            return Err(Error::InvalidPovm(format!(
                "{} labels for {} effects",
                labels.len(),
                effects.len()
            )));
        }
        let mut total = ComplexMatrix::zeros(dim, dim);
        for (k, e) in effects.iter().enumerate() {
            if e.nrows() != dim || e.ncols() != dim {
                return Err(Error::InvalidPovm(format!("effect {k} is not {dim}x{dim}")));
            }
            let herm = (e - e.adjoint()).camax();
            if herm > POVM_TOL {
                return Err(Error::InvalidPovm(format!(
                    "effect {k} not Hermitian (defect {herm:e})"
                )));
            }
            let min = hermitian_eigenvalues(e)[0];
            if min < -POVM_TOL {
                return Err(Error::InvalidPovm(format!(
                    "effect {k} has negative eigenvalue {min:e}"
                )));
            }
            total += e;
        }
        let defect = (total - ComplexMatrix::identity(dim, dim)).camax();
        if defect > POVM_TOL {
            return Err(Error::InvalidPovm(format!(
                "effects sum to identity only within {defect:e}"
            )));
        }
        Ok(Self {
            dim,
            effects,
            labels,
            factors: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_outcomes(&self) -> usize {
        self.effects.len()
    }

    /// Factor POVMs when this is a product measurement; empty otherwise.
    pub fn factors(&self) -> &[Povm] {
        &self.factors
    }

    /// Product measurement `{E_i (x) F_j}` with outcome index `i * |F| + j`.
    pub fn product(&self, other: &Povm) -> Povm {
        let mut effects = Vec::with_capacity(self.num_outcomes() * other.num_outcomes());
        let mut labels = Vec::with_capacity(effects.capacity());
        for (e, le) in self.effects.iter().zip(&self.labels) {
            for (f, lf) in other.effects.iter().zip(&other.labels) {
                effects.push(kron(e, f));
                labels.push(format!("{le},{lf}"));
            }
        }
        let mut factors = if self.factors.is_empty() {
            vec![self.clone()]
        } else {
            self.factors.clone()
        };
        if other.factors.is_empty() {
            factors.push(other.clone());
        } else {
            factors.extend(other.factors.iter().cloned());
        }
        Povm {
            dim: self.dim * other.dim,
            effects,
            labels,
            factors,
        }
    }

    /// Splits a product-measurement outcome into per-factor outcomes.
    pub fn split_outcome(&self, outcome: usize) -> Option<Vec<usize>> {
        if self.factors.is_empty() || outcome >= self.num_outcomes() {
            return None;
        }
        let mut rest = outcome;
        let mut parts = vec![0; self.factors.len()];
        for (slot, f) in parts.iter_mut().zip(&self.factors).rev() {
            *slot = rest % f.num_outcomes();
            rest /= f.num_outcomes();
        }
        Some(parts)
    }

    pub(crate) fn check_outcome(&self, outcome: usize) -> Result<()> {
        if outcome >= self.num_outcomes() {
            return Err(Error::OutcomeOutOfRange {
                outcome,
                outcomes: self.num_outcomes(),
            });
        }
        Ok(())
    }

    /// `tr(rho E_k)` for a matrix of matching dimension, without clamping.
    pub fn outcome_probability(&self, rho: &ComplexMatrix, outcome: usize) -> f64 {
        trace_product(rho, &self.effects[outcome])
    }

    /// True if this is the computational-basis projective measurement on a qubit.
    pub fn is_z_basis(&self) -> bool {
        self.dim == 2
            && self.num_outcomes() == 2
            && (0..2).all(|k| {
                let proj = DensityOperator::basis(2, k);
                (&self.effects[k] - proj.matrix()).camax() <= POVM_TOL
            })
    }
}

/// `Re tr(a b)` without forming the product.
pub(crate) fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// Born-rule outcome distribution `p_k = tr(rho E_k)`, clamped at zero.
pub fn born_probabilities(state: &DensityOperator, povm: &Povm) -> Result<Vec<f64>> {
    if state.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            actual: state.dim(),
        });
    }
    Ok((0..povm.num_outcomes())
        .map(|k| povm.outcome_probability(state.matrix(), k).max(0.0))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    dim: usize,
    operators: Vec<Vec<ComplexMatrix>>,
}

impl KrausChannel {
    /// `operators[k]` lists the Kraus operators of outcome `k`.
    pub fn new(operators: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        let dim = operators
            .iter()
            .flatten()
            .next()
            .map(|a| a.nrows())
            .ok_or_else(|| Error::InvalidChannel("no Kraus operators".into()))?;
        let mut total = ComplexMatrix::zeros(dim, dim);
        for (k, ops) in operators.iter().enumerate() {
            if ops.is_empty() {
                return Err(Error::InvalidChannel(format!(
                    "outcome {k} has no operators"
                )));
            }
            for a in ops {
                if a.nrows() != dim || a.ncols() != dim {
                    return Err(Error::InvalidChannel(format!(
                        "outcome {k} operator is not {dim}x{dim}"
                    )));
                }
                total += a.adjoint() * a;
            }
        }
        let defect = (total - ComplexMatrix::identity(dim, dim)).camax();
        if defect > POVM_TOL {
            return Err(Error::InvalidChannel(format!(
                "sum of A^dagger A differs from identity by {defect:e}"
            )));
        }
        Ok(Self { dim, operators })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_outcomes(&self) -> usize {
        self.operators.len()
    }

    pub fn operators(&self, outcome: usize) -> &[ComplexMatrix] {
        &self.operators[outcome]
    }

    /// `E_k = sum_j A_kj^dagger A_kj`.
    pub fn effect(&self, outcome: usize) -> ComplexMatrix {
        self.operators[outcome]
            .iter()
            .fold(ComplexMatrix::zeros(self.dim, self.dim), |acc, a| {
                acc + a.adjoint() * a
            })
    }

    pub fn induced_povm(&self) -> Result<Povm> {
        let effects = (0..self.num_outcomes()).map(|k| self.effect(k)).collect();
        let labels = (0..self.num_outcomes()).map(|k| k.to_string()).collect();
        Povm::new(effects, labels)
    }
}

/// Canonical Kraus representation `A_k = sqrt(E_k)`.
pub fn lueders_channel(povm: &Povm) -> KrausChannel {
    let operators = povm
        .effects()
        .iter()
        .map(|e| {
            // eigenvalues at round-off level would otherwise become ~1e-8 after sqrt
            let cutoff = SQRT_CUTOFF * e.camax().max(1.0);
            vec![hermitian_function(e, |l| {
                if l > cutoff {
                    l.sqrt()
                } else {
                    0.0
                }
            })]
        })
        .collect();
    KrausChannel {
        dim: povm.dim(),
        operators,
    }
}

/// Post-measurement state for `outcome`, with the channel acting on factor
/// `acting_site` (zero-based). Returns the state and the outcome probability.
pub fn kraus_update_with_probability(
    state: &DensityOperator,
    channel: &KrausChannel,
    outcome: usize,
    acting_site: usize,
) -> Result<(DensityOperator, f64)> {
    if outcome >= channel.num_outcomes() {
        return Err(Error::OutcomeOutOfRange {
            outcome,
            outcomes: channel.num_outcomes(),
        });
    }
    let dims = state.factor_dims();
    if acting_site >= dims.len() {
        return Err(Error::SiteOutOfRange {
            site: acting_site,
            sites: dims.len(),
        });
    }
    if dims[acting_site] != channel.dim() {
        return Err(Error::DimensionMismatch {
            expected: channel.dim(),
            actual: dims[acting_site],
        });
    }
    let unnormalized = apply_local(
        state.matrix(),
        dims,
        acting_site,
        channel.operators(outcome),
    )?;
    let probability = unnormalized.trace().re;
    if probability <= ZERO_PROBABILITY_FLOOR {
        return Err(Error::ZeroProbabilityOutcome {
            outcome,
            probability,
        });
    }
    let mut matrix = unnormalized.unscale(probability);
    // drift from the index loops is antihermitian at the 1e-17 level
    let sym = (&matrix + matrix.adjoint()).scale(0.5);
    matrix = sym;
    Ok((
        DensityOperator::from_parts_unchecked(matrix, dims.to_vec()),
        probability,
    ))
}

/// `rho_k = tr(rho E_k)^{-1} sum_j A_kj rho A_kj^dagger`, channel embedded at
/// `acting_site`.
pub fn kraus_update(
    state: &DensityOperator,
    channel: &KrausChannel,
    outcome: usize,
    acting_site: usize,
) -> Result<DensityOperator> {
    kraus_update_with_probability(state, channel, outcome, acting_site).map(|(s, _)| s)
}

/// Named measurements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PovmKind {
    ZBasis,
    SicQubit,
    Pauli6,
    BellBasis,
    Product(Box<PovmKind>, Box<PovmKind>),
}

impl fmt::Display for PovmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PovmKind::ZBasis => f.write_str("z_basis"),
            PovmKind::SicQubit => f.write_str("sic_qubit"),
            PovmKind::Pauli6 => f.write_str("pauli6"),
            PovmKind::BellBasis => f.write_str("bell_basis"),
            PovmKind::Product(p, q) => write!(f, "product({p},{q})"),
        }
    }
}

impl FromStr for PovmKind {
    type Err = Error;

    /// Accepts `z_basis`, `sic_qubit`, `pauli6`, `bell_basis` and
    /// `product(<kind>,<kind>)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "z_basis" => return Ok(PovmKind::ZBasis),
            "sic_qubit" => return Ok(PovmKind::SicQubit),
            "pauli6" => return Ok(PovmKind::Pauli6),
            "bell_basis" => return Ok(PovmKind::BellBasis),
            _ => {}
        }
        let inner = s
            .strip_prefix("product(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::UnknownPovmKind(s.to_string()))?;
        // split on the top-level comma
        let mut depth = 0usize;
        for (i, ch) in inner.char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => depth = depth.saturating_sub(1),
                ',' if depth == 0 => {
                    let p = inner[..i].parse()?;
                    let q = inner[i + 1..].parse()?;
                    return Ok(PovmKind::Product(Box::new(p), Box::new(q)));
                }
                _ => {}
            }
        }
        Err(Error::UnknownPovmKind(s.to_string()))
    }
}

/// Tetrahedral Bloch vectors of the qubit SIC, first one along +z.
pub fn sic_bloch_vectors() -> [[f64; 3]; 4] {
    let s2 = std::f64::consts::SQRT_2;
    let s23 = (2.0f64 / 3.0).sqrt();
    [
        [0.0, 0.0, 1.0],
        [2.0 * s2 / 3.0, 0.0, -1.0 / 3.0],
        [-s2 / 3.0, s23, -1.0 / 3.0],
        [-s2 / 3.0, -s23, -1.0 / 3.0],
    ]
}

/// `(I + r . sigma) * scale`
fn bloch_operator(r: [f64; 3], scale: f64) -> ComplexMatrix {
    let [x, y, z] = r;
    ComplexMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(1.0 + z, 0.0),
            C64::new(x, -y),
            C64::new(x, y),
            C64::new(1.0 - z, 0.0),
        ],
    )
    .scale(scale)
}

pub fn standard_povm(kind: &PovmKind) -> Povm {
    match kind {
        PovmKind::ZBasis => Povm {
            dim: 2,
            effects: vec![
                DensityOperator::basis(2, 0).into_matrix(),
                DensityOperator::basis(2, 1).into_matrix(),
            ],
            labels: vec!["0".into(), "1".into()],
            factors: Vec::new(),
        },
        PovmKind::SicQubit => Povm {
            dim: 2,
            effects: sic_bloch_vectors()
                .iter()
                .map(|&a| bloch_operator(a, 0.25))
                .collect(),
            labels: (0..4).map(|k| k.to_string()).collect(),
            factors: Vec::new(),
        },
        PovmKind::Pauli6 => {
            let axes = [
                ("x+", [1.0, 0.0, 0.0]),
                ("x-", [-1.0, 0.0, 0.0]),
                ("y+", [0.0, 1.0, 0.0]),
                ("y-", [0.0, -1.0, 0.0]),
                ("z+", [0.0, 0.0, 1.0]),
                ("z-", [0.0, 0.0, -1.0]),
            ];
            Povm {
                dim: 2,
                effects: axes
                    .iter()
                    .map(|&(_, a)| bloch_operator(a, 1.0 / 6.0))
                    .collect(),
                labels: axes.iter().map(|&(l, _)| l.to_string()).collect(),
                factors: Vec::new(),
            }
        }
        PovmKind::BellBasis => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let vectors: [(&str, [f64; 4]); 4] = [
                ("phi+", [h, 0.0, 0.0, h]),
                ("phi-", [h, 0.0, 0.0, -h]),
                ("psi+", [0.0, h, h, 0.0]),
                ("psi-", [0.0, h, -h, 0.0]),
            ];
            Povm {
                dim: 4,
                effects: vectors
                    .iter()
                    .map(|(_, v)| ComplexMatrix::from_fn(4, 4, |i, j| C64::new(v[i] * v[j], 0.0)))
                    .collect(),
                labels: vectors.iter().map(|(l, _)| l.to_string()).collect(),
                factors: Vec::new(),
            }
        }
        PovmKind::Product(p, q) => standard_povm(p).product(&standard_povm(q)),
    }
}

/// Parses a kind name and builds the POVM.
pub fn standard_povm_by_name(name: &str) -> Result<Povm> {
    Ok(standard_povm(&name.parse()?))
}

/// True iff the effects span the full `d^2`-dimensional operator space.
pub fn is_informationally_complete(povm: &Povm) -> bool {
    let d2 = povm.dim() * povm.dim();
    let rows = povm.num_outcomes();
    if rows < d2 {
        return false;
    }
    let stacked = ComplexMatrix::from_fn(rows, d2, |k, idx| {
        povm.effects()[k][(idx / povm.dim(), idx % povm.dim())]
    });
    let singular = stacked.singular_values();
    let max = singular.iter().copied().fold(0.0, f64::max);
    let rank = singular.iter().filter(|&&s| s > RANK_TOL * max).count();
    rank == d2
}
