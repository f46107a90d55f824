//! Dense complex linear algebra for finite-dimensional quantum states.
//!
//! Composite systems use the convention that the first tensor factor is the
//! most significant index: for two factors of dimensions `d1, d2` the basis
//! index of `|i1 i2>` is `i1 * d2 + i2`. Sites are zero-based throughout.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense complex matrix. Shape is carried by the matrix itself.
pub type ComplexMatrix = DMatrix<C64>;

/// Tolerance used by every [`DensityOperator`] constructor.
pub const DENSITY_TOL: f64 = 1e-10;

/// Largest Hilbert-space dimension materialized as a dense matrix.
pub const MAX_DENSE_DIM: usize = 1024;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Outcome of [`validate_density`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityReport {
    /// max |m - m^dagger| entrywise.
    pub hermiticity_defect: f64,
    /// |tr m - 1|.
    pub trace_defect: f64,
    /// Smallest eigenvalue of the Hermitian part of m.
    pub min_eigenvalue: f64,
    pub tol: f64,
}

impl ValidityReport {
    pub fn passes(&self) -> bool {
        self.hermiticity_defect <= self.tol
            && self.trace_defect <= self.tol
            && self.min_eigenvalue >= -self.tol
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "hermiticity defect {:e}, trace defect {:e}, min eigenvalue {:e} (tol {:e})",
            self.hermiticity_defect, self.trace_defect, self.min_eigenvalue, self.tol
        )
    }
}

/// Checks Hermiticity, unit trace and positivity of a square matrix.
///
/// Non-square input yields a report with infinite defects rather than an error.
pub fn validate_density(m: &ComplexMatrix, tol: f64) -> ValidityReport {
    if !m.is_square() || m.nrows() == 0 {
        return ValidityReport {
            hermiticity_defect: f64::INFINITY,
            trace_defect: f64::INFINITY,
            min_eigenvalue: f64::NEG_INFINITY,
            tol,
        };
    }
    let adjoint = m.adjoint();
    let hermiticity_defect = m
        .iter()
        .zip(adjoint.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let trace_defect = (m.trace() - ONE).norm();
    let hermitian_part = (m + &adjoint).scale(0.5);
    let min_eigenvalue = hermitian_eigenvalues(&hermitian_part)
        .first()
        .copied()
        .unwrap_or(0.0);
    ValidityReport {
        hermiticity_defect,
        trace_defect,
        min_eigenvalue,
        tol,
    }
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let mut values: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Applies `f` to the spectrum of a Hermitian matrix: `V f(L) V^dagger`.
pub fn hermitian_function(m: &ComplexMatrix, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let eig = m.clone().symmetric_eigen();
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = f(lambda);
        scaled.column_mut(j).scale_mut(s);
    }
    scaled * eig.eigenvectors.adjoint()
}

/// Kronecker product with `a` as the most significant factor.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// `sum_j A_j rho A_j^dagger` with each `A_j` acting on factor `site` of a
/// state whose factorization is `dims`, identity elsewhere.
pub fn apply_local(
    rho: &ComplexMatrix,
    dims: &[usize],
    site: usize,
    ops: &[ComplexMatrix],
) -> Result<ComplexMatrix> {
    if site >= dims.len() {
        return Err(Error::SiteOutOfRange {
            site,
            sites: dims.len(),
        });
    }
    let d = dims[site];
    let outer: usize = dims[..site].iter().product();
    let inner: usize = dims[site + 1..].iter().product();
    let total = outer * d * inner;
    if rho.nrows() != total || rho.ncols() != total {
        return Err(Error::DimensionMismatch {
            expected: total,
            actual: rho.nrows(),
        });
    }
    let mut out = ComplexMatrix::zeros(total, total);
    let mut left = ComplexMatrix::zeros(total, total);
    for op in ops {
        if op.nrows() != d || op.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: op.nrows(),
            });
        }
        // left = (I (x) A (x) I) rho
        left.fill(ZERO);
        for col in 0..total {
            for l in 0..outer {
                for r in 0..inner {
                    for i in 0..d {
                        let mut acc = ZERO;
                        for j in 0..d {
                            acc += op[(i, j)] * rho[((l * d + j) * inner + r, col)];
                        }
                        left[((l * d + i) * inner + r, col)] = acc;
                    }
                }
            }
        }
        // out += left (I (x) A^dagger (x) I)
        for row in 0..total {
            for l in 0..outer {
                for r in 0..inner {
                    for i in 0..d {
                        let mut acc = ZERO;
                        for j in 0..d {
                            acc += left[(row, (l * d + j) * inner + r)] * op[(i, j)].conj();
                        }
                        out[(row, (l * d + i) * inner + r)] += acc;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Hermitian, positive semidefinite, unit-trace matrix together with its
/// tensor-factor bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
    factor_dims: Vec<usize>,
}

impl DensityOperator {
    /// Validates `matrix` at [`DENSITY_TOL`] and attaches `factor_dims`.
    pub fn new(matrix: ComplexMatrix, factor_dims: Vec<usize>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        check_factorization(&factor_dims, matrix.nrows())?;
        let report = validate_density(&matrix, DENSITY_TOL);
        if !report.passes() {
            return Err(Error::InvalidDensity(report));
        }
        Ok(Self {
            matrix,
            factor_dims,
        })
    }

    /// Single-factor density operator.
    pub fn from_matrix(matrix: ComplexMatrix) -> Result<Self> {
        let dim = matrix.nrows();
        Self::new(matrix, vec![dim])
    }

    /// Caller guarantees validity; used on hot paths whose outputs are valid
    /// by construction (convex mixtures, normalized Kraus updates).
    pub(crate) fn from_parts_unchecked(matrix: ComplexMatrix, factor_dims: Vec<usize>) -> Self {
        debug_assert_eq!(factor_dims.iter().product::<usize>(), matrix.nrows());
        Self {
            matrix,
            factor_dims,
        }
    }

    /// Projector onto the normalized version of `amplitudes`.
    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if amplitudes.is_empty() || norm == 0.0 {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        let dim = amplitudes.len();
        let psi: Vec<C64> = amplitudes.iter().map(|a| a / norm).collect();
        let matrix = ComplexMatrix::from_fn(dim, dim, |i, j| psi[i] * psi[j].conj());
        Ok(Self::from_parts_unchecked(matrix, vec![dim]))
    }

    /// Computational basis projector `|index><index|`.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(
            index < dim,
            "basis index {index} out of range for dim {dim}"
        );
        let mut matrix = ComplexMatrix::zeros(dim, dim);
        matrix[(index, index)] = ONE;
        Self::from_parts_unchecked(matrix, vec![dim])
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let matrix = ComplexMatrix::identity(dim, dim).scale(1.0 / dim as f64);
        Self::from_parts_unchecked(matrix, vec![dim])
    }

    pub fn zero() -> Self {
        Self::basis(2, 0)
    }

    pub fn one() -> Self {
        Self::basis(2, 1)
    }

    /// `|+><+|` with `|+> = (|0> + |1>)/sqrt 2`.
    pub fn plus() -> Self {
        Self::from_parts_unchecked(
            ComplexMatrix::from_element(2, 2, C64::new(0.5, 0.0)),
            vec![2],
        )
    }

    /// `(|00> + |11>)(<00| + <11|)/2` on two qubits.
    pub fn bell_phi_plus() -> Self {
        let mut matrix = ComplexMatrix::zeros(4, 4);
        for &i in &[0, 3] {
            for &j in &[0, 3] {
                matrix[(i, j)] = C64::new(0.5, 0.0);
            }
        }
        Self::from_parts_unchecked(matrix, vec![2, 2])
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn num_sites(&self) -> usize {
        self.factor_dims.len()
    }

    /// Same matrix, different tensor factorization.
    pub fn with_factor_dims(mut self, factor_dims: Vec<usize>) -> Result<Self> {
        check_factorization(&factor_dims, self.dim())?;
        self.factor_dims = factor_dims;
        Ok(self)
    }

    /// `self (x) other`, with `self` as the first system.
    pub fn tensor(&self, other: &DensityOperator) -> DensityOperator {
        let mut factor_dims = self.factor_dims.clone();
        factor_dims.extend_from_slice(&other.factor_dims);
        Self::from_parts_unchecked(kron(&self.matrix, &other.matrix), factor_dims)
    }

    /// n-fold tensor power, `n >= 1`.
    pub fn tensor_power(&self, n: usize) -> Result<DensityOperator> {
        if n == 0 {
            return Err(Error::InvalidParameter("tensor power needs n >= 1".into()));
        }
        let dim = checked_pow(self.dim(), n)?;
        check_cap(dim)?;
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.tensor(self);
        }
        Ok(acc)
    }

    /// Reduced state after tracing out factor `site` (zero-based).
    pub fn partial_trace(&self, site: usize) -> Result<DensityOperator> {
        let sites = self.factor_dims.len();
        if site >= sites {
            return Err(Error::SiteOutOfRange { site, sites });
        }
        if sites == 1 {
            return Err(Error::TraceOfLastFactor);
        }
        let d = self.factor_dims[site];
        let outer: usize = self.factor_dims[..site].iter().product();
        let inner: usize = self.factor_dims[site + 1..].iter().product();
        let reduced = outer * inner;
        let rho = &self.matrix;
        let matrix = ComplexMatrix::from_fn(reduced, reduced, |row, col| {
            let (l, r) = (row / inner, row % inner);
            let (lp, rp) = (col / inner, col % inner);
            (0..d)
                .map(|i| rho[((l * d + i) * inner + r, (lp * d + i) * inner + rp)])
                .sum()
        });
        let mut factor_dims = self.factor_dims.clone();
        factor_dims.remove(site);
        Ok(Self::from_parts_unchecked(matrix, factor_dims))
    }

    /// Traces out the last factor.
    pub fn trace_last(&self) -> Result<DensityOperator> {
        self.partial_trace(self.factor_dims.len().saturating_sub(1))
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn validate(&self, tol: f64) -> ValidityReport {
        validate_density(&self.matrix, tol)
    }

    /// Largest entrywise modulus of `self - other`; `INFINITY` on shape mismatch.
    pub fn max_abs_diff(&self, other: &DensityOperator) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Free-function form of [`DensityOperator::tensor`].
pub fn tensor(a: &DensityOperator, b: &DensityOperator) -> DensityOperator {
    a.tensor(b)
}

/// Free-function form of [`DensityOperator::partial_trace`].
pub fn partial_trace(state: &DensityOperator, site: usize) -> Result<DensityOperator> {
    state.partial_trace(site)
}

/// Trace distance `1/2 sum |lambda_i|` over the spectrum of `a - b`.
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let diff = a.matrix() - b.matrix();
    let diff = (&diff + diff.adjoint()).scale(0.5);
    let t = 0.5
        * hermitian_eigenvalues(&diff)
            .iter()
            .map(|l| l.abs())
            .sum::<f64>();
    Ok(t.clamp(0.0, 1.0))
}

/// Convex combination `sum_i w_i rho_i`. All states must share a dimension.
pub fn mixture<'a, I>(terms: I, factor_dims: Vec<usize>) -> DensityOperator
where
    I: IntoIterator<Item = (f64, &'a ComplexMatrix)>,
{
    let dim: usize = factor_dims.iter().product();
    let mut acc = ComplexMatrix::zeros(dim, dim);
    for (w, m) in terms {
        if w != 0.0 {
            acc.zip_apply(m, |a, b| *a += b * w);
        }
    }
    DensityOperator::from_parts_unchecked(acc, factor_dims)
}

pub(crate) fn check_cap(dim: usize) -> Result<()> {
    if dim > MAX_DENSE_DIM {
        Err(Error::DenseCapExceeded {
            dim,
            cap: MAX_DENSE_DIM,
        })
    } else {
        Ok(())
    }
}

pub(crate) fn checked_pow(base: usize, n: usize) -> Result<usize> {
    u32::try_from(n)
        .ok()
        .and_then(|n| base.checked_pow(n))
        .ok_or(Error::DenseCapExceeded {
            dim: usize::MAX,
            cap: MAX_DENSE_DIM,
        })
}

fn check_factorization(factors: &[usize], dim: usize) -> Result<()> {
    if factors.is_empty() || factors.contains(&0) || factors.iter().product::<usize>() != dim {
        return Err(Error::BadFactorization {
            factors: factors.to_vec(),
            dim,
        });
    }
    Ok(())
}
