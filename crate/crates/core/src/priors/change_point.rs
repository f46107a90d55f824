//! The counter-inductive change-point prior.
//!
//! The fresh prior is a classical measure on infinite bit strings supported on
//! `0^k 1^inf` and `1^k 0^inf` for `k >= 1`, each carrying weight
//! `N * 2^{-k^2}` with `1 = 2 N sum_{k>=1} 2^{-k^2}`. Its n-system state is the
//! diagonal operator whose entry at a basis string is the measure of all
//! sequences starting with that string.
//!
//! After observing `m >= 1` copies of a symbol `s`, the surviving sequences
//! (with the observed prefix dropped) are `s^j (1-s)^inf`, `j >= 0`, with
//! weights `N_m 2^{-j(2m+j)}` and `1 = N_m sum_{j>=0} 2^{-j(2m+j)}`. Observing
//! the other symbol leaves exactly one sequence. Conditioning is exact: the
//! measure is stored as this small summary, never as a matrix.

use super::PriorSequence;
use crate::error::{Error, Result};
use crate::qalg::{check_cap, checked_pow, ComplexMatrix, DensityOperator, C64};

/// Relative tail cutoff for the `2^{-k^2}`-type series.
pub const DEFAULT_TRUNCATION: f64 = 1e-16;

/// Hard cap on series terms; the summands decay super-exponentially, so this
/// is never reached for any tolerance above zero.
const MAX_TERMS: usize = 64;

/// What the observed prefix has revealed about the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// Nothing observed; symmetric in `0 <-> 1`.
    Fresh,
    /// `length >= 1` copies of `symbol` observed and nothing else.
    Run { symbol: u8, length: usize },
    /// Both symbols observed: every remaining system is `symbol`.
    Resolved { symbol: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangePointPrior {
    conditioning: Conditioning,
    observed: usize,
    truncation_tolerance: f64,
}

/// The fresh counter-inductive prior.
pub fn counter_inductive_prior() -> ChangePointPrior {
    ChangePointPrior {
        conditioning: Conditioning::Fresh,
        observed: 0,
        truncation_tolerance: DEFAULT_TRUNCATION,
    }
}

impl ChangePointPrior {
    pub fn with_truncation_tolerance(mut self, tol: f64) -> Self {
        self.truncation_tolerance = tol;
        self
    }

    pub fn conditioning(&self) -> Conditioning {
        self.conditioning
    }

    /// Number of symbols conditioned on so far.
    pub fn observed(&self) -> usize {
        self.observed
    }

    pub fn truncation_tolerance(&self) -> f64 {
        self.truncation_tolerance
    }

    /// Unnormalized weight of the remaining sequence `s^j (1-s)^inf` inside
    /// a run family (`run_length = 0` for the fresh prior).
    fn run_term(run_length: usize, j: usize) -> f64 {
        let exponent = (j as f64) * (2.0 * run_length as f64 + j as f64);
        (-exponent).exp2()
    }

    /// `sum_{j >= from} run_term(run_length, j)`, truncated once a term drops
    /// below `tol` times the running sum.
    fn run_series(&self, run_length: usize, from: usize) -> f64 {
        let mut acc = 0.0;
        for j in from..from + MAX_TERMS {
            let term = Self::run_term(run_length, j);
            acc += term;
            if term == 0.0 || term <= self.truncation_tolerance * acc {
                break;
            }
        }
        acc
    }

    /// Normalization constant: `N` for the fresh prior, `N_m` after a run of
    /// length `m`, 1 once resolved.
    pub fn normalization(&self) -> f64 {
        match self.conditioning {
            Conditioning::Fresh => 1.0 / (2.0 * self.run_series(0, 1)),
            Conditioning::Run { length, .. } => 1.0 / self.run_series(length, 0),
            Conditioning::Resolved { .. } => 1.0,
        }
    }

    /// Probability of the remaining sequence `symbol^run (other)^inf`.
    pub fn sequence_weight(&self, symbol: u8, run: usize) -> f64 {
        match self.conditioning {
            Conditioning::Fresh if run >= 1 => self.normalization() * Self::run_term(0, run),
            Conditioning::Fresh => 0.0,
            Conditioning::Run { symbol: s, length } if s == symbol => {
                self.normalization() * Self::run_term(length, run)
            }
            // (1-s)^0 s^inf is the all-s sequence, which has measure zero
            Conditioning::Run { .. } => 0.0,
            Conditioning::Resolved { symbol: t } => {
                if run == 0 && symbol != t {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Probability that the next system shows `0` and `1`.
    pub fn predictive(&self) -> [f64; 2] {
        match self.conditioning {
            Conditioning::Fresh => [0.5, 0.5],
            Conditioning::Run { symbol, length } => {
                let total = self.run_series(length, 0);
                let same = self.run_series(length, 1) / total;
                let other = Self::run_term(length, 0) / total;
                let mut p = [0.0; 2];
                p[symbol as usize] = same;
                p[1 - symbol as usize] = other;
                p
            }
            Conditioning::Resolved { symbol } => {
                let mut p = [0.0; 2];
                p[symbol as usize] = 1.0;
                p
            }
        }
    }

    /// Exact conditioning on the next observed symbol.
    pub fn condition(&self, outcome: usize) -> Result<ChangePointPrior> {
        let symbol = symbol_of(outcome)?;
        let conditioning = match self.conditioning {
            Conditioning::Fresh => Conditioning::Run { symbol, length: 1 },
            Conditioning::Run { symbol: s, length } if s == symbol => Conditioning::Run {
                symbol,
                length: length + 1,
            },
            Conditioning::Run { .. } => Conditioning::Resolved { symbol },
            Conditioning::Resolved { symbol: t } if t == symbol => self.conditioning,
            Conditioning::Resolved { .. } => {
                return Err(Error::ZeroEvidence {
                    outcome,
                    evidence: 0.0,
                })
            }
        };
        Ok(ChangePointPrior {
            conditioning,
            observed: self.observed + 1,
            truncation_tolerance: self.truncation_tolerance,
        })
    }

    /// Diagonal of the n-system state, indexed by basis string with the first
    /// system most significant.
    pub fn diagonal(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        let dim = checked_pow(2, n)?;
        check_cap(dim)?;
        let mut diag = vec![0.0; dim];
        let all = |s: u8| if s == 0 { 0 } else { dim - 1 };
        // index of s^j (1-s)^{n-j}
        let string = |s: u8, j: usize| {
            let head_bits = if s == 1 {
                ((1usize << j) - 1) << (n - j)
            } else {
                0
            };
            let tail_bits = if s == 0 { (1usize << (n - j)) - 1 } else { 0 };
            head_bits | tail_bits
        };
        match self.conditioning {
            Conditioning::Fresh => {
                let norm = self.normalization();
                for s in [0u8, 1] {
                    for j in 1..n {
                        diag[string(s, j)] += norm * Self::run_term(0, j);
                    }
                    diag[all(s)] += norm * self.run_series(0, n);
                }
            }
            Conditioning::Run { symbol, length } => {
                let norm = self.normalization();
                for j in 0..n {
                    diag[string(symbol, j)] += norm * Self::run_term(length, j);
                }
                diag[all(symbol)] += norm * self.run_series(length, n);
            }
            Conditioning::Resolved { symbol } => diag[all(symbol)] = 1.0,
        }
        Ok(diag)
    }

    /// Dense n-system state.
    pub fn cip_state(&self, n: usize) -> Result<DensityOperator> {
        let diag = self.diagonal(n)?;
        let dim = diag.len();
        let mut m = ComplexMatrix::zeros(dim, dim);
        for (i, p) in diag.into_iter().enumerate() {
            m[(i, i)] = C64::new(p, 0.0);
        }
        Ok(DensityOperator::from_parts_unchecked(m, vec![2; n]))
    }
}

impl PriorSequence for ChangePointPrior {
    fn system_dim(&self) -> usize {
        2
    }

    fn state_at(&self, n: usize) -> Result<DensityOperator> {
        self.cip_state(n)
    }
}

fn symbol_of(outcome: usize) -> Result<u8> {
    match outcome {
        0 => Ok(0),
        1 => Ok(1),
        _ => Err(Error::OutcomeOutOfRange {
            outcome,
            outcomes: 2,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `sum_{k>=1} 2^{-k^2}` summed to k = 30, far past f64 resolution.
    fn theta_tail() -> f64 {
        (1..=30).map(|k: i32| 2f64.powi(-(k * k))).sum()
    }

    #[test]
    fn fresh_normalization() {
        let p = counter_inductive_prior();
        let want = 1.0 / (2.0 * theta_tail());
        assert!((p.normalization() - want).abs() < 1e-15);
        assert!((p.normalization() - 0.88579).abs() < 1e-5);
        assert!((p.sequence_weight(0, 1) - want * 0.5).abs() < 1e-15);
        assert_eq!(p.sequence_weight(0, 1), p.sequence_weight(1, 1));
        let total: f64 = (1..40)
            .map(|k| p.sequence_weight(0, k) + p.sequence_weight(1, k))
            .sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fresh_small_states() {
        let p = counter_inductive_prior();
        let s1 = p.cip_state(1).unwrap();
        assert!(s1.max_abs_diff(&DensityOperator::maximally_mixed(2)) < 1e-15);

        let norm = p.normalization();
        let t2 = theta_tail() - 0.5;
        let d = p.diagonal(2).unwrap();
        let want = [norm * t2, norm * 0.5, norm * 0.5, norm * t2];
        for (got, want) in d.iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn consistency_and_diagonality() {
        let mut p = counter_inductive_prior();
        for outcome in [0, 0, 0, 1, 1] {
            for n in 1..=4 {
                let big = p.cip_state(n + 1).unwrap();
                let small = p.cip_state(n).unwrap();
                assert!(big.trace_last().unwrap().max_abs_diff(&small) < 1e-12);
                assert!((small.matrix().trace().re - 1.0).abs() < 1e-14);
                let off = small
                    .matrix()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i % (small.dim() + 1) != 0)
                    .map(|(_, z)| z.norm())
                    .fold(0.0, f64::max);
                assert!(off <= 1e-15);
            }
            p = p.condition(outcome).unwrap();
        }
    }

    #[test]
    fn predictive_after_one_zero() {
        let p = counter_inductive_prior().condition(0).unwrap();
        let num: f64 = (1..20).map(|k: i32| 2f64.powi(-k * (2 + k))).sum();
        let den: f64 = (0..20).map(|k: i32| 2f64.powi(-k * (2 + k))).sum();
        let pred = p.predictive();
        assert!((pred[0] - num / den).abs() < 1e-15);
        assert!((pred[0] - 0.11421).abs() < 1e-5);
        assert!((pred[0] + pred[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn run_weights_match_truncated_original() {
        // restricting N 2^{-k^2} to k >= m and renormalizing
        let mut p = counter_inductive_prior();
        for m in 1..=8usize {
            p = p.condition(0).unwrap();
            let raw: Vec<f64> = (m..m + 20).map(|k| 2f64.powi(-((k * k) as i32))).collect();
            let total: f64 = raw.iter().sum();
            for (j, w) in raw.iter().enumerate().take(5) {
                let got = p.sequence_weight(0, j);
                assert!((got - w / total).abs() <= 1e-14, "m={m} j={j}");
            }
        }
    }

    #[test]
    fn mixed_prefix_resolves() {
        let p = counter_inductive_prior()
            .condition(0)
            .unwrap()
            .condition(1)
            .unwrap();
        assert_eq!(p.conditioning(), Conditioning::Resolved { symbol: 1 });
        assert_eq!(p.predictive(), [0.0, 1.0]);
        assert!(
            p.cip_state(3)
                .unwrap()
                .max_abs_diff(&DensityOperator::basis(8, 7))
                < 1e-15
        );
        let err = p.condition(0).unwrap_err();
        assert!(matches!(err, Error::ZeroEvidence { outcome: 0, .. }));
        assert!(p.condition(1).is_ok());
        assert!(counter_inductive_prior().condition(2).is_err());
    }

    #[test]
    fn long_run_predicts_the_other_symbol() {
        let mut p = counter_inductive_prior();
        for _ in 0..20 {
            p = p.condition(0).unwrap();
        }
        let s = p.cip_state(1).unwrap();
        assert!(s.max_abs_diff(&DensityOperator::one()) < 1e-6);
        assert_eq!(p.observed(), 20);
    }
}
