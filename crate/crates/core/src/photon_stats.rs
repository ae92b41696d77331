//! Photon-pair number statistics.
//!
//! A [`PairDistribution`] gives the probability `P(m)` that a source emits
//! exactly `m` pairs into one outcome slot. Both photons of a pair always
//! exist together, so a single index describes both arms.
//!
//! The central quantity is the lossy two-arm generating function
//!
//! ```text
//! M_loss(mu, xi) = sum_m P(m) (1 - eta mu)^m (1 - eta xi)^m
//! ```
//!
//! which has closed forms for Poissonian and thermal sources and is summed
//! directly for empirical ones.

use std::fmt;
use std::path::Path;

use crate::{check_unit, Error, Result};

/// Largest number of terms accepted for an empirical distribution.
pub const MAX_EMPIRICAL_TERMS: usize = 10_000;

/// Tolerance on the sum of empirical probabilities before renormalisation.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Empirical sums stop once this much probability has been accumulated.
const CUMULATIVE_CUTOFF: f64 = 1.0 - 1e-15;

/// Variant tag of a [`PairDistribution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceKind {
    Poissonian,
    Thermal,
    Empirical,
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceKind::Poissonian => "poissonian",
            SourceKind::Thermal => "thermal",
            SourceKind::Empirical => "empirical",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Repr {
    Poissonian(f64),
    Thermal(f64),
    Empirical {
        probs: Vec<f64>,
        /// Number of leading terms holding all but 1e-15 of the mass.
        support: usize,
    },
}

/// Probability distribution of the number of photon pairs per outcome slot.
///
/// Values are validated at construction and immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDistribution {
    repr: Repr,
}

impl PairDistribution {
    /// Poissonian statistics `P(m) = e^-lambda lambda^m / m!`.
    pub fn poissonian(mean_pairs: f64) -> Result<Self> {
        Ok(Self {
            repr: Repr::Poissonian(check_mean(mean_pairs)?),
        })
    }

    /// Thermal (Bose-Einstein) statistics `P(m) = lambda^m / (lambda + 1)^(m + 1)`.
    pub fn thermal(mean_pairs: f64) -> Result<Self> {
        Ok(Self {
            repr: Repr::Thermal(check_mean(mean_pairs)?),
        })
    }

    /// Arbitrary statistics given as `p[m]` for `m = 0..len`.
    ///
    /// Every entry must lie in `[0, 1]` and the sum must be within `1e-9` of
    /// one. The stored sequence is rescaled to sum to one.
    pub fn empirical(probs: impl Into<Vec<f64>>) -> Result<Self> {
        let mut probs = probs.into();
        if probs.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        if probs.len() > MAX_EMPIRICAL_TERMS {
            return Err(Error::TooManyTerms(probs.len()));
        }
        if let Some((index, &value)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::InvalidProbability { index, value });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized(total));
        }
        probs.iter_mut().for_each(|p| *p /= total);

        let mut cumulative = 0.0;
        let mut support = probs.len();
        for (m, p) in probs.iter().enumerate() {
            cumulative += p;
            if cumulative > CUMULATIVE_CUTOFF {
                support = m + 1;
                break;
            }
        }
        Ok(Self {
            repr: Repr::Empirical { probs, support },
        })
    }

    /// Parses a probability file: one value per line, `#` starts a comment,
    /// blank lines are ignored. Line order gives the pair count.
    pub fn parse_probabilities(text: &str, origin: &Path) -> Result<Vec<f64>> {
        let mut probs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let value = line.parse::<f64>().map_err(|e| Error::ProbabilityFile {
                path: origin.to_path_buf(),
                line: idx + 1,
                message: format!("cannot parse {line:?} as a probability: {e}"),
            })?;
            probs.push(value);
        }
        Ok(probs)
    }

    /// Loads an empirical distribution from a probability file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::empirical(Self::parse_probabilities(&text, path)?)
    }

    pub fn kind(&self) -> SourceKind {
        match self.repr {
            Repr::Poissonian(_) => SourceKind::Poissonian,
            Repr::Thermal(_) => SourceKind::Thermal,
            Repr::Empirical { .. } => SourceKind::Empirical,
        }
    }

    pub(crate) fn repr(&self) -> &Repr {
        &self.repr
    }

    /// The stored probabilities of an empirical distribution.
    pub fn probabilities(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Empirical { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// `P(m)`. Empirical distributions return 0 past their last entry.
    pub fn pair_probability(&self, m: u64) -> f64 {
        match &self.repr {
            Repr::Poissonian(lam) => {
                if *lam == 0.0 {
                    return if m == 0 { 1.0 } else { 0.0 };
                }
                let m_f = m as f64;
                (m_f * lam.ln() - lam - ln_factorial(m)).exp()
            }
            Repr::Thermal(lam) => {
                if *lam == 0.0 {
                    return if m == 0 { 1.0 } else { 0.0 };
                }
                let m_f = m as f64;
                (m_f * (lam / (1.0 + lam)).ln() - lam.ln_1p()).exp()
            }
            Repr::Empirical { probs, .. } => usize::try_from(m)
                .ok()
                .and_then(|i| probs.get(i))
                .copied()
                .unwrap_or(0.0),
        }
    }

    /// Mean number of pairs per slot.
    pub fn mean_pairs(&self) -> f64 {
        match &self.repr {
            Repr::Poissonian(lam) | Repr::Thermal(lam) => *lam,
            Repr::Empirical { probs, support } => probs[..*support]
                .iter()
                .enumerate()
                .map(|(m, p)| m as f64 * p)
                .sum(),
        }
    }

    /// Lossy generating function `sum_m P(m) (1 - eta mu)^m (1 - eta xi)^m`.
    pub fn mgf_lossy(&self, eta: f64, mu: f64, xi: f64) -> Result<f64> {
        check_unit("eta", eta)?;
        check_unit("mu", mu)?;
        check_unit("xi", xi)?;
        let exponent = eta * (mu + xi - eta * mu * xi);
        Ok(match &self.repr {
            Repr::Poissonian(lam) => (-lam * exponent).exp(),
            Repr::Thermal(lam) => 1.0 / (1.0 + lam * exponent),
            Repr::Empirical { probs, support } => {
                let ratio = (1.0 - eta * mu) * (1.0 - eta * xi);
                probs[..*support]
                    .iter()
                    .rev()
                    .fold(0.0, |acc, p| acc * ratio + p)
            }
        })
    }

    /// Number of leading terms `m = 0..len` whose neglected tail mass is
    /// below `tail`. For empirical distributions this is the stored support.
    pub fn truncation_len(&self, tail: f64) -> usize {
        match &self.repr {
            Repr::Poissonian(lam) => {
                if *lam == 0.0 {
                    return 1;
                }
                // For k > lam the tail beyond k - 1 is bounded by a geometric
                // series with ratio lam / (k + 1).
                let mut k: u64 = 1;
                loop {
                    let k_f = k as f64;
                    if k_f + 1.0 > *lam {
                        let bound = self.pair_probability(k) / (1.0 - lam / (k_f + 1.0));
                        if bound < tail {
                            return k as usize;
                        }
                    }
                    k += 1;
                }
            }
            Repr::Thermal(lam) => {
                if *lam == 0.0 {
                    return 1;
                }
                let ratio = lam / (1.0 + lam);
                ((tail.ln() / ratio.ln()).ceil() as usize).max(1)
            }
            Repr::Empirical { support, .. } => *support,
        }
    }

    /// Copies the first terms of this distribution, enough to leave a tail
    /// below `tail`, into an empirical distribution.
    pub fn to_empirical(&self, tail: f64) -> Result<Self> {
        let len = self.truncation_len(tail);
        Self::empirical(
            (0..len as u64)
                .map(|m| self.pair_probability(m))
                .collect::<Vec<_>>(),
        )
    }
}

impl fmt::Display for PairDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Poissonian(lam) => write!(f, "poissonian(lambda={lam})"),
            Repr::Thermal(lam) => write!(f, "thermal(lambda={lam})"),
            Repr::Empirical { probs, .. } => {
                write!(f, "empirical({} terms, mean={})", probs.len(), self.mean_pairs())
            }
        }
    }
}

fn check_mean(lam: f64) -> Result<f64> {
    if lam.is_finite() && lam >= 0.0 {
        Ok(lam)
    } else {
        Err(Error::OutOfRange {
            name: "mean_pairs",
            value: lam,
            range: "[0, inf)",
        })
    }
}

/// `ln(m!)`, exact products up to 20! and `lgamma` beyond.
pub(crate) fn ln_factorial(m: u64) -> f64 {
    if m <= 20 {
        ((1..=m).product::<u64>() as f64).ln()
    } else {
        libm::lgamma(m as f64 + 1.0)
    }
}
