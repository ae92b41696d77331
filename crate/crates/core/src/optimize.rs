//! Source brightness optimisation and parameter sweeps.
//!
//! All searches run over `x = log10(lambda)` because the optimal brightness
//! spans many decades depending on the dark-count probability.

use std::fmt;

use rayon::prelude::*;

use crate::information::{
    info_per_detected, info_per_generated, mutual_information_poisson, mutual_information_thermal,
};
use crate::photon_stats::PairDistribution;
use crate::{Error, Result};

/// Default search interval in `log10(lambda)`.
pub const DEFAULT_LOG10_BRACKET: (f64, f64) = (-12.0, 2.0);

/// Absolute tolerance of the golden-section search in `log10(lambda)`.
pub const LOG10_TOLERANCE: f64 = 1e-6;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Figure of merit maximised over the source brightness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    /// `H(A:B)`, bits per slot.
    MutualInfo,
    /// `H / lambda`, bits per generated pair.
    PerGenerated,
    /// `H / (eta^2 lambda + q^2)`, bits per detected pair.
    PerDetected,
}

impl Objective {
    /// Short name used in CSV headers and config files.
    pub fn label(&self) -> &'static str {
        match self {
            Objective::MutualInfo => "H",
            Objective::PerGenerated => "Ig",
            Objective::PerDetected => "Id",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Source families with a single brightness parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParametricSource {
    Poissonian,
    Thermal,
}

impl ParametricSource {
    pub fn with_mean(self, lam: f64) -> Result<PairDistribution> {
        match self {
            ParametricSource::Poissonian => PairDistribution::poissonian(lam),
            ParametricSource::Thermal => PairDistribution::thermal(lam),
        }
    }

    pub fn mutual_information(self, lam: f64, eta: f64, q: f64) -> Result<f64> {
        match self {
            ParametricSource::Poissonian => mutual_information_poisson(lam, eta, q),
            ParametricSource::Thermal => mutual_information_thermal(lam, eta, q),
        }
    }
}

/// Evaluates `objective` at brightness `lam`.
pub fn objective_value(
    source: ParametricSource,
    eta: f64,
    q: f64,
    objective: Objective,
    lam: f64,
) -> Result<f64> {
    let h = source.mutual_information(lam, eta, q)?;
    match objective {
        Objective::MutualInfo => Ok(h),
        Objective::PerGenerated => info_per_generated(h, lam),
        Objective::PerDetected => info_per_detected(h, lam, eta, q),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub lambda_star: f64,
    pub objective_value: f64,
    pub objective: Objective,
    pub iterations: usize,
    /// Search interval in `log10(lambda)`.
    pub bracket: (f64, f64),
}

/// Golden-section maximisation of `f(lambda)` over `log10(lambda)` in
/// `bracket`. Returns `(lambda_star, f(lambda_star), iterations)`.
///
/// The objective is assumed unimodal in `log10(lambda)`. Any non-finite
/// evaluation aborts the search.
pub fn maximize_log10<F>(f: F, bracket: (f64, f64)) -> Result<(f64, f64, usize)>
where
    F: Fn(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidRange { low: lo, high: hi });
    }
    let eval = |x: f64| -> Result<f64> {
        let lambda = 10f64.powf(x);
        let v = f(lambda)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteObjective { lambda })
        }
    };
    eval(lo)?;
    eval(hi)?;

    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    let mut iterations = 0;
    while hi - lo > LOG10_TOLERANCE {
        iterations += 1;
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    let x_star = if f1 >= f2 { x1 } else { x2 };
    let lambda_star = 10f64.powf(x_star);
    Ok((lambda_star, f(lambda_star)?, iterations))
}

/// Finds the brightness maximising `objective` for a fixed link.
pub fn maximize_lambda(
    source: ParametricSource,
    eta: f64,
    q: f64,
    objective: Objective,
    log10_bracket: (f64, f64),
) -> Result<OptimizationResult> {
    let (lambda_star, objective_value, iterations) = maximize_log10(
        |lam| objective_value(source, eta, q, objective, lam),
        log10_bracket,
    )?;
    Ok(OptimizationResult {
        lambda_star,
        objective_value,
        objective,
        iterations,
        bracket: log10_bracket,
    })
}

/// An objective sampled along one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub parameter_name: String,
    /// `(parameter, value)` pairs in strictly increasing parameter order.
    pub points: Vec<(f64, f64)>,
}

impl SweepCurve {
    /// Index of the largest value.
    pub fn argmax(&self) -> Option<usize> {
        self.points
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .map(|(i, _)| i)
    }
}

/// `points` log-spaced values of lambda covering `log10_range` inclusive.
pub fn log_spaced(log10_range: (f64, f64), points: usize) -> Result<Vec<f64>> {
    let (lo, hi) = log10_range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidRange { low: lo, high: hi });
    }
    if points < 2 {
        return Err(Error::TooFewPoints(points));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| 10f64.powf(lo + step * i as f64))
        .collect())
}

/// Samples `objective` at log-spaced brightness values.
pub fn sweep_lambda(
    source: ParametricSource,
    eta: f64,
    q: f64,
    objective: Objective,
    log10_range: (f64, f64),
    points: usize,
) -> Result<SweepCurve> {
    let lambdas = log_spaced(log10_range, points)?;
    let values = lambdas
        .par_iter()
        .map(|&lam| objective_value(source, eta, q, objective, lam))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepCurve {
        parameter_name: "lambda".into(),
        points: lambdas.into_iter().zip(values).collect(),
    })
}

/// Optimal `objective` (over lambda, Poissonian source, default bracket) as
/// a function of the efficiency.
pub fn sweep_efficiency_optimum(
    q: f64,
    eta_grid: &[f64],
    objective: Objective,
) -> Result<SweepCurve> {
    let valid = !eta_grid.is_empty()
        && eta_grid.iter().all(|&e| e > 0.0 && e <= 1.0)
        && eta_grid.windows(2).all(|w| w[0] < w[1]);
    if !valid {
        return Err(Error::InvalidEfficiencyGrid);
    }
    let values = eta_grid
        .par_iter()
        .map(|&eta| {
            maximize_lambda(
                ParametricSource::Poissonian,
                eta,
                q,
                objective,
                DEFAULT_LOG10_BRACKET,
            )
            .map(|r| r.objective_value)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepCurve {
        parameter_name: "eta".into(),
        points: eta_grid.iter().copied().zip(values).collect(),
    })
}
