//! Analytic results checked against the independent oracles.

use std::fmt::Write as _;

use pairlink::detection::{click_probabilities_no_dark, joint_click_distribution};
use pairlink::information::{mutual_information, mutual_information_poisson};
use pairlink::oracle::{
    joint_by_truncated_sum, max_sigma_deviation, simulate_events_with,
    single_click_by_derivative_series, SimulationOptions,
};
use pairlink::{LinkParams, PairDistribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::CliError;

pub const CLOSED_FORM_TOLERANCE: f64 = 1e-12;
pub const TRUNCATED_SUM_TOLERANCE: f64 = 1e-12;
pub const DERIVATIVE_SERIES_TOLERANCE: f64 = 1e-10;
pub const MONTE_CARLO_SIGMAS: f64 = 5.0;
pub const DEFAULT_TRIALS: u64 = 10_000_000;
pub const DEFAULT_SEED: u64 = 2024;
const EMPIRICAL_CASES: usize = 20;
const MAX_LISTED: usize = 10;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub lambdas: Option<Vec<f64>>,
    pub etas: Option<Vec<f64>>,
    pub qs: Option<Vec<f64>>,
    pub trials: u64,
    pub seed: u64,
    pub tolerance_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            lambdas: None,
            etas: None,
            qs: None,
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            tolerance_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub text: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    label: &'static str,
    lam: f64,
    eta: f64,
    q: f64,
}

struct Outcome {
    cell: Cell,
    error: f64,
}

struct Check {
    name: &'static str,
    unit: &'static str,
    tolerance: f64,
    outcomes: Vec<Outcome>,
}

impl Check {
    fn render(&self, out: &mut String) -> bool {
        let failures: Vec<&Outcome> = self
            .outcomes
            .iter()
            .filter(|o| o.error.is_nan() || o.error > self.tolerance)
            .collect();
        let worst = self
            .outcomes
            .iter()
            .map(|o| o.error)
            .fold(0.0, |a: f64, b| if b.is_nan() || b > a { b } else { a });
        let status = if failures.is_empty() { "PASS" } else { "FAIL" };
        let _ = writeln!(
            out,
            "{status} {:<26} cells {:>4}  worst {worst:.3e}  tolerance {:.3e} {}",
            self.name,
            self.outcomes.len(),
            self.tolerance,
            self.unit
        );
        for o in failures.iter().take(MAX_LISTED) {
            let c = o.cell;
            let _ = writeln!(
                out,
                "     {:<11}lambda={:e} eta={} q={:e}: {:.3e}",
                c.label, c.lam, c.eta, c.q, o.error
            );
        }
        if failures.len() > MAX_LISTED {
            let _ = writeln!(out, "     ... and {} more", failures.len() - MAX_LISTED);
        }
        failures.is_empty()
    }
}

fn grid(values: &Option<Vec<f64>>, default: &[f64]) -> Vec<f64> {
    values.clone().unwrap_or_else(|| default.to_vec())
}

fn cells(label: &'static str, lambdas: &[f64], etas: &[f64], qs: &[f64]) -> Vec<Cell> {
    let mut v = Vec::with_capacity(lambdas.len() * etas.len() * qs.len());
    for &lam in lambdas {
        for &eta in etas {
            for &q in qs {
                v.push(Cell { label, lam, eta, q });
            }
        }
    }
    v
}

fn closed_form(cells: &[Cell]) -> Result<Vec<Outcome>, CliError> {
    cells
        .par_iter()
        .map(|&cell| {
            let closed = mutual_information_poisson(cell.lam, cell.eta, cell.q)?;
            let joint = joint_click_distribution(
                &PairDistribution::poissonian(cell.lam)?,
                &LinkParams::new(cell.eta, cell.q)?,
            );
            let generic = mutual_information(&joint);
            let scale = closed.abs().max(generic.abs());
            let error = if scale == 0.0 { 0.0 } else { (closed - generic).abs() / scale };
            Ok(Outcome { cell, error })
        })
        .collect()
}

fn truncated_sum(cells: &[Cell]) -> Result<Vec<Outcome>, CliError> {
    cells
        .par_iter()
        .map(|&cell| {
            let dist = match cell.label {
                "thermal" => PairDistribution::thermal(cell.lam)?,
                _ => PairDistribution::poissonian(cell.lam)?,
            };
            let max_m = dist.truncation_len(1e-16) as u64;
            let oracle = joint_by_truncated_sum(&dist, cell.eta, cell.q, max_m)?;
            let analytic = joint_click_distribution(&dist, &LinkParams::new(cell.eta, cell.q)?);
            let error = oracle
                .joint
                .cells()
                .iter()
                .flatten()
                .zip(analytic.cells().iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok(Outcome { cell, error })
        })
        .collect()
}

fn random_empirical(rng: &mut ChaCha8Rng) -> Result<PairDistribution, CliError> {
    let len = rng.random_range(2..=50);
    let raw: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    Ok(PairDistribution::empirical(raw.into_iter().map(|p| p / total).collect::<Vec<_>>())?)
}

fn derivative_series(seed: u64) -> Result<Vec<Outcome>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcomes = Vec::new();
    for _ in 0..EMPIRICAL_CASES {
        let dist = random_empirical(&mut rng)?;
        let max_m = dist.probabilities().map_or(0, <[f64]>::len) as u64;
        for i in 1..=10 {
            let eta = i as f64 / 10.0;
            let series = single_click_by_derivative_series(&dist, eta, max_m)?;
            let mgf = dist.mgf_lossy(eta, 1.0, 0.0)? - dist.mgf_lossy(eta, 1.0, 1.0)?;
            let pipeline = click_probabilities_no_dark(&dist, eta)?.p0c();
            outcomes.push(Outcome {
                cell: Cell {
                    label: "empirical",
                    lam: dist.mean_pairs(),
                    eta,
                    q: 0.0,
                },
                error: (series - mgf).abs().max((series - pipeline).abs()),
            });
        }
    }
    Ok(outcomes)
}

fn monte_carlo(cells: &[Cell], trials: u64, seed: u64) -> Result<Vec<Outcome>, CliError> {
    let options = SimulationOptions {
        jobs: 0,
        per_photon: false,
    };
    let mut outcomes = Vec::with_capacity(cells.len());
    for (i, &cell) in cells.iter().enumerate() {
        let dist = PairDistribution::poissonian(cell.lam)?;
        let analytic = joint_click_distribution(&dist, &LinkParams::new(cell.eta, cell.q)?);
        let report = simulate_events_with(
            &dist,
            cell.eta,
            cell.q,
            trials,
            seed.wrapping_add(i as u64),
            options,
        )?;
        outcomes.push(Outcome {
            cell,
            error: max_sigma_deviation(&report, &analytic),
        });
    }
    Ok(outcomes)
}

/// Runs every check. Grid overrides apply to the two deterministic grid
/// checks; the Monte-Carlo cells stay fixed.
pub fn run(options: &VerifyOptions) -> Result<VerifyReport, CliError> {
    let scale = options.tolerance_scale;
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(CliError::Usage(format!(
            "--tolerance-scale must be a nonnegative number, got {scale}"
        )));
    }
    if options.trials == 0 {
        return Err(CliError::Usage("--trials must be positive".into()));
    }
    let default_etas: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
    let lambdas = grid(&options.lambdas, &[1e-6, 1e-3, 0.1, 1.0, 5.0, 10.0]);
    let etas = grid(&options.etas, &default_etas);
    let qs = grid(&options.qs, &[0.0, 3.9e-8, 1e-3, 0.1]);
    let closed_cells = cells("", &lambdas, &etas, &qs);

    let t_lambdas = grid(&options.lambdas, &[0.01, 1.0, 10.0]);
    let t_etas = grid(&options.etas, &[0.4, 0.8]);
    let t_qs = grid(&options.qs, &[0.0, 3.9e-8]);
    let mut sum_cells = cells("poissonian", &t_lambdas, &t_etas, &t_qs);
    sum_cells.extend(cells("thermal", &t_lambdas, &t_etas, &t_qs));

    let mc_cells = cells("poissonian", &[1.0], &[0.4, 0.8], &[0.0, 1e-3]);

    let checks = [
        Check {
            name: "closed form vs pipeline",
            unit: "relative",
            tolerance: CLOSED_FORM_TOLERANCE * scale,
            outcomes: closed_form(&closed_cells)?,
        },
        Check {
            name: "truncated sum vs pipeline",
            unit: "absolute per cell",
            tolerance: TRUNCATED_SUM_TOLERANCE * scale,
            outcomes: truncated_sum(&sum_cells)?,
        },
        Check {
            name: "derivative series",
            unit: "absolute",
            tolerance: DERIVATIVE_SERIES_TOLERANCE * scale,
            outcomes: derivative_series(options.seed)?,
        },
        Check {
            name: "monte carlo",
            unit: "sigma",
            tolerance: MONTE_CARLO_SIGMAS * scale,
            outcomes: monte_carlo(&mc_cells, options.trials, options.seed)?,
        },
    ];

    let mut text = String::new();
    let _ = writeln!(
        text,
        "seed {}  trials {}  tolerance scale {scale}",
        options.seed, options.trials
    );
    let mut passed = true;
    for check in &checks {
        passed &= check.render(&mut text);
    }
    let _ = writeln!(text, "{}", if passed { "all checks passed" } else { "verification FAILED" });
    Ok(VerifyReport { text, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(scale: f64) -> VerifyOptions {
        VerifyOptions {
            trials: 20_000,
            tolerance_scale: scale,
            ..Default::default()
        }
    }

    #[test]
    fn passes_and_is_reproducible() {
        let a = run(&quick(1.0)).unwrap();
        assert!(a.passed, "{}", a.text);
        let b = run(&quick(1.0)).unwrap();
        assert_eq!(a.text, b.text);
    }

    #[test]
    fn zero_tolerance_fails_and_lists_cells() {
        let r = run(&quick(0.0)).unwrap();
        assert!(!r.passed);
        assert!(r.text.contains("FAIL monte carlo"), "{}", r.text);
        assert!(r.text.contains("lambda=1e0 eta=0.8"), "{}", r.text);
    }

    #[test]
    fn grid_overrides_apply() {
        let opts = VerifyOptions {
            lambdas: Some(vec![0.5]),
            etas: Some(vec![0.3]),
            qs: Some(vec![1e-4]),
            ..quick(1.0)
        };
        let r = run(&opts).unwrap();
        assert!(r.passed);
        assert!(r.text.contains("closed form vs pipeline    cells    1 "), "{}", r.text);
        assert!(run(&VerifyOptions { tolerance_scale: -1.0, ..quick(1.0) }).is_err());
    }
}
