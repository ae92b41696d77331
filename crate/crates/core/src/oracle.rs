//! Independent routes to the joint click table.
//!
//! [`joint_by_truncated_sum`] sums over the pair number directly and never
//! touches the generating function. [`simulate_events`] draws pair numbers,
//! thins them through the lossy arms and adds dark counts, one slot at a time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Geometric, Poisson};
use rayon::prelude::*;

use crate::detection::JointClickDistribution;
use crate::photon_stats::{PairDistribution, Repr};
use crate::{check_unit, Error, Result};

/// Tail mass above which [`joint_by_truncated_sum`] logs a warning.
pub const TAIL_WARNING: f64 = 1e-12;

/// Trials per random stream. Streams are indexed by block, so results do not
/// depend on how blocks are spread over threads.
const BLOCK_TRIALS: u64 = 1 << 16;

/// Result of a truncated summation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedJoint {
    pub joint: JointClickDistribution,
    /// Probability mass of pair numbers above the cut-off.
    pub tail_mass: f64,
}

/// Joint click table from direct sums over `m = 0..=max_m`.
///
/// The no-dark-count cells are renormalised by the captured mass, the
/// neglected mass is reported as `tail_mass`, then dark counts are applied.
pub fn joint_by_truncated_sum(
    dist: &PairDistribution,
    eta: f64,
    q: f64,
    max_m: u64,
) -> Result<TruncatedJoint> {
    check_unit("eta", eta)?;
    check_unit("q", q)?;
    if max_m < 1 {
        return Err(Error::OutOfRange {
            name: "max_m",
            value: max_m as f64,
            range: "[1, inf)",
        });
    }
    let log_survive = (-eta).ln_1p();
    let (mut captured, mut s00, mut s0c, mut scc) = (0.0, 0.0, 0.0, 0.0);
    for m in 0..=max_m {
        let p = dist.pair_probability(m);
        if p == 0.0 {
            continue;
        }
        // chance that all m photons of one arm are lost, and its complement
        let (lost, seen) = if m == 0 {
            (1.0, 0.0)
        } else if eta == 1.0 {
            (0.0, 1.0)
        } else {
            let x = m as f64 * log_survive;
            (x.exp(), -x.exp_m1())
        };
        captured += p;
        s00 += p * lost * lost;
        s0c += p * lost * seen;
        scc += p * seen * seen;
    }
    let tail_mass = (1.0 - captured).max(0.0);
    if tail_mass > TAIL_WARNING {
        log::warn!("truncated sum at m = {max_m} leaves tail mass {tail_mass:e}");
    }
    let (p00, p0c, pcc) = (s00 / captured, s0c / captured, scc / captured);

    let keep = 1.0 - q;
    let joint = JointClickDistribution::new(
        keep * keep * p00,
        keep * p0c + keep * q * p00,
        pcc + 2.0 * q * p0c + q * q * p00,
    )?;
    Ok(TruncatedJoint { joint, tail_mass })
}

/// Single-sided click probability without dark counts from the derivative
/// series of the generating function at `xi = 1`:
///
/// ```text
/// pi(c,0) = sum_{l>=1} (1/l!) (-d/dxi)^l M_loss(1, xi) |_{xi=1}
///         = sum_m P(m) (1-eta)^m sum_{l=1}^{m} C(m,l) eta^l (1-eta)^(m-l)
/// ```
///
/// Summed term by term over `m = 0..=max_m`.
pub fn single_click_by_derivative_series(dist: &PairDistribution, eta: f64, max_m: u64) -> Result<f64> {
    check_unit("eta", eta)?;
    let lost = 1.0 - eta;
    let mut total = 0.0;
    for m in 1..=max_m {
        let p = dist.pair_probability(m);
        if p == 0.0 {
            continue;
        }
        let mut binom = 1.0;
        let mut series = 0.0;
        for l in 1..=m {
            binom *= (m - l + 1) as f64 / l as f64;
            series += binom * eta.powi(l as i32) * lost.powi((m - l) as i32);
        }
        total += p * lost.powi(m as i32) * series;
    }
    Ok(total)
}

/// Monte-Carlo tallies of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub n00: u64,
    pub n0c: u64,
    pub nc0: u64,
    pub ncc: u64,
    pub trials: u64,
    pub seed: u64,
    /// Relative frequencies, single-sided counts averaged over both arms.
    pub empirical: JointClickDistribution,
}

impl SimulationReport {
    /// Counts as `[[n00, n0c], [nc0, ncc]]`.
    pub fn counts(&self) -> [[u64; 2]; 2] {
        [[self.n00, self.n0c], [self.nc0, self.ncc]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationOptions {
    /// Worker threads; 1 runs on the calling thread, 0 uses rayon's default.
    pub jobs: usize,
    /// Thin each photon with its own Bernoulli draw instead of drawing the
    /// arm's aggregate detection probability `1 - (1-eta)^m` once.
    pub per_photon: bool,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            per_photon: false,
        }
    }
}

enum PairSampler {
    Fixed(u64),
    Poisson(Poisson<f64>),
    Geometric(Geometric),
    Weighted(WeightedIndex<f64>),
}

impl PairSampler {
    fn new(dist: &PairDistribution) -> Result<Self> {
        let sampler = match dist.repr() {
            Repr::Poissonian(lam) | Repr::Thermal(lam) if *lam == 0.0 => PairSampler::Fixed(0),
            Repr::Poissonian(lam) => PairSampler::Poisson(
                Poisson::new(*lam).map_err(|e| Error::Simulation(e.to_string()))?,
            ),
            // P(m) = (1-p)^m p with p = 1/(1+lambda)
            Repr::Thermal(lam) => PairSampler::Geometric(
                Geometric::new(1.0 / (1.0 + lam)).map_err(|e| Error::Simulation(e.to_string()))?,
            ),
            Repr::Empirical { probs, .. } => PairSampler::Weighted(
                WeightedIndex::new(probs).map_err(|e| Error::Simulation(e.to_string()))?,
            ),
        };
        Ok(sampler)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            PairSampler::Fixed(m) => *m,
            PairSampler::Poisson(d) => d.sample(rng) as u64,
            PairSampler::Geometric(d) => d.sample(rng),
            PairSampler::Weighted(d) => d.sample(rng) as u64,
        }
    }
}

struct Arm {
    eta: f64,
    q: f64,
    per_photon: bool,
}

impl Arm {
    fn clicks<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> bool {
        let signal = if m == 0 || self.eta == 0.0 {
            false
        } else if self.per_photon {
            (0..m).any(|_| rng.random::<f64>() < self.eta)
        } else {
            let detect = -(m as f64 * (-self.eta).ln_1p()).exp_m1();
            rng.random::<f64>() < detect
        };
        let dark = self.q > 0.0 && rng.random::<f64>() < self.q;
        signal || dark
    }
}

fn run_block(sampler: &PairSampler, arm: &Arm, seed: u64, block: u64, trials: u64) -> [u64; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    let mut counts = [0u64; 4];
    for _ in 0..trials {
        let m = sampler.sample(&mut rng);
        let alice = arm.clicks(m, &mut rng);
        let bob = arm.clicks(m, &mut rng);
        counts[usize::from(alice) * 2 + usize::from(bob)] += 1;
    }
    counts
}

/// Simulates `trials` slots with a fixed seed on the calling thread.
pub fn simulate_events(
    dist: &PairDistribution,
    eta: f64,
    q: f64,
    trials: u64,
    seed: u64,
) -> Result<SimulationReport> {
    simulate_events_with(dist, eta, q, trials, seed, SimulationOptions::default())
}

/// Simulates `trials` slots. The counts depend only on the seed, never on
/// the number of worker threads.
pub fn simulate_events_with(
    dist: &PairDistribution,
    eta: f64,
    q: f64,
    trials: u64,
    seed: u64,
    options: SimulationOptions,
) -> Result<SimulationReport> {
    check_unit("eta", eta)?;
    check_unit("q", q)?;
    if trials == 0 {
        return Err(Error::OutOfRange {
            name: "trials",
            value: 0.0,
            range: "[1, inf)",
        });
    }
    let sampler = PairSampler::new(dist)?;
    let arm = Arm {
        eta,
        q,
        per_photon: options.per_photon,
    };
    let blocks = trials.div_ceil(BLOCK_TRIALS);
    let block_len = |b: u64| BLOCK_TRIALS.min(trials - b * BLOCK_TRIALS);
    let merge = |a: [u64; 4], b: [u64; 4]| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]];

    let counts = if options.jobs == 1 {
        (0..blocks)
            .map(|b| run_block(&sampler, &arm, seed, b, block_len(b)))
            .fold([0; 4], merge)
    } else {
        let run = || {
            (0..blocks)
                .into_par_iter()
                .map(|b| run_block(&sampler, &arm, seed, b, block_len(b)))
                .reduce(|| [0; 4], merge)
        };
        if options.jobs == 0 {
            run()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(options.jobs)
                .build()
                .map_err(|e| Error::Simulation(e.to_string()))?
                .install(run)
        }
    };

    let [n00, n0c, nc0, ncc] = counts;
    let total = trials as f64;
    let empirical = JointClickDistribution::new(
        n00 as f64 / total,
        (n0c + nc0) as f64 / (2.0 * total),
        ncc as f64 / total,
    )?;
    Ok(SimulationReport {
        n00,
        n0c,
        nc0,
        ncc,
        trials,
        seed,
        empirical,
    })
}

/// Largest deviation, in binomial standard deviations, between simulated
/// counts and an analytic table. A cell with zero expected probability
/// counts as infinitely far off unless its count is zero too.
pub fn max_sigma_deviation(report: &SimulationReport, analytic: &JointClickDistribution) -> f64 {
    let n = report.trials as f64;
    let expected = analytic.cells();
    let counts = report.counts();
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let p = expected[i][j];
            let diff = (counts[i][j] as f64 - n * p).abs();
            let sigma = (n * p * (1.0 - p)).sqrt();
            let z = if sigma > 0.0 {
                diff / sigma
            } else if diff < 0.5 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{joint_click_distribution, LinkParams};
    use approx::assert_relative_eq;
    use std::f64::consts::LN_2;

    #[test]
    fn truncated_sum_examples() {
        let d = PairDistribution::poissonian(1.0).unwrap();
        let t = joint_by_truncated_sum(&d, 1.0, 0.0, 100).unwrap();
        assert_eq!(t.joint.p0c(), 0.0);
        assert_relative_eq!(t.joint.p00(), (-1.0f64).exp(), max_relative = 1e-14);
        assert!(t.tail_mass < 1e-15);

        let t = joint_by_truncated_sum(&d, 0.8, 3.9e-8, 60).unwrap();
        let analytic = joint_click_distribution(&d, &LinkParams::new(0.8, 3.9e-8).unwrap());
        for (row_a, row_b) in t.joint.cells().iter().zip(analytic.cells()) {
            for (a, b) in row_a.iter().zip(row_b) {
                assert!((a - b).abs() < 1e-12);
            }
        }

        let half = PairDistribution::empirical(vec![0.5, 0.5]).unwrap();
        let t = joint_by_truncated_sum(&half, 0.5, 0.0, 1).unwrap();
        assert_relative_eq!(t.joint.pcc(), 0.125, max_relative = 1e-15);
        assert_eq!(t.tail_mass, 0.0);
    }

    #[test]
    fn truncated_sum_reports_tail() {
        let d = PairDistribution::poissonian(10.0).unwrap();
        let t = joint_by_truncated_sum(&d, 0.5, 0.0, 5).unwrap();
        assert!(t.tail_mass > 0.9);
        assert!((t.joint.total() - 1.0).abs() < 1e-12);
        assert!(joint_by_truncated_sum(&d, 0.5, 0.0, 0).is_err());
        assert!(joint_by_truncated_sum(&d, 1.5, 0.0, 5).is_err());
    }

    #[test]
    fn derivative_series_small_case() {
        // m = 2 only: (1-eta)^2 [2 eta (1-eta) + eta^2]
        let d = PairDistribution::empirical(vec![0.0, 0.0, 1.0]).unwrap();
        let eta: f64 = 0.3;
        let expect = 0.49 * (2.0 * 0.3 * 0.7 + 0.09);
        assert_relative_eq!(single_click_by_derivative_series(&d, eta, 2).unwrap(), expect, max_relative = 1e-14);
        assert_eq!(single_click_by_derivative_series(&d, 1.0, 2).unwrap(), 0.0);
    }

    #[test]
    fn blind_detectors_never_click() {
        let d = PairDistribution::thermal(3.0).unwrap();
        let r = simulate_events(&d, 0.0, 0.0, 1_000_000, 7).unwrap();
        assert_eq!(r.n00, r.trials);
    }

    #[test]
    fn lossless_arms_always_agree() {
        let d = PairDistribution::poissonian(LN_2).unwrap();
        let n = 1_000_000;
        let r = simulate_events(&d, 1.0, 0.0, n, 11).unwrap();
        assert_eq!((r.n0c, r.nc0), (0, 0));
        let sigma = (0.25 / n as f64).sqrt();
        assert!((r.n00 as f64 / n as f64 - 0.5).abs() < 5.0 * sigma);
    }

    #[test]
    fn simulation_is_reproducible_and_thread_independent() {
        let d = PairDistribution::poissonian(1.0).unwrap();
        let trials = 300_001;
        let one = simulate_events(&d, 0.8, 1e-3, trials, 42).unwrap();
        let again = simulate_events(&d, 0.8, 1e-3, trials, 42).unwrap();
        assert_eq!(one, again);
        for jobs in [0, 2, 3] {
            let opts = SimulationOptions { jobs, per_photon: false };
            assert_eq!(simulate_events_with(&d, 0.8, 1e-3, trials, 42, opts).unwrap(), one);
        }
        assert_ne!(simulate_events(&d, 0.8, 1e-3, trials, 43).unwrap(), one);
        assert_eq!(one.n00 + one.n0c + one.nc0 + one.ncc, trials);
        assert!(simulate_events(&d, 0.8, 1e-3, 0, 42).is_err());
    }

    #[test]
    fn per_photon_thinning_matches_aggregate() {
        for d in [
            PairDistribution::thermal(1.5).unwrap(),
            PairDistribution::empirical(vec![0.2, 0.3, 0.1, 0.4]).unwrap(),
        ] {
            let analytic = joint_click_distribution(&d, &LinkParams::new(0.6, 0.01).unwrap());
            for per_photon in [false, true] {
                let opts = SimulationOptions { jobs: 0, per_photon };
                let r = simulate_events_with(&d, 0.6, 0.01, 1_000_000, 5, opts).unwrap();
                let z = max_sigma_deviation(&r, &analytic);
                assert!(z < 5.0, "{d} per_photon={per_photon}: {z}");
            }
        }
    }

    #[test]
    fn sigma_deviation_flags_impossible_counts() {
        let d = PairDistribution::poissonian(1.0).unwrap();
        let r = simulate_events(&d, 0.5, 0.0, 10_000, 1).unwrap();
        let perfect = JointClickDistribution::new(0.5, 0.0, 0.5).unwrap();
        assert!(max_sigma_deviation(&r, &perfect).is_infinite());
    }
}
