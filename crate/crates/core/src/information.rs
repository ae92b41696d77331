//! Shannon mutual information of click records, in bits.
//!
//! For a 2x2 table with marginals `a_i` and dependence `d`, every cell is
//! `a_i a_j (1 + x_ij)` with `x_ij = ±d / (a_i a_j)`, and
//!
//! ```text
//! H(A:B) = sum_ij a_i a_j [ (1 + x_ij) ln(1 + x_ij) - x_ij ] / ln 2
//! ```
//!
//! Each summand is nonnegative, so the evaluation keeps full relative
//! precision even when the arms are almost independent.

use std::f64::consts::LN_2;

use crate::detection::{self, JointClickDistribution, LinkParams};
use crate::photon_stats::PairDistribution;
use crate::{check_unit, Error, Result};

/// Largest overshoot of the entropy bound tolerated before clamping.
const CLAMP_SLACK: f64 = 1e-12;

/// `H_2(x) = -x log2 x - (1-x) log2(1-x)` with `0 log 0 = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_unit("x", x)?;
    Ok(binary_entropy_split(x, 1.0 - x))
}

/// Binary entropy from a probability and its separately computed complement.
fn binary_entropy_split(p: f64, not_p: f64) -> f64 {
    (xlnx_neg(p) + xlnx_neg(not_p)) / LN_2
}

/// `-x ln x` with the `0 ln 0 = 0` convention.
fn xlnx_neg(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

/// `(1 + x) ln(1 + x) - x` for `x >= -1`; the Bregman divergence of
/// `t ln t` between `1 + x` and `1`.
pub(crate) fn excess(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // sum_{k>=2} (-x)^k / (k (k - 1))
        let mut term = x * x;
        let mut sum = 0.0;
        for k in 2..30u32 {
            let k = f64::from(k);
            sum += term / (k * (k - 1.0));
            term *= -x;
        }
        sum
    } else if x <= -1.0 {
        1.0
    } else {
        (1.0 + x) * x.ln_1p() - x
    }
}

/// Mutual information from marginal no-click / click probabilities and the
/// dependence term, in nats.
fn mutual_information_nats(no_click: f64, click: f64, dependence: f64) -> f64 {
    if no_click <= 0.0 || click <= 0.0 || dependence == 0.0 {
        return 0.0;
    }
    let w00 = no_click * no_click;
    let w0c = no_click * click;
    let wcc = click * click;
    w00 * excess(dependence / w00)
        + 2.0 * w0c * excess(-dependence / w0c)
        + wcc * excess(dependence / wcc)
}

fn clamp_to_bound(bits: f64, no_click: f64, click: f64) -> f64 {
    let bound = binary_entropy_split(no_click, click);
    debug_assert!(
        bits <= bound + CLAMP_SLACK,
        "mutual information {bits} exceeds marginal entropy {bound}"
    );
    bits.clamp(0.0, bound)
}

/// Mutual information between Alice's and Bob's click records per slot.
///
/// The result lies in `[0, H_2(P(no click))]`.
pub fn mutual_information(joint: &JointClickDistribution) -> f64 {
    let (no_click, click) = joint.marginals();
    let bits = mutual_information_nats(no_click, click, joint.dependence()) / LN_2;
    clamp_to_bound(bits, no_click, click)
}

/// Mutual information of a Poissonian source in closed form.
///
/// With `A = (1-q) e^{-lambda eta}` and `B = A^2 e^{lambda eta^2}`:
///
/// ```text
/// H = 2 H_2(A) + B log B + 2 (A-B) log(A-B) + (1-2A+B) log(1-2A+B)
/// ```
///
/// The expression is rearranged around `B - A^2 = A^2 expm1(lambda eta^2)`
/// and `1 - A = -expm1(ln(1-q) - lambda eta)` so that no difference of
/// nearly equal numbers is formed.
pub fn mutual_information_poisson(lam: f64, eta: f64, q: f64) -> Result<f64> {
    check_mean(lam)?;
    check_unit("eta", eta)?;
    check_unit("q", q)?;
    let log_a = (-q).ln_1p() - lam * eta;
    let a = log_a.exp();
    let not_a = -log_a.exp_m1();
    if a <= 0.0 || not_a <= 0.0 {
        return Ok(0.0);
    }
    let growth = (lam * eta * eta).exp_m1();
    let nats = a * a * excess(growth)
        + 2.0 * a * not_a * excess(-a * growth / not_a)
        + not_a * not_a * excess(a * a * growth / (not_a * not_a));
    Ok(clamp_to_bound(nats / LN_2, a, not_a))
}

/// Mutual information of a thermal source, via its generating function.
pub fn mutual_information_thermal(lam: f64, eta: f64, q: f64) -> Result<f64> {
    let source = PairDistribution::thermal(lam)?;
    let link = LinkParams::new(eta, q)?;
    Ok(mutual_information(&detection::joint_click_distribution(
        &source, &link,
    )))
}

/// Bits per generated pair, `H / lambda`. Undefined for `lambda <= 0`.
pub fn info_per_generated(h_bits: f64, lam: f64) -> Result<f64> {
    if !(lam > 0.0 && lam.is_finite()) {
        return Err(Error::OutOfRange {
            name: "mean_pairs",
            value: lam,
            range: "(0, inf)",
        });
    }
    Ok(h_bits / lam)
}

/// Bits per detected pair, `H / (eta^2 lambda + q^2)`.
pub fn info_per_detected(h_bits: f64, lam: f64, eta: f64, q: f64) -> Result<f64> {
    let detected = eta * eta * lam + q * q;
    if !(detected > 0.0 && detected.is_finite()) {
        return Err(Error::OutOfRange {
            name: "eta^2 * lambda + q^2",
            value: detected,
            range: "(0, inf)",
        });
    }
    Ok(h_bits / detected)
}

/// Length of the shared string after `slots` outcome slots.
pub fn key_bits_for_slots(h_bits: f64, slots: u64) -> f64 {
    slots as f64 * h_bits
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

/// Mutual information and per-photon rates of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoReport {
    pub mutual_info_bits: f64,
    pub info_per_generated_bits: f64,
    pub info_per_detected_bits: f64,
    pub source: PairDistribution,
    pub link: LinkParams,
}

impl InfoReport {
    /// Evaluates a link. Fails if the source is dark (`lambda = 0`), since the
    /// per-pair rates are undefined there.
    pub fn evaluate(source: &PairDistribution, link: &LinkParams) -> Result<Self> {
        let joint = detection::joint_click_distribution(source, link);
        let h = mutual_information(&joint);
        let lam = source.mean_pairs();
        Ok(Self {
            mutual_info_bits: h,
            info_per_generated_bits: info_per_generated(h, lam)?,
            info_per_detected_bits: info_per_detected(h, lam, link.eta(), link.q())?,
            source: source.clone(),
            link: *link,
        })
    }

    pub fn mean_pairs(&self) -> f64 {
        self.source.mean_pairs()
    }

    pub fn key_bits(&self, slots: u64) -> f64 {
        key_bits_for_slots(self.mutual_info_bits, slots)
    }
}
