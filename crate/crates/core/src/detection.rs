//! Joint click statistics of two threshold detectors.
//!
//! Losses act on every photon independently, so the no-click probabilities
//! follow from the lossy generating function:
//!
//! ```text
//! pi(0,0) = M(1,1)
//! pi(0,c) = pi(c,0) = M(1,0) - M(1,1)
//! pi(c,c) = 1 - 2 M(1,0) + M(1,1)
//! ```
//!
//! Dark counts then fire each detector independently with probability `q`.
//!
//! Alongside the four cells a [`JointClickDistribution`] carries the
//! dependence `d = p00 pcc - p0c pc0`, which equals `p00 - P_A(0) P_B(0)`.
//! Producers compute it in closed form so that nearly independent tables
//! still yield accurate mutual information.

use crate::photon_stats::{PairDistribution, Repr};
use crate::{check_unit, Error, Result};

/// Tolerance on the normalisation of a joint click table.
pub const JOINT_TOLERANCE: f64 = 1e-12;

/// Per-arm link parameters, shared by both arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    eta: f64,
    q: f64,
}

impl LinkParams {
    /// `eta` is the probability that an emitted photon is detected, `q` the
    /// probability of a dark count per outcome slot.
    pub fn new(eta: f64, q: f64) -> Result<Self> {
        Ok(Self {
            eta: check_unit("eta", eta)?,
            q: check_unit("q", q)?,
        })
    }

    /// Builds the link from detector efficiency, transmission efficiency,
    /// dark-count rate (1/s) and slot width (s).
    pub fn from_components(
        detector_efficiency: f64,
        transmission_efficiency: f64,
        dark_rate: f64,
        bin_width: f64,
    ) -> Result<Self> {
        let eta_d = check_unit("detector_efficiency", detector_efficiency)?;
        let eta_l = check_unit("transmission_efficiency", transmission_efficiency)?;
        Self::new(eta_d * eta_l, dark_count_probability(dark_rate, bin_width)?)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// Click statistics of one slot. Index order is (Alice, Bob) with `0` for no
/// click and `c` for a click. The two arms are identical so `p0c == pc0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointClickDistribution {
    p00: f64,
    p0c: f64,
    pcc: f64,
    dependence: f64,
}

impl JointClickDistribution {
    /// Builds a table from its cells, `p0c` being the probability of each
    /// single-sided click.
    pub fn new(p00: f64, p0c: f64, pcc: f64) -> Result<Self> {
        check_unit("p00", p00)?;
        check_unit("p0c", p0c)?;
        check_unit("pcc", pcc)?;
        let total = p00 + 2.0 * p0c + pcc;
        if (total - 1.0).abs() > JOINT_TOLERANCE {
            return Err(Error::JointNotNormalized(total));
        }
        Ok(Self {
            p00,
            p0c,
            pcc,
            dependence: difference_of_products(p00, pcc, p0c, p0c),
        })
    }

    /// Producers that know the dependence term analytically.
    pub(crate) fn with_dependence(p00: f64, p0c: f64, pcc: f64, dependence: f64) -> Self {
        let joint = Self {
            p00: p00.clamp(0.0, 1.0),
            p0c: p0c.clamp(0.0, 1.0),
            pcc: pcc.clamp(0.0, 1.0),
            dependence,
        };
        debug_assert!(
            (joint.total() - 1.0).abs() <= JOINT_TOLERANCE,
            "joint sums to {}",
            joint.total()
        );
        joint
    }

    pub fn p00(&self) -> f64 {
        self.p00
    }

    pub fn p0c(&self) -> f64 {
        self.p0c
    }

    pub fn pc0(&self) -> f64 {
        self.p0c
    }

    pub fn pcc(&self) -> f64 {
        self.pcc
    }

    /// `p00 pcc - p0c pc0`; zero for independent arms.
    pub fn dependence(&self) -> f64 {
        self.dependence
    }

    pub fn total(&self) -> f64 {
        self.p00 + 2.0 * self.p0c + self.pcc
    }

    /// `(P(no click), P(click))` for either arm.
    pub fn marginals(&self) -> (f64, f64) {
        (self.p00 + self.p0c, self.p0c + self.pcc)
    }

    /// Cells as `[[p00, p0c], [pc0, pcc]]`.
    pub fn cells(&self) -> [[f64; 2]; 2] {
        [[self.p00, self.p0c], [self.p0c, self.pcc]]
    }
}

/// `a*b - c*d` with an error-free product correction.
fn difference_of_products(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let cd = c * d;
    let err = (-c).mul_add(d, cd);
    let dop = a.mul_add(b, -cd);
    dop + err
}

/// Click probability of a lossless, noiseless threshold detector: `1 - P(0)`.
pub fn ideal_click_probability(dist: &PairDistribution) -> f64 {
    match dist.repr() {
        Repr::Poissonian(lam) => -(-lam).exp_m1(),
        Repr::Thermal(lam) => lam / (1.0 + lam),
        Repr::Empirical { probs, .. } => probs[1..].iter().sum(),
    }
}

/// Dark-count probability per slot for a detector with the given dark-count
/// rate (counts per second) and slot width (seconds).
pub fn dark_count_probability(rate: f64, bin_width: f64) -> Result<f64> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::OutOfRange {
            name: "dark_rate",
            value: rate,
            range: "[0, inf)",
        });
    }
    if !(bin_width.is_finite() && bin_width >= 0.0) {
        return Err(Error::OutOfRange {
            name: "bin_width",
            value: bin_width,
            range: "[0, inf)",
        });
    }
    let q = rate * bin_width;
    if q > 1.0 {
        return Err(Error::OutOfRange {
            name: "dark_rate * bin_width",
            value: q,
            range: "[0, 1]",
        });
    }
    Ok(q)
}

/// Folds crosstalk into effective link parameters.
///
/// A fraction `crosstalk_fraction` of the signal leaves the mode, reducing the
/// efficiency, and the same fraction of an equally bright neighbouring mode
/// (mean `lam` pairs) leaks in, adding `crosstalk_fraction * eta * lam` to the
/// dark-count probability (capped at 1). This is a modelling choice: only the
/// direction of both corrections is prescribed by the underlying physics.
pub fn fold_crosstalk(eta: f64, q: f64, crosstalk_fraction: f64, lam: f64) -> Result<LinkParams> {
    let base = LinkParams::new(eta, q)?;
    let fraction = check_unit("crosstalk_fraction", crosstalk_fraction)?;
    if !(lam.is_finite() && lam >= 0.0) {
        return Err(Error::OutOfRange {
            name: "mean_pairs",
            value: lam,
            range: "[0, inf)",
        });
    }
    LinkParams::new(
        base.eta * (1.0 - fraction),
        (base.q + fraction * base.eta * lam).min(1.0),
    )
}

/// Joint click table for lossy arms without dark counts.
pub fn click_probabilities_no_dark(
    dist: &PairDistribution,
    eta: f64,
) -> Result<JointClickDistribution> {
    check_unit("eta", eta)?;
    let joint = match dist.repr() {
        Repr::Poissonian(lam) => {
            let s = lam * eta;
            let both_dark = (-s * (2.0 - eta)).exp();
            let one_dark = (-s).exp();
            let one_click = -(-s).exp_m1();
            let dependence = one_dark * one_dark * (s * eta).exp_m1();
            JointClickDistribution::with_dependence(
                both_dark,
                one_dark * -(-s * (1.0 - eta)).exp_m1(),
                one_click * one_click + dependence,
                dependence,
            )
        }
        Repr::Thermal(lam) => {
            // M(1,0) = 1/(1+s), M(1,1) = 1/(1+t)
            let s = lam * eta;
            let t = s * (2.0 - eta);
            let one_dark = 1.0 / (1.0 + s);
            let both_dark = 1.0 / (1.0 + t);
            let one_click = s * one_dark;
            let dependence = eta * eta * lam * (1.0 + lam) * both_dark * one_dark * one_dark;
            JointClickDistribution::with_dependence(
                both_dark,
                s * (1.0 - eta) * one_dark * both_dark,
                one_click * one_click + dependence,
                dependence,
            )
        }
        Repr::Empirical { probs, support } => {
            let one_dark = dist.mgf_lossy(eta, 1.0, 0.0)?;
            let both_dark = dist.mgf_lossy(eta, 1.0, 1.0)?;
            // M(1,1) - M(1,0)^2 is the variance of (1-eta)^m.
            let survive = 1.0 - eta;
            let mut y = 1.0;
            let mut dependence = 0.0;
            for p in &probs[..*support] {
                let dev = y - one_dark;
                dependence += p * dev * dev;
                y *= survive;
            }
            let one_click = 1.0 - one_dark;
            JointClickDistribution::with_dependence(
                both_dark,
                one_dark - both_dark,
                one_click * one_click + dependence,
                dependence,
            )
        }
    };
    Ok(joint)
}

/// Adds independent dark counts of probability `q` to both detectors.
pub fn apply_dark_counts(pi: &JointClickDistribution, q: f64) -> Result<JointClickDistribution> {
    check_unit("q", q)?;
    let keep = 1.0 - q;
    Ok(JointClickDistribution::with_dependence(
        keep * keep * pi.p00,
        keep * (pi.p0c + q * pi.p00),
        pi.pcc + 2.0 * q * pi.p0c + q * q * pi.p00,
        keep * keep * pi.dependence,
    ))
}

/// Joint click table of a link fed by `dist`.
pub fn joint_click_distribution(dist: &PairDistribution, link: &LinkParams) -> JointClickDistribution {
    let pi = click_probabilities_no_dark(dist, link.eta).expect("LinkParams holds a valid eta");
    apply_dark_counts(&pi, link.q).expect("LinkParams holds a valid q")
}

/// `(P(no click), P(click))` of Alice's detector; Bob's are identical.
pub fn marginal_click_probabilities(joint: &JointClickDistribution) -> (f64, f64) {
    let no_click = joint.p00 + joint.p0c;
    (no_click, 1.0 - no_click)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const LAMBDAS: [f64; 6] = [1e-6, 1e-3, 0.1, 1.0, 5.0, 10.0];
    const QS: [f64; 4] = [0.0, 3.9e-8, 1e-3, 0.1];

    fn etas() -> impl Iterator<Item = f64> {
        (1..=20).map(|i| i as f64 * 0.05)
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs())
    }

    #[test]
    fn ideal_click_examples() {
        let lam: f64 = 0.37;
        assert_relative_eq!(
            ideal_click_probability(&PairDistribution::poissonian(lam).unwrap()),
            1.0 - (-lam).exp(),
            max_relative = 1e-15
        );
        assert_eq!(
            ideal_click_probability(&PairDistribution::empirical(vec![1.0]).unwrap()),
            0.0
        );
        assert_eq!(
            ideal_click_probability(&PairDistribution::thermal(1.0).unwrap()),
            0.5
        );
    }

    #[test]
    fn ideal_click_is_lossless_noiseless_joint() {
        for d in [
            PairDistribution::poissonian(0.8).unwrap(),
            PairDistribution::thermal(0.8).unwrap(),
            PairDistribution::empirical(vec![0.2, 0.3, 0.5]).unwrap(),
        ] {
            let joint = joint_click_distribution(&d, &LinkParams::new(1.0, 0.0).unwrap());
            assert_relative_eq!(joint.pcc(), ideal_click_probability(&d), max_relative = 1e-14);
        }
    }

    #[test]
    fn dark_count_examples() {
        assert_relative_eq!(
            dark_count_probability(300.0, 130e-12).unwrap(),
            3.9e-8,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            dark_count_probability(300.0, 1e-9).unwrap(),
            3e-7,
            max_relative = 1e-15
        );
        assert_eq!(dark_count_probability(0.0, 5.0).unwrap(), 0.0);
        assert!(dark_count_probability(2.0, 1.0).is_err());
        assert!(dark_count_probability(-1.0, 1.0).is_err());
        assert!(dark_count_probability(1.0, -1.0).is_err());
    }

    #[test]
    fn link_from_components() {
        let link = LinkParams::from_components(0.5, 0.8, 300.0, 1e-9).unwrap();
        assert_relative_eq!(link.eta(), 0.4);
        assert_relative_eq!(link.q(), 3e-7, max_relative = 1e-15);
        let err = LinkParams::from_components(1.2, 1.0, 0.0, 1e-9).unwrap_err();
        assert!(err.to_string().contains("detector_efficiency"));
        assert!(LinkParams::new(0.5, 1.5).is_err());
    }

    #[test]
    fn crosstalk_examples() {
        assert_eq!(
            fold_crosstalk(0.8, 1e-7, 0.0, 3.0).unwrap(),
            LinkParams::new(0.8, 1e-7).unwrap()
        );
        let folded = fold_crosstalk(0.8, 0.0, 0.1, 0.01).unwrap();
        assert_relative_eq!(folded.eta(), 0.72, max_relative = 1e-15);
        assert_relative_eq!(folded.q(), 8e-4, max_relative = 1e-14);
        let total = fold_crosstalk(1.0, 0.0, 1.0, 0.5).unwrap();
        assert_eq!((total.eta(), total.q()), (0.0, 0.5));
        assert_eq!(fold_crosstalk(1.0, 0.5, 1.0, 50.0).unwrap().q(), 1.0);
        assert!(fold_crosstalk(0.8, 0.0, 1.5, 0.1).is_err());
        assert!(fold_crosstalk(0.8, 0.0, 0.5, -0.1).is_err());
    }

    #[test]
    fn no_dark_examples() {
        let lam: f64 = 0.9;
        let lossless = click_probabilities_no_dark(&PairDistribution::poissonian(lam).unwrap(), 1.0).unwrap();
        assert_eq!(lossless.p0c(), 0.0);
        assert_relative_eq!(lossless.p00(), (-lam).exp(), max_relative = 1e-15);
        assert_relative_eq!(lossless.pcc(), 1.0 - (-lam).exp(), max_relative = 1e-15);

        let lossy = click_probabilities_no_dark(&PairDistribution::poissonian(1.0).unwrap(), 0.8).unwrap();
        assert_relative_eq!(lossy.p00(), (-0.96f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(lossy.p0c(), (-0.8f64).exp() - (-0.96f64).exp(), max_relative = 1e-13);
        // oracle: direct sums over m with (1-eta)^m
        let d = PairDistribution::poissonian(1.0).unwrap();
        let (mut s00, mut s0c, mut scc) = (0.0, 0.0, 0.0);
        for m in 0..60u64 {
            let y = 0.2f64.powi(m as i32);
            let p = d.pair_probability(m);
            s00 += p * y * y;
            s0c += p * y * (1.0 - y);
            scc += p * (1.0 - y) * (1.0 - y);
        }
        assert_relative_eq!(lossy.p00(), s00, max_relative = 1e-14);
        assert_relative_eq!(lossy.p0c(), s0c, max_relative = 1e-13);
        assert_relative_eq!(lossy.pcc(), scc, max_relative = 1e-14);

        for d in [
            PairDistribution::poissonian(2.0).unwrap(),
            PairDistribution::thermal(2.0).unwrap(),
            PairDistribution::empirical(vec![0.1, 0.6, 0.3]).unwrap(),
        ] {
            let blind = click_probabilities_no_dark(&d, 0.0).unwrap();
            assert!((blind.p00() - 1.0).abs() < 1e-15, "{d}");
            assert!(blind.p0c() < 1e-15 && blind.pcc() < 1e-15, "{d}");
        }
        assert!(click_probabilities_no_dark(&d, 1.5).is_err());
    }

    #[test]
    fn dark_count_examples_on_tables() {
        let pi = JointClickDistribution::new(0.9, 0.04, 0.02).unwrap();
        assert_eq!(apply_dark_counts(&pi, 0.0).unwrap(), pi);

        let vacuum = JointClickDistribution::new(1.0, 0.0, 0.0).unwrap();
        let always = apply_dark_counts(&vacuum, 1.0).unwrap();
        assert_eq!((always.p00(), always.p0c(), always.pcc()), (0.0, 0.0, 1.0));

        // 0.81 * 0.9, 0.9 * 0.04 + 0.09 * 0.9, 0.02 + 0.2 * 0.04 + 0.01 * 0.9
        let noisy = apply_dark_counts(&pi, 0.1).unwrap();
        assert_relative_eq!(noisy.p00(), 0.729, max_relative = 1e-14);
        assert_relative_eq!(noisy.p0c(), 0.117, max_relative = 1e-14);
        assert_relative_eq!(noisy.pc0(), 0.117, max_relative = 1e-14);
        assert_relative_eq!(noisy.pcc(), 0.037, max_relative = 1e-14);
        assert!(apply_dark_counts(&pi, -0.1).is_err());
    }

    #[test]
    fn joint_examples() {
        let half = joint_click_distribution(
            &PairDistribution::poissonian(std::f64::consts::LN_2).unwrap(),
            &LinkParams::new(1.0, 0.0).unwrap(),
        );
        assert_relative_eq!(half.p00(), 0.5, max_relative = 1e-15);
        assert_eq!(half.p0c(), 0.0);
        assert_relative_eq!(half.pcc(), 0.5, max_relative = 1e-15);

        let coins = joint_click_distribution(
            &PairDistribution::poissonian(0.0).unwrap(),
            &LinkParams::new(0.3, 0.5).unwrap(),
        );
        assert_eq!((coins.p00(), coins.p0c(), coins.pcc()), (0.25, 0.25, 0.25));
        assert_eq!(coins.dependence(), 0.0);
    }

    #[test]
    fn table_validation() {
        assert!(JointClickDistribution::new(0.5, 0.1, 0.5).is_err());
        assert!(JointClickDistribution::new(1.2, -0.1, 0.0).is_err());
        let t = JointClickDistribution::new(0.25, 0.25, 0.25).unwrap();
        assert_eq!(t.dependence(), 0.0);
    }

    #[test]
    fn marginal_examples() {
        let t = JointClickDistribution::new(0.5, 0.0, 0.5).unwrap();
        assert_eq!(marginal_click_probabilities(&t), (0.5, 0.5));
        let t = JointClickDistribution::new(0.25, 0.25, 0.25).unwrap();
        assert_eq!(marginal_click_probabilities(&t), (0.5, 0.5));
        let joint = joint_click_distribution(
            &PairDistribution::poissonian(1.0).unwrap(),
            &LinkParams::new(0.8, 0.0).unwrap(),
        );
        assert_relative_eq!(
            marginal_click_probabilities(&joint).0,
            (-0.8f64).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn poisson_pipeline_matches_closed_forms_on_grid() {
        for lam in LAMBDAS {
            for eta in etas() {
                for q in QS {
                    let joint = joint_click_distribution(
                        &PairDistribution::poissonian(lam).unwrap(),
                        &LinkParams::new(eta, q).unwrap(),
                    );
                    let keep: f64 = 1.0 - q;
                    let ctx = format!("lam={lam} eta={eta} q={q}");
                    // closed forms with dark counts folded into A = (1-q) e^{-lam eta}
                    let a = keep * (-lam * eta).exp();
                    let not_a = -((-q).ln_1p() - lam * eta).exp_m1();
                    let b = a * a * (lam * eta * eta).exp();
                    let a_minus_b = a * -((-q).ln_1p() - lam * eta * (1.0 - eta)).exp_m1();
                    let rest = not_a * not_a + a * a * (lam * eta * eta).exp_m1();
                    assert!(rel_close(joint.p00(), b, 1e-12), "{ctx}");
                    assert!(rel_close(joint.p0c(), a_minus_b, 1e-12), "{ctx}");
                    assert!(rel_close(joint.pcc(), rest, 1e-12), "{ctx}");
                    assert!(rel_close(marginal_click_probabilities(&joint).0, a, 1e-12), "{ctx}");
                    // the literal subtracted forms agree to rounding
                    let both = keep * keep * (-lam * eta * (2.0 - eta)).exp();
                    assert!((joint.p0c() - (a - both)).abs() < 1e-15, "{ctx}");
                    assert!((joint.pcc() - (1.0 - 2.0 * a + both)).abs() < 1e-15, "{ctx}");
                    assert!((joint.total() - 1.0).abs() <= JOINT_TOLERANCE, "{ctx}");
                }
            }
        }
    }

    #[test]
    fn stable_disagreement_at_tiny_brightness() {
        // pi(c,0) = e^{-lam eta}(1 - e^{-lam eta (1-eta)}) ~ lam eta (1-eta)
        let joint = click_probabilities_no_dark(&PairDistribution::poissonian(1e-12).unwrap(), 0.8).unwrap();
        let lam_eta: f64 = 0.8e-12;
        let expect = (-lam_eta).exp() * (lam_eta * 0.2 - (lam_eta * 0.2).powi(2) / 2.0);
        assert!(rel_close(joint.p0c(), expect, 1e-12));
        assert!(rel_close(joint.pcc(), 0.64e-12 * (1.0 - 0.8e-12 * (1.0 + 0.2)), 1e-10));
    }

    #[test]
    fn both_clicks_grow_with_efficiency() {
        for lam in LAMBDAS {
            let d = PairDistribution::poissonian(lam).unwrap();
            let mut previous = 0.0;
            for eta in etas() {
                let pcc = click_probabilities_no_dark(&d, eta).unwrap().pcc();
                assert!(pcc >= previous, "lam={lam} eta={eta}");
                previous = pcc;
            }
        }
    }

    #[test]
    fn dependence_matches_cells() {
        for d in [
            PairDistribution::poissonian(0.7).unwrap(),
            PairDistribution::thermal(0.7).unwrap(),
            PairDistribution::empirical(vec![0.3, 0.3, 0.2, 0.2]).unwrap(),
        ] {
            for eta in [0.1, 0.5, 0.9] {
                for q in [0.0, 0.05] {
                    let joint = joint_click_distribution(&d, &LinkParams::new(eta, q).unwrap());
                    let (a, _) = joint.marginals();
                    assert!(
                        (joint.dependence() - (joint.p00() - a * a)).abs() < 1e-14,
                        "{d} eta={eta} q={q}"
                    );
                }
            }
        }
    }

    #[test]
    fn thermal_closed_forms_match_mgf_differences() {
        for lam in [1e-3, 0.5, 4.0] {
            let d = PairDistribution::thermal(lam).unwrap();
            for eta in [0.2, 0.6, 1.0] {
                let m10 = d.mgf_lossy(eta, 1.0, 0.0).unwrap();
                let m11 = d.mgf_lossy(eta, 1.0, 1.0).unwrap();
                let pi = click_probabilities_no_dark(&d, eta).unwrap();
                assert!(rel_close(pi.p00(), m11, 1e-14));
                assert!((pi.p0c() - (m10 - m11)).abs() < 1e-15);
                assert!((pi.pcc() - (1.0 - 2.0 * m10 + m11)).abs() < 1e-15);
            }
        }
    }

    proptest! {
        #[test]
        fn joint_invariants_hold(lam in 0.0f64..20.0, eta in 0.0f64..=1.0, q in 0.0f64..=1.0, kind in 0usize..3) {
            let d = match kind {
                0 => PairDistribution::poissonian(lam).unwrap(),
                1 => PairDistribution::thermal(lam).unwrap(),
                _ => PairDistribution::empirical(vec![0.4, 0.3, 0.2, 0.1]).unwrap(),
            };
            let joint = joint_click_distribution(&d, &LinkParams::new(eta, q).unwrap());
            prop_assert!((joint.total() - 1.0).abs() <= JOINT_TOLERANCE);
            prop_assert_eq!(joint.p0c(), joint.pc0());
            for row in joint.cells() {
                for cell in row {
                    prop_assert!((0.0..=1.0).contains(&cell));
                }
            }
        }
    }
}
