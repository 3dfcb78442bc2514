//! Non-ideal photon source models: two-mode-squeezed higher-order emission,
//! partial distinguishability and Hong-Ou-Mandel diagnostics.
//!
//! The experiment draws three photons from two parametric down-conversion
//! sources. Source A supplies the input-qubit photon plus a herald; source B
//! supplies the photon pair feeding Q2 and Q3. Higher-order emission replaces
//! the ideal `|1,1,1>` input by an incoherent mixture with `|1,2,2>` and
//! `|2,1,1>` weighted by the squeezing parameter `lambda^2`. Partial
//! distinguishability mixes in runs where one photon does not interfere,
//! modeled as the incoherent sum of a single- and an (N-1)-photon input.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{output_distribution, FockState, OutcomeDistribution};

/// Highest squeezing weight the truncated mixture model is trusted for.
pub const LAMBDA_SQ_MAX: f64 = 0.2;

/// Statistical model of the photon sources feeding the chip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    /// Squeezing weight `lambda^2` of the down-conversion sources.
    pub lambda_sq: f64,
    /// Narrowband-narrowband pair visibility (the Q2-Q3 photon pair).
    pub v_nn: f64,
    /// Narrowband-broadband pair visibility (the input photon against either
    /// resource photon).
    pub v_nb: f64,
    /// Intensity transmission of each of the three chip input couplings.
    pub transmissions: [f64; 3],
    /// Transmission of the ancillary heralding arm; thins event rates only.
    pub herald_transmission: f64,
}

impl SourceModel {
    /// Ideal source: no higher-order emission, unit visibilities, lossless.
    pub fn ideal() -> Self {
        SourceModel {
            lambda_sq: 0.0,
            v_nn: 1.0,
            v_nb: 1.0,
            transmissions: [1.0; 3],
            herald_transmission: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=LAMBDA_SQ_MAX).contains(&self.lambda_sq) {
            return Err(Error::OutOfRange {
                name: "lambda_sq",
                value: self.lambda_sq,
                expected: "[0, 0.2]",
            });
        }
        for (name, v) in [("v_nn", self.v_nn), ("v_nb", self.v_nb)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange {
                    name,
                    value: v,
                    expected: "[0, 1]",
                });
            }
        }
        for &t in self
            .transmissions
            .iter()
            .chain(std::iter::once(&self.herald_transmission))
        {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::OutOfRange {
                    name: "transmission",
                    value: t,
                    expected: "[0, 1]",
                });
            }
        }
        Ok(())
    }

    /// Weight of runs where input photon `k` (0 = Q1, 1 = Q2, 2 = Q3) is
    /// distinguishable from the other two, from the pairwise visibilities.
    /// Each pair's deficit `1 - v` is split evenly between its two photons.
    pub fn distinguishable_weights(&self) -> [f64; 3] {
        let d_nb = 1.0 - self.v_nb; // pairs (Q1,Q2) and (Q1,Q3)
        let d_nn = 1.0 - self.v_nn; // pair (Q2,Q3)
        [
            (d_nb + d_nb) / 2.0,
            (d_nb + d_nn) / 2.0,
            (d_nb + d_nn) / 2.0,
        ]
    }
}

/// Truncated squeezed-source input mixture over the three source modes.
///
/// At truncation 1 the weights are `{|1,1,1>: 1, |1,2,2>: lambda_sq,
/// |2,1,1>: lambda_sq}`, normalized to sum to 1. Only the magnitude
/// `lambda^2` enters; the squeezing phase drops out of the incoherent
/// mixture.
pub fn squeezed_input_terms(lambda_sq: f64, truncation: usize) -> Vec<(FockState, f64)> {
    assert!(truncation >= 1, "truncation must be at least 1");
    let mut terms = vec![(FockState::new(vec![1, 1, 1]), 1.0)];
    if lambda_sq > 0.0 {
        terms.push((FockState::new(vec![1, 2, 2]), lambda_sq));
        terms.push((FockState::new(vec![2, 1, 1]), lambda_sq));
    }
    let total: f64 = terms.iter().map(|(_, w)| w).sum();
    for (_, w) in &mut terms {
        *w /= total;
    }
    terms
}

/// Output distribution when the photon in `distinguished_mode` does not
/// interfere with the rest: the incoherent mode-wise convolution of its
/// single-photon distribution with the remaining (N-1)-photon distribution.
pub fn distinguishable_distribution(
    transfer: &DMatrix<Complex64>,
    input: &FockState,
    distinguished_mode: usize,
) -> Result<OutcomeDistribution> {
    let occ = input.occupations();
    if distinguished_mode >= occ.len() || occ[distinguished_mode] == 0 {
        return Err(Error::Config(format!(
            "distinguished mode {distinguished_mode} is empty"
        )));
    }
    let modes = input.modes();
    let mut single = vec![0usize; modes];
    single[distinguished_mode] = 1;
    let mut rest = occ.to_vec();
    rest[distinguished_mode] -= 1;

    let d_single = output_distribution(transfer, &FockState::new(single), None)?;
    let d_rest = output_distribution(transfer, &FockState::new(rest), None)?;
    Ok(d_single.convolve(&d_rest))
}

/// Convex mixture `v * indistinguishable + (1 - v) * distinguishable`.
pub fn mix_distinguishability(
    transfer: &DMatrix<Complex64>,
    input: &FockState,
    visibility: f64,
    distinguished_mode: usize,
) -> Result<OutcomeDistribution> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::OutOfRange {
            name: "visibility",
            value: visibility,
            expected: "[0, 1]",
        });
    }
    let quantum = output_distribution(transfer, input, None)?;
    if visibility == 1.0 {
        return Ok(quantum);
    }
    let classical = distinguishable_distribution(transfer, input, distinguished_mode)?;
    Ok(quantum.mix(&classical, visibility))
}

/// Coincidence probability `P(1,1)` for `|1,1>` into a coupler of
/// reflectivity `eta` with interference visibility `v`.
///
/// At `eta = 1/2` the fractional dip `(P_classical - P) / P_classical`
/// equals `v` exactly.
pub fn hom_dip(eta: f64, visibility: f64) -> Result<f64> {
    for (name, x) in [("eta", eta), ("visibility", visibility)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfRange {
                name,
                value: x,
                expected: "[0, 1]",
            });
        }
    }
    let quantum = (1.0 - 2.0 * eta).powi(2);
    let classical = (1.0 - eta).powi(2) + eta * eta;
    Ok(visibility * quantum + (1.0 - visibility) * classical)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::coupler_matrix;
    use crate::fock::transition_probability;
    use approx::assert_relative_eq;

    fn coupler_dmatrix(eta: f64) -> DMatrix<Complex64> {
        let c = coupler_matrix(eta).unwrap();
        DMatrix::from_fn(2, 2, |i, j| c[(i, j)])
    }

    #[test]
    fn ideal_source_single_term() {
        let terms = squeezed_input_terms(0.0, 1);
        assert_eq!(terms.len(), 1);
        assert_eq!(terms[0].0, FockState::new(vec![1, 1, 1]));
        assert_relative_eq!(terms[0].1, 1.0);
    }

    #[test]
    fn squeezed_weights_at_reference_value() {
        let terms = squeezed_input_terms(0.03, 1);
        assert_eq!(terms.len(), 3);
        let norm = 1.06;
        assert_relative_eq!(terms[0].1, 1.0 / norm, epsilon = 1e-12);
        assert_relative_eq!(terms[1].1, 0.03 / norm, epsilon = 1e-12);
        assert_relative_eq!(terms[2].1, 0.03 / norm, epsilon = 1e-12);
    }

    #[test]
    fn squeezed_weights_normalized_over_validity_range() {
        for lambda_sq in [0.0, 0.01, 0.05, 0.1, 0.2] {
            let terms = squeezed_input_terms(lambda_sq, 1);
            let total: f64 = terms.iter().map(|(_, w)| w).sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-12);
            assert!(terms.iter().all(|(_, w)| *w >= 0.0));
        }
    }

    #[test]
    fn fully_distinguishable_balanced_coupler() {
        let u = coupler_dmatrix(0.5);
        let d = distinguishable_distribution(&u, &FockState::new(vec![1, 1]), 0).unwrap();
        assert_relative_eq!(d.prob(&FockState::new(vec![1, 1])), 0.5, epsilon = 1e-12);
        assert_relative_eq!(d.prob(&FockState::new(vec![2, 0])), 0.25, epsilon = 1e-12);
        assert_relative_eq!(d.prob(&FockState::new(vec![0, 2])), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn distinguishable_identity_matches_quantum() {
        let u: DMatrix<Complex64> = DMatrix::identity(3, 3);
        let input = FockState::new(vec![1, 1, 1]);
        let d = distinguishable_distribution(&u, &input, 1).unwrap();
        assert_relative_eq!(d.prob(&input), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn distinguishable_one_third_coupler() {
        let u = coupler_dmatrix(1.0 / 3.0);
        let d = distinguishable_distribution(&u, &FockState::new(vec![1, 1]), 0).unwrap();
        // Classical coincidence: t^4 + r^4 = (2/3)^2 + (1/3)^2 = 5/9.
        assert_relative_eq!(d.prob(&FockState::new(vec![1, 1])), 5.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn mixture_endpoints() {
        let u = coupler_dmatrix(0.5);
        let input = FockState::new(vec![1, 1]);
        let coinc = FockState::new(vec![1, 1]);
        let quantum = mix_distinguishability(&u, &input, 1.0, 0).unwrap();
        assert_relative_eq!(
            quantum.prob(&coinc),
            transition_probability(&u, &input, &coinc).unwrap(),
            epsilon = 1e-12
        );
        let classical = mix_distinguishability(&u, &input, 0.0, 0).unwrap();
        assert_relative_eq!(classical.prob(&coinc), 0.5, epsilon = 1e-12);
        let partial = mix_distinguishability(&u, &input, 0.97, 0).unwrap();
        assert_relative_eq!(partial.prob(&coinc), 0.015, epsilon = 1e-12);
    }

    #[test]
    fn mixtures_stay_normalized() {
        let u = coupler_dmatrix(0.3);
        let input = FockState::new(vec![1, 1]);
        for v in [0.0, 0.25, 0.7, 1.0] {
            let d = mix_distinguishability(&u, &input, v, 0).unwrap();
            assert_relative_eq!(d.total_mass(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn hom_dip_reference_points() {
        assert_relative_eq!(hom_dip(0.5, 1.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(hom_dip(0.5, 0.0).unwrap(), 0.5, epsilon = 1e-12);
        assert_relative_eq!(hom_dip(0.5, 0.98).unwrap(), 0.01, epsilon = 1e-12);
        // Fractional dip at the balanced point equals the visibility.
        let v = 0.98;
        let p = hom_dip(0.5, v).unwrap();
        assert_relative_eq!((0.5 - p) / 0.5, v, epsilon = 1e-12);
    }

    #[test]
    fn hom_dip_matches_fock_engine() {
        // The closed form must agree with an explicit permanent computation.
        for eta in [0.2, 1.0 / 3.0, 0.5, 0.8] {
            let u = coupler_dmatrix(eta);
            let input = FockState::new(vec![1, 1]);
            let coinc = FockState::new(vec![1, 1]);
            let q = transition_probability(&u, &input, &coinc).unwrap();
            assert_relative_eq!(hom_dip(eta, 1.0).unwrap(), q, epsilon = 1e-12);
            let c = distinguishable_distribution(&u, &input, 0)
                .unwrap()
                .prob(&coinc);
            assert_relative_eq!(hom_dip(eta, 0.0).unwrap(), c, epsilon = 1e-12);
        }
    }

    #[test]
    fn source_model_validation() {
        assert!(SourceModel::ideal().validate().is_ok());
        let mut bad = SourceModel::ideal();
        bad.lambda_sq = 0.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn distinguishable_weights_reference_values() {
        let model = SourceModel {
            lambda_sq: 0.03,
            v_nn: 0.98,
            v_nb: 0.97,
            transmissions: [1.0; 3],
            herald_transmission: 1.0,
        };
        let w = model.distinguishable_weights();
        assert_relative_eq!(w[0], 0.03, epsilon = 1e-12);
        assert_relative_eq!(w[1], 0.025, epsilon = 1e-12);
        assert_relative_eq!(w[2], 0.025, epsilon = 1e-12);
    }
}
