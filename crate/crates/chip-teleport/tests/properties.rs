//! Property-based invariants over randomized inputs.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use chip_teleport::characterization::{double_ratio_reflectivity, PowerMatrix};
use chip_teleport::circuit::{coupler_matrix, mzi_unitary, unitarity_defect};
use chip_teleport::fock::{output_distribution, permanent, FockState};
use chip_teleport::protocol::{haar_state, prepare_qubit};
use chip_teleport::source::hom_dip;
use chip_teleport::tomography::{
    mle_reconstruct, sample_records, standard_settings, LikelihoodModel, MeasurementModel,
};

fn complex_matrix(n: usize, seed: u64) -> DMatrix<Complex64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    })
}

fn random_unitary(n: usize, seed: u64) -> DMatrix<Complex64> {
    complex_matrix(n, seed).qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // The permanent is invariant under row and column swaps.
    #[test]
    fn permanent_is_swap_invariant(seed in 0u64..1000, n in 2usize..5) {
        let m = complex_matrix(n, seed);
        let p = permanent(&m).unwrap();
        let mut rows = m.clone();
        rows.swap_rows(0, n - 1);
        let mut cols = m.clone();
        cols.swap_columns(0, n - 1);
        prop_assert!((permanent(&rows).unwrap() - p).norm() < 1e-10 * p.norm().max(1.0));
        prop_assert!((permanent(&cols).unwrap() - p).norm() < 1e-10 * p.norm().max(1.0));
    }

    // perm(M^T) = perm(M).
    #[test]
    fn permanent_is_transpose_invariant(seed in 0u64..1000, n in 1usize..6) {
        let m = complex_matrix(n, seed);
        let p = permanent(&m).unwrap();
        let pt = permanent(&m.transpose()).unwrap();
        prop_assert!((p - pt).norm() < 1e-10 * p.norm().max(1.0));
    }

    // A unitary interferometer with no post-selection conserves probability.
    #[test]
    fn unitary_output_distribution_is_normalized(seed in 0u64..500, photons in 1usize..4) {
        let u = random_unitary(4, seed);
        let mut occ = vec![0; 4];
        for k in 0..photons {
            occ[k % 4] += 1;
        }
        let dist = output_distribution(&u, &FockState::new(occ), None).unwrap();
        prop_assert!((dist.total_mass() - 1.0).abs() < 1e-10);
    }

    // Any coupler and any MZI setting yields a unitary 2x2 block.
    #[test]
    fn couplers_and_mzis_are_unitary(
        eta in 0.0f64..=1.0,
        eta2 in 0.0f64..=1.0,
        theta in -10.0f64..10.0,
        phi in -10.0f64..10.0,
    ) {
        for m in [coupler_matrix(eta).unwrap(), mzi_unitary(eta, eta2, theta, phi).unwrap()] {
            let big = DMatrix::from_fn(2, 2, |i, j| m[(i, j)]);
            prop_assert!(unitarity_defect(&big) < 1e-12);
        }
    }

    // HOM coincidence interpolates linearly in the pair visibility.
    #[test]
    fn hom_dip_linear_in_visibility(eta in 0.01f64..0.99, v in 0.0f64..=1.0) {
        let p0 = hom_dip(eta, 0.0).unwrap();
        let p1 = hom_dip(eta, 1.0).unwrap();
        let pv = hom_dip(eta, v).unwrap();
        prop_assert!((pv - ((1.0 - v) * p0 + v * p1)).abs() < 1e-12);
    }

    // Double-ratio reflectivity is exactly immune to per-port loss.
    #[test]
    fn reflectivity_is_loss_immune(
        eta in 0.01f64..0.99,
        l0 in 0.05f64..1.0,
        l1 in 0.05f64..1.0,
        l2 in 0.05f64..1.0,
        l3 in 0.05f64..1.0,
    ) {
        let powers = PowerMatrix::synthetic(eta, [l0, l1], [l2, l3]);
        prop_assert!((double_ratio_reflectivity(&powers).unwrap() - eta).abs() < 1e-12);
    }

    // MLE output is always a physical state, whatever the counts.
    #[test]
    fn mle_always_physical(seed in 0u64..300, shots in 1u64..2000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = haar_state(&mut rng);
        let records = sample_records(&psi.density(), &standard_settings(), 0, shots, &mut rng);
        let rho = mle_reconstruct(
            &records,
            &MeasurementModel::Ideal,
            LikelihoodModel::Poisson,
        ).unwrap();
        let (e_min, e_max) = rho.eigenvalues();
        prop_assert!(e_min >= -1e-9 && e_max <= 1.0 + 1e-9);
        prop_assert!((rho.trace() - 1.0).abs() < 1e-9);
        prop_assert!(rho.hermiticity_defect() < 1e-9);
    }

    // Preparation angles land on the expected Bloch vector.
    #[test]
    fn prepared_states_are_normalized(theta in 0.0f64..std::f64::consts::PI, phi in 0.0f64..6.28) {
        let psi = prepare_qubit(theta, phi);
        let v = psi.as_vector();
        prop_assert!(((v[0].norm_sqr() + v[1].norm_sqr()) - 1.0).abs() < 1e-12);
        let z = v[0].norm_sqr() - v[1].norm_sqr();
        prop_assert!((z - theta.cos()).abs() < 1e-12);
    }
}

// Ideal teleportation at arbitrary preparation settings reproduces the input
// on every outcome; not a proptest macro case because the simulator setup is
// comparatively expensive.
#[test]
fn ideal_teleportation_invariance_spot_checks() {
    use chip_teleport::protocol::{bsm_outcomes, fidelity, ideal_corrections, Teleporter};
    use chip_teleport::source::SourceModel;

    let layout = chip_teleport::circuit::reference_chip_layout();
    let sim = Teleporter::new(&layout, &HashMap::new()).unwrap();
    let corrections = ideal_corrections();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..25 {
        let psi = haar_state(&mut rng);
        let states = sim.conditional_states(&SourceModel::ideal(), &psi).unwrap();
        for o in bsm_outcomes() {
            let f = fidelity(&states[o.index].state, &psi, &corrections.0[o.index]);
            assert!((f - 1.0).abs() < 1e-10);
        }
    }
}
