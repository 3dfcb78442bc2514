//! Maximum-likelihood state tomography: simulate pass/fail counts for a
//! teleported state under the three standard analyzer settings, reconstruct
//! the density matrix, and attach a Monte-Carlo error bar to the fidelity.

use std::collections::HashMap;
use std::f64::consts::PI;

use chip_teleport::circuit::reference_chip_layout;
use chip_teleport::protocol::{bsm_outcomes, ideal_corrections, prepare_qubit, Teleporter};
use chip_teleport::rng::substream;
use chip_teleport::source::SourceModel;
use chip_teleport::tomography::{
    fidelity_mixed, mle_reconstruct, monte_carlo_fidelity, sample_records, standard_settings,
    LikelihoodModel, MeasurementModel,
};

fn main() -> chip_teleport::Result<()> {
    let layout = reference_chip_layout();
    let sim = Teleporter::new(&layout, &HashMap::new())?;
    let source = SourceModel { lambda_sq: 0.02, v_nb: 0.97, ..SourceModel::ideal() };
    let psi = prepare_qubit(PI / 3.0, PI / 5.0);
    let corrections = ideal_corrections();

    let states = sim.conditional_states(&source, &psi)?;
    println!("1000 post-selected events per analyzer setting:");
    for outcome in bsm_outcomes() {
        let cs = &states[outcome.index];
        let mut rng = substream(21, &format!("example/counts{}", outcome.index));
        let records =
            sample_records(&cs.state, &standard_settings(), outcome.index, 1000, &mut rng);
        let rho_hat =
            mle_reconstruct(&records, &MeasurementModel::Ideal, LikelihoodModel::Poisson)?;
        let f_true = fidelity_mixed(&rho_hat, &cs.state);
        let (f_mean, f_sigma) = monte_carlo_fidelity(
            &records,
            &MeasurementModel::Ideal,
            LikelihoodModel::Poisson,
            &psi,
            &corrections.0[outcome.index],
            500,
            31 + outcome.index as u64,
        )?;
        println!(
            "  outcome {}: F(rho_hat, rho_true) = {:.4};  corrected fidelity {:.4} +/- {:.4}",
            outcome.label(),
            f_true,
            f_mean,
            f_sigma
        );
    }
    Ok(())
}
