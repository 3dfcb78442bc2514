//! Numerical correction search: for each Bell outcome, find the single-qubit
//! unitary maximizing the mean teleportation fidelity, and compare with the
//! closed-form polar-decomposition answer.

use std::collections::HashMap;

use chip_teleport::circuit::reference_chip_layout;
use chip_teleport::protocol::{
    average_fidelity_sampled, bsm_outcomes, haar_state, ideal_corrections, optimal_corrections,
    polar_correction_oracle, Teleporter,
};
use chip_teleport::rng::substream;
use chip_teleport::source::SourceModel;

fn main() -> chip_teleport::Result<()> {
    let layout = reference_chip_layout();
    let source = SourceModel { lambda_sq: 0.02, v_nb: 0.97, ..SourceModel::ideal() };

    let (_set, achieved) = optimal_corrections(&layout, &source, 2000, 7)?;
    let sim = Teleporter::new(&layout, &HashMap::new())?;
    let channels = sim.channels(&source)?;

    let mut rng = substream(7, "example/haar");
    let samples: Vec<_> = (0..2000).map(|_| haar_state(&mut rng)).collect();
    let ideal = ideal_corrections();

    println!("per-outcome mean fidelities (2000 Haar-random inputs):");
    println!(
        "{:>8} {:>12} {:>12} {:>12}",
        "outcome", "searched", "polar", "pauli"
    );
    for outcome in bsm_outcomes() {
        let i = outcome.index;
        let polar = polar_correction_oracle(&channels[i]);
        let f_polar = average_fidelity_sampled(&channels[i], &polar, &samples);
        let f_pauli = average_fidelity_sampled(&channels[i], &ideal.0[i], &samples);
        println!(
            "{:>8} {:>12.6} {:>12.6} {:>12.6}",
            outcome.label(),
            achieved[i],
            f_polar,
            f_pauli
        );
    }
    Ok(())
}
