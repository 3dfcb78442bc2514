//! Ideal-chip teleportation: every Bell-analyzer outcome heralds the input
//! state up to a fixed Pauli correction, with success probability 1/27.

use std::collections::HashMap;
use std::f64::consts::PI;

use chip_teleport::circuit::reference_chip_layout;
use chip_teleport::protocol::{
    bsm_outcomes, fidelity, ideal_corrections, prepare_qubit, Teleporter,
};
use chip_teleport::source::SourceModel;

fn main() -> chip_teleport::Result<()> {
    let layout = reference_chip_layout();
    let sim = Teleporter::new(&layout, &HashMap::new())?;
    let corrections = ideal_corrections();

    let inputs = [
        ("|0>", 0.0, 0.0),
        ("|+>", PI / 2.0, 0.0),
        ("|+i>", PI / 2.0, PI / 2.0),
        ("tilted", 1.1, 2.3),
    ];

    for (name, theta, phi) in inputs {
        let psi = prepare_qubit(theta, phi);
        let states = sim.conditional_states(&SourceModel::ideal(), &psi)?;
        let p_total: f64 = states.iter().map(|s| s.probability).sum();
        println!("input {name}: success probability {p_total:.9} (1/27 = {:.9})", 1.0 / 27.0);
        for outcome in bsm_outcomes() {
            let cs = &states[outcome.index];
            let f = fidelity(&cs.state, &psi, &corrections.0[outcome.index]);
            println!(
                "  outcome {}  p = {:.9}  corrected fidelity = {:.12}",
                outcome.label(),
                cs.probability,
                f
            );
        }
    }
    Ok(())
}
