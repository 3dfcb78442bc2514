//! Tour of the layout format: parse the bundled reference chip, list its
//! stages and heaters, verify unitarity of the assembled core, and round-trip
//! through the serializer.

use std::collections::HashMap;

use chip_teleport::circuit::{
    parse_layout, reference_chip_layout, serialize_layout, unitarity_defect, Stage,
    REFERENCE_CHIP_LAYOUT,
};

fn main() -> chip_teleport::Result<()> {
    let layout = reference_chip_layout();
    println!("modes: {}", layout.modes);
    println!("qubits (top rail carries |0_L>):");
    for (name, top, bottom) in &layout.qubits {
        println!("  {name}: rails ({top}, {bottom})");
    }
    for stage in [Stage::Prep, Stage::Core, Stage::Tomography] {
        let n = layout.elements.iter().filter(|(s, _)| *s == stage).count();
        println!("{stage:?} stage: {n} elements");
    }
    println!("heater-bound phases: {:?}", layout.heater_names());

    // Bind every heater to 0 and check the assembled transfer matrix.
    let phases: HashMap<String, f64> =
        layout.heater_names().into_iter().map(|n| (n, 0.0)).collect();
    let u = layout.assemble(&phases)?;
    println!("unitarity defect of the full transfer matrix: {:.3e}", unitarity_defect(&u));

    let text = serialize_layout(&layout);
    assert_eq!(parse_layout(&text)?, layout);
    println!("\nserializer round-trip OK; bundled source is {} lines", REFERENCE_CHIP_LAYOUT.lines().count());
    Ok(())
}
