//! Hong-Ou-Mandel interference at a balanced coupler: coincidence
//! probability versus photon indistinguishability.

use chip_teleport::source::hom_dip;

fn main() -> chip_teleport::Result<()> {
    println!("P(1,1) after a 50:50 coupler, two single photons in:");
    println!("{:>12} {:>12}", "visibility", "P(1,1)");
    for step in 0..=10 {
        let v = step as f64 / 10.0;
        println!("{v:>12.2} {:>12.6}", hom_dip(0.5, v)?);
    }
    println!(
        "\npartially distinguishable photons (v = 0.97): P(1,1) = {:.6}",
        hom_dip(0.5, 0.97)?
    );
    println!(
        "unbalanced coupler (eta = 1/3), perfect overlap: P(1,1) = {:.6}",
        hom_dip(1.0 / 3.0, 1.0)?
    );
    Ok(())
}
