//! Error budget: sweep each noise source alone over a grid and report the
//! input-averaged teleportation fidelity, showing which imperfection costs
//! the most.

use chip_teleport::circuit::reference_chip_layout;
use chip_teleport::experiment::{budget_scan, BudgetGrid};

fn main() -> chip_teleport::Result<()> {
    let layout = reference_chip_layout();
    let rows = budget_scan(&layout, &BudgetGrid::default(), 40, 17)?;

    let mut current = "";
    for row in &rows {
        if row.axis != current {
            current = &row.axis;
            println!("\n{}", row.axis);
        }
        println!("  {:>8.3}  ->  average fidelity {:.4}", row.value, row.average_fidelity);
    }
    Ok(())
}
