//! On-chip element characterization: loss-immune coupler reflectivity from
//! a double ratio of powers, and a thermo-optic cross-talk fit from a
//! two-heater voltage sweep.

use chip_teleport::characterization::{
    double_ratio_reflectivity, fit_crosstalk, heatercal_line, CrosstalkModel, PowerMatrix,
    SweepPoint, DEFAULT_RESISTANCE,
};

fn main() -> chip_teleport::Result<()> {
    // Reflectivity: the double ratio cancels unknown input/output losses.
    let eta_true = 1.0 / 3.0;
    let powers = PowerMatrix::synthetic(eta_true, [0.8, 0.65], [0.9, 0.7]);
    let eta_hat = double_ratio_reflectivity(&powers)?;
    println!("coupler reflectivity with heavy unbalanced loss:");
    println!("  true eta = {eta_true:.12}\n  estimate = {eta_hat:.12}");

    // Cross-talk: synthesize a fringe sweep from a known model, then fit it.
    let truth = CrosstalkModel {
        a: 620.0,
        b: 28.0,
        c: 0.35,
        resistance: DEFAULT_RESISTANCE,
        v_min: 0.0,
        v_max: 7.0,
    };
    let mut sweep = Vec::new();
    for i in 0..=60 {
        let v_self = 7.0 * i as f64 / 60.0;
        for &v_neighbor in &[0.0, 3.5, 7.0] {
            let phase = truth.phase_from_heater(v_self, v_neighbor).radians;
            sweep.push(SweepPoint {
                v_self,
                v_neighbor,
                power: 0.5 * (1.0 + phase.cos()),
            });
        }
    }
    let fit = fit_crosstalk(&sweep, DEFAULT_RESISTANCE)?;
    println!("\ncross-talk fit (phase = a*P_self + b*P_neighbor + c):");
    println!("  true : a = {:.3}, b = {:.3}, c = {:.4}", truth.a, truth.b, truth.c);
    println!(
        "  fit  : a = {:.3}, b = {:.3}, c = {:.4}  (residual RMS {:.2e})",
        fit.model.a, fit.model.b, fit.model.c, fit.residual_rms
    );
    println!("  layout directive: {}", heatercal_line("theta1", &fit.model));
    if fit.model.one_octant_limited() {
        println!("  note: reachable phase range is under pi/2");
    }
    Ok(())
}
