//! Acceptance gate: one test per release criterion, each printing a single
//! pass/fail line. Run with `cargo test --test acceptance -- --nocapture`.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rand::Rng;

use chip_teleport::characterization::{
    double_ratio_reflectivity, fit_crosstalk, CrosstalkModel, PowerMatrix, SweepPoint,
    DEFAULT_RESISTANCE,
};
use chip_teleport::circuit::reference_chip_layout;
use chip_teleport::experiment::{
    perturb_couplers, run_experiment_with_layout, ExperimentConfig, DEFAULT_ETA_SPREAD,
    FULL_NOISE_ETA_SPREAD,
};
use chip_teleport::fock::permanent;
use chip_teleport::protocol::{
    average_fidelity_sampled, bsm_outcomes, euler_unitary, fidelity, haar_state,
    ideal_corrections, optimal_correction_for_channel, polar_correction_oracle, prepare_qubit,
    DensityMatrix2, QubitChannel, Teleporter, CLASSICAL_FIDELITY_BOUND,
};
use chip_teleport::rng::substream;
use chip_teleport::source::{hom_dip, SourceModel};
use chip_teleport::tomography::{
    fidelity_mixed, mle_reconstruct, monte_carlo_fidelity, sample_records, standard_settings,
    CountRecord, LikelihoodModel, MeasurementModel,
};

fn verdict(id: u32, name: &str, ok: bool) {
    println!("[{}] criterion {id:02}: {name}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id:02} failed: {name}");
}

fn ideal_teleporter() -> Teleporter {
    Teleporter::new(&reference_chip_layout(), &HashMap::new()).unwrap()
}

#[test]
fn criterion_01_ideal_fidelity_is_unity() {
    let sim = ideal_teleporter();
    let corrections = ideal_corrections();
    let mut rng = substream(101, "acceptance/haar");
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let psi = haar_state(&mut rng);
        let states = sim.conditional_states(&SourceModel::ideal(), &psi).unwrap();
        for o in bsm_outcomes() {
            let f = fidelity(&states[o.index].state, &psi, &corrections.0[o.index]);
            worst = worst.max((f - 1.0).abs());
        }
    }
    verdict(1, "ideal fidelity 1 within 1e-8 for 100 Haar inputs x 4 outcomes", worst < 1e-8);
}

#[test]
fn criterion_02_success_probability_is_one_27th() {
    let sim = ideal_teleporter();
    let mut rng = substream(102, "acceptance/haar");
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let psi = haar_state(&mut rng);
        let states = sim.conditional_states(&SourceModel::ideal(), &psi).unwrap();
        let total: f64 = states.iter().map(|s| s.probability).sum();
        worst = worst.max((total - 1.0 / 27.0).abs());
    }
    verdict(2, "post-selection success probability 1/27 within 1e-9", worst < 1e-9);
}

/// Reference permanent by Laplace expansion along the first row.
fn laplace_permanent(m: &DMatrix<Complex64>) -> Complex64 {
    let n = m.nrows();
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if n == 1 {
        return m[(0, 0)];
    }
    let mut total = Complex64::default();
    for j in 0..n {
        let minor = m.clone().remove_row(0).remove_column(j);
        total += m[(0, j)] * laplace_permanent(&minor);
    }
    total
}

#[test]
fn criterion_03_permanent_matches_laplace_oracle() {
    let mut rng = substream(103, "acceptance/permanents");
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let n = 1 + k % 5;
        let m = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let fast = permanent(&m).unwrap();
        let slow = laplace_permanent(&m);
        let scale = slow.norm().max(1e-300);
        worst = worst.max((fast - slow).norm() / scale);
    }
    verdict(3, "Ryser permanent matches Laplace oracle to 1e-10 relative", worst < 1e-10);
}

#[test]
fn criterion_04_hom_dip_values() {
    let exact = (hom_dip(0.5, 1.0).unwrap() - 0.0).abs() < 1e-12
        && (hom_dip(0.5, 0.0).unwrap() - 0.5).abs() < 1e-12
        && (hom_dip(0.5, 0.97).unwrap() - 0.015).abs() < 1e-12;
    verdict(4, "HOM coincidence 0 / 0.5 / 0.015 at v = 1 / 0 / 0.97", exact);
}

/// Input-averaged, probability-weighted fidelity with ideal corrections,
/// averaged over `patterns` random coupler-deviation patterns at `spread`.
fn eta_spread_fidelity(spread: f64, patterns: usize, n_inputs: usize, source: &SourceModel) -> [f64; 5] {
    let layout = reference_chip_layout();
    let corrections = ideal_corrections();
    // Per-outcome weighted sums plus an overall total.
    let mut num = [0.0f64; 4];
    let mut den = [0.0f64; 4];
    for pattern in 0..patterns {
        let mut prng = substream(105, &format!("acceptance/eta-pattern{pattern}"));
        let perturbed = perturb_couplers(&layout, spread, &mut prng);
        let sim = Teleporter::new(&perturbed, &HashMap::new()).unwrap();
        let mut rng = substream(105, "acceptance/haar");
        for _ in 0..n_inputs {
            let psi = haar_state(&mut rng);
            let states = sim.conditional_states(source, &psi).unwrap();
            for o in bsm_outcomes() {
                let cs = &states[o.index];
                num[o.index] +=
                    cs.probability * fidelity(&cs.state, &psi, &corrections.0[o.index]);
                den[o.index] += cs.probability;
            }
        }
    }
    let mut out = [0.0; 5];
    for i in 0..4 {
        out[i] = num[i] / den[i];
    }
    out[4] = num.iter().sum::<f64>() / den.iter().sum::<f64>();
    out
}

#[test]
fn criterion_05_coupler_deviations_alone() {
    let scales = [0.0, 0.35, 0.7, 1.0];
    let mut means = Vec::new();
    for s in scales {
        means.push(eta_spread_fidelity(s * DEFAULT_ETA_SPREAD, 8, 40, &SourceModel::ideal())[4]);
    }
    let in_band = (0.85..=0.95).contains(means.last().unwrap());
    let monotone = means.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    println!("    mean fidelity vs deviation scale: {means:?}");
    verdict(
        5,
        "coupler deviations alone: averaged fidelity in [0.85, 0.95], monotone in scale",
        in_band && monotone,
    );
}

#[test]
fn criterion_06_full_noise_model() {
    let source = SourceModel {
        lambda_sq: 0.03,
        v_nb: 0.97,
        v_nn: 0.98,
        ..SourceModel::ideal()
    };
    let f = eta_spread_fidelity(FULL_NOISE_ETA_SPREAD, 8, 30, &source);
    println!("    per-outcome fidelities {:?}, mean {}", &f[..4], f[4]);
    let in_band = (0.84..=0.94).contains(&f[4]);
    let beats_classical = f[..4].iter().all(|&x| x > CLASSICAL_FIDELITY_BOUND);
    verdict(
        6,
        "full noise model: mean fidelity in [0.84, 0.94], every outcome beats 2/3",
        in_band && beats_classical,
    );
}

#[test]
fn criterion_07_monte_carlo_error_bars() {
    let sim = ideal_teleporter();
    let source = SourceModel { lambda_sq: 0.03, v_nb: 0.97, v_nn: 0.98, ..SourceModel::ideal() };
    let corrections = ideal_corrections();
    let mut ok = true;
    let mut sigmas = Vec::new();
    for (i, &(theta, phi)) in [(0.7, 0.3), (PI / 2.0, 1.0), (2.0, 4.0)].iter().enumerate() {
        let psi = prepare_qubit(theta, phi);
        let states = sim.conditional_states(&source, &psi).unwrap();
        for o in bsm_outcomes() {
            let mut rng = substream(107, &format!("acceptance/mc{i}/{}", o.index));
            let records =
                sample_records(&states[o.index].state, &standard_settings(), o.index, 100, &mut rng);
            let (_, sigma) = monte_carlo_fidelity(
                &records,
                &MeasurementModel::Ideal,
                LikelihoodModel::Poisson,
                &psi,
                &corrections.0[o.index],
                400,
                1070 + 4 * i as u64 + o.index as u64,
            )
            .unwrap();
            sigmas.push(sigma);
            ok &= sigma <= 0.06;
        }
    }
    let mean = sigmas.iter().sum::<f64>() / sigmas.len() as f64;
    ok &= (0.01..=0.06).contains(&mean);
    println!(
        "    sigma mean {mean:.4}, range {:.4} .. {:.4}",
        sigmas.iter().cloned().fold(f64::INFINITY, f64::min),
        sigmas.iter().cloned().fold(0.0f64, f64::max)
    );
    verdict(7, "Monte-Carlo fidelity error bar in [0.01, 0.06] at ~100 counts", ok);
}

#[test]
fn criterion_08_correction_search_matches_polar_oracle() {
    let mut rng = substream(108, "acceptance/channels");
    let mut sample_rng = substream(108, "acceptance/haar");
    let samples: Vec<_> = (0..10_000).map(|_| haar_state(&mut sample_rng)).collect();
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let v = euler_unitary(
            rng.gen::<f64>() * 2.0 * PI,
            rng.gen::<f64>() * PI,
            rng.gen::<f64>() * 2.0 * PI,
        );
        let unitary = QubitChannel::from_unitary(&v);
        let depol = QubitChannel::depolarizing(1.0);
        let p = 0.05 * rng.gen::<f64>();
        let mix = |a: Matrix2<Complex64>, b: Matrix2<Complex64>| a * Complex64::from(1.0 - p) + b * Complex64::from(p);
        let channel = QubitChannel {
            e00: mix(unitary.e00, depol.e00),
            e01: mix(unitary.e01, depol.e01),
            e10: mix(unitary.e10, depol.e10),
            e11: mix(unitary.e11, depol.e11),
        };
        let (u_found, _) = optimal_correction_for_channel(&channel, 10_000, 1080 + k).unwrap();
        let f_found = average_fidelity_sampled(&channel, &u_found, &samples);
        let f_polar =
            average_fidelity_sampled(&channel, &polar_correction_oracle(&channel), &samples);
        worst = worst.max((f_found - f_polar).abs());
    }
    println!("    worst |search - polar| average-fidelity gap: {worst:.2e}");
    verdict(8, "correction search matches polar oracle within 1e-3", worst <= 1e-3);
}

#[test]
fn criterion_09_mle_accuracy_and_physicality() {
    let mut rng = substream(109, "acceptance/states");
    let mut worst_f: f64 = 1.0;
    for i in 0..50 {
        // Random mixed state from a random Bloch vector inside the ball.
        let (x, y, z, r) = loop {
            let x = 2.0 * rng.gen::<f64>() - 1.0;
            let y = 2.0 * rng.gen::<f64>() - 1.0;
            let z = 2.0 * rng.gen::<f64>() - 1.0;
            let r = (x * x + y * y + z * z).sqrt();
            if r <= 1.0 {
                break (x, y, z, r);
            }
        };
        let _ = r;
        let half = Complex64::from(0.5);
        let rho = DensityMatrix2(Matrix2::new(
            half * Complex64::from(1.0 + z),
            half * Complex64::new(x, -y),
            half * Complex64::new(x, y),
            half * Complex64::from(1.0 - z),
        ));
        let mut srng = substream(109, &format!("acceptance/counts{i}"));
        let records = sample_records(&rho, &standard_settings(), 0, 1_000_000, &mut srng);
        let rho_hat =
            mle_reconstruct(&records, &MeasurementModel::Ideal, LikelihoodModel::Poisson).unwrap();
        worst_f = worst_f.min(fidelity_mixed(&rho_hat, &rho));
    }

    // Adversarial counts: mutually contradictory certainties must still give
    // a physical state.
    let mut physical = true;
    let adversarial: [Vec<(u64, u64)>; 3] = [
        vec![(100, 0), (100, 0), (100, 0)],
        vec![(0, 100), (0, 100), (0, 100)],
        vec![(100, 0), (0, 0), (0, 100)],
    ];
    for counts in &adversarial {
        let records: Vec<CountRecord> = standard_settings()
            .iter()
            .zip(counts)
            .map(|(&(theta2, phi2), &(pass, fail))| CountRecord {
                outcome_index: 0,
                theta2,
                phi2,
                pass_counts: pass,
                fail_counts: fail,
            })
            .collect();
        let rho_hat =
            mle_reconstruct(&records, &MeasurementModel::Ideal, LikelihoodModel::Poisson).unwrap();
        let (e_min, e_max) = rho_hat.eigenvalues();
        let trace = rho_hat.trace();
        physical &= e_min >= -1e-9 && e_max <= 1.0 + 1e-9 && (trace - 1.0).abs() < 1e-9;
    }
    println!("    worst reconstruction fidelity at 1e6 shots: {worst_f:.6}");
    verdict(
        9,
        "MLE fidelity >= 0.999 at 1e6 shots and physical on adversarial counts",
        worst_f >= 0.999 && physical,
    );
}

#[test]
fn criterion_10_double_ratio_reflectivity_is_loss_immune() {
    let mut rng = substream(110, "acceptance/reflectivity");
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let eta = 0.01 + 0.98 * rng.gen::<f64>();
        let l_in = [0.1 + 0.9 * rng.gen::<f64>(), 0.1 + 0.9 * rng.gen::<f64>()];
        let l_out = [0.1 + 0.9 * rng.gen::<f64>(), 0.1 + 0.9 * rng.gen::<f64>()];
        let powers = PowerMatrix::synthetic(eta, l_in, l_out);
        let eta_hat = double_ratio_reflectivity(&powers).unwrap();
        worst = worst.max((eta_hat - eta).abs());
    }
    verdict(10, "double-ratio reflectivity exact to 1e-12 under random loss", worst < 1e-12);
}

fn synthetic_sweep(model: &CrosstalkModel, noise: f64, rng: &mut impl Rng) -> Vec<SweepPoint> {
    let mut sweep = Vec::new();
    for i in 0..=80 {
        let v_self = model.v_max * i as f64 / 80.0;
        for &v_neighbor in &[0.0, 0.5 * model.v_max, model.v_max] {
            let phase = model.phase_from_heater(v_self, v_neighbor).radians;
            let clean = 0.5 * (1.0 + phase.cos());
            let jitter = 1.0 + noise * (2.0 * rng.gen::<f64>() - 1.0);
            sweep.push(SweepPoint { v_self, v_neighbor, power: clean * jitter });
        }
    }
    sweep
}

#[test]
fn criterion_11_crosstalk_fit() {
    let truth = CrosstalkModel {
        a: 600.0,
        b: 30.0,
        c: 0.4,
        resistance: DEFAULT_RESISTANCE,
        v_min: 0.0,
        v_max: 7.0,
    };
    let mut rng = substream(111, "acceptance/sweep");

    let clean = fit_crosstalk(&synthetic_sweep(&truth, 0.0, &mut rng), DEFAULT_RESISTANCE).unwrap();
    let rel = |x: f64, t: f64| ((x - t) / t).abs();
    let clean_ok = rel(clean.model.a, truth.a) < 1e-9
        && rel(clean.model.b, truth.b) < 1e-9
        && rel(clean.model.c, truth.c) < 1e-9;

    let noisy = fit_crosstalk(&synthetic_sweep(&truth, 0.01, &mut rng), DEFAULT_RESISTANCE).unwrap();
    let noisy_ok = rel(noisy.model.a, truth.a) < 0.05
        && rel(noisy.model.b, truth.b) < 0.05
        && rel(noisy.model.c, truth.c) < 0.05;

    println!(
        "    clean (a,b,c) rel err: ({:.1e}, {:.1e}, {:.1e}); 1% noise: ({:.1e}, {:.1e}, {:.1e})",
        rel(clean.model.a, truth.a),
        rel(clean.model.b, truth.b),
        rel(clean.model.c, truth.c),
        rel(noisy.model.a, truth.a),
        rel(noisy.model.b, truth.b),
        rel(noisy.model.c, truth.c),
    );
    verdict(11, "cross-talk fit: 1e-9 relative noiseless, 5% at 1% power noise", clean_ok && noisy_ok);
}

#[test]
fn criterion_12_reports_are_deterministic() {
    let text = "
layout = unused.layout
seed = 4242
shots = 250

[source]
lambda_sq = 0.02
v_nb = 0.97

[inputs]
state = 1.1, 0.4
state = 2.0, 5.0
";
    let config = ExperimentConfig::parse(text, ".".as_ref()).unwrap();
    let layout = reference_chip_layout();
    let a = run_experiment_with_layout(&config, &layout).unwrap();
    let b = run_experiment_with_layout(&config, &layout).unwrap();
    let ja = serde_json::to_string_pretty(&a).unwrap();
    let jb = serde_json::to_string_pretty(&b).unwrap();
    let deterministic = ja.as_bytes() == jb.as_bytes();
    let timestamp_separate = a.metadata.timestamp.is_none();
    verdict(
        12,
        "identical config + seed give byte-identical reports; timestamp kept apart",
        deterministic && timestamp_separate,
    );
}
