//! Maximum-likelihood single-qubit state tomography and Monte-Carlo error
//! propagation over Poissonian counting statistics.

use std::io::{BufRead, Write};

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::protocol::{
    fidelity, measurement_projector, pauli_x, pauli_y, pauli_z, DensityMatrix2, QubitState,
};

type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Counts for one (tomography setting, Bell outcome) cell: events where the
/// analyzer's pass detector clicked and where the complementary one did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountRecord {
    pub outcome_index: usize,
    pub theta2: f64,
    pub phi2: f64,
    pub pass_counts: u64,
    pub fail_counts: u64,
}

/// Forward Born model: `p_i = tr(Pi_i rho)`.
pub fn born_probabilities(rho: &DensityMatrix2, projectors: &[Matrix2<C64>]) -> Vec<f64> {
    projectors
        .iter()
        .map(|pi| (pi * rho.0).trace().re.clamp(0.0, 1.0))
        .collect()
}

/// Likelihood model for the counts. The two coincide at the optimum when
/// pass/fail cover each setting completely, but both are offered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LikelihoodModel {
    #[default]
    Poisson,
    Multinomial,
}

/// How a record's `(theta2, phi2)` maps to a pass projector. `Ideal` uses
/// the analytic analyzer convention; `Characterized` holds explicit
/// projectors (one per record, in record order) from a non-ideal analyzer.
#[derive(Clone, Debug)]
pub enum MeasurementModel {
    Ideal,
    Characterized(Vec<Matrix2<C64>>),
}

impl MeasurementModel {
    fn projector(&self, idx: usize, record: &CountRecord) -> Matrix2<C64> {
        match self {
            MeasurementModel::Ideal => measurement_projector(record.theta2, record.phi2),
            MeasurementModel::Characterized(list) => list[idx],
        }
    }
}

/// Bloch 4-vector (I, X, Y, Z components) of a Hermitian 2x2 matrix.
fn bloch4(m: &Matrix2<C64>) -> [f64; 4] {
    [
        m.trace().re / 2.0,
        (pauli_x() * m).trace().re / 2.0,
        (pauli_y() * m).trace().re / 2.0,
        (pauli_z() * m).trace().re / 2.0,
    ]
}

/// Verify the settings span the qubit Bloch space; on failure, name the
/// Pauli directions the records cannot resolve.
fn check_informational_completeness(projectors: &[Matrix2<C64>]) -> Result<()> {
    let mut rows: Vec<[f64; 4]> = Vec::with_capacity(projectors.len() * 2);
    for pi in projectors {
        rows.push(bloch4(pi));
        rows.push(bloch4(&(Matrix2::identity() - pi)));
    }
    let mat = nalgebra::DMatrix::from_fn(rows.len(), 4, |i, j| rows[i][j]);
    let rank = mat.rank(1e-9);
    if rank == 4 {
        return Ok(());
    }
    // Project each Pauli direction onto the row space to find the gaps.
    let svd = mat.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("svd v_t");
    let mut missing = Vec::new();
    for (k, name) in [(1usize, "X"), (2, "Y"), (3, "Z")] {
        let mut in_span = 0.0;
        for (i, s) in svd.singular_values.iter().enumerate() {
            if *s > 1e-9 {
                in_span += v_t[(i, k)].powi(2);
            }
        }
        if in_span < 1.0 - 1e-6 {
            missing.push(name);
        }
    }
    Err(Error::RankDeficientMeasurements {
        rank,
        missing: missing.join(", "),
    })
}

/// Density matrix from the positivity-enforcing factorization
/// `rho = T^dag T / tr(T^dag T)` with `T = [[t1, 0], [t3 + i t4, t2]]`.
fn rho_from_params(t: &[f64; 4]) -> DensityMatrix2 {
    let tm = Matrix2::new(
        C64::new(t[0], 0.0),
        ZERO,
        C64::new(t[2], t[3]),
        C64::new(t[1], 0.0),
    );
    let g = tm.adjoint() * tm;
    let trace = g.trace().re.max(1e-300);
    DensityMatrix2(g / C64::new(trace, 0.0))
}

fn log_likelihood(
    t: &[f64; 4],
    records: &[CountRecord],
    projectors: &[Matrix2<C64>],
    model: LikelihoodModel,
) -> f64 {
    let rho = rho_from_params(t);
    let mut ll = 0.0;
    for (rec, pi) in records.iter().zip(projectors) {
        let p = (pi * rho.0).trace().re.clamp(1e-12, 1.0 - 1e-12);
        let (np, nf) = (rec.pass_counts as f64, rec.fail_counts as f64);
        match model {
            LikelihoodModel::Multinomial => {
                ll += np * p.ln() + nf * (1.0 - p).ln();
            }
            LikelihoodModel::Poisson => {
                // Independent Poisson rates with the per-setting flux
                // profiled out at the observed total.
                let s = np + nf;
                if s > 0.0 {
                    ll += np * (s * p).ln() - s * p + nf * (s * (1.0 - p)).ln() - s * (1.0 - p);
                }
            }
        }
    }
    ll
}

/// Maximum-likelihood reconstruction of a physical density matrix from
/// counts. Monotone damped gradient ascent on the factorized parameters;
/// converges when the log-likelihood improves by less than 1e-10 or after
/// 10^4 iterations.
pub fn mle_reconstruct(
    records: &[CountRecord],
    measurement: &MeasurementModel,
    model: LikelihoodModel,
) -> Result<DensityMatrix2> {
    if records.len() < 3 {
        return Err(Error::RankDeficientMeasurements {
            rank: records.len(),
            missing: "need at least 3 settings".into(),
        });
    }
    let projectors: Vec<Matrix2<C64>> = records
        .iter()
        .enumerate()
        .map(|(i, r)| measurement.projector(i, r))
        .collect();
    check_informational_completeness(&projectors)?;

    let mut t = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2, 0.0, 0.0];
    let mut ll = log_likelihood(&t, records, &projectors, model);
    let mut step = 0.1;
    const H: f64 = 1e-6;
    for _ in 0..10_000 {
        let mut grad = [0.0; 4];
        for k in 0..4 {
            let mut tp = t;
            tp[k] += H;
            let mut tm = t;
            tm[k] -= H;
            grad[k] = (log_likelihood(&tp, records, &projectors, model)
                - log_likelihood(&tm, records, &projectors, model))
                / (2.0 * H);
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-14 {
            break;
        }
        // Backtracking keeps the likelihood non-decreasing per iteration.
        let mut improved = false;
        while step > 1e-16 {
            let mut tn = t;
            for k in 0..4 {
                tn[k] += step * grad[k] / gnorm.max(1.0);
            }
            let lln = log_likelihood(&tn, records, &projectors, model);
            if lln >= ll {
                let gain = lln - ll;
                t = tn;
                ll = lln;
                improved = true;
                step *= 1.5;
                if gain < 1e-10 {
                    return Ok(rho_from_params(&t));
                }
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(rho_from_params(&t))
}

/// Uhlmann fidelity between two qubit density matrices:
/// `F = tr(rho sigma) + 2 sqrt(det rho det sigma)`.
pub fn fidelity_mixed(a: &DensityMatrix2, b: &DensityMatrix2) -> f64 {
    let overlap = (a.0 * b.0).trace().re;
    let det = |m: &Matrix2<C64>| (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re.max(0.0);
    (overlap + 2.0 * (det(&a.0) * det(&b.0)).sqrt()).clamp(0.0, 1.0)
}

/// Trace distance `tr|a - b| / 2` for qubit density matrices.
pub fn trace_distance(a: &DensityMatrix2, b: &DensityMatrix2) -> f64 {
    let d = DensityMatrix2(a.0 - b.0);
    let (lo, hi) = d.eigenvalues();
    (lo.abs() + hi.abs()) / 2.0
}

/// Fidelity statistics from resampling each count as Poisson(observed) and
/// re-running the reconstruction. Returns (mean, standard deviation) of
/// `<psi| U' rho U'^dag |psi>` over `trials` resamples. Deterministic per
/// seed.
pub fn monte_carlo_fidelity(
    records: &[CountRecord],
    measurement: &MeasurementModel,
    model: LikelihoodModel,
    psi: &QubitState,
    correction: &Matrix2<C64>,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if trials < 100 {
        return Err(Error::OutOfRange {
            name: "trials",
            value: trials as f64,
            expected: ">= 100",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fids = Vec::with_capacity(trials);
    for _ in 0..trials {
        let resampled: Vec<CountRecord> = records
            .iter()
            .map(|r| {
                let draw = |n: u64, rng: &mut ChaCha8Rng| -> u64 {
                    if n == 0 {
                        0 // Poisson(0) is identically zero
                    } else {
                        Poisson::new(n as f64).unwrap().sample(rng) as u64
                    }
                };
                CountRecord {
                    pass_counts: draw(r.pass_counts, &mut rng),
                    fail_counts: draw(r.fail_counts, &mut rng),
                    ..*r
                }
            })
            .collect();
        let rho = mle_reconstruct(&resampled, measurement, model)?;
        fids.push(fidelity(&rho, psi, correction));
    }
    let mean = fids.iter().sum::<f64>() / trials as f64;
    let var = fids.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / trials as f64;
    Ok((mean, var.sqrt()))
}

/// The three standard analyzer settings measuring Z, X and Y.
pub fn standard_settings() -> [(f64, f64); 3] {
    [
        (0.0, 0.0),
        (-std::f64::consts::FRAC_PI_4, 0.0),
        (-std::f64::consts::FRAC_PI_4, -std::f64::consts::FRAC_PI_2),
    ]
}

/// Sample pass/fail counts for a state under each setting (binomial split of
/// `shots` post-selected events per setting).
pub fn sample_records<R: Rng>(
    rho: &DensityMatrix2,
    settings: &[(f64, f64)],
    outcome_index: usize,
    shots: u64,
    rng: &mut R,
) -> Vec<CountRecord> {
    settings
        .iter()
        .map(|&(theta2, phi2)| {
            let pi = measurement_projector(theta2, phi2);
            let p = (pi * rho.0).trace().re.clamp(0.0, 1.0);
            let mut pass = 0u64;
            for _ in 0..shots {
                if rng.gen::<f64>() < p {
                    pass += 1;
                }
            }
            CountRecord {
                outcome_index,
                theta2,
                phi2,
                pass_counts: pass,
                fail_counts: shots - pass,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// CSV import/export
// ---------------------------------------------------------------------------

pub const COUNTS_CSV_HEADER: &str = "outcome_index,theta2,phi2,pass_counts,fail_counts";

pub fn write_counts_csv<W: Write>(out: &mut W, records: &[CountRecord]) -> Result<()> {
    writeln!(out, "{COUNTS_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.outcome_index, r.theta2, r.phi2, r.pass_counts, r.fail_counts
        )?;
    }
    Ok(())
}

pub fn read_counts_csv<R: BufRead>(input: R) -> Result<Vec<CountRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with("outcome_index") {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(Error::Config(format!(
                "counts csv line {}: expected 5 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let parse_err = |what: &str| {
            Error::Config(format!("counts csv line {}: bad {what}", lineno + 1))
        };
        records.push(CountRecord {
            outcome_index: fields[0].parse().map_err(|_| parse_err("outcome_index"))?,
            theta2: fields[1].parse().map_err(|_| parse_err("theta2"))?,
            phi2: fields[2].parse().map_err(|_| parse_err("phi2"))?,
            pass_counts: fields[3].parse().map_err(|_| parse_err("pass_counts"))?,
            fail_counts: fields[4].parse().map_err(|_| parse_err("fail_counts"))?,
        });
    }
    Ok(records)
}
