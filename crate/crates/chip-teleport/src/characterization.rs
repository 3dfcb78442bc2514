//! Classical element-wise characterization: loss-tolerant beam-splitter
//! reflectivity estimation and thermo-optic phase / cross-talk fitting.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bright-light powers `M[in][out]` at both outputs of one coupler for each
/// input, measured with unknown per-port coupling losses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerMatrix(pub [[f64; 2]; 2]);

impl PowerMatrix {
    /// Synthetic powers for reflectivity `eta` with per-port loss scalings.
    pub fn synthetic(eta: f64, l_in: [f64; 2], l_out: [f64; 2]) -> Self {
        // Cross transmission is eta, bar is 1 - eta.
        let t = [[1.0 - eta, eta], [eta, 1.0 - eta]];
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = l_in[i] * t[i][j] * l_out[j];
            }
        }
        PowerMatrix(m)
    }

    pub fn validate(&self) -> Result<()> {
        for row in &self.0 {
            if row.iter().any(|&p| p < 0.0) {
                return Err(Error::EstimatorDomain("negative power".into()));
            }
            if row.iter().all(|&p| p == 0.0) {
                return Err(Error::EstimatorDomain("all-zero power row".into()));
            }
        }
        Ok(())
    }
}

/// Loss-tolerant reflectivity estimate from the cross/bar double ratio
/// `rho = (P01 P10) / (P00 P11)`, in which every per-port input and output
/// loss factor cancels; `eta = sqrt(rho) / (1 + sqrt(rho))`.
pub fn double_ratio_reflectivity(p: &PowerMatrix) -> Result<f64> {
    p.validate()?;
    let m = &p.0;
    if m[0][0] == 0.0 || m[1][1] == 0.0 {
        return Err(Error::EstimatorDomain(
            "zero bar-transmission power: eta = 1 is outside the double-ratio domain".into(),
        ));
    }
    let rho = (m[0][1] * m[1][0]) / (m[0][0] * m[1][1]);
    let s = rho.sqrt();
    Ok(s / (1.0 + s))
}

/// Linear-in-electrical-power thermo-optic phase model with nearest-heater
/// cross-talk: `phase = a P_self + b P_neighbor + c`, `P = V^2 / R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkModel {
    /// Self-heating coefficient, rad/W.
    pub a: f64,
    /// Neighbor cross-talk coefficient, rad/W.
    pub b: f64,
    /// Phase offset, rad.
    pub c: f64,
    /// Heater resistance, ohm.
    pub resistance: f64,
    /// Calibrated voltage range.
    pub v_min: f64,
    pub v_max: f64,
}

/// Default heater resistance, ohm.
pub const DEFAULT_RESISTANCE: f64 = 850.0;

/// Evaluated phase plus a flag for extrapolation beyond calibration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseEstimate {
    pub radians: f64,
    pub out_of_range: bool,
}

impl CrosstalkModel {
    pub fn validate(&self) -> Result<()> {
        if self.a <= 0.0 {
            return Err(Error::OutOfRange {
                name: "a",
                value: self.a,
                expected: "> 0",
            });
        }
        if self.b.abs() >= self.a {
            return Err(Error::OutOfRange {
                name: "b",
                value: self.b,
                expected: "|b| < a",
            });
        }
        if self.resistance <= 0.0 {
            return Err(Error::OutOfRange {
                name: "resistance",
                value: self.resistance,
                expected: "> 0",
            });
        }
        Ok(())
    }

    pub fn electrical_power(&self, volts: f64) -> f64 {
        volts * volts / self.resistance
    }

    /// Evaluate the model; flags voltages outside the calibrated range.
    pub fn phase_from_heater(&self, v_self: f64, v_neighbor: f64) -> PhaseEstimate {
        let in_range = |v: f64| (self.v_min..=self.v_max).contains(&v.abs());
        PhaseEstimate {
            radians: self.a * self.electrical_power(v_self)
                + self.b * self.electrical_power(v_neighbor)
                + self.c,
            out_of_range: !in_range(v_self) || !in_range(v_neighbor),
        }
    }

    /// Largest self-heating phase swing over the calibrated voltage range.
    pub fn reachable_phase_range(&self) -> f64 {
        self.a * (self.electrical_power(self.v_max) - self.electrical_power(self.v_min))
    }

    /// True when the reachable tuning range covers less than pi/2, i.e. when
    /// state preparation and analysis are confined to one octant of the
    /// Bloch sphere per shifter.
    pub fn one_octant_limited(&self) -> bool {
        self.reachable_phase_range() < std::f64::consts::FRAC_PI_2 * 1.05
    }
}

/// One fringe measurement: heater voltages and the optical power seen on a
/// monitor output, following `A + B cos(phase)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub v_self: f64,
    pub v_neighbor: f64,
    pub power: f64,
}

/// Cross-talk fit result: model coefficients plus the fringe parameters and
/// residual RMS of the fit.
#[derive(Clone, Debug, PartialEq)]
pub struct CrosstalkFit {
    pub model: CrosstalkModel,
    pub fringe_offset: f64,
    pub fringe_amplitude: f64,
    pub residual_rms: f64,
}

/// Fit `power = A + B cos(a P_self + b P_neighbor + c)` over a 2D voltage
/// sweep. Deterministic: a 1D scan over the fringe frequency `a` with a
/// linear per-neighbor-block phasor fit seeds the parameters, then
/// Levenberg-Marquardt refines all five jointly.
pub fn fit_crosstalk(sweep: &[SweepPoint], resistance: f64) -> Result<CrosstalkFit> {
    if sweep.len() < 8 {
        return Err(Error::IllConditionedFit { cond: f64::INFINITY });
    }
    let p_self: Vec<f64> = sweep.iter().map(|s| s.v_self.powi(2) / resistance).collect();
    let p_neigh: Vec<f64> = sweep.iter().map(|s| s.v_neighbor.powi(2) / resistance).collect();

    // Group points into neighbor blocks (constant neighbor power).
    let mut block_powers: Vec<f64> = Vec::new();
    let mut block_of: Vec<usize> = Vec::with_capacity(sweep.len());
    for &pn in &p_neigh {
        let found = block_powers.iter().position(|&bp| (bp - pn).abs() < 1e-12);
        match found {
            Some(j) => block_of.push(j),
            None => {
                block_powers.push(pn);
                block_of.push(block_powers.len() - 1);
            }
        }
    }
    let nblocks = block_powers.len();

    let ps_min = p_self.iter().cloned().fold(f64::MAX, f64::min);
    let ps_max = p_self.iter().cloned().fold(f64::MIN, f64::max);
    let span = ps_max - ps_min;
    if span <= 0.0 {
        return Err(Error::IllConditionedFit { cond: f64::INFINITY });
    }

    // Seed the fringe frequency by scanning `a` and solving the linear
    // phasor model power = A + C_j cos(a P_self) + S_j sin(a P_self) per
    // block. The mean self-power step bounds the resolvable frequency.
    let mut sorted_ps = p_self.clone();
    sorted_ps.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sorted_ps.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    if sorted_ps.len() < 4 {
        return Err(Error::IllConditionedFit { cond: f64::INFINITY });
    }
    let mean_step = span / (sorted_ps.len() - 1) as f64;
    let a_limit = std::f64::consts::PI / mean_step;
    let n = sweep.len();
    let solve_phasor = |a: f64| -> Option<(f64, DVector<f64>, f64)> {
        let cols = 1 + 2 * nblocks;
        let design = DMatrix::from_fn(n, cols, |i, j| {
            if j == 0 {
                1.0
            } else {
                let blk = (j - 1) / 2;
                if block_of[i] != blk {
                    0.0
                } else if (j - 1) % 2 == 0 {
                    (a * p_self[i]).cos()
                } else {
                    (a * p_self[i]).sin()
                }
            }
        });
        let svd = design.clone().svd(true, true);
        let smax = svd.singular_values[0];
        let smin = svd.singular_values[svd.singular_values.len() - 1];
        let cond = smax / smin.max(1e-300);
        let target = DVector::from_fn(n, |i, _| sweep[i].power);
        let coeffs = svd.solve(&target, 1e-12).ok()?;
        let residual = (&design * &coeffs - &target).norm();
        Some((residual, coeffs, cond))
    };

    let mut best: Option<(f64, f64, DVector<f64>)> = None;
    let mut worst_cond = 0.0f64;
    let scan = |lo: f64, hi: f64, points: usize, best: &mut Option<(f64, f64, DVector<f64>)>, worst_cond: &mut f64| {
        for k in 0..=points {
            let a = lo + (hi - lo) * k as f64 / points as f64;
            if a <= 0.0 {
                continue;
            }
            if let Some((residual, coeffs, cond)) = solve_phasor(a) {
                *worst_cond = worst_cond.max(cond);
                if cond > 1e8 {
                    continue;
                }
                if best.as_ref().map_or(true, |(br, _, _)| residual < *br) {
                    *best = Some((residual, a, coeffs));
                }
            }
        }
    };
    scan(0.0, a_limit, 256, &mut best, &mut worst_cond);
    // Zoom in around the coarse winner for an accurate seed.
    let mut width = a_limit / 256.0;
    for _ in 0..3 {
        let Some(center) = best.as_ref().map(|(_, a, _)| *a) else { break };
        scan(center - width, center + width, 40, &mut best, &mut worst_cond);
        width /= 10.0;
    }
    let (_, mut ca, coeffs) =
        best.ok_or(Error::IllConditionedFit { cond: worst_cond.max(1e9) })?;

    let mut a_off = coeffs[0];
    let mut amps = Vec::with_capacity(nblocks);
    let mut phis = Vec::with_capacity(nblocks);
    for j in 0..nblocks {
        let (cj, sj) = (coeffs[1 + 2 * j], coeffs[2 + 2 * j]);
        amps.push(cj.hypot(sj));
        // C cos(ap) + S sin(ap) = B cos(ap + phi) with phi = atan2(-S, C).
        phis.push((-sj).atan2(cj));
    }
    let mut b_amp = amps.iter().sum::<f64>() / nblocks as f64;
    if b_amp <= 0.0 {
        return Err(Error::IllConditionedFit { cond: f64::INFINITY });
    }
    // Unwrap block phases around the first block and fit phi ~ b P_n + c.
    for j in 1..nblocks {
        while phis[j] - phis[0] > std::f64::consts::PI {
            phis[j] -= std::f64::consts::TAU;
        }
        while phis[j] - phis[0] < -std::f64::consts::PI {
            phis[j] += std::f64::consts::TAU;
        }
    }
    let (mut cb, mut cc) = if nblocks >= 2 {
        let mean_pn = block_powers.iter().sum::<f64>() / nblocks as f64;
        let mean_phi = phis.iter().sum::<f64>() / nblocks as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..nblocks {
            num += (block_powers[j] - mean_pn) * (phis[j] - mean_phi);
            den += (block_powers[j] - mean_pn).powi(2);
        }
        let slope = if den > 0.0 { num / den } else { 0.0 };
        (slope, mean_phi - slope * mean_pn)
    } else {
        (0.0, phis[0])
    };

    // Levenberg-Marquardt refinement of (a, b, c, A, B) on the raw powers.
    let cost = |pars: &[f64; 5]| -> f64 {
        let mut ss = 0.0;
        for i in 0..n {
            let ph = pars[0] * p_self[i] + pars[1] * p_neigh[i] + pars[2];
            ss += (sweep[i].power - (pars[3] + pars[4] * ph.cos())).powi(2);
        }
        ss
    };
    let mut pars = [ca, cb, cc, a_off, b_amp];
    let mut lambda = 1e-3;
    let mut current = cost(&pars);
    for _ in 0..400 {
        let mut jac = DMatrix::zeros(n, 5);
        let mut res = DVector::zeros(n);
        for i in 0..n {
            let ph = pars[0] * p_self[i] + pars[1] * p_neigh[i] + pars[2];
            let (sin, cos) = ph.sin_cos();
            res[i] = sweep[i].power - (pars[3] + pars[4] * cos);
            jac[(i, 0)] = pars[4] * sin * p_self[i];
            jac[(i, 1)] = pars[4] * sin * p_neigh[i];
            jac[(i, 2)] = pars[4] * sin;
            jac[(i, 3)] = -1.0;
            jac[(i, 4)] = -cos;
        }
        let jt = jac.transpose();
        let normal = &jt * &jac;
        let rhs = &jt * &res;
        let mut stepped = false;
        for _ in 0..30 {
            let mut damped = normal.clone();
            for k in 0..5 {
                damped[(k, k)] += lambda * normal[(k, k)].max(1e-12);
            }
            if let Some(step) = damped.lu().solve(&rhs) {
                let mut trial = pars;
                for k in 0..5 {
                    trial[k] -= step[k];
                }
                let trial_cost = cost(&trial);
                if trial_cost <= current {
                    let gain = current - trial_cost;
                    pars = trial;
                    current = trial_cost;
                    lambda = (lambda * 0.3).max(1e-12);
                    stepped = true;
                    if gain < 1e-24 {
                        break;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !stepped {
            break;
        }
    }
    [ca, cb, cc, a_off, b_amp] = pars;
    // Canonicalize: positive fringe amplitude and ascending phase.
    if b_amp < 0.0 {
        b_amp = -b_amp;
        cc += std::f64::consts::PI;
        // cos is even; flipping B is a pi shift of the phase.
    }
    if ca < 0.0 {
        ca = -ca;
        cb = -cb;
        cc = -cc;
    }
    cc = cc.rem_euclid(2.0 * std::f64::consts::PI);

    let mut ss = 0.0;
    for (i, s) in sweep.iter().enumerate() {
        let ph = ca * p_self[i] + cb * p_neigh[i] + cc;
        ss += (s.power - (a_off + b_amp * ph.cos())).powi(2);
    }
    let residual_rms = (ss / sweep.len() as f64).sqrt();

    let vmax = sweep
        .iter()
        .flat_map(|s| [s.v_self.abs(), s.v_neighbor.abs()])
        .fold(0.0f64, f64::max);
    let model = CrosstalkModel {
        a: ca,
        b: cb,
        c: cc,
        resistance,
        v_min: 0.0,
        v_max: vmax,
    };
    model.validate()?;
    Ok(CrosstalkFit {
        model,
        fringe_offset: a_off,
        fringe_amplitude: b_amp,
        residual_rms,
    })
}

// ---------------------------------------------------------------------------
// Sweep CSV and layout calibration lines
// ---------------------------------------------------------------------------

pub const SWEEP_CSV_HEADER: &str = "v_self,v_neighbor,power";

pub fn read_sweep_csv<R: BufRead>(input: R) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with("v_self") {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Config(format!(
                "sweep csv line {}: expected 3 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Config(format!("sweep csv line {}: bad {what}", lineno + 1)))
        };
        points.push(SweepPoint {
            v_self: parse(fields[0], "v_self")?,
            v_neighbor: parse(fields[1], "v_neighbor")?,
            power: parse(fields[2], "power")?,
        });
    }
    Ok(points)
}

pub fn write_sweep_csv<W: Write>(out: &mut W, points: &[SweepPoint]) -> Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for p in points {
        writeln!(out, "{},{},{}", p.v_self, p.v_neighbor, p.power)?;
    }
    Ok(())
}

/// Calibration line in layout-file syntax:
/// `HEATERCAL <name> <a> <b> <c> <R> <v_min> <v_max>`.
pub fn heatercal_line(name: &str, model: &CrosstalkModel) -> String {
    format!(
        "HEATERCAL {} {} {} {} {} {} {}",
        name, model.a, model.b, model.c, model.resistance, model.v_min, model.v_max
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn synthetic_sweep(model: &CrosstalkModel, a_off: f64, b_amp: f64) -> Vec<SweepPoint> {
        let mut sweep = Vec::new();
        for nv in 0..6 {
            let v_neighbor = model.v_max * nv as f64 / 5.0;
            for sv in 0..40 {
                let v_self = model.v_max * sv as f64 / 39.0;
                let ph = model.phase_from_heater(v_self, v_neighbor).radians;
                sweep.push(SweepPoint {
                    v_self,
                    v_neighbor,
                    power: a_off + b_amp * ph.cos(),
                });
            }
        }
        sweep
    }

    // Sweep spans a couple of fringe periods so all five parameters are
    // well identified.
    fn realistic_model() -> CrosstalkModel {
        CrosstalkModel {
            a: 600.0,
            b: 30.0,
            c: 0.4,
            resistance: DEFAULT_RESISTANCE,
            v_min: 0.0,
            v_max: 4.5,
        }
    }

    #[test]
    fn double_ratio_exact_under_losses() {
        let p = PowerMatrix::synthetic(1.0 / 3.0, [0.7, 0.5], [0.9, 0.4]);
        assert_relative_eq!(
            double_ratio_reflectivity(&p).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn double_ratio_symmetric_point() {
        let p = PowerMatrix::synthetic(0.5, [1.0, 1.0], [1.0, 1.0]);
        assert_relative_eq!(double_ratio_reflectivity(&p).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn double_ratio_invariant_under_column_scaling() {
        let mut p = PowerMatrix::synthetic(0.29, [0.8, 0.6], [0.7, 0.95]);
        let base = double_ratio_reflectivity(&p).unwrap();
        p.0[0][0] *= 3.0;
        p.0[1][0] *= 3.0;
        assert_relative_eq!(double_ratio_reflectivity(&p).unwrap(), base, epsilon = 1e-15);
    }

    #[test]
    fn double_ratio_randomized_loss_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let eta = rng.gen_range(0.02..0.98);
            let l = |rng: &mut ChaCha8Rng| rng.gen_range(0.05..1.0);
            let p = PowerMatrix::synthetic(
                eta,
                [l(&mut rng), l(&mut rng)],
                [l(&mut rng), l(&mut rng)],
            );
            let est = double_ratio_reflectivity(&p).unwrap();
            assert!((est - eta).abs() < 1e-12, "eta {eta} est {est}");
        }
    }

    #[test]
    fn double_ratio_rejects_eta_one_edge() {
        let p = PowerMatrix(
            [[0.0, 1.0], [1.0, 0.0]], // perfect cross coupler
        );
        assert!(double_ratio_reflectivity(&p).is_err());
        assert!(double_ratio_reflectivity(&PowerMatrix([[0.0, 0.0], [1.0, 1.0]])).is_err());
    }

    #[test]
    fn crosstalk_noiseless_round_trip() {
        let truth = realistic_model();
        let sweep = synthetic_sweep(&truth, 2.0, 1.3);
        let fit = fit_crosstalk(&sweep, truth.resistance).unwrap();
        assert_relative_eq!(fit.model.a, truth.a, max_relative = 1e-9);
        assert_relative_eq!(fit.model.b, truth.b, max_relative = 1e-9);
        assert_relative_eq!(fit.model.c, truth.c, max_relative = 1e-9);
        assert_relative_eq!(fit.fringe_offset, 2.0, max_relative = 1e-9);
        assert_relative_eq!(fit.fringe_amplitude, 1.3, max_relative = 1e-9);
        assert!(fit.residual_rms < 1e-9);
    }

    #[test]
    fn crosstalk_null_neighbor_case() {
        let truth = CrosstalkModel { b: 0.0, ..realistic_model() };
        let sweep = synthetic_sweep(&truth, 1.5, 0.9);
        let fit = fit_crosstalk(&sweep, truth.resistance).unwrap();
        assert!(fit.model.b.abs() < 1e-8, "spurious cross-talk {}", fit.model.b);
    }

    #[test]
    fn crosstalk_robust_to_power_noise() {
        let truth = realistic_model();
        let clean = synthetic_sweep(&truth, 2.0, 1.3);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let noisy: Vec<SweepPoint> = clean
                .iter()
                .map(|p| SweepPoint {
                    power: p.power * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)),
                    ..*p
                })
                .collect();
            let fit = fit_crosstalk(&noisy, truth.resistance).unwrap();
            worst = worst
                .max((fit.model.a / truth.a - 1.0).abs())
                .max((fit.model.c / truth.c - 1.0).abs());
        }
        assert!(worst < 0.05, "worst relative error {worst}");
    }

    #[test]
    fn crosstalk_rejects_degenerate_grid() {
        // Constant self-voltage: phase direction unconstrained.
        let sweep: Vec<SweepPoint> = (0..30)
            .map(|i| SweepPoint {
                v_self: 2.0,
                v_neighbor: 2.0,
                power: 1.0 + 0.001 * i as f64,
            })
            .collect();
        assert!(fit_crosstalk(&sweep, DEFAULT_RESISTANCE).is_err());
    }

    #[test]
    fn phase_from_heater_reference_points() {
        let model = realistic_model();
        let at_zero = model.phase_from_heater(0.0, 0.0);
        assert_relative_eq!(at_zero.radians, model.c, epsilon = 1e-15);
        assert!(!at_zero.out_of_range);
        // Linearity in electrical power.
        let p1 = model.phase_from_heater(1.0, 0.0).radians - model.c;
        let p2 = model.phase_from_heater(2.0, 0.0).radians - model.c;
        assert_relative_eq!(p2, 4.0 * p1, epsilon = 1e-12);
        assert!(model.phase_from_heater(99.0, 0.0).out_of_range);
    }

    #[test]
    fn one_octant_tuning_range() {
        // Coefficients giving ~1.6 rad full swing: confined to one octant.
        let model = CrosstalkModel {
            a: 1.6 / (4.5f64.powi(2) / DEFAULT_RESISTANCE),
            b: 0.5,
            c: 0.0,
            resistance: DEFAULT_RESISTANCE,
            v_min: 0.0,
            v_max: 4.5,
        };
        assert_relative_eq!(model.reachable_phase_range(), 1.6, epsilon = 1e-12);
        assert!(model.one_octant_limited());
        let wide = CrosstalkModel { v_max: 9.0, ..model };
        assert!(!wide.one_octant_limited());
    }

    #[test]
    fn phase_monotone_in_self_voltage() {
        let truth = realistic_model();
        let sweep = synthetic_sweep(&truth, 2.0, 1.3);
        let fit = fit_crosstalk(&sweep, truth.resistance).unwrap();
        for nv in [0.0, 2.0, 4.0] {
            let mut prev = f64::NEG_INFINITY;
            for sv in 0..50 {
                let v = truth.v_max * sv as f64 / 49.0;
                let ph = fit.model.phase_from_heater(v, nv).radians;
                assert!(ph >= prev, "non-monotone at v={v}");
                prev = ph;
            }
        }
    }

    #[test]
    fn sweep_csv_round_trip() {
        let points = vec![
            SweepPoint { v_self: 0.5, v_neighbor: 0.0, power: 1.25 },
            SweepPoint { v_self: 1.5, v_neighbor: 3.0, power: 0.75 },
        ];
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &points).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(SWEEP_CSV_HEADER));
        assert_eq!(read_sweep_csv(text.as_bytes()).unwrap(), points);
        assert!(read_sweep_csv("1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn heatercal_line_round_trips_through_layout_parser() {
        let model = realistic_model();
        let line = heatercal_line("theta2", &model);
        let text = format!("MODES 2\n{line}\n");
        let layout = crate::circuit::parse_layout(&text).unwrap();
        let cal = layout
            .heater_cals
            .iter()
            .find(|c| c.name == "theta2")
            .unwrap();
        assert_relative_eq!(cal.a, model.a, epsilon = 1e-12);
        assert_relative_eq!(cal.b, model.b, epsilon = 1e-12);
        assert_relative_eq!(cal.resistance, model.resistance, epsilon = 1e-12);
    }
}
