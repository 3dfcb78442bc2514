//! End-to-end virtual experiment: load a layout and source description,
//! simulate post-selected counts, reconstruct the teleported states, apply
//! corrections and emit a report.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{parse_layout, CircuitLayout, Element, Stage};
use crate::error::{Error, Result};
use crate::protocol::{
    bsm_outcomes, fidelity, haar_state, ideal_corrections, measurement_projector,
    optimal_corrections, prepare_qubit, CorrectionSet, Teleporter,
    CLASSICAL_FIDELITY_BOUND, CLONING_FIDELITY_BOUND,
};
use crate::rng::substream;
use crate::source::SourceModel;
use crate::tomography::{
    mle_reconstruct, monte_carlo_fidelity, CountRecord, LikelihoodModel, MeasurementModel,
};

type C64 = Complex64;

pub const REPORT_VERSION: &str = "1.0";

/// Four-fold coincidence rate used for wall-clock metadata, Hz.
pub const DEFAULT_EVENT_RATE_HZ: f64 = 0.005;

/// Beam-splitter reflectivity spread (1-sigma, absolute) representative of
/// fabrication deviations; calibrated so deviations alone cost ~10% average
/// fidelity.
pub const DEFAULT_ETA_SPREAD: f64 = 0.105;

/// Smaller reflectivity spread used alongside the full source noise model,
/// where source imperfections already dominate the fidelity loss.
pub const FULL_NOISE_ETA_SPREAD: f64 = 0.03;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CorrectionMode {
    Ideal,
    Optimized,
    Supplied,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub layout_path: PathBuf,
    pub source: SourceModel,
    /// Input states as (theta, phi) preparation angles.
    pub inputs: Vec<(f64, f64)>,
    /// Analyzer settings as (theta2, phi2) heater phases.
    pub tomo_settings: Vec<(f64, f64)>,
    /// Post-selected events per (setting, outcome) cell.
    pub shots: u64,
    pub seed: u64,
    pub correction_mode: CorrectionMode,
    /// Correction set for `CorrectionMode::Supplied`.
    pub supplied_corrections: Option<CorrectionSet>,
    pub output_format: OutputFormat,
    pub likelihood: LikelihoodModel,
    pub monte_carlo_trials: usize,
    pub event_rate_hz: f64,
}

/// Analyzer heater phases measuring the basis state with Bloch angles
/// (a, b) on the bundled analyzer MZI.
pub fn analyzer_settings_for(a: f64, b: f64) -> (f64, f64) {
    (std::f64::consts::PI - a, b)
}

/// Chip-convention analyzer settings for Z, X and Y measurements.
pub fn chip_standard_settings() -> [(f64, f64); 3] {
    [
        analyzer_settings_for(0.0, 0.0),
        analyzer_settings_for(std::f64::consts::FRAC_PI_2, 0.0),
        analyzer_settings_for(std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
    ]
}

/// Preparation MZI heater phases producing
/// `cos(theta/2)|0_L> + e^{i phi} sin(theta/2)|1_L>`.
pub fn prep_heater_settings(theta: f64, phi: f64) -> (f64, f64) {
    (std::f64::consts::PI - theta, -phi)
}

impl ExperimentConfig {
    /// Parse the flat key-value config format with `[source]`, `[inputs]`
    /// and `[tomography]` sections. `base_dir` anchors relative paths.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut layout_path: Option<PathBuf> = None;
        let mut seed: Option<u64> = None;
        let mut shots: u64 = 100;
        let mut correction_mode = CorrectionMode::Ideal;
        let mut corrections_path: Option<PathBuf> = None;
        let mut output_format = OutputFormat::Json;
        let mut likelihood = LikelihoodModel::Poisson;
        let mut monte_carlo_trials = 200usize;
        let mut event_rate_hz = DEFAULT_EVENT_RATE_HZ;
        let mut source = SourceModel::ideal();
        let mut inputs: Vec<(f64, f64)> = Vec::new();
        let mut tomo: Vec<(f64, f64)> = Vec::new();

        #[derive(PartialEq)]
        enum Section {
            Top,
            Source,
            Inputs,
            Tomography,
        }
        let mut section = Section::Top;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config(format!("config line {}: {msg}", lineno + 1));
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = match name {
                    "source" => Section::Source,
                    "inputs" => Section::Inputs,
                    "tomography" => Section::Tomography,
                    other => return Err(err(format!("unknown section [{other}]"))),
                };
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err("expected key = value".into()))?;
            let parse_f64 = |v: &str| -> Result<f64> {
                v.parse().map_err(|_| err(format!("bad number {v:?}")))
            };
            let parse_pair = |v: &str| -> Result<(f64, f64)> {
                let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                if parts.len() != 2 {
                    return Err(err(format!("expected two comma-separated numbers, got {v:?}")));
                }
                Ok((parse_f64(parts[0])?, parse_f64(parts[1])?))
            };
            match section {
                Section::Top => match key {
                    "layout" => layout_path = Some(base_dir.join(value)),
                    "seed" => {
                        seed = Some(value.parse().map_err(|_| err(format!("bad seed {value:?}")))?)
                    }
                    "shots" => {
                        shots = value.parse().map_err(|_| err(format!("bad shots {value:?}")))?
                    }
                    "correction_mode" => {
                        correction_mode = match value {
                            "ideal" => CorrectionMode::Ideal,
                            "optimized" => CorrectionMode::Optimized,
                            "supplied" => CorrectionMode::Supplied,
                            other => return Err(err(format!("unknown correction_mode {other:?}"))),
                        }
                    }
                    "corrections" => corrections_path = Some(base_dir.join(value)),
                    "output_format" => {
                        output_format = match value {
                            "json" => OutputFormat::Json,
                            "csv" => OutputFormat::Csv,
                            other => return Err(err(format!("unknown output_format {other:?}"))),
                        }
                    }
                    "likelihood" => {
                        likelihood = match value {
                            "poisson" => LikelihoodModel::Poisson,
                            "multinomial" => LikelihoodModel::Multinomial,
                            other => return Err(err(format!("unknown likelihood {other:?}"))),
                        }
                    }
                    "monte_carlo_trials" => {
                        monte_carlo_trials = value
                            .parse()
                            .map_err(|_| err(format!("bad monte_carlo_trials {value:?}")))?
                    }
                    "event_rate_hz" => event_rate_hz = parse_f64(value)?,
                    other => return Err(err(format!("unknown key {other:?}"))),
                },
                Section::Source => match key {
                    "lambda_sq" => source.lambda_sq = parse_f64(value)?,
                    "v_nn" => source.v_nn = parse_f64(value)?,
                    "v_nb" => source.v_nb = parse_f64(value)?,
                    "herald_transmission" => source.herald_transmission = parse_f64(value)?,
                    "transmissions" => {
                        let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                        if parts.len() != 3 {
                            return Err(err("transmissions needs three values".into()));
                        }
                        for (i, p) in parts.iter().enumerate() {
                            source.transmissions[i] = parse_f64(p)?;
                        }
                    }
                    other => return Err(err(format!("unknown source key {other:?}"))),
                },
                Section::Inputs => match key {
                    "state" => inputs.push(parse_pair(value)?),
                    other => return Err(err(format!("unknown inputs key {other:?}"))),
                },
                Section::Tomography => match key {
                    "setting" => tomo.push(parse_pair(value)?),
                    other => return Err(err(format!("unknown tomography key {other:?}"))),
                },
            }
        }

        let supplied_corrections = match (&correction_mode, corrections_path) {
            (CorrectionMode::Supplied, Some(path)) => {
                let text = fs::read_to_string(&path)?;
                Some(parse_corrections_json(&text)?)
            }
            (CorrectionMode::Supplied, None) => {
                return Err(Error::Config(
                    "correction_mode = supplied requires a corrections = <path> key".into(),
                ))
            }
            _ => None,
        };

        let config = ExperimentConfig {
            layout_path: layout_path
                .ok_or_else(|| Error::Config("missing layout = <path>".into()))?,
            source,
            inputs,
            tomo_settings: if tomo.is_empty() {
                chip_standard_settings().to_vec()
            } else {
                tomo
            },
            shots,
            seed: seed.ok_or_else(|| Error::Config("seed is mandatory".into()))?,
            correction_mode,
            supplied_corrections,
            output_format,
            likelihood,
            monte_carlo_trials,
            event_rate_hz,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::Config("shots must be > 0".into()));
        }
        if self.tomo_settings.len() < 3 {
            return Err(Error::Config(
                "at least 3 tomography settings are required".into(),
            ));
        }
        if self.inputs.is_empty() {
            return Err(Error::Config("at least one input state is required".into()));
        }
        self.source.validate()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Report structures
// ---------------------------------------------------------------------------

/// 2x2 complex matrix split into real and imaginary parts for JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrixParts {
    pub re: [[f64; 2]; 2],
    pub im: [[f64; 2]; 2],
}

impl ComplexMatrixParts {
    pub fn from_matrix(m: &Matrix2<C64>) -> Self {
        ComplexMatrixParts {
            re: [[m[(0, 0)].re, m[(0, 1)].re], [m[(1, 0)].re, m[(1, 1)].re]],
            im: [[m[(0, 0)].im, m[(0, 1)].im], [m[(1, 0)].im, m[(1, 1)].im]],
        }
    }

    pub fn to_matrix(&self) -> Matrix2<C64> {
        Matrix2::new(
            C64::new(self.re[0][0], self.im[0][0]),
            C64::new(self.re[0][1], self.im[0][1]),
            C64::new(self.re[1][0], self.im[1][0]),
            C64::new(self.re[1][1], self.im[1][1]),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountCell {
    pub theta2: f64,
    pub phi2: f64,
    pub pass_counts: u64,
    pub fail_counts: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub outcome_index: usize,
    pub label: String,
    /// Absolute post-selection probability of this outcome.
    pub probability: f64,
    pub counts: Vec<CountCell>,
    pub reconstructed_state: ComplexMatrixParts,
    pub correction: ComplexMatrixParts,
    pub fidelity: f64,
    pub fidelity_sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputReport {
    pub theta: f64,
    pub phi: f64,
    pub outcomes: Vec<OutcomeReport>,
    pub mean_fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    /// Wall-clock timestamp; the only field allowed to differ between
    /// reruns of the same config and seed.
    pub timestamp: Option<String>,
    pub seed: u64,
    pub layout: String,
    pub shots_per_cell: u64,
    pub total_postselected_events: u64,
    pub assumed_event_rate_hz: f64,
    /// Time a real experiment at the assumed rate would need for this data.
    pub estimated_duration_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub metadata: ReportMetadata,
    pub inputs: Vec<InputReport>,
    /// Input-averaged fidelity per Bell outcome, index order as listed.
    pub outcome_mean_fidelity: [f64; 4],
    pub overall_mean_fidelity: f64,
    pub classical_bound: f64,
    pub cloning_bound: f64,
}

pub fn parse_report(text: &str) -> Result<ExperimentReport> {
    Ok(serde_json::from_str(text)?)
}

fn corrections_to_json(set: &CorrectionSet) -> serde_json::Value {
    serde_json::json!(set
        .0
        .iter()
        .map(ComplexMatrixParts::from_matrix)
        .collect::<Vec<_>>())
}

pub fn write_corrections_json(set: &CorrectionSet) -> String {
    serde_json::to_string_pretty(&corrections_to_json(set)).expect("serialize corrections")
}

pub fn parse_corrections_json(text: &str) -> Result<CorrectionSet> {
    let parts: Vec<ComplexMatrixParts> = serde_json::from_str(text)?;
    if parts.len() != 4 {
        return Err(Error::Config(format!(
            "corrections file must hold 4 matrices, got {}",
            parts.len()
        )));
    }
    let matrices: Vec<Matrix2<C64>> = parts.iter().map(ComplexMatrixParts::to_matrix).collect();
    Ok(CorrectionSet(matrices.try_into().unwrap()))
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

/// Projector measured by the analyzer at heater phases (theta2, phi2): from
/// the layout's tomography stage when it has one, otherwise the analytic
/// analyzer convention.
fn analyzer_projector(
    layout: &CircuitLayout,
    theta2: f64,
    phi2: f64,
) -> Result<Matrix2<C64>> {
    let has_tomo_stage = layout
        .elements
        .iter()
        .any(|(stage, _)| *stage == Stage::Tomography);
    if !has_tomo_stage {
        return Ok(measurement_projector(theta2, phi2));
    }
    let mut phases = HashMap::new();
    phases.insert("theta2".to_string(), theta2);
    phases.insert("phi2".to_string(), phi2);
    let v = layout.stage_qubit_block(Stage::Tomography, "Q3", &phases)?;
    let row0 = v.row(0);
    Ok(row0.adjoint() * row0)
}

fn resolve_corrections(
    config: &ExperimentConfig,
    layout: &CircuitLayout,
) -> Result<CorrectionSet> {
    match config.correction_mode {
        CorrectionMode::Ideal => Ok(ideal_corrections()),
        CorrectionMode::Optimized => {
            let seed = substream(config.seed, "haar-samples").gen::<u64>();
            let (set, _) = optimal_corrections(layout, &config.source, 10_000, seed)?;
            Ok(set)
        }
        CorrectionMode::Supplied => config
            .supplied_corrections
            .clone()
            .ok_or_else(|| Error::Config("supplied correction mode without corrections".into())),
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let text = fs::read_to_string(&config.layout_path)?;
    let layout = parse_layout(&text)?;
    run_experiment_with_layout(config, &layout)
}

pub fn run_experiment_with_layout(
    config: &ExperimentConfig,
    layout: &CircuitLayout,
) -> Result<ExperimentReport> {
    config.validate()?;
    let teleporter = Teleporter::new(layout, &HashMap::new())?;
    let corrections = resolve_corrections(config, layout)?;
    let outcomes = bsm_outcomes();

    let projectors: Vec<Matrix2<C64>> = config
        .tomo_settings
        .iter()
        .map(|&(t2, p2)| analyzer_projector(layout, t2, p2))
        .collect::<Result<_>>()?;

    let context = |i: usize, what: &str, e: Error| {
        Error::Config(format!(
            "input {} (theta={}, phi={}), {what}: {e}",
            i, config.inputs[i].0, config.inputs[i].1
        ))
    };

    let mut input_reports = Vec::with_capacity(config.inputs.len());
    for (i, &(theta, phi)) in config.inputs.iter().enumerate() {
        let psi = prepare_qubit(theta, phi);
        let states = teleporter
            .conditional_states(&config.source, &psi)
            .map_err(|e| context(i, "conditional states", e))?;

        let mut outcome_reports = Vec::with_capacity(4);
        for outcome in &outcomes {
            let cond = &states[outcome.index];
            // Sample counts: `shots` post-selected events per setting cell.
            let mut records = Vec::with_capacity(config.tomo_settings.len());
            for (s, (&(theta2, phi2), projector)) in config
                .tomo_settings
                .iter()
                .zip(&projectors)
                .enumerate()
            {
                let p_pass = (projector * cond.state.0).trace().re.clamp(0.0, 1.0);
                let mut rng = substream(
                    config.seed,
                    &format!("counts/input{i}/outcome{}/setting{s}", outcome.index),
                );
                let mut pass = 0u64;
                for _ in 0..config.shots {
                    if rng.gen::<f64>() < p_pass {
                        pass += 1;
                    }
                }
                records.push(CountRecord {
                    outcome_index: outcome.index,
                    theta2,
                    phi2,
                    pass_counts: pass,
                    fail_counts: config.shots - pass,
                });
            }

            let measurement = MeasurementModel::Characterized(projectors.clone());
            let rho = mle_reconstruct(&records, &measurement, config.likelihood)
                .map_err(|e| context(i, &format!("MLE for outcome {}", outcome.index), e))?;
            let correction = corrections.0[outcome.index];
            let f = fidelity(&rho, &psi, &correction);
            let mc_seed = substream(
                config.seed,
                &format!("monte-carlo/input{i}/outcome{}", outcome.index),
            )
            .gen::<u64>();
            let (_, sigma) = monte_carlo_fidelity(
                &records,
                &measurement,
                config.likelihood,
                &psi,
                &correction,
                config.monte_carlo_trials.max(100),
                mc_seed,
            )
            .map_err(|e| context(i, &format!("Monte Carlo for outcome {}", outcome.index), e))?;

            outcome_reports.push(OutcomeReport {
                outcome_index: outcome.index,
                label: outcome.label(),
                probability: cond.probability,
                counts: records
                    .iter()
                    .map(|r| CountCell {
                        theta2: r.theta2,
                        phi2: r.phi2,
                        pass_counts: r.pass_counts,
                        fail_counts: r.fail_counts,
                    })
                    .collect(),
                reconstructed_state: ComplexMatrixParts::from_matrix(&rho.0),
                correction: ComplexMatrixParts::from_matrix(&correction),
                fidelity: f,
                fidelity_sigma: sigma,
            });
        }
        let mean_fidelity =
            outcome_reports.iter().map(|o| o.fidelity).sum::<f64>() / outcome_reports.len() as f64;
        input_reports.push(InputReport {
            theta,
            phi,
            outcomes: outcome_reports,
            mean_fidelity,
        });
    }

    let mut outcome_mean = [0.0f64; 4];
    for rep in &input_reports {
        for o in &rep.outcomes {
            outcome_mean[o.outcome_index] += o.fidelity / input_reports.len() as f64;
        }
    }
    let overall = input_reports.iter().map(|r| r.mean_fidelity).sum::<f64>()
        / input_reports.len() as f64;

    let total_events = config.shots
        * config.tomo_settings.len() as u64
        * 4
        * config.inputs.len() as u64;
    Ok(ExperimentReport {
        version: REPORT_VERSION.to_string(),
        metadata: ReportMetadata {
            timestamp: None,
            seed: config.seed,
            layout: config.layout_path.display().to_string(),
            shots_per_cell: config.shots,
            total_postselected_events: total_events,
            assumed_event_rate_hz: config.event_rate_hz,
            estimated_duration_seconds: total_events as f64 / config.event_rate_hz,
        },
        inputs: input_reports,
        outcome_mean_fidelity: outcome_mean,
        overall_mean_fidelity: overall,
        classical_bound: CLASSICAL_FIDELITY_BOUND,
        cloning_bound: CLONING_FIDELITY_BOUND,
    })
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

pub const REPORT_CSV_HEADER: &str =
    "input_theta,input_phi,outcome_index,outcome_label,probability,fidelity,fidelity_sigma";

pub fn report_to_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for input in &report.inputs {
        for o in &input.outcomes {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                input.theta,
                input.phi,
                o.outcome_index,
                o.label,
                o.probability,
                o.fidelity,
                o.fidelity_sigma
            ));
        }
    }
    out
}

pub const PLOT_DATA_HEADER: &str =
    "input_index,input_theta,input_phi,outcome_index,fidelity,fidelity_sigma,classical_bound,cloning_bound";

pub fn report_plot_data(report: &ExperimentReport) -> String {
    let mut out = String::from(PLOT_DATA_HEADER);
    out.push('\n');
    for (i, input) in report.inputs.iter().enumerate() {
        for o in &input.outcomes {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                i,
                input.theta,
                input.phi,
                o.outcome_index,
                o.fidelity,
                o.fidelity_sigma,
                report.classical_bound,
                report.cloning_bound
            ));
        }
    }
    out
}

/// Write the report (and its plot-data sidecar) to `path`; returns the
/// written file paths.
pub fn emit_report(
    report: &ExperimentReport,
    format: OutputFormat,
    path: &Path,
) -> Result<Vec<PathBuf>> {
    let body = match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            s
        }
        OutputFormat::Csv => report_to_csv(report),
    };
    fs::write(path, body)?;
    let plot_path = path.with_extension("plot.csv");
    fs::write(&plot_path, report_plot_data(report))?;
    Ok(vec![path.to_path_buf(), plot_path])
}

// ---------------------------------------------------------------------------
// Error budget
// ---------------------------------------------------------------------------

/// Parameter grid for the error-budget scan. Each axis is scanned with the
/// other noise sources at their ideal values.
#[derive(Clone, Debug)]
pub struct BudgetGrid {
    pub eta_spread: Vec<f64>,
    pub lambda_sq: Vec<f64>,
    pub one_minus_visibility: Vec<f64>,
    pub loss_unbalance: Vec<f64>,
}

impl Default for BudgetGrid {
    fn default() -> Self {
        BudgetGrid {
            eta_spread: vec![0.0, 0.04, 0.08, DEFAULT_ETA_SPREAD],
            lambda_sq: vec![0.0, 0.01, 0.03, 0.1],
            one_minus_visibility: vec![0.0, 0.01, 0.03, 0.1],
            loss_unbalance: vec![0.0, 0.2, 0.4],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub axis: String,
    pub value: f64,
    pub average_fidelity: f64,
}

/// Clone the layout with every coupler reflectivity perturbed by Gaussian
/// deviations of width `spread` (absolute), clamped away from 0 and 1.
pub fn perturb_couplers<R: Rng>(
    layout: &CircuitLayout,
    spread: f64,
    rng: &mut R,
) -> CircuitLayout {
    use rand_distr::StandardNormal;
    let mut out = layout.clone();
    for (_, element) in &mut out.elements {
        if let Element::Coupler { eta, .. } = element {
            let d: f64 = rng.sample(StandardNormal);
            *eta = (*eta + spread * d).clamp(0.02, 0.98);
        }
    }
    out
}

/// Average teleportation fidelity of a layout + source, with ideal Pauli
/// corrections, over `n_samples` Haar-random inputs, outcome-weighted by
/// their probabilities.
pub fn average_layout_fidelity(
    layout: &CircuitLayout,
    source: &SourceModel,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let teleporter = Teleporter::new(layout, &HashMap::new())?;
    let corrections = ideal_corrections();
    let mut rng = substream(seed, "haar-samples");
    let mut total = 0.0;
    let mut mass = 0.0;
    for _ in 0..n_samples {
        let psi = haar_state(&mut rng);
        let states = teleporter.conditional_states(source, &psi)?;
        for (k, s) in states.iter().enumerate() {
            total += s.probability * fidelity(&s.state, &psi, &corrections.0[k]);
            mass += s.probability;
        }
    }
    if mass <= 0.0 {
        return Err(Error::ZeroProbabilityOutcome);
    }
    Ok(total / mass)
}

/// Patterns averaged per eta-spread grid point.
pub const BUDGET_ETA_PATTERNS: usize = 10;

/// Error-budget scan: average fidelity per grid point, one noise source at a
/// time. Deterministic per seed; eta-deviation points average over
/// `BUDGET_ETA_PATTERNS` fixed random coupler patterns scaled to the grid
/// value.
pub fn budget_scan(
    layout: &CircuitLayout,
    grid: &BudgetGrid,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<BudgetRow>> {
    let mut rows = Vec::new();
    for &spread in &grid.eta_spread {
        let mut total = 0.0;
        for pattern in 0..BUDGET_ETA_PATTERNS {
            let mut rng = substream(seed, &format!("budget/eta-pattern{pattern}"));
            let perturbed = perturb_couplers(layout, spread, &mut rng);
            total += average_layout_fidelity(
                &perturbed,
                &SourceModel::ideal(),
                n_samples,
                seed ^ 0x5eed,
            )?;
        }
        rows.push(BudgetRow {
            axis: "eta_spread".into(),
            value: spread,
            average_fidelity: total / BUDGET_ETA_PATTERNS as f64,
        });
    }
    for &lambda_sq in &grid.lambda_sq {
        let source = SourceModel {
            lambda_sq,
            transmissions: [0.5; 3],
            herald_transmission: 0.5,
            ..SourceModel::ideal()
        };
        rows.push(BudgetRow {
            axis: "lambda_sq".into(),
            value: lambda_sq,
            average_fidelity: average_layout_fidelity(layout, &source, n_samples, seed ^ 0x5eed)?,
        });
    }
    for &dv in &grid.one_minus_visibility {
        let source = SourceModel {
            v_nn: 1.0 - dv,
            v_nb: 1.0 - dv,
            ..SourceModel::ideal()
        };
        rows.push(BudgetRow {
            axis: "one_minus_visibility".into(),
            value: dv,
            average_fidelity: average_layout_fidelity(layout, &source, n_samples, seed ^ 0x5eed)?,
        });
    }
    for &unbalance in &grid.loss_unbalance {
        let source = SourceModel {
            transmissions: [1.0 - unbalance, 1.0, 1.0 - unbalance / 2.0],
            ..SourceModel::ideal()
        };
        rows.push(BudgetRow {
            axis: "loss_unbalance".into(),
            value: unbalance,
            average_fidelity: average_layout_fidelity(layout, &source, n_samples, seed ^ 0x5eed)?,
        });
    }
    Ok(rows)
}

pub fn budget_to_csv(rows: &[BudgetRow]) -> String {
    let mut out = String::from("axis,value,average_fidelity\n");
    for row in rows {
        out.push_str(&format!("{},{},{}\n", row.axis, row.value, row.average_fidelity));
    }
    out
}
