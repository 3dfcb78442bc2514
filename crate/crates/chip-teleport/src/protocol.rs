//! The teleportation layer: dual-rail qubit states, Bell-measurement
//! outcomes, conditional output states, fidelities and correction unitaries.
//!
//! Output states are obtained by propagating the (noisy) photon inputs
//! through the core transfer matrix, post-selecting on one clicked rail per
//! qubit, and accumulating the 2x2 density matrix on the target qubit's rail
//! pair. Detectors are threshold detectors: a rail with any photons clicks.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, Matrix2, Matrix3, Matrix4, Vector2};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{CircuitLayout, Stage};
use crate::error::{Error, Result};
use crate::fock::{enumerate_outputs, transition_amplitude, FockState};
use crate::source::{squeezed_input_terms, SourceModel};

type C64 = Complex64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn pauli_x() -> Matrix2<C64> {
    Matrix2::new(ZERO, ONE, ONE, ZERO)
}

pub fn pauli_y() -> Matrix2<C64> {
    Matrix2::new(ZERO, -I, I, ZERO)
}

pub fn pauli_z() -> Matrix2<C64> {
    Matrix2::new(ONE, ZERO, ZERO, -ONE)
}

// ---------------------------------------------------------------------------
// Qubit states and density matrices
// ---------------------------------------------------------------------------

/// Pure dual-rail qubit state; `|0_L>` is one photon in the top rail.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitState {
    pub alpha: C64,
    pub beta: C64,
}

impl QubitState {
    pub fn new(alpha: C64, beta: C64) -> Self {
        let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        QubitState {
            alpha: alpha / norm,
            beta: beta / norm,
        }
    }

    pub fn zero() -> Self {
        QubitState { alpha: ONE, beta: ZERO }
    }

    pub fn as_vector(&self) -> Vector2<C64> {
        Vector2::new(self.alpha, self.beta)
    }

    pub fn density(&self) -> DensityMatrix2 {
        let v = self.as_vector();
        DensityMatrix2(v * v.adjoint())
    }
}

/// `U(theta, phi) |0_L> = cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`,
/// with `U(theta, phi) = exp(-i phi Z/2) exp(-i theta Y/2)` up to global
/// phase.
pub fn prepare_qubit(theta: f64, phi: f64) -> QubitState {
    QubitState {
        alpha: c((theta / 2.0).cos(), 0.0),
        beta: C64::from_polar((theta / 2.0).sin(), phi),
    }
}

/// 2x2 Hermitian density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix2(pub Matrix2<C64>);

impl DensityMatrix2 {
    pub fn maximally_mixed() -> Self {
        DensityMatrix2(Matrix2::identity() * c(0.5, 0.0))
    }

    pub fn trace(&self) -> f64 {
        (self.0[(0, 0)] + self.0[(1, 1)]).re
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// Eigenvalues in ascending order (closed form for 2x2 Hermitian).
    pub fn eigenvalues(&self) -> (f64, f64) {
        let a = self.0[(0, 0)].re;
        let d = self.0[(1, 1)].re;
        let b = self.0[(0, 1)];
        let mean = (a + d) / 2.0;
        let disc = ((a - d) / 2.0).powi(2) + b.norm_sqr();
        let r = disc.sqrt();
        (mean - r, mean + r)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (self.0 - self.0.adjoint()).norm()
    }

    /// Normalize to unit trace.
    pub fn normalized(&self) -> Self {
        DensityMatrix2(self.0 / c(self.trace(), 0.0))
    }
}

/// Teleportation fidelity `<psi| U' rho U'^dag |psi>`.
pub fn fidelity(rho: &DensityMatrix2, psi: &QubitState, correction: &Matrix2<C64>) -> f64 {
    let v = psi.as_vector();
    let rotated = correction * rho.0 * correction.adjoint();
    (v.adjoint() * rotated * v)[(0, 0)].re
}

/// Best average teleportation fidelity without shared entanglement.
pub const CLASSICAL_FIDELITY_BOUND: f64 = 2.0 / 3.0;
/// Fidelity threshold above which optimal cloning en route is excluded.
pub const CLONING_FIDELITY_BOUND: f64 = 5.0 / 6.0;

/// Haar-random pure qubit state (normalized complex Gaussian pair).
pub fn haar_state<R: Rng>(rng: &mut R) -> QubitState {
    use rand_distr::StandardNormal;
    let g = |rng: &mut R| -> C64 {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    };
    QubitState::new(g(rng), g(rng))
}

/// Projector onto the state the tomography analyzer maps to a `|0_L>`
/// detection, for `U_measure(phi2, theta2) = exp(-i theta2 Y) exp(-i phi2 Z/2)`.
pub fn measurement_projector(theta2: f64, phi2: f64) -> Matrix2<C64> {
    let ry = Matrix2::new(
        c(theta2.cos(), 0.0),
        c(-theta2.sin(), 0.0),
        c(theta2.sin(), 0.0),
        c(theta2.cos(), 0.0),
    );
    let rz = Matrix2::new(
        C64::from_polar(1.0, -phi2 / 2.0),
        ZERO,
        ZERO,
        C64::from_polar(1.0, phi2 / 2.0),
    );
    let u = ry * rz;
    // Pi = U^dag |0><0| U.
    let row0 = u.row(0);
    let ket = row0.adjoint();
    ket * row0
}

// ---------------------------------------------------------------------------
// Bell state measurement outcomes and corrections
// ---------------------------------------------------------------------------

/// One of the four post-selected Bell-measurement outcomes, identified by
/// which rail of Q1 and Q2 clicked (0 = top).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BsmOutcome {
    pub index: usize,
    pub q1_rail: usize,
    pub q2_rail: usize,
}

impl BsmOutcome {
    pub fn label(&self) -> String {
        format!("|{}{}⟩", self.q1_rail, self.q2_rail)
    }
}

/// Clicked-rail pairs in stable index order. Index `i` is corrected by
/// element `i` of [`ideal_corrections`] on the ideal reference chip.
pub const BSM_OUTCOME_RAILS: [(usize, usize); 4] = [(0, 1), (1, 1), (0, 0), (1, 0)];

/// The four Bell-measurement outcomes in stable index order.
pub fn bsm_outcomes() -> [BsmOutcome; 4] {
    let mut out = [BsmOutcome { index: 0, q1_rail: 0, q2_rail: 0 }; 4];
    for (i, &(m1, m2)) in BSM_OUTCOME_RAILS.iter().enumerate() {
        out[i] = BsmOutcome { index: i, q1_rail: m1, q2_rail: m2 };
    }
    out
}

/// Four 2x2 unitaries indexed by Bell-measurement outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionSet(pub [Matrix2<C64>; 4]);

/// Ideal-circuit corrections `{sigma_z, 1, i sigma_y, sigma_x}`.
pub fn ideal_corrections() -> CorrectionSet {
    CorrectionSet([
        pauli_z(),
        Matrix2::identity(),
        pauli_y() * I,
        pauli_x(),
    ])
}

// ---------------------------------------------------------------------------
// Conditional-state simulation
// ---------------------------------------------------------------------------

/// Per-outcome unnormalized conditional state accumulator.
#[derive(Clone, Debug)]
struct OutcomeAccumulator {
    rho: Matrix2<C64>,
}

/// Result of a conditional-state simulation for one Bell outcome.
#[derive(Clone, Debug)]
pub struct ConditionalState {
    /// Normalized 2x2 state on the target qubit's rails.
    pub state: DensityMatrix2,
    /// Absolute probability of this outcome (per source trial).
    pub probability: f64,
}

/// Teleportation simulator bound to one circuit layout with its core-stage
/// phases resolved. The preparation and tomography stages are excluded; the
/// input qubit is injected directly on Q1's rails and the output state is
/// taken immediately before the tomography analyzer.
pub struct Teleporter {
    core: DMatrix<C64>,
    modes: usize,
    q1: (usize, usize),
    q2: (usize, usize),
    q3: (usize, usize),
}

impl Teleporter {
    pub fn new(layout: &CircuitLayout, core_phases: &HashMap<String, f64>) -> Result<Self> {
        let core = layout.assemble_stages(&[Stage::Core], core_phases)?;
        let get = |name: &str| {
            layout
                .qubit_pair(name)
                .ok_or_else(|| Error::Config(format!("layout lacks qubit {name}")))
        };
        Ok(Teleporter {
            modes: layout.modes,
            core,
            q1: get("Q1")?,
            q2: get("Q2")?,
            q3: get("Q3")?,
        })
    }

    pub fn core_matrix(&self) -> &DMatrix<C64> {
        &self.core
    }

    /// Conditional output states and probabilities for all four outcomes.
    pub fn conditional_states(
        &self,
        source: &SourceModel,
        input: &QubitState,
    ) -> Result<[ConditionalState; 4]> {
        self.conditional_states_opt(source, input, true)
    }

    /// One outcome's conditional state; errors if the outcome never fires.
    pub fn conditional_state(
        &self,
        source: &SourceModel,
        input: &QubitState,
        outcome: &BsmOutcome,
    ) -> Result<ConditionalState> {
        let all = self.conditional_states(source, input)?;
        let picked = all[outcome.index].clone();
        if picked.probability <= 0.0 {
            return Err(Error::ZeroProbabilityOutcome);
        }
        Ok(picked)
    }

    fn conditional_states_opt(
        &self,
        source: &SourceModel,
        input: &QubitState,
        include_quadratic: bool,
    ) -> Result<[ConditionalState; 4]> {
        source.validate()?;
        let mut accs = [
            OutcomeAccumulator { rho: Matrix2::zeros() },
            OutcomeAccumulator { rho: Matrix2::zeros() },
            OutcomeAccumulator { rho: Matrix2::zeros() },
            OutcomeAccumulator { rho: Matrix2::zeros() },
        ];

        let dist_weights = source.distinguishable_weights();
        let w_indist: f64 = 1.0 - dist_weights.iter().sum::<f64>();

        for (term, w_term) in squeezed_input_terms(source.lambda_sq, 1) {
            let occ = term.occupations();
            let (n1, n2, n3) = (occ[0], occ[1], occ[2]);
            if n1 > 1 && !include_quadratic {
                continue;
            }
            // Herald arm carries as many photons as the Q1 source mode.
            let herald = 1.0 - (1.0 - source.herald_transmission).powi(n1 as i32);
            for (surv, w_thin) in thinned(&[n1, n2, n3], &source.transmissions) {
                let [k1, k2, k3] = surv;
                if k1 + k2 + k3 < 3 {
                    continue; // cannot produce one click per qubit
                }
                let weight = w_term * w_thin * herald;
                let is_ideal_shape = surv == [1, 1, 1];
                if is_ideal_shape {
                    self.accumulate_coherent(&mut accs, input, surv, weight * w_indist)?;
                    for (k, &w_k) in dist_weights.iter().enumerate() {
                        if w_k > 0.0 {
                            self.accumulate_distinguished(&mut accs, input, k, weight * w_k)?;
                        }
                    }
                } else {
                    self.accumulate_coherent(&mut accs, input, surv, weight)?;
                }
            }
        }

        Ok(accs.map(|acc| {
            let probability = (acc.rho[(0, 0)] + acc.rho[(1, 1)]).re;
            let state = if probability > 0.0 {
                DensityMatrix2(acc.rho / c(probability, 0.0))
            } else {
                DensityMatrix2::maximally_mixed()
            };
            ConditionalState { state, probability }
        }))
    }

    /// Basis Fock inputs and coefficients for `k1` input-qubit photons in
    /// state `psi` plus `k2`, `k3` photons at the Q2 and Q3 input rails.
    fn injection_basis(
        &self,
        input: &QubitState,
        surv: [usize; 3],
    ) -> Vec<(FockState, C64)> {
        let [k1, k2, k3] = surv;
        let mut base = vec![0usize; self.modes];
        base[self.q2.0] = k2;
        base[self.q3.0] = k3;
        let (a, b) = (input.alpha, input.beta);
        let q1_terms: Vec<(usize, usize, C64)> = match k1 {
            0 => vec![(0, 0, ONE)],
            1 => vec![(1, 0, a), (0, 1, b)],
            2 => vec![
                (2, 0, a * a),
                (1, 1, c(2f64.sqrt(), 0.0) * a * b),
                (0, 2, b * b),
            ],
            _ => panic!("at most two input-qubit photons modeled"),
        };
        q1_terms
            .into_iter()
            .filter(|(_, _, coeff)| coeff.norm_sqr() > 0.0)
            .map(|(na, nb, coeff)| {
                let mut occ = base.clone();
                occ[self.q1.0] = na;
                occ[self.q1.1] = nb;
                (FockState::new(occ), coeff)
            })
            .collect()
    }

    /// Amplitude of each N-photon output for a coherent superposition of
    /// basis Fock inputs.
    fn amplitude_map(
        &self,
        basis: &[(FockState, C64)],
        photons: usize,
    ) -> Result<Vec<(FockState, C64)>> {
        let outputs = enumerate_outputs(self.modes, photons);
        let mut amps = Vec::with_capacity(outputs.len());
        for out in outputs {
            let mut amp = ZERO;
            for (state, coeff) in basis {
                amp += *coeff * transition_amplitude(&self.core, state, &out)?;
            }
            if amp.norm_sqr() > 0.0 {
                amps.push((out, amp));
            }
        }
        Ok(amps)
    }

    fn accumulate_coherent(
        &self,
        accs: &mut [OutcomeAccumulator; 4],
        input: &QubitState,
        surv: [usize; 3],
        weight: f64,
    ) -> Result<()> {
        if weight <= 0.0 {
            return Ok(());
        }
        let basis = self.injection_basis(input, surv);
        let photons = surv.iter().sum();
        let amps = self.amplitude_map(&basis, photons)?;
        self.fold_amplitudes(accs, &amps, weight);
        Ok(())
    }

    /// Incoherent branch: photon `which` (0 = Q1, 1 = Q2, 2 = Q3 input) does
    /// not interfere with the other two. Only defined for the `|1,1,1>`
    /// input shape.
    fn accumulate_distinguished(
        &self,
        accs: &mut [OutcomeAccumulator; 4],
        input: &QubitState,
        which: usize,
        weight: f64,
    ) -> Result<()> {
        // Input amplitudes of the lone photon over the chip modes.
        let single_in: Vec<(usize, C64)> = match which {
            0 => vec![(self.q1.0, input.alpha), (self.q1.1, input.beta)],
            1 => vec![(self.q2.0, ONE)],
            2 => vec![(self.q3.0, ONE)],
            _ => panic!("photon index out of range"),
        };
        let mut single_out = vec![ZERO; self.modes];
        for d in 0..self.modes {
            for (m, coeff) in &single_in {
                single_out[d] += *coeff * self.core[(d, *m)];
            }
        }

        // Coherent amplitudes of the remaining two photons.
        let rest_surv = match which {
            0 => [0, 1, 1],
            1 => [1, 0, 1],
            _ => [1, 1, 0],
        };
        let basis = self.injection_basis(input, rest_surv);
        let rest_amps = self.amplitude_map(&basis, 2)?;

        for (d, s) in single_out.iter().enumerate() {
            let p_single = s.norm_sqr();
            if p_single == 0.0 {
                continue;
            }
            // Weight the rest-output amplitudes as if the lone photon's
            // destination were part of the environment.
            let mut combined: Vec<(FockState, C64)> = Vec::with_capacity(rest_amps.len());
            for (o, a) in &rest_amps {
                let mut occ = o.occupations().to_vec();
                occ[d] += 1;
                combined.push((FockState::new(occ), *a));
            }
            // Coherence across Q3 rails survives only if the lone photon is
            // not itself a Q3 photon candidate at rail-splitting positions;
            // the fold below groups by full environment including mode d, so
            // states reachable with different d never mix.
            self.fold_amplitudes_incoherent_q3(accs, &combined, weight * p_single, d);
        }
        Ok(())
    }

    /// Classify a full output occupation. Returns the outcome index and the
    /// Q3 clicked rail, or None if the click pattern fails post-selection.
    fn classify(&self, occ: &[usize]) -> Option<(usize, usize, usize)> {
        let rail = |pair: (usize, usize)| -> Option<usize> {
            match (occ[pair.0] > 0, occ[pair.1] > 0) {
                (true, false) => Some(0),
                (false, true) => Some(1),
                _ => None,
            }
        };
        let m1 = rail(self.q1)?;
        let m2 = rail(self.q2)?;
        let z = rail(self.q3)?;
        let index = BSM_OUTCOME_RAILS.iter().position(|&r| r == (m1, m2))?;
        let n3 = occ[self.q3.0] + occ[self.q3.1];
        Some((index, z, n3))
    }

    /// Fold output amplitudes into the per-outcome density accumulators,
    /// keeping coherence between outputs that differ only in which Q3 rail
    /// holds a single photon.
    fn fold_amplitudes(
        &self,
        accs: &mut [OutcomeAccumulator; 4],
        amps: &[(FockState, C64)],
        weight: f64,
    ) {
        // env key: occupations with the Q3 rails zeroed.
        let mut coherent: BTreeMap<Vec<usize>, (usize, [C64; 2])> = BTreeMap::new();
        for (state, amp) in amps {
            let occ = state.occupations();
            let Some((index, z, n3)) = self.classify(occ) else {
                continue;
            };
            if n3 == 1 {
                let mut env = occ.to_vec();
                env[self.q3.0] = 0;
                env[self.q3.1] = 0;
                let entry = coherent.entry(env).or_insert((index, [ZERO; 2]));
                entry.1[z] += *amp;
            } else {
                // All Q3 photons bunched in rail z: diagonal contribution.
                accs[index].rho[(z, z)] += c(weight * amp.norm_sqr(), 0.0);
            }
        }
        for (_, (index, v)) in coherent {
            for z in 0..2 {
                for zp in 0..2 {
                    accs[index].rho[(z, zp)] += c(weight, 0.0) * v[z] * v[zp].conj();
                }
            }
        }
    }

    /// Like `fold_amplitudes` but for a distinguished-photon branch: the lone
    /// photon sits at mode `d`, already added to the occupations. If `d` is a
    /// Q3 rail the which-rail information is carried by the lone photon, so
    /// no Q3 coherence survives.
    fn fold_amplitudes_incoherent_q3(
        &self,
        accs: &mut [OutcomeAccumulator; 4],
        amps: &[(FockState, C64)],
        weight: f64,
        d: usize,
    ) {
        if d == self.q3.0 || d == self.q3.1 {
            for (state, amp) in amps {
                let occ = state.occupations();
                let Some((index, z, _)) = self.classify(occ) else {
                    continue;
                };
                accs[index].rho[(z, z)] += c(weight * amp.norm_sqr(), 0.0);
            }
        } else {
            self.fold_amplitudes(accs, amps, weight);
        }
    }

    /// Linearized conditional channels: the unnormalized map from the input
    /// qubit density matrix to the target-rail density matrix, one per Bell
    /// outcome. The photon-pair term quadratic in the input (`|2,1,1>`) is
    /// outside the linear model and excluded.
    pub fn channels(&self, source: &SourceModel) -> Result<[QubitChannel; 4]> {
        let probes = [
            QubitState::new(ONE, ZERO),
            QubitState::new(ZERO, ONE),
            QubitState::new(ONE, ONE),
            QubitState::new(ONE, I),
        ];
        let mut outputs: Vec<[Matrix2<C64>; 4]> = Vec::with_capacity(4);
        for probe in &probes {
            let states = self.conditional_states_opt(source, probe, false)?;
            outputs.push(states.map(|s| s.state.0 * c(s.probability, 0.0)));
        }
        let mut channels = Vec::with_capacity(4);
        for outcome in 0..4 {
            let e00 = outputs[0][outcome];
            let e11 = outputs[1][outcome];
            let s = e00 + e11;
            let m_plus = outputs[2][outcome] * c(2.0, 0.0) - s;
            let m_imag = outputs[3][outcome] * c(2.0, 0.0) - s;
            let e01 = (m_plus + m_imag * I) * c(0.5, 0.0);
            let e10 = (m_plus - m_imag * I) * c(0.5, 0.0);
            channels.push(QubitChannel { e00, e01, e10, e11 });
        }
        Ok(channels.try_into().map_err(|_| Error::Config("channel build".into())).unwrap())
    }
}

/// Binomial thinning of each source mode's occupation by its transmission.
fn thinned(occ: &[usize; 3], transmissions: &[f64; 3]) -> Vec<([usize; 3], f64)> {
    fn binom(n: usize, k: usize) -> f64 {
        let mut r = 1.0;
        for i in 0..k {
            r *= (n - i) as f64 / (i + 1) as f64;
        }
        r
    }
    let per_mode: Vec<Vec<(usize, f64)>> = occ
        .iter()
        .zip(transmissions)
        .map(|(&n, &t)| {
            (0..=n)
                .map(|k| (k, binom(n, k) * t.powi(k as i32) * (1.0 - t).powi((n - k) as i32)))
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for &(k1, p1) in &per_mode[0] {
        for &(k2, p2) in &per_mode[1] {
            for &(k3, p3) in &per_mode[2] {
                let p = p1 * p2 * p3;
                if p > 0.0 {
                    out.push(([k1, k2, k3], p));
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Single-qubit channels and correction optimization
// ---------------------------------------------------------------------------

/// Linear (generally trace-non-increasing) map on 2x2 density matrices,
/// stored by its action on the matrix units `|r><s|`.
#[derive(Clone, Debug)]
pub struct QubitChannel {
    pub e00: Matrix2<C64>,
    pub e01: Matrix2<C64>,
    pub e10: Matrix2<C64>,
    pub e11: Matrix2<C64>,
}

impl QubitChannel {
    /// Channel implementing `rho -> V rho V^dag`.
    pub fn from_unitary(v: &Matrix2<C64>) -> Self {
        let unit = |r: usize, s: usize| {
            let mut m = Matrix2::zeros();
            m[(r, s)] = ONE;
            v * m * v.adjoint()
        };
        QubitChannel {
            e00: unit(0, 0),
            e01: unit(0, 1),
            e10: unit(1, 0),
            e11: unit(1, 1),
        }
    }

    /// Depolarizing channel `rho -> (1-p) rho + p I/2`.
    pub fn depolarizing(p: f64) -> Self {
        let id = QubitChannel::from_unitary(&Matrix2::identity());
        let mix = |e: Matrix2<C64>, r: usize, s: usize| {
            let trace_part = if r == s { c(0.5, 0.0) } else { ZERO };
            e * c(1.0 - p, 0.0) + Matrix2::identity() * trace_part * c(p, 0.0)
        };
        QubitChannel {
            e00: mix(id.e00, 0, 0),
            e01: mix(id.e01, 0, 1),
            e10: mix(id.e10, 1, 0),
            e11: mix(id.e11, 1, 1),
        }
    }

    pub fn apply(&self, rho: &Matrix2<C64>) -> Matrix2<C64> {
        self.e00 * rho[(0, 0)]
            + self.e01 * rho[(0, 1)]
            + self.e10 * rho[(1, 0)]
            + self.e11 * rho[(1, 1)]
    }

    /// Pauli transfer matrix `R[i][j] = tr(sigma_i E(sigma_j)) / 2` over
    /// `{I, X, Y, Z}`.
    pub fn pauli_transfer(&self) -> Matrix4<f64> {
        let paulis = [
            Matrix2::identity(),
            pauli_x(),
            pauli_y(),
            pauli_z(),
        ];
        Matrix4::from_fn(|i, j| {
            let image = self.apply(&paulis[j]);
            ((paulis[i] * image).trace() / c(2.0, 0.0)).re
        })
    }
}

/// Mean fidelity of `correction ∘ channel` over a fixed sample of pure
/// states, each output normalized.
pub fn average_fidelity_sampled(
    channel: &QubitChannel,
    correction: &Matrix2<C64>,
    samples: &[QubitState],
) -> f64 {
    let mut total = 0.0;
    let mut counted = 0usize;
    for psi in samples {
        let rho_out = channel.apply(&psi.density().0);
        let trace = (rho_out[(0, 0)] + rho_out[(1, 1)]).re;
        if trace <= 0.0 {
            continue;
        }
        total += fidelity(&DensityMatrix2(rho_out / c(trace, 0.0)), psi, correction);
        counted += 1;
    }
    if counted == 0 {
        0.0
    } else {
        total / counted as f64
    }
}

/// Closed-form correction maximizer: orthogonal Procrustes alignment of the
/// channel's Bloch block, mapped back to SU(2) via the polar (SVD) rotation.
pub fn polar_correction_oracle(channel: &QubitChannel) -> Matrix2<C64> {
    let r = channel.pauli_transfer();
    let q = Matrix3::from_fn(|i, j| r[(i + 1, j + 1)]);
    // Maximize tr(O q) over rotations O: O = V W^T from q = W S V^T, with a
    // determinant fix keeping O special orthogonal.
    let svd = q.svd(true, true);
    let w = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let det = (v_t.transpose() * w.transpose()).determinant();
    let fix = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, det.signum()));
    let o = v_t.transpose() * fix * w.transpose();
    su2_from_rotation(&o)
}

/// SU(2) element whose Bloch-sphere action is the rotation `o`.
fn su2_from_rotation(o: &Matrix3<f64>) -> Matrix2<C64> {
    // Quaternion extraction, numerically stable branch selection.
    let trace = o[(0, 0)] + o[(1, 1)] + o[(2, 2)];
    let (w, x, y, z);
    if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        w = 0.25 * s;
        x = (o[(2, 1)] - o[(1, 2)]) / s;
        y = (o[(0, 2)] - o[(2, 0)]) / s;
        z = (o[(1, 0)] - o[(0, 1)]) / s;
    } else if o[(0, 0)] > o[(1, 1)] && o[(0, 0)] > o[(2, 2)] {
        let s = (1.0 + o[(0, 0)] - o[(1, 1)] - o[(2, 2)]).sqrt() * 2.0;
        w = (o[(2, 1)] - o[(1, 2)]) / s;
        x = 0.25 * s;
        y = (o[(0, 1)] + o[(1, 0)]) / s;
        z = (o[(0, 2)] + o[(2, 0)]) / s;
    } else if o[(1, 1)] > o[(2, 2)] {
        let s = (1.0 + o[(1, 1)] - o[(0, 0)] - o[(2, 2)]).sqrt() * 2.0;
        w = (o[(0, 2)] - o[(2, 0)]) / s;
        x = (o[(0, 1)] + o[(1, 0)]) / s;
        y = 0.25 * s;
        z = (o[(1, 2)] + o[(2, 1)]) / s;
    } else {
        let s = (1.0 + o[(2, 2)] - o[(0, 0)] - o[(1, 1)]).sqrt() * 2.0;
        w = (o[(1, 0)] - o[(0, 1)]) / s;
        x = (o[(0, 2)] + o[(2, 0)]) / s;
        y = (o[(1, 2)] + o[(2, 1)]) / s;
        z = 0.25 * s;
    }
    // U = w I - i (x X + y Y + z Z).
    Matrix2::identity() * c(w, 0.0)
        - (pauli_x() * c(x, 0.0) + pauli_y() * c(y, 0.0) + pauli_z() * c(z, 0.0)) * I
}

/// Z-Y-Z Euler parameterization of SU(2) (up to global phase).
pub fn euler_unitary(alpha: f64, beta: f64, gamma: f64) -> Matrix2<C64> {
    let rz = |t: f64| {
        Matrix2::new(
            C64::from_polar(1.0, -t / 2.0),
            ZERO,
            ZERO,
            C64::from_polar(1.0, t / 2.0),
        )
    };
    let ry = Matrix2::new(
        c((beta / 2.0).cos(), 0.0),
        c(-(beta / 2.0).sin(), 0.0),
        c((beta / 2.0).sin(), 0.0),
        c((beta / 2.0).cos(), 0.0),
    );
    rz(alpha) * ry * rz(gamma)
}

/// Numerical correction search: maximize the sampled average fidelity over
/// SU(2) by multi-start Nelder-Mead on Z-Y-Z Euler angles. Returns the
/// optimizing unitary and the achieved average fidelity. Deterministic for a
/// fixed seed.
pub fn optimal_correction_for_channel(
    channel: &QubitChannel,
    n_samples: usize,
    seed: u64,
) -> Result<(Matrix2<C64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<QubitState> = (0..n_samples).map(|_| haar_state(&mut rng)).collect();

    let objective = |p: &[f64; 3]| -> f64 {
        let u = euler_unitary(p[0], p[1], p[2]);
        average_fidelity_sampled(channel, &u, &samples)
    };

    let mut starts: Vec<[f64; 3]> = vec![
        [0.0, 0.0, 0.0],                                // identity
        [0.0, std::f64::consts::PI, 0.0],               // ~ Y
        [std::f64::consts::PI, 0.0, 0.0],               // ~ Z
        [std::f64::consts::PI, std::f64::consts::PI, 0.0], // ~ X
    ];
    for _ in 0..4 {
        starts.push([
            rng.gen::<f64>() * std::f64::consts::TAU,
            rng.gen::<f64>() * std::f64::consts::PI,
            rng.gen::<f64>() * std::f64::consts::TAU,
        ]);
    }

    let mut best: Option<([f64; 3], f64)> = None;
    for start in starts {
        let (p, f) = nelder_mead_max(&objective, start, 0.4, 400, 1e-12);
        if best.as_ref().map_or(true, |(_, bf)| f > *bf) {
            best = Some((p, f));
        }
    }
    let (p, f) = best.ok_or_else(|| Error::NonConvergence("no optimizer start succeeded".into()))?;
    if !f.is_finite() {
        return Err(Error::NonConvergence(format!("objective diverged: {f}")));
    }
    Ok((euler_unitary(p[0], p[1], p[2]), f))
}

/// 3-parameter Nelder-Mead maximization.
fn nelder_mead_max(
    f: &dyn Fn(&[f64; 3]) -> f64,
    start: [f64; 3],
    scale: f64,
    max_iter: usize,
    tol: f64,
) -> ([f64; 3], f64) {
    let n = 3usize;
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(n + 1);
    simplex.push((start, f(&start)));
    for i in 0..n {
        let mut p = start;
        p[i] += scale;
        simplex.push((p, f(&p)));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        if (simplex[0].1 - simplex[n].1).abs() < tol {
            break;
        }
        let centroid = {
            let mut cvec = [0.0; 3];
            for (p, _) in &simplex[..n] {
                for k in 0..3 {
                    cvec[k] += p[k] / n as f64;
                }
            }
            cvec
        };
        let worst = simplex[n];
        let combine = |t: f64| {
            let mut p = [0.0; 3];
            for k in 0..3 {
                p[k] = centroid[k] + t * (centroid[k] - worst.0[k]);
            }
            p
        };
        let reflect = combine(1.0);
        let fr = f(&reflect);
        if fr > simplex[0].1 {
            let expand = combine(2.0);
            let fe = f(&expand);
            simplex[n] = if fe > fr { (expand, fe) } else { (reflect, fr) };
        } else if fr > simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
        } else {
            let contract = combine(-0.5);
            let fc = f(&contract);
            if fc > worst.1 {
                simplex[n] = (contract, fc);
            } else {
                let bestp = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    let mut p = [0.0; 3];
                    for k in 0..3 {
                        p[k] = bestp[k] + 0.5 * (entry.0[k] - bestp[k]);
                    }
                    *entry = (p, f(&p));
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    simplex[0]
}

/// Numerically optimized corrections for a layout: per Bell outcome, the
/// unitary maximizing the mean output fidelity over `n_samples` Haar-random
/// input states. Also returns the achieved average fidelities.
pub fn optimal_corrections(
    layout: &CircuitLayout,
    source: &SourceModel,
    n_samples: usize,
    seed: u64,
) -> Result<(CorrectionSet, [f64; 4])> {
    let sim = Teleporter::new(layout, &HashMap::new())?;
    let channels = sim.channels(source)?;
    let mut corrections = Vec::with_capacity(4);
    let mut achieved = [0.0; 4];
    for (i, channel) in channels.iter().enumerate() {
        let (u, f) = optimal_correction_for_channel(channel, n_samples, seed ^ (i as u64) << 32)?;
        corrections.push(u);
        achieved[i] = f;
    }
    Ok((
        CorrectionSet(corrections.try_into().map_err(|_| Error::Config("corrections".into())).unwrap()),
        achieved,
    ))
}
