//! Multi-photon transition amplitudes of a linear transfer matrix.
//!
//! Output statistics of `N` indistinguishable photons traversing an `M`-mode
//! linear network are governed by permanents of `N`-by-`N` sub-matrices of the
//! transfer matrix. This module computes those permanents (Gray-code Ryser),
//! the transition sub-matrix construction, post-selected output distributions
//! and multinomial count sampling.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability sums over a complete lossless output basis must close to within
/// this tolerance.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// Occupation-number vector over the optical modes of a circuit.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FockState(pub Vec<usize>);

impl FockState {
    pub fn new(occupations: Vec<usize>) -> Self {
        FockState(occupations)
    }

    /// Total photon number.
    pub fn photons(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn occupations(&self) -> &[usize] {
        &self.0
    }

    /// Product of the factorials of the occupations.
    pub fn factorial_product(&self) -> f64 {
        self.0.iter().map(|&n| factorial(n)).product()
    }
}

impl fmt::Debug for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (k, n) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, "⟩")
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Partial constraint on output occupations: `Some(n)` pins a mode to exactly
/// `n` photons, `None` leaves it free.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern(pub Vec<Option<usize>>);

impl Pattern {
    pub fn unconstrained(modes: usize) -> Self {
        Pattern(vec![None; modes])
    }

    pub fn matches(&self, state: &FockState) -> bool {
        self.0
            .iter()
            .zip(state.occupations())
            .all(|(c, &n)| c.map_or(true, |want| want == n))
    }

    fn constrained_photons(&self) -> usize {
        self.0.iter().filter_map(|c| *c).sum()
    }
}

/// Map from output occupation patterns to probabilities. `total_mass` below 1
/// reflects post-selection or loss.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OutcomeDistribution {
    probs: BTreeMap<FockState, f64>,
}

impl OutcomeDistribution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_probs(probs: impl IntoIterator<Item = (FockState, f64)>) -> Self {
        let mut d = Self::new();
        for (s, p) in probs {
            d.add(s, p);
        }
        d
    }

    pub fn add(&mut self, state: FockState, prob: f64) {
        if prob != 0.0 {
            *self.probs.entry(state).or_insert(0.0) += prob;
        }
    }

    pub fn prob(&self, state: &FockState) -> f64 {
        self.probs.get(state).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FockState, f64)> {
        self.probs.iter().map(|(s, &p)| (s, p))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    /// Renormalize to unit mass over the support. No-op on an empty
    /// distribution.
    pub fn normalized(&self) -> Self {
        let mass = self.total_mass();
        if mass <= 0.0 {
            return self.clone();
        }
        OutcomeDistribution {
            probs: self
                .probs
                .iter()
                .map(|(s, p)| (s.clone(), p / mass))
                .collect(),
        }
    }

    /// Convex combination `w * self + (1 - w) * other`.
    pub fn mix(&self, other: &Self, w: f64) -> Self {
        let mut out = Self::new();
        for (s, p) in self.iter() {
            out.add(s.clone(), w * p);
        }
        for (s, p) in other.iter() {
            out.add(s.clone(), (1.0 - w) * p);
        }
        out
    }

    /// Distribution of the mode-wise sum of two independent photon
    /// configurations.
    pub fn convolve(&self, other: &Self) -> Self {
        let mut out = Self::new();
        for (a, pa) in self.iter() {
            for (b, pb) in other.iter() {
                let sum: Vec<usize> = a
                    .occupations()
                    .iter()
                    .zip(other_occ(b, a.modes()))
                    .map(|(&x, y)| x + y)
                    .collect();
                out.add(FockState::new(sum), pa * pb);
            }
        }
        out
    }
}

fn other_occ<'a>(b: &'a FockState, modes: usize) -> impl Iterator<Item = usize> + 'a {
    assert_eq!(b.modes(), modes, "mode count mismatch in convolution");
    b.occupations().iter().copied()
}

/// Matrix permanent via Ryser's formula with Gray-code subset updates,
/// O(2^n * n). `n = 0` returns 1 by convention.
pub fn permanent(matrix: &DMatrix<Complex64>) -> Result<Complex64> {
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::NonSquareMatrix {
            rows: matrix.nrows(),
            cols: matrix.ncols(),
        });
    }
    let n = matrix.nrows();
    if n == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    assert!(n < 64, "permanent limited to n < 64");

    // Row sums over the current Gray-code column subset.
    let mut sums = vec![Complex64::new(0.0, 0.0); n];
    let mut total = Complex64::new(0.0, 0.0);
    let mut gray: u64 = 0;
    for k in 1u64..(1 << n) {
        let next = k ^ (k >> 1);
        let changed = (gray ^ next).trailing_zeros() as usize;
        let added = next & (1 << changed) != 0;
        for (i, s) in sums.iter_mut().enumerate() {
            let v = matrix[(i, changed)];
            if added {
                *s += v;
            } else {
                *s -= v;
            }
        }
        gray = next;
        let product: Complex64 = sums.iter().product();
        let bits = next.count_ones() as usize;
        if (n - bits) % 2 == 0 {
            total += product;
        } else {
            total -= product;
        }
    }
    Ok(total)
}

/// Builds the boson transition sub-matrix: column `j` of `transfer` repeated
/// `input[j]` times, row `i` repeated `output[i]` times.
pub fn transition_submatrix(
    transfer: &DMatrix<Complex64>,
    input: &FockState,
    output: &FockState,
) -> Result<DMatrix<Complex64>> {
    let n_in = input.photons();
    let n_out = output.photons();
    if n_in != n_out {
        return Err(Error::PhotonMismatch {
            input: n_in,
            output: n_out,
        });
    }
    let mut cols: Vec<usize> = Vec::with_capacity(n_in);
    for (j, &nj) in input.occupations().iter().enumerate() {
        cols.extend(std::iter::repeat(j).take(nj));
    }
    let mut rows: Vec<usize> = Vec::with_capacity(n_out);
    for (i, &ni) in output.occupations().iter().enumerate() {
        rows.extend(std::iter::repeat(i).take(ni));
    }
    Ok(DMatrix::from_fn(n_out, n_in, |r, c| {
        transfer[(rows[r], cols[c])]
    }))
}

/// Transition amplitude `Perm(U_sub) / sqrt(prod in_i! prod out_j!)`.
pub fn transition_amplitude(
    transfer: &DMatrix<Complex64>,
    input: &FockState,
    output: &FockState,
) -> Result<Complex64> {
    let sub = transition_submatrix(transfer, input, output)?;
    let perm = permanent(&sub)?;
    Ok(perm / (input.factorial_product() * output.factorial_product()).sqrt())
}

/// Transition probability `|Perm(U_sub)|^2 / (prod in_i! prod out_j!)`.
pub fn transition_probability(
    transfer: &DMatrix<Complex64>,
    input: &FockState,
    output: &FockState,
) -> Result<f64> {
    Ok(transition_amplitude(transfer, input, output)?.norm_sqr())
}

/// All weak compositions of `photons` into `modes` parts, lexicographic.
pub fn enumerate_outputs(modes: usize, photons: usize) -> Vec<FockState> {
    let mut out = Vec::new();
    let mut current = vec![0usize; modes];
    compose(&mut current, 0, photons, &mut out);
    out
}

fn compose(current: &mut Vec<usize>, mode: usize, remaining: usize, out: &mut Vec<FockState>) {
    if mode == current.len() {
        if remaining == 0 {
            out.push(FockState::new(current.clone()));
        }
        return;
    }
    if mode + 1 == current.len() {
        current[mode] = remaining;
        out.push(FockState::new(current.clone()));
        current[mode] = 0;
        return;
    }
    for n in 0..=remaining {
        current[mode] = n;
        compose(current, mode + 1, remaining - n, out);
    }
    current[mode] = 0;
}

/// Output occupations consistent with a partial pattern: constrained modes are
/// pinned, remaining photons range over the free modes.
pub fn enumerate_outputs_matching(modes: usize, photons: usize, pattern: &Pattern) -> Vec<FockState> {
    assert_eq!(pattern.0.len(), modes);
    let pinned = pattern.constrained_photons();
    if pinned > photons {
        return Vec::new();
    }
    let free_modes: Vec<usize> = (0..modes).filter(|&m| pattern.0[m].is_none()).collect();
    let mut out = Vec::new();
    for free in enumerate_outputs(free_modes.len(), photons - pinned) {
        let mut occ = vec![0usize; modes];
        for (m, c) in pattern.0.iter().enumerate() {
            if let Some(n) = c {
                occ[m] = *n;
            }
        }
        for (k, &m) in free_modes.iter().enumerate() {
            occ[m] = free.occupations()[k];
        }
        out.push(FockState::new(occ));
    }
    out
}

/// Post-selected output distribution of `input` through `transfer`.
///
/// `total_mass` of the result equals the post-selection success probability;
/// with no pattern and a lossless (unitary) transfer it closes to 1.
pub fn output_distribution(
    transfer: &DMatrix<Complex64>,
    input: &FockState,
    postselect: Option<&Pattern>,
) -> Result<OutcomeDistribution> {
    let modes = transfer.nrows();
    assert_eq!(input.modes(), modes, "input mode count mismatch");
    let photons = input.photons();
    let outputs = match postselect {
        Some(p) => enumerate_outputs_matching(modes, photons, p),
        None => enumerate_outputs(modes, photons),
    };
    let mut dist = OutcomeDistribution::new();
    for out in outputs {
        let p = transition_probability(transfer, input, &out)?;
        if p > 0.0 {
            dist.add(out, p);
        }
    }
    Ok(dist)
}

/// Multinomial sample of `shots` events from the renormalized distribution.
/// Deterministic for a fixed RNG state; counts sum to `shots`.
pub fn sample_counts<R: Rng>(
    dist: &OutcomeDistribution,
    shots: u64,
    rng: &mut R,
) -> Result<BTreeMap<FockState, u64>> {
    if shots == 0 {
        return Ok(BTreeMap::new());
    }
    if dist.is_empty() || dist.total_mass() <= 0.0 {
        return Err(Error::EmptyDistribution { shots });
    }
    let norm = dist.normalized();
    let mut counts = BTreeMap::new();
    let mut remaining_shots = shots;
    let mut remaining_mass = 1.0f64;
    let entries: Vec<(FockState, f64)> = norm.iter().map(|(s, p)| (s.clone(), p)).collect();
    for (k, (state, p)) in entries.iter().enumerate() {
        if remaining_shots == 0 {
            break;
        }
        let n = if k + 1 == entries.len() {
            remaining_shots
        } else {
            let cond = (p / remaining_mass).clamp(0.0, 1.0);
            Binomial::new(remaining_shots, cond)
                .expect("valid binomial parameters")
                .sample(rng)
        };
        if n > 0 {
            counts.insert(state.clone(), n);
        }
        remaining_shots -= n;
        remaining_mass -= p;
    }
    Ok(counts)
}
