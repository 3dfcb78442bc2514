//! Optical elements, layout files and transfer-matrix assembly.
//!
//! A circuit is an ordered list of elements over `M` modes: two-mode couplers
//! (X couplers with intensity reflectivity `eta`), phase shifters (fixed or
//! bound to a named heater), waveguide crossovers and per-mode loss. Assembly
//! multiplies the element embeddings in listed order; loss scales a mode row
//! by `sqrt(t)`, giving a sub-unitary matrix.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Unitarity check tolerance for lossless layouts.
pub const UNITARITY_TOL: f64 = 1e-10;

type C64 = Complex64;

/// How a phase shifter setting is specified.
#[derive(Clone, Debug, PartialEq)]
pub enum PhaseSetting {
    Radians(f64),
    Heater(String),
}

/// A single optical element.
#[derive(Clone, Debug, PartialEq)]
pub enum Element {
    /// Two-mode coupler of intensity reflectivity `eta`; the reflected
    /// amplitude carries a factor `i`.
    Coupler {
        a: usize,
        b: usize,
        eta: f64,
        label: Option<String>,
    },
    /// Phase shift on a single mode.
    Phase { mode: usize, setting: PhaseSetting },
    /// Waveguide crossover: swaps two modes.
    Crossing { a: usize, b: usize },
    /// Intensity transmission `t` on one mode.
    Loss { mode: usize, transmission: f64 },
}

/// Circuit stage an element belongs to. The core stage is the part between
/// state preparation and the tomography analyzer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Prep,
    Core,
    Tomography,
}

/// Fitted thermo-optic heater response: `phase = a*P_self + b*P_neighbor + c`
/// with electrical power `P = V^2 / R`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeaterCal {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub resistance: f64,
    pub v_min: f64,
    pub v_max: f64,
}

/// Parsed circuit layout: element list, dual-rail qubit assignments and the
/// post-selection rule.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitLayout {
    pub modes: usize,
    pub elements: Vec<(Stage, Element)>,
    /// Qubit name and its (top, bottom) rail modes; top rail carries `|0_L>`.
    pub qubits: Vec<(String, usize, usize)>,
    /// Post-select on exactly one photon per qubit mode pair.
    pub postselect_one_per_qubit: bool,
    pub heater_cals: Vec<HeaterCal>,
}

/// 2x2 coupler matrix `[[sqrt(1-eta), i sqrt(eta)], [i sqrt(eta), sqrt(1-eta)]]`.
pub fn coupler_matrix(eta: f64) -> Result<nalgebra::Matrix2<C64>> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::OutOfRange {
            name: "eta",
            value: eta,
            expected: "[0, 1]",
        });
    }
    let t = C64::new((1.0 - eta).sqrt(), 0.0);
    let r = C64::new(0.0, eta.sqrt());
    Ok(nalgebra::Matrix2::new(t, r, r, t))
}

/// Mach-Zehnder tunable splitter:
/// `diag(e^{i phi}, 1) * coupler(eta2) * diag(e^{i theta}, 1) * coupler(eta1)`.
pub fn mzi_unitary(eta1: f64, eta2: f64, theta: f64, phi: f64) -> Result<nalgebra::Matrix2<C64>> {
    let c1 = coupler_matrix(eta1)?;
    let c2 = coupler_matrix(eta2)?;
    let inner = nalgebra::Matrix2::new(
        C64::from_polar(1.0, theta),
        C64::default(),
        C64::default(),
        C64::new(1.0, 0.0),
    );
    let outer = nalgebra::Matrix2::new(
        C64::from_polar(1.0, phi),
        C64::default(),
        C64::default(),
        C64::new(1.0, 0.0),
    );
    Ok(outer * c2 * inner * c1)
}

impl CircuitLayout {
    pub fn new(modes: usize) -> Self {
        CircuitLayout {
            modes,
            elements: Vec::new(),
            qubits: Vec::new(),
            postselect_one_per_qubit: false,
            heater_cals: Vec::new(),
        }
    }

    /// Names of all heater-bound phase parameters.
    pub fn heater_names(&self) -> BTreeSet<String> {
        self.elements
            .iter()
            .filter_map(|(_, e)| match e {
                Element::Phase {
                    setting: PhaseSetting::Heater(n),
                    ..
                } => Some(n.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn qubit_pair(&self, name: &str) -> Option<(usize, usize)> {
        self.qubits
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|&(_, a, b)| (a, b))
    }

    fn validate(&self) -> Result<()> {
        let check = |m: usize| -> Result<()> {
            if m >= self.modes {
                Err(Error::BadModeIndex {
                    mode: m,
                    modes: self.modes,
                })
            } else {
                Ok(())
            }
        };
        for (_, e) in &self.elements {
            match e {
                Element::Coupler { a, b, eta, .. } => {
                    check(*a)?;
                    check(*b)?;
                    if !(0.0..=1.0).contains(eta) {
                        return Err(Error::OutOfRange {
                            name: "eta",
                            value: *eta,
                            expected: "[0, 1]",
                        });
                    }
                }
                Element::Phase { mode, .. } => check(*mode)?,
                Element::Crossing { a, b } => {
                    check(*a)?;
                    check(*b)?;
                }
                Element::Loss { mode, transmission } => {
                    check(*mode)?;
                    if !(0.0..=1.0).contains(transmission) {
                        return Err(Error::OutOfRange {
                            name: "transmission",
                            value: *transmission,
                            expected: "[0, 1]",
                        });
                    }
                }
            }
        }
        let mut seen = BTreeSet::new();
        for (name, a, b) in &self.qubits {
            check(*a)?;
            check(*b)?;
            for m in [a, b] {
                if !seen.insert(*m) {
                    return Err(Error::Config(format!(
                        "qubit {name}: mode {m} assigned to more than one qubit rail"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Assemble the full transfer matrix with every stage included.
    pub fn assemble(&self, phases: &HashMap<String, f64>) -> Result<DMatrix<C64>> {
        self.assemble_stages(&[Stage::Prep, Stage::Core, Stage::Tomography], phases)
    }

    /// Assemble only the listed stages, in element order.
    pub fn assemble_stages(
        &self,
        stages: &[Stage],
        phases: &HashMap<String, f64>,
    ) -> Result<DMatrix<C64>> {
        self.validate()?;
        let missing: Vec<String> = self
            .heater_names()
            .into_iter()
            .filter(|n| {
                !phases.contains_key(n)
                    && self.elements.iter().any(|(s, e)| {
                        stages.contains(s)
                            && matches!(e, Element::Phase { setting: PhaseSetting::Heater(h), .. } if h == n)
                    })
            })
            .collect();
        if !missing.is_empty() {
            return Err(Error::UnboundPhases { names: missing });
        }

        let mut u: DMatrix<C64> = DMatrix::identity(self.modes, self.modes);
        for (stage, element) in &self.elements {
            if !stages.contains(stage) {
                continue;
            }
            apply_element(&mut u, element, phases)?;
        }
        Ok(u)
    }

    /// The 2x2 operator a stage applies to one qubit's rail pair. Meaningful
    /// when the stage only touches that pair (the state-preparation and
    /// tomography stages of the reference chip).
    pub fn stage_qubit_block(
        &self,
        stage: Stage,
        qubit: &str,
        phases: &HashMap<String, f64>,
    ) -> Result<nalgebra::Matrix2<C64>> {
        let (a, b) = self
            .qubit_pair(qubit)
            .ok_or_else(|| Error::Config(format!("unknown qubit {qubit}")))?;
        let u = self.assemble_stages(&[stage], phases)?;
        Ok(nalgebra::Matrix2::new(
            u[(a, a)],
            u[(a, b)],
            u[(b, a)],
            u[(b, b)],
        ))
    }
}

fn apply_element(
    u: &mut DMatrix<C64>,
    element: &Element,
    phases: &HashMap<String, f64>,
) -> Result<()> {
    let modes = u.nrows();
    match element {
        Element::Coupler { a, b, eta, .. } => {
            let c = coupler_matrix(*eta)?;
            // Left-multiply by the embedded coupler: replace rows a and b.
            for j in 0..modes {
                let ra = u[(*a, j)];
                let rb = u[(*b, j)];
                u[(*a, j)] = c[(0, 0)] * ra + c[(0, 1)] * rb;
                u[(*b, j)] = c[(1, 0)] * ra + c[(1, 1)] * rb;
            }
        }
        Element::Phase { mode, setting } => {
            let value = match setting {
                PhaseSetting::Radians(r) => *r,
                PhaseSetting::Heater(name) => *phases
                    .get(name)
                    .ok_or_else(|| Error::UnboundPhases { names: vec![name.clone()] })?,
            };
            let factor = C64::from_polar(1.0, value);
            for j in 0..modes {
                u[(*mode, j)] *= factor;
            }
        }
        Element::Crossing { a, b } => {
            u.swap_rows(*a, *b);
        }
        Element::Loss { mode, transmission } => {
            let factor = C64::new(transmission.sqrt(), 0.0);
            for j in 0..modes {
                u[(*mode, j)] *= factor;
            }
        }
    }
    Ok(())
}

/// Deviation of `U` from unitarity, `max |U^H U - I|`.
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let gram = u.adjoint() * u;
    let n = gram.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let expect = if i == j { C64::new(1.0, 0.0) } else { C64::default() };
            worst = worst.max((gram[(i, j)] - expect).norm());
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Layout file format
// ---------------------------------------------------------------------------

/// Parse the line-oriented layout format.
///
/// Directives: `MODES`, `QUBIT`, `STAGE`, `BS`, `PS`, `XING`, `LOSS`,
/// `POSTSELECT`, `HEATERCAL`; `#` starts a comment.
pub fn parse_layout(text: &str) -> Result<CircuitLayout> {
    let mut layout: Option<CircuitLayout> = None;
    let mut stage = Stage::Core;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::LayoutParse {
            line: line_no,
            message,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let directive = tokens[0].to_ascii_uppercase();

        if directive == "MODES" {
            let m: usize = tokens
                .get(1)
                .ok_or_else(|| err("MODES requires a count".into()))?
                .parse()
                .map_err(|_| err("bad mode count".into()))?;
            layout = Some(CircuitLayout::new(m));
            continue;
        }
        let lay = layout
            .as_mut()
            .ok_or_else(|| err("MODES must come first".into()))?;
        let parse_mode = |tok: Option<&&str>| -> Result<usize> {
            let m: usize = tok
                .ok_or_else(|| err("missing mode index".into()))?
                .parse()
                .map_err(|_| err("bad mode index".into()))?;
            if m >= lay.modes {
                return Err(err(format!("mode {m} out of range (MODES {})", lay.modes)));
            }
            Ok(m)
        };
        let parse_f64 = |tok: Option<&&str>, what: &str| -> Result<f64> {
            tok.ok_or_else(|| err(format!("missing {what}")))?
                .parse()
                .map_err(|_| err(format!("bad {what}")))
        };

        match directive.as_str() {
            "QUBIT" => {
                let name = tokens
                    .get(1)
                    .ok_or_else(|| err("QUBIT requires a name".into()))?
                    .to_string();
                let a = parse_mode(tokens.get(2))?;
                let b = parse_mode(tokens.get(3))?;
                lay.qubits.push((name, a, b));
            }
            "STAGE" => {
                stage = match tokens
                    .get(1)
                    .map(|s| s.to_ascii_lowercase())
                    .as_deref()
                {
                    Some("prep") => Stage::Prep,
                    Some("core") => Stage::Core,
                    Some("tomography") => Stage::Tomography,
                    other => return Err(err(format!("unknown stage {other:?}"))),
                };
            }
            "BS" => {
                let a = parse_mode(tokens.get(1))?;
                let b = parse_mode(tokens.get(2))?;
                let eta = parse_f64(tokens.get(3), "eta")?;
                if !(0.0..=1.0).contains(&eta) {
                    return Err(err(format!("eta {eta} outside [0, 1]")));
                }
                let label = tokens.get(4).map(|s| s.to_string());
                lay.elements.push((stage, Element::Coupler { a, b, eta, label }));
            }
            "PS" => {
                let mode = parse_mode(tokens.get(1))?;
                let setting = match tokens.get(2).map(|s| s.to_ascii_uppercase()).as_deref() {
                    Some("HEATER") => PhaseSetting::Heater(
                        tokens
                            .get(3)
                            .ok_or_else(|| err("HEATER requires a name".into()))?
                            .to_string(),
                    ),
                    _ => PhaseSetting::Radians(parse_f64(tokens.get(2), "phase value")?),
                };
                lay.elements.push((stage, Element::Phase { mode, setting }));
            }
            "XING" => {
                let a = parse_mode(tokens.get(1))?;
                let b = parse_mode(tokens.get(2))?;
                lay.elements.push((stage, Element::Crossing { a, b }));
            }
            "LOSS" => {
                let mode = parse_mode(tokens.get(1))?;
                let t = parse_f64(tokens.get(2), "transmission")?;
                if !(0.0..=1.0).contains(&t) {
                    return Err(err(format!("transmission {t} outside [0, 1]")));
                }
                lay.elements.push((stage, Element::Loss { mode, transmission: t }));
            }
            "POSTSELECT" => {
                let rest = tokens[1..].join(" ").to_ascii_uppercase();
                if rest != "1 PER QUBIT" {
                    return Err(err(format!("unsupported POSTSELECT pattern {rest:?}")));
                }
                lay.postselect_one_per_qubit = true;
            }
            "HEATERCAL" => {
                let name = tokens
                    .get(1)
                    .ok_or_else(|| err("HEATERCAL requires a name".into()))?
                    .to_string();
                lay.heater_cals.push(HeaterCal {
                    name,
                    a: parse_f64(tokens.get(2), "a")?,
                    b: parse_f64(tokens.get(3), "b")?,
                    c: parse_f64(tokens.get(4), "c")?,
                    resistance: parse_f64(tokens.get(5), "R")?,
                    v_min: parse_f64(tokens.get(6), "v_min")?,
                    v_max: parse_f64(tokens.get(7), "v_max")?,
                });
            }
            other => return Err(err(format!("unknown directive {other}"))),
        }
    }

    let layout = layout.ok_or(Error::LayoutParse {
        line: 0,
        message: "empty layout (no MODES directive)".into(),
    })?;
    layout.validate()?;
    Ok(layout)
}

/// Emit the layout in the same line format `parse_layout` reads. Floating
/// point values print in shortest round-trip form.
pub fn serialize_layout(layout: &CircuitLayout) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "MODES {}", layout.modes);
    for (name, a, b) in &layout.qubits {
        let _ = writeln!(out, "QUBIT {name} {a} {b}");
    }
    let mut stage = Stage::Core;
    let mut first = true;
    for (s, e) in &layout.elements {
        if first || *s != stage {
            let tag = match s {
                Stage::Prep => "prep",
                Stage::Core => "core",
                Stage::Tomography => "tomography",
            };
            let _ = writeln!(out, "STAGE {tag}");
            stage = *s;
            first = false;
        }
        match e {
            Element::Coupler { a, b, eta, label } => {
                let _ = match label {
                    Some(l) => writeln!(out, "BS {a} {b} {eta} {l}"),
                    None => writeln!(out, "BS {a} {b} {eta}"),
                };
            }
            Element::Phase { mode, setting } => {
                let _ = match setting {
                    PhaseSetting::Radians(r) => writeln!(out, "PS {mode} {r}"),
                    PhaseSetting::Heater(h) => writeln!(out, "PS {mode} HEATER {h}"),
                };
            }
            Element::Crossing { a, b } => {
                let _ = writeln!(out, "XING {a} {b}");
            }
            Element::Loss { mode, transmission } => {
                let _ = writeln!(out, "LOSS {mode} {transmission}");
            }
        }
    }
    if layout.postselect_one_per_qubit {
        let _ = writeln!(out, "POSTSELECT 1 PER QUBIT");
    }
    for h in &layout.heater_cals {
        let _ = writeln!(
            out,
            "HEATERCAL {} {} {} {} {} {} {}",
            h.name, h.a, h.b, h.c, h.resistance, h.v_min, h.v_max
        );
    }
    out
}

/// Bundled layout of the reference teleportation chip.
///
/// Eight waveguides: a dump mode, three dual-rail qubits, a dump mode. Twelve
/// couplers: the preparation MZI on Q1, H1-H4 at `eta = 1/2`, the cascaded
/// post-selected C-phase network built from four `eta = 1/3` X couplers, and
/// the tomography MZI on Q3. Fixed phase shifters absorb the coupler phase
/// convention so the ideal Bell-measurement corrections are Pauli operators.
pub fn reference_chip_layout() -> CircuitLayout {
    parse_layout(REFERENCE_CHIP_LAYOUT).expect("bundled layout parses")
}

/// Source text of the bundled reference layout.
pub const REFERENCE_CHIP_LAYOUT: &str = include_str!("../layouts/reference_chip.layout");
