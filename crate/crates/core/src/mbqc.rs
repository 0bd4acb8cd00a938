//! Adaptive single-qubit measurement patterns with a Pauli frame.
//!
//! Each step measures one qubit in the XY plane (`cos θ X + sin θ Y`) or in
//! `Z`. Outcome bit `0` is the `+1` eigenvalue. A step's angle is negated
//! when the XOR of its dependency outcomes is 1. After the last step, the
//! output register receives `X^sx` then `Z^sz` for each output qubit.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::densesim::{apply_unitary_unchecked, gates, partial_trace, random_pure_state, QuantumState, StateRepr};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, ONE, ZERO};
use crate::par::SimRng;
use crate::pauli::Letter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plane {
    XY,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub plane: Plane,
    #[serde(default)]
    pub angle: f64,
}

impl BasisSpec {
    pub fn xy(angle: f64) -> Self {
        Self { plane: Plane::XY, angle }
    }

    pub fn z() -> Self {
        Self { plane: Plane::Z, angle: 0.0 }
    }

    /// Basis vector for outcome bit `bit`, given the (adapted) angle.
    fn vector(self, angle: f64, bit: bool) -> [C64; 2] {
        let h = 1.0 / 2f64.sqrt();
        match self.plane {
            Plane::Z => {
                if bit {
                    [ZERO, ONE]
                } else {
                    [ONE, ZERO]
                }
            }
            Plane::XY => {
                let sign = if bit { -1.0 } else { 1.0 };
                [C64::new(h, 0.0), C64::from_polar(h * sign, angle)]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub qubit: usize,
    #[serde(flatten)]
    pub basis: BasisSpec,
    /// Earlier step indices whose outcome parity flips the angle sign.
    #[serde(default)]
    pub deps: Vec<usize>,
}

/// Step indices whose outcome parities set the `X` and `Z` byproducts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correction {
    #[serde(default)]
    pub x: Vec<usize>,
    #[serde(default)]
    pub z: Vec<usize>,
}

/// `{ "steps": [...], "outputs": [...], "byproduct": { "<qubit>": {"x": [...], "z": [...]} } }`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPattern {
    pub steps: Vec<Step>,
    pub outputs: Vec<usize>,
    #[serde(default)]
    pub byproduct: BTreeMap<usize, Correction>,
}

impl MeasurementPattern {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let mut measured = Vec::new();
        for (i, step) in self.steps.iter().enumerate() {
            if measured.contains(&step.qubit) {
                return Err(Error::QubitReused(step.qubit));
            }
            if !step.basis.angle.is_finite() {
                return Err(Error::InvalidPattern(format!("step {i} has a non-finite angle")));
            }
            if let Some(&d) = step.deps.iter().find(|&&d| d >= i) {
                return Err(Error::InvalidPattern(format!("step {i} depends on later step {d}")));
            }
            measured.push(step.qubit);
        }
        for (a, o) in self.outputs.iter().enumerate() {
            if measured.contains(o) {
                return Err(Error::InvalidPattern(format!("output qubit {o} is measured")));
            }
            if self.outputs[..a].contains(o) {
                return Err(Error::RepeatedQubit(*o));
            }
        }
        for (q, c) in &self.byproduct {
            if !self.outputs.contains(q) {
                return Err(Error::InvalidPattern(format!("byproduct on non-output qubit {q}")));
            }
            if let Some(d) = c.x.iter().chain(&c.z).find(|&&d| d >= self.steps.len()) {
                return Err(Error::InvalidPattern(format!("byproduct references missing step {d}")));
            }
        }
        Ok(())
    }

    /// Linear cluster `0 - 1 - ... - h` with the input on qubit 0: measuring
    /// qubits `0..h` at the given angles teleports `J(θ_{h-1}) ... J(θ_0)`
    /// onto qubit `h`.
    pub fn chain(angles: &[f64]) -> Self {
        let mut steps = Vec::new();
        for (i, &a) in angles.iter().enumerate() {
            // X byproduct on qubit i collects outcomes i-1, i-3, ...
            let deps: Vec<usize> = (0..i).rev().step_by(2).collect();
            steps.push(Step { qubit: i, basis: BasisSpec::xy(a), deps });
        }
        let hops = angles.len();
        // After hop i the frame picks up X^{m_i}, and earlier X's become Z's.
        let mut x = Vec::new();
        let mut z = Vec::new();
        for i in (0..hops).rev() {
            if (hops - 1 - i).is_multiple_of(2) {
                x.push(i);
            } else {
                z.push(i);
            }
        }
        x.sort_unstable();
        z.sort_unstable();
        let mut byproduct = BTreeMap::new();
        byproduct.insert(hops, Correction { x, z });
        Self { steps, outputs: vec![hops], byproduct }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternResult {
    pub outcomes: Vec<bool>,
    pub output: QuantumState,
}

/// Runs the pattern and returns the corrected state of the output register.
pub fn execute_pattern<R: Rng + ?Sized>(
    state: &QuantumState,
    pat: &MeasurementPattern,
    rng: &mut R,
) -> Result<PatternResult> {
    pat.validate()?;
    let n = state.num_qubits();
    for q in pat.steps.iter().map(|s| s.qubit).chain(pat.outputs.iter().copied()) {
        if q >= n {
            return Err(Error::QubitOutOfRange { index: q, qubits: n });
        }
    }
    let mut current = state.clone();
    let mut outcomes = Vec::with_capacity(pat.steps.len());
    let mut measured = Vec::with_capacity(pat.steps.len());
    for step in &pat.steps {
        let flip = step.deps.iter().fold(false, |acc, &d| acc ^ outcomes[d]);
        let angle = if flip { -step.basis.angle } else { step.basis.angle };
        let (bit, next) = measure_qubit(&current, step.qubit, step.basis, angle, rng)?;
        outcomes.push(bit);
        measured.push((step.qubit, step.basis.vector(angle, bit)));
        current = next;
    }
    let mut output = extract_outputs(&current, &measured, &pat.outputs)?;
    for (pos, q) in pat.outputs.iter().enumerate() {
        let Some(c) = pat.byproduct.get(q) else { continue };
        let sx = c.x.iter().fold(false, |acc, &d| acc ^ outcomes[d]);
        let sz = c.z.iter().fold(false, |acc, &d| acc ^ outcomes[d]);
        if sx {
            output = apply_unitary_unchecked(&output, &gates::pauli(Letter::X), &[pos]);
        }
        if sz {
            output = apply_unitary_unchecked(&output, &gates::pauli(Letter::Z), &[pos]);
        }
    }
    Ok(PatternResult { outcomes, output })
}

/// Born probabilities of outcome bits 0 and 1 for one qubit measurement.
pub fn outcome_probabilities(state: &QuantumState, qubit: usize, basis: BasisSpec) -> Result<[f64; 2]> {
    let n = state.num_qubits();
    if qubit >= n {
        return Err(Error::QubitOutOfRange { index: qubit, qubits: n });
    }
    let p0 = projected(state, qubit, basis.vector(basis.angle, false)).1;
    Ok([p0, 1.0 - p0])
}

fn measure_qubit<R: Rng + ?Sized>(
    state: &QuantumState,
    qubit: usize,
    basis: BasisSpec,
    angle: f64,
    rng: &mut R,
) -> Result<(bool, QuantumState)> {
    let (s0, p0) = projected(state, qubit, basis.vector(angle, false));
    let bit = rng.random::<f64>() >= p0;
    let (s, p) = if bit { projected(state, qubit, basis.vector(angle, true)) } else { (s0, p0) };
    if p <= 0.0 {
        return Err(Error::InvalidState("selected a zero-probability branch".into()));
    }
    Ok((bit, renormalize(s, p)))
}

/// Projects `qubit` onto `|v>` (unnormalized) and returns the probability.
fn projected(state: &QuantumState, qubit: usize, v: [C64; 2]) -> (QuantumState, f64) {
    let proj = CMatrix::outer(&v, &v);
    let s = apply_unitary_unchecked(state, &proj, &[qubit]);
    let p = match s.repr() {
        StateRepr::Pure(a) => linalg::norm(a).powi(2),
        StateRepr::Mixed(m) => m.trace().re,
    };
    (s, p)
}

fn renormalize(s: QuantumState, p: f64) -> QuantumState {
    match s.repr() {
        StateRepr::Pure(a) => QuantumState::pure_unchecked(a.iter().map(|x| x / p.sqrt()).collect()),
        StateRepr::Mixed(m) => QuantumState::mixed_unchecked(m.scale_real(1.0 / p)),
    }
}

fn extract_outputs(state: &QuantumState, measured: &[(usize, [C64; 2])], outputs: &[usize]) -> Result<QuantumState> {
    let n = state.num_qubits();
    let all_accounted = (0..n).all(|q| outputs.contains(&q) || measured.iter().any(|&(m, _)| m == q));
    let Some(amps) = state.amplitudes().filter(|_| all_accounted) else {
        return partial_trace(state, outputs);
    };
    // The state is a product of the recorded basis vectors with the output
    // register, so contracting with those vectors leaves the output amplitudes.
    let bit = |q: usize| 1usize << (n - 1 - q);
    let mut out = vec![ZERO; 1 << outputs.len()];
    for (idx, &a) in amps.iter().enumerate() {
        if a == ZERO {
            continue;
        }
        let w: C64 = measured.iter().map(|&(q, v)| v[(idx & bit(q) != 0) as usize].conj()).product();
        let sub = outputs.iter().fold(0usize, |acc, &q| (acc << 1) | ((idx & bit(q) != 0) as usize));
        out[sub] += a * w;
    }
    linalg::normalize(&mut out);
    Ok(QuantumState::pure_unchecked(out))
}

/// Maximum fidelity deficit `1 - |<Uψ|out>|^2` of a pattern against a target
/// unitary over `trials` Haar-random inputs and random outcome branches.
pub fn pattern_vs_circuit<F>(
    pat: &MeasurementPattern,
    resource_builder: F,
    target: &CMatrix,
    input_qubits: usize,
    trials: usize,
    rng: &mut SimRng,
) -> Result<f64>
where
    F: Fn(&QuantumState) -> Result<QuantumState>,
{
    if target.dim() != 1 << input_qubits {
        return Err(Error::DimensionMismatch { expected: 1 << input_qubits, found: target.dim() });
    }
    if pat.outputs.len() != input_qubits {
        return Err(Error::DimensionMismatch { expected: input_qubits, found: pat.outputs.len() });
    }
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let psi = random_pure_state(input_qubits, rng)?;
        let expected = target.mul_vec(psi.amplitudes().expect("pure input"));
        let resource = resource_builder(&psi)?;
        let result = execute_pattern(&resource, pat, rng)?;
        let fid = result.output.fidelity_with_pure(&expected)?;
        worst = worst.max(1.0 - fid);
    }
    Ok(worst)
}
