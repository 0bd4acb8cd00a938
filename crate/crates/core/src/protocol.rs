//! QAM systems and their single-qubit-measurement counterpart.
//!
//! Arthur sends a random `s`-bit challenge `y`, Merlin answers with a state,
//! and Arthur either runs the computation (probability `q`) or a stabilizer
//! test on the graph part (probability `1 - q`).
//!
//! Direct mode is the reference semantics for the computation branch:
//! Arthur undoes the connecting CZ layer, keeps the witness register, appends
//! `|+>^v` ancillas, applies `A_y` and measures the output qubit, accepting
//! on `1`. MBQC mode instead runs a registered measurement pattern on the
//! state Merlin sent.

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::densesim::{
    apply_unitary_unchecked, gates, matrix_from_json, operator_expectation, partial_trace, plus_state,
    pauli_plus_probability, sample_pauli, MatrixJson, ObservableElement, Outcome, QuantumState, VALIDITY_TOL,
};
use crate::error::{Error, Result};
use crate::graphstate::{connect_witness, extended_test_stabilizers, ConnectedSystem, ConnectedSystemFile};
use crate::linalg::{CMatrix, C64, ZERO};
use crate::mbqc::{execute_pattern, MeasurementPattern};
use crate::par::{run_batches, sub_seed, stream_rng, Execution, Tally};
use crate::pauli::{PauliString, StabilizerGroup, SubsetSelector};
use crate::stabtest::{exact_pass_probability, run_test_round, LambdaProjector, RoundRecord};

/// Largest challenge length enumerated exactly.
pub const MAX_ENUMERATED_CHALLENGE_BITS: u32 = 10;

/// Challenges sampled when `s` is too large to enumerate.
pub const CHALLENGE_SAMPLES: u64 = 1024;

/// Scalar schedule of the single-measurement protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolParams {
    pub x_size: Option<u64>,
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gap: f64,
    pub s: u32,
    pub m: usize,
    pub v: usize,
}

impl ProtocolParams {
    /// `ε = 1/(128 |x|^2)`, `δ = 2 sqrt(2ε)`, `q = ε/(1+ε-δ)`,
    /// `α = qa + 1 - q`, `β = qb + qδ + 1 - q`.
    pub fn new(x_size: u64, a: f64, b: f64) -> Result<Self> {
        if x_size == 0 {
            return Err(Error::InvalidParams("instance size must be positive".into()));
        }
        let eps = 1.0 / (128.0 * (x_size as f64).powi(2));
        let mut p = Self::with_epsilon(eps, a, b)?;
        p.x_size = Some(x_size);
        Ok(p)
    }

    pub fn with_epsilon(epsilon: f64, a: f64, b: f64) -> Result<Self> {
        check_promise(a, b)?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!("epsilon {epsilon} must be positive")));
        }
        let delta = 2.0 * (2.0 * epsilon).sqrt();
        let denom = 1.0 + epsilon - delta;
        if denom <= 0.0 {
            return Err(Error::InvalidParams(format!("delta {delta} >= 1 + epsilon makes q degenerate")));
        }
        let q = epsilon / denom;
        let alpha = q * a + (1.0 - q);
        let beta = q * b + q * delta + 1.0 - q;
        let p = Self { x_size: None, a, b, epsilon, delta, q, alpha, beta, gap: alpha - beta, s: 0, m: 0, v: 0 };
        let residual = p.identity_residual();
        if residual.abs() > 1e-12 {
            return Err(Error::InvalidParams(format!("q - qδ + qε - ε = {residual:e}")));
        }
        Ok(p)
    }

    pub fn with_dims(mut self, s: u32, m: usize, v: usize) -> Self {
        self.s = s;
        self.m = m;
        self.v = v;
        self
    }

    /// `q - qδ + qε - ε`, zero by the choice of `q`.
    pub fn identity_residual(&self) -> f64 {
        self.q - self.q * self.delta + self.q * self.epsilon - self.epsilon
    }

    /// `(a - b - δ) ε / (1 + ε - δ)`
    pub fn gap_formula(&self) -> f64 {
        (self.a - self.b - self.delta) * self.epsilon / (1.0 + self.epsilon - self.delta)
    }

    /// `1 / (12 * 129 * |x|^2)`
    pub fn printed_gap_bound(&self) -> Option<f64> {
        self.x_size.map(|x| 1.0 / (12.0 * 129.0 * (x as f64).powi(2)))
    }

    /// `β` with `b` replaced by an instance-exact soundness value.
    pub fn beta_for(&self, b_exact: f64) -> f64 {
        self.q * (b_exact + self.delta) + 1.0 - self.q
    }
}

pub(crate) fn check_promise(a: f64, b: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
        return Err(Error::InvalidParams(format!("a = {a} and b = {b} must lie in [0, 1]")));
    }
    if a <= b {
        return Err(Error::InvalidParams(format!("need b < a, got a = {a}, b = {b}")));
    }
    Ok(())
}

pub fn make_params(x_size: u64, a: f64, b: f64) -> Result<ProtocolParams> {
    ProtocolParams::new(x_size, a, b)
}

/// Gate applied only when challenge bit `bit` equals `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub bit: u32,
    pub value: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub gate: String,
    pub targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<Condition>,
}

impl GateSpec {
    pub fn new(gate: &str, targets: &[usize]) -> Self {
        Self { gate: gate.into(), targets: targets.to_vec(), angle: None, matrix: None, when: None }
    }

    pub fn with_angle(mut self, angle: f64) -> Self {
        self.angle = Some(angle);
        self
    }

    pub fn when(mut self, bit: u32, value: u8) -> Self {
        self.when = Some(Condition { bit, value });
        self
    }

    fn resolve(&self) -> Result<CMatrix> {
        let angle = || self.angle.ok_or_else(|| Error::Parse(format!("gate {} needs an angle", self.gate)));
        let (m, arity) = match self.gate.to_ascii_lowercase().as_str() {
            "i" | "id" => (CMatrix::identity(2), 1),
            "h" => (gates::hadamard(), 1),
            "x" => (gates::pauli(crate::pauli::Letter::X), 1),
            "y" => (gates::pauli(crate::pauli::Letter::Y), 1),
            "z" => (gates::pauli(crate::pauli::Letter::Z), 1),
            "s" => (gates::phase(std::f64::consts::FRAC_PI_2), 1),
            "t" => (gates::phase(std::f64::consts::FRAC_PI_4), 1),
            "phase" => (gates::phase(angle()?), 1),
            "rx" => (gates::rx(angle()?), 1),
            "ry" => (gates::ry(angle()?), 1),
            "rz" => (gates::rz(angle()?), 1),
            "j" => (gates::j(angle()?), 1),
            "cz" => (gates::cz(), 2),
            "cnot" | "cx" => (gates::cnot(), 2),
            "swap" => (gates::swap(), 2),
            "matrix" => {
                let rows = self.matrix.clone().ok_or_else(|| Error::Parse("matrix gate needs \"matrix\"".into()))?;
                let m = matrix_from_json(rows)?;
                let k = self.targets.len();
                (m, k)
            }
            other => return Err(Error::Parse(format!("unknown gate {other:?}"))),
        };
        if self.targets.len() != arity || m.dim() != 1 << arity {
            return Err(Error::DimensionMismatch { expected: m.dim(), found: 1 << self.targets.len() });
        }
        let defect = m.unitarity_defect();
        if defect > VALIDITY_TOL {
            return Err(Error::NotUnitary(defect));
        }
        Ok(m)
    }
}

/// `{ "s": int, "m": int, "v": int, "output": int, "gates": [...] }`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub s: u32,
    pub m: usize,
    #[serde(default)]
    pub v: usize,
    pub output: usize,
    pub gates: Vec<GateSpec>,
}

/// Arthur's original verification circuit `A_y` on `m + v` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifierCircuit {
    spec: CircuitSpec,
    ops: Vec<(CMatrix, Vec<usize>, Option<Condition>)>,
}

impl VerifierCircuit {
    pub fn new(spec: CircuitSpec) -> Result<Self> {
        let width = spec.m + spec.v;
        if spec.m == 0 {
            return Err(Error::InvalidParams("witness register must be nonempty".into()));
        }
        if spec.s > 63 {
            return Err(Error::InvalidParams(format!("challenge length {} exceeds 63 bits", spec.s)));
        }
        if spec.output >= width {
            return Err(Error::QubitOutOfRange { index: spec.output, qubits: width });
        }
        let mut ops = Vec::with_capacity(spec.gates.len());
        for g in &spec.gates {
            for (a, &t) in g.targets.iter().enumerate() {
                if t >= width {
                    return Err(Error::QubitOutOfRange { index: t, qubits: width });
                }
                if g.targets[..a].contains(&t) {
                    return Err(Error::RepeatedQubit(t));
                }
            }
            if let Some(c) = g.when {
                if c.bit >= spec.s.max(1) || c.value > 1 {
                    return Err(Error::InvalidParams(format!("condition on bit {} = {}", c.bit, c.value)));
                }
            }
            ops.push((g.resolve()?, g.targets.clone(), g.when));
        }
        Ok(Self { spec, ops })
    }

    pub fn spec(&self) -> &CircuitSpec {
        &self.spec
    }

    pub fn challenge_bits(&self) -> u32 {
        self.spec.s
    }

    pub fn num_challenges(&self) -> u64 {
        1u64 << self.spec.s
    }

    pub fn witness_qubits(&self) -> usize {
        self.spec.m
    }

    pub fn ancilla_qubits(&self) -> usize {
        self.spec.v
    }

    pub fn output(&self) -> usize {
        self.spec.output
    }

    fn check_challenge(&self, y: u64) -> Result<()> {
        if y >= self.num_challenges() {
            return Err(Error::InvalidParams(format!("challenge {y} out of range for s = {}", self.spec.s)));
        }
        Ok(())
    }

    /// Applies `A_y` to a state on the full `m + v` register.
    pub fn apply(&self, y: u64, state: &QuantumState) -> Result<QuantumState> {
        self.check_challenge(y)?;
        let width = self.spec.m + self.spec.v;
        if state.num_qubits() != width {
            return Err(Error::DimensionMismatch { expected: width, found: state.num_qubits() });
        }
        let mut s = state.clone();
        for (u, targets, cond) in &self.ops {
            if let Some(c) = cond {
                if ((y >> c.bit) & 1) as u8 != c.value {
                    continue;
                }
            }
            s = apply_unitary_unchecked(&s, u, targets);
        }
        Ok(s)
    }

    /// `A_y (witness ⊗ |+>^v)`
    pub fn prepare(&self, y: u64, witness: &QuantumState) -> Result<QuantumState> {
        if witness.num_qubits() != self.spec.m {
            return Err(Error::DimensionMismatch { expected: self.spec.m, found: witness.num_qubits() });
        }
        let input = if self.spec.v == 0 { witness.clone() } else { witness.tensor(&plus_state(self.spec.v)?)? };
        self.apply(y, &input)
    }

    fn output_z(&self) -> PauliString {
        PauliString::single(self.spec.m + self.spec.v, self.spec.output, crate::pauli::Letter::Z)
    }

    /// `||Π_1 A_y |witness>|+>^v||^2`
    pub fn acceptance_probability(&self, y: u64, witness: &QuantumState) -> Result<f64> {
        let out = self.prepare(y, witness)?;
        Ok(1.0 - pauli_plus_probability(&out, &self.output_z())?)
    }

    /// Samples Arthur's output-qubit measurement on a prepared state.
    pub fn sample_output<R: Rng + ?Sized>(&self, prepared: &QuantumState, rng: &mut R) -> Result<bool> {
        Ok(sample_pauli(prepared, &self.output_z(), rng)? == Outcome::Minus)
    }

    /// Acceptance operator on the witness register:
    /// `E[i][j] = <i,+^v| A_y† Π_1 A_y |j,+^v>`.
    pub fn witness_operator(&self, y: u64) -> Result<CMatrix> {
        let m = self.spec.m;
        let dm = 1usize << m;
        let out_bit = 1usize << (self.spec.m + self.spec.v - 1 - self.spec.output);
        let columns = (0..dm)
            .map(|j| {
                let bits: Vec<bool> = (0..m).map(|q| (j >> (m - 1 - q)) & 1 == 1).collect();
                let prepared = self.prepare(y, &QuantumState::basis(&bits)?)?;
                let amps = prepared.amplitudes().expect("pure input stays pure").to_vec();
                Ok(amps.into_iter().enumerate().map(|(k, a)| if k & out_bit != 0 { a } else { ZERO }).collect())
            })
            .collect::<Result<Vec<Vec<C64>>>>()?;
        Ok(CMatrix::from_fn(dm, |i, j| crate::linalg::inner(&columns[i], &columns[j])))
    }

    /// Best single-challenge acceptance `λ_max(E_y)` and a maximizing witness.
    pub fn best_witness(&self, y: u64) -> Result<(f64, QuantumState)> {
        let (vals, vecs) = self.witness_operator(y)?.eigh();
        let top = vecs.last().cloned().ok_or_else(|| Error::InvalidState("empty witness space".into()))?;
        Ok((*vals.last().unwrap(), QuantumState::pure_normalized(top)?))
    }

    /// Instance-exact soundness: the challenge average of the best
    /// per-challenge witness values.
    pub fn exact_best_acceptance(&self) -> Result<f64> {
        let total: f64 =
            (0..self.num_challenges()).map(|y| self.best_witness(y).map(|b| b.0)).sum::<Result<f64>>()?;
        Ok(total / self.num_challenges() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcceptanceEstimate {
    pub value: f64,
    pub enumerated: bool,
    pub challenges: u64,
    pub std_error: f64,
}

/// `p_acc = 2^{-s} sum_y ||Π_1 A_y |ψ_y>|+>^v||^2`, enumerated for small `s`
/// and sampled over challenges otherwise.
pub fn qam_acceptance<F>(circuit: &VerifierCircuit, witnesses: F, seed: u64) -> Result<AcceptanceEstimate>
where
    F: Fn(u64) -> Result<QuantumState>,
{
    if circuit.challenge_bits() <= MAX_ENUMERATED_CHALLENGE_BITS {
        let count = circuit.num_challenges();
        let mut total = 0.0;
        for y in 0..count {
            total += circuit.acceptance_probability(y, &witnesses(y)?)?;
        }
        return Ok(AcceptanceEstimate { value: total / count as f64, enumerated: true, challenges: count, std_error: 0.0 });
    }
    let mut rng = stream_rng(seed, 0);
    let mut values = Vec::with_capacity(CHALLENGE_SAMPLES as usize);
    for _ in 0..CHALLENGE_SAMPLES {
        let y = rng.random::<u64>() & (circuit.num_challenges() - 1);
        values.push(circuit.acceptance_probability(y, &witnesses(y)?)?);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(AcceptanceEstimate { value: mean, enumerated: false, challenges: CHALLENGE_SAMPLES, std_error: (var / n).sqrt() })
}

#[derive(Debug, Clone, PartialEq)]
pub enum MerlinStrategy {
    Honest,
    /// Honest state mixed with the maximally mixed state at weight `μ`.
    Depolarizing(f64),
    Fixed(QuantumState),
    /// Top eigenvector of the per-challenge acceptance operator.
    Optimal,
}

impl MerlinStrategy {
    pub fn name(&self) -> String {
        match self {
            MerlinStrategy::Honest => "honest".into(),
            MerlinStrategy::Depolarizing(mu) => format!("depolarizing:{mu}"),
            MerlinStrategy::Fixed(_) => "fixed".into(),
            MerlinStrategy::Optimal => "optimal".into(),
        }
    }
}

impl FromStr for MerlinStrategy {
    type Err = Error;

    /// `honest`, `depolarizing:<μ>` or `optimal`; fixed states come from files.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "honest" => Ok(Self::Honest),
            "optimal" => Ok(Self::Optimal),
            _ => {
                if let Some(mu) = s.strip_prefix("depolarizing:") {
                    let mu: f64 = mu.parse().map_err(|_| Error::Parse(format!("bad depolarizing weight {mu:?}")))?;
                    if !(0.0..=1.0).contains(&mu) {
                        return Err(Error::InvalidParams(format!("depolarizing weight {mu} outside [0, 1]")));
                    }
                    Ok(Self::Depolarizing(mu))
                } else {
                    Err(Error::Parse(format!("unknown strategy {s:?}")))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Direct,
    Mbqc,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Mode::Direct),
            "mbqc" => Ok(Mode::Mbqc),
            other => Err(Error::Parse(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Computation {
    Direct { output_bit: bool },
    Mbqc { outcomes: Vec<bool>, output_bit: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "branch", rename_all = "lowercase")]
pub enum Branch {
    Computation(Computation),
    Test(RoundRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transcript {
    pub y: u64,
    pub branch: Branch,
    pub accept: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MonteCarloStats {
    pub rounds: u64,
    pub accepts: u64,
    pub rate: Option<f64>,
    pub std_error: f64,
    pub computation_rounds: u64,
    pub computation_accepts: u64,
    pub test_rounds: u64,
    pub test_accepts: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChallengeRecord {
    pub y: u64,
    pub p_computation: f64,
    pub p_test: f64,
    pub in_y1: bool,
    pub acceptance: f64,
    pub optimal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceBreakdown {
    pub records: Vec<ChallengeRecord>,
    pub p_acc: f64,
    pub threshold: f64,
    pub y1: usize,
    pub y2: usize,
}

/// `{ "system": ..., "circuit": ..., "x_size": 1, "a": .., "b": .., "epsilon"?: ..,
///    "patterns"?: [...], "honest_witnesses"?: [[[re, im], ...], ...] }`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolInstanceFile {
    pub system: ConnectedSystemFile,
    pub circuit: CircuitSpec,
    #[serde(default = "default_x_size")]
    pub x_size: u64,
    pub a: f64,
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patterns: Option<Vec<MeasurementPattern>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub honest_witnesses: Option<Vec<Vec<[f64; 2]>>>,
}

fn default_x_size() -> u64 {
    1
}

/// A single-measurement protocol instance at desk scale.
#[derive(Debug, Clone)]
pub struct QamSingle {
    params: ProtocolParams,
    system: ConnectedSystem,
    circuit: VerifierCircuit,
    patterns: Vec<MeasurementPattern>,
    honest_witnesses: Option<Vec<QuantumState>>,
    test_group: StabilizerGroup,
    lambda: LambdaProjector,
}

impl QamSingle {
    pub fn new(params: ProtocolParams, system: ConnectedSystem, circuit: VerifierCircuit) -> Result<Self> {
        if circuit.witness_qubits() != system.witness_size() {
            return Err(Error::DimensionMismatch { expected: system.witness_size(), found: circuit.witness_qubits() });
        }
        let test_group = extended_test_stabilizers(&system)?;
        let lambda = LambdaProjector::new(&test_group)?;
        let params = params.with_dims(circuit.challenge_bits(), circuit.witness_qubits(), circuit.ancilla_qubits());
        Ok(Self { params, system, circuit, patterns: Vec::new(), honest_witnesses: None, test_group, lambda })
    }

    pub fn from_file(file: ProtocolInstanceFile) -> Result<Self> {
        let params = match file.epsilon {
            Some(eps) => {
                let mut p = ProtocolParams::with_epsilon(eps, file.a, file.b)?;
                p.x_size = Some(file.x_size);
                p
            }
            None => ProtocolParams::new(file.x_size, file.a, file.b)?,
        };
        let mut inst = Self::new(params, file.system.into_system()?, VerifierCircuit::new(file.circuit)?)?;
        if let Some(p) = file.patterns {
            inst = inst.with_patterns(p)?;
        }
        if let Some(ws) = file.honest_witnesses {
            let states = ws
                .into_iter()
                .map(|amps| QuantumState::pure(amps.into_iter().map(|[re, im]| C64::new(re, im)).collect()))
                .collect::<Result<Vec<_>>>()?;
            inst = inst.with_honest_witnesses(states)?;
        }
        Ok(inst)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    /// One pattern per challenge, acting on Merlin's qubits followed by `v`
    /// ancillas in `|+>`; the single output qubit is measured in `Z`.
    pub fn with_patterns(mut self, patterns: Vec<MeasurementPattern>) -> Result<Self> {
        if patterns.len() as u64 != self.circuit.num_challenges() {
            return Err(Error::InvalidPattern(format!(
                "{} patterns for {} challenges",
                patterns.len(),
                self.circuit.num_challenges()
            )));
        }
        let width = self.system.total_qubits() + self.circuit.ancilla_qubits();
        for p in &patterns {
            p.validate()?;
            if p.outputs.len() != 1 {
                return Err(Error::InvalidPattern("protocol patterns need exactly one output".into()));
            }
            if let Some(&q) = p.steps.iter().map(|s| &s.qubit).chain(&p.outputs).find(|&&q| q >= width) {
                return Err(Error::QubitOutOfRange { index: q, qubits: width });
            }
        }
        self.patterns = patterns;
        Ok(self)
    }

    pub fn with_honest_witnesses(mut self, witnesses: Vec<QuantumState>) -> Result<Self> {
        if witnesses.len() as u64 != self.circuit.num_challenges() {
            return Err(Error::DimensionMismatch {
                expected: self.circuit.num_challenges() as usize,
                found: witnesses.len(),
            });
        }
        if let Some(w) = witnesses.iter().find(|w| w.num_qubits() != self.system.witness_size()) {
            return Err(Error::DimensionMismatch { expected: self.system.witness_size(), found: w.num_qubits() });
        }
        self.honest_witnesses = Some(witnesses);
        Ok(self)
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn system(&self) -> &ConnectedSystem {
        &self.system
    }

    pub fn circuit(&self) -> &VerifierCircuit {
        &self.circuit
    }

    pub fn test_group(&self) -> &StabilizerGroup {
        &self.test_group
    }

    pub fn lambda(&self) -> &LambdaProjector {
        &self.lambda
    }

    pub fn has_patterns(&self) -> bool {
        !self.patterns.is_empty()
    }

    /// Same instance with a different computation-branch probability.
    pub fn with_q(&self, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidParams(format!("q = {q} outside [0, 1]")));
        }
        let mut out = self.clone();
        out.params.q = q;
        out.params.alpha = q * out.params.a + 1.0 - q;
        out.params.beta = q * out.params.b + q * out.params.delta + 1.0 - q;
        out.params.gap = out.params.alpha - out.params.beta;
        Ok(out)
    }

    fn require_enumerable(&self) -> Result<()> {
        if self.circuit.challenge_bits() > MAX_ENUMERATED_CHALLENGE_BITS {
            return Err(Error::InvalidParams(format!(
                "s = {} is too large for exact enumeration",
                self.circuit.challenge_bits()
            )));
        }
        Ok(())
    }

    pub fn honest_witness(&self, y: u64) -> Result<QuantumState> {
        match &self.honest_witnesses {
            Some(ws) => ws.get(y as usize).cloned().ok_or(Error::InvalidParams(format!("no witness for {y}"))),
            None => Ok(self.circuit.best_witness(y)?.1),
        }
    }

    /// `(⊗ CZ_e)(|ψ_y> ⊗ |G>)`
    pub fn honest_state(&self, y: u64) -> Result<QuantumState> {
        connect_witness(&self.honest_witness(y)?, &self.system)
    }

    /// Direct-mode acceptance operator of the computation branch on Merlin's
    /// `N + m` qubits: `C (I_{V1} ⊗ E_y) C` with `C` the connecting CZ layer.
    pub fn computation_operator(&self, y: u64) -> Result<CMatrix> {
        let ew = self.circuit.witness_operator(y)?;
        let n = self.system.graph_size();
        let full = CMatrix::identity(1 << n).kron(&ew);
        let total = self.system.total_qubits();
        let masks: Vec<usize> =
            self.system.connect_edges().map(|(a, b)| (1 << (total - 1 - a)) | (1 << (total - 1 - b))).collect();
        let sign = |k: usize| masks.iter().filter(|&&m| k & m == m).count() % 2;
        Ok(CMatrix::from_fn(full.dim(), |r, c| {
            if sign(r) == sign(c) {
                full[(r, c)]
            } else {
                -full[(r, c)]
            }
        }))
    }

    /// `S̄ = 2^{-N} sum_k s_k` by enumeration over subsets.
    pub fn subset_average(&self) -> Result<CMatrix> {
        let g = &self.test_group;
        let d = 1usize << g.num_qubits();
        let count = 1u64 << g.len();
        let mut acc = CMatrix::zeros(d);
        for bits in 0..count {
            acc = &acc + &g.subset_product(&SubsetSelector::from_index(bits, g.len()))?.dense_matrix()?;
        }
        Ok(acc.scale_real(1.0 / count as f64))
    }

    /// `E_test = (I + Λ) / 2`
    pub fn test_operator(&self) -> CMatrix {
        let lam = self.lambda.matrix();
        (&CMatrix::identity(lam.dim()) + lam).scale_real(0.5)
    }

    /// `E_y = q E_acc,y + (1 - q) E_test`
    pub fn acceptance_operator(&self, y: u64) -> Result<ObservableElement> {
        let q = self.params.q;
        let e = &self.computation_operator(y)?.scale_real(q) + &self.test_operator().scale_real(1.0 - q);
        Ok(ObservableElement::new_unchecked(e))
    }

    /// Best per-challenge acceptance over all Merlin states, with a maximizer.
    pub fn optimal_cheat(&self, y: u64) -> Result<(f64, QuantumState)> {
        let (vals, vecs) = self.acceptance_operator(y)?.matrix().eigh();
        let top = vecs.last().cloned().ok_or_else(|| Error::InvalidState("empty space".into()))?;
        Ok((*vals.last().unwrap(), QuantumState::pure_normalized(top)?))
    }

    pub fn merlin_state(&self, strategy: &MerlinStrategy, y: u64) -> Result<QuantumState> {
        let total = self.system.total_qubits();
        match strategy {
            MerlinStrategy::Honest => self.honest_state(y),
            MerlinStrategy::Depolarizing(mu) => {
                self.honest_state(y)?.mix(&QuantumState::maximally_mixed(total)?, *mu)
            }
            MerlinStrategy::Fixed(s) => {
                if s.num_qubits() != total {
                    return Err(Error::DimensionMismatch { expected: total, found: s.num_qubits() });
                }
                Ok(s.clone())
            }
            MerlinStrategy::Optimal => Ok(self.optimal_cheat(y)?.1),
        }
    }

    /// The witness-register state Arthur's circuit sees in direct mode.
    fn direct_prepared(&self, rho: &QuantumState, y: u64) -> Result<QuantumState> {
        let undone = self.system.apply_connect_layer(rho)?;
        let witness = partial_trace(&undone, &self.system.witness_qubits())?;
        self.circuit.prepare(y, &witness)
    }

    /// Exact direct-mode computation-branch acceptance, by simulation.
    pub fn computation_acceptance(&self, rho: &QuantumState, y: u64) -> Result<f64> {
        let prepared = self.direct_prepared(rho, y)?;
        Ok(1.0 - pauli_plus_probability(&prepared, &self.circuit.output_z())?)
    }

    fn mbqc_input(&self, rho: &QuantumState) -> Result<QuantumState> {
        match self.circuit.ancilla_qubits() {
            0 => Ok(rho.clone()),
            v => rho.tensor(&plus_state(v)?),
        }
    }

    fn run_mbqc<R: Rng + ?Sized>(&self, input: &QuantumState, y: u64, rng: &mut R) -> Result<Computation> {
        let pat = self.patterns.get(y as usize).ok_or(Error::MissingPattern(y))?;
        let result = execute_pattern(input, pat, rng)?;
        let z = PauliString::single(result.output.num_qubits(), 0, crate::pauli::Letter::Z);
        let output_bit = sample_pauli(&result.output, &z, rng)? == Outcome::Minus;
        Ok(Computation::Mbqc { outcomes: result.outcomes, output_bit })
    }

    /// One full interaction with Merlin's answers precomputed per challenge.
    pub fn run_protocol_round<R: Rng + ?Sized>(
        &self,
        answers: &[QuantumState],
        mode: Mode,
        rng: &mut R,
    ) -> Result<Transcript> {
        let y = rng.random::<u64>() & (self.circuit.num_challenges() - 1);
        let rho = answers.get(y as usize).ok_or(Error::InvalidParams(format!("no answer for {y}")))?;
        if rng.random::<f64>() < self.params.q {
            let comp = match mode {
                Mode::Direct => {
                    let prepared = self.direct_prepared(rho, y)?;
                    Computation::Direct { output_bit: self.circuit.sample_output(&prepared, rng)? }
                }
                Mode::Mbqc => self.run_mbqc(&self.mbqc_input(rho)?, y, rng)?,
            };
            let accept = match &comp {
                Computation::Direct { output_bit } | Computation::Mbqc { output_bit, .. } => *output_bit,
            };
            Ok(Transcript { y, branch: Branch::Computation(comp), accept })
        } else {
            let record = run_test_round(rho, &self.test_group, rng)?;
            let accept = record.passed;
            Ok(Transcript { y, branch: Branch::Test(record), accept })
        }
    }

    /// Merlin's answer for every challenge.
    pub fn answers(&self, strategy: &MerlinStrategy) -> Result<Vec<QuantumState>> {
        self.require_enumerable()?;
        (0..self.circuit.num_challenges()).map(|y| self.merlin_state(strategy, y)).collect()
    }

    /// Monte Carlo acceptance over `rounds` independent interactions.
    pub fn simulate(
        &self,
        strategy: &MerlinStrategy,
        mode: Mode,
        rounds: u64,
        seed: u64,
        exec: Execution,
    ) -> Result<MonteCarloStats> {
        if mode == Mode::Mbqc && self.patterns.is_empty() {
            return Err(Error::MissingPattern(0));
        }
        let answers = self.answers(strategy)?;
        // Direct mode only needs the prepared witness state per challenge.
        let prepared: Vec<QuantumState> = match mode {
            Mode::Direct => {
                answers.iter().enumerate().map(|(y, r)| self.direct_prepared(r, y as u64)).collect::<Result<_>>()?
            }
            Mode::Mbqc => answers.iter().map(|r| self.mbqc_input(r)).collect::<Result<_>>()?,
        };
        let batches = run_batches(rounds, seed, exec, |rng, len| -> Result<[Tally; 2]> {
            let mut comp = Tally::default();
            let mut test = Tally::default();
            for _ in 0..len {
                let y = rng.random::<u64>() & (self.circuit.num_challenges() - 1);
                if rng.random::<f64>() < self.params.q {
                    let accept = match mode {
                        Mode::Direct => self.circuit.sample_output(&prepared[y as usize], rng)?,
                        Mode::Mbqc => match self.run_mbqc(&prepared[y as usize], y, rng)? {
                            Computation::Mbqc { output_bit, .. } | Computation::Direct { output_bit } => output_bit,
                        },
                    };
                    comp.trials += 1;
                    comp.successes += accept as u64;
                } else {
                    test.trials += 1;
                    test.successes += run_test_round(&answers[y as usize], &self.test_group, rng)?.passed as u64;
                }
            }
            Ok([comp, test])
        });
        let mut comp = Tally::default();
        let mut test = Tally::default();
        for b in batches {
            let [c, t] = b?;
            comp = comp.merge(c);
            test = test.merge(t);
        }
        let all = comp.merge(test);
        Ok(MonteCarloStats {
            rounds,
            accepts: all.successes,
            rate: all.rate(),
            std_error: all.std_error(),
            computation_rounds: comp.trials,
            computation_accepts: comp.successes,
            test_rounds: test.trials,
            test_accepts: test.successes,
        })
    }

    /// Exact per-challenge acceptance, `Y1/Y2` split at `1 - ε`, and the
    /// aggregate `p_acc`.
    pub fn soundness_breakdown(&self, strategy: &MerlinStrategy) -> Result<AcceptanceBreakdown> {
        let answers = self.answers(strategy)?;
        let q = self.params.q;
        let threshold = 1.0 - self.params.epsilon;
        let records = answers
            .iter()
            .enumerate()
            .map(|(y, rho)| {
                let y = y as u64;
                let p_computation = self.computation_acceptance(rho, y)?;
                let p_test = exact_pass_probability(rho, &self.test_group)?;
                Ok(ChallengeRecord {
                    y,
                    p_computation,
                    p_test,
                    in_y1: p_test >= threshold,
                    acceptance: q * p_computation + (1.0 - q) * p_test,
                    optimal: self.optimal_cheat(y)?.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let p_acc = records.iter().map(|r| r.acceptance).sum::<f64>() / records.len() as f64;
        let y1 = records.iter().filter(|r| r.in_y1).count();
        Ok(AcceptanceBreakdown { y2: records.len() - y1, records, p_acc, threshold, y1 })
    }

    /// `p_acc` computed from the acceptance operators directly.
    pub fn operator_acceptance(&self, strategy: &MerlinStrategy) -> Result<f64> {
        let answers = self.answers(strategy)?;
        let mut total = 0.0;
        for (y, rho) in answers.iter().enumerate() {
            total += operator_expectation(rho, self.acceptance_operator(y as u64)?.matrix());
        }
        Ok(total / answers.len() as f64)
    }

    /// Challenge average of the spectral optimum.
    pub fn optimal_acceptance(&self) -> Result<f64> {
        self.require_enumerable()?;
        let count = self.circuit.num_challenges();
        let total = (0..count).map(|y| self.optimal_cheat(y).map(|o| o.0)).sum::<Result<f64>>()?;
        Ok(total / count as f64)
    }

    /// Exact circuit acceptance of the honest witnesses.
    pub fn honest_circuit_acceptance(&self) -> Result<AcceptanceEstimate> {
        qam_acceptance(&self.circuit, |y| self.honest_witness(y), sub_seed(0, 1))
    }
}

/// Edge graph with a one-qubit witness attached to vertex 0 (a three-qubit
/// linear cluster `2 - 0 - 1`), one challenge bit, and
/// `A_y = J(θ2_y) J(θ1_y)` on the witness. The MBQC patterns teleport the
/// witness along the cluster to qubit 1.
pub fn toy_instance(angles: [[f64; 2]; 2], honest: Option<[QuantumState; 2]>) -> Result<QamSingle> {
    use crate::graphstate::Graph;
    use crate::mbqc::{BasisSpec, Correction, Step};

    let system = ConnectedSystem::new(Graph::path(2), 1, &[(0, 0)])?;
    let mut gates = Vec::new();
    for (y, [t1, t2]) in angles.iter().enumerate() {
        gates.push(GateSpec::new("j", &[0]).with_angle(*t1).when(0, y as u8));
        gates.push(GateSpec::new("j", &[0]).with_angle(*t2).when(0, y as u8));
    }
    let circuit = VerifierCircuit::new(CircuitSpec { s: 1, m: 1, v: 0, output: 0, gates })?;
    let patterns = angles
        .iter()
        .map(|&[t1, t2]| MeasurementPattern {
            steps: vec![
                Step { qubit: 2, basis: BasisSpec::xy(t1), deps: vec![] },
                Step { qubit: 0, basis: BasisSpec::xy(t2), deps: vec![0] },
            ],
            outputs: vec![1],
            byproduct: [(1, Correction { x: vec![1], z: vec![0] })].into_iter().collect(),
        })
        .collect();
    let inst = QamSingle::new(ProtocolParams::new(1, 2.0 / 3.0, 1.0 / 3.0)?, system, circuit)?.with_patterns(patterns)?;
    match honest {
        Some(ws) => inst.with_honest_witnesses(ws.to_vec()),
        None => Ok(inst),
    }
}
