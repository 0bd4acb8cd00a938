//! `h_Stab(g)(M)`: the best acceptance of a POVM element over states
//! stabilized by `g`, and the two-branch protocol that verifies it.
//!
//! States stabilized by `g` are exactly the density matrices supported on the
//! codespace, so `h_Stab(g)(M) = λ_max(Λ M Λ)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::densesim::{
    gaussian_vector, matrix_from_json, operator_expectation, random_povm_element, MatrixJson, ObservableElement,
    QuantumState,
};
use crate::error::{Error, Result};
use crate::graphstate::{connect_witness, graph_stabilizers, Graph};
use crate::linalg::{self, CMatrix, C64};
use crate::par::{run_batches, Execution, Tally};
use crate::pauli::{parse_stabilizer_json, StabilizerFile, StabilizerGroup};
use crate::protocol::{check_promise, QamSingle};
use crate::stabtest::{exact_pass_probability, run_test_round, LambdaProjector};

#[derive(Debug, Clone)]
pub struct HstabInstance {
    group: StabilizerGroup,
    lambda: LambdaProjector,
    observable: ObservableElement,
    a: f64,
    b: f64,
}

impl HstabInstance {
    pub fn new(group: StabilizerGroup, observable: ObservableElement, a: f64, b: f64) -> Result<Self> {
        check_promise(a, b)?;
        if observable.num_qubits() != group.num_qubits() {
            return Err(Error::DimensionMismatch { expected: group.num_qubits(), found: observable.num_qubits() });
        }
        let lambda = LambdaProjector::new(&group)?;
        Ok(Self { group, lambda, observable, a, b })
    }

    /// Also enforces `a - b >= gap_floor`.
    pub fn with_gap_floor(
        group: StabilizerGroup,
        observable: ObservableElement,
        a: f64,
        b: f64,
        gap_floor: f64,
    ) -> Result<Self> {
        if a - b < gap_floor {
            return Err(Error::InvalidParams(format!("promise gap {} below floor {gap_floor}", a - b)));
        }
        Self::new(group, observable, a, b)
    }

    pub fn group(&self) -> &StabilizerGroup {
        &self.group
    }

    pub fn lambda(&self) -> &LambdaProjector {
        &self.lambda
    }

    pub fn observable(&self) -> &ObservableElement {
        &self.observable
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn num_qubits(&self) -> usize {
        self.group.num_qubits()
    }

    fn compressed(&self) -> CMatrix {
        let lam = self.lambda.matrix();
        lam.matmul(self.observable.matrix()).matmul(lam)
    }

    /// A codespace state attaining `h_stab`.
    pub fn maximizer(&self) -> Result<QuantumState> {
        let (_, vecs) = self.compressed().eigh();
        // Restrict the eigen-search to the codespace: when Λ M Λ has value 0
        // the top eigenvector may lie outside it, so project and fall back.
        for v in vecs.iter().rev() {
            let mut p = self.lambda.matrix().mul_vec(v);
            if linalg::normalize(&mut p) > 0.5 {
                return QuantumState::pure_normalized(p);
            }
        }
        Err(Error::InvalidState("codespace is empty".into()))
    }

    pub fn decision(&self) -> Decision {
        let h = h_stab(self);
        if h >= self.a {
            Decision::Yes
        } else if h <= self.b {
            Decision::No
        } else {
            Decision::PromiseViolated
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Yes,
    No,
    PromiseViolated,
}

/// `λ_max(Λ M Λ)`
pub fn h_stab(inst: &HstabInstance) -> f64 {
    inst.compressed().max_eigenvalue()
}

/// Haar-random pure state on the codespace.
pub fn random_codespace_state<R: Rng + ?Sized>(lambda: &LambdaProjector, rng: &mut R) -> Result<QuantumState> {
    let d = lambda.matrix().dim();
    for _ in 0..64 {
        let mut v = lambda.matrix().mul_vec(&gaussian_vector(d, rng));
        if linalg::normalize(&mut v) > 1e-6 {
            return QuantumState::pure(v);
        }
    }
    Err(Error::InvalidState("failed to sample a codespace state".into()))
}

/// Best `Tr(Mσ)` over `samples` random codespace states; never above `h_stab`.
///
/// The first half are Haar draws. The rest perturb the best state found so
/// far by a random codespace direction and keep the result if it improves,
/// with the step size adapted to the acceptance rate.
pub fn h_stab_sampling_oracle<R: Rng + ?Sized>(inst: &HstabInstance, samples: usize, rng: &mut R) -> Result<f64> {
    let samples = samples.max(1);
    let m = inst.observable.matrix();
    let value = |v: &[C64]| m.sandwich(v, v).re;
    let first = random_codespace_state(&inst.lambda, rng)?;
    let mut best_vec = first.amplitudes().expect("pure").to_vec();
    let mut best = value(&best_vec);
    let haar = samples.div_ceil(2);
    for _ in 1..haar {
        let s = random_codespace_state(&inst.lambda, rng)?;
        let v = s.amplitudes().expect("pure");
        let t = value(v);
        if t > best {
            best = t;
            best_vec = v.to_vec();
        }
    }
    let d = best_vec.len();
    let mut step = 0.3;
    for _ in haar..samples {
        let noise = gaussian_vector(d, rng);
        let trial: Vec<C64> = best_vec.iter().zip(&noise).map(|(b, n)| b + n * step).collect();
        let mut v = inst.lambda.matrix().mul_vec(&trial);
        if linalg::normalize(&mut v) < 1e-9 {
            continue;
        }
        let t = value(&v);
        if t > best {
            best = t;
            best_vec = v;
            step = (step * 1.5).min(1.0);
        } else {
            step = (step * 0.97).max(1e-6);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QmaParams {
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl QmaParams {
    /// `ε = (a-b)^2/32`, `δ = 2 sqrt(2ε)`, `q* = ε/(1+ε-b-δ)`.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        check_promise(a, b)?;
        let epsilon = (a - b).powi(2) / 32.0;
        let delta = 2.0 * (2.0 * epsilon).sqrt();
        let denom = 1.0 + epsilon - b - delta;
        if denom <= 0.0 {
            return Err(Error::InvalidParams(format!("1 + ε - b - δ = {denom} is not positive")));
        }
        let q = epsilon / denom;
        let mut p = Self { a, b, epsilon, delta, q, alpha: 0.0, beta1: 0.0, beta2: 0.0, delta1: 0.0, delta2: 0.0 };
        p.set_q(q);
        let bound = p.delta2_bound();
        if p.delta2 < bound - 1e-12 {
            return Err(Error::InvalidParams(format!("Δ2 = {} below (a-b)^3/128 = {bound}", p.delta2)));
        }
        Ok(p)
    }

    /// Recomputes the branch values for another `q`.
    pub fn set_q(&mut self, q: f64) {
        self.q = q;
        self.alpha = q * self.a + (1.0 - q);
        self.beta1 = q + (1.0 - q) * (1.0 - self.epsilon);
        self.beta2 = q * (self.b + self.delta) + (1.0 - q);
        self.delta1 = self.alpha - self.beta1;
        self.delta2 = self.alpha - self.beta2;
    }

    /// `ε (a - b - δ) / (1 + ε - b - δ)`
    pub fn delta2_closed_form(&self) -> f64 {
        self.epsilon * (self.a - self.b - self.delta) / (1.0 + self.epsilon - self.b - self.delta)
    }

    /// `(a - b)^3 / (32 * 4)`
    pub fn delta2_bound(&self) -> f64 {
        (self.a - self.b).powi(3) / 128.0
    }
}

pub fn qma_params(a: f64, b: f64) -> Result<QmaParams> {
    QmaParams::new(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QmaVerifyReport {
    pub rounds: u64,
    pub accepts: u64,
    pub rate: Option<f64>,
    pub std_error: f64,
    pub exact: f64,
    pub observable_value: f64,
    pub p_pass: f64,
}

/// With probability `q` measure `{M, I - M}` and accept on `M`; otherwise
/// run one stabilizer-test round.
pub fn qma_verify(
    inst: &HstabInstance,
    prover_state: &QuantumState,
    params: &QmaParams,
    rounds: u64,
    seed: u64,
    exec: Execution,
) -> Result<QmaVerifyReport> {
    if prover_state.num_qubits() != inst.num_qubits() {
        return Err(Error::DimensionMismatch { expected: inst.num_qubits(), found: prover_state.num_qubits() });
    }
    let observable_value = operator_expectation(prover_state, inst.observable.matrix()).clamp(0.0, 1.0);
    let p_pass = exact_pass_probability(prover_state, &inst.group)?;
    let exact = params.q * observable_value + (1.0 - params.q) * p_pass;
    let batches = run_batches(rounds, seed, exec, |rng, len| -> Result<Tally> {
        let mut t = Tally::default();
        for _ in 0..len {
            let accept = if rng.random::<f64>() < params.q {
                rng.random::<f64>() < observable_value
            } else {
                run_test_round(prover_state, &inst.group, rng)?.passed
            };
            t.trials += 1;
            t.successes += accept as u64;
        }
        Ok(t)
    });
    let tally: Tally = batches.into_iter().collect::<Result<Vec<_>>>()?.into_iter().sum();
    Ok(QmaVerifyReport {
        rounds,
        accepts: tally.successes,
        rate: tally.rate(),
        std_error: tally.std_error_at(exact),
        exact,
        observable_value,
        p_pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SoundnessReport {
    pub h_stab: f64,
    pub optimal_value: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Exact optimal prover value `λ_max(q* M + (1 - q*)(I + Λ)/2)` on a
/// no-instance, against `max(β1, β2)`.
pub fn qma_soundness_check(inst: &HstabInstance, params: &QmaParams) -> Result<SoundnessReport> {
    let h = h_stab(inst);
    if h > inst.b + 1e-12 {
        return Err(Error::NotNoInstance { h, b: inst.b });
    }
    let lam = inst.lambda.matrix();
    let test = (&CMatrix::identity(lam.dim()) + lam).scale_real(0.5);
    let op = &inst.observable.matrix().scale_real(params.q) + &test.scale_real(1.0 - params.q);
    let optimal_value = op.max_eigenvalue();
    let bound = params.beta1.max(params.beta2);
    Ok(SoundnessReport {
        h_stab: h,
        optimal_value,
        beta1: params.beta1,
        beta2: params.beta2,
        bound,
        holds: optimal_value <= bound + 1e-9,
    })
}

/// Random stabilizer group on `n` qubits: a random graph's generators,
/// a random nonempty subset of them, random signs.
pub fn random_group<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<StabilizerGroup> {
    let g = graph_stabilizers(&Graph::random(n, 0.5, rng))?;
    let mut gens: Vec<_> = g.generators().iter().filter(|_| rng.random::<f64>() < 0.7).cloned().collect();
    if gens.is_empty() {
        gens.push(g.generators()[rng.random_range(0..n)].clone());
    }
    let gens = gens.into_iter().map(|p| if rng.random::<bool>() { p.negate() } else { p }).collect();
    StabilizerGroup::new(gens)
}

/// Random no-instance: random group and POVM element, `M` rescaled so that
/// `h_stab <= b`.
pub fn random_no_instance<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<HstabInstance> {
    let group = random_group(n, rng)?;
    let b = rng.random_range(0.05..0.6);
    let a = rng.random_range((b + 0.1)..=1.0f64.min(b + 0.6));
    let m = random_povm_element(n, rng)?;
    let probe = HstabInstance::new(group.clone(), m.clone(), a, b)?;
    let h = h_stab(&probe);
    let m = if h > b { m.scaled(b / h * rng.random_range(0.5..=1.0))? } else { m };
    HstabInstance::new(group, m, a, b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionReport {
    pub codespace_rank: usize,
    pub witness_dimension: usize,
    pub h_stab: f64,
    pub exact_best_acceptance: f64,
    pub max_connect_fidelity_deficit: f64,
    pub max_codespace_leakage: f64,
}

/// Builds `g` = extended graph stabilizers and `M` = the computation-branch
/// acceptance operator for challenge `y`, and compares `h_stab` with the
/// circuit's best witness acceptance. Also checks that every codespace
/// state is a connected witness state and vice versa on random samples.
pub fn reduction_witness_demo<R: Rng + ?Sized>(
    inst: &QamSingle,
    y: u64,
    samples: usize,
    rng: &mut R,
) -> Result<ReductionReport> {
    let m = ObservableElement::new_unchecked(inst.computation_operator(y)?);
    let (best, _) = inst.circuit().best_witness(y)?;
    let h_inst = HstabInstance {
        group: inst.test_group().clone(),
        lambda: inst.lambda().clone(),
        observable: m,
        a: 1.0,
        b: 0.0,
    };
    let h = h_stab(&h_inst);
    let sys = inst.system();
    let witness_qubits = sys.witness_qubits();
    let mut worst_fid = 0.0f64;
    let mut worst_leak = 0.0f64;
    for _ in 0..samples {
        // codespace → witness → connected state
        let phi = random_codespace_state(inst.lambda(), rng)?;
        let undone = sys.apply_connect_layer(&phi)?;
        let reduced = crate::densesim::partial_trace(&undone, &witness_qubits)?;
        let (_, vecs) = reduced.density().eigh();
        let xi = QuantumState::pure_normalized(vecs.last().cloned().unwrap_or_default())?;
        let rebuilt = connect_witness(&xi, sys)?;
        let fid = rebuilt.fidelity_with_pure(phi.amplitudes().expect("pure"))?;
        worst_fid = worst_fid.max(1.0 - fid);
        // witness → connected state → codespace
        let w = crate::densesim::random_pure_state(sys.witness_size(), rng)?;
        let c = connect_witness(&w, sys)?;
        worst_leak = worst_leak.max(1.0 - inst.lambda().overlap(&c)?);
    }
    Ok(ReductionReport {
        codespace_rank: inst.lambda().rank(),
        witness_dimension: 1 << sys.witness_size(),
        h_stab: h,
        exact_best_acceptance: best,
        max_connect_fidelity_deficit: worst_fid,
        max_codespace_leakage: worst_leak,
    })
}

/// Named observables accepted in instance files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableSpec {
    Named(String),
    Matrix(MatrixJson),
}

impl ObservableSpec {
    /// `identity`, `zero`, `projector:<bits>`, `codespace`, or a matrix.
    pub fn resolve(&self, group: &StabilizerGroup) -> Result<ObservableElement> {
        let n = group.num_qubits();
        match self {
            ObservableSpec::Matrix(rows) => ObservableElement::new(matrix_from_json(rows.clone())?),
            ObservableSpec::Named(name) => match name.as_str() {
                "identity" => ObservableElement::identity(n),
                "zero" => ObservableElement::zero(n),
                "codespace" => Ok(LambdaProjector::new(group)?.as_observable()),
                other => {
                    let bits = other
                        .strip_prefix("projector:")
                        .ok_or_else(|| Error::Parse(format!("unknown observable {other:?}")))?;
                    if bits.len() != n || !bits.chars().all(|c| c == '0' || c == '1') {
                        return Err(Error::Parse(format!("projector label {bits:?} needs {n} binary digits")));
                    }
                    let idx = usize::from_str_radix(bits, 2).map_err(|e| Error::Parse(e.to_string()))?;
                    let mut v = vec![C64::new(0.0, 0.0); 1 << n];
                    v[idx] = C64::new(1.0, 0.0);
                    ObservableElement::projector(&v)
                }
            },
        }
    }
}

/// `{ "stabilizer": {...}, "M": <matrix or name>, "a": real, "b": real }`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HstabInstanceFile {
    pub stabilizer: StabilizerFile,
    #[serde(rename = "M")]
    pub observable: ObservableSpec,
    pub a: f64,
    pub b: f64,
}

impl HstabInstanceFile {
    pub fn into_instance(self) -> Result<HstabInstance> {
        let group = self.stabilizer.into_group()?;
        let m = self.observable.resolve(&group)?;
        HstabInstance::new(group, m, self.a, self.b)
    }
}

pub fn parse_hstab_json(text: &str) -> Result<HstabInstance> {
    serde_json::from_str::<HstabInstanceFile>(text)?.into_instance()
}

/// Convenience used by tests and the CLI.
pub fn instance_from_strings(gens: &str, m: ObservableElement, a: f64, b: f64) -> Result<HstabInstance> {
    HstabInstance::new(parse_stabilizer_json(gens)?, m, a, b)
}

/// Samples one measurement of `M` as a two-outcome POVM (used for transcripts).
pub fn sample_observable<R: Rng + ?Sized>(state: &QuantumState, m: &ObservableElement, rng: &mut R) -> Result<bool> {
    let p = crate::densesim::expectation(state, m)?;
    Ok(rng.random::<f64>() < p)
}
