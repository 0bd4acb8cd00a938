//! The stabilizer test and the bounds it certifies.
//!
//! A round draws `k` uniformly from `{0,1}^n`, measures `s_k` and passes on
//! `+1`. Averaged over `k`, the subset products sum to `2^n Λ`, which gives
//! `p_pass = (1 + Tr(Λρ)) / 2` with `Λ = prod_j (I + g_j)/2`.

use rand::Rng;
use serde::Serialize;

use crate::densesim::{
    check_mixed_cap, operator_expectation, pauli_plus_probability, sample_pauli, trace_norm_distance, Outcome,
    ObservableElement, QuantumState, VALIDITY_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::par::{run_batches, Execution, Tally};
use crate::pauli::{StabilizerGroup, SubsetSelector};

/// Threshold below which `Tr(Λρ)` is treated as zero.
pub const ZERO_OVERLAP: f64 = 1e-12;

/// Generator counts up to this size use subset enumeration for `p_pass`.
pub const ENUMERATION_LIMIT: usize = 20;

/// Codespace projector `Λ = prod_j (I + g_j)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaProjector {
    group: StabilizerGroup,
    matrix: CMatrix,
}

impl LambdaProjector {
    pub fn new(group: &StabilizerGroup) -> Result<Self> {
        let n = group.num_qubits();
        check_mixed_cap(n)?;
        let d = 1 << n;
        let id = CMatrix::identity(d);
        let mut lam = id.clone();
        for g in group.generators() {
            let factor = (&id + &g.dense_matrix()?).scale_real(0.5);
            lam = lam.matmul(&factor);
        }
        Ok(Self { group: group.clone(), matrix: lam })
    }

    pub fn group(&self) -> &StabilizerGroup {
        &self.group
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `2^{N - n}` for `n` independent generators on `N` qubits.
    pub fn rank(&self) -> usize {
        1 << (self.group.num_qubits() - self.group.len())
    }

    pub fn as_observable(&self) -> ObservableElement {
        ObservableElement::new_unchecked(self.matrix.clone())
    }

    pub fn overlap(&self, rho: &QuantumState) -> Result<f64> {
        check_dims(rho, &self.group)?;
        Ok(operator_expectation(rho, &self.matrix))
    }

    /// `Λ ρ Λ` (unnormalized).
    pub fn sandwich(&self, rho: &QuantumState) -> Result<CMatrix> {
        check_dims(rho, &self.group)?;
        check_mixed_cap(rho.num_qubits())?;
        Ok(self.matrix.matmul(&rho.density()).matmul(&self.matrix))
    }
}

pub fn lambda_projector(g: &StabilizerGroup) -> Result<LambdaProjector> {
    LambdaProjector::new(g)
}

fn check_dims(rho: &QuantumState, g: &StabilizerGroup) -> Result<()> {
    if rho.num_qubits() != g.num_qubits() {
        return Err(Error::DimensionMismatch { expected: g.num_qubits(), found: rho.num_qubits() });
    }
    Ok(())
}

/// Details of one sampled test round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub k: Vec<bool>,
    pub outcome: i8,
    pub passed: bool,
}

/// One round of the test: random `k`, measure `s_k`, pass on `+1`.
pub fn run_test_round<R: Rng + ?Sized>(rho: &QuantumState, g: &StabilizerGroup, rng: &mut R) -> Result<RoundRecord> {
    check_dims(rho, g)?;
    let k = SubsetSelector((0..g.len()).map(|_| rng.random::<bool>()).collect());
    let s_k = g.subset_product(&k)?;
    let outcome = sample_pauli(rho, &s_k, rng)?;
    Ok(RoundRecord { k: k.0, outcome: outcome.value(), passed: outcome == Outcome::Plus })
}

/// `p_pass` by enumerating all `2^n` subset products.
pub fn pass_probability_enumerated(rho: &QuantumState, g: &StabilizerGroup) -> Result<f64> {
    check_dims(rho, g)?;
    if g.len() > ENUMERATION_LIMIT {
        return Err(Error::InvalidParams(format!("{} generators are too many to enumerate", g.len())));
    }
    let count = 1u64 << g.len();
    let mut acc = 0.0;
    for bits in 0..count {
        let s_k = g.subset_product(&SubsetSelector::from_index(bits, g.len()))?;
        acc += pauli_plus_probability(rho, &s_k)?;
    }
    Ok(acc / count as f64)
}

/// `p_pass` through `(1 + Tr(Λρ)) / 2`.
pub fn pass_probability_via_projector(rho: &QuantumState, lambda: &LambdaProjector) -> Result<f64> {
    Ok(0.5 * (1.0 + lambda.overlap(rho)?))
}

/// Exact pass probability: enumeration for small generator counts, the
/// projector identity beyond [`ENUMERATION_LIMIT`].
pub fn exact_pass_probability(rho: &QuantumState, g: &StabilizerGroup) -> Result<f64> {
    if g.len() <= ENUMERATION_LIMIT {
        pass_probability_enumerated(rho, g)
    } else {
        pass_probability_via_projector(rho, &LambdaProjector::new(g)?)
    }
}

/// `σ = ΛρΛ / Tr(Λρ)`
pub fn nearest_stabilized_state(rho: &QuantumState, g: &StabilizerGroup) -> Result<QuantumState> {
    nearest_stabilized_state_with(rho, &LambdaProjector::new(g)?)
}

pub fn nearest_stabilized_state_with(rho: &QuantumState, lambda: &LambdaProjector) -> Result<QuantumState> {
    let overlap = lambda.overlap(rho)?;
    if overlap <= ZERO_OVERLAP {
        return Err(Error::ZeroOverlap(overlap));
    }
    let sandwiched = lambda.sandwich(rho)?;
    Ok(QuantumState::mixed_unchecked(sandwiched.scale_real(1.0 / overlap)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `||ρ - ΛρΛ||_1 <= 2 sqrt(1 - Tr(Λρ))`
pub fn gentle_measurement_check(rho: &QuantumState, g: &StabilizerGroup) -> Result<InequalityCheck> {
    gentle_measurement_check_with(rho, &LambdaProjector::new(g)?)
}

pub fn gentle_measurement_check_with(rho: &QuantumState, lambda: &LambdaProjector) -> Result<InequalityCheck> {
    let overlap = lambda.overlap(rho)?;
    let lhs = trace_norm_distance(&rho.density(), &lambda.sandwich(rho)?)?;
    let rhs = 2.0 * (1.0 - overlap).max(0.0).sqrt();
    Ok(InequalityCheck { lhs, rhs, holds: lhs <= rhs + VALIDITY_TOL })
}

/// `p_pass` from enumeration against `(1 + Tr(Λρ)) / 2`.
pub fn pass_probability_identity_check(rho: &QuantumState, g: &StabilizerGroup) -> Result<InequalityCheck> {
    let lhs = exact_pass_probability(rho, g)?;
    let rhs = pass_probability_via_projector(rho, &LambdaProjector::new(g)?)?;
    Ok(InequalityCheck { lhs, rhs, holds: (lhs - rhs).abs() <= VALIDITY_TOL })
}

/// `Tr(Mσ)(1-2ε) - 2sqrt(2ε) <= Tr(Mρ) <= Tr(Mσ) + 2sqrt(2ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsReport {
    pub epsilon: f64,
    pub p_pass: f64,
    pub sigma_value: f64,
    pub lower: f64,
    pub actual: f64,
    pub upper: f64,
    pub holds: bool,
}

pub fn closeness_bounds(
    rho: &QuantumState,
    g: &StabilizerGroup,
    m: &ObservableElement,
    epsilon: f64,
) -> Result<BoundsReport> {
    closeness_bounds_with(rho, &LambdaProjector::new(g)?, m, epsilon)
}

pub fn closeness_bounds_with(
    rho: &QuantumState,
    lambda: &LambdaProjector,
    m: &ObservableElement,
    epsilon: f64,
) -> Result<BoundsReport> {
    if m.num_qubits() != rho.num_qubits() {
        return Err(Error::DimensionMismatch { expected: rho.num_qubits(), found: m.num_qubits() });
    }
    let p_pass = pass_probability_via_projector(rho, lambda)?;
    if p_pass < 1.0 - epsilon - VALIDITY_TOL {
        return Err(Error::HypothesisViolated { p_pass, threshold: 1.0 - epsilon });
    }
    let sigma = nearest_stabilized_state_with(rho, lambda)?;
    let sigma_value = operator_expectation(&sigma, m.matrix());
    let actual = operator_expectation(rho, m.matrix());
    let slack = 2.0 * (2.0 * epsilon.max(0.0)).sqrt();
    let lower = sigma_value * (1.0 - 2.0 * epsilon) - slack;
    let upper = sigma_value + slack;
    let holds = lower <= actual + VALIDITY_TOL && actual <= upper + VALIDITY_TOL;
    Ok(BoundsReport { epsilon, p_pass, sigma_value, lower, actual, upper, holds })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestReport {
    pub rounds: u64,
    pub passes: u64,
    pub sampled_pass_rate: Option<f64>,
    pub std_error: f64,
    pub exact_pass_probability: Option<f64>,
    pub epsilon_budget: Option<f64>,
}

/// Runs `rounds` independent test rounds from `seed`.
pub fn run_test_rounds(
    rho: &QuantumState,
    g: &StabilizerGroup,
    rounds: u64,
    seed: u64,
    exec: Execution,
) -> Result<TestReport> {
    check_dims(rho, g)?;
    let tallies = run_batches(rounds, seed, exec, |rng, len| -> Result<Tally> {
        let mut t = Tally::default();
        for _ in 0..len {
            t.trials += 1;
            t.successes += run_test_round(rho, g, rng)?.passed as u64;
        }
        Ok(t)
    });
    let tally: Tally = tallies.into_iter().collect::<Result<Vec<_>>>()?.into_iter().sum();
    let exact = exact_pass_probability(rho, g).ok();
    Ok(TestReport {
        rounds,
        passes: tally.successes,
        sampled_pass_rate: tally.rate(),
        std_error: exact.map_or_else(|| tally.std_error(), |p| tally.std_error_at(p)),
        exact_pass_probability: exact,
        epsilon_budget: exact.map(|p| 1.0 - p),
    })
}
