//! Exact dense simulator for small registers.
//!
//! Basis-state labels put qubit 0 in the most significant bit. Pure states
//! are amplitude vectors, mixed states full Hermitian matrices.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, ONE, ZERO};
use crate::pauli::{Letter, PauliString};

pub const VALIDITY_TOL: f64 = 1e-9;
pub const ROUND_TRIP_TOL: f64 = 1e-12;

pub const DEFAULT_PURE_CAP: usize = 12;
pub const DEFAULT_MIXED_CAP: usize = 10;

static PURE_CAP: AtomicUsize = AtomicUsize::new(DEFAULT_PURE_CAP);
static MIXED_CAP: AtomicUsize = AtomicUsize::new(DEFAULT_MIXED_CAP);

/// Overrides the process-wide qubit caps for dense vectors and matrices.
pub fn set_dense_caps(pure: usize, mixed: usize) {
    PURE_CAP.store(pure.max(1), Ordering::Relaxed);
    MIXED_CAP.store(mixed.max(1), Ordering::Relaxed);
}

pub fn dense_caps() -> (usize, usize) {
    (PURE_CAP.load(Ordering::Relaxed), MIXED_CAP.load(Ordering::Relaxed))
}

pub(crate) fn check_pure_cap(n: usize) -> Result<()> {
    let cap = PURE_CAP.load(Ordering::Relaxed);
    if n > cap {
        return Err(Error::DenseCapExceeded { qubits: n, cap });
    }
    Ok(())
}

pub(crate) fn check_mixed_cap(n: usize) -> Result<()> {
    let cap = MIXED_CAP.load(Ordering::Relaxed);
    if n > cap {
        return Err(Error::DenseCapExceeded { qubits: n, cap });
    }
    Ok(())
}

pub(crate) fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::InvalidState(format!("dimension {dim} is not a power of two")));
    }
    Ok(dim.trailing_zeros() as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateRepr {
    Pure(Vec<C64>),
    Mixed(CMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n: usize,
    repr: StateRepr,
}

/// Outcome of a two-valued Pauli measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }
}

impl QuantumState {
    pub fn pure(amplitudes: Vec<C64>) -> Result<Self> {
        let n = qubits_for_dim(amplitudes.len())?;
        check_pure_cap(n)?;
        let nrm = linalg::norm(&amplitudes);
        if (nrm - 1.0).abs() > VALIDITY_TOL {
            return Err(Error::InvalidState(format!("norm {nrm} differs from 1")));
        }
        Ok(Self { n, repr: StateRepr::Pure(amplitudes) })
    }

    /// Normalizes the vector first.
    pub fn pure_normalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        if linalg::normalize(&mut amplitudes) == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Self::pure(amplitudes)
    }

    pub fn mixed(rho: CMatrix) -> Result<Self> {
        let n = qubits_for_dim(rho.dim())?;
        check_mixed_cap(n)?;
        let herm = rho.hermiticity_defect();
        if herm > VALIDITY_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > VALIDITY_TOL || tr.im.abs() > VALIDITY_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = rho.min_eigenvalue();
        if min < -VALIDITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min}")));
        }
        Ok(Self { n, repr: StateRepr::Mixed(rho) })
    }

    pub(crate) fn mixed_unchecked(rho: CMatrix) -> Self {
        let n = rho.dim().trailing_zeros() as usize;
        Self { n, repr: StateRepr::Mixed(rho) }
    }

    pub(crate) fn pure_unchecked(v: Vec<C64>) -> Self {
        let n = v.len().trailing_zeros() as usize;
        Self { n, repr: StateRepr::Pure(v) }
    }

    /// Computational basis state `|bits>`, qubit 0 first.
    pub fn basis(bits: &[bool]) -> Result<Self> {
        let n = bits.len();
        check_pure_cap(n)?;
        let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        let mut v = vec![ZERO; 1 << n];
        v[idx] = ONE;
        Ok(Self { n, repr: StateRepr::Pure(v) })
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::basis(&vec![false; n])
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_mixed_cap(n)?;
        let d = 1 << n;
        Ok(Self { n, repr: StateRepr::Mixed(CMatrix::identity(d).scale_real(1.0 / d as f64)) })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn repr(&self) -> &StateRepr {
        &self.repr
    }

    pub fn is_pure_repr(&self) -> bool {
        matches!(self.repr, StateRepr::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&[C64]> {
        match &self.repr {
            StateRepr::Pure(v) => Some(v),
            StateRepr::Mixed(_) => None,
        }
    }

    /// Density matrix of the state.
    pub fn density(&self) -> CMatrix {
        match &self.repr {
            StateRepr::Pure(v) => CMatrix::outer(v, v),
            StateRepr::Mixed(m) => m.clone(),
        }
    }

    pub fn to_mixed(&self) -> Result<Self> {
        check_mixed_cap(self.n)?;
        Ok(Self { n: self.n, repr: StateRepr::Mixed(self.density()) })
    }

    pub fn norm_or_trace(&self) -> f64 {
        match &self.repr {
            StateRepr::Pure(v) => linalg::norm(v),
            StateRepr::Mixed(m) => m.trace().re,
        }
    }

    pub fn purity(&self) -> f64 {
        match &self.repr {
            StateRepr::Pure(_) => 1.0,
            StateRepr::Mixed(m) => m.matmul(m).trace().re,
        }
    }

    /// `self ⊗ other`
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let n = self.n + other.n;
        match (&self.repr, &other.repr) {
            (StateRepr::Pure(a), StateRepr::Pure(b)) => {
                check_pure_cap(n)?;
                Ok(Self { n, repr: StateRepr::Pure(linalg::kron_vec(a, b)) })
            }
            _ => {
                check_mixed_cap(n)?;
                Ok(Self { n, repr: StateRepr::Mixed(self.density().kron(&other.density())) })
            }
        }
    }

    /// Convex mixture `(1 - w) self + w other`.
    pub fn mix(&self, other: &Self, w: f64) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        check_mixed_cap(self.n)?;
        let a = self.density().scale_real(1.0 - w);
        let b = other.density().scale_real(w);
        Ok(Self::mixed_unchecked(&a + &b))
    }

    /// Overlap `<psi| rho |psi>` with a pure state.
    pub fn fidelity_with_pure(&self, psi: &[C64]) -> Result<f64> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: psi.len() });
        }
        Ok(match &self.repr {
            StateRepr::Pure(v) => linalg::inner(psi, v).norm_sqr(),
            StateRepr::Mixed(m) => m.sandwich(psi, psi).re,
        })
    }
}

/// `|+>^{⊗n}`
pub fn plus_state(n: usize) -> Result<QuantumState> {
    if n == 0 {
        return Err(Error::InvalidState("plus_state needs at least one qubit".into()));
    }
    check_pure_cap(n)?;
    let d = 1usize << n;
    let amp = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    Ok(QuantumState { n, repr: StateRepr::Pure(vec![amp; d]) })
}

fn check_index(q: usize, n: usize) -> Result<()> {
    if q >= n {
        return Err(Error::QubitOutOfRange { index: q, qubits: n });
    }
    Ok(())
}

fn bit_of(q: usize, n: usize) -> usize {
    1 << (n - 1 - q)
}

/// Controlled-Z between qubits `i` and `j`.
pub fn apply_cz(s: &QuantumState, i: usize, j: usize) -> Result<QuantumState> {
    let n = s.n;
    check_index(i, n)?;
    check_index(j, n)?;
    if i == j {
        return Err(Error::RepeatedQubit(i));
    }
    let mask = bit_of(i, n) | bit_of(j, n);
    let sign = |k: usize| if k & mask == mask { -1.0 } else { 1.0 };
    let repr = match &s.repr {
        StateRepr::Pure(v) => StateRepr::Pure(v.iter().enumerate().map(|(k, &a)| a * sign(k)).collect()),
        StateRepr::Mixed(m) => StateRepr::Mixed(CMatrix::from_fn(m.dim(), |r, c| m[(r, c)] * (sign(r) * sign(c)))),
    };
    Ok(QuantumState { n, repr })
}

/// Applies a `2^k x 2^k` unitary to the ordered `targets`
/// (`targets[0]` is the most significant bit of the gate's index).
pub fn apply_unitary(s: &QuantumState, u: &CMatrix, targets: &[usize]) -> Result<QuantumState> {
    let n = s.n;
    let k = targets.len();
    if u.dim() != 1 << k {
        return Err(Error::DimensionMismatch { expected: 1 << k, found: u.dim() });
    }
    for (a, &t) in targets.iter().enumerate() {
        check_index(t, n)?;
        if targets[..a].contains(&t) {
            return Err(Error::RepeatedQubit(t));
        }
    }
    let defect = u.unitarity_defect();
    if defect > VALIDITY_TOL {
        return Err(Error::NotUnitary(defect));
    }
    Ok(apply_unitary_unchecked(s, u, targets))
}

pub(crate) fn apply_unitary_unchecked(s: &QuantumState, u: &CMatrix, targets: &[usize]) -> QuantumState {
    let n = s.n;
    let masks: Vec<usize> = targets.iter().map(|&t| bit_of(t, n)).collect();
    let repr = match &s.repr {
        StateRepr::Pure(v) => StateRepr::Pure(apply_local(v, u, &masks)),
        StateRepr::Mixed(m) => {
            // U rho U† = U (U rho†)† for Hermitian rho.
            let left = apply_local_columns(m, u, &masks);
            let left_adj = left.adjoint();
            StateRepr::Mixed(apply_local_columns(&left_adj, u, &masks).adjoint())
        }
    };
    QuantumState { n, repr }
}

fn with_sub_index(base: usize, sub: usize, masks: &[usize]) -> usize {
    let t = masks.len();
    masks.iter().enumerate().fold(base, |acc, (a, &m)| if (sub >> (t - 1 - a)) & 1 == 1 { acc | m } else { acc })
}

fn apply_local(v: &[C64], u: &CMatrix, masks: &[usize]) -> Vec<C64> {
    let all: usize = masks.iter().fold(0, |a, &m| a | m);
    let sub_dim = 1 << masks.len();
    let mut out = vec![ZERO; v.len()];
    let mut local = vec![ZERO; sub_dim];
    for base in (0..v.len()).filter(|k| k & all == 0) {
        for (s, slot) in local.iter_mut().enumerate() {
            *slot = v[with_sub_index(base, s, masks)];
        }
        for r in 0..sub_dim {
            let acc: C64 = u.row(r).iter().zip(&local).map(|(a, b)| a * b).sum();
            out[with_sub_index(base, r, masks)] = acc;
        }
    }
    out
}

fn apply_local_columns(m: &CMatrix, u: &CMatrix, masks: &[usize]) -> CMatrix {
    let d = m.dim();
    let mut out = CMatrix::zeros(d);
    for c in 0..d {
        let col: Vec<C64> = (0..d).map(|r| m[(r, c)]).collect();
        let new = apply_local(&col, u, masks);
        for (r, x) in new.into_iter().enumerate() {
            out[(r, c)] = x;
        }
    }
    out
}

/// Probability of outcome `+1` when measuring the Hermitian Pauli `p`.
pub fn pauli_plus_probability(s: &QuantumState, p: &PauliString) -> Result<f64> {
    Ok(0.5 * (1.0 + pauli_expectation(s, p)?))
}

/// `Tr(P rho)` for a Hermitian Pauli string.
pub fn pauli_expectation(s: &QuantumState, p: &PauliString) -> Result<f64> {
    if p.num_qubits() != s.n {
        return Err(Error::DimensionMismatch { expected: s.n, found: p.num_qubits() });
    }
    if p.sign().is_none() {
        return Err(Error::InvalidObservable(format!("{p} has an imaginary phase")));
    }
    let xm = p.x_mask();
    let value = match &s.repr {
        StateRepr::Pure(v) => linalg::inner(v, &p.apply_to_vector(v)?).re,
        StateRepr::Mixed(m) => {
            // Tr(P rho) = sum_j <j| P rho |j> = sum_j c(j^x) rho[j^x, j]
            (0..m.dim()).map(|j| (p.column_coefficient(j ^ xm) * m[(j ^ xm, j)]).re).sum()
        }
    };
    Ok(value)
}

/// Samples the outcome of measuring `p` without building the post-state.
pub fn sample_pauli<R: Rng + ?Sized>(s: &QuantumState, p: &PauliString, rng: &mut R) -> Result<Outcome> {
    let plus = pauli_plus_probability(s, p)?;
    Ok(if rng.random::<f64>() < plus { Outcome::Plus } else { Outcome::Minus })
}

/// Projective measurement of a Hermitian Pauli string, with the renormalized
/// post-measurement state.
pub fn measure_pauli<R: Rng + ?Sized>(
    s: &QuantumState,
    p: &PauliString,
    rng: &mut R,
) -> Result<(Outcome, QuantumState)> {
    let plus = pauli_plus_probability(s, p)?;
    let outcome = if rng.random::<f64>() < plus { Outcome::Plus } else { Outcome::Minus };
    let prob = if outcome == Outcome::Plus { plus } else { 1.0 - plus };
    if prob <= 0.0 {
        return Err(Error::InvalidState("selected a zero-probability branch".into()));
    }
    let sgn = outcome.value() as f64;
    let repr = match &s.repr {
        StateRepr::Pure(v) => {
            let pv = p.apply_to_vector(v)?;
            let scale = 0.5 / prob.sqrt();
            StateRepr::Pure(v.iter().zip(&pv).map(|(a, b)| (a + b * sgn) * scale).collect())
        }
        StateRepr::Mixed(m) => {
            let proj = (&CMatrix::identity(m.dim()) + &p.dense_matrix()?.scale_real(sgn)).scale_real(0.5);
            let post = proj.matmul(m).matmul(&proj).scale_real(1.0 / prob);
            StateRepr::Mixed(post)
        }
    };
    Ok((outcome, QuantumState { n: s.n, repr }))
}

/// POVM element `0 <= M <= I`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableElement {
    n: usize,
    matrix: CMatrix,
}

impl ObservableElement {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let n = qubits_for_dim(matrix.dim())?;
        check_mixed_cap(n)?;
        let herm = matrix.hermiticity_defect();
        if herm > VALIDITY_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let vals = matrix.eigvalsh();
        let (lo, hi) = (vals[0], vals[vals.len() - 1]);
        if lo < -VALIDITY_TOL || hi > 1.0 + VALIDITY_TOL {
            return Err(Error::InvalidObservable(format!("spectrum [{lo}, {hi}] outside [0, 1]")));
        }
        Ok(Self { n, matrix })
    }

    pub(crate) fn new_unchecked(matrix: CMatrix) -> Self {
        let n = matrix.dim().trailing_zeros() as usize;
        Self { n, matrix }
    }

    pub fn identity(n: usize) -> Result<Self> {
        check_mixed_cap(n)?;
        Ok(Self { n, matrix: CMatrix::identity(1 << n) })
    }

    pub fn zero(n: usize) -> Result<Self> {
        check_mixed_cap(n)?;
        Ok(Self { n, matrix: CMatrix::zeros(1 << n) })
    }

    /// `|psi><psi|` for a unit vector.
    pub fn projector(psi: &[C64]) -> Result<Self> {
        let n = qubits_for_dim(psi.len())?;
        check_mixed_cap(n)?;
        let nrm = linalg::norm(psi);
        if (nrm - 1.0).abs() > VALIDITY_TOL {
            return Err(Error::InvalidObservable(format!("projector vector has norm {nrm}")));
        }
        Ok(Self { n, matrix: CMatrix::outer(psi, psi) })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::new(self.matrix.scale_real(t))
    }

    /// Parses `[[[re, im], ...], ...]`.
    pub fn from_json(text: &str) -> Result<Self> {
        let rows: MatrixJson = serde_json::from_str(text)?;
        Self::new(matrix_from_json(rows)?)
    }
}

/// Row-major complex matrix as arrays of `[re, im]` pairs.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_from_json(rows: MatrixJson) -> Result<CMatrix> {
    CMatrix::from_rows(rows.into_iter().map(|r| r.into_iter().map(|[re, im]| C64::new(re, im)).collect()).collect())
}

pub fn matrix_to_json(m: &CMatrix) -> MatrixJson {
    (0..m.dim()).map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect()).collect()
}

/// `Tr(M rho)`
pub fn expectation(s: &QuantumState, m: &ObservableElement) -> Result<f64> {
    if m.n != s.n {
        return Err(Error::DimensionMismatch { expected: s.n, found: m.n });
    }
    Ok(operator_expectation(s, &m.matrix))
}

pub(crate) fn operator_expectation(s: &QuantumState, m: &CMatrix) -> f64 {
    match &s.repr {
        StateRepr::Pure(v) => m.sandwich(v, v).re,
        StateRepr::Mixed(rho) => {
            let d = rho.dim();
            let mut acc = ZERO;
            for i in 0..d {
                for j in 0..d {
                    acc += m[(i, j)] * rho[(j, i)];
                }
            }
            acc.re
        }
    }
}

/// Schatten-1 norm `||a - b||_1`. Either argument may be an unnormalized
/// Hermitian matrix such as `Λ rho Λ`.
pub fn trace_norm_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    for m in [a, b] {
        let herm = m.hermiticity_defect();
        if herm > VALIDITY_TOL {
            return Err(Error::NotHermitian(herm));
        }
    }
    Ok((a - b).trace_norm_hermitian())
}

pub fn state_trace_distance(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch { expected: a.n, found: b.n });
    }
    trace_norm_distance(&a.density(), &b.density())
}

/// Reduced state on `keep`, in the listed order.
pub fn partial_trace(s: &QuantumState, keep: &[usize]) -> Result<QuantumState> {
    let n = s.n;
    for (a, &q) in keep.iter().enumerate() {
        check_index(q, n)?;
        if keep[..a].contains(&q) {
            return Err(Error::RepeatedQubit(q));
        }
    }
    let k = keep.len();
    check_mixed_cap(k)?;
    let keep_masks: Vec<usize> = keep.iter().map(|&q| bit_of(q, n)).collect();
    let rest: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).map(|q| bit_of(q, n)).collect();
    let kd = 1 << k;
    let rd = 1 << rest.len();
    let full = |kept: usize, traced: usize| with_sub_index(with_sub_index(0, kept, &keep_masks), traced, &rest);
    let mut out = CMatrix::zeros(kd);
    match &s.repr {
        StateRepr::Pure(v) => {
            for r in 0..rd {
                for i in 0..kd {
                    let a = v[full(i, r)];
                    if a == ZERO {
                        continue;
                    }
                    for j in 0..kd {
                        out[(i, j)] += a * v[full(j, r)].conj();
                    }
                }
            }
        }
        StateRepr::Mixed(m) => {
            for r in 0..rd {
                for i in 0..kd {
                    for j in 0..kd {
                        out[(i, j)] += m[(full(i, r), full(j, r))];
                    }
                }
            }
        }
    }
    Ok(QuantumState::mixed_unchecked(out))
}

/// Single-qubit gate library.
pub mod gates {
    use super::*;

    pub fn hadamard() -> CMatrix {
        let h = 1.0 / 2f64.sqrt();
        CMatrix::from_rows(vec![vec![C64::new(h, 0.0), C64::new(h, 0.0)], vec![C64::new(h, 0.0), C64::new(-h, 0.0)]])
            .unwrap()
    }

    pub fn pauli(letter: Letter) -> CMatrix {
        PauliString::from_letters(&[letter]).dense_matrix().unwrap()
    }

    pub fn phase(theta: f64) -> CMatrix {
        CMatrix::diagonal(&[ONE, C64::from_polar(1.0, theta)])
    }

    pub fn rz(theta: f64) -> CMatrix {
        CMatrix::diagonal(&[C64::from_polar(1.0, -theta / 2.0), C64::from_polar(1.0, theta / 2.0)])
    }

    pub fn rx(theta: f64) -> CMatrix {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        CMatrix::from_rows(vec![vec![C64::new(c, 0.0), C64::new(0.0, -s)], vec![C64::new(0.0, -s), C64::new(c, 0.0)]])
            .unwrap()
    }

    pub fn ry(theta: f64) -> CMatrix {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        CMatrix::from_rows(vec![vec![C64::new(c, 0.0), C64::new(-s, 0.0)], vec![C64::new(s, 0.0), C64::new(c, 0.0)]])
            .unwrap()
    }

    /// `H · diag(1, e^{-iθ})`, the gate teleported by one XY-plane
    /// measurement at angle `θ` along a cluster edge.
    pub fn j(theta: f64) -> CMatrix {
        hadamard().matmul(&phase(-theta))
    }

    pub fn cz() -> CMatrix {
        CMatrix::diagonal(&[ONE, ONE, ONE, -ONE])
    }

    pub fn cnot() -> CMatrix {
        let mut m = CMatrix::zeros(4);
        m[(0, 0)] = ONE;
        m[(1, 1)] = ONE;
        m[(2, 3)] = ONE;
        m[(3, 2)] = ONE;
        m
    }

    pub fn swap() -> CMatrix {
        let mut m = CMatrix::zeros(4);
        m[(0, 0)] = ONE;
        m[(1, 2)] = ONE;
        m[(2, 1)] = ONE;
        m[(3, 3)] = ONE;
        m
    }
}

/// Haar-random pure state.
pub fn random_pure_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<QuantumState> {
    check_pure_cap(n)?;
    QuantumState::pure_normalized(gaussian_vector(1 << n, rng))
}

/// Hilbert-Schmidt random density matrix `A A† / Tr(A A†)`.
pub fn random_mixed_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<QuantumState> {
    check_mixed_cap(n)?;
    let d = 1 << n;
    let a = CMatrix::from_fn(d, |_, _| gaussian(rng));
    let w = a.matmul(&a.adjoint());
    let tr = w.trace().re;
    Ok(QuantumState::mixed_unchecked(w.scale_real(1.0 / tr)))
}

/// Random POVM element with spectrum spread over `[0, 1]`.
pub fn random_povm_element<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ObservableElement> {
    check_mixed_cap(n)?;
    let d = 1 << n;
    let a = CMatrix::from_fn(d, |_, _| gaussian(rng));
    let w = a.matmul(&a.adjoint());
    let top = w.max_eigenvalue();
    let scale = rng.random_range(0.2..1.0) / top;
    Ok(ObservableElement::new_unchecked(w.scale_real(scale)))
}

pub(crate) fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

pub(crate) fn gaussian_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<C64> {
    (0..d).map(|_| gaussian(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::stream_rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn plus_state_examples() {
        let s = plus_state(1).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert_eq!(s.amplitudes().unwrap(), &[C64::new(h, 0.0), C64::new(h, 0.0)]);
        let s2 = plus_state(2).unwrap();
        assert!(s2.amplitudes().unwrap().iter().all(|a| close(a.re, 0.5, 1e-15) && a.im == 0.0));
        for n in 1..=6 {
            assert!(close(plus_state(n).unwrap().norm_or_trace(), 1.0, 1e-12));
        }
        assert!(plus_state(0).is_err());
        assert!(matches!(plus_state(40), Err(Error::DenseCapExceeded { .. })));
    }

    #[test]
    fn cz_examples() {
        let s = apply_cz(&plus_state(2).unwrap(), 0, 1).unwrap();
        let amps: Vec<f64> = s.amplitudes().unwrap().iter().map(|a| a.re).collect();
        assert_eq!(amps, vec![0.5, 0.5, 0.5, -0.5]);
        let z = QuantumState::zero(2).unwrap();
        assert_eq!(apply_cz(&z, 0, 1).unwrap(), z);
        let mut rng = stream_rng(7, 0);
        let r = random_pure_state(3, &mut rng).unwrap();
        let back = apply_cz(&apply_cz(&r, 0, 2).unwrap(), 0, 2).unwrap();
        assert_eq!(back, r);
        assert_eq!(apply_cz(&r, 1, 1), Err(Error::RepeatedQubit(1)));
        assert!(matches!(apply_cz(&r, 0, 3), Err(Error::QubitOutOfRange { .. })));
    }

    #[test]
    fn cz_on_mixed_matches_pure() {
        let mut rng = stream_rng(8, 0);
        let r = random_pure_state(3, &mut rng).unwrap();
        let a = apply_cz(&r, 1, 2).unwrap().density();
        let b = apply_cz(&r.to_mixed().unwrap(), 1, 2).unwrap().density();
        assert!(a.max_abs_diff(&b) < 1e-14);
    }

    #[test]
    fn unitary_examples() {
        let z = QuantumState::zero(1).unwrap();
        let id = apply_unitary(&z, &CMatrix::identity(2), &[0]).unwrap();
        assert_eq!(id, z);
        let h = apply_unitary(&z, &gates::hadamard(), &[0]).unwrap();
        let plus = plus_state(1).unwrap();
        assert!(h.fidelity_with_pure(plus.amplitudes().unwrap()).unwrap() > 1.0 - 1e-12);

        let mut rng = stream_rng(9, 0);
        let r = random_pure_state(3, &mut rng).unwrap();
        let u = gates::ry(0.7).matmul(&gates::rz(1.3));
        let there = apply_unitary(&r, &u, &[1]).unwrap();
        let back = apply_unitary(&there, &u.adjoint(), &[1]).unwrap();
        let amps = back.amplitudes().unwrap();
        for (a, b) in amps.iter().zip(r.amplitudes().unwrap()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(matches!(apply_unitary(&r, &CMatrix::zeros(2), &[0]), Err(Error::NotUnitary(_))));
        assert!(matches!(apply_unitary(&r, &gates::cz(), &[0, 0]), Err(Error::RepeatedQubit(0))));
    }

    #[test]
    fn two_qubit_unitary_target_order() {
        // CNOT with control 2 and target 0 on |001> gives |101>.
        let s = QuantumState::basis(&[false, false, true]).unwrap();
        let out = apply_unitary(&s, &gates::cnot(), &[2, 0]).unwrap();
        assert_eq!(out, QuantumState::basis(&[true, false, true]).unwrap());
    }

    #[test]
    fn mixed_unitary_matches_pure() {
        let mut rng = stream_rng(10, 0);
        let r = random_pure_state(3, &mut rng).unwrap();
        let u = gates::cnot().matmul(&gates::hadamard().kron(&gates::rx(0.4)));
        let a = apply_unitary(&r, &u, &[2, 0]).unwrap().density();
        let b = apply_unitary(&r.to_mixed().unwrap(), &u, &[2, 0]).unwrap().density();
        assert!(a.max_abs_diff(&b) < 1e-13);
    }

    #[test]
    fn measure_pauli_examples() {
        let mut rng = stream_rng(11, 0);
        let z0 = QuantumState::zero(1).unwrap();
        let zed: PauliString = "Z".parse().unwrap();
        for _ in 0..20 {
            assert_eq!(measure_pauli(&z0, &zed, &mut rng).unwrap().0, Outcome::Plus);
        }
        let g = apply_cz(&plus_state(2).unwrap(), 0, 1).unwrap();
        let xz: PauliString = "XZ".parse().unwrap();
        assert_eq!(pauli_plus_probability(&g, &xz).unwrap(), 1.0);
        let z00 = QuantumState::zero(2).unwrap();
        assert!(close(pauli_plus_probability(&z00, &xz).unwrap(), 0.5, 1e-15));
        let (o, post) = measure_pauli(&z00, &xz, &mut rng).unwrap();
        // The post-state is an eigenstate of XZ with the observed eigenvalue.
        assert!(close(pauli_expectation(&post, &xz).unwrap(), o.value() as f64, 1e-12));
        let iy: PauliString = "+iZ".parse().unwrap();
        assert!(measure_pauli(&z0, &iy, &mut rng).is_err());
    }

    #[test]
    fn mixed_pauli_expectation_matches_pure() {
        let mut rng = stream_rng(12, 0);
        let r = random_pure_state(3, &mut rng).unwrap();
        let m = r.to_mixed().unwrap();
        for s in ["XYZ", "-ZIY", "IXX", "YYY"] {
            let p: PauliString = s.parse().unwrap();
            let a = pauli_expectation(&r, &p).unwrap();
            let b = pauli_expectation(&m, &p).unwrap();
            let c = operator_expectation(&r, &p.dense_matrix().unwrap());
            assert!(close(a, b, 1e-12) && close(a, c, 1e-12), "{s}");
        }
    }

    #[test]
    fn expectation_examples() {
        let plus = plus_state(1).unwrap();
        assert!(close(expectation(&plus, &ObservableElement::identity(1).unwrap()).unwrap(), 1.0, 1e-12));
        assert_eq!(expectation(&plus, &ObservableElement::zero(1).unwrap()).unwrap(), 0.0);
        let one = ObservableElement::projector(&[ZERO, ONE]).unwrap();
        assert!(close(expectation(&plus, &one).unwrap(), 0.5, 1e-12));
        assert!(ObservableElement::new(CMatrix::identity(2).scale_real(1.5)).is_err());
    }

    #[test]
    fn trace_norm_examples() {
        let z = QuantumState::zero(1).unwrap();
        let o = QuantumState::basis(&[true]).unwrap();
        let p = plus_state(1).unwrap();
        assert_eq!(state_trace_distance(&z, &z).unwrap(), 0.0);
        assert!(close(state_trace_distance(&z, &o).unwrap(), 2.0, 1e-12));
        assert!(close(state_trace_distance(&z, &p).unwrap(), 2f64.sqrt(), 1e-12));
        let bad = CMatrix::from_rows(vec![vec![ZERO, ONE], vec![ZERO, ZERO]]).unwrap();
        assert!(matches!(trace_norm_distance(&z.density(), &bad), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn partial_trace_examples() {
        let mut rng = stream_rng(13, 0);
        let r = random_pure_state(2, &mut rng).unwrap();
        let all = partial_trace(&r, &[0, 1]).unwrap();
        assert!(all.density().max_abs_diff(&r.density()) < 1e-14);

        let h = 1.0 / 2f64.sqrt();
        let bell = QuantumState::pure(vec![C64::new(h, 0.0), ZERO, ZERO, C64::new(h, 0.0)]).unwrap();
        let half = partial_trace(&bell, &[0]).unwrap();
        assert!(half.density().max_abs_diff(&CMatrix::identity(2).scale_real(0.5)) < 1e-14);

        let a = random_pure_state(1, &mut rng).unwrap();
        let b = random_mixed_state(1, &mut rng).unwrap();
        let c = random_pure_state(1, &mut rng).unwrap();
        let abc = a.tensor(&b).unwrap().tensor(&c).unwrap();
        assert!(partial_trace(&abc, &[0]).unwrap().density().max_abs_diff(&a.density()) < 1e-14);
        assert!(partial_trace(&abc, &[1]).unwrap().density().max_abs_diff(&b.density()) < 1e-14);
        // Reordered keep list swaps the tensor factors.
        let ca = partial_trace(&abc, &[2, 0]).unwrap();
        assert!(ca.density().max_abs_diff(&c.tensor(&a).unwrap().density()) < 1e-14);
    }

    #[test]
    fn random_states_are_valid() {
        let mut rng = stream_rng(14, 0);
        let m = random_mixed_state(3, &mut rng).unwrap();
        assert!(QuantumState::mixed(m.density()).is_ok());
        let e = random_povm_element(3, &mut rng).unwrap();
        assert!(ObservableElement::new(e.matrix().clone()).is_ok());
    }

    #[test]
    fn matrix_json_round_trip() {
        let text = "[[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[0.0,0.0]]]";
        let m = ObservableElement::from_json(text).unwrap();
        assert_eq!(m.matrix()[(0, 0)], ONE);
        assert_eq!(serde_json::to_string(&matrix_to_json(m.matrix())).unwrap(), text);
    }
}
