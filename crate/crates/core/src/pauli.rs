//! Phase-tracked Pauli strings and validated stabilizer generator sets.
//!
//! A [`PauliString`] on `n` qubits is `i^phase_exp * X^x Z^z` (qubit by
//! qubit). The letter `Y` is stored as `x = z = 1` with one extra factor of
//! `i` in `phase_exp`, since `Y = i X Z`. Products, commutation and signs are
//! pure integer computations in this representation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::densesim::check_pure_cap;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, I, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    x: Vec<bool>,
    z: Vec<bool>,
    phase_exp: u8,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        Self { x: vec![false; n], z: vec![false; n], phase_exp: 0 }
    }

    /// Raw constructor in the `i^phase_exp * X^x Z^z` convention.
    pub fn from_bits(x: Vec<bool>, z: Vec<bool>, phase_exp: u8) -> Result<Self> {
        if x.len() != z.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: z.len() });
        }
        Ok(Self { x, z, phase_exp: phase_exp % 4 })
    }

    /// Builds `+ P_0 ⊗ ... ⊗ P_{n-1}` from letters (with the standard Hermitian `Y`).
    pub fn from_letters(letters: &[Letter]) -> Self {
        let mut p = Self::identity(letters.len());
        let mut ys = 0u8;
        for (q, l) in letters.iter().enumerate() {
            let (x, z) = l.bits();
            p.x[q] = x;
            p.z[q] = z;
            ys += (x && z) as u8;
        }
        p.phase_exp = ys % 4;
        p
    }

    /// A single-qubit operator on qubit `q` of `n`.
    pub fn single(n: usize, q: usize, letter: Letter) -> Self {
        let mut letters = vec![Letter::I; n];
        letters[q] = letter;
        Self::from_letters(&letters)
    }

    pub fn num_qubits(&self) -> usize {
        self.x.len()
    }

    pub fn x_bits(&self) -> &[bool] {
        &self.x
    }

    pub fn z_bits(&self) -> &[bool] {
        &self.z
    }

    pub fn phase_exp(&self) -> u8 {
        self.phase_exp
    }

    pub fn letter(&self, q: usize) -> Letter {
        Letter::from_bits(self.x[q], self.z[q])
    }

    fn y_count(&self) -> u8 {
        (self.x.iter().zip(&self.z).filter(|(&x, &z)| x && z).count() % 4) as u8
    }

    /// Power of `i` in front of the Hermitian letter string.
    pub fn letter_phase(&self) -> u8 {
        (self.phase_exp + 4 - self.y_count()) % 4
    }

    /// `Some(±1)` when the operator is Hermitian, `None` for a `±i` prefix.
    pub fn sign(&self) -> Option<i8> {
        match self.letter_phase() {
            0 => Some(1),
            2 => Some(-1),
            _ => None,
        }
    }

    pub fn is_identity_up_to_phase(&self) -> bool {
        !self.x.iter().any(|&b| b) && !self.z.iter().any(|&b| b)
    }

    pub fn negate(&self) -> Self {
        Self { phase_exp: (self.phase_exp + 2) % 4, ..self.clone() }
    }

    pub fn weight(&self) -> usize {
        self.x.iter().zip(&self.z).filter(|(&x, &z)| x || z).count()
    }

    /// Group product `self * other` with exact phase.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let n = self.num_qubits();
        if other.num_qubits() != n {
            return Err(Error::DimensionMismatch { expected: n, found: other.num_qubits() });
        }
        // X^a Z^b X^c Z^d = (-1)^{b c} X^{a+c} Z^{b+d}
        let swaps = self.z.iter().zip(&other.x).filter(|(&b, &c)| b && c).count();
        let phase = (self.phase_exp as usize + other.phase_exp as usize + 2 * swaps) % 4;
        Ok(Self {
            x: self.x.iter().zip(&other.x).map(|(a, b)| a ^ b).collect(),
            z: self.z.iter().zip(&other.z).map(|(a, b)| a ^ b).collect(),
            phase_exp: phase as u8,
        })
    }

    /// Symplectic test: true iff the two strings commute.
    pub fn commutes(&self, other: &Self) -> Result<bool> {
        let n = self.num_qubits();
        if other.num_qubits() != n {
            return Err(Error::DimensionMismatch { expected: n, found: other.num_qubits() });
        }
        let form = (0..n).filter(|&j| (self.x[j] && other.z[j]) ^ (self.z[j] && other.x[j])).count();
        Ok(form % 2 == 0)
    }

    /// Pads with identities up to `n` qubits.
    pub fn extend_to(&self, n: usize) -> Self {
        let mut p = self.clone();
        p.x.resize(n, false);
        p.z.resize(n, false);
        p
    }

    pub(crate) fn x_mask(&self) -> usize {
        mask(&self.x)
    }

    pub(crate) fn z_mask(&self) -> usize {
        mask(&self.z)
    }

    /// Coefficient `c(j)` with `P|j> = c(j) |j xor x_mask>`.
    pub(crate) fn column_coefficient(&self, j: usize) -> C64 {
        let parity = (j & self.z_mask()).count_ones() % 2;
        let base = phase_value(self.phase_exp);
        if parity == 1 {
            -base
        } else {
            base
        }
    }

    /// `P |v>` without building the dense matrix.
    pub fn apply_to_vector(&self, v: &[C64]) -> Result<Vec<C64>> {
        let dim = 1usize << self.num_qubits();
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
        }
        let xm = self.x_mask();
        let zm = self.z_mask();
        let base = phase_value(self.phase_exp);
        let mut out = vec![ZERO; dim];
        for (j, &a) in v.iter().enumerate() {
            let c = if (j & zm).count_ones() % 2 == 1 { -base } else { base };
            out[j ^ xm] = c * a;
        }
        Ok(out)
    }

    /// Dense `2^n x 2^n` matrix, qubit 0 as the most significant index bit.
    pub fn dense_matrix(&self) -> Result<CMatrix> {
        let n = self.num_qubits();
        check_pure_cap(n)?;
        let x = CMatrix::from_rows(vec![vec![ZERO, ONE], vec![ONE, ZERO]])?;
        let z = CMatrix::diagonal(&[ONE, -ONE]);
        let id = CMatrix::identity(2);
        let mut m = CMatrix::identity(1);
        for q in 0..n {
            let factor = match (self.x[q], self.z[q]) {
                (false, false) => id.clone(),
                (true, false) => x.clone(),
                (false, true) => z.clone(),
                (true, true) => x.matmul(&z),
            };
            m = m.kron(&factor);
        }
        Ok(m.scale(phase_value(self.phase_exp)))
    }
}

fn mask(bits: &[bool]) -> usize {
    let n = bits.len();
    bits.iter().enumerate().fold(0usize, |acc, (q, &b)| if b { acc | (1 << (n - 1 - q)) } else { acc })
}

fn phase_value(e: u8) -> C64 {
    match e % 4 {
        0 => ONE,
        1 => I,
        2 => -ONE,
        _ => -I,
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.letter_phase() {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        f.write_str(prefix)?;
        for q in 0..self.num_qubits() {
            write!(f, "{}", self.letter(q).as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Accepts an optional `+`, `-`, `+i`, `-i` or `i` prefix followed by
    /// letters from `IXYZ`. Imaginary prefixes parse here; stabilizer
    /// validation rejects them.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (sign_phase, rest) = if let Some(r) = s.strip_prefix("+i") {
            (1u8, r)
        } else if let Some(r) = s.strip_prefix("-i") {
            (3, r)
        } else if let Some(r) = s.strip_prefix('+') {
            (0, r)
        } else if let Some(r) = s.strip_prefix('-') {
            (2, r)
        } else if let Some(r) = s.strip_prefix('i') {
            (1, r)
        } else {
            (0, s)
        };
        if rest.is_empty() {
            return Err(Error::Parse(format!("empty Pauli string {s:?}")));
        }
        let letters = rest
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Letter::I),
                'X' => Ok(Letter::X),
                'Y' => Ok(Letter::Y),
                'Z' => Ok(Letter::Z),
                other => Err(Error::Parse(format!("unexpected character {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut p = Self::from_letters(&letters);
        p.phase_exp = (p.phase_exp + sign_phase) % 4;
        Ok(p)
    }
}

/// Bit string selecting a subset of generators.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubsetSelector(pub Vec<bool>);

impl SubsetSelector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    /// Low `len` bits of `bits`, generator 0 first.
    pub fn from_index(bits: u64, len: usize) -> Self {
        Self((0..len).map(|j| (bits >> j) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn xor(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect())
    }
}

/// Independent, pairwise commuting, Hermitian generators on `n` qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilizerGroup {
    n: usize,
    generators: Vec<PauliString>,
}

impl StabilizerGroup {
    /// Validates a generator list: Hermitian signs, pairwise commutation,
    /// and GF(2) independence (which also excludes `-I` from the group).
    pub fn new(generators: Vec<PauliString>) -> Result<Self> {
        let first = generators.first().ok_or(Error::EmptyGenerators)?;
        let n = first.num_qubits();
        for g in &generators {
            if g.num_qubits() != n {
                return Err(Error::DimensionMismatch { expected: n, found: g.num_qubits() });
            }
        }
        for (i, g) in generators.iter().enumerate() {
            if g.sign().is_none() {
                return Err(Error::ImaginaryPhase(i));
            }
        }
        for i in 0..generators.len() {
            for j in (i + 1)..generators.len() {
                if !generators[i].commutes(&generators[j])? {
                    return Err(Error::NonCommuting(i, j));
                }
            }
        }
        if let Some(subset) = dependent_subset(&generators) {
            return Err(Error::Dependent(subset));
        }
        Ok(Self { n, generators })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    /// `s_k = prod_j g_j^{k_j}`, always with a real sign.
    pub fn subset_product(&self, k: &SubsetSelector) -> Result<PauliString> {
        if k.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: k.len() });
        }
        let mut acc = PauliString::identity(self.n);
        for (g, &bit) in self.generators.iter().zip(&k.0) {
            if bit {
                acc = acc.mul(g)?;
            }
        }
        debug_assert!(acc.sign().is_some());
        Ok(acc)
    }

    /// Same group with every generator padded by identities to `n` qubits.
    pub fn extend_to(&self, n: usize) -> Self {
        Self { n, generators: self.generators.iter().map(|g| g.extend_to(n)).collect() }
    }

    pub fn to_file(&self) -> StabilizerFile {
        StabilizerFile { n: self.n, generators: self.generators.iter().map(|g| g.to_string()).collect() }
    }
}

/// Returns the indices of a dependent subset, if any.
fn dependent_subset(gens: &[PauliString]) -> Option<Vec<usize>> {
    let n = gens[0].num_qubits();
    // Each row: symplectic bits (x | z) plus a combination record.
    let mut rows: Vec<(Vec<bool>, Vec<bool>)> = gens
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let mut bits = g.x_bits().to_vec();
            bits.extend_from_slice(g.z_bits());
            let mut combo = vec![false; gens.len()];
            combo[i] = true;
            (bits, combo)
        })
        .collect();
    let mut pivot_row = 0;
    for col in 0..2 * n {
        let Some(r) = (pivot_row..rows.len()).find(|&r| rows[r].0[col]) else {
            continue;
        };
        rows.swap(pivot_row, r);
        let (pbits, pcombo) = rows[pivot_row].clone();
        for (idx, row) in rows.iter_mut().enumerate() {
            if idx != pivot_row && row.0[col] {
                for (b, p) in row.0.iter_mut().zip(&pbits) {
                    *b ^= p;
                }
                for (b, p) in row.1.iter_mut().zip(&pcombo) {
                    *b ^= p;
                }
            }
        }
        pivot_row += 1;
    }
    rows[pivot_row..]
        .first()
        .map(|(_, combo)| combo.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect())
}

/// `{ "n": int, "generators": ["+XZ", "-ZX", ...] }`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizerFile {
    pub n: usize,
    pub generators: Vec<String>,
}

impl StabilizerFile {
    pub fn into_group(self) -> Result<StabilizerGroup> {
        let gens = self
            .generators
            .iter()
            .map(|s| s.parse::<PauliString>())
            .collect::<Result<Vec<_>>>()?;
        for g in &gens {
            if g.num_qubits() != self.n {
                return Err(Error::DimensionMismatch { expected: self.n, found: g.num_qubits() });
            }
        }
        StabilizerGroup::new(gens)
    }
}

pub fn parse_stabilizer_json(text: &str) -> Result<StabilizerGroup> {
    let file: StabilizerFile = serde_json::from_str(text)?;
    file.into_group()
}
