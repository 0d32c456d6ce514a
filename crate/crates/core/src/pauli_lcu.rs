//! Pauli-basis linear combination of unitaries.
//!
//! Qubit 0 is the most significant bit of a basis index and the leftmost
//! Kronecker factor, so the word `"ZI"` acts as `Z ⊗ I`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde_model::{assemble_parts, DesignPoint, HeatProblem, Scheme};

/// Coefficients at or below this magnitude are dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const IM: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        match self {
            Pauli::I => [[ONE, ZERO], [ZERO, ONE]],
            Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
            Pauli::Y => [[ZERO, -IM], [IM, ZERO]],
            Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }

    /// `self * other = phase * result`.
    pub fn product(self, other: Pauli) -> (Complex64, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (ONE, p),
            (a, b) if a == b => (ONE, I),
            (X, Y) => (IM, Z),
            (Y, X) => (-IM, Z),
            (Y, Z) => (IM, X),
            (Z, Y) => (-IM, X),
            (Z, X) => (IM, Y),
            (X, Z) => (-IM, Y),
            _ => unreachable!(),
        }
    }
}

impl TryFrom<char> for Pauli {
    type Error = Error;

    fn try_from(c: char) -> Result<Self> {
        match c {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::InvalidDimension(format!("'{other}' is not a Pauli symbol"))),
        }
    }
}

/// Tensor product of single-qubit Paulis.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliWord(Vec<Pauli>);

impl PauliWord {
    pub fn new(paulis: Vec<Pauli>) -> Self {
        Self(paulis)
    }

    pub fn identity(n: usize) -> Self {
        Self(vec![Pauli::I; n])
    }

    pub fn n_qubits(&self) -> usize {
        self.0.len()
    }

    pub fn paulis(&self) -> &[Pauli] {
        &self.0
    }

    pub fn y_count(&self) -> usize {
        self.0.iter().filter(|p| **p == Pauli::Y).count()
    }

    /// Every word on `n` qubits in lexicographic order.
    pub fn all(n: usize) -> impl Iterator<Item = PauliWord> {
        (0..4usize.pow(n as u32)).map(move |mut code| {
            let mut word = vec![Pauli::I; n];
            for slot in word.iter_mut().rev() {
                *slot = Pauli::ALL[code % 4];
                code /= 4;
            }
            PauliWord(word)
        })
    }

    /// `self * other = phase * word`.
    pub fn product(&self, other: &PauliWord) -> (Complex64, PauliWord) {
        assert_eq!(self.n_qubits(), other.n_qubits());
        let mut phase = ONE;
        let word = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| {
                let (p, w) = a.product(*b);
                phase *= p;
                w
            })
            .collect();
        (phase, PauliWord(word))
    }

    /// Dense Kronecker-product matrix.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(1, 1, ONE);
        for p in &self.0 {
            let pm = p.matrix();
            let pm = DMatrix::from_fn(2, 2, |r, c| pm[r][c]);
            m = m.kronecker(&pm);
        }
        m
    }

    /// Bit masks: `flip` has the bits toggled by X/Y, `phase_z` the bits
    /// picking up a sign from Z/Y.
    fn masks(&self) -> (usize, usize) {
        let n = self.n_qubits();
        let mut flip = 0;
        let mut zmask = 0;
        for (q, p) in self.0.iter().enumerate() {
            let bit = 1 << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => flip |= bit,
                Pauli::Y => {
                    flip |= bit;
                    zmask |= bit;
                }
                Pauli::Z => zmask |= bit,
            }
        }
        (flip, zmask)
    }

    /// Applies the word to an amplitude vector of length `2^n`.
    pub fn apply(&self, amps: &[Complex64]) -> Vec<Complex64> {
        let (flip, zmask) = self.masks();
        let y_phase = match self.y_count() % 4 {
            0 => ONE,
            1 => IM,
            2 => -ONE,
            _ => -IM,
        };
        let mut out = vec![ZERO; amps.len()];
        for (idx, a) in amps.iter().enumerate() {
            // P|idx> = i^{#Y} (-1)^{popcount(idx & zmask)} |idx ^ flip>
            let sign = if (idx & zmask).count_ones() % 2 == 1 { -ONE } else { ONE };
            out[idx ^ flip] = a * sign * y_phase;
        }
        out
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for PauliWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(Pauli::try_from)
            .collect::<Result<Vec<_>>>()
            .map(PauliWord)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcuTerm {
    pub coeff: Complex64,
    pub word: PauliWord,
}

/// `A = Σ coeff_i * word_i`, terms sorted by word, no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct LcuDecomposition {
    pub n_qubits: usize,
    pub terms: Vec<LcuTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcuTermRecord {
    pub coeff_re: f64,
    pub coeff_im: f64,
    pub word: String,
}

impl LcuDecomposition {
    /// Merges duplicate words, prunes, and sorts.
    pub fn from_terms(n_qubits: usize, terms: impl IntoIterator<Item = LcuTerm>) -> Self {
        let mut merged: BTreeMap<PauliWord, Complex64> = BTreeMap::new();
        for t in terms {
            *merged.entry(t.word).or_insert(ZERO) += t.coeff;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.norm() > PRUNE_THRESHOLD)
            .map(|(word, coeff)| LcuTerm { coeff, word })
            .collect();
        Self { n_qubits, terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff_of(&self, word: &PauliWord) -> Complex64 {
        self.terms
            .binary_search_by(|t| t.word.cmp(word))
            .map(|i| self.terms[i].coeff)
            .unwrap_or(ZERO)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n_qubits: self.n_qubits,
            terms: self
                .terms
                .iter()
                .map(|t| LcuTerm {
                    coeff: t.coeff * factor,
                    word: t.word.clone(),
                })
                .collect(),
        }
    }

    /// Sum of coefficient magnitudes, an upper bound on the spectral norm.
    pub fn l1_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.norm()).sum()
    }

    /// `Σ coeff_i * word_i |psi>` evaluated term by term.
    pub fn apply(&self, amps: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; amps.len()];
        for t in &self.terms {
            for (o, v) in out.iter_mut().zip(t.word.apply(amps)) {
                *o += t.coeff * v;
            }
        }
        out
    }

    pub fn to_records(&self) -> Vec<LcuTermRecord> {
        self.terms
            .iter()
            .map(|t| LcuTermRecord {
                coeff_re: t.coeff.re,
                coeff_im: t.coeff.im,
                word: t.word.to_string(),
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_records()).expect("records serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let records: Vec<LcuTermRecord> = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut n = None;
        let mut terms = Vec::with_capacity(records.len());
        for r in records {
            let word: PauliWord = r.word.parse()?;
            match n {
                None => n = Some(word.n_qubits()),
                Some(k) if k != word.n_qubits() => return Err(Error::InvalidDimension("mixed word lengths".into())),
                _ => {}
            }
            terms.push(LcuTerm {
                coeff: Complex64::new(r.coeff_re, r.coeff_im),
                word,
            });
        }
        Ok(Self::from_terms(n.unwrap_or(0), terms))
    }
}

fn qubits_for(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::PaddingRequired(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

fn check_square(matrix: &DMatrix<f64>) -> Result<usize> {
    if !matrix.is_square() {
        return Err(Error::InvalidDimension(format!(
            "{}x{} matrix is not square",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    qubits_for(matrix.nrows())
}

/// Coefficients from `Tr(P A) / 2^n` over every Pauli word.
pub fn decompose_trace(matrix: &DMatrix<f64>) -> Result<LcuDecomposition> {
    let n = check_square(matrix)?;
    let dim = matrix.nrows() as f64;
    let a = matrix.map(|v| Complex64::new(v, 0.0));
    let terms = PauliWord::all(n).map(|word| {
        let p = word.matrix();
        // Tr(P A) = Σ_ij P_ij A_ji
        let mut tr = ZERO;
        for i in 0..p.nrows() {
            for j in 0..p.ncols() {
                if p[(i, j)] != ZERO {
                    tr += p[(i, j)] * a[(j, i)];
                }
            }
        }
        LcuTerm { coeff: tr / dim, word }
    });
    Ok(LcuDecomposition::from_terms(n, terms))
}

/// Recursive 2x2 block slicing.
///
/// `[[A00, A01], [A10, A11]] = I⊗(A00+A11)/2 + Z⊗(A00-A11)/2
///  + X⊗(A01+A10)/2 + Y⊗i(A01-A10)/2`; all-zero blocks are skipped.
pub fn decompose_sliced(matrix: &DMatrix<f64>) -> Result<LcuDecomposition> {
    let n = check_square(matrix)?;
    let a = matrix.map(|v| Complex64::new(v, 0.0));
    let mut terms = Vec::new();
    let mut prefix = Vec::with_capacity(n);
    slice_into(&a, &mut prefix, &mut terms);
    Ok(LcuDecomposition::from_terms(n, terms))
}

fn slice_into(block: &DMatrix<Complex64>, prefix: &mut Vec<Pauli>, out: &mut Vec<LcuTerm>) {
    let max = block.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    // coefficients below this block are averages of its entries
    if max <= PRUNE_THRESHOLD {
        return;
    }
    if block.nrows() == 1 {
        out.push(LcuTerm {
            coeff: block[(0, 0)],
            word: PauliWord(prefix.clone()),
        });
        return;
    }
    let h = block.nrows() / 2;
    let a00 = block.view((0, 0), (h, h));
    let a01 = block.view((0, h), (h, h));
    let a10 = block.view((h, 0), (h, h));
    let a11 = block.view((h, h), (h, h));
    let half = Complex64::new(0.5, 0.0);
    let parts = [
        (Pauli::I, (a00 + a11) * half),
        (Pauli::X, (a01 + a10) * half),
        (Pauli::Y, (a01 - a10) * (IM * half)),
        (Pauli::Z, (a00 - a11) * half),
    ];
    for (p, sub) in parts {
        prefix.push(p);
        slice_into(&sub, prefix, out);
        prefix.pop();
    }
}

pub fn reconstruct(lcu: &LcuDecomposition) -> DMatrix<Complex64> {
    let dim = 1usize << lcu.n_qubits;
    let mut m = DMatrix::from_element(dim, dim, ZERO);
    for t in &lcu.terms {
        m += t.word.matrix() * t.coeff;
    }
    m
}

/// Embeds a matrix in the next power-of-two dimension with an identity
/// padding block, and its right-hand side with zeros.
pub fn pad_system(matrix: &DMatrix<f64>, rhs: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = matrix.nrows();
    let dim = n.next_power_of_two();
    if dim == n {
        return (matrix.clone(), rhs.clone());
    }
    let mut m = DMatrix::identity(dim, dim);
    m.view_mut((0, 0), (n, n)).copy_from(matrix);
    let mut b = DVector::zeros(dim);
    b.rows_mut(0, n).copy_from(rhs);
    (m, b)
}

fn pad_matrix(matrix: &DMatrix<f64>, identity_fill: bool) -> DMatrix<f64> {
    let n = matrix.nrows();
    let dim = n.next_power_of_two();
    let mut m = if identity_fill {
        DMatrix::identity(dim, dim)
    } else {
        DMatrix::zeros(dim, dim)
    };
    m.view_mut((0, 0), (n, n)).copy_from(matrix);
    m
}

/// Pre-decomposed `A_s1` and `A_s2`; any design's LCU is `base1 - c * base2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableLcu {
    pub base1: LcuDecomposition,
    pub base2: LcuDecomposition,
    pub n_x: usize,
    pub n_t: usize,
    pub scheme: Scheme,
}

impl SeparableLcu {
    pub fn build(n_x: usize, n_t: usize, scheme: Scheme) -> Result<Self> {
        let (chain, diffusion) = assemble_parts(n_x, n_t, scheme)?;
        // padding rows belong to the identity chain so the padded block stays I
        Ok(Self {
            base1: decompose_sliced(&pad_matrix(&chain, true))?,
            base2: decompose_sliced(&pad_matrix(&diffusion, false))?,
            n_x,
            n_t,
            scheme,
        })
    }

    pub fn for_problem(problem: &HeatProblem, scheme: Scheme) -> Result<Self> {
        Self::build(problem.n_x, problem.n_t, scheme)
    }

    /// LCU for a given diffusion number `c`.
    pub fn combine(&self, c: f64) -> LcuDecomposition {
        let terms = self
            .base1
            .terms
            .iter()
            .cloned()
            .chain(self.base2.terms.iter().map(|t| LcuTerm {
                coeff: t.coeff * (-c),
                word: t.word.clone(),
            }));
        LcuDecomposition::from_terms(self.base1.n_qubits, terms)
    }
}

pub fn recombine(cache: &SeparableLcu, problem: &HeatProblem, design: &DesignPoint) -> LcuDecomposition {
    cache.combine(problem.diffusion_number(design))
}
