use std::fmt;

use num_complex::Complex64;

use super::state::StateVector;
use crate::error::{Error, Result};

type Mat2 = [[Complex64; 2]; 2];

const fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A control line: the gate fires when `qubit` reads `on_one` (1) or 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Control {
    pub qubit: usize,
    pub on_one: bool,
}

impl Control {
    pub fn one(qubit: usize) -> Self {
        Self { qubit, on_one: true }
    }

    pub fn zero(qubit: usize) -> Self {
        Self { qubit, on_one: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    Y(usize),
    Z(usize),
    S(usize),
    Sdg(usize),
    Ry(usize, f64),
    Rz(usize, f64),
    Swap(usize, usize),
    /// Never nests: `controlled` flattens inner control lists.
    Controlled {
        controls: Vec<Control>,
        gate: Box<Gate>,
    },
}

impl Gate {
    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::X(target).controlled(vec![Control::one(control)])
    }

    pub fn controlled(self, mut controls: Vec<Control>) -> Self {
        if controls.is_empty() {
            return self;
        }
        match self {
            Gate::Controlled { controls: inner, gate } => {
                controls.extend(inner);
                Gate::Controlled { controls, gate }
            }
            g => Gate::Controlled {
                controls,
                gate: Box::new(g),
            },
        }
    }

    pub fn inverse(&self) -> Gate {
        match self {
            Gate::S(q) => Gate::Sdg(*q),
            Gate::Sdg(q) => Gate::S(*q),
            Gate::Ry(q, t) => Gate::Ry(*q, -t),
            Gate::Rz(q, t) => Gate::Rz(*q, -t),
            Gate::Controlled { controls, gate } => Gate::Controlled {
                controls: controls.clone(),
                gate: Box::new(gate.inverse()),
            },
            g => g.clone(),
        }
    }

    /// Every qubit the gate touches, controls included.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::H(q)
            | Gate::X(q)
            | Gate::Y(q)
            | Gate::Z(q)
            | Gate::S(q)
            | Gate::Sdg(q)
            | Gate::Ry(q, _)
            | Gate::Rz(q, _) => vec![*q],
            Gate::Swap(a, b) => vec![*a, *b],
            Gate::Controlled { controls, gate } => {
                let mut qs: Vec<usize> = controls.iter().map(|c| c.qubit).collect();
                qs.extend(gate.qubits());
                qs
            }
        }
    }

    fn matrix(&self) -> Option<Mat2> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Some(match self {
            Gate::H(_) => [[c(s, 0.), c(s, 0.)], [c(s, 0.), c(-s, 0.)]],
            Gate::X(_) => [[c(0., 0.), c(1., 0.)], [c(1., 0.), c(0., 0.)]],
            Gate::Y(_) => [[c(0., 0.), c(0., -1.)], [c(0., 1.), c(0., 0.)]],
            Gate::Z(_) => [[c(1., 0.), c(0., 0.)], [c(0., 0.), c(-1., 0.)]],
            Gate::S(_) => [[c(1., 0.), c(0., 0.)], [c(0., 0.), c(0., 1.)]],
            Gate::Sdg(_) => [[c(1., 0.), c(0., 0.)], [c(0., 0.), c(0., -1.)]],
            Gate::Ry(_, t) => {
                let (sn, cs) = (t / 2.0).sin_cos();
                [[c(cs, 0.), c(-sn, 0.)], [c(sn, 0.), c(cs, 0.)]]
            }
            Gate::Rz(_, t) => {
                let half = t / 2.0;
                [
                    [Complex64::from_polar(1.0, -half), c(0., 0.)],
                    [c(0., 0.), Complex64::from_polar(1.0, half)],
                ]
            }
            Gate::Swap(..) | Gate::Controlled { .. } => return None,
        })
    }

    /// Applies the gate to raw amplitudes of an `n`-qubit register.
    pub(crate) fn apply_to(&self, amps: &mut [Complex64], n: usize) {
        self.apply(amps, n, 0, 0);
    }

    fn apply(&self, amps: &mut [Complex64], n: usize, cmask: usize, cval: usize) {
        let bit = |q: usize| 1usize << (n - 1 - q);
        match self {
            Gate::Swap(a, b) => {
                let (ba, bb) = (bit(*a), bit(*b));
                for i in 0..amps.len() {
                    if i & ba != 0 && i & bb == 0 && i & cmask == cval {
                        amps.swap(i, i ^ ba ^ bb);
                    }
                }
            }
            Gate::Controlled { controls, gate } => {
                let (mut m, mut v) = (cmask, cval);
                for ctl in controls {
                    m |= bit(ctl.qubit);
                    if ctl.on_one {
                        v |= bit(ctl.qubit);
                    }
                }
                gate.apply(amps, n, m, v);
            }
            single => {
                let q = single.qubits()[0];
                let u = single.matrix().expect("single-qubit gate");
                let b = bit(q);
                for i in 0..amps.len() {
                    if i & b == 0 && i & cmask == cval {
                        let j = i | b;
                        let (x, y) = (amps[i], amps[j]);
                        amps[i] = u[0][0] * x + u[0][1] * y;
                        amps[j] = u[1][0] * x + u[1][1] * y;
                    }
                }
            }
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::H(q) => write!(f, "H q{q}"),
            Gate::X(q) => write!(f, "X q{q}"),
            Gate::Y(q) => write!(f, "Y q{q}"),
            Gate::Z(q) => write!(f, "Z q{q}"),
            Gate::S(q) => write!(f, "S q{q}"),
            Gate::Sdg(q) => write!(f, "SDG q{q}"),
            Gate::Ry(q, t) => write!(f, "RY q{q} {t:.10}"),
            Gate::Rz(q, t) => write!(f, "RZ q{q} {t:.10}"),
            Gate::Swap(a, b) => write!(f, "SWAP q{a} q{b}"),
            Gate::Controlled { controls, gate } => {
                write!(f, "C")?;
                for ctl in controls {
                    let neg = if ctl.on_one { "" } else { "!" };
                    write!(f, " {neg}q{}", ctl.qubit)?;
                }
                write!(f, " : {gate}")
            }
        }
    }
}

/// Ordered gate list on a fixed register.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, gate: Gate) -> &mut Self {
        self.gates.push(gate);
        self
    }

    pub fn extend(&mut self, other: &Circuit) -> &mut Self {
        self.gates.extend(other.gates.iter().cloned());
        self
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for g in &self.gates {
            let qs = g.qubits();
            for (i, q) in qs.iter().enumerate() {
                if *q >= self.n_qubits {
                    return Err(Error::QubitOutOfRange {
                        index: *q,
                        n_qubits: self.n_qubits,
                    });
                }
                if qs[..i].contains(q) {
                    return Err(Error::InvalidDimension(format!("gate `{g}` uses qubit {q} twice")));
                }
            }
        }
        Ok(())
    }

    /// Reverse order, each gate inverted.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    /// The same circuit with every gate conditioned on `controls`, on a
    /// register of `n_qubits` (which must cover the control qubits).
    pub fn controlled(&self, controls: &[Control], n_qubits: usize) -> Circuit {
        Circuit {
            n_qubits,
            gates: self
                .gates
                .iter()
                .map(|g| g.clone().controlled(controls.to_vec()))
                .collect(),
        }
    }

    /// Same gates on a wider register; qubit indices are unchanged.
    pub fn widened(&self, n_qubits: usize) -> Circuit {
        assert!(n_qubits >= self.n_qubits);
        Circuit {
            n_qubits,
            gates: self.gates.clone(),
        }
    }

    pub fn apply_in_place(&self, state: &mut StateVector) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::InvalidDimension(format!(
                "circuit on {} qubits, state on {}",
                self.n_qubits,
                state.n_qubits()
            )));
        }
        self.validate()?;
        let n = self.n_qubits;
        let amps = state.amplitudes_mut();
        for g in &self.gates {
            g.apply(amps, n, 0, 0);
        }
        Ok(())
    }

    pub fn run(&self, input: &StateVector) -> Result<StateVector> {
        let mut out = input.clone();
        self.apply_in_place(&mut out)?;
        Ok(out)
    }

    /// Output state on `|0...0>`.
    pub fn run_zero(&self) -> Result<StateVector> {
        let mut out = StateVector::zero(self.n_qubits);
        self.apply_in_place(&mut out)?;
        Ok(out)
    }

    /// Dense matrix; column `j` is the circuit applied to `|j>`.
    pub fn unitary(&self) -> Result<nalgebra::DMatrix<Complex64>> {
        let dim = 1usize << self.n_qubits;
        let mut m = nalgebra::DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for j in 0..dim {
            let col = self.run(&StateVector::basis(self.n_qubits, j))?;
            for (i, a) in col.amplitudes().iter().enumerate() {
                m[(i, j)] = *a;
            }
        }
        Ok(m)
    }

    /// One gate per line, e.g. `RY q2 0.7853981634`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for g in &self.gates {
            s.push_str(&g.to_string());
            s.push('\n');
        }
        s
    }
}
