use std::f64::consts::FRAC_PI_2;

use nalgebra::DVector;

use super::circuit::{Circuit, Control, Gate};
use crate::error::{Error, Result};
use crate::pde_model::{assemble_rhs, DesignPoint, HeatProblem};

const ANGLE_TOL: f64 = 1e-12;

/// RY angle per prefix pattern at tree level `level`; `None` where the
/// subtree has zero weight and the angle is irrelevant.
///
/// Inner levels split by subtree norms, the leaf level by signed amplitudes,
/// so real targets of any sign are reached without phase gates.
fn level_angles(v: &[f64], level: usize) -> Vec<Option<f64>> {
    let m = v.len().trailing_zeros() as usize;
    let width = v.len() >> level;
    let half = width / 2;
    let norm = |s: &[f64]| s.iter().map(|x| x * x).sum::<f64>().sqrt();
    (0..1usize << level)
        .map(|p| {
            let block = &v[p * width..(p + 1) * width];
            if norm(block) == 0.0 {
                return None;
            }
            Some(if level + 1 == m {
                2.0 * block[1].atan2(block[0])
            } else {
                2.0 * norm(&block[half..]).atan2(norm(&block[..half]))
            })
        })
        .collect()
}

fn rotation(q: usize, theta: f64) -> Gate {
    if (theta - FRAC_PI_2).abs() < ANGLE_TOL {
        Gate::H(q)
    } else {
        Gate::Ry(q, theta)
    }
}

/// Binary tree of (multi-)controlled RY gates preparing `v / ‖v‖` on
/// `qubits` (first = most significant), with `extra` controls on every gate.
/// Levels whose live patterns share one angle collapse to a single gate.
fn ry_tree(v: &[f64], qubits: &[usize], extra: &[Control], out: &mut Circuit) {
    for (level, &target) in qubits.iter().enumerate() {
        let angles = level_angles(v, level);
        let live: Vec<(usize, f64)> = angles
            .iter()
            .enumerate()
            .filter_map(|(p, a)| a.map(|a| (p, a)))
            .collect();
        let first = live.first().map(|x| x.1).unwrap_or(0.0);
        if live.iter().all(|(_, a)| (a - first).abs() < ANGLE_TOL) {
            if first.abs() > ANGLE_TOL {
                out.push(rotation(target, first).controlled(extra.to_vec()));
            }
            continue;
        }
        for (p, theta) in live {
            if theta.abs() <= ANGLE_TOL {
                continue;
            }
            let mut controls = extra.to_vec();
            for (i, &q) in qubits[..level].iter().enumerate() {
                controls.push(Control {
                    qubit: q,
                    on_one: (p >> (level - 1 - i)) & 1 == 1,
                });
            }
            out.push(rotation(target, theta).controlled(controls));
        }
    }
}

/// Circuit preparing `|b̃>` for a heat system whose later time blocks only
/// carry flux at the boundary node.
///
/// The time register (most significant qubits) receives the block weights
/// `(‖u0‖, β_1, …)`; the space register then receives `u0/‖u0‖` controlled on
/// the time register reading zero.
pub fn prepare_b_handcrafted(problem: &HeatProblem, design: &DesignPoint) -> Result<Circuit> {
    let rhs = assemble_rhs(problem, design);
    prepare_blocks(&rhs, problem.n_x, problem.n_t)
}

/// Block form of [`prepare_b_handcrafted`] for a raw right-hand side.
pub fn prepare_blocks(rhs: &DVector<f64>, n_x: usize, n_t: usize) -> Result<Circuit> {
    if !n_x.is_power_of_two() || !n_t.is_power_of_two() || rhs.len() != n_x * n_t {
        return Err(Error::StatePrep(format!(
            "block sizes {n_x}x{n_t} are not powers of two matching rhs length {}",
            rhs.len()
        )));
    }
    let mut weights = Vec::with_capacity(n_t);
    for k in 0..n_t {
        let block = rhs.rows(k * n_x, n_x);
        if k == 0 {
            weights.push(block.norm());
        } else {
            if block.iter().skip(1).any(|v| *v != 0.0) {
                return Err(Error::StatePrep(format!("block {k} has interior entries")));
            }
            weights.push(block[0]);
        }
    }
    if weights.iter().all(|w| *w == 0.0) {
        return Err(Error::StatePrep("zero right-hand side".into()));
    }
    let m_t = n_t.trailing_zeros() as usize;
    let m_x = n_x.trailing_zeros() as usize;
    let time: Vec<usize> = (0..m_t).collect();
    let space: Vec<usize> = (m_t..m_t + m_x).collect();
    let mut c = Circuit::new(m_t + m_x);
    ry_tree(&weights, &time, &[], &mut c);
    if weights[0] != 0.0 {
        let controls: Vec<Control> = if weights[1..].iter().any(|w| *w != 0.0) {
            time.iter().map(|q| Control::zero(*q)).collect()
        } else {
            Vec::new()
        };
        let u0: Vec<f64> = rhs.rows(0, n_x).iter().copied().collect();
        ry_tree(&u0, &space, &controls, &mut c);
    }
    Ok(c)
}

/// Generic preparation of a real vector by uniformly controlled RY
/// rotations, each decomposed into RY + CNOT with Gray-code ordering.
/// Uses `O(2^n)` gates.
pub fn prepare_state_general(target: &[f64]) -> Result<Circuit> {
    let len = target.len();
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::PaddingRequired(len));
    }
    if target.iter().all(|v| *v == 0.0) || target.iter().any(|v| !v.is_finite()) {
        return Err(Error::StatePrep("zero or non-finite target".into()));
    }
    let n = len.trailing_zeros() as usize;
    let mut c = Circuit::new(n);
    for level in 0..n {
        let alpha: Vec<f64> = level_angles(target, level)
            .into_iter()
            .map(|a| a.unwrap_or(0.0))
            .collect();
        if level == 0 {
            if alpha[0].abs() > ANGLE_TOL {
                c.push(Gate::Ry(0, alpha[0]));
            }
            continue;
        }
        let k = alpha.len();
        let gray = |i: usize| i ^ (i >> 1);
        for i in 0..k {
            let theta: f64 = alpha
                .iter()
                .enumerate()
                .map(|(p, a)| if (p & gray(i)).count_ones() % 2 == 0 { *a } else { -*a })
                .sum::<f64>()
                / k as f64;
            c.push(Gate::Ry(level, theta));
            let flip_bit = if i + 1 < k {
                (i + 1).trailing_zeros() as usize
            } else {
                level - 1
            };
            c.push(Gate::cnot(level - 1 - flip_bit, level));
        }
    }
    Ok(c)
}
