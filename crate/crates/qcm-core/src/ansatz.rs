//! RVB trial-state circuits: singlet initialization plus D mixing layers of
//! parameterized eSWAP gates, with CNOT cost accounting.

use serde::{Deserialize, Serialize};

use crate::error::{QcmError, Result};

/// A gate in the restricted set the RVB construction and basis rotations use.
///
/// `ESwap` carries its resolved angle; the slot index it was bound from is
/// kept so circuits can be re-parameterized without rebuilding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    H(usize),
    X(usize),
    Z(usize),
    /// Phase-dagger gate S† = diag(1, −i); used by Y-basis rotations.
    Sdg(usize),
    Cnot { control: usize, target: usize },
    /// eSWAP(θ) = exp(−i(θ/2)·SWAP) = cos(θ/2)·I − i·sin(θ/2)·SWAP.
    ESwap { a: usize, b: usize, theta: f64, slot: usize },
}

impl Gate {
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::H(u) | Gate::X(u) | Gate::Z(u) | Gate::Sdg(u) => (u, None),
            Gate::Cnot { control, target } => (control, Some(target)),
            Gate::ESwap { a, b, .. } => (a, Some(b)),
        }
    }
}

/// An ordered gate list over `num_qubits` qubits with its parameter vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Circuit {
    pub num_qubits: usize,
    pub depth: usize,
    pub gates: Vec<Gate>,
    /// The θ vector the eSWAP angles were bound from (length D·q for RVB).
    pub params: Vec<f64>,
}

impl Circuit {
    /// Validates gate indices against the qubit count.
    pub fn check(&self) -> Result<()> {
        for g in &self.gates {
            let (a, b) = g.qubits();
            let hi = b.map_or(a, |b| a.max(b));
            if hi >= self.num_qubits {
                return Err(QcmError::BadEdge(a, b.unwrap_or(a), self.num_qubits));
            }
        }
        Ok(())
    }
}

/// Builds the RVB circuit: singlets on pairs (0,1), (2,3), … then `d` mixing
/// layers. Each layer applies q eSWAP gates in two brickwork sublayers —
/// even pairs (0,1)(2,3)… then odd pairs (1,2)(3,4)…(q−1,0) with the
/// periodic wrap — and each gate consumes one entry of `theta`, so
/// `theta.len()` must equal `d·q`.
///
/// Singlet preparation on a pair (a,b) is H(a), CNOT(a→b), Z(b), X(b),
/// taking |00⟩ to (|01⟩ − |10⟩)/√2 with one CNOT.
pub fn rvb_circuit(q: usize, d: usize, theta: &[f64]) -> Result<Circuit> {
    if q == 0 || q % 2 != 0 {
        return Err(QcmError::OddQubits(q));
    }
    if theta.len() != d * q {
        return Err(QcmError::ParameterLength(theta.len(), d * q));
    }
    let mut gates = Vec::with_capacity(2 * q + d * q);
    for a in (0..q).step_by(2) {
        let b = a + 1;
        gates.push(Gate::H(a));
        gates.push(Gate::Cnot { control: a, target: b });
        gates.push(Gate::Z(b));
        gates.push(Gate::X(b));
    }
    let mut slot = 0;
    for _ in 0..d {
        for a in (0..q).step_by(2) {
            gates.push(Gate::ESwap { a, b: a + 1, theta: theta[slot], slot });
            slot += 1;
        }
        for a in (1..q).step_by(2) {
            gates.push(Gate::ESwap { a, b: (a + 1) % q, theta: theta[slot], slot });
            slot += 1;
        }
    }
    Ok(Circuit { num_qubits: q, depth: d, gates, params: theta.to_vec() })
}

/// Counts CNOTs under the fixed decomposition rules: every eSWAP costs 3
/// CNOTs (plus single-qubit rotations that are not counted) and every
/// explicit CNOT costs 1. For `rvb_circuit` this gives n_CX = 3·D·q + q/2.
pub fn cnot_count(c: &Circuit) -> usize {
    c.gates
        .iter()
        .map(|g| match g {
            Gate::Cnot { .. } => 1,
            Gate::ESwap { .. } => 3,
            _ => 0,
        })
        .sum()
}

/// Prima facie circuit failure probability 1 − (1−ε_CX)^{n_CX}: the chance
/// that at least one of n_CX CNOTs errs at per-gate rate ε_CX.
pub fn prima_facie_error(n_cx: usize, eps_cx: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps_cx) {
        return Err(QcmError::BadProbability(eps_cx));
    }
    Ok(1.0 - (1.0 - eps_cx).powi(n_cx as i32))
}
