//! Statevector and density-matrix simulation plus the noise channels used in
//! the robustness experiments: global white noise, per-qubit depolarize and
//! dephase, and an α-scaled per-gate device model.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ansatz::{Circuit, Gate};
use crate::error::{QcmError, Result};

/// Density matrices above this qubit count are refused (2^24 complex entries
/// at the cap — the scale of the noisy-simulation experiments).
pub const DENSITY_CAP: usize = 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A pure statevector (2^q amplitudes) or a density matrix (2^q × 2^q,
/// row-major).
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Statevector { num_qubits: usize, amps: Vec<Complex64> },
    Density { num_qubits: usize, rho: Vec<Complex64> },
}

impl QuantumState {
    /// |0…0⟩ as a statevector.
    pub fn zero(q: usize) -> Self {
        let mut amps = vec![ZERO; 1 << q];
        amps[0] = ONE;
        QuantumState::Statevector { num_qubits: q, amps }
    }

    pub fn from_amplitudes(q: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1 << q {
            return Err(QcmError::DimensionMismatch(q, amps.len()));
        }
        Ok(QuantumState::Statevector { num_qubits: q, amps })
    }

    /// I/2^q.
    pub fn maximally_mixed(q: usize) -> Result<Self> {
        check_density_cap(q)?;
        let dim = 1usize << q;
        let mut rho = vec![ZERO; dim * dim];
        let w = Complex64::new(1.0 / dim as f64, 0.0);
        for r in 0..dim {
            rho[r * dim + r] = w;
        }
        Ok(QuantumState::Density { num_qubits: q, rho })
    }

    pub fn num_qubits(&self) -> usize {
        match self {
            QuantumState::Statevector { num_qubits, .. }
            | QuantumState::Density { num_qubits, .. } => *num_qubits,
        }
    }

    pub fn is_density(&self) -> bool {
        matches!(self, QuantumState::Density { .. })
    }

    /// Promotes a statevector to the pure density matrix |ψ⟩⟨ψ|;
    /// density-matrix inputs are returned unchanged.
    pub fn to_density(&self) -> Result<QuantumState> {
        match self {
            QuantumState::Density { .. } => Ok(self.clone()),
            QuantumState::Statevector { num_qubits, amps } => {
                check_density_cap(*num_qubits)?;
                let dim = amps.len();
                let mut rho = vec![ZERO; dim * dim];
                for r in 0..dim {
                    for c in 0..dim {
                        rho[r * dim + c] = amps[r] * amps[c].conj();
                    }
                }
                Ok(QuantumState::Density { num_qubits: *num_qubits, rho })
            }
        }
    }

    /// ⟨ψ|ψ⟩ for statevectors, tr ρ for density matrices.
    pub fn norm(&self) -> f64 {
        match self {
            QuantumState::Statevector { amps, .. } => {
                amps.iter().map(|a| a.norm_sqr()).sum()
            }
            QuantumState::Density { rho, .. } => {
                let dim = isqrt(rho.len());
                (0..dim).map(|r| rho[r * dim + r].re).sum()
            }
        }
    }

    /// Computational-basis probabilities (|amps|² or diag ρ).
    pub fn probabilities(&self) -> Vec<f64> {
        match self {
            QuantumState::Statevector { amps, .. } => {
                amps.iter().map(|a| a.norm_sqr()).collect()
            }
            QuantumState::Density { rho, .. } => {
                let dim = isqrt(rho.len());
                (0..dim).map(|r| rho[r * dim + r].re).collect()
            }
        }
    }
}

fn isqrt(n: usize) -> usize {
    let r = (n as f64).sqrt().round() as usize;
    debug_assert_eq!(r * r, n);
    r
}

fn check_density_cap(q: usize) -> Result<()> {
    if q > DENSITY_CAP {
        return Err(QcmError::DensityCapExceeded(q, DENSITY_CAP));
    }
    Ok(())
}

/// Per-gate error rates for the device-level model; every rate is scaled by
/// `alpha` so a single knob sweeps from noiseless (0) to device level (1).
/// Defaults are representative NISQ values, not calibration data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub eps_cx: f64,
    pub eps_1q: f64,
    pub readout_flip: f64,
    pub alpha: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams { eps_cx: 0.01, eps_1q: 0.001, readout_flip: 0.02, alpha: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseChannel {
    White,
    Depolarize,
    Dephase,
    Device,
}

/// A noise model attached to a circuit run: a single state-level channel
/// (white/depolarize/dephase at strength `p`, applied once after the
/// circuit) or the per-gate device model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub channel: NoiseChannel,
    #[serde(default)]
    pub p: f64,
    #[serde(default)]
    pub device: Option<DeviceParams>,
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(QcmError::BadProbability(p));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Gate application
// ---------------------------------------------------------------------------

/// 2×2 unitary applied to `target` of a statevector.
fn sv_apply_1q(amps: &mut [Complex64], target: usize, u: &[[Complex64; 2]; 2]) {
    let m = 1usize << target;
    let n = amps.len();
    let mut base = 0;
    while base < n {
        for i0 in base..base + m {
            let i1 = i0 | m;
            let a0 = amps[i0];
            let a1 = amps[i1];
            amps[i0] = u[0][0] * a0 + u[0][1] * a1;
            amps[i1] = u[1][0] * a0 + u[1][1] * a1;
        }
        base += 2 * m;
    }
}

fn sv_apply_cnot(amps: &mut [Complex64], control: usize, target: usize) {
    let mc = 1usize << control;
    let mt = 1usize << target;
    for i in 0..amps.len() {
        // visit each swapped pair once: control set, target clear
        if i & mc != 0 && i & mt == 0 {
            amps.swap(i, i | mt);
        }
    }
}

/// eSWAP(θ): e^{−iθ/2} phase on |00⟩ and |11⟩ of the pair; the {|01⟩,|10⟩}
/// block mixes by [[cos, −i·sin],[−i·sin, cos]] (θ/2 throughout).
fn sv_apply_eswap(amps: &mut [Complex64], a: usize, b: usize, theta: f64) {
    let (ma, mb) = (1usize << a, 1usize << b);
    let half = 0.5 * theta;
    let (c, s) = (half.cos(), half.sin());
    let phase = Complex64::new(c, -s);
    let mis = Complex64::new(0.0, -s);
    for i in 0..amps.len() {
        let (ba, bb) = (i & ma != 0, i & mb != 0);
        if ba == bb {
            amps[i] *= phase;
        } else if ba {
            // pair (i with a set) ↔ (i with b set); handle once
            let j = (i & !ma) | mb;
            let (x, y) = (amps[i], amps[j]);
            amps[i] = Complex64::new(c, 0.0) * x + mis * y;
            amps[j] = mis * x + Complex64::new(c, 0.0) * y;
        }
    }
}

fn gate_matrix_1q(g: &Gate) -> Option<[[Complex64; 2]; 2]> {
    let inv_sqrt2 = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    match g {
        Gate::H(_) => Some([[inv_sqrt2, inv_sqrt2], [inv_sqrt2, -inv_sqrt2]]),
        Gate::X(_) => Some([[ZERO, ONE], [ONE, ZERO]]),
        Gate::Z(_) => Some([[ONE, ZERO], [ZERO, -ONE]]),
        Gate::Sdg(_) => Some([[ONE, ZERO], [ZERO, Complex64::new(0.0, -1.0)]]),
        _ => None,
    }
}

/// Applies one gate to either state kind. Density matrices transform as
/// ρ → UρU†: U on the row index (columns as vectors), then the conjugated
/// matrix on the column index (rows as vectors).
pub fn apply_gate(state: &mut QuantumState, g: &Gate) {
    match state {
        QuantumState::Statevector { amps, .. } => match g {
            Gate::Cnot { control, target } => sv_apply_cnot(amps, *control, *target),
            Gate::ESwap { a, b, theta, .. } => sv_apply_eswap(amps, *a, *b, *theta),
            _ => {
                let (t, _) = g.qubits();
                sv_apply_1q(amps, t, &gate_matrix_1q(g).expect("1q gate"));
            }
        },
        QuantumState::Density { rho, .. } => {
            let dim = isqrt(rho.len());
            // left-multiply U: each column is a statevector over the row index
            dm_columns_apply(rho, dim, g);
            // right-multiply U†: each row transforms by the conjugated matrix
            dm_rows_apply(rho, dim, g);
        }
    }
}

fn dm_columns_apply(rho: &mut [Complex64], dim: usize, g: &Gate) {
    let mut col: Vec<Complex64> = vec![ZERO; dim];
    for c in 0..dim {
        for r in 0..dim {
            col[r] = rho[r * dim + c];
        }
        match g {
            Gate::Cnot { control, target } => sv_apply_cnot(&mut col, *control, *target),
            Gate::ESwap { a, b, theta, .. } => sv_apply_eswap(&mut col, *a, *b, *theta),
            _ => {
                let (t, _) = g.qubits();
                sv_apply_1q(&mut col, t, &gate_matrix_1q(g).expect("1q gate"));
            }
        }
        for r in 0..dim {
            rho[r * dim + c] = col[r];
        }
    }
}

fn dm_rows_apply(rho: &mut [Complex64], dim: usize, g: &Gate) {
    for r in 0..dim {
        let row = &mut rho[r * dim..(r + 1) * dim];
        match g {
            // permutation matrices are self-conjugate
            Gate::Cnot { control, target } => sv_apply_cnot(row, *control, *target),
            Gate::ESwap { a, b, theta, .. } => {
                // conj(eSWAP(θ)) = eSWAP(−θ)
                sv_apply_eswap(row, *a, *b, -*theta);
            }
            _ => {
                let u = gate_matrix_1q(g).expect("1q gate");
                let uc = [[u[0][0].conj(), u[0][1].conj()], [u[1][0].conj(), u[1][1].conj()]];
                let (t, _) = g.qubits();
                sv_apply_1q(row, t, &uc);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Channels
// ---------------------------------------------------------------------------

fn require_density(s: &QuantumState) -> Result<(usize, usize)> {
    match s {
        QuantumState::Density { num_qubits, rho } => Ok((*num_qubits, isqrt(rho.len()))),
        _ => Err(QcmError::DimensionMismatch(s.num_qubits(), 0)),
    }
}

/// Global white noise ρ ↦ (1−p)ρ + p·I/2^q.
pub fn channel_global(s: &mut QuantumState, p: f64) -> Result<()> {
    check_probability(p)?;
    let (_, dim) = require_density(s)?;
    if let QuantumState::Density { rho, .. } = s {
        let keep = Complex64::new(1.0 - p, 0.0);
        let fill = p / dim as f64;
        for v in rho.iter_mut() {
            *v *= keep;
        }
        for r in 0..dim {
            rho[r * dim + r] += fill;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalKind {
    Depolarize,
    Dephase,
}

/// Applies the quoted single-qubit channel independently to every qubit:
/// depolarize ρ ↦ (1−3p/4)ρ + (p/4)(XρX+YρY+ZρZ), or dephase
/// ρ ↦ (1−p/2)ρ + (p/2)ZρZ.
pub fn channel_local(s: &mut QuantumState, p: f64, kind: LocalKind) -> Result<()> {
    check_probability(p)?;
    let (q, _) = require_density(s)?;
    for t in 0..q {
        channel_local_one(s, p, kind, t)?;
    }
    Ok(())
}

/// Single-qubit channel on one target. Elementwise on ρ[r,c]: with e the
/// target bit, XρX+YρY contributes 2ρ[r⊕e,c⊕e] when bit_r == bit_c and
/// cancels otherwise, and ZρZ gives ±ρ[r,c]; the depolarize update reduces to
///   equal bits:   (1−p/2)ρ[r,c] + (p/2)ρ[r⊕e,c⊕e]
///   unequal bits: (1−p)ρ[r,c]
pub fn channel_local_one(s: &mut QuantumState, p: f64, kind: LocalKind, target: usize) -> Result<()> {
    check_probability(p)?;
    let (_, dim) = require_density(s)?;
    let m = 1usize << target;
    if let QuantumState::Density { rho, .. } = s {
        match kind {
            LocalKind::Depolarize => {
                for r in 0..dim {
                    for c in 0..dim {
                        if (r ^ c) & m != 0 {
                            rho[r * dim + c] *= 1.0 - p;
                        } else if r & m == 0 {
                            // handle the (r,c) / (r|m, c|m) pair once
                            let i = r * dim + c;
                            let j = (r | m) * dim + (c | m);
                            let (x, y) = (rho[i], rho[j]);
                            rho[i] = (1.0 - 0.5 * p) * x + 0.5 * p * y;
                            rho[j] = (1.0 - 0.5 * p) * y + 0.5 * p * x;
                        }
                    }
                }
            }
            LocalKind::Dephase => {
                for r in 0..dim {
                    for c in 0..dim {
                        if (r ^ c) & m != 0 {
                            rho[r * dim + c] *= 1.0 - p;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Two-qubit depolarizing channel on a pair: ρ ↦ (1−p)ρ + p·(I₄/4 ⊗ tr_pair ρ),
/// the 16-Pauli twirl. Used per CNOT-equivalent in the device model.
pub fn channel_depolarize_pair(s: &mut QuantumState, p: f64, a: usize, b: usize) -> Result<()> {
    check_probability(p)?;
    let (_, dim) = require_density(s)?;
    let (ma, mb) = (1usize << a, 1usize << b);
    let pair = ma | mb;
    if let QuantumState::Density { rho, .. } = s {
        // pair marginal of the remaining qubits: σ[r̄,c̄] = Σ_m ρ[(m,r̄),(m,c̄)]
        let mut out = vec![ZERO; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                let i = r * dim + c;
                out[i] = (1.0 - p) * rho[i];
                if (r ^ c) & pair == 0 {
                    let (r0, c0) = (r & !pair, c & !pair);
                    let mut tr = ZERO;
                    for sub in [0, ma, mb, pair] {
                        tr += rho[(r0 | sub) * dim + (c0 | sub)];
                    }
                    out[i] += 0.25 * p * tr;
                }
            }
        }
        rho.copy_from_slice(&out);
    }
    Ok(())
}

/// State fidelity with a pure reference: |⟨φ₀|ψ⟩|² or ⟨φ₀|ρ|φ₀⟩.
pub fn fidelity(s: &QuantumState, phi0: &[Complex64]) -> Result<f64> {
    match s {
        QuantumState::Statevector { amps, .. } => {
            if amps.len() != phi0.len() {
                return Err(QcmError::DimensionMismatch(amps.len(), phi0.len()));
            }
            let ip: Complex64 = phi0.iter().zip(amps).map(|(a, b)| a.conj() * b).sum();
            Ok(ip.norm_sqr())
        }
        QuantumState::Density { rho, .. } => {
            let dim = isqrt(rho.len());
            if dim != phi0.len() {
                return Err(QcmError::DimensionMismatch(dim, phi0.len()));
            }
            let mut f = ZERO;
            for r in 0..dim {
                for c in 0..dim {
                    f += phi0[r].conj() * rho[r * dim + c] * phi0[c];
                }
            }
            Ok(f.re)
        }
    }
}

/// Symmetric per-bit readout error on a computational-basis distribution:
/// every bit flips independently with probability `flip`.
pub fn measure_readout_noise(probs: &[f64], flip: f64, num_qubits: usize) -> Result<Vec<f64>> {
    if !(0.0..=0.5).contains(&flip) || !flip.is_finite() {
        return Err(QcmError::BadFlipProbability(flip));
    }
    let mut out = probs.to_vec();
    for t in 0..num_qubits {
        let m = 1usize << t;
        for b in 0..out.len() {
            if b & m == 0 {
                let (p0, p1) = (out[b], out[b | m]);
                out[b] = (1.0 - flip) * p0 + flip * p1;
                out[b | m] = (1.0 - flip) * p1 + flip * p0;
            }
        }
    }
    Ok(out)
}

/// Runs a circuit on a state under an optional noise model.
///
/// With no noise the gates run directly on the input (statevector stays a
/// statevector). The `device` channel requires a density matrix and
/// interleaves per-gate depolarizing noise: rate α·eps_cx per
/// CNOT-equivalent (an eSWAP counts as three) and α·eps_1q after each
/// single-qubit gate. The state-level channels (white/depolarize/dephase)
/// run the circuit noiselessly, promote to a density matrix if needed, and
/// apply the channel once — readout error enters only at sampling time.
pub fn apply_circuit(c: &Circuit, s: &QuantumState, noise: Option<&NoiseSpec>) -> Result<QuantumState> {
    if c.num_qubits != s.num_qubits() {
        return Err(QcmError::QubitMismatch(c.num_qubits, s.num_qubits()));
    }
    c.check()?;
    match noise {
        None => {
            let mut out = s.clone();
            for g in &c.gates {
                apply_gate(&mut out, g);
            }
            Ok(out)
        }
        Some(spec) if spec.channel == NoiseChannel::Device => {
            let dev = spec.device.unwrap_or_default();
            check_probability(dev.alpha)?;
            let p2 = dev.alpha * dev.eps_cx;
            let p1 = dev.alpha * dev.eps_1q;
            check_probability(p2)?;
            check_probability(p1)?;
            let mut out = s.to_density()?;
            for g in &c.gates {
                apply_gate(&mut out, g);
                match g {
                    Gate::Cnot { control, target } => {
                        channel_depolarize_pair(&mut out, p2, *control, *target)?;
                    }
                    Gate::ESwap { a, b, .. } => {
                        for _ in 0..3 {
                            channel_depolarize_pair(&mut out, p2, *a, *b)?;
                        }
                    }
                    _ => {
                        let (t, _) = g.qubits();
                        channel_local_one(&mut out, p1, LocalKind::Depolarize, t)?;
                    }
                }
            }
            Ok(out)
        }
        Some(spec) => {
            let mut out = s.clone();
            for g in &c.gates {
                apply_gate(&mut out, g);
            }
            let mut out = out.to_density()?;
            match spec.channel {
                NoiseChannel::White => channel_global(&mut out, spec.p)?,
                NoiseChannel::Depolarize => channel_local(&mut out, spec.p, LocalKind::Depolarize)?,
                NoiseChannel::Dephase => channel_local(&mut out, spec.p, LocalKind::Dephase)?,
                NoiseChannel::Device => unreachable!(),
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::rvb_circuit;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    /// (|01⟩ − |10⟩)/√2 in |ab⟩ ket order, i.e. +1/√2 at index 2 (bit b set).
    fn singlet() -> Vec<Complex64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        vec![ZERO, Complex64::new(-s, 0.0), Complex64::new(s, 0.0), ZERO]
    }

    fn dm(state: &QuantumState) -> DMatrix<Complex64> {
        match state {
            QuantumState::Density { rho, .. } => {
                let dim = isqrt(rho.len());
                DMatrix::from_row_slice(dim, dim, rho)
            }
            _ => panic!("expected density matrix"),
        }
    }

    /// Random mixed 3-qubit state from a few seeded pure components.
    fn random_density(seed: u64) -> QuantumState {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dim = 8;
        let mut rho = vec![ZERO; dim * dim];
        let mut weights = [0.0; 3];
        for w in weights.iter_mut() {
            *w = rng.gen::<f64>();
        }
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        for &w in &weights {
            let mut psi: Vec<Complex64> = (0..dim)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let n: f64 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            for a in psi.iter_mut() {
                *a /= n;
            }
            for r in 0..dim {
                for c in 0..dim {
                    rho[r * dim + c] += w * psi[r] * psi[c].conj();
                }
            }
        }
        QuantumState::Density { num_qubits: 3, rho }
    }

    #[test]
    fn singlet_prep_produces_the_singlet() {
        let c = rvb_circuit(2, 0, &[]).unwrap();
        let out = apply_circuit(&c, &QuantumState::zero(2), None).unwrap();
        if let QuantumState::Statevector { amps, .. } = &out {
            let target = singlet();
            for (a, t) in amps.iter().zip(&target) {
                assert_relative_eq!(a.re, t.re, epsilon = 1e-12);
                assert_relative_eq!(a.im, t.im, epsilon = 1e-12);
            }
        } else {
            panic!("expected statevector");
        }
    }

    #[test]
    fn eswap_matrix_matches_cos_sin_form() {
        // build the 4×4 matrix column by column and compare with
        // cos(θ/2)·I − i·sin(θ/2)·SWAP
        let theta = 0.7313f64;
        let (cos, sin) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        for col in 0..4 {
            let mut amps = vec![ZERO; 4];
            amps[col] = ONE;
            sv_apply_eswap(&mut amps, 0, 1, theta);
            // SWAP on bits (0,1) of a 2-qubit index exchanges |01⟩ and |10⟩
            let swapped = [0usize, 2, 1, 3][col];
            for row in 0..4 {
                let mut want = ZERO;
                if row == col {
                    want += Complex64::new(cos, 0.0);
                }
                if row == swapped {
                    want += Complex64::new(0.0, -sin);
                }
                assert_relative_eq!(amps[row].re, want.re, epsilon = 1e-12);
                assert_relative_eq!(amps[row].im, want.im, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eswap_pi_swaps_up_to_phase() {
        let mut amps = vec![ZERO; 4];
        amps[1] = ONE; // |01⟩: qubit 0 set
        sv_apply_eswap(&mut amps, 0, 1, std::f64::consts::PI);
        assert!(amps[1].norm() < 1e-12);
        assert_relative_eq!(amps[2].norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gates_are_unitary() {
        let gates = [
            Gate::H(0),
            Gate::X(0),
            Gate::Z(0),
            Gate::Sdg(0),
            Gate::Cnot { control: 0, target: 1 },
            Gate::ESwap { a: 0, b: 1, theta: 1.234, slot: 0 },
        ];
        for g in gates {
            let dim = 4;
            let mut u = DMatrix::<Complex64>::zeros(dim, dim);
            for col in 0..dim {
                let mut amps = vec![ZERO; dim];
                amps[col] = ONE;
                let mut st = QuantumState::Statevector { num_qubits: 2, amps };
                apply_gate(&mut st, &g);
                if let QuantumState::Statevector { amps, .. } = st {
                    for row in 0..dim {
                        u[(row, col)] = amps[row];
                    }
                }
            }
            let err = (u.adjoint() * &u - DMatrix::<Complex64>::identity(dim, dim)).norm();
            assert!(err < 1e-12, "{g:?} not unitary: {err}");
        }
    }

    #[test]
    fn global_channel_mixes_toward_identity() {
        let mut s = QuantumState::zero(1).to_density().unwrap();
        channel_global(&mut s, 0.3).unwrap();
        if let QuantumState::Density { rho, .. } = &s {
            assert_relative_eq!(rho[0].re, 0.85, epsilon = 1e-15);
            assert_relative_eq!(rho[3].re, 0.15, epsilon = 1e-15);
        }
        channel_global(&mut s, 1.0).unwrap();
        if let QuantumState::Density { rho, .. } = &s {
            assert_relative_eq!(rho[0].re, 0.5, epsilon = 1e-15);
        }
        assert!(channel_global(&mut s, 1.5).is_err());
    }

    #[test]
    fn depolarize_p1_fully_mixes_and_dephase_kills_coherence() {
        let plus = QuantumState::from_amplitudes(
            1,
            vec![
                Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
                Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            ],
        )
        .unwrap();
        for kind in [LocalKind::Depolarize, LocalKind::Dephase] {
            let mut s = plus.to_density().unwrap();
            channel_local(&mut s, 1.0, kind).unwrap();
            if let QuantumState::Density { rho, .. } = &s {
                assert_relative_eq!(rho[0].re, 0.5, epsilon = 1e-12);
                assert!(rho[1].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn depolarized_singlet_fidelity_regression() {
        // 2-qubit singlet through per-qubit depolarize at p=0.2:
        // F = (1 + 3(1−p)²)/4 = 0.73 exactly.
        let p = 0.2;
        let sv = QuantumState::from_amplitudes(2, singlet()).unwrap();
        let mut s = sv.to_density().unwrap();
        channel_local(&mut s, p, LocalKind::Depolarize).unwrap();
        let f = fidelity(&s, &singlet()).unwrap();
        assert_relative_eq!(f, 0.73, epsilon = 1e-12);
        assert_relative_eq!(f, (1.0 + 3.0 * (1.0 - p) * (1.0 - p)) / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn one_qubit_depolarize_fidelity_is_one_minus_half_p() {
        let mut s = QuantumState::zero(1).to_density().unwrap();
        channel_local(&mut s, 0.3, LocalKind::Depolarize).unwrap();
        let f = fidelity(&s, &[ONE, ZERO]).unwrap();
        assert_relative_eq!(f, 1.0 - 0.15, epsilon = 1e-12);
    }

    #[test]
    fn channels_preserve_trace_and_positivity() {
        for seed in 0..5u64 {
            for apply in [
                |s: &mut QuantumState| channel_global(s, 0.37).unwrap(),
                |s: &mut QuantumState| channel_local(s, 0.41, LocalKind::Depolarize).unwrap(),
                |s: &mut QuantumState| channel_local(s, 0.29, LocalKind::Dephase).unwrap(),
                |s: &mut QuantumState| channel_depolarize_pair(s, 0.33, 0, 2).unwrap(),
            ] {
                let mut s = random_density(seed);
                let before = s.norm();
                apply(&mut s);
                assert_relative_eq!(s.norm(), before, epsilon = 1e-12);
                let m = dm(&s);
                let herm = (&m - m.adjoint()).norm();
                assert!(herm < 1e-12);
                let eigs = m.symmetric_eigenvalues();
                assert!(eigs.iter().all(|e| *e > -1e-9), "negative eigenvalue: {eigs:?}");
            }
        }
    }

    #[test]
    fn pair_depolarize_matches_pauli_twirl() {
        // (1/16)·Σ_P PρP over the 16 two-qubit Paulis replaces the pair
        // marginal with I/4; check against an explicit Kraus sum on 3 qubits.
        let s = random_density(7);
        let rho0 = dm(&s);
        let dim = 8;
        let paulis_1q: [DMatrix<Complex64>; 4] = [
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
            DMatrix::from_row_slice(
                2,
                2,
                &[ZERO, Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0), ZERO],
            ),
            DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        ];
        // twirl qubits 0 and 2 (bit 0 is the fastest index => rightmost kron factor)
        let p = 0.45;
        let mut twirl = DMatrix::<Complex64>::zeros(dim, dim);
        for pa in &paulis_1q {
            for pb in &paulis_1q {
                let op = pb.kronecker(&paulis_1q[0]).kronecker(pa);
                twirl += &op * &rho0 * op.adjoint();
            }
        }
        let want = rho0.scale(1.0 - p) + twirl.scale(p / 16.0);
        let mut s2 = s.clone();
        channel_depolarize_pair(&mut s2, p, 0, 2).unwrap();
        assert!((dm(&s2) - want).norm() < 1e-12);
    }

    #[test]
    fn readout_noise_examples() {
        let out = measure_readout_noise(&[0.9, 0.1], 0.02, 1).unwrap();
        assert_relative_eq!(out[0], 0.884, epsilon = 1e-15);
        assert_relative_eq!(out[1], 0.116, epsilon = 1e-15);
        let out = measure_readout_noise(&[0.9, 0.1], 0.5, 1).unwrap();
        assert_relative_eq!(out[0], 0.5, epsilon = 1e-15);
        let out = measure_readout_noise(&[1.0, 0.0, 0.0, 0.0], 0.0, 2).unwrap();
        assert_eq!(out, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(measure_readout_noise(&[1.0, 0.0], 0.6, 1).is_err());
    }

    #[test]
    fn alpha_zero_device_path_equals_noiseless() {
        let q = 4;
        let theta: Vec<f64> = (0..q).map(|i| 0.3 + 0.1 * i as f64).collect();
        let c = rvb_circuit(q, 1, &theta).unwrap();
        let pure = apply_circuit(&c, &QuantumState::zero(q), None).unwrap();
        let noise = NoiseSpec {
            channel: NoiseChannel::Device,
            p: 0.0,
            device: Some(DeviceParams { alpha: 0.0, ..Default::default() }),
        };
        let noisy = apply_circuit(&c, &QuantumState::zero(q), Some(&noise)).unwrap();
        let diff = (dm(&noisy) - dm(&pure.to_density().unwrap())).norm();
        assert!(diff < 1e-10, "trace-distance bound violated: {diff}");
        if let QuantumState::Statevector { amps, .. } = &pure {
            assert_relative_eq!(fidelity(&noisy, amps).unwrap(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn empty_circuit_is_identity() {
        let c = Circuit { num_qubits: 2, depth: 0, gates: vec![], params: vec![] };
        let s = QuantumState::from_amplitudes(2, singlet()).unwrap();
        let out = apply_circuit(&c, &s, None).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn density_cap_is_enforced() {
        assert!(QuantumState::zero(13).to_density().is_err());
        assert!(QuantumState::maximally_mixed(13).is_err());
    }
}
