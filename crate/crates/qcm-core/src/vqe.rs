//! Variational optimization of the RVB ansatz by adaptive Nelder–Mead.
//!
//! The objective E(θ) = ⟨0|U†(θ) H U(θ)|0⟩ is evaluated by noiseless
//! statevector simulation.  Nelder–Mead needs no gradients (the hardware
//! analogue would estimate E from shots) and the adaptive variant scales its
//! expansion/contraction/shrink coefficients with the dimension, which keeps
//! it usable up to the ≈100-parameter circuits deep rings need.
//!
//! Energy is 2π-periodic in every angle (a full period flips eSWAP's global
//! phase only), so the search runs unconstrained and angles are wrapped into
//! [0, 2π) for reporting.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{cnot_count, rvb_circuit, Circuit};
use crate::error::{QcmError, Result};
use crate::estimators::{estimate_report, EstimateReport, MomentSet};
use crate::hamiltonian::exact_ground;
use crate::pauli::{expectation_exact, moments_exact, power, PauliSum};
use crate::sim::{apply_circuit, QuantumState};

pub const MAX_DEPTH: usize = 7;

/// Stable 64-bit content id for a Hamiltonian (FNV-1a over the sorted term
/// list), used to key optimization archives.  Hand-rolled so ids never shift
/// with std hasher internals.
pub fn hamiltonian_id(h: &PauliSum) -> String {
    let mut acc: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |v: u64| {
        for b in v.to_le_bytes() {
            acc ^= b as u64;
            acc = acc.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(h.num_qubits() as u64);
    for t in h.sorted_terms() {
        eat(t.x);
        eat(t.z);
        eat(t.coeff.re.to_bits());
        eat(t.coeff.im.to_bits());
    }
    format!("{acc:016x}")
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OptimizeConfig {
    /// Per-restart iteration cap; `None` means 2000·D·q.
    pub max_iters: Option<usize>,
    /// Convergence threshold on the simplex diameter (∞-norm).
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig { max_iters: None, tol: 1e-7, restarts: 4, seed: 0 }
    }
}

/// Outcome of one optimization campaign (best of all restarts).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationRun {
    pub hamiltonian_id: String,
    pub d: usize,
    pub theta_star: Vec<f64>,
    pub energy_star: f64,
    /// Total Nelder–Mead iterations summed over restarts.
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    /// True iff the restart that produced `energy_star` hit `tol` within its
    /// iteration budget.
    pub converged: bool,
}

impl OptimizationRun {
    pub fn circuit(&self, q: usize) -> Result<Circuit> {
        rvb_circuit(q, self.d, &self.theta_star)
    }
}

fn rvb_energy(h: &PauliSum, d: usize, theta: &[f64]) -> Result<f64> {
    let c = rvb_circuit(h.num_qubits(), d, theta)?;
    let s = apply_circuit(&c, &QuantumState::zero(h.num_qubits()), None)?;
    expectation_exact(h, &s)
}

/// Minimizes E(θ) over the depth-`d` RVB family.
///
/// Runs `config.restarts` independent Nelder–Mead descents and keeps the
/// best.  When `warm_start` is given (typically θ* from depth d−1), the first
/// restart starts there, zero-padded to D·q — appended zeros are identity
/// eSWAPs, so the warm vertex reproduces the shallower circuit's energy
/// exactly and the best-vertex energy can only improve from it.  Remaining
/// restarts draw uniform angles from per-restart RNG streams.
pub fn optimize(
    h: &PauliSum,
    d: usize,
    config: &OptimizeConfig,
    warm_start: Option<&[f64]>,
) -> Result<OptimizationRun> {
    if !(1..=MAX_DEPTH).contains(&d) {
        return Err(QcmError::BadDepth(d, MAX_DEPTH));
    }
    let q = h.num_qubits();
    let n = d * q;
    if config.restarts == 0 {
        return Err(QcmError::ParameterLength(0, 1));
    }
    let warm = match warm_start {
        Some(t) if t.len() > n => return Err(QcmError::ParameterLength(t.len(), n)),
        Some(t) => {
            let mut v = t.to_vec();
            v.resize(n, 0.0);
            Some(v)
        }
        None => None,
    };
    let max_iters = config.max_iters.unwrap_or(2000 * n);

    let f = |theta: &[f64]| rvb_energy(h, d, theta);
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    let mut total_iters = 0;
    for r in 0..config.restarts {
        let x0 = match (&warm, r) {
            (Some(w), 0) => w.clone(),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(r as u64);
                (0..n).map(|_| rng.gen::<f64>() * TAU).collect()
            }
        };
        let out = nelder_mead(&f, &x0, max_iters, config.tol)?;
        total_iters += out.iterations;
        let better = best.as_ref().map_or(true, |(e, _, _)| out.energy < *e);
        if better {
            best = Some((out.energy, out.theta, out.converged));
        }
    }
    let (energy_star, theta, converged) = best.expect("restarts >= 1");
    Ok(OptimizationRun {
        hamiltonian_id: hamiltonian_id(h),
        d,
        theta_star: theta.iter().map(|t| t.rem_euclid(TAU)).collect(),
        energy_star,
        iterations: total_iters,
        restarts: config.restarts,
        seed: config.seed,
        converged,
    })
}

struct NmOutcome {
    energy: f64,
    theta: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Nelder–Mead with the dimension-adaptive coefficients of Gao & Han:
/// reflection 1, expansion 1 + 2/n, contraction 0.75 − 1/(2n), shrink
/// 1 − 1/n.  Stops when the simplex ∞-norm diameter falls below `tol`.
fn nelder_mead(
    f: &dyn Fn(&[f64]) -> Result<f64>,
    x0: &[f64],
    max_iters: usize,
    tol: f64,
) -> Result<NmOutcome> {
    let n = x0.len();
    let alpha = 1.0;
    let beta = 1.0 + 2.0 / n as f64;
    let gamma = 0.75 - 1.0 / (2.0 * n as f64);
    let delta = 1.0 - 1.0 / n as f64;
    const STEP: f64 = 0.3;

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for j in 0..n {
        let mut v = x0.to_vec();
        v[j] += STEP;
        simplex.push(v);
    }
    let mut fx: Vec<f64> = simplex.iter().map(|v| f(v)).collect::<Result<_>>()?;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fx[a].total_cmp(&fx[b]));
        let (lo, hi, second_hi) = (order[0], order[n], order[n - 1]);

        let diameter = (0..n)
            .map(|j| {
                simplex
                    .iter()
                    .map(|v| (v[j] - simplex[lo][j]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diameter < tol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| {
                order[..n].iter().map(|&i| simplex[i][j]).sum::<f64>() / n as f64
            })
            .collect();
        let toward = |from: &[f64], t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(from)
                .map(|(c, x)| c + t * (x - c))
                .collect()
        };

        let xr = toward(&simplex[hi], -alpha);
        let fr = f(&xr)?;
        if fr < fx[lo] {
            let xe = toward(&simplex[hi], -alpha * beta);
            let fe = f(&xe)?;
            if fe < fr {
                simplex[hi] = xe;
                fx[hi] = fe;
            } else {
                simplex[hi] = xr;
                fx[hi] = fr;
            }
        } else if fr < fx[second_hi] {
            simplex[hi] = xr;
            fx[hi] = fr;
        } else {
            let (xc, fc_ref) = if fr < fx[hi] {
                let xc = toward(&simplex[hi], -alpha * gamma);
                (xc, fr)
            } else {
                let xc = toward(&simplex[hi], gamma);
                (xc, fx[hi])
            };
            let fc = f(&xc)?;
            if fc < fc_ref {
                simplex[hi] = xc;
                fx[hi] = fc;
            } else {
                for &i in &order[1..] {
                    let shrunk: Vec<f64> = simplex[lo]
                        .iter()
                        .zip(&simplex[i])
                        .map(|(b, x)| b + delta * (x - b))
                        .collect();
                    fx[i] = f(&shrunk)?;
                    simplex[i] = shrunk;
                }
            }
        }
    }

    let best = (0..=n).min_by(|&a, &b| fx[a].total_cmp(&fx[b])).unwrap();
    Ok(NmOutcome {
        energy: fx[best],
        theta: simplex[best].clone(),
        iterations,
        converged,
    })
}

/// One depth of a warm-started depth sweep: the optimization outcome plus
/// all moment estimators evaluated at θ* (noiseless, exact moments).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub run: OptimizationRun,
    pub n_cx: usize,
    pub report: EstimateReport,
}

/// Optimizes depths 1..=d_max in sequence, warm-starting each depth from the
/// previous θ*.  Because the warm vertex reproduces the previous energy
/// exactly, energy_star is non-increasing in D by construction.  At every θ*
/// the full estimator set (variational, Lanczos-4, CMX-5, high-T benchmark)
/// is evaluated from exact moments with approximation errors vs the true
/// ground energy.
pub fn convergence_curve(
    h: &PauliSum,
    d_max: usize,
    config: &OptimizeConfig,
) -> Result<Vec<ConvergencePoint>> {
    if !(1..=MAX_DEPTH).contains(&d_max) {
        return Err(QcmError::BadDepth(d_max, MAX_DEPTH));
    }
    let (e0, _) = exact_ground(h)?;
    let powers: Vec<PauliSum> = (1..=4).map(|k| power(h, k)).collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(d_max);
    let mut warm: Option<Vec<f64>> = None;
    for d in 1..=d_max {
        let run = optimize(h, d, config, warm.as_deref())?;
        let circuit = run.circuit(h.num_qubits())?;
        let state = apply_circuit(&circuit, &QuantumState::zero(h.num_qubits()), None)?;
        let m = MomentSet::exact(moments_exact(h, &state, 5)?);
        let report = estimate_report(&m, &powers, Some(e0))?;
        warm = Some(run.theta_star.clone());
        out.push(ConvergencePoint { run, n_cx: cnot_count(&circuit), report });
    }
    Ok(out)
}
