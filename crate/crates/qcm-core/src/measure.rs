//! Tensor-product-basis (TPB) measurement: greedy grouping of Pauli strings
//! into qubit-wise-commuting families and shot-based moment estimation.
//!
//! Every string in a group is diagonal in one shared single-qubit basis per
//! qubit, so a group costs one measurement setting regardless of how many
//! strings it holds.  Moments of Hamiltonian powers are estimated by grouping
//! the union of all powers' strings once and reusing each string's sampled
//! expectation across every power it appears in, mirroring how the shots
//! would be spent on hardware.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::BuildHasherDefault;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::Gate;
use crate::error::{QcmError, Result};
use crate::estimators::MomentSet;
use crate::pauli::{PauliSum, PauliTerm};
use crate::sim::{apply_gate, measure_readout_noise, QuantumState};

/// One qubit-wise-commuting measurement family.
///
/// `set_x`/`set_z` record the basis chosen on each occupied qubit (X, Y or Z
/// encoded as the usual symplectic bit pair); `occupied` marks qubits where
/// some member acts non-trivially.  Unoccupied qubits have no constraint and
/// default to Z when the basis is printed.
#[derive(Debug, Clone)]
pub struct TpbGroup {
    pub set_x: u64,
    pub set_z: u64,
    pub occupied: u64,
    pub members: Vec<PauliTerm>,
}

impl TpbGroup {
    fn empty() -> Self {
        TpbGroup { set_x: 0, set_z: 0, occupied: 0, members: Vec::new() }
    }

    /// A string fits iff on every qubit that is both in its support and
    /// already occupied, its basis agrees with the group's.
    pub fn is_compatible(&self, x: u64, z: u64) -> bool {
        let clash = self.occupied & (x | z);
        (x ^ self.set_x) & clash == 0 && (z ^ self.set_z) & clash == 0
    }

    fn admit(&mut self, term: PauliTerm) {
        self.set_x |= term.x;
        self.set_z |= term.z;
        self.occupied |= term.x | term.z;
        self.members.push(term);
    }

    /// Measurement basis per qubit, e.g. "XZY"; unoccupied qubits print Z.
    pub fn basis_string(&self, num_qubits: usize) -> String {
        (0..num_qubits)
            .map(|i| {
                if self.occupied >> i & 1 == 0 {
                    return 'Z';
                }
                match (self.set_x >> i & 1, self.set_z >> i & 1) {
                    (1, 0) => 'X',
                    (1, 1) => 'Y',
                    _ => 'Z',
                }
            })
            .collect()
    }

    pub fn coeff_l1(&self) -> f64 {
        self.members.iter().map(|t| t.coeff.norm()).sum()
    }

    /// True iff every pair of members agrees qubit-by-qubit on shared support.
    pub fn is_qubitwise_commuting(&self) -> bool {
        self.members.iter().enumerate().all(|(i, a)| {
            let sa = a.x | a.z;
            self.members[i + 1..].iter().all(|b| {
                let shared = sa & (b.x | b.z);
                ((a.x ^ b.x) | (a.z ^ b.z)) & shared == 0
            })
        })
    }
}

/// Per-group line of the grouping export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSummary {
    pub basis_string: String,
    pub term_count: usize,
    pub coeff_l1: f64,
}

/// Result of greedy grouping: the identity string (if present) is split off
/// into `identity_coefficient` because it needs no measurement at all.
#[derive(Debug, Clone)]
pub struct TpbGrouping {
    pub num_qubits: usize,
    pub groups: Vec<TpbGroup>,
    pub identity_coefficient: f64,
}

impl TpbGrouping {
    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn total_members(&self) -> usize {
        self.groups.iter().map(|g| g.members.len()).sum()
    }

    pub fn is_qubitwise_commuting(&self) -> bool {
        self.groups.iter().all(TpbGroup::is_qubitwise_commuting)
    }

    pub fn summaries(&self) -> Vec<GroupSummary> {
        self.groups
            .iter()
            .map(|g| GroupSummary {
                basis_string: g.basis_string(self.num_qubits),
                term_count: g.members.len(),
                coeff_l1: g.coeff_l1(),
            })
            .collect()
    }
}

/// Greedy first-fit grouping.  Strings are visited by descending |coeff|
/// (ties broken by the (x, z) masks) and each joins the first existing group
/// it is compatible with, so heavy strings anchor the early groups.  The
/// outcome is deterministic and — unlike optimal clique covering — linear in
/// strings × groups.
pub fn group_tpb(h: &PauliSum) -> TpbGrouping {
    let mut items: Vec<PauliTerm> = h
        .sorted_terms()
        .into_iter()
        .filter(|t| !(t.x == 0 && t.z == 0))
        .collect();
    items.sort_by(|a, b| {
        b.coeff
            .norm()
            .total_cmp(&a.coeff.norm())
            .then(a.x.cmp(&b.x))
            .then(a.z.cmp(&b.z))
    });

    let mut groups: Vec<TpbGroup> = Vec::new();
    for term in items {
        match groups.iter_mut().find(|g| g.is_compatible(term.x, term.z)) {
            Some(g) => g.admit(term),
            None => {
                let mut g = TpbGroup::empty();
                g.admit(term);
                groups.push(g);
            }
        }
    }
    TpbGrouping {
        num_qubits: h.num_qubits(),
        groups,
        identity_coefficient: h.identity_coefficient(),
    }
}

/// Groups the union of several sums' strings (each distinct (x, z) once,
/// identity excluded), weighting each string by the sum of its |coeff| over
/// all inputs so the greedy pass favours strings that matter to any moment.
/// With Heisenberg-ring powers H¹..H⁴ the union equals the strings of H⁴, so
/// all four moments are measurable from this single grouping.
///
/// The members' stored coefficients are these union weights, not any single
/// input's coefficient; [`sample_moments`] reattaches each power's own
/// coefficients when assembling moments.
pub fn group_union(powers: &[PauliSum]) -> Result<TpbGrouping> {
    let first = powers.first().ok_or(QcmError::ParameterLength(0, 1))?;
    let q = first.num_qubits();
    for h in powers {
        if h.num_qubits() != q {
            return Err(QcmError::QubitMismatch(q, h.num_qubits()));
        }
    }
    let weighted = PauliSum::from_terms(
        q,
        powers.iter().flat_map(|h| {
            h.sorted_terms()
                .into_iter()
                .filter(|t| !(t.x == 0 && t.z == 0))
                .map(|t| (t.x, t.z, num_complex::Complex64::new(t.coeff.norm(), 0.0)))
        }),
    )?;
    let mut grouping = group_tpb(&weighted);
    grouping.identity_coefficient = 0.0;
    Ok(grouping)
}

/// Shot budget for one measurement setting; `seed` fans out to one
/// independent RNG stream per group, so results do not depend on the order
/// in which groups are processed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShotPlan {
    pub shots_per_group: usize,
    pub seed: u64,
}

/// Finite shots or the infinite-shot limit (exact contraction of the same
/// rotated probability distributions, including any readout noise).
#[derive(Debug, Clone, Copy)]
pub enum SamplingMode {
    Exact,
    Shots(ShotPlan),
}

type EstimateMap = HashMap<(u64, u64), (f64, f64), BuildHasherDefault<DefaultHasher>>;

/// Estimates m_k = ⟨H^k⟩ for the given powers from TPB measurements of
/// `state`.
///
/// The union of all powers' strings is grouped once; each group's qubits are
/// rotated into its shared basis (X via H, Y via S† then H), the outcome
/// distribution optionally passes through symmetric readout flips, and every
/// member string's expectation becomes a parity average over the sampled
/// counts.  Each string is measured once and reused across powers — moments
/// therefore share shot noise exactly as they would on hardware.  Identity
/// contributions are added exactly (they cost nothing to "measure").
///
/// With `SamplingMode::Shots` the returned set carries per-moment standard
/// errors: σ²(m_k) = Σ_t c_{k,t}²·(1 − ê_t²)/S, the plug-in binomial variance
/// summed as if member estimates were independent.  Covariances between
/// strings sharing a group are deliberately ignored, matching common
/// experimental error-bar practice.
pub fn sample_moments(
    powers: &[PauliSum],
    state: &QuantumState,
    mode: &SamplingMode,
    readout_flip: Option<f64>,
) -> Result<MomentSet> {
    let grouping = group_union(powers)?;
    let q = grouping.num_qubits;
    if q != state.num_qubits() {
        return Err(QcmError::QubitMismatch(q, state.num_qubits()));
    }
    if let SamplingMode::Shots(plan) = mode {
        if plan.shots_per_group == 0 {
            return Err(QcmError::ZeroShots);
        }
    }

    let mut estimates = EstimateMap::default();
    for (gi, group) in grouping.groups.iter().enumerate() {
        let mut rotated = state.clone();
        for i in 0..q {
            match (group.set_x >> i & 1, group.set_z >> i & 1) {
                (1, 0) => apply_gate(&mut rotated, &Gate::H(i)),
                (1, 1) => {
                    apply_gate(&mut rotated, &Gate::Sdg(i));
                    apply_gate(&mut rotated, &Gate::H(i));
                }
                _ => {}
            }
        }
        let mut probs = rotated.probabilities();
        if let Some(flip) = readout_flip {
            probs = measure_readout_noise(&probs, flip, q)?;
        }

        match mode {
            SamplingMode::Exact => {
                for m in &group.members {
                    let support = m.x | m.z;
                    let e: f64 = probs
                        .iter()
                        .enumerate()
                        .map(|(b, &p)| p * parity_sign(b as u64, support))
                        .sum();
                    estimates.insert((m.x, m.z), (e, 0.0));
                }
            }
            SamplingMode::Shots(plan) => {
                let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
                rng.set_stream(gi as u64);
                let counts = sample_counts(&probs, plan.shots_per_group, &mut rng);
                let shots = plan.shots_per_group as f64;
                for m in &group.members {
                    let support = m.x | m.z;
                    let sum: f64 = counts
                        .iter()
                        .enumerate()
                        .filter(|&(_, &c)| c > 0)
                        .map(|(b, &c)| c as f64 * parity_sign(b as u64, support))
                        .sum();
                    let mean = sum / shots;
                    let var = (1.0 - mean * mean).max(0.0) / shots;
                    estimates.insert((m.x, m.z), (mean, var));
                }
            }
        }
    }

    let mut values = Vec::with_capacity(powers.len());
    let mut std_errs = Vec::with_capacity(powers.len());
    for h in powers {
        let mut m = h.identity_coefficient();
        let mut imag = 0.0;
        let mut var = 0.0;
        for t in h.sorted_terms() {
            if t.x == 0 && t.z == 0 {
                continue;
            }
            let &(e, v) = estimates
                .get(&(t.x, t.z))
                .expect("union grouping covers every non-identity string");
            m += t.coeff.re * e;
            imag += t.coeff.im * e;
            var += t.coeff.re * t.coeff.re * v;
        }
        if imag.abs() > 1e-9 {
            return Err(QcmError::NotHermitian(imag));
        }
        values.push(m);
        std_errs.push(var.sqrt());
    }
    Ok(match mode {
        SamplingMode::Exact => MomentSet::exact(values),
        SamplingMode::Shots(_) => MomentSet::with_errs(values, std_errs),
    })
}

fn parity_sign(b: u64, support: u64) -> f64 {
    if (b & support).count_ones() & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Draws `shots` outcomes by inverse-CDF sampling and returns per-outcome
/// counts.  Ties at CDF plateaus (zero-probability states) are skipped by
/// `partition_point`, so impossible outcomes are never drawn.
fn sample_counts(probs: &[f64], shots: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut cum = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p;
        cum.push(acc);
    }
    let total = acc;
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..shots {
        let u: f64 = rng.gen::<f64>() * total;
        let idx = cum.partition_point(|&c| c <= u).min(probs.len() - 1);
        counts[idx] += 1;
    }
    counts
}
