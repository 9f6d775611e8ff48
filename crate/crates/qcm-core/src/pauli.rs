//! Exact symbolic algebra over weighted sums of Pauli strings.
//!
//! A Pauli string on q ≤ 64 qubits is encoded symplectically as a pair of
//! bit masks (x, z) with the qubit-i operator read from bit i of each:
//! (0,0) → I, (1,0) → X, (0,1) → Z, (1,1) → Y. The represented operator is
//!
//!   W(x, z) = i^{|x∧z|} · X^x · Z^z,
//!
//! which is Hermitian for every mask pair (the i^{|x∧z|} prefactor turns
//! each XZ into Y). Acting on a computational basis state,
//! W(x,z)|b⟩ = i^{|x∧z|} (−1)^{|b∧z|} |b⊕x⟩, so products, expectations, and
//! matrix-free applications are all XOR-and-popcount loops.

use std::collections::hash_map::{DefaultHasher, Entry};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::BuildHasherDefault;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QcmError, Result};
use crate::sim::QuantumState;

/// Coefficients at or below this magnitude are dropped after merging, so
/// floating error from repeated products cannot inflate term counts.
pub const PRUNE_EPS: f64 = 1e-12;

/// Left chunk size for the parallel product; fixed (not thread-derived) so
/// partial-sum boundaries — and therefore floating-point results — do not
/// depend on the thread count.
const MUL_CHUNK: usize = 512;

const I_POW: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

/// Deterministic hasher: identical insertions give identical layouts across
/// runs, unlike the default randomized `RandomState`.
type TermMap = HashMap<(u64, u64), Complex64, BuildHasherDefault<DefaultHasher>>;

/// One weighted Pauli string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliTerm {
    pub x: u64,
    pub z: u64,
    pub coeff: Complex64,
}

impl PauliTerm {
    /// Renders the string with qubit 0 leftmost, e.g. "XYIZ".
    pub fn label(&self, num_qubits: usize) -> String {
        let mut s = String::with_capacity(num_qubits);
        for i in 0..num_qubits {
            let (xb, zb) = (self.x >> i & 1, self.z >> i & 1);
            s.push(match (xb, zb) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (1, 1) => 'Y',
                (0, 1) => 'Z',
                _ => unreachable!(),
            });
        }
        s
    }
}

/// Product of two Pauli strings: W(x1,z1)·W(x2,z2) = i^g · W(x3,z3).
///
/// Writing both sides in X^x Z^z normal order and counting the i factors:
/// each input contributes |x∧z| from its own prefactor, commuting Z^{z1}
/// past X^{x2} contributes (−1)^{|z1∧x2|} = i^{2|z1∧x2|}, and the output
/// prefactor removes |x3∧z3|.
#[inline]
fn mul_masks(x1: u64, z1: u64, x2: u64, z2: u64) -> (u64, u64, u8) {
    let x3 = x1 ^ x2;
    let z3 = z1 ^ z2;
    let g = (x1 & z1).count_ones() as i32 + (x2 & z2).count_ones() as i32
        - (x3 & z3).count_ones() as i32
        + 2 * (z1 & x2).count_ones() as i32;
    (x3, z3, g.rem_euclid(4) as u8)
}

/// A weighted sum of Pauli strings with like terms merged.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "PauliSumJson", try_from = "PauliSumJson")]
pub struct PauliSum {
    num_qubits: usize,
    terms: TermMap,
}

impl PauliSum {
    pub fn new(num_qubits: usize) -> Self {
        PauliSum { num_qubits, terms: TermMap::default() }
    }

    /// Builds a sum from raw (x, z, coeff) triples, merging duplicates.
    /// Contributions are sorted before summation so any permutation of the
    /// input yields bit-identical coefficients.
    pub fn from_terms(
        num_qubits: usize,
        it: impl IntoIterator<Item = (u64, u64, Complex64)>,
    ) -> Result<Self> {
        let mask_ok = if num_qubits >= 64 { u64::MAX } else { (1u64 << num_qubits) - 1 };
        let mut raw: Vec<(u64, u64, Complex64)> = it.into_iter().collect();
        for &(x, z, _) in &raw {
            if x & !mask_ok != 0 || z & !mask_ok != 0 {
                return Err(QcmError::MaskOutOfRange(num_qubits));
            }
        }
        raw.sort_by_key(|&(x, z, c)| (x, z, c.re.to_bits(), c.im.to_bits()));
        let mut terms = TermMap::default();
        for (x, z, c) in raw {
            *terms.entry((x, z)).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        let mut sum = PauliSum { num_qubits, terms };
        sum.prune(PRUNE_EPS);
        Ok(sum)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of a specific mask pair (0 if absent).
    pub fn coeff(&self, x: u64, z: u64) -> Complex64 {
        self.terms.get(&(x, z)).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Coefficient of the all-identity string, equal to tr(A)/2^q since
    /// every other Pauli string is traceless.
    pub fn identity_coefficient(&self) -> f64 {
        self.coeff(0, 0).re
    }

    /// Drops terms with |coeff| ≤ eps.
    pub fn prune(&mut self, eps: f64) {
        self.terms.retain(|_, c| c.norm() > eps);
    }

    /// Largest |Im coeff| — zero (to rounding) for Hermitian sums.
    pub fn max_imag(&self) -> f64 {
        self.terms.values().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    /// Terms in canonical (x, z) order.
    pub fn sorted_terms(&self) -> Vec<PauliTerm> {
        let mut v: Vec<PauliTerm> = self
            .terms
            .iter()
            .map(|(&(x, z), &coeff)| PauliTerm { x, z, coeff })
            .collect();
        v.sort_by_key(|t| (t.x, t.z));
        v
    }

    /// One term per line, "coeff pauli_string" with qubit 0 leftmost.
    /// Coefficients are written as reals — callers should only use this for
    /// Hermitian sums (the JSON form keeps full complex weight).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in self.sorted_terms() {
            let _ = writeln!(out, "{} {}", t.coeff.re, t.label(self.num_qubits));
        }
        out
    }

    /// Parses the `to_text` format; blank lines and `#` comments allowed.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut triples = Vec::new();
        let mut num_qubits = 0;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (cs, ps) = match (parts.next(), parts.next()) {
                (Some(c), Some(p)) => (c, p),
                _ => return Err(QcmError::Parse(format!("line {}: expected 'coeff string'", ln + 1))),
            };
            let coeff: f64 = cs
                .parse()
                .map_err(|e| QcmError::Parse(format!("line {}: bad coefficient: {e}", ln + 1)))?;
            if num_qubits == 0 {
                num_qubits = ps.len();
            } else if ps.len() != num_qubits {
                return Err(QcmError::Parse(format!("line {}: inconsistent string length", ln + 1)));
            }
            let (mut x, mut z) = (0u64, 0u64);
            for (i, ch) in ps.chars().enumerate() {
                match ch {
                    'I' => {}
                    'X' => x |= 1 << i,
                    'Y' => {
                        x |= 1 << i;
                        z |= 1 << i;
                    }
                    'Z' => z |= 1 << i,
                    _ => return Err(QcmError::Parse(format!("line {}: bad Pauli char '{ch}'", ln + 1))),
                }
            }
            triples.push((x, z, Complex64::new(coeff, 0.0)));
        }
        PauliSum::from_terms(num_qubits, triples)
    }
}

#[derive(Serialize, Deserialize, Clone)]
struct TermJson {
    x: u64,
    z: u64,
    re: f64,
    #[serde(default)]
    im: f64,
}

/// JSON mirror: `{ "q": n, "terms": [{x, z, re, im}, …] }` in canonical order.
#[derive(Serialize, Deserialize, Clone)]
struct PauliSumJson {
    q: usize,
    terms: Vec<TermJson>,
}

impl From<PauliSum> for PauliSumJson {
    fn from(s: PauliSum) -> Self {
        let terms = s
            .sorted_terms()
            .into_iter()
            .map(|t| TermJson { x: t.x, z: t.z, re: t.coeff.re, im: t.coeff.im })
            .collect();
        PauliSumJson { q: s.num_qubits, terms }
    }
}

impl TryFrom<PauliSumJson> for PauliSum {
    type Error = QcmError;
    fn try_from(j: PauliSumJson) -> Result<Self> {
        PauliSum::from_terms(
            j.q,
            j.terms.into_iter().map(|t| (t.x, t.z, Complex64::new(t.re, t.im))),
        )
    }
}

/// Exact operator product with like terms merged and tiny coefficients
/// pruned. The term-pair loop is partitioned into fixed-size chunks mapped
/// in parallel and merged in chunk order, so results are identical for any
/// thread count.
pub fn multiply(a: &PauliSum, b: &PauliSum) -> Result<PauliSum> {
    if a.num_qubits != b.num_qubits {
        return Err(QcmError::QubitMismatch(a.num_qubits, b.num_qubits));
    }
    let left = a.sorted_terms();
    let right = b.sorted_terms();
    let partials: Vec<TermMap> = left
        .par_chunks(MUL_CHUNK)
        .map(|chunk| {
            let mut local = TermMap::default();
            for t1 in chunk {
                for t2 in &right {
                    let (x3, z3, g) = mul_masks(t1.x, t1.z, t2.x, t2.z);
                    let c = t1.coeff * t2.coeff * I_POW[g as usize];
                    *local.entry((x3, z3)).or_insert(Complex64::new(0.0, 0.0)) += c;
                }
            }
            local
        })
        .collect();
    let mut terms = TermMap::default();
    for local in partials {
        let mut entries: Vec<((u64, u64), Complex64)> = local.into_iter().collect();
        entries.sort_by_key(|&((x, z), _)| (x, z));
        for (k, v) in entries {
            match terms.entry(k) {
                Entry::Occupied(mut e) => *e.get_mut() += v,
                Entry::Vacant(e) => {
                    e.insert(v);
                }
            }
        }
    }
    let mut out = PauliSum { num_qubits: a.num_qubits, terms };
    out.prune(PRUNE_EPS);
    Ok(out)
}

/// Exact H^n by repeated multiplication (H² → H³ → …) with intermediate
/// merging — smaller intermediates and reproducible counts compared with
/// squaring. Supports n = 1..=5.
///
/// Term-count convention: the identity string, once produced (n ≥ 2 for
/// traceless H), is a term like any other and is included in
/// `term_count()`. The 20-qubit uniform-ring benchmark count 282,796 for n=4
/// is reproduced under this identity-inclusive convention.
pub fn power(h: &PauliSum, n: usize) -> Result<PauliSum> {
    if !(1..=5).contains(&n) {
        return Err(QcmError::BadPower(n, 5));
    }
    let mut p = h.clone();
    for _ in 1..n {
        p = multiply(&p, h)?;
    }
    Ok(p)
}

/// H|ψ⟩ for a statevector, applying each term as an XOR/popcount loop.
pub fn apply_to_statevector(h: &PauliSum, amps: &[Complex64]) -> Result<Vec<Complex64>> {
    let dim = 1usize << h.num_qubits;
    if amps.len() != dim {
        return Err(QcmError::DimensionMismatch(h.num_qubits, amps.len()));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    for (&(x, z), &coeff) in &h.terms {
        let phase = I_POW[((x & z).count_ones() & 3) as usize] * coeff;
        for b in 0..dim {
            let sign = if ((b as u64) & z).count_ones() & 1 == 0 { 1.0 } else { -1.0 };
            out[b ^ x as usize] += phase * sign * amps[b];
        }
    }
    Ok(out)
}

/// Exact ⟨h⟩: ⟨ψ|h|ψ⟩ for statevectors, tr(ρh) for density matrices.
/// An imaginary part above 1e-9 is reported as an error — it signals a
/// non-Hermitian sum.
pub fn expectation_exact(h: &PauliSum, s: &QuantumState) -> Result<f64> {
    if h.num_qubits != s.num_qubits() {
        return Err(QcmError::DimensionMismatch(h.num_qubits, s.num_qubits()));
    }
    let dim = 1usize << h.num_qubits;
    let mut total = Complex64::new(0.0, 0.0);
    match s {
        QuantumState::Statevector { amps, .. } => {
            // ⟨ψ|W|ψ⟩ = Σ_b conj(ψ[b⊕x]) · i^{|x∧z|} (−1)^{|b∧z|} · ψ[b]
            for (&(x, z), &coeff) in &h.terms {
                let phase = I_POW[((x & z).count_ones() & 3) as usize];
                let mut acc = Complex64::new(0.0, 0.0);
                for b in 0..dim {
                    let sign = if ((b as u64) & z).count_ones() & 1 == 0 { 1.0 } else { -1.0 };
                    acc += amps[b ^ x as usize].conj() * sign * amps[b];
                }
                total += coeff * phase * acc;
            }
        }
        QuantumState::Density { rho, .. } => {
            // tr(ρW) = Σ_b ρ[b, b⊕x] · i^{|x∧z|} (−1)^{|b∧z|}
            for (&(x, z), &coeff) in &h.terms {
                let phase = I_POW[((x & z).count_ones() & 3) as usize];
                let mut acc = Complex64::new(0.0, 0.0);
                for b in 0..dim {
                    let sign = if ((b as u64) & z).count_ones() & 1 == 0 { 1.0 } else { -1.0 };
                    acc += sign * rho[b * dim + (b ^ x as usize)];
                }
                total += coeff * phase * acc;
            }
        }
    }
    if total.im.abs() > 1e-9 {
        return Err(QcmError::NotHermitian(total.im));
    }
    Ok(total.re)
}

/// Exact moments ⟨h^k⟩ for k = 1..=k_max without forming h^k symbolically:
/// statevectors use the Krylov chain ψ_j = h^j ψ and Hermitian pairings
/// (m_{2j} = ⟨ψ_j|ψ_j⟩, m_{2j+1} = ⟨ψ_j|ψ_{j+1}⟩); density matrices apply
/// the chain column-by-column and accumulate tr(ρ h^k).
pub fn moments_exact(h: &PauliSum, s: &QuantumState, k_max: usize) -> Result<Vec<f64>> {
    if !(1..=5).contains(&k_max) {
        return Err(QcmError::BadPower(k_max, 5));
    }
    if h.num_qubits != s.num_qubits() {
        return Err(QcmError::DimensionMismatch(h.num_qubits, s.num_qubits()));
    }
    let dim = 1usize << h.num_qubits;
    let mut out = Vec::with_capacity(k_max);
    match s {
        QuantumState::Statevector { amps, .. } => {
            let mut chain: Vec<Vec<Complex64>> = vec![amps.clone()];
            for _ in 0..k_max.div_ceil(2) {
                let next = apply_to_statevector(h, chain.last().unwrap())?;
                chain.push(next);
            }
            for k in 1..=k_max {
                let (i, j) = (k / 2, k.div_ceil(2));
                let m: Complex64 =
                    chain[i].iter().zip(&chain[j]).map(|(a, b)| a.conj() * b).sum();
                if m.im.abs() > 1e-9 {
                    return Err(QcmError::NotHermitian(m.im));
                }
                out.push(m.re);
            }
        }
        QuantumState::Density { rho, .. } => {
            let mut acc = vec![Complex64::new(0.0, 0.0); k_max];
            let mut col = vec![Complex64::new(0.0, 0.0); dim];
            for c in 0..dim {
                for r in 0..dim {
                    col[r] = rho[r * dim + c];
                }
                let mut v = col.clone();
                for m in acc.iter_mut() {
                    v = apply_to_statevector(h, &v)?;
                    *m += v[c];
                }
            }
            for m in acc {
                if m.im.abs() > 1e-9 {
                    return Err(QcmError::NotHermitian(m.im));
                }
                out.push(m.re);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    const ZERO_C: Complex64 = Complex64::new(0.0, 0.0);
    const ONE_C: Complex64 = Complex64::new(1.0, 0.0);

    /// Dense matrix of W(x,z) from W|b⟩ = i^{|x∧z|}(−1)^{|b∧z|}|b⊕x⟩.
    fn term_matrix(x: u64, z: u64, q: usize) -> DMatrix<Complex64> {
        let dim = 1usize << q;
        let phase = I_POW[((x & z).count_ones() & 3) as usize];
        let mut m = DMatrix::zeros(dim, dim);
        for b in 0..dim {
            let sign = if ((b as u64) & z).count_ones() & 1 == 0 { 1.0 } else { -1.0 };
            m[(b ^ x as usize, b)] = phase * sign;
        }
        m
    }

    fn dense(h: &PauliSum) -> DMatrix<Complex64> {
        let dim = 1usize << h.num_qubits();
        let mut m = DMatrix::zeros(dim, dim);
        for t in h.sorted_terms() {
            m += term_matrix(t.x, t.z, h.num_qubits()).scale(1.0) * t.coeff;
        }
        m
    }

    fn single(q: usize, x: u64, z: u64) -> PauliSum {
        PauliSum::from_terms(q, [(x, z, ONE_C)]).unwrap()
    }

    fn heisenberg_2q() -> PauliSum {
        let c = Complex64::new(0.125, 0.0);
        PauliSum::from_terms(2, [(3, 0, c), (3, 3, c), (0, 3, c)]).unwrap()
    }

    #[test]
    fn single_qubit_products_match_pauli_group() {
        // X·Y = iZ
        let xy = multiply(&single(1, 1, 0), &single(1, 1, 1)).unwrap();
        assert_eq!(xy.term_count(), 1);
        assert_relative_eq!(xy.coeff(0, 1).im, 1.0, epsilon = 1e-15);
        // Y·X = −iZ
        let yx = multiply(&single(1, 1, 1), &single(1, 1, 0)).unwrap();
        assert_relative_eq!(yx.coeff(0, 1).im, -1.0, epsilon = 1e-15);
        // X·Z = −iY
        let xz = multiply(&single(1, 1, 0), &single(1, 0, 1)).unwrap();
        assert_relative_eq!(xz.coeff(1, 1).im, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn all_single_qubit_products_match_dense() {
        for (x1, z1) in [(0u64, 0u64), (1, 0), (1, 1), (0, 1)] {
            for (x2, z2) in [(0u64, 0u64), (1, 0), (1, 1), (0, 1)] {
                let prod = multiply(&single(1, x1, z1), &single(1, x2, z2)).unwrap();
                let want = term_matrix(x1, z1, 1) * term_matrix(x2, z2, 1);
                assert!((dense(&prod) - want).norm() < 1e-14, "({x1},{z1})·({x2},{z2})");
            }
        }
    }

    #[test]
    fn two_qubit_string_product() {
        // (X₀X₁)·(Y₀Y₁) = (iZ)(iZ) = −Z₀Z₁
        let prod = multiply(&single(2, 3, 0), &single(2, 3, 3)).unwrap();
        assert_eq!(prod.term_count(), 1);
        assert_relative_eq!(prod.coeff(0, 3).re, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn heisenberg_edge_square() {
        // H² for the 2-qubit edge: (3/64)·I − (2/64)(XX+YY+ZZ)
        let h = heisenberg_2q();
        let h2 = power(&h, 2).unwrap();
        assert_eq!(h2.term_count(), 4);
        assert_relative_eq!(h2.coeff(0, 0).re, 3.0 / 64.0, epsilon = 1e-15);
        for (x, z) in [(3, 0), (3, 3), (0, 3)] {
            assert_relative_eq!(h2.coeff(x, z).re, -2.0 / 64.0, epsilon = 1e-15);
        }
        assert_relative_eq!(h2.identity_coefficient(), 3.0 / 64.0, epsilon = 1e-15);
    }

    #[test]
    fn identity_coefficient_examples() {
        let h = heisenberg_2q();
        assert_eq!(h.identity_coefficient(), 0.0);
        let id = PauliSum::from_terms(3, [(0, 0, ONE_C)]).unwrap();
        assert_eq!(id.identity_coefficient(), 1.0);
        // equals tr/2^q against the dense oracle
        let h2 = power(&h, 2).unwrap();
        let tr: Complex64 = dense(&h2).diagonal().iter().sum();
        assert_relative_eq!(h2.identity_coefficient() * 4.0, tr.re, epsilon = 1e-12);
    }

    #[test]
    fn power_validates_range() {
        let h = heisenberg_2q();
        assert!(power(&h, 0).is_err());
        assert!(power(&h, 6).is_err());
        let p1 = power(&h, 1).unwrap();
        assert_eq!(p1.sorted_terms(), h.sorted_terms());
    }

    #[test]
    fn expectation_basics() {
        let z0 = single(1, 0, 1);
        let zero = QuantumState::zero(1);
        assert_relative_eq!(expectation_exact(&z0, &zero).unwrap(), 1.0, epsilon = 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = QuantumState::from_amplitudes(
            1,
            vec![Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
        )
        .unwrap();
        assert_relative_eq!(expectation_exact(&z0, &plus).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn singlet_energy_of_heisenberg_edge() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let singlet = QuantumState::from_amplitudes(
            2,
            vec![ZERO_C, Complex64::new(-s, 0.0), Complex64::new(s, 0.0), ZERO_C],
        )
        .unwrap();
        let h = heisenberg_2q();
        assert_relative_eq!(expectation_exact(&h, &singlet).unwrap(), -0.375, epsilon = 1e-12);
        // density-matrix route agrees
        let rho = singlet.to_density().unwrap();
        assert_relative_eq!(expectation_exact(&h, &rho).unwrap(), -0.375, epsilon = 1e-12);
    }

    #[test]
    fn moments_match_symbolic_powers() {
        let h = heisenberg_2q();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let st = QuantumState::from_amplitudes(
            2,
            vec![Complex64::new(s, 0.0), ZERO_C, ZERO_C, Complex64::new(s, 0.0)],
        )
        .unwrap();
        let m = moments_exact(&h, &st, 5).unwrap();
        for (k, mk) in m.iter().enumerate() {
            let hk = power(&h, k + 1).unwrap();
            assert_relative_eq!(*mk, expectation_exact(&hk, &st).unwrap(), epsilon = 1e-12);
        }
        let rho = st.to_density().unwrap();
        let md = moments_exact(&h, &rho, 5).unwrap();
        for (a, b) in m.iter().zip(&md) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn text_roundtrip() {
        let h = heisenberg_2q();
        let text = h.to_text();
        assert!(text.contains("XX"));
        let back = PauliSum::parse_text(&text).unwrap();
        assert_eq!(back.num_qubits(), 2);
        assert_eq!(back.sorted_terms(), h.sorted_terms());
        assert!(PauliSum::parse_text("0.5 XQ").is_err());
    }

    #[test]
    fn json_roundtrip() {
        let h = power(&heisenberg_2q(), 2).unwrap();
        let s = serde_json::to_string(&h).unwrap();
        let back: PauliSum = serde_json::from_str(&s).unwrap();
        assert_eq!(back.sorted_terms(), h.sorted_terms());
    }

    #[test]
    fn mask_range_is_checked() {
        assert!(PauliSum::from_terms(2, [(4u64, 0u64, ONE_C)]).is_err());
        assert!(PauliSum::from_terms(2, [(0u64, 8u64, ONE_C)]).is_err());
    }

    #[test]
    fn qubit_mismatch_is_an_error() {
        assert!(multiply(&single(1, 1, 0), &single(2, 1, 0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// multiply agrees with dense matrix arithmetic on ≤5 qubits.
        #[test]
        fn product_matches_dense(
            terms_a in proptest::collection::vec((0u64..32, 0u64..32, -2.0f64..2.0), 1..6),
            terms_b in proptest::collection::vec((0u64..32, 0u64..32, -2.0f64..2.0), 1..6),
        ) {
            let q = 5;
            let a = PauliSum::from_terms(q, terms_a.iter().map(|&(x, z, c)| (x, z, Complex64::new(c, 0.0)))).unwrap();
            let b = PauliSum::from_terms(q, terms_b.iter().map(|&(x, z, c)| (x, z, Complex64::new(c, 0.0)))).unwrap();
            let prod = multiply(&a, &b).unwrap();
            let want = dense(&a) * dense(&b);
            prop_assert!((dense(&prod) - want).norm() < 1e-10);
        }

        /// Merging is order-independent: shuffled input gives identical terms.
        #[test]
        fn merge_order_independent(
            terms in proptest::collection::vec((0u64..16, 0u64..16, -1.0f64..1.0), 2..10),
            seed in 0u64..1000,
        ) {
            let q = 4;
            let fwd = PauliSum::from_terms(q, terms.iter().map(|&(x, z, c)| (x, z, Complex64::new(c, 0.0)))).unwrap();
            // deterministic shuffle
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = terms.clone();
            shuffled.shuffle(&mut rng);
            let rev = PauliSum::from_terms(q, shuffled.iter().map(|&(x, z, c)| (x, z, Complex64::new(c, 0.0)))).unwrap();
            prop_assert_eq!(fwd.sorted_terms(), rev.sorted_terms());
        }

        /// H^4 of a random real Hermitian sum has real coefficients, and its
        /// identity coefficient matches the dense trace.
        #[test]
        fn powers_stay_real_and_match_trace(
            terms in proptest::collection::vec((0u64..16, 0u64..16, -1.0f64..1.0), 1..5),
        ) {
            let q = 4;
            let h = PauliSum::from_terms(q, terms.iter().map(|&(x, z, c)| (x, z, Complex64::new(c, 0.0)))).unwrap();
            let h4 = power(&h, 4).unwrap();
            prop_assert!(h4.max_imag() < 1e-12);
            let tr: Complex64 = dense(&h4).diagonal().iter().sum();
            prop_assert!((h4.identity_coefficient() * 16.0 - tr.re).abs() < 1e-8);
        }

        /// Matrix-free apply agrees with the dense matrix–vector product.
        #[test]
        fn apply_matches_dense(
            terms in proptest::collection::vec((0u64..16, 0u64..16, -1.0f64..1.0), 1..5),
            vecseed in proptest::collection::vec(-1.0f64..1.0, 32),
        ) {
            let q = 4;
            let h = PauliSum::from_terms(q, terms.iter().map(|&(x, z, c)| (x, z, Complex64::new(c, 0.0)))).unwrap();
            let v: Vec<Complex64> = (0..16).map(|i| Complex64::new(vecseed[i], vecseed[i + 16])).collect();
            let got = apply_to_statevector(&h, &v).unwrap();
            let dv = dense(&h) * DMatrix::from_column_slice(16, 1, &v);
            for (i, g) in got.iter().enumerate() {
                prop_assert!((g - dv[(i, 0)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn twelve_qubit_ring_fourth_power_term_count() {
        // regression constant from the independent symbolic oracle
        let q = 12;
        let c = Complex64::new(1.0 / (4.0 * q as f64), 0.0);
        let mut triples = Vec::new();
        for i in 0..q {
            let j = (i + 1) % q;
            let m = (1u64 << i) | (1u64 << j);
            triples.push((m, 0u64, c));
            triples.push((m, m, c));
            triples.push((0u64, m, c));
        }
        let h = PauliSum::from_terms(q, triples).unwrap();
        let h4 = power(&h, 4).unwrap();
        assert_eq!(h4.term_count(), 24_418); // identity included
        assert!(h4.max_imag() < 1e-12);
    }
}
