//! Hamiltonian families for the experiments — Heisenberg spin graphs with
//! ring topology, dense random Hermitian matrices, and truncated
//! harmonic-oscillator spectra — plus exact reference ground states.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{QcmError, Result};
use crate::pauli::{apply_to_statevector, PauliSum};
use crate::sim::QuantumState;

/// One coupled pair in a spin graph with per-axis exchange strengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
}

/// An exchange-coupled spin graph. Serializes as
/// `{ "q": n, "edges": [{i, j, jx, jy, jz}, …] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinGraph {
    #[serde(rename = "q")]
    pub num_qubits: usize,
    pub edges: Vec<Edge>,
}

/// Per-edge couplings for ring builders.
#[derive(Debug, Clone)]
pub enum RingCouplings {
    /// J = 1 on all three axes of every edge.
    Uniform,
    /// One (Jx, Jy, Jz) triple per edge, in ring order.
    PerEdge(Vec<(f64, f64, f64)>),
}

fn ring_pairs(q: usize) -> Result<Vec<(usize, usize)>> {
    if q < 2 {
        return Err(QcmError::BadEdge(0, 1, q));
    }
    if q == 2 {
        // a 2-site "ring" would duplicate the single undirected edge
        return Ok(vec![(0, 1)]);
    }
    Ok((0..q).map(|i| (i, (i + 1) % q)).collect())
}

impl SpinGraph {
    pub fn new(num_qubits: usize, edges: Vec<Edge>) -> Result<Self> {
        let g = SpinGraph { num_qubits, edges };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.edges {
            if e.i >= self.num_qubits || e.j >= self.num_qubits || e.i == e.j {
                return Err(QcmError::BadEdge(e.i, e.j, self.num_qubits));
            }
            let key = (e.i.min(e.j), e.i.max(e.j));
            if !seen.insert(key) {
                return Err(QcmError::BadEdge(e.i, e.j, self.num_qubits));
            }
        }
        Ok(())
    }

    /// Nearest-neighbour ring with unit couplings (single edge at q = 2).
    pub fn uniform_ring(q: usize) -> Result<Self> {
        let edges = ring_pairs(q)?
            .into_iter()
            .map(|(i, j)| Edge { i, j, jx: 1.0, jy: 1.0, jz: 1.0 })
            .collect();
        SpinGraph::new(q, edges)
    }

    /// Ring with one isotropic coupling per edge (Jx = Jy = Jz = j[e]).
    pub fn isotropic_ring(q: usize, j: &[f64]) -> Result<Self> {
        let pairs = ring_pairs(q)?;
        if j.len() != pairs.len() {
            return Err(QcmError::ParameterLength(j.len(), pairs.len()));
        }
        let edges = pairs
            .into_iter()
            .zip(j)
            .map(|((i, jq), &w)| Edge { i, j: jq, jx: w, jy: w, jz: w })
            .collect();
        SpinGraph::new(q, edges)
    }

    /// H = (1/4q) Σ_edges (Jx X_iX_j + Jy Y_iY_j + Jz Z_iZ_j).
    pub fn to_pauli_sum(&self) -> Result<PauliSum> {
        self.validate()?;
        let scale = 1.0 / (4.0 * self.num_qubits as f64);
        let mut triples = Vec::with_capacity(3 * self.edges.len());
        for e in &self.edges {
            let m = (1u64 << e.i) | (1u64 << e.j);
            triples.push((m, 0u64, Complex64::new(e.jx * scale, 0.0)));
            triples.push((m, m, Complex64::new(e.jy * scale, 0.0)));
            triples.push((0u64, m, Complex64::new(e.jz * scale, 0.0)));
        }
        PauliSum::from_terms(self.num_qubits, triples)
    }
}

/// Heisenberg ring Hamiltonian, normalized by 1/(4q).
pub fn heisenberg_ring(q: usize, couplings: &RingCouplings) -> Result<PauliSum> {
    let graph = match couplings {
        RingCouplings::Uniform => SpinGraph::uniform_ring(q)?,
        RingCouplings::PerEdge(list) => {
            let pairs = ring_pairs(q)?;
            if list.len() != pairs.len() {
                return Err(QcmError::ParameterLength(list.len(), pairs.len()));
            }
            let edges = pairs
                .into_iter()
                .zip(list)
                .map(|((i, j), &(jx, jy, jz))| Edge { i, j, jx, jy, jz })
                .collect();
            SpinGraph::new(q, edges)?
        }
    };
    graph.to_pauli_sum()
}

/// Ensemble of ring graphs with per-edge isotropic couplings drawn uniformly
/// from [0, 1). Instance k uses RNG stream k of the given seed, so any
/// instance can be regenerated in isolation.
pub fn random_heisenberg_ensemble(q: usize, count: usize, seed: u64) -> Result<Vec<SpinGraph>> {
    let pairs = ring_pairs(q)?;
    let mut out = Vec::with_capacity(count);
    for inst in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(inst as u64);
        let j: Vec<f64> = (0..pairs.len()).map(|_| rng.gen::<f64>()).collect();
        out.push(SpinGraph::isotropic_ring(q, &j)?);
    }
    Ok(out)
}

/// Dense-matrix cap: 2^12.
pub const DENSE_DIM_CAP: usize = 1 << 12;

/// A dense Hermitian Hamiltonian in row-major storage, capped at 2^12.
#[derive(Debug, Clone)]
pub struct DenseHamiltonian {
    dim: usize,
    matrix: Vec<Complex64>,
}

impl DenseHamiltonian {
    /// Validates the dimension cap and Hermiticity (entrywise 1e-12).
    pub fn new(dim: usize, matrix: Vec<Complex64>) -> Result<Self> {
        if dim > DENSE_DIM_CAP {
            return Err(QcmError::DimTooLarge(dim, DENSE_DIM_CAP));
        }
        if matrix.len() != dim * dim {
            return Err(QcmError::DimensionMismatch(dim, matrix.len()));
        }
        let mut worst = 0.0f64;
        for r in 0..dim {
            for c in r..dim {
                let d = (matrix[r * dim + c] - matrix[c * dim + r].conj()).norm();
                worst = worst.max(d);
            }
        }
        if worst > 1e-12 {
            return Err(QcmError::NotHermitianMatrix(worst));
        }
        Ok(DenseHamiltonian { dim, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    /// Hv for a vector of length `dim`.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dim {
            return Err(QcmError::DimensionMismatch(self.dim, v.len()));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for r in 0..self.dim {
            let row = &self.matrix[r * self.dim..(r + 1) * self.dim];
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(v) {
                acc += a * b;
            }
            out[r] = acc;
        }
        Ok(out)
    }

    /// Exact moments ⟨H^k⟩, k = 1..=k_max, for a state of matching dimension
    /// (statevector via the Krylov chain, density matrix column-by-column).
    pub fn moments_exact(&self, s: &QuantumState, k_max: usize) -> Result<Vec<f64>> {
        if !(1..=5).contains(&k_max) {
            return Err(QcmError::BadPower(k_max, 5));
        }
        if 1usize << s.num_qubits() != self.dim {
            return Err(QcmError::DimensionMismatch(self.dim, 1 << s.num_qubits()));
        }
        let mut out = Vec::with_capacity(k_max);
        match s {
            QuantumState::Statevector { amps, .. } => {
                let mut chain: Vec<Vec<Complex64>> = vec![amps.clone()];
                for _ in 0..k_max.div_ceil(2) {
                    let next = self.apply(chain.last().unwrap())?;
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
                let mut col = vec![Complex64::new(0.0, 0.0); self.dim];
                for c in 0..self.dim {
                    for r in 0..self.dim {
                        col[r] = rho[r * self.dim + c];
                    }
                    let mut v = col.clone();
                    for m in acc.iter_mut() {
                        v = self.apply(&v)?;
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
}

/// M = (A + A†)/2 with independent standard complex normal entries in A
/// (CN(0,1): real and imaginary parts each N(0, 1/2)). Off-diagonal
/// variance E|M_ij|² = 1/2, so the spectral density approaches a semicircle
/// of radius √(2·dim).
pub fn random_gue(dim: usize, seed: u64) -> Result<DenseHamiltonian> {
    if dim > DENSE_DIM_CAP {
        return Err(QcmError::DimTooLarge(dim, DENSE_DIM_CAP));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut a = vec![Complex64::new(0.0, 0.0); dim * dim];
    for v in a.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v = Complex64::new(re * inv_sqrt2, im * inv_sqrt2);
    }
    let mut m = vec![Complex64::new(0.0, 0.0); dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            m[r * dim + c] = (a[r * dim + c] + a[c * dim + r].conj()) * 0.5;
        }
    }
    DenseHamiltonian::new(dim, m)
}

const LANCZOS_SUBSPACE: usize = 32;
const LANCZOS_MAX_RESTARTS: usize = 400;

/// Lowest eigenpair of a Hermitian operator given as a matrix-free apply,
/// by restarted Lanczos with full reorthogonalization. Deterministic: the
/// starting vector is drawn from a fixed-seed RNG.
fn lanczos_ground(
    dim: usize,
    apply: &dyn Fn(&[Complex64]) -> Result<Vec<Complex64>>,
) -> Result<(f64, Vec<Complex64>)> {
    use nalgebra::{DMatrix, SymmetricEigen};

    let mut rng = ChaCha8Rng::seed_from_u64(0x6c61_6e63_7a6f_73);
    let mut v0: Vec<Complex64> = (0..dim)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im)
        })
        .collect();
    normalize(&mut v0);

    let m_cap = LANCZOS_SUBSPACE.min(dim);
    let mut last_residual = f64::INFINITY;
    for restart in 0..LANCZOS_MAX_RESTARTS {
        let mut basis: Vec<Vec<Complex64>> = vec![v0.clone()];
        let mut alphas: Vec<f64> = Vec::with_capacity(m_cap);
        let mut betas: Vec<f64> = Vec::with_capacity(m_cap);
        for j in 0..m_cap {
            let mut w = apply(&basis[j])?;
            let alpha = inner(&basis[j], &w).re;
            alphas.push(alpha);
            // two-pass full reorthogonalization keeps the basis orthonormal
            // despite the loss inherent to the three-term recurrence
            for _ in 0..2 {
                for b in &basis {
                    let ip = inner(b, &w);
                    for (wi, bi) in w.iter_mut().zip(b) {
                        *wi -= ip * bi;
                    }
                }
            }
            let beta = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if beta < 1e-13 || basis.len() == dim {
                break; // invariant subspace found — Ritz values are exact
            }
            betas.push(beta);
            for wi in w.iter_mut() {
                *wi /= beta;
            }
            basis.push(w);
        }

        let k = alphas.len();
        let mut tri = DMatrix::<f64>::zeros(k, k);
        for (i, &a) in alphas.iter().enumerate() {
            tri[(i, i)] = a;
        }
        for (i, &b) in betas.iter().take(k.saturating_sub(1)).enumerate() {
            tri[(i, i + 1)] = b;
            tri[(i + 1, i)] = b;
        }
        let eig = SymmetricEigen::new(tri);
        let (idx, theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, &e)| (i, e))
            .expect("non-empty Krylov basis");
        let y = eig.eigenvectors.column(idx);
        let mut x = vec![Complex64::new(0.0, 0.0); dim];
        for (bi, &yi) in basis.iter().zip(y.iter()) {
            for (xi, bv) in x.iter_mut().zip(bi) {
                *xi += yi * bv;
            }
        }
        normalize(&mut x);

        let hx = apply(&x)?;
        let residual = hx
            .iter()
            .zip(&x)
            .map(|(h, xi)| (h - theta * xi).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if residual <= 1e-8 * theta.abs().max(1.0) {
            return Ok((theta, x));
        }
        // restart from the Ritz vector; nudge if stagnating
        if residual > 0.99 * last_residual && restart > 4 {
            for xi in x.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *xi += Complex64::new(re, im) * (residual * 1e-3);
            }
            normalize(&mut x);
        }
        last_residual = residual;
        v0 = x;
    }
    Err(QcmError::NoConvergence(LANCZOS_MAX_RESTARTS, last_residual))
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn normalize(v: &mut [Complex64]) {
    let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in v.iter_mut() {
        *c /= n;
    }
}

/// Matrix-free qubit cap for the iterative eigensolver: 24.
pub const ITERATIVE_QUBIT_CAP: usize = 24;

/// Lowest eigenvalue (relative 1e-8) and a unit ground vector of a Pauli-sum
/// Hamiltonian, applying terms as masked bit operations — no dense matrix is
/// formed, so this runs up to 24 qubits.
pub fn exact_ground(h: &PauliSum) -> Result<(f64, Vec<Complex64>)> {
    let q = h.num_qubits();
    if q > ITERATIVE_QUBIT_CAP {
        return Err(QcmError::DimTooLarge(1 << q, 1 << ITERATIVE_QUBIT_CAP));
    }
    let dim = 1usize << q;
    lanczos_ground(dim, &|v| apply_to_statevector(h, v))
}

/// Lowest eigenpair of a dense Hermitian matrix via full eigendecomposition.
pub fn exact_ground_dense(h: &DenseHamiltonian) -> Result<(f64, Vec<Complex64>)> {
    use nalgebra::{DMatrix, SymmetricEigen};
    let dim = h.dim();
    let m = DMatrix::from_row_slice(dim, dim, h.matrix());
    let eig = SymmetricEigen::new(m);
    let (idx, e0) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, &e)| (i, e))
        .expect("non-empty matrix");
    let mut v: Vec<Complex64> = eig.eigenvectors.column(idx).iter().copied().collect();
    normalize(&mut v);
    Ok((e0, v))
}

/// Evenly spaced truncated spectrum E_j = E₀ + jΔ, j = 0..N−1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorSpectrum {
    pub ground_energy: f64,
    pub gap: f64,
    pub num_levels: usize,
}

/// Sums of integer powers Σ_{j=0}^{N−1} j^t for t ≤ 5, in closed form.
fn power_sum(n: f64, t: usize) -> f64 {
    match t {
        0 => n,
        1 => n * (n - 1.0) / 2.0,
        2 => n * (n - 1.0) * (2.0 * n - 1.0) / 6.0,
        3 => {
            let s = n * (n - 1.0) / 2.0;
            s * s
        }
        4 => n * (n - 1.0) * (2.0 * n - 1.0) * (3.0 * n * n - 3.0 * n - 1.0) / 30.0,
        5 => {
            let m = n * (n - 1.0);
            m * m * (2.0 * n * n - 2.0 * n - 1.0) / 12.0
        }
        _ => unreachable!("power_sum only defined for t <= 5"),
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// tr H^k = Σ_{j=0}^{N−1} (E₀ + jΔ)^k as an exact finite sum, evaluated in
/// closed form via the binomial expansion and integer power sums — no
/// large-N or small-Δ approximation, and O(k) work for any level count.
pub fn oscillator_traces(spec: &OscillatorSpectrum, k: usize) -> Result<f64> {
    if !(1..=5).contains(&k) {
        return Err(QcmError::BadPower(k, 5));
    }
    let n = spec.num_levels as f64;
    let mut total = 0.0;
    for t in 0..=k {
        total += binomial(k, t)
            * spec.ground_energy.powi((k - t) as i32)
            * spec.gap.powi(t as i32)
            * power_sum(n, t);
    }
    Ok(total)
}
