//! Moments → cumulants → ground-state energy estimates.
//!
//! Three estimators are produced from the moments ⟨H^k⟩ of a state:
//! the variational value ⟨H⟩ itself, the fourth-order Lanczos-expansion
//! estimate, and the three-term connected-moments-expansion estimate using
//! cumulants through order 5. The high-temperature (maximally mixed) limit
//! of each is classically computable from identity coefficients of H^k
//! alone and serves as the benchmark a quantum estimate must beat.

use serde::{Deserialize, Serialize};

use crate::error::{QcmError, Result};
use crate::pauli::PauliSum;

/// Moments m_k = ⟨H^k⟩ for k = 1..K, optionally with per-moment standard
/// errors from finite-shot sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub values: Vec<f64>,
    pub std_errs: Option<Vec<f64>>,
}

impl MomentSet {
    pub fn exact(values: Vec<f64>) -> Self {
        MomentSet { values, std_errs: None }
    }

    pub fn with_errs(values: Vec<f64>, std_errs: Vec<f64>) -> Self {
        MomentSet { values, std_errs: Some(std_errs) }
    }

    /// Variance nonnegativity m₂ ≥ m₁² − tol; holds for moments of a valid
    /// state but can be violated by shot noise, hence a check, not an error.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.values.len() < 2 || self.values[1] >= self.values[0].powi(2) - tol
    }
}

/// Cumulants c_k for k = 1..K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantSet {
    pub values: Vec<f64>,
}

impl CumulantSet {
    fn c(&self, k: usize) -> f64 {
        self.values[k - 1]
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Moment-to-cumulant recursion
/// c_n = m_n − Σ_{p=0}^{n−2} C(n−1, p) · c_{p+1} · m_{n−1−p}, with m₀ = 1.
pub fn cumulants(m: &MomentSet) -> CumulantSet {
    let k_max = m.values.len();
    let mv = |k: usize| if k == 0 { 1.0 } else { m.values[k - 1] };
    let mut c: Vec<f64> = Vec::with_capacity(k_max);
    for n in 1..=k_max {
        let mut sum = 0.0;
        for (p, cp) in c.iter().enumerate().take(n.saturating_sub(1)) {
            sum += binomial(n - 1, p) * cp * mv(n - 1 - p);
        }
        c.push(mv(n) - sum);
    }
    CumulantSet { values: c }
}

/// An estimator output; `degenerate` marks that a singular-denominator or
/// negative-radicand fallback fired and the value is the bare c₁.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub degenerate: bool,
}

/// Degeneracy tolerance, scaled by max(1, c₂²) so it tracks the natural
/// energy scale of the cumulants.
fn degenerate_tol(c2: f64) -> f64 {
    1e-9 * (c2 * c2).max(1.0)
}

/// Fourth-order Lanczos-expansion estimate
/// E = c₁ − (c₂² / (c₃² − c₂c₄)) · [√(3c₃² − 2c₂c₄) − c₃].
///
/// For c₃ ≥ 0 the bracket cancels catastrophically, so the algebraically
/// identical form E = c₁ − 2c₂² / (√rad + c₃) is used there. A negative
/// radicand (possible under shot noise) or a vanishing denominator (exact
/// eigenstates, where the formula is 0/0 with limit c₁) returns c₁ flagged
/// rather than failing — raw noisy data must not crash the pipeline.
pub fn lanczos4(c: &CumulantSet) -> Estimate {
    assert!(c.values.len() >= 4, "lanczos4 needs cumulants through order 4");
    let (c1, c2, c3, c4) = (c.c(1), c.c(2), c.c(3), c.c(4));
    let tol = degenerate_tol(c2);
    let rad = 3.0 * c3 * c3 - 2.0 * c2 * c4;
    let denom = c3 * c3 - c2 * c4;
    if rad < 0.0 || denom.abs() < tol {
        return Estimate { value: c1, degenerate: true };
    }
    let value = if c3 >= 0.0 {
        c1 - 2.0 * c2 * c2 / (rad.sqrt() + c3)
    } else {
        c1 - (c2 * c2 / denom) * (rad.sqrt() - c3)
    };
    Estimate { value, degenerate: false }
}

/// Three-term connected-moments-expansion estimate
/// E = c₁ − c₂²/c₃ − (1/c₃) · (c₂c₄ − c₃²)² / (c₃c₅ − c₄²).
/// Singular denominators (|c₃| or |c₃c₅ − c₄²| below tolerance) return c₁
/// flagged.
pub fn cmx5(c: &CumulantSet) -> Estimate {
    assert!(c.values.len() >= 5, "cmx5 needs cumulants through order 5");
    let (c1, c2, c3, c4, c5) = (c.c(1), c.c(2), c.c(3), c.c(4), c.c(5));
    let tol = degenerate_tol(c2);
    let inner = c3 * c5 - c4 * c4;
    if c3.abs() < tol || inner.abs() < tol {
        return Estimate { value: c1, degenerate: true };
    }
    let num = c2 * c4 - c3 * c3;
    let value = c1 - c2 * c2 / c3 - (num * num) / (c3 * inner);
    Estimate { value, degenerate: false }
}

/// Which estimator to evaluate in the high-temperature limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HtEstimator {
    Variational,
    Lanczos4,
}

/// High-temperature (maximally mixed) limit of an estimator, computed with
/// no quantum state at all: the maximally mixed moments are
/// m_k = tr(H^k)/2^q = identity_coefficient(H^k).
pub fn ht_limit(h_powers: &[PauliSum], estimator: HtEstimator) -> Result<Estimate> {
    let needed = match estimator {
        HtEstimator::Variational => 1,
        HtEstimator::Lanczos4 => 4,
    };
    if h_powers.len() < needed {
        return Err(QcmError::ParameterLength(h_powers.len(), needed));
    }
    let m = MomentSet::exact(h_powers.iter().map(|p| p.identity_coefficient()).collect());
    match estimator {
        HtEstimator::Variational => Ok(Estimate { value: m.values[0], degenerate: false }),
        HtEstimator::Lanczos4 => Ok(lanczos4(&cumulants(&m))),
    }
}

/// Approximation error |1 − e/e₀|.
pub fn approx_error(e: f64, e0: f64) -> Result<f64> {
    if e0 == 0.0 {
        return Err(QcmError::ZeroReference);
    }
    Ok((1.0 - e / e0).abs())
}

/// First-order (delta-method) propagation of independent per-moment standard
/// errors through an estimator m ↦ f(m), via central finite differences.
pub fn delta_std_err(values: &[f64], std_errs: &[f64], f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let mut var = 0.0;
    for k in 0..values.len() {
        let h = (1e-6 * values[k].abs()).max(1e-9);
        let mut up = values.to_vec();
        let mut dn = values.to_vec();
        up[k] += h;
        dn[k] -= h;
        let slope = (f(&up) - f(&dn)) / (2.0 * h);
        var += (slope * std_errs[k]).powi(2);
    }
    var.sqrt()
}

/// Per-estimate degenerate-fallback flags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateFlags {
    pub lanczos4: bool,
    pub cmx5: bool,
    pub ht_lanczos4: bool,
}

impl EstimateFlags {
    pub fn any(&self) -> bool {
        self.lanczos4 || self.cmx5 || self.ht_lanczos4
    }
}

/// Approximation errors |1 − E/E₀| per estimate, present when E₀ is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxErrors {
    pub variational: f64,
    pub lanczos4: f64,
    pub cmx5: Option<f64>,
    pub ht_lanczos4: f64,
}

/// Delta-method standard errors per estimate, present when the input
/// moments carried standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateStdErrs {
    pub variational: f64,
    pub lanczos4: f64,
    pub cmx5: Option<f64>,
}

/// The full estimate bundle for one (state, Hamiltonian) evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub variational: f64,
    pub lanczos4: f64,
    pub cmx5: Option<f64>,
    pub ht_lanczos4: f64,
    pub approx_errors: Option<ApproxErrors>,
    pub std_errs: Option<EstimateStdErrs>,
    pub degenerate_flags: EstimateFlags,
}

/// Builds the estimate bundle from moments (K = 4 or 5; cmx5 needs 5) and
/// the symbolic powers H^1..H^4 (for the high-temperature benchmark).
/// When `e0` is given, approximation errors are attached.
pub fn estimate_report(
    m: &MomentSet,
    h_powers: &[PauliSum],
    e0: Option<f64>,
) -> Result<EstimateReport> {
    if !(4..=5).contains(&m.values.len()) {
        return Err(QcmError::ParameterLength(m.values.len(), 4));
    }
    let c = cumulants(m);
    let variational = m.values[0];
    let l4 = lanczos4(&c);
    let c5 = if m.values.len() >= 5 { Some(cmx5(&c)) } else { None };
    let ht = ht_limit(h_powers, HtEstimator::Lanczos4)?;

    let approx_errors = match e0 {
        Some(e0) => Some(ApproxErrors {
            variational: approx_error(variational, e0)?,
            lanczos4: approx_error(l4.value, e0)?,
            cmx5: c5.map(|e| approx_error(e.value, e0)).transpose()?,
            ht_lanczos4: approx_error(ht.value, e0)?,
        }),
        None => None,
    };

    let std_errs = m.std_errs.as_ref().map(|errs| EstimateStdErrs {
        variational: errs[0],
        lanczos4: delta_std_err(&m.values, errs, &|v| {
            lanczos4(&cumulants(&MomentSet::exact(v.to_vec()))).value
        }),
        cmx5: c5.map(|_| {
            delta_std_err(&m.values, errs, &|v| {
                cmx5(&cumulants(&MomentSet::exact(v.to_vec()))).value
            })
        }),
    });

    Ok(EstimateReport {
        variational,
        lanczos4: l4.value,
        cmx5: c5.map(|e| e.value),
        ht_lanczos4: ht.value,
        approx_errors,
        std_errs,
        degenerate_flags: EstimateFlags {
            lanczos4: l4.degenerate,
            cmx5: c5.map(|e| e.degenerate).unwrap_or(false),
            ht_lanczos4: ht.degenerate,
        },
    })
}
