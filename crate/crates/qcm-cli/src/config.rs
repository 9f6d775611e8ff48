//! Experiment configuration: JSON schema, defaults, and validation.
//!
//! Configs are validated in full before any compute starts; every stochastic
//! element (ensemble draws, shot sampling, optimizer restarts, GUE rotations)
//! carries an explicit seed so reruns are bit-reproducible.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use qcm_core::sim::{NoiseChannel, NoiseSpec};
use qcm_core::vqe::MAX_DEPTH;
use qcm_core::whitenoise::CANCELLATION_P_GRID;

/// Largest density-matrix register (matches the simulator's own cap).
pub const DENSITY_QUBIT_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Zero-noise depth-convergence curve on the uniform ring.
    Fig1d,
    /// Symbolic H¹..H⁴ term counts plus the H⁴ TPB grouping at full q=20
    /// scale — no state simulation at all.
    #[serde(alias = "fig1-moments-only")]
    Fig1MomentsOnly,
    /// Random-coupling ensemble, zero-noise optimization, estimators per
    /// (instance, depth); moments exact or TPB-sampled.
    Fig2b,
    /// Like fig2b but the optimized circuits are replayed under a noise
    /// model (device-level by default) before measuring.
    Fig2cSim,
    /// (fidelity, p) robustness grid: GUE-rotated θ* states under a
    /// depolarizing channel, with high-temperature-limit contour crossings.
    Fig3,
    /// Device-noise α-sweep at fixed depth.
    Fig4,
    /// Truncated-oscillator white-noise cancellation table.
    Whitenoise,
    /// Generic ensemble × depth run honoring every config field.
    Custom,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Fig1d => "fig1d",
            ExperimentKind::Fig1MomentsOnly => "fig1_moments_only",
            ExperimentKind::Fig2b => "fig2b",
            ExperimentKind::Fig2cSim => "fig2c_sim",
            ExperimentKind::Fig3 => "fig3",
            ExperimentKind::Fig4 => "fig4",
            ExperimentKind::Whitenoise => "whitenoise",
            ExperimentKind::Custom => "custom",
        }
    }

    fn default_q(&self) -> usize {
        match self {
            ExperimentKind::Fig1MomentsOnly => 20,
            ExperimentKind::Fig3 => 6,
            ExperimentKind::Fig4 => 8,
            _ => 12,
        }
    }

    fn default_d_max(&self) -> usize {
        match self {
            ExperimentKind::Fig3 | ExperimentKind::Fig4 => 2,
            _ => 4,
        }
    }

    /// Experiments that replay circuits through density-matrix channels.
    fn needs_density(&self) -> bool {
        matches!(
            self,
            ExperimentKind::Fig2cSim | ExperimentKind::Fig3 | ExperimentKind::Fig4
        )
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub count: usize,
    pub seed: u64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec { count: 1, seed: 0 }
    }
}

/// Finite-shot TPB sampling or the infinite-shot limit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum ShotsConfig {
    Exact,
    Shots {
        shots_per_group: usize,
        #[serde(default)]
        seed: u64,
    },
}

impl Default for ShotsConfig {
    fn default() -> Self {
        ShotsConfig::Exact
    }
}

/// Truncated-oscillator scenario for the whitenoise experiment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub ground_energy: f64,
    pub gap: f64,
    pub num_levels: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig { ground_energy: -1.0, gap: 1e-3, num_levels: 1 << 20 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iters: Option<usize>,
    pub tol: f64,
    pub restarts: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { max_iters: None, tol: 1e-7, restarts: 4 }
    }
}

fn default_alphas() -> Vec<f64> {
    vec![0.0, 0.05, 0.1, 0.5, 1.0]
}

fn default_fidelity_grid() -> Vec<f64> {
    vec![0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
}

fn default_p_grid() -> Option<Vec<f64>> {
    None
}

fn default_flag_threshold() -> f64 {
    1.0
}

/// One experiment run, fully specified.  `q` and `d_max` default per
/// experiment kind when omitted; the extension fields (scenario, optimizer,
/// grids, flag_threshold) have conservative defaults so minimal configs stay
/// minimal.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub q: Option<usize>,
    #[serde(default)]
    pub d_max: Option<usize>,
    #[serde(default)]
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub shots: ShotsConfig,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_fidelity_grid")]
    pub fidelity_grid: Vec<f64>,
    /// Noise-strength grid for fig3/whitenoise; defaults to 0..0.5 in 0.1
    /// steps (fig3) or the canonical cancellation grid (whitenoise).
    #[serde(default = "default_p_grid")]
    pub p_grid: Option<Vec<f64>>,
    /// Maximum tolerated fraction of output rows carrying a degenerate
    /// estimator flag; exceeding it is the exit-code-3 condition.
    #[serde(default = "default_flag_threshold")]
    pub flag_threshold: f64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| format!("config parse error: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn q(&self) -> usize {
        self.q.unwrap_or_else(|| self.experiment.default_q())
    }

    pub fn d_max(&self) -> usize {
        self.d_max.unwrap_or_else(|| self.experiment.default_d_max())
    }

    pub fn p_grid(&self) -> Vec<f64> {
        match &self.p_grid {
            Some(g) => g.clone(),
            None if self.experiment == ExperimentKind::Whitenoise => {
                CANCELLATION_P_GRID.to_vec()
            }
            None => vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let q = self.q();
        let kind = self.experiment;
        if kind != ExperimentKind::Whitenoise {
            if q == 0 || q % 2 != 0 {
                return Err(format!("q = {q} must be a positive even number"));
            }
            if kind.needs_density() && q > DENSITY_QUBIT_CAP {
                return Err(format!(
                    "q = {q} exceeds the density-matrix cap of {DENSITY_QUBIT_CAP} qubits \
                     required by {}",
                    kind.as_str()
                ));
            }
            if q > 24 {
                return Err(format!("q = {q} exceeds the 24-qubit statevector cap"));
            }
        }
        let d = self.d_max();
        if !(1..=MAX_DEPTH).contains(&d) {
            return Err(format!("d_max = {d} outside 1..={MAX_DEPTH}"));
        }
        if self.ensemble.count == 0 {
            return Err("ensemble.count must be at least 1".into());
        }
        if let ShotsConfig::Shots { shots_per_group, .. } = self.shots {
            if shots_per_group == 0 {
                return Err("shots_per_group must be at least 1".into());
            }
        }
        if let Some(noise) = &self.noise {
            if !(0.0..=1.0).contains(&noise.p) {
                return Err(format!("noise.p = {} outside [0, 1]", noise.p));
            }
            if let Some(dev) = &noise.device {
                for (name, v) in [
                    ("eps_cx", dev.eps_cx),
                    ("eps_1q", dev.eps_1q),
                    ("alpha", dev.alpha),
                ] {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(format!("device.{name} = {v} outside [0, 1]"));
                    }
                }
                if !(0.0..=0.5).contains(&dev.readout_flip) {
                    return Err(format!(
                        "device.readout_flip = {} outside [0, 0.5]",
                        dev.readout_flip
                    ));
                }
            }
            if noise.channel == NoiseChannel::Device && noise.device.is_none() {
                // Defaults exist, but requiring them spelled out keeps the
                // manifest self-describing.
                return Err("device channel requires an explicit device block".into());
            }
        }
        if self.scenario.gap < 0.0 || self.scenario.num_levels == 0 {
            return Err("scenario requires gap ≥ 0 and num_levels ≥ 1".into());
        }
        for a in &self.alphas {
            if !(0.0..=1.0).contains(a) {
                return Err(format!("alpha = {a} outside [0, 1]"));
            }
        }
        if self.alphas.is_empty() {
            return Err("alphas must be non-empty".into());
        }
        for f in &self.fidelity_grid {
            if !(0.0 < *f && *f <= 1.0) {
                return Err(format!("fidelity = {f} outside (0, 1]"));
            }
        }
        if self.fidelity_grid.is_empty() {
            return Err("fidelity_grid must be non-empty".into());
        }
        for p in self.p_grid() {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("p = {p} outside [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.flag_threshold) {
            return Err(format!(
                "flag_threshold = {} outside [0, 1]",
                self.flag_threshold
            ));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err("output_dir must be non-empty".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(kind: &str) -> String {
        format!(r#"{{"experiment": "{kind}", "output_dir": "out"}}"#)
    }

    #[test]
    fn minimal_configs_resolve_defaults() {
        let cfg = ExperimentConfig::from_json(&minimal("fig1d")).unwrap();
        assert_eq!(cfg.q(), 12);
        assert_eq!(cfg.d_max(), 4);
        let cfg = ExperimentConfig::from_json(&minimal("fig3")).unwrap();
        assert_eq!(cfg.q(), 6);
        assert_eq!(cfg.p_grid(), vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]);
        let cfg = ExperimentConfig::from_json(&minimal("fig1_moments_only")).unwrap();
        assert_eq!(cfg.q(), 20);
        let cfg = ExperimentConfig::from_json(&minimal("whitenoise")).unwrap();
        assert_eq!(cfg.p_grid(), CANCELLATION_P_GRID.to_vec());
        assert_eq!(cfg.scenario.num_levels, 1 << 20);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = r#"{"experiment": "fig1d", "output_dir": "out", "qubits": 8}"#;
        assert!(ExperimentConfig::from_json(bad).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for bad in [
            r#"{"experiment": "fig1d", "output_dir": "out", "q": 7}"#,
            r#"{"experiment": "fig1d", "output_dir": "out", "d_max": 9}"#,
            r#"{"experiment": "fig3", "output_dir": "out", "q": 14}"#,
            r#"{"experiment": "fig1d", "output_dir": "out", "ensemble": {"count": 0, "seed": 1}}"#,
            r#"{"experiment": "fig2b", "output_dir": "out", "shots": {"mode": "shots", "shots_per_group": 0}}"#,
            r#"{"experiment": "fig3", "output_dir": "out", "p_grid": [0.2, 1.5]}"#,
            r#"{"experiment": "fig4", "output_dir": "out", "alphas": [-0.1]}"#,
            r#"{"experiment": "fig1d", "output_dir": "out", "flag_threshold": 2.0}"#,
            r#"{"experiment": "fig1d", "output_dir": ""}"#,
            r#"{"experiment": "fig2c_sim", "output_dir": "out", "noise": {"channel": "device", "p": 0.0}}"#,
        ] {
            assert!(ExperimentConfig::from_json(bad).is_err(), "accepted: {bad}");
        }
    }

    #[test]
    fn shots_and_noise_roundtrip() {
        let text = r#"{
            "experiment": "fig2c_sim",
            "q": 6,
            "d_max": 2,
            "ensemble": {"count": 2, "seed": 7},
            "noise": {
                "channel": "device",
                "device": {"eps_cx": 0.01, "eps_1q": 0.001, "readout_flip": 0.02, "alpha": 1.0}
            },
            "shots": {"mode": "shots", "shots_per_group": 512, "seed": 3},
            "output_dir": "out"
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert!(matches!(cfg.shots, ShotsConfig::Shots { shots_per_group: 512, seed: 3 }));
        let echo = serde_json::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&echo).unwrap();
        assert_eq!(back.q(), 6);
    }
}
