//! Experiment engines and dataset writers.
//!
//! Every engine writes CSV datasets whose bytes depend only on the config
//! (all floats through one fixed-precision formatter, rows in a fixed order)
//! plus a `manifest.json` carrying the non-deterministic bookkeeping: seeds,
//! crate versions, and wall times.  Estimator CSVs share one row schema
//!
//! `instance_id,d,n_cx,variational,lanczos4,cmx5,ht_lanczos4,err_variational,err_lanczos4,flags,e0`
//!
//! (`e0` is the exact ground-energy reference column every dataset carries;
//! fig4 appends its swept `alpha`).  Flagged rows — degenerate estimator
//! fallbacks — are always written; exceeding the configured flagged-row
//! fraction turns into [`CliError::Numerical`] after the files are on disk.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use qcm_core::estimators::{estimate_report, EstimateFlags, EstimateReport, MomentSet};
use qcm_core::hamiltonian::{
    exact_ground, heisenberg_ring, random_gue, random_heisenberg_ensemble, DenseHamiltonian,
    OscillatorSpectrum, RingCouplings,
};
use qcm_core::measure::{group_tpb, sample_moments, SamplingMode, ShotPlan};
use qcm_core::pauli::{moments_exact, multiply, PauliSum};
use qcm_core::sim::{
    apply_circuit, channel_local, fidelity, DeviceParams, LocalKind, NoiseChannel, NoiseSpec,
    QuantumState,
};
use qcm_core::vqe::{convergence_curve, hamiltonian_id, OptimizationRun, OptimizeConfig};
use qcm_core::whitenoise::cancellation_experiment;
use qcm_core::Complex64;

use crate::config::{ExperimentConfig, ExperimentKind, ShotsConfig};
use crate::CliError;

/// Value margin below which the high-temperature benchmark is not counted as
/// beaten (so exact equality — e.g. maximally mixed input — maps to "no
/// advantage").
pub const HT_ADVANTAGE_TOL: f64 = 1e-9;

/// What a finished run produced, for callers and the exit-code decision.
#[derive(Debug)]
pub struct RunSummary {
    pub outputs: Vec<PathBuf>,
    pub flagged_rows: usize,
    pub total_rows: usize,
}

/// One number format everywhere keeps the CSVs byte-for-byte reproducible.
fn fmt_f(x: f64) -> String {
    format!("{x:.12e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

/// Degenerate-fallback flags as a stable CSV token: `none` or a `+`-joined
/// list such as `lanczos4+cmx5`.
pub fn flags_str(f: &EstimateFlags) -> String {
    let mut names = Vec::new();
    if f.lanczos4 {
        names.push("lanczos4");
    }
    if f.cmx5 {
        names.push("cmx5");
    }
    if f.ht_lanczos4 {
        names.push("ht_lanczos4");
    }
    if names.is_empty() {
        "none".into()
    } else {
        names.join("+")
    }
}

/// Deterministic seed derivation (splitmix-style mixing), so each instance,
/// depth, or sweep point gets an independent but reproducible stream.
fn mix_seed(base: u64, words: &[u64]) -> u64 {
    let mut h = base ^ 0x9e37_79b9_7f4a_7c15;
    for &w in words {
        h ^= w.wrapping_mul(0xff51_afd7_ed55_8ccd).wrapping_add(0x2545_f491_4f6c_dd1d);
        h = h.rotate_left(27).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h
}

/// H, H², H³, H⁴ built incrementally (three multiplies, no rework).
fn power_chain(h: &PauliSum) -> Result<Vec<PauliSum>, CliError> {
    let mut powers = vec![h.clone()];
    for _ in 1..4 {
        let next = multiply(powers.last().unwrap(), h)?;
        powers.push(next);
    }
    Ok(powers)
}

struct EstimatorRow {
    instance_id: String,
    d: usize,
    n_cx: usize,
    report: EstimateReport,
    e0: f64,
    /// Trailing extra column (fig4's alpha).
    extra: Option<f64>,
    converged: bool,
}

const ESTIMATOR_HEADER: &str = "instance_id,d,n_cx,variational,lanczos4,cmx5,ht_lanczos4,\
                                err_variational,err_lanczos4,flags,e0";

fn estimators_csv(rows: &[EstimatorRow], extra_name: Option<&str>) -> String {
    let mut s = String::new();
    s.push_str(ESTIMATOR_HEADER);
    if let Some(name) = extra_name {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for r in rows {
        let rep = &r.report;
        let (ev, el) = match &rep.approx_errors {
            Some(a) => (fmt_f(a.variational), fmt_f(a.lanczos4)),
            None => (String::new(), String::new()),
        };
        write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.instance_id,
            r.d,
            r.n_cx,
            fmt_f(rep.variational),
            fmt_f(rep.lanczos4),
            fmt_opt(rep.cmx5),
            fmt_f(rep.ht_lanczos4),
            ev,
            el,
            flags_str(&rep.degenerate_flags),
            fmt_f(r.e0),
        )
        .unwrap();
        if let Some(x) = r.extra {
            s.push(',');
            s.push_str(&fmt_f(x));
        }
        s.push('\n');
    }
    s
}

/// Collects artifacts, stage timings, and flag counts while an engine runs;
/// turned into `manifest.json` + a [`RunSummary`] at the end.
struct Artifacts {
    dir: PathBuf,
    outputs: Vec<String>,
    stages: Vec<(String, f64)>,
    seeds: Map<String, Value>,
    summary: Map<String, Value>,
    flagged_rows: usize,
    total_rows: usize,
}

impl Artifacts {
    fn new(dir: &Path) -> Self {
        Artifacts {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
            stages: Vec::new(),
            seeds: Map::new(),
            summary: Map::new(),
            flagged_rows: 0,
            total_rows: 0,
        }
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        fs::write(self.dir.join(name), text)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    fn stage(&mut self, name: &str, t: Instant) {
        self.stages.push((name.to_string(), t.elapsed().as_secs_f64()));
    }

    fn seed(&mut self, key: &str, value: Value) {
        self.seeds.insert(key.to_string(), value);
    }

    fn note(&mut self, key: &str, value: Value) {
        self.summary.insert(key.to_string(), value);
    }

    fn count_rows(&mut self, flagged: usize, total: usize) {
        self.flagged_rows += flagged;
        self.total_rows += total;
    }

    fn count_estimator_rows(&mut self, rows: &[EstimatorRow]) {
        let flagged = rows.iter().filter(|r| r.report.degenerate_flags.any()).count();
        self.count_rows(flagged, rows.len());
    }

    /// Logs rows where a converged optimum has lanczos4 above the variational
    /// energy beyond tolerance — the moment-inequality invariant.  Violations
    /// are recorded in the manifest and on stderr, never dropped.
    fn log_invariant_violations(&mut self, rows: &[EstimatorRow]) {
        let violations: Vec<Value> = rows
            .iter()
            .filter(|r| r.converged && r.report.lanczos4 > r.report.variational + 1e-9)
            .map(|r| json!({"instance_id": r.instance_id, "d": r.d}))
            .collect();
        if !violations.is_empty() {
            eprintln!(
                "warning: {} converged row(s) violate lanczos4 <= variational + 1e-9",
                violations.len()
            );
            self.note("invariant_violations", Value::Array(violations));
        }
    }

    fn finish(
        mut self,
        cfg: &ExperimentConfig,
        total: Instant,
    ) -> Result<RunSummary, CliError> {
        let stages: Map<String, Value> =
            self.stages.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let manifest = json!({
            "experiment": cfg.experiment.as_str(),
            "versions": {
                "qcm-core": qcm_core::VERSION,
                "qcm-cli": env!("CARGO_PKG_VERSION"),
            },
            "config": serde_json::to_value(cfg)?,
            "seeds": Value::Object(self.seeds.clone()),
            "wall_times_s": {
                "total": total.elapsed().as_secs_f64(),
                "stages": Value::Object(stages),
            },
            "rows": {"total": self.total_rows, "flagged": self.flagged_rows},
            "summary": Value::Object(self.summary.clone()),
            "outputs": self.outputs,
        });
        self.write_json("manifest.json", &manifest)?;
        Ok(RunSummary {
            outputs: self.outputs.iter().map(|n| self.dir.join(n)).collect(),
            flagged_rows: self.flagged_rows,
            total_rows: self.total_rows,
        })
    }
}

/// Runs the configured experiment end to end, writing all datasets plus
/// `manifest.json` into `output_dir`.  Partial numerical failures (degenerate
/// estimator fallbacks) are recorded in the datasets; only when their row
/// fraction exceeds `flag_threshold` does the run return
/// [`CliError::Numerical`] — after everything is written.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    cfg.validate().map_err(CliError::Config)?;
    let t0 = Instant::now();
    fs::create_dir_all(&cfg.output_dir)?;
    let mut art = Artifacts::new(&cfg.output_dir);
    match cfg.experiment {
        ExperimentKind::Fig1MomentsOnly => run_moments_only(cfg, &mut art)?,
        ExperimentKind::Whitenoise => run_whitenoise(cfg, &mut art)?,
        ExperimentKind::Fig3 => run_fig3(cfg, &mut art)?,
        ExperimentKind::Fig4 => run_fig4(cfg, &mut art)?,
        ExperimentKind::Fig1d
        | ExperimentKind::Fig2b
        | ExperimentKind::Fig2cSim
        | ExperimentKind::Custom => run_curves(cfg, &mut art)?,
    }
    let summary = art.finish(cfg, t0)?;
    if summary.total_rows > 0 {
        let frac = summary.flagged_rows as f64 / summary.total_rows as f64;
        if frac > cfg.flag_threshold {
            return Err(CliError::Numerical {
                flagged: summary.flagged_rows,
                total: summary.total_rows,
                threshold: cfg.flag_threshold,
            });
        }
    }
    Ok(summary)
}

/// The effective noise model for measurement replay, per experiment kind.
fn replay_noise(cfg: &ExperimentConfig) -> Result<Option<NoiseSpec>, CliError> {
    match cfg.experiment {
        // Zero-noise by contract; a noise block would silently change the
        // figure's meaning, so reject it.
        ExperimentKind::Fig1d | ExperimentKind::Fig2b => match cfg.noise {
            None => Ok(None),
            Some(_) => Err(CliError::Config(format!(
                "{} is a zero-noise experiment; use fig2c_sim or custom for noisy replay",
                cfg.experiment.as_str()
            ))),
        },
        ExperimentKind::Fig2cSim => Ok(Some(cfg.noise.unwrap_or(NoiseSpec {
            channel: NoiseChannel::Device,
            p: 0.0,
            device: Some(DeviceParams::default()),
        }))),
        ExperimentKind::Custom => Ok(cfg.noise),
        _ => Ok(cfg.noise),
    }
}

/// Symmetric readout-flip probability implied by a noise model (device model
/// only; state-level channels have no readout component).
fn readout_flip(noise: Option<&NoiseSpec>) -> Option<f64> {
    let n = noise?;
    if n.channel != NoiseChannel::Device {
        return None;
    }
    let d = n.device.unwrap_or_default();
    let f = d.readout_flip * d.alpha;
    (f > 0.0).then_some(f)
}

fn sampling_mode(cfg: &ExperimentConfig, words: &[u64]) -> SamplingMode {
    match cfg.shots {
        ShotsConfig::Exact => SamplingMode::Exact,
        ShotsConfig::Shots { shots_per_group, seed } => SamplingMode::Shots(ShotPlan {
            shots_per_group,
            seed: mix_seed(seed, words),
        }),
    }
}

fn optimizer_config(cfg: &ExperimentConfig, instance: usize) -> OptimizeConfig {
    OptimizeConfig {
        max_iters: cfg.optimizer.max_iters,
        tol: cfg.optimizer.tol,
        restarts: cfg.optimizer.restarts,
        seed: mix_seed(cfg.ensemble.seed, &[instance as u64]),
    }
}

/// The Hamiltonian instances an experiment runs over: the uniform ring for
/// single-instance figures, the random isotropic-coupling ensemble otherwise.
fn instance_hamiltonians(cfg: &ExperimentConfig) -> Result<Vec<PauliSum>, CliError> {
    let q = cfg.q();
    match cfg.experiment {
        ExperimentKind::Fig1d | ExperimentKind::Fig1MomentsOnly | ExperimentKind::Fig3
        | ExperimentKind::Fig4 => Ok(vec![heisenberg_ring(q, &RingCouplings::Uniform)?]),
        _ => {
            let graphs = random_heisenberg_ensemble(q, cfg.ensemble.count, cfg.ensemble.seed)?;
            graphs.iter().map(|g| Ok(g.to_pauli_sum()?)).collect()
        }
    }
}

struct InstanceOutput {
    rows: Vec<EstimatorRow>,
    runs: Vec<OptimizationRun>,
}

/// One instance's full depth curve: noiseless optimization (trial states are
/// always trained without noise), then per-depth estimator reports — straight
/// from the exact K=5 pipeline when there is nothing to replay, otherwise by
/// replaying the optimized circuit under the noise model and measuring
/// through the TPB pipeline (K=4; cmx5 needs the fifth moment and is left
/// empty).
fn run_instance(
    cfg: &ExperimentConfig,
    index: usize,
    h: &PauliSum,
    noise: Option<&NoiseSpec>,
) -> Result<InstanceOutput, CliError> {
    let q = h.num_qubits();
    let opt = optimizer_config(cfg, index);
    let curve = convergence_curve(h, cfg.d_max(), &opt)?;
    let replay = noise.is_some() || matches!(cfg.shots, ShotsConfig::Shots { .. });
    let (e0, _) = exact_ground(h)?;
    let mut rows = Vec::with_capacity(curve.len());
    if replay {
        let powers = power_chain(h)?;
        let flip = readout_flip(noise);
        for pt in &curve {
            let circuit = pt.run.circuit(q)?;
            let state = apply_circuit(&circuit, &QuantumState::zero(q), noise)?;
            let mode = sampling_mode(cfg, &[index as u64, pt.run.d as u64]);
            let m = sample_moments(&powers, &state, &mode, flip)?;
            let report = estimate_report(&m, &powers, Some(e0))?;
            rows.push(EstimatorRow {
                instance_id: pt.run.hamiltonian_id.clone(),
                d: pt.run.d,
                n_cx: pt.n_cx,
                report,
                e0,
                extra: None,
                converged: pt.run.converged,
            });
        }
    } else {
        for pt in &curve {
            rows.push(EstimatorRow {
                instance_id: pt.run.hamiltonian_id.clone(),
                d: pt.run.d,
                n_cx: pt.n_cx,
                report: pt.report.clone(),
                e0,
                extra: None,
                converged: pt.run.converged,
            });
        }
    }
    Ok(InstanceOutput { rows, runs: curve.into_iter().map(|pt| pt.run).collect() })
}

/// fig1d / fig2b / fig2c_sim / custom: per-instance depth curves.
fn run_curves(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let noise = replay_noise(cfg)?;
    let hams = instance_hamiltonians(cfg)?;
    art.seed("ensemble", json!(cfg.ensemble.seed));
    art.seed(
        "optimizer",
        Value::Array((0..hams.len()).map(|i| json!(optimizer_config(cfg, i).seed)).collect()),
    );
    if let ShotsConfig::Shots { seed, .. } = cfg.shots {
        art.seed("shots", json!(seed));
    }

    let t = Instant::now();
    let outputs: Result<Vec<InstanceOutput>, CliError> = hams
        .par_iter()
        .enumerate()
        .map(|(i, h)| run_instance(cfg, i, h, noise.as_ref()))
        .collect();
    let outputs = outputs?;
    art.stage("optimize_and_estimate", t);

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for out in outputs {
        rows.extend(out.rows);
        runs.extend(out.runs);
    }
    art.count_estimator_rows(&rows);
    art.log_invariant_violations(&rows);
    art.write_text("estimators.csv", &estimators_csv(&rows, None))?;
    art.write_json("theta_archive.json", &serde_json::to_value(&runs)?)?;
    art.note("instances", json!(hams.len()));
    art.note("depths", json!(cfg.d_max()));
    if let Some(last) = rows.last() {
        if let Some(a) = &last.report.approx_errors {
            art.note("final_row_err_lanczos4", json!(a.lanczos4));
            art.note("final_row_err_variational", json!(a.variational));
        }
    }
    Ok(())
}

/// Applies exp(−iεG) to a statevector by its Taylor series.  G is dense and
/// modest (≤ 2^12), ε·‖G‖ is a few units at most, so the factorial wins
/// quickly; the result is renormalized to absorb truncation rounding.
pub fn gue_rotate(
    g: &DenseHamiltonian,
    amps: &[Complex64],
    eps: f64,
) -> Result<Vec<Complex64>, CliError> {
    let mut out = amps.to_vec();
    let mut term = amps.to_vec();
    for n in 1..=500 {
        let gv = g.apply(&term)?;
        let scale = Complex64::new(0.0, -eps / n as f64);
        let mut norm2 = 0.0;
        for (t, v) in term.iter_mut().zip(&gv) {
            *t = v * scale;
            norm2 += t.norm_sqr();
        }
        for (o, t) in out.iter_mut().zip(&term) {
            *o += t;
        }
        if norm2.sqrt() < 1e-16 {
            let norm = out.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            for a in out.iter_mut() {
                *a /= norm;
            }
            return Ok(out);
        }
    }
    Err(CliError::Failure("GUE rotation series did not converge in 500 terms".into()))
}

/// Finds ε ≥ 0 with |⟨ψ₀|exp(−iεG)|ψ₀⟩|² equal to the target fidelity, by
/// doubling to bracket the first crossing and then bisecting.  Returns
/// (ε, rotated amplitudes, achieved fidelity).
pub fn epsilon_for_fidelity(
    g: &DenseHamiltonian,
    amps0: &[Complex64],
    q: usize,
    target: f64,
) -> Result<(f64, Vec<Complex64>, f64), CliError> {
    if target >= 1.0 {
        return Ok((0.0, amps0.to_vec(), 1.0));
    }
    let eval = |eps: f64| -> Result<(f64, Vec<Complex64>), CliError> {
        let v = gue_rotate(g, amps0, eps)?;
        let s = QuantumState::from_amplitudes(q, v.clone())?;
        Ok((fidelity(&s, amps0)?, v))
    };
    let mut hi = 0.02;
    let (mut f_hi, mut v_hi) = eval(hi)?;
    let mut guard = 0;
    while f_hi > target {
        hi *= 2.0;
        let (f, v) = eval(hi)?;
        f_hi = f;
        v_hi = v;
        guard += 1;
        if guard > 60 {
            return Err(CliError::Failure(format!(
                "could not bracket fidelity target {target}"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        if (f_hi - target).abs() < 1e-10 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (f, v) = eval(mid)?;
        if f > target {
            lo = mid;
        } else {
            hi = mid;
            f_hi = f;
            v_hi = v;
        }
    }
    Ok((hi, v_hi, f_hi))
}

/// fig3: a (fidelity, p) robustness grid.  The uniform-ring trial state is
/// perturbed by a seeded GUE rotation dialed to each target fidelity, a
/// per-qubit depolarizing channel at strength p is applied, and all
/// estimators are evaluated from exact moments of the resulting density
/// matrix.  `margin = err_ht − err_lanczos4`, so positive margin means the
/// moment estimate beats the high-temperature benchmark; per fidelity row the
/// p at which the margin crosses zero is interpolated into `crossings.csv`.
fn run_fig3(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let q = cfg.q();
    let h = heisenberg_ring(q, &RingCouplings::Uniform)?;
    let id = hamiltonian_id(&h);
    let (e0, _) = exact_ground(&h)?;
    let powers = power_chain(&h)?;

    let t = Instant::now();
    let opt = optimizer_config(cfg, 0);
    art.seed("optimizer", json!(opt.seed));
    let curve = convergence_curve(&h, cfg.d_max(), &opt)?;
    let run = curve.last().expect("d_max >= 1").run.clone();
    let circuit = run.circuit(q)?;
    let base = apply_circuit(&circuit, &QuantumState::zero(q), None)?;
    let amps0 = match &base {
        QuantumState::Statevector { amps, .. } => amps.clone(),
        _ => unreachable!("noiseless circuit replay yields a statevector"),
    };
    art.stage("optimize", t);

    let gue_seed = mix_seed(cfg.ensemble.seed, &[0x617]);
    art.seed("gue", json!(gue_seed));
    let g = random_gue(1 << q, gue_seed)?;

    let t = Instant::now();
    let p_grid = cfg.p_grid();
    let mut grid = String::from(
        "f_target,f_actual,epsilon,p,variational,lanczos4,cmx5,ht_lanczos4,\
         err_variational,err_lanczos4,err_cmx5,err_ht_lanczos4,margin,advantage,flags,e0\n",
    );
    let mut crossings = String::from("f_target,f_actual,p_cross\n");
    let mut flagged = 0usize;
    let mut total = 0usize;
    for &f_target in &cfg.fidelity_grid {
        let (eps, amps, f_actual) = epsilon_for_fidelity(&g, &amps0, q, f_target)?;
        let rotated = QuantumState::from_amplitudes(q, amps)?;
        let mut margins: Vec<(f64, f64)> = Vec::with_capacity(p_grid.len());
        for &p in &p_grid {
            let mut rho = rotated.to_density()?;
            channel_local(&mut rho, p, LocalKind::Depolarize)?;
            let m = MomentSet::exact(moments_exact(&h, &rho, 5)?);
            let report = estimate_report(&m, &powers, Some(e0))?;
            let errs = report.approx_errors.expect("e0 was provided");
            let margin = errs.ht_lanczos4 - errs.lanczos4;
            let advantage = margin > 0.0;
            margins.push((p, margin));
            total += 1;
            if report.degenerate_flags.any() {
                flagged += 1;
            }
            writeln!(
                grid,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                fmt_f(f_target),
                fmt_f(f_actual),
                fmt_f(eps),
                fmt_f(p),
                fmt_f(report.variational),
                fmt_f(report.lanczos4),
                fmt_opt(report.cmx5),
                fmt_f(report.ht_lanczos4),
                fmt_f(errs.variational),
                fmt_f(errs.lanczos4),
                fmt_opt(errs.cmx5),
                fmt_f(errs.ht_lanczos4),
                fmt_f(margin),
                advantage,
                flags_str(&report.degenerate_flags),
                fmt_f(e0),
            )
            .unwrap();
        }
        let cross = margin_crossing(&margins);
        writeln!(crossings, "{},{},{}", fmt_f(f_target), fmt_f(f_actual), fmt_opt(cross))
            .unwrap();
    }
    art.stage("grid", t);
    art.count_rows(flagged, total);
    art.write_text("grid.csv", &grid)?;
    art.write_text("crossings.csv", &crossings)?;
    art.write_json(
        "theta_archive.json",
        &serde_json::to_value(curve.iter().map(|pt| &pt.run).collect::<Vec<_>>())?,
    )?;
    art.note("instance_id", json!(id));
    art.note("e0", json!(e0));
    art.note("energy_star", json!(run.energy_star));
    Ok(())
}

/// First p at which the advantage margin falls to zero, linearly
/// interpolated; `None` when the margin stays positive over the whole grid.
fn margin_crossing(margins: &[(f64, f64)]) -> Option<f64> {
    let (p0, m0) = *margins.first()?;
    if m0 <= 0.0 {
        return Some(p0);
    }
    for w in margins.windows(2) {
        let (pa, ma) = w[0];
        let (pb, mb) = w[1];
        if ma > 0.0 && mb <= 0.0 {
            return Some(pa + ma * (pb - pa) / (ma - mb));
        }
    }
    None
}

/// fig4: device-noise α-sweep.  One noiseless optimization at `d_max`, then
/// the optimized circuit is replayed per α with every device error rate
/// scaled by α (eSWAPs cost three CNOT-equivalent depolarizing applications;
/// readout flips are scaled the same way and enter the measurement
/// contraction).  Rows carry a trailing `alpha` column.
fn run_fig4(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let q = cfg.q();
    let h = heisenberg_ring(q, &RingCouplings::Uniform)?;
    let (e0, _) = exact_ground(&h)?;
    let powers = power_chain(&h)?;
    let base_dev = match cfg.noise {
        None => DeviceParams::default(),
        Some(n) if n.channel == NoiseChannel::Device => n.device.unwrap_or_default(),
        Some(_) => {
            return Err(CliError::Config(
                "fig4 sweeps the device model; its noise block must use channel \"device\""
                    .into(),
            ))
        }
    };

    let t = Instant::now();
    let opt = optimizer_config(cfg, 0);
    art.seed("optimizer", json!(opt.seed));
    let curve = convergence_curve(&h, cfg.d_max(), &opt)?;
    let run = curve.last().expect("d_max >= 1").run.clone();
    let circuit = run.circuit(q)?;
    let n_cx = curve.last().unwrap().n_cx;
    art.stage("optimize", t);

    let t = Instant::now();
    let mut rows = Vec::with_capacity(cfg.alphas.len());
    for (ai, &alpha) in cfg.alphas.iter().enumerate() {
        let dev = DeviceParams { alpha, ..base_dev };
        let noise = NoiseSpec { channel: NoiseChannel::Device, p: 0.0, device: Some(dev) };
        let state = apply_circuit(&circuit, &QuantumState::zero(q), Some(&noise))?;
        let flip = readout_flip(Some(&noise));
        let mode = sampling_mode(cfg, &[ai as u64, run.d as u64]);
        let m = sample_moments(&powers, &state, &mode, flip)?;
        let report = estimate_report(&m, &powers, Some(e0))?;
        rows.push(EstimatorRow {
            instance_id: run.hamiltonian_id.clone(),
            d: run.d,
            n_cx,
            report,
            e0,
            extra: Some(alpha),
            converged: run.converged,
        });
    }
    art.stage("alpha_sweep", t);
    art.count_estimator_rows(&rows);
    art.write_text("estimators.csv", &estimators_csv(&rows, Some("alpha")))?;
    art.write_json(
        "theta_archive.json",
        &serde_json::to_value(curve.iter().map(|pt| &pt.run).collect::<Vec<_>>())?,
    )?;
    art.note("e0", json!(e0));
    art.note("alphas", json!(cfg.alphas));
    Ok(())
}

/// whitenoise: the analytic truncated-oscillator cancellation table — no
/// circuits, no states, pure closed forms on both moment routes.
fn run_whitenoise(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let spec = OscillatorSpectrum {
        ground_energy: cfg.scenario.ground_energy,
        gap: cfg.scenario.gap,
        num_levels: cfg.scenario.num_levels as usize,
    };
    let t = Instant::now();
    let table = cancellation_experiment(&spec, &cfg.p_grid())?;
    art.stage("sweep", t);

    let mut csv = String::from(
        "p,variational,lanczos4,cmx5,dev_variational,dev_lanczos4,dev_cmx5,\
         lanczos4_degenerate,cmx5_degenerate,lanczos4_formal,cmx5_formal,\
         dev_lanczos4_formal,dev_cmx5_formal,e0\n",
    );
    let mut flagged = 0usize;
    for r in &table.rows {
        if r.lanczos4_degenerate || r.cmx5_degenerate {
            flagged += 1;
        }
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f(r.p),
            fmt_f(r.variational),
            fmt_f(r.lanczos4),
            fmt_f(r.cmx5),
            fmt_f(r.dev_variational),
            fmt_f(r.dev_lanczos4),
            fmt_f(r.dev_cmx5),
            r.lanczos4_degenerate,
            r.cmx5_degenerate,
            fmt_f(r.lanczos4_formal),
            fmt_f(r.cmx5_formal),
            fmt_f(r.dev_lanczos4_formal),
            fmt_f(r.dev_cmx5_formal),
            fmt_f(spec.ground_energy),
        )
        .unwrap();
    }
    art.count_rows(flagged, table.rows.len());
    art.write_text("whitenoise.csv", &csv)?;
    art.note("lanczos4_offset", json!(table.lanczos4_offset));
    art.note("spread_lanczos4", json!(table.spread_lanczos4));
    art.note("spread_lanczos4_formal", json!(table.spread_lanczos4_formal));
    art.note("degenerate_spectrum", json!(table.degenerate_spectrum));
    Ok(())
}

/// fig1_moments_only: symbolic powers and the H⁴ measurement grouping at
/// full scale, with no quantum state anywhere.
fn run_moments_only(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let q = cfg.q();
    let h = heisenberg_ring(q, &RingCouplings::Uniform)?;

    let t = Instant::now();
    let powers = power_chain(&h)?;
    art.stage("powers", t);
    let mut csv = String::from("k,term_count,identity_coefficient\n");
    for (k, p) in powers.iter().enumerate() {
        writeln!(csv, "{},{},{}", k + 1, p.term_count(), fmt_f(p.identity_coefficient()))
            .unwrap();
    }
    art.write_text("powers.csv", &csv)?;

    let t = Instant::now();
    let grouping = group_tpb(&powers[3]);
    art.stage("grouping", t);
    art.write_json(
        "grouping.json",
        &json!({
            "num_qubits": grouping.num_qubits,
            "group_count": grouping.group_count(),
            "total_members": grouping.total_members(),
            "identity_coefficient": grouping.identity_coefficient,
            "qubitwise_commuting": grouping.is_qubitwise_commuting(),
            "groups": serde_json::to_value(grouping.summaries())?,
        }),
    )?;
    art.note("hamiltonian_id", json!(hamiltonian_id(&h)));
    art.note(
        "term_counts",
        json!(powers.iter().map(|p| p.term_count()).collect::<Vec<_>>()),
    );
    art.note("h4_group_count", json!(grouping.group_count()));
    Ok(())
}

/// One cell of the advantage map: does the moment estimate beat the
/// high-temperature benchmark by more than [`HT_ADVANTAGE_TOL`]?  Equality —
/// e.g. rows measured on the maximally mixed state, or fully whitened at
/// p = 1 — counts as no advantage.
#[derive(Debug, Clone, serde::Serialize)]
pub struct HtMapCell {
    pub instance_id: String,
    pub d: usize,
    pub lanczos4: f64,
    pub ht_lanczos4: f64,
    pub margin: f64,
    pub advantage: bool,
}

/// Builds the advantage map from rows of any estimators CSV produced by this
/// crate (columns are located by header name, so the fig4 alpha extension
/// parses too).
pub fn ht_advantage_map(csv: &str) -> Result<Vec<HtMapCell>, CliError> {
    let mut lines = csv.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config("empty estimators CSV".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let col = |name: &str| -> Result<usize, CliError> {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| CliError::Config(format!("estimators CSV lacks a `{name}` column")))
    };
    let (ci, cd, cl, ch) = (col("instance_id")?, col("d")?, col("lanczos4")?, col("ht_lanczos4")?);
    let mut cells = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse_f = |idx: usize| -> Result<f64, CliError> {
            fields
                .get(idx)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| {
                    CliError::Config(format!("bad numeric field on CSV line {}", lineno + 2))
                })
        };
        let d = fields
            .get(cd)
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| CliError::Config(format!("bad depth on CSV line {}", lineno + 2)))?;
        let lanczos4 = parse_f(cl)?;
        let ht_lanczos4 = parse_f(ch)?;
        let margin = ht_lanczos4 - lanczos4;
        cells.push(HtMapCell {
            instance_id: fields.get(ci).unwrap_or(&"").to_string(),
            d,
            lanczos4,
            ht_lanczos4,
            margin,
            advantage: margin > HT_ADVANTAGE_TOL,
        });
    }
    Ok(cells)
}

pub fn ht_map_csv(cells: &[HtMapCell]) -> String {
    let mut s = String::from("instance_id,d,lanczos4,ht_lanczos4,margin,advantage\n");
    for c in cells {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            c.instance_id,
            c.d,
            fmt_f(c.lanczos4),
            fmt_f(c.ht_lanczos4),
            fmt_f(c.margin),
            c.advantage
        )
        .unwrap();
    }
    s
}
