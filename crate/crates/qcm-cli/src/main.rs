//! `qcm` — quantum-computed-moments experiments from the command line.
//!
//! Unit verbs (`build-ham`, `powers`, `group`, `optimize`, `estimate`) take
//! their own small flag sets; the figure drivers (`sweep`, `whitenoise`)
//! read a JSON experiment config via `--config`, and `ht-map` post-processes
//! an estimators CSV.  Exit codes: 0 success, 2 configuration error, 3 when
//! degenerate-estimator flags exceed the configured threshold.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use qcm_cli::config::{ExperimentConfig, ExperimentKind, ShotsConfig};
use qcm_cli::experiment::{self, RunSummary};
use qcm_cli::CliError;

use qcm_core::hamiltonian::{heisenberg_ring, random_heisenberg_ensemble, RingCouplings};
use qcm_core::measure::{group_tpb, group_union};
use qcm_core::pauli::{multiply, PauliSum};
use qcm_core::vqe::{convergence_curve, hamiltonian_id, optimize, OptimizeConfig};

#[derive(Parser)]
#[command(
    name = "qcm",
    version,
    about = "Ground-state energy estimation from Hamiltonian moments: symbolic powers, \
             measurement grouping, trial-state optimization, and noise-robustness sweeps"
)]
struct Cli {
    /// Overrides every seed in the config (ensemble, optimizer, shots).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel sections (default: all logical CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory (overrides the config's output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// JSON experiment config file.
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a Heisenberg ring Hamiltonian and write it as JSON.
    BuildHam {
        /// Number of qubits (even).
        #[arg(long, default_value_t = 12)]
        q: usize,
        /// Coupling pattern: "uniform" or "random" (seeded by --seed).
        #[arg(long, default_value = "uniform")]
        couplings: String,
    },
    /// Term counts and identity coefficients of the symbolic powers H^1..H^k.
    Powers {
        #[arg(long, default_value_t = 12)]
        q: usize,
        #[arg(long, default_value_t = 4)]
        k_max: usize,
    },
    /// Qubit-wise-commuting measurement grouping of H^k (or the union of
    /// H^1..H^k with --union).
    Group {
        #[arg(long, default_value_t = 12)]
        q: usize,
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Group the deduplicated union of all powers up to k instead of H^k
        /// alone.
        #[arg(long)]
        union: bool,
    },
    /// Optimize the trial state at one depth and archive θ*.
    Optimize {
        #[arg(long, default_value_t = 12)]
        q: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
    },
    /// Warm-started depth curve 1..d with the full estimator report per depth
    /// (exact moments, zero noise).
    Estimate {
        #[arg(long, default_value_t = 12)]
        q: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
    },
    /// Run the experiment described by --config end to end.
    Sweep,
    /// White-noise cancellation table (uses --config when given, else the
    /// default truncated-oscillator scenario).
    Whitenoise,
    /// Which rows of an estimators CSV beat the high-temperature benchmark.
    HtMap {
        /// estimators.csv from a previous run.
        #[arg(long)]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("configuration error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn load_config(cli: &Cli) -> Result<Option<ExperimentConfig>, CliError> {
    let Some(path) = &cli.config else {
        return Ok(None);
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text).map_err(CliError::Config)?;
    if let Some(seed) = cli.seed {
        cfg.ensemble.seed = seed;
        if let ShotsConfig::Shots { shots_per_group, .. } = cfg.shots {
            cfg.shots = ShotsConfig::Shots { shots_per_group, seed };
        }
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(Some(cfg))
}

fn write_json(dir: &PathBuf, name: &str, value: &serde_json::Value) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

fn ring_for(q: usize, couplings: &str, seed: u64) -> Result<PauliSum, CliError> {
    if q == 0 || q % 2 != 0 || q > 24 {
        return Err(CliError::Config(format!("q = {q} must be even and within 2..=24")));
    }
    match couplings {
        "uniform" => Ok(heisenberg_ring(q, &RingCouplings::Uniform)?),
        "random" => {
            let graphs = random_heisenberg_ensemble(q, 1, seed)?;
            Ok(graphs[0].to_pauli_sum()?)
        }
        other => Err(CliError::Config(format!(
            "unknown couplings `{other}` (expected uniform or random)"
        ))),
    }
}

fn power_list(h: &PauliSum, k_max: usize) -> Result<Vec<PauliSum>, CliError> {
    if !(1..=5).contains(&k_max) {
        return Err(CliError::Config(format!("k = {k_max} outside 1..=5")));
    }
    let mut powers = vec![h.clone()];
    for _ in 1..k_max {
        let next = multiply(powers.last().unwrap(), h)?;
        powers.push(next);
    }
    Ok(powers)
}

fn report_summary(s: &RunSummary) {
    for p in &s.outputs {
        println!("wrote {}", p.display());
    }
    println!("rows: {} total, {} flagged", s.total_rows, s.flagged_rows);
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::BuildHam { q, couplings } => {
            let h = ring_for(*q, couplings, cli.seed.unwrap_or(0))?;
            let dir = out_dir(&cli);
            let path = write_json(
                &dir,
                "hamiltonian.json",
                &json!({
                    "q": q,
                    "couplings": couplings,
                    "seed": cli.seed.unwrap_or(0),
                    "hamiltonian_id": hamiltonian_id(&h),
                    "term_count": h.term_count(),
                    "pauli_sum": serde_json::to_value(&h)?,
                }),
            )?;
            println!("wrote {}", path.display());
            println!("hamiltonian_id={} terms={}", hamiltonian_id(&h), h.term_count());
            Ok(())
        }
        Command::Powers { q, k_max } => {
            let h = ring_for(*q, "uniform", 0)?;
            let powers = power_list(&h, *k_max)?;
            let dir = out_dir(&cli);
            fs::create_dir_all(&dir)?;
            let mut csv = String::from("k,term_count,identity_coefficient\n");
            for (k, p) in powers.iter().enumerate() {
                csv.push_str(&format!(
                    "{},{},{:.12e}\n",
                    k + 1,
                    p.term_count(),
                    p.identity_coefficient()
                ));
                println!("H^{}: {} terms", k + 1, p.term_count());
            }
            let path = dir.join("powers.csv");
            fs::write(&path, csv)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Group { q, k, union } => {
            let h = ring_for(*q, "uniform", 0)?;
            let powers = power_list(&h, *k)?;
            let grouping = if *union {
                group_union(&powers)?
            } else {
                group_tpb(powers.last().unwrap())
            };
            let dir = out_dir(&cli);
            let path = write_json(
                &dir,
                "grouping.json",
                &json!({
                    "num_qubits": grouping.num_qubits,
                    "source": if *union { format!("union H^1..H^{k}") } else { format!("H^{k}") },
                    "group_count": grouping.group_count(),
                    "total_members": grouping.total_members(),
                    "identity_coefficient": grouping.identity_coefficient,
                    "qubitwise_commuting": grouping.is_qubitwise_commuting(),
                    "groups": serde_json::to_value(grouping.summaries())?,
                }),
            )?;
            println!("wrote {}", path.display());
            println!(
                "{} groups covering {} strings",
                grouping.group_count(),
                grouping.total_members()
            );
            Ok(())
        }
        Command::Optimize { q, d } => {
            let h = ring_for(*q, "uniform", 0)?;
            let cfg = OptimizeConfig { seed: cli.seed.unwrap_or(0), ..OptimizeConfig::default() };
            let run = optimize(&h, *d, &cfg, None)?;
            let dir = out_dir(&cli);
            let path = write_json(&dir, "theta_archive.json", &serde_json::to_value(vec![&run])?)?;
            println!("wrote {}", path.display());
            println!(
                "d={} energy={:.12e} converged={} iterations={}",
                run.d, run.energy_star, run.converged, run.iterations
            );
            Ok(())
        }
        Command::Estimate { q, d } => {
            let h = ring_for(*q, "uniform", 0)?;
            let cfg = OptimizeConfig { seed: cli.seed.unwrap_or(0), ..OptimizeConfig::default() };
            let curve = convergence_curve(&h, *d, &cfg)?;
            for pt in &curve {
                let errs = pt.report.approx_errors.expect("exact reference is computed");
                println!(
                    "d={} n_cx={} variational={:.12e} lanczos4={:.12e} err_lanczos4={:.6e}",
                    pt.run.d, pt.n_cx, pt.report.variational, pt.report.lanczos4, errs.lanczos4
                );
            }
            let dir = out_dir(&cli);
            let path =
                write_json(&dir, "estimate.json", &serde_json::to_value(&curve)?)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Sweep => {
            let cfg = load_config(&cli)?
                .ok_or_else(|| CliError::Config("sweep requires --config <JSON>".into()))?;
            let summary = experiment::run_experiment(&cfg)?;
            report_summary(&summary);
            Ok(())
        }
        Command::Whitenoise => {
            let cfg = match load_config(&cli)? {
                Some(c) => {
                    if c.experiment != ExperimentKind::Whitenoise {
                        return Err(CliError::Config(
                            "whitenoise verb requires a whitenoise config".into(),
                        ));
                    }
                    c
                }
                None => {
                    let dir = out_dir(&cli);
                    let text = format!(
                        r#"{{"experiment": "whitenoise", "output_dir": {:?}}}"#,
                        dir.to_str().ok_or_else(|| {
                            CliError::Config("output path is not valid UTF-8".into())
                        })?
                    );
                    ExperimentConfig::from_json(&text).map_err(CliError::Config)?
                }
            };
            let summary = experiment::run_experiment(&cfg)?;
            report_summary(&summary);
            Ok(())
        }
        Command::HtMap { input } => {
            let text = fs::read_to_string(input)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", input.display())))?;
            let cells = experiment::ht_advantage_map(&text)?;
            let dir = out_dir(&cli);
            fs::create_dir_all(&dir)?;
            let path = dir.join("ht_map.csv");
            fs::write(&path, experiment::ht_map_csv(&cells))?;
            let wins = cells.iter().filter(|c| c.advantage).count();
            println!("wrote {}", path.display());
            println!("{}/{} cells beat the high-temperature benchmark", wins, cells.len());
            Ok(())
        }
    }
}
