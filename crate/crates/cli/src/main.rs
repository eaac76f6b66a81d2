//! Command-line experiment runner.
//!
//! Output directory precedence: `--output-dir` flag, then the
//! `ACCSONATA_OUTPUT_DIR` environment variable, then the config's `output`
//! field, then the current directory.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use accsonata::accel::InnerRule;
use accsonata::experiment::{self, ExperimentConfig, SweepSpec, Variant};
use accsonata::problems::estimate_constants;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "accsonata", version, about = "Accelerated decentralized optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutputArgs {
    /// Directory for CSV and JSON outputs.
    #[arg(long, env = "ACCSONATA_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
}

impl OutputArgs {
    fn resolve(&self, config_output: Option<&Path>) -> PathBuf {
        self.output_dir.clone().or_else(|| config_output.map(Path::to_path_buf)).unwrap_or_else(|| PathBuf::from("."))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write <stem>.csv and <stem>.json.
    Run {
        /// JSON experiment config.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
        /// File stem for the outputs.
        #[arg(long, default_value = "trajectory")]
        stem: String,
        /// Overrides the problem and topology seeds.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_variant)]
        variant: Option<Variant>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        target_gap: Option<f64>,
        #[arg(long, value_parser = parse_rule)]
        inner_rule: Option<InnerRule>,
        /// Record g + e and P^k.
        #[arg(long)]
        potentials: bool,
    },
    /// Run a sweep and write sweep_<axis>.csv.
    Sweep {
        /// JSON sweep spec.
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Build the line network and hard instance and check support propagation.
    LowerboundCheck {
        #[arg(long, default_value_t = 0.01)]
        mu: f64,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long, default_value_t = 0.9)]
        rho: f64,
        #[arg(long, default_value_t = 20)]
        d: usize,
        #[arg(long, default_value_t = 50)]
        rounds: usize,
        #[arg(long, default_value_t = 1e-4)]
        target_gap: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Print μ̂, L̂, L_max, β̂, κ̂ and β̂/μ̂ for a config's problem as JSON.
    EstimateConstants {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown variant {s:?}; expected acc-f, acc-l, sonata-f or sonata-l"))
}

fn parse_rule(s: &str) -> Result<InnerRule, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown inner rule {s:?}; expected standard or alternative"))
}

fn write_json<T: serde::Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)?;
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, output, stem, seed, variant, k_max, target_gap, inner_rule, potentials } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if seed.is_some() {
                cfg.seed = seed;
                cfg.apply_seed();
            }
            if let Some(v) = variant {
                cfg.algorithm.variant = v;
            }
            if let Some(k) = k_max {
                cfg.algorithm.k_max = k;
            }
            if target_gap.is_some() {
                cfg.algorithm.target_gap = target_gap;
            }
            if let Some(r) = inner_rule {
                cfg.algorithm.inner_rule = r;
            }
            cfg.diagnostics.potentials |= potentials;
            cfg.validate()?;
            let dir = output.resolve(cfg.output.as_deref());
            let (outcome, files) = experiment::run(&cfg, &dir, &stem)?;
            let m = &outcome.metadata;
            println!(
                "{}: {} outer iterations, {} comms, final gap {:.3e}, comms to target {}",
                cfg.algorithm.variant.name(),
                m.outer_iters,
                m.total_comms,
                m.final_gap,
                m.comms_to_target.map_or("not reached".to_string(), |c| c.to_string())
            );
            println!("wrote {} and {}", files.trajectory.display(), files.metadata.display());
        }
        Command::Sweep { spec, output } => {
            let text = std::fs::read_to_string(&spec).with_context(|| format!("cannot read {}", spec.display()))?;
            let spec: SweepSpec =
                serde_json::from_str(&text).with_context(|| format!("invalid sweep spec {}", spec.display()))?;
            let rows = experiment::sweep(&spec)?;
            let dir = output.resolve(None);
            std::fs::create_dir_all(&dir)?;
            let path = dir.join(format!("sweep_{}.csv", spec.axis.name()));
            experiment::write_sweep_csv(spec.axis, &rows, BufWriter::new(File::create(&path)?))?;
            for r in &rows {
                let comms: Vec<String> = r
                    .comms
                    .iter()
                    .map(|(v, c)| format!("{}={}", v.name(), c.map_or("-".to_string(), |c| c.to_string())))
                    .collect();
                println!(
                    "point {}: n={} beta/mu={:.1} kappa={:.1} {}",
                    r.point,
                    r.n,
                    r.constants.beta_over_mu(),
                    r.constants.kappa(),
                    comms.join(" ")
                );
            }
            println!("wrote {}", path.display());
        }
        Command::LowerboundCheck { mu, beta, rho, d, rounds, target_gap, output } => {
            let report = experiment::lowerbound_check(mu, beta, rho, d, rounds, target_gap)?;
            let dir = output.resolve(None);
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("lowerbound.json");
            write_json(&path, &report)?;
            println!(
                "rho target {} achieved {:.9} on {} nodes; d_c = {} (cut bound {:.3}); {} rounds, final gap {:.3e}",
                report.rho_target,
                report.rho_achieved,
                report.nodes,
                report.d_c,
                report.cut_bound,
                report.rounds_run,
                report.final_gap
            );
            println!("wrote {}", path.display());
            if !report.invariant_holds {
                bail!("support-propagation invariant violated");
            }
        }
        Command::EstimateConstants { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let problem = experiment::build_problem(&cfg.problem)?;
            let c = estimate_constants(&problem)?;
            let out = serde_json::json!({
                "mu": c.mu,
                "l": c.l,
                "l_max": c.l_max,
                "beta": c.beta,
                "kappa": c.kappa(),
                "beta_over_mu": c.beta_over_mu(),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
    }
    Ok(())
}
