//! Experiment runners behind the command-line tool: single runs, parameter
//! sweeps and the lower-bound fixture check.
//!
//! A run is described by one JSON [`ExperimentConfig`]. Every effective
//! parameter, including tuned ones, is written to a metadata sidecar next to
//! the trajectory CSV.

mod lowerbound;
mod sweep;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::accel::{tune, AccelParams, InnerRule};
use crate::datagen::{gen_ridge, load_libsvm, LibsvmOptions, SyntheticRidgeConfig};
use crate::diagnostics::{
    centralized_solve, comms_to_accuracy, run_diagnosed, DiagnosedRun, DiagnosticOptions, TRAJECTORY_SCHEMA_VERSION,
};
use crate::error::{Error, Result};
use crate::network::{build_gossip, GossipMatrix, Topology};
use crate::problems::{estimate_constants, Constants, ProblemSpec};
use crate::sonata::{SolverOptions, SurrogateKind, TrackingInit};

pub use lowerbound::{lowerbound_check, LowerBoundReport};
pub use sweep::{calibrate, sweep, write_sweep_csv, Calibration, SweepAxis, SweepRow, SweepSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSource {
    Synthetic(SyntheticRidgeConfig),
    Libsvm(LibsvmSource),
}

/// A LIBSVM file and how to shard it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibsvmSource {
    pub path: PathBuf,
    pub options: LibsvmOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub graph: Topology,
    pub seed: u64,
    /// Accelerate the base matrix with Chebyshev rounds until ρ ≤ target.
    pub target_rho: Option<f64>,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig { graph: Topology::ErdosRenyi { p: 0.5 }, seed: 0, target_rho: None }
    }
}

/// Which algorithm a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    AccF,
    AccL,
    /// Plain SONATA-F (δ = 0).
    SonataF,
    /// Plain SONATA-L (δ = 0).
    SonataL,
}

impl Variant {
    pub fn surrogate(self) -> SurrogateKind {
        match self {
            Variant::AccF | Variant::SonataF => SurrogateKind::F,
            Variant::AccL | Variant::SonataL => SurrogateKind::L,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::AccF => "acc-f",
            Variant::AccL => "acc-l",
            Variant::SonataF => "sonata-f",
            Variant::SonataL => "sonata-l",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub variant: Variant,
    pub inner_rule: InnerRule,
    /// Overrides of the tuned values.
    pub delta: Option<f64>,
    /// Sets δ = μ/α² − μ; conflicts with `delta`.
    pub alpha: Option<f64>,
    pub mu: Option<f64>,
    pub inner_iters: Option<usize>,
    pub surrogate_prox: Option<f64>,
    pub k_max: usize,
    pub c_seq: f64,
    /// Stop once Δ ≤ target_gap at the end of an outer iteration.
    pub target_gap: Option<f64>,
    pub tracking_init: TrackingInit,
    pub solver: SolverOptions,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        AlgorithmConfig {
            variant: Variant::AccF,
            inner_rule: InnerRule::Standard,
            delta: None,
            alpha: None,
            mu: None,
            inner_iters: None,
            surrogate_prox: None,
            k_max: 200,
            c_seq: 0.5,
            target_gap: Some(1e-4),
            tracking_init: TrackingInit::Local,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub potentials: bool,
    pub check_tracking: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSource,
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default)]
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// When set, replaces the problem and topology seeds.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemSource::Synthetic(SyntheticRidgeConfig::default()),
            topology: TopologyConfig::default(),
            algorithm: AlgorithmConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
            output: None,
            seed: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config(json_path_hint(&e), e.to_string()))?;
        cfg.apply_seed();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read config: {e}")))?;
        Self::from_json(&text)
    }

    /// Pushes the top-level seed into the problem and topology blocks.
    pub fn apply_seed(&mut self) {
        if let Some(seed) = self.seed {
            match &mut self.problem {
                ProblemSource::Synthetic(s) => s.seed = seed,
                ProblemSource::Libsvm(l) => l.options.seed = seed,
            }
            self.topology.seed = seed;
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.problem {
            ProblemSource::Synthetic(s) => {
                s.validate().map_err(|e| Error::config("problem.synthetic", e.to_string()))?
            }
            ProblemSource::Libsvm(l) if !l.path.exists() => {
                return Err(Error::config("problem.libsvm.path", format!("{} does not exist", l.path.display())))
            }
            ProblemSource::Libsvm(l) if l.options.m == 0 => {
                return Err(Error::config("problem.libsvm.options.m", "must be >= 1"))
            }
            ProblemSource::Libsvm(_) => {}
        }
        let alg = &self.algorithm;
        if alg.delta.is_some() && alg.alpha.is_some() {
            return Err(Error::config("algorithm.alpha", "set at most one of delta and alpha"));
        }
        if let Some(a) = alg.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::config("algorithm.alpha", "must lie in (0, 1]"));
            }
        }
        if let Some(d) = alg.delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::config("algorithm.delta", "must be >= 0"));
            }
        }
        if let Some(mu) = alg.mu {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::config("algorithm.mu", "must be > 0"));
            }
        }
        if alg.inner_iters == Some(0) {
            return Err(Error::config("algorithm.inner_iters", "must be >= 1"));
        }
        if let ProblemSource::Synthetic(s) = &self.problem {
            if let Topology::ErdosRenyi { p } = self.topology.graph {
                if !(p > 0.0 && p <= 1.0) && s.m > 1 {
                    return Err(Error::config("topology.graph.p", "must lie in (0, 1]"));
                }
            }
        }
        if self.algorithm.k_max == 0 {
            return Err(Error::config("algorithm.k_max", "must be >= 1"));
        }
        if !(self.algorithm.c_seq > 0.0 && self.algorithm.c_seq < 1.0) {
            return Err(Error::config("algorithm.c_seq", "must lie in (0, 1)"));
        }
        if let Some(t) = self.topology.target_rho {
            if !(0.0..1.0).contains(&t) {
                return Err(Error::config("topology.target_rho", "must lie in [0, 1)"));
            }
        }
        Ok(())
    }

    pub fn agents(&self) -> usize {
        match &self.problem {
            ProblemSource::Synthetic(s) => s.m,
            ProblemSource::Libsvm(l) => l.options.m,
        }
    }
}

fn json_path_hint(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    match msg.split('`').nth(1) {
        Some(field) if msg.contains("field") => field.to_string(),
        _ => format!("line {} column {}", e.line(), e.column()),
    }
}

pub fn build_problem(source: &ProblemSource) -> Result<ProblemSpec> {
    match source {
        ProblemSource::Synthetic(cfg) => Ok(gen_ridge(cfg)?.problem),
        ProblemSource::Libsvm(l) => load_libsvm(&l.path, &l.options),
    }
}

/// Tuned parameters for a variant, with config overrides applied.
pub fn algorithm_params(c: &Constants, alg: &AlgorithmConfig) -> Result<AccelParams> {
    let mode = alg.variant.surrogate();
    let mu = alg.mu.unwrap_or(c.mu);
    let c_eff = Constants { mu, ..*c };
    let mut params = match alg.variant {
        Variant::AccF | Variant::AccL => tune(&c_eff, mode, alg.inner_rule, alg.k_max)?,
        Variant::SonataF => AccelParams::with_delta(mode, mu, 0.0, c.beta.max(0.0), 1, alg.k_max)?,
        Variant::SonataL => AccelParams::with_delta(mode, mu, 0.0, c.l, 1, alg.k_max)?,
    };
    let delta = alg.delta.or(alg.alpha.map(|a| mu / (a * a) - mu));
    if let Some(delta) = delta {
        let prox = match mode {
            SurrogateKind::F => params.surrogate_prox,
            SurrogateKind::L => c.l + delta,
        };
        params = AccelParams::with_delta(mode, mu, delta, prox, params.inner_iters, alg.k_max)?;
    }
    if let Some(t) = alg.inner_iters {
        params.inner_iters = t;
    }
    if let Some(p) = alg.surrogate_prox {
        params.surrogate_prox = p;
    }
    params.c_seq = alg.c_seq;
    Ok(params)
}

#[derive(Debug, Clone, Serialize)]
pub struct GossipInfo {
    pub nodes: usize,
    pub rho: f64,
    pub rounds_per_application: usize,
}

impl From<&GossipMatrix> for GossipInfo {
    fn from(w: &GossipMatrix) -> Self {
        GossipInfo { nodes: w.nodes(), rho: w.rho(), rounds_per_application: w.rounds_per_application() }
    }
}

/// Everything the metadata sidecar records.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub constants: Constants,
    pub kappa: f64,
    pub beta_over_mu: f64,
    pub params: AccelParams,
    pub gossip: GossipInfo,
    pub u_star: f64,
    pub outer_iters: usize,
    pub total_comms: usize,
    pub final_gap: f64,
    pub comms_to_target: Option<usize>,
    pub unconverged_subproblem_steps: usize,
}

pub struct RunOutcome {
    pub diagnosed: DiagnosedRun,
    pub metadata: RunMetadata,
}

/// Builds the problem and network, tunes, and runs one experiment.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let problem = build_problem(&cfg.problem)?;
    let constants = estimate_constants(&problem)?;
    let gossip = build_gossip(cfg.topology.graph, problem.agents(), cfg.topology.seed, cfg.topology.target_rho)?;
    execute_on(cfg, &problem, &constants, &gossip)
}

pub fn execute_on(
    cfg: &ExperimentConfig,
    problem: &ProblemSpec,
    constants: &Constants,
    gossip: &GossipMatrix,
) -> Result<RunOutcome> {
    let params = algorithm_params(constants, &cfg.algorithm)?;
    let oracle = centralized_solve(problem, 1e-12)?;
    let opts = DiagnosticOptions {
        potentials: cfg.diagnostics.potentials.then_some(*constants),
        target_gap: cfg.algorithm.target_gap,
        check_tracking: cfg.diagnostics.check_tracking,
        oracle_tol: 1e-12,
    };
    let diagnosed =
        run_diagnosed(problem, &params, gossip, cfg.algorithm.solver, cfg.algorithm.tracking_init, &oracle, opts)?;
    let final_gap = diagnosed.trajectory.records.last().map(|r| r.gap).unwrap_or(f64::NAN);
    let metadata = RunMetadata {
        schema_version: TRAJECTORY_SCHEMA_VERSION,
        config: cfg.clone(),
        constants: *constants,
        kappa: constants.kappa(),
        beta_over_mu: constants.beta_over_mu(),
        params,
        gossip: gossip.into(),
        u_star: oracle.u_star,
        outer_iters: diagnosed.run.outer_iters,
        total_comms: diagnosed.run.comms,
        final_gap,
        comms_to_target: cfg.algorithm.target_gap.and_then(|t| comms_to_accuracy(&diagnosed.trajectory, t)),
        unconverged_subproblem_steps: diagnosed.run.unconverged_steps,
    };
    Ok(RunOutcome { diagnosed, metadata })
}

/// Paths written by [`run`].
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub trajectory: PathBuf,
    pub metadata: PathBuf,
}

/// Runs and writes `<stem>.csv` plus `<stem>.json` into `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path, stem: &str) -> Result<(RunOutcome, RunFiles)> {
    let outcome = execute(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let files =
        RunFiles { trajectory: out_dir.join(format!("{stem}.csv")), metadata: out_dir.join(format!("{stem}.json")) };
    outcome.diagnosed.trajectory.write_csv(BufWriter::new(File::create(&files.trajectory)?))?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(&files.metadata)?), &outcome.metadata)?;
    Ok((outcome, files))
}
