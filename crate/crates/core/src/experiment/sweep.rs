use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{execute_on, AlgorithmConfig, ExperimentConfig, ProblemSource, TopologyConfig, Variant};
use crate::datagen::{gen_ridge, SyntheticRidgeConfig};
use crate::error::{Error, Result};
use crate::network::build_gossip;
use crate::problems::{estimate_constants, Constants, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Points are target β/μ values at the fixed κ in `SweepSpec::fixed`.
    BetaOverMu,
    /// Points are target κ values at the fixed β/μ in `SweepSpec::fixed`.
    Kappa,
    /// Points are local sample sizes n.
    Samples,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::BetaOverMu => "beta_over_mu",
            SweepAxis::Kappa => "kappa",
            SweepAxis::Samples => "samples",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Generator settings; n and λ are overwritten per point on the
    /// calibrated axes.
    pub base: SyntheticRidgeConfig,
    pub axis: SweepAxis,
    pub points: Vec<f64>,
    /// The quantity held fixed: κ for the β/μ axis, β/μ for the κ axis.
    #[serde(default)]
    pub fixed: Option<f64>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default)]
    pub algorithm: AlgorithmConfig,
    /// Accuracy at which comms are reported.
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_n_bounds")]
    pub n_bounds: (usize, usize),
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::AccF, Variant::AccL]
}

fn default_eps() -> f64 {
    1e-4
}

fn default_n_bounds() -> (usize, usize) {
    (100, 40_000)
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate().map_err(|e| Error::config("base", e.to_string()))?;
        if self.points.is_empty() {
            return Err(Error::config("points", "need at least one point"));
        }
        if self.variants.is_empty() {
            return Err(Error::config("variants", "need at least one variant"));
        }
        match self.axis {
            SweepAxis::Samples if self.points.iter().any(|&n| !(n >= 1.0 && n.fract() == 0.0)) => {
                Err(Error::config("points", "sample sizes must be positive integers"))
            }
            SweepAxis::BetaOverMu | SweepAxis::Kappa if self.fixed.is_none_or(|f| !(f > 1.0)) => {
                Err(Error::config("fixed", "the calibrated axes need a fixed value > 1"))
            }
            SweepAxis::BetaOverMu | SweepAxis::Kappa if self.points.iter().any(|&v| !(v > 0.0)) => {
                Err(Error::config("points", "targets must be > 0"))
            }
            _ if !(self.eps > 0.0) => Err(Error::config("eps", "must be > 0")),
            _ if self.n_bounds.0 == 0 || self.n_bounds.0 > self.n_bounds.1 => {
                Err(Error::config("n_bounds", "need 1 <= lo <= hi"))
            }
            _ => Ok(()),
        }
    }

    /// (β/μ, κ) targets for each point.
    fn targets(&self, point: f64) -> Option<(f64, f64)> {
        let fixed = self.fixed?;
        match self.axis {
            SweepAxis::BetaOverMu => Some((point, fixed)),
            SweepAxis::Kappa => Some((fixed, point)),
            SweepAxis::Samples => None,
        }
    }
}

/// Outcome of matching (β/μ, κ) by choosing n and λ.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub config: SyntheticRidgeConfig,
    pub problem: ProblemSpec,
    pub constants: Constants,
    pub steps: usize,
}

fn with_lambda(p: &ProblemSpec, lambda: f64) -> Result<ProblemSpec> {
    let agents = (0..p.agents()).map(|i| p.agent_data(i).clone()).collect();
    ProblemSpec::new(p.loss(), agents, lambda, *p.regularizer())
}

/// Picks λ and n so the instance has κ̂ ≈ `kappa` and β̂/μ̂ ≈ `beta_over_mu`.
///
/// λ only shifts every Hessian by 2λI, so β̂ is unaffected and
/// κ̂ = (L_e + 2λ)/(μ_e + 2λ) in terms of the λ = 0 constants: λ follows in
/// closed form. β̂ then shrinks roughly like 1/√n, which drives a
/// multiplicative update of n. n is clamped to `n_bounds`; if κ exceeds the
/// data's own conditioning, λ = 0 and κ̂ falls short.
pub fn calibrate(
    base: &SyntheticRidgeConfig,
    beta_over_mu: f64,
    kappa: f64,
    n_bounds: (usize, usize),
) -> Result<Calibration> {
    const REL_TOL: f64 = 0.03;
    const MAX_STEPS: usize = 12;
    let mut cfg = SyntheticRidgeConfig { lambda: 0.0, n: base.n.clamp(n_bounds.0, n_bounds.1), ..base.clone() };
    let mut best: Option<(f64, Calibration)> = None;
    for step in 1..=MAX_STEPS {
        cfg.lambda = 0.0;
        let data = gen_ridge(&cfg)?.problem;
        let e = estimate_constants(&data)?;
        let lambda = ((e.l - kappa * e.mu) / (2.0 * (kappa - 1.0))).max(0.0);
        let mu = e.mu + 2.0 * lambda;
        let bm = e.beta / mu;
        cfg.lambda = lambda;
        let problem = with_lambda(&data, lambda)?;
        let constants = estimate_constants(&problem)?;
        let miss = (constants.beta_over_mu() / beta_over_mu).ln().abs() + (constants.kappa() / kappa).ln().abs();
        if best.as_ref().is_none_or(|(b, _)| miss < *b) {
            best = Some((miss, Calibration { config: cfg.clone(), problem, constants, steps: step }));
        }
        if (bm / beta_over_mu - 1.0).abs() <= REL_TOL {
            break;
        }
        let next = (cfg.n as f64 * (bm / beta_over_mu).powi(2)).round() as usize;
        let next = next.clamp(n_bounds.0, n_bounds.1);
        if next == cfg.n {
            break;
        }
        cfg.n = next;
    }
    Ok(best.expect("at least one calibration step").1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub point: usize,
    /// Requested axis value.
    pub nominal: f64,
    pub n: usize,
    pub lambda: f64,
    pub constants: Constants,
    /// Comms to reach `eps` per variant; None if not reached within K_max.
    pub comms: Vec<(Variant, Option<usize>)>,
}

impl SweepRow {
    pub fn comms_of(&self, v: Variant) -> Option<usize> {
        self.comms.iter().find(|(w, _)| *w == v).and_then(|(_, c)| *c)
    }
}

fn point_problem(spec: &SweepSpec, point: f64) -> Result<Calibration> {
    match spec.targets(point) {
        Some((bm, kappa)) => calibrate(&spec.base, bm, kappa, spec.n_bounds),
        None => {
            let config = SyntheticRidgeConfig { n: point as usize, ..spec.base.clone() };
            let problem = gen_ridge(&config)?.problem;
            let constants = estimate_constants(&problem)?;
            Ok(Calibration { config, problem, constants, steps: 0 })
        }
    }
}

/// Runs every point and variant. Points run in parallel; each uses the same
/// generator seed so Σ and x* are shared across the sweep.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let gossip = build_gossip(spec.topology.graph, spec.base.m, spec.topology.seed, spec.topology.target_rho)?;
    spec.points
        .par_iter()
        .enumerate()
        .map(|(idx, &point)| {
            let cal = point_problem(spec, point)?;
            let comms = spec
                .variants
                .iter()
                .map(|&variant| {
                    let cfg = ExperimentConfig {
                        problem: ProblemSource::Synthetic(cal.config.clone()),
                        topology: spec.topology,
                        algorithm: AlgorithmConfig { variant, target_gap: Some(spec.eps), ..spec.algorithm },
                        ..ExperimentConfig::default()
                    };
                    let out = execute_on(&cfg, &cal.problem, &cal.constants, &gossip)?;
                    Ok((variant, out.metadata.comms_to_target))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepRow {
                point: idx,
                nominal: point,
                n: cal.config.n,
                lambda: cal.config.lambda,
                constants: cal.constants,
                comms,
            })
        })
        .collect()
}

/// Summary CSV: one row per point with measured constants and comms per
/// variant (empty when not reached).
pub fn write_sweep_csv<W: Write>(axis: SweepAxis, rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let variants: Vec<Variant> = rows.first().map(|r| r.comms.iter().map(|(v, _)| *v).collect()).unwrap_or_default();
    let mut header: Vec<String> =
        ["point", "axis", "nominal", "n", "lambda", "mu", "l", "beta", "beta_over_mu", "kappa"]
            .map(String::from)
            .into();
    header.extend(variants.iter().map(|v| format!("comms_{}", v.name())));
    w.write_record(&header)?;
    for r in rows {
        let c = &r.constants;
        let mut rec = vec![
            r.point.to_string(),
            axis.name().to_string(),
            r.nominal.to_string(),
            r.n.to_string(),
            r.lambda.to_string(),
            c.mu.to_string(),
            c.l.to_string(),
            c.beta.to_string(),
            c.beta_over_mu().to_string(),
            c.kappa().to_string(),
        ];
        rec.extend(variants.iter().map(|&v| r.comms_of(v).map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
