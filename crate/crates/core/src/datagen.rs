//! Synthetic ridge-regression instances and LIBSVM ingestion.
//!
//! Randomness comes from ChaCha20 seeded once per instance, with one stream
//! per purpose:
//!
//! | stream  | draws                                         |
//! |---------|-----------------------------------------------|
//! | 0       | eigenvalues of Σ, then the Gaussian for its QR |
//! | 1       | ground truth x*                               |
//! | 2 + i   | rows of agent i (features, then noise, row by row) |
//!
//! Agent i's data therefore depends neither on m nor on the other agents, and
//! its first n rows are the same for every larger n.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::problems::{AgentData, LossKind, ProblemSpec, Regularizer};

const STREAM_COVARIANCE: u64 = 0;
const STREAM_TRUTH: u64 = 1;
const STREAM_AGENT_BASE: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticRidgeConfig {
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub mu0: f64,
    pub l0: f64,
    pub lambda: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticRidgeConfig {
    fn default() -> Self {
        SyntheticRidgeConfig {
            m: 30,
            n: 1000,
            d: 40,
            mu0: 1.0,
            l0: 1000.0,
            lambda: 0.0,
            noise_std: 0.1f64.sqrt(),
            seed: 0,
        }
    }
}

impl SyntheticRidgeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.d == 0 {
            return Err(Error::invalid("m, n and d must all be >= 1"));
        }
        if !(self.mu0 > 0.0 && self.mu0 <= self.l0 && self.l0.is_finite()) {
            return Err(Error::invalid(format!("need 0 < mu0 <= L0, got [{}, {}]", self.mu0, self.l0)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda = {} must be >= 0", self.lambda)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid(format!("noise_std = {} must be >= 0", self.noise_std)));
        }
        Ok(())
    }
}

/// A generated instance together with what produced it.
#[derive(Debug, Clone)]
pub struct RidgeInstance {
    pub problem: ProblemSpec,
    pub ground_truth: Vector,
    pub covariance: Matrix,
}

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Σ = U diag(λ) Uᵀ and its square root U diag(√λ).
fn covariance(cfg: &SyntheticRidgeConfig) -> (Matrix, Matrix) {
    let mut rng = stream(cfg.seed, STREAM_COVARIANCE);
    let eig: Vec<f64> =
        (0..cfg.d).map(|_| if cfg.mu0 == cfg.l0 { cfg.mu0 } else { rng.random_range(cfg.mu0..cfg.l0) }).collect();
    let g = Matrix::from_fn(cfg.d, cfg.d, |_, _| gaussian(&mut rng));
    let u = g.qr().q();
    let root = Matrix::from_fn(cfg.d, cfg.d, |r, c| u[(r, c)] * eig[c].sqrt());
    let sigma = &root * root.transpose();
    (sigma, root)
}

/// Synthetic ridge regression: rows of A_i ~ N(0, Σ), x* ~ N(5·1, I),
/// b_i = A_i x* + w_i with w_i ~ N(0, noise_std² I).
pub fn gen_ridge(cfg: &SyntheticRidgeConfig) -> Result<RidgeInstance> {
    cfg.validate()?;
    let (sigma, root) = covariance(cfg);

    let mut rng = stream(cfg.seed, STREAM_TRUTH);
    let truth = Vector::from_fn(cfg.d, |_, _| 5.0 + gaussian(&mut rng));

    let agents = (0..cfg.m)
        .map(|i| {
            let mut rng = stream(cfg.seed, STREAM_AGENT_BASE + i as u64);
            let mut features = Matrix::zeros(cfg.n, cfg.d);
            let mut labels = Vector::zeros(cfg.n);
            for row in 0..cfg.n {
                let z = Vector::from_fn(cfg.d, |_, _| gaussian(&mut rng));
                let a = &root * z;
                let noise = cfg.noise_std * gaussian(&mut rng);
                labels[row] = a.dot(&truth) + noise;
                features.set_row(row, &a.transpose());
            }
            AgentData { features, labels }
        })
        .collect();

    let problem = ProblemSpec::new(LossKind::QuadraticRidge, agents, cfg.lambda, Regularizer::Zero)?;
    Ok(RidgeInstance { problem, ground_truth: truth, covariance: sigma })
}

/// One LIBSVM record: label and sparse (0-based index, value) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSample {
    pub label: f64,
    pub entries: Vec<(usize, f64)>,
}

/// Parses LIBSVM text (`label idx:val ...`, 1-based indices). Blank lines and
/// `#` comments are skipped; `path` only labels error messages.
pub fn parse_libsvm<R: BufRead>(reader: R, path: &Path) -> Result<Vec<SparseSample>> {
    let err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok.parse().map_err(|_| err(lineno, format!("bad label `{label_tok}`")))?;
        if !label.is_finite() {
            return Err(err(lineno, format!("non-finite label `{label_tok}`")));
        }
        let mut entries = Vec::new();
        for tok in tokens {
            let (idx, val) =
                tok.split_once(':').ok_or_else(|| err(lineno, format!("expected index:value, got `{tok}`")))?;
            let idx: usize = idx.parse().map_err(|_| err(lineno, format!("bad feature index `{idx}`")))?;
            if idx == 0 {
                return Err(err(lineno, "feature indices are 1-based".into()));
            }
            let val: f64 = val.parse().map_err(|_| err(lineno, format!("bad feature value `{val}`")))?;
            if !val.is_finite() {
                return Err(err(lineno, format!("non-finite feature value `{val}`")));
            }
            entries.push((idx - 1, val));
        }
        out.push(SparseSample { label, entries });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibsvmOptions {
    pub m: usize,
    #[serde(default)]
    pub limit: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub loss: LossKind,
    #[serde(default)]
    pub lambda: f64,
}

/// Loads a LIBSVM file, keeps the first `limit` samples, shuffles them with
/// `seed` and deals them into `m` equal shards (the remainder is dropped).
/// Features are densified to the largest index seen. Classification losses
/// map positive labels to +1 and the rest to −1; ridge keeps raw targets.
pub fn load_libsvm(path: &Path, opts: &LibsvmOptions) -> Result<ProblemSpec> {
    if opts.m == 0 {
        return Err(Error::invalid("need at least one agent"));
    }
    let file = File::open(path)?;
    let mut samples = parse_libsvm(BufReader::new(file), path)?;
    if let Some(limit) = opts.limit {
        samples.truncate(limit);
    }
    if samples.len() < opts.m {
        return Err(Error::InsufficientData { available: samples.len(), agents: opts.m });
    }
    let d = samples.iter().flat_map(|s| s.entries.iter().map(|&(j, _)| j + 1)).max().unwrap_or(0).max(1);

    samples.shuffle(&mut stream(opts.seed, 0));
    let per_agent = samples.len() / opts.m;
    let agents = samples
        .chunks_exact(per_agent)
        .take(opts.m)
        .map(|shard| {
            let mut features = Matrix::zeros(per_agent, d);
            let mut labels = Vector::zeros(per_agent);
            for (r, s) in shard.iter().enumerate() {
                for &(j, v) in &s.entries {
                    features[(r, j)] += v;
                }
                labels[r] = match opts.loss {
                    LossKind::QuadraticRidge => s.label,
                    _ if s.label > 0.0 => 1.0,
                    _ => -1.0,
                };
            }
            AgentData { features, labels }
        })
        .collect();
    ProblemSpec::new(opts.loss, agents, opts.lambda, Regularizer::Zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_spectral_norm;
    use crate::problems::estimate_constants;

    fn small(seed: u64) -> SyntheticRidgeConfig {
        SyntheticRidgeConfig { m: 3, n: 20, d: 4, seed, ..Default::default() }
    }

    #[test]
    fn same_seed_same_instance() {
        let a = gen_ridge(&small(11)).unwrap();
        let b = gen_ridge(&small(11)).unwrap();
        for i in 0..3 {
            assert_eq!(a.problem.agent_data(i), b.problem.agent_data(i));
        }
        assert_eq!(a.ground_truth, b.ground_truth);
        let c = gen_ridge(&small(12)).unwrap();
        assert_ne!(a.ground_truth, c.ground_truth);
    }

    #[test]
    fn agent_data_is_prefix_stable_and_independent_of_m() {
        let base = gen_ridge(&small(5)).unwrap();
        let more = gen_ridge(&SyntheticRidgeConfig { m: 5, n: 35, ..small(5) }).unwrap();
        for i in 0..3 {
            let a = base.problem.agent_data(i);
            let b = more.problem.agent_data(i);
            assert_eq!(a.features, b.features.rows(0, 20).into_owned());
            assert_eq!(a.labels, b.labels.rows(0, 20).into_owned());
        }
    }

    #[test]
    fn covariance_spectrum_in_range() {
        let cfg = SyntheticRidgeConfig { d: 10, mu0: 2.0, l0: 30.0, ..small(3) };
        let inst = gen_ridge(&cfg).unwrap();
        let ev = crate::linalg::sym_eigenvalues(&inst.covariance);
        assert!(ev[0] >= 2.0 - 1e-9 && ev[9] <= 30.0 + 1e-9);
    }

    #[test]
    fn empirical_covariance_approaches_sigma() {
        let cfg = SyntheticRidgeConfig { m: 4, n: 500, d: 8, mu0: 1.0, l0: 10.0, ..Default::default() };
        let inst = gen_ridge(&cfg).unwrap();
        let mut c = Matrix::zeros(8, 8);
        for i in 0..4 {
            let a = &inst.problem.agent_data(i).features;
            c += a.transpose() * a;
        }
        c /= 2000.0;
        let rel = sym_spectral_norm(&(&c - &inst.covariance)) / sym_spectral_norm(&inst.covariance);
        assert!(rel <= 0.2, "relative covariance error {rel}");
    }

    #[test]
    fn beta_decreases_with_samples() {
        let mut medians = Vec::new();
        for n in [100, 1000, 10000] {
            let mut betas: Vec<f64> = (0..3)
                .map(|seed| {
                    let cfg = SyntheticRidgeConfig { m: 4, n, d: 6, mu0: 1.0, l0: 100.0, seed, ..Default::default() };
                    estimate_constants(&gen_ridge(&cfg).unwrap().problem).unwrap().beta
                })
                .collect();
            betas.sort_by(f64::total_cmp);
            medians.push(betas[1]);
        }
        assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
    }

    #[test]
    fn rejects_bad_config() {
        assert!(gen_ridge(&SyntheticRidgeConfig { mu0: 5.0, l0: 1.0, ..small(0) }).is_err());
        assert!(gen_ridge(&SyntheticRidgeConfig { n: 0, ..small(0) }).is_err());
    }

    #[test]
    fn parse_two_lines() {
        let text = "+1 1:0.5\n-1 2:1.0\n";
        let s = parse_libsvm(text.as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(s[0], SparseSample { label: 1.0, entries: vec![(0, 0.5)] });
        assert_eq!(s[1], SparseSample { label: -1.0, entries: vec![(1, 1.0)] });
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "1 1:0.5\n\n1 2=3\n";
        match parse_libsvm(text.as_bytes(), Path::new("f.svm")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse_libsvm("1 0:1\n".as_bytes(), Path::new("f")).is_err());
    }
}
