//! Distributed composite problems `u(x) = (1/m) Σ_i f_i(x) + r(x)`.
//!
//! Each agent owns `n` samples `(a_i^j, b_i^j)`. Three local losses are
//! supported:
//!
//! * quadratic ridge: `f_i(x) = (1/(2n))‖A_i x − b_i‖² + λ‖x‖²`
//! * smooth hinge and logistic: `f_i(x) = (1/n) Σ_j ℓ(b_i^j ⟨x, a_i^j⟩) + (λ/2)‖x‖²`
//!
//! Note the different ridge conventions; they follow the experiments the
//! simulator reproduces.
//!
//! Oracles are pure functions of immutable data and can be evaluated from
//! several threads at once.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, sym_extremes, sym_spectral_norm, Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    QuadraticRidge,
    SmoothHinge,
    Logistic,
}

impl LossKind {
    pub fn is_classification(self) -> bool {
        !matches!(self, LossKind::QuadraticRidge)
    }

    /// Upper bound on ℓ'' used to build the Hessian bounds H_i.
    pub fn curvature_bound(self) -> f64 {
        match self {
            LossKind::QuadraticRidge => 1.0,
            LossKind::SmoothHinge => 1.0,
            LossKind::Logistic => 0.25,
        }
    }

    fn scalar_loss(self, t: f64) -> f64 {
        match self {
            LossKind::SmoothHinge => smooth_hinge(t),
            LossKind::Logistic => logistic(t),
            LossKind::QuadraticRidge => unreachable!("quadratic loss is not a margin loss"),
        }
    }

    fn scalar_deriv(self, t: f64) -> f64 {
        match self {
            LossKind::SmoothHinge => smooth_hinge_deriv(t),
            LossKind::Logistic => logistic_deriv(t),
            LossKind::QuadraticRidge => unreachable!("quadratic loss is not a margin loss"),
        }
    }
}

/// The nonsmooth term `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Regularizer {
    #[default]
    Zero,
    L1 {
        weight: f64,
    },
    Box {
        lo: f64,
        hi: f64,
    },
}

impl Regularizer {
    pub fn is_zero(&self) -> bool {
        matches!(self, Regularizer::Zero)
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            Regularizer::Box { lo, hi } => {
                if x.iter().all(|&v| v >= lo && v <= hi) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `argmin_y r(y) + ‖y − x‖²/(2·step)`.
    pub fn prox(&self, x: &Vector, step: f64) -> Vector {
        match *self {
            Regularizer::Zero => x.clone(),
            Regularizer::L1 { weight } => {
                let thr = weight * step;
                x.map(|v| v.signum() * (v.abs() - thr).max(0.0))
            }
            Regularizer::Box { lo, hi } => x.map(|v| v.clamp(lo, hi)),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Regularizer::Zero => Ok(()),
            Regularizer::L1 { weight } if weight >= 0.0 && weight.is_finite() => Ok(()),
            Regularizer::L1 { weight } => Err(Error::invalid(format!("l1 weight {weight} must be >= 0"))),
            Regularizer::Box { lo, hi } if lo <= hi => Ok(()),
            Regularizer::Box { lo, hi } => Err(Error::invalid(format!("box [{lo}, {hi}] is empty"))),
        }
    }
}

/// One agent's samples: `features` is n×d, `labels` has length n.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentData {
    pub features: Matrix,
    pub labels: Vector,
}

/// Precomputed quadratic model of a ridge agent:
/// `f_i(x) = ½ xᵀ hess x − linearᵀx + offset`, with the ridge folded into `hess`.
#[derive(Debug, Clone)]
struct QuadraticModel {
    hess: Matrix,
    linear: Vector,
    offset: f64,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    loss: LossKind,
    lambda: f64,
    reg: Regularizer,
    dim: usize,
    samples: usize,
    agents: Vec<AgentData>,
    quadratic: Vec<QuadraticModel>,
}

impl ProblemSpec {
    pub fn new(loss: LossKind, agents: Vec<AgentData>, lambda: f64, reg: Regularizer) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::invalid("a problem needs at least one agent"));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda = {lambda} must be finite and >= 0")));
        }
        reg.validate()?;
        let samples = agents[0].features.nrows();
        let dim = agents[0].features.ncols();
        if samples == 0 || dim == 0 {
            return Err(Error::invalid("agents need n >= 1 samples of dimension d >= 1"));
        }
        for (i, a) in agents.iter().enumerate() {
            if a.features.nrows() != samples || a.features.ncols() != dim || a.labels.len() != samples {
                return Err(Error::invalid(format!(
                    "agent {i} holds a {}x{} block with {} labels; expected {samples}x{dim}",
                    a.features.nrows(),
                    a.features.ncols(),
                    a.labels.len()
                )));
            }
            if a.features.iter().chain(a.labels.iter()).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("agent {i} has non-finite data")));
            }
            if loss.is_classification() && a.labels.iter().any(|&b| b != 1.0 && b != -1.0) {
                return Err(Error::invalid(format!("agent {i}: classification labels must be +1 or -1")));
            }
        }

        let quadratic = if loss == LossKind::QuadraticRidge {
            let n = samples as f64;
            agents
                .iter()
                .map(|a| {
                    let at = a.features.transpose();
                    let mut hess = &at * &a.features / n;
                    for k in 0..dim {
                        hess[(k, k)] += 2.0 * lambda;
                    }
                    QuadraticModel { hess, linear: &at * &a.labels / n, offset: a.labels.norm_squared() / (2.0 * n) }
                })
                .collect()
        } else {
            Vec::new()
        };

        Ok(ProblemSpec { loss, lambda, reg, dim, samples, agents, quadratic })
    }

    pub fn agents(&self) -> usize {
        self.agents.len()
    }

    pub fn samples_per_agent(&self) -> usize {
        self.samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.reg
    }

    pub fn agent_data(&self, i: usize) -> &AgentData {
        &self.agents[i]
    }

    pub fn is_quadratic(&self) -> bool {
        self.loss == LossKind::QuadraticRidge
    }

    fn check(&self, i: usize, x: &Vector) -> Result<()> {
        if i >= self.agents.len() {
            return Err(Error::invalid(format!("agent index {i} out of range (m = {})", self.agents.len())));
        }
        if x.len() != self.dim {
            return Err(Error::invalid(format!("x has length {}, expected {}", x.len(), self.dim)));
        }
        if !all_finite(x) {
            return Err(Error::invalid("x has non-finite entries"));
        }
        Ok(())
    }

    /// `f_i(x)`.
    pub fn local_value(&self, i: usize, x: &Vector) -> Result<f64> {
        self.check(i, x)?;
        Ok(self.value_of(i, x))
    }

    /// `∇f_i(x)`.
    pub fn local_grad(&self, i: usize, x: &Vector) -> Result<Vector> {
        self.check(i, x)?;
        Ok(self.grad_of(i, x))
    }

    pub(crate) fn value_of(&self, i: usize, x: &Vector) -> f64 {
        if let Some(q) = self.quadratic.get(i) {
            return 0.5 * x.dot(&(&q.hess * x)) - q.linear.dot(x) + q.offset;
        }
        let a = &self.agents[i];
        let margins = &a.features * x;
        let data: f64 = margins.iter().zip(a.labels.iter()).map(|(&m, &b)| self.loss.scalar_loss(b * m)).sum();
        data / self.samples as f64 + 0.5 * self.lambda * x.norm_squared()
    }

    pub(crate) fn grad_of(&self, i: usize, x: &Vector) -> Vector {
        if let Some(q) = self.quadratic.get(i) {
            return &q.hess * x - &q.linear;
        }
        let a = &self.agents[i];
        let n = self.samples as f64;
        let margins = &a.features * x;
        let weights = Vector::from_iterator(
            self.samples,
            margins.iter().zip(a.labels.iter()).map(|(&m, &b)| self.loss.scalar_deriv(b * m) * b / n),
        );
        a.features.tr_mul(&weights) + x * self.lambda
    }

    /// `f(x) = (1/m) Σ f_i(x)`.
    pub fn smooth_value(&self, x: &Vector) -> f64 {
        (0..self.agents()).map(|i| self.value_of(i, x)).sum::<f64>() / self.agents() as f64
    }

    pub fn smooth_grad(&self, x: &Vector) -> Vector {
        let mut g = Vector::zeros(self.dim);
        for i in 0..self.agents() {
            g += self.grad_of(i, x);
        }
        g / self.agents() as f64
    }

    /// `u(x) = f(x) + r(x)`.
    pub fn objective(&self, x: &Vector) -> f64 {
        self.smooth_value(x) + self.reg.value(x)
    }

    pub fn prox_r(&self, x: &Vector, step: f64) -> Result<Vector> {
        if !(step > 0.0) {
            return Err(Error::invalid(format!("prox step {step} must be > 0")));
        }
        Ok(self.reg.prox(x, step))
    }

    /// Exact Hessian of a ridge agent, or the curvature upper bound
    /// `H_i = (1/n) Σ C_ℓ (b_i^j)² a_i^j a_i^jᵀ + λI` for margin losses.
    pub fn hessian_bound(&self, i: usize) -> Matrix {
        if let Some(q) = self.quadratic.get(i) {
            return q.hess.clone();
        }
        let a = &self.agents[i];
        let scaled = Matrix::from_fn(self.samples, self.dim, |r, c| a.features[(r, c)] * a.labels[r].abs());
        let mut h = scaled.tr_mul(&scaled) * (self.loss.curvature_bound() / self.samples as f64);
        for k in 0..self.dim {
            h[(k, k)] += self.lambda;
        }
        h
    }

    /// Average Hessian of `f` for ridge problems (`None` otherwise).
    pub fn quadratic_hessian(&self) -> Option<Matrix> {
        if !self.is_quadratic() {
            return None;
        }
        let mut h = Matrix::zeros(self.dim, self.dim);
        for q in &self.quadratic {
            h += &q.hess;
        }
        Some(h / self.agents() as f64)
    }

    /// Average linear term `(1/m) Σ (1/n) A_iᵀ b_i` for ridge problems.
    pub fn quadratic_linear(&self) -> Option<Vector> {
        if !self.is_quadratic() {
            return None;
        }
        let mut g = Vector::zeros(self.dim);
        for q in &self.quadratic {
            g += &q.linear;
        }
        Some(g / self.agents() as f64)
    }

    pub(crate) fn agent_hessian(&self, i: usize) -> Option<&Matrix> {
        self.quadratic.get(i).map(|q| &q.hess)
    }

    pub(crate) fn agent_linear(&self, i: usize) -> Option<&Vector> {
        self.quadratic.get(i).map(|q| &q.linear)
    }

    /// Largest eigenvalue of each agent's Hessian (bound).
    pub fn agent_smoothness(&self) -> Vec<f64> {
        (0..self.agents()).map(|i| sym_extremes(&self.hessian_bound(i)).1).collect()
    }
}

/// Smooth hinge loss: 0 for t > 1, ½(t−1)² on [0, 1], ½ − t below 0.
pub fn smooth_hinge(t: f64) -> f64 {
    if t > 1.0 {
        0.0
    } else if t >= 0.0 {
        0.5 * (t - 1.0) * (t - 1.0)
    } else {
        0.5 - t
    }
}

pub fn smooth_hinge_deriv(t: f64) -> f64 {
    if t > 1.0 {
        0.0
    } else if t >= 0.0 {
        t - 1.0
    } else {
        -1.0
    }
}

/// `log(1 + e^{−t})`, evaluated without overflow.
pub fn logistic(t: f64) -> f64 {
    if t > 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

pub fn logistic_deriv(t: f64) -> f64 {
    if t > 0.0 {
        let e = (-t).exp();
        -e / (1.0 + e)
    } else {
        -1.0 / (1.0 + t.exp())
    }
}

/// Estimated problem constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Strong convexity of f.
    pub mu: f64,
    /// Smoothness of f.
    pub l: f64,
    /// Largest local smoothness.
    pub l_max: f64,
    /// Hessian similarity.
    pub beta: f64,
}

impl Constants {
    pub fn kappa(&self) -> f64 {
        self.l / self.mu
    }

    pub fn beta_over_mu(&self) -> f64 {
        self.beta / self.mu
    }
}

/// Ridge problems use exact Hessian eigenvalues. Margin losses use the
/// curvature upper bounds H_i: μ̂ = λ, L̂ = mean λ_max(H_i),
/// L̂_max = max λ_max(H_i), β̂ = max ‖H_i − mean H‖.
pub fn estimate_constants(p: &ProblemSpec) -> Result<Constants> {
    let m = p.agents();
    let hs: Vec<Matrix> = (0..m).map(|i| p.hessian_bound(i)).collect();
    let mut mean = Matrix::zeros(p.dim(), p.dim());
    for h in &hs {
        mean += h;
    }
    mean /= m as f64;

    let local_max: Vec<f64> = hs.iter().map(|h| sym_extremes(h).1).collect();
    let l_max = local_max.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let beta = hs.iter().map(|h| sym_spectral_norm(&(h - &mean))).fold(0.0, f64::max);

    let (mu, l) =
        if p.is_quadratic() { sym_extremes(&mean) } else { (p.lambda(), local_max.iter().sum::<f64>() / m as f64) };
    // Relative threshold: a rank-deficient Hessian shows up as roundoff-sized eigenvalues.
    if !(mu > 1e-12 * l.abs().max(1.0)) {
        return Err(Error::DegenerateStrongConvexity { mu });
    }
    Ok(Constants { mu, l, l_max: l_max.max(l), beta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single_agent(loss: LossKind, features: Matrix, labels: Vector, lambda: f64) -> ProblemSpec {
        ProblemSpec::new(loss, vec![AgentData { features, labels }], lambda, Regularizer::Zero).unwrap()
    }

    #[test]
    fn quadratic_identity_value() {
        let p = single_agent(LossKind::QuadraticRidge, Matrix::identity(2, 2), Vector::zeros(2), 0.0);
        let x = Vector::from_vec(vec![1.0, 1.0]);
        // ‖x‖²/(2n) with n = 2 rows.
        assert!((p.local_value(0, &x).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quadratic_gradient_formula() {
        let a = Matrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 3.0, 1.0]);
        let b = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let p = single_agent(LossKind::QuadraticRidge, a.clone(), b.clone(), 0.0);
        let x = Vector::from_vec(vec![0.3, -0.7]);
        let expected = a.transpose() * (&a * &x - &b) / 3.0;
        assert!((p.local_grad(0, &x).unwrap() - expected).norm() < 1e-14);
    }

    #[test]
    fn hinge_margin_beyond_one_leaves_only_ridge() {
        let a = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let p = single_agent(LossKind::SmoothHinge, a, Vector::from_vec(vec![1.0]), 0.3);
        let x = Vector::from_vec(vec![1.0, 1.0]);
        let ridge = 0.5 * 0.3 * 2.0;
        assert!((p.local_value(0, &x).unwrap() - ridge).abs() < 1e-15);
    }

    #[test]
    fn hinge_half_margin() {
        let a = Matrix::from_row_slice(1, 1, &[1.0]);
        let p = single_agent(LossKind::SmoothHinge, a, Vector::from_vec(vec![1.0]), 0.0);
        assert_eq!(p.local_value(0, &Vector::from_vec(vec![0.5])).unwrap(), 0.125);
    }

    #[test]
    fn smooth_hinge_pieces() {
        assert_eq!(smooth_hinge(1.5), 0.0);
        assert_eq!(smooth_hinge(-1.0), 1.5);
        assert_eq!(smooth_hinge_deriv(0.0), -1.0);
        assert_eq!(smooth_hinge_deriv(-1e-300), -1.0);
        assert_eq!(smooth_hinge_deriv(1.0), 0.0);
        assert_eq!(smooth_hinge_deriv(1.0 + 1e-15), 0.0);
    }

    #[test]
    fn logistic_is_stable() {
        assert!((logistic(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!(logistic(800.0) >= 0.0 && logistic(800.0) < 1e-300);
        assert!((logistic(-800.0) - 800.0).abs() < 1e-12);
        assert!((logistic_deriv(0.0) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn prox_examples() {
        let x = Vector::from_vec(vec![2.0, -0.5]);
        assert_eq!(Regularizer::Zero.prox(&x, 1.0), x);
        let l1 = Regularizer::L1 { weight: 1.0 }.prox(&x, 1.0);
        assert_eq!(l1, Vector::from_vec(vec![1.0, 0.0]));
        let bx = Regularizer::Box { lo: 0.0, hi: 1.0 }.prox(&Vector::from_vec(vec![-3.0, 0.4, 7.0]), 1.0);
        assert_eq!(bx, Vector::from_vec(vec![0.0, 0.4, 1.0]));
    }

    #[test]
    fn rejects_bad_input() {
        let p = single_agent(LossKind::QuadraticRidge, Matrix::identity(2, 2), Vector::zeros(2), 0.0);
        assert!(matches!(p.local_value(0, &Vector::from_vec(vec![f64::NAN, 0.0])), Err(Error::InvalidInput(_))));
        assert!(p.local_grad(3, &Vector::zeros(2)).is_err());
        assert!(p.prox_r(&Vector::zeros(2), 0.0).is_err());
        let bad = ProblemSpec::new(
            LossKind::Logistic,
            vec![AgentData { features: Matrix::identity(2, 2), labels: Vector::from_vec(vec![1.0, 0.0]) }],
            0.1,
            Regularizer::Zero,
        );
        assert!(bad.is_err());
        let mismatched = ProblemSpec::new(
            LossKind::QuadraticRidge,
            vec![
                AgentData { features: Matrix::identity(2, 2), labels: Vector::zeros(2) },
                AgentData { features: Matrix::identity(3, 2), labels: Vector::zeros(3) },
            ],
            0.0,
            Regularizer::Zero,
        );
        assert!(mismatched.is_err());
    }

    #[test]
    fn constants_by_hand() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 2.0]));
        let p = single_agent(LossKind::QuadraticRidge, a, Vector::zeros(2), 0.0);
        let c = estimate_constants(&p).unwrap();
        assert!((c.mu - 0.5).abs() < 1e-14);
        assert!((c.l - 2.0).abs() < 1e-14);
        assert_eq!(c.beta, 0.0);
    }

    #[test]
    fn identical_agents_have_zero_beta() {
        let a = Matrix::from_row_slice(3, 2, &[1.0, 0.2, -0.3, 2.0, 0.7, 0.1]);
        let data = AgentData { features: a, labels: Vector::from_vec(vec![1.0, 2.0, 3.0]) };
        let p =
            ProblemSpec::new(LossKind::QuadraticRidge, vec![data.clone(), data.clone(), data], 0.0, Regularizer::Zero)
                .unwrap();
        assert!(estimate_constants(&p).unwrap().beta < 1e-12);
    }

    #[test]
    fn rank_deficient_ridge_is_degenerate() {
        let a = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let p = single_agent(LossKind::QuadraticRidge, a, Vector::from_vec(vec![1.0]), 0.0);
        assert!(matches!(estimate_constants(&p), Err(Error::DegenerateStrongConvexity { .. })));
    }

    #[test]
    fn classification_uses_lambda_for_mu() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let p = single_agent(LossKind::Logistic, a, Vector::from_vec(vec![1.0, -1.0]), 0.1);
        let c = estimate_constants(&p).unwrap();
        assert_eq!(c.mu, 0.1);
        // H = 0.25 * diag(1, 4) / 2 + 0.1 I
        assert!((c.l - (0.5 + 0.1)).abs() < 1e-14);
    }

    fn loss_strategy() -> impl Strategy<Value = LossKind> {
        prop_oneof![Just(LossKind::QuadraticRidge), Just(LossKind::SmoothHinge), Just(LossKind::Logistic)]
    }

    fn problem_strategy() -> impl Strategy<Value = (ProblemSpec, Vector)> {
        (loss_strategy(), proptest::collection::vec(-2.0f64..2.0, 4 * 3 + 4 + 3), 0.0f64..1.0).prop_map(
            |(loss, raw, lambda)| {
                let features = Matrix::from_row_slice(4, 3, &raw[..12]);
                let labels = Vector::from_iterator(
                    4,
                    raw[12..16].iter().map(|&v| if loss.is_classification() { v.signum() } else { v }),
                );
                let x = Vector::from_row_slice(&raw[16..]);
                let p = single_agent(loss, features, labels, lambda);
                (p, x)
            },
        )
    }

    fn regularizer_strategy() -> impl Strategy<Value = Regularizer> {
        prop_oneof![
            Just(Regularizer::Zero),
            (0.0f64..2.0).prop_map(|weight| Regularizer::L1 { weight }),
            (-1.0f64..0.0, 0.0f64..1.0).prop_map(|(lo, hi)| Regularizer::Box { lo, hi }),
        ]
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences((p, x) in problem_strategy()) {
            let g = p.local_grad(0, &x).unwrap();
            let h = 1e-6;
            let fd = Vector::from_fn(3, |k, _| {
                let mut e = Vector::zeros(3);
                e[k] = h;
                (p.local_value(0, &(&x + &e)).unwrap() - p.local_value(0, &(&x - &e)).unwrap()) / (2.0 * h)
            });
            prop_assert!((fd - &g).norm() <= 1e-5 * g.norm().max(1.0));
        }

        #[test]
        fn losses_are_convex_along_segments((p, x) in problem_strategy(), y in proptest::collection::vec(-2.0f64..2.0, 3), t in 0.0f64..1.0) {
            let y = Vector::from_vec(y);
            let mid = &x * t + &y * (1.0 - t);
            let lhs = p.local_value(0, &mid).unwrap();
            let rhs = t * p.local_value(0, &x).unwrap() + (1.0 - t) * p.local_value(0, &y).unwrap();
            prop_assert!(lhs <= rhs + 1e-12 * rhs.abs().max(1.0));
        }

        #[test]
        fn hessian_bound_dominates_curvature((p, x) in problem_strategy(), v in proptest::collection::vec(-1.0f64..1.0, 3)) {
            // ⟨∇f(x+v) − ∇f(x), v⟩ ≤ vᵀHv for the curvature bound H.
            let v = Vector::from_vec(v);
            let dg = p.local_grad(0, &(&x + &v)).unwrap() - p.local_grad(0, &x).unwrap();
            let bound = v.dot(&(p.hessian_bound(0) * &v));
            prop_assert!(dg.dot(&v) <= bound + 1e-12);
        }

        #[test]
        fn prox_is_non_expansive(reg in regularizer_strategy(), step in 0.01f64..5.0,
                                 a in proptest::collection::vec(-3.0f64..3.0, 4),
                                 b in proptest::collection::vec(-3.0f64..3.0, 4)) {
            let (a, b) = (Vector::from_vec(a), Vector::from_vec(b));
            let d = (reg.prox(&a, step) - reg.prox(&b, step)).norm();
            prop_assert!(d <= (a - b).norm() + 1e-12);
        }
    }
}
