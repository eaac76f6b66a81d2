//! Centralized oracles, optimality gaps and the potential functions that
//! certify inner and outer convergence.
//!
//! Quadratic problems with r = 0 evaluate every suboptimality exactly as
//! ½(x − x*)ᵀH(x − x*) rather than as a difference of two large objective
//! values, so gaps stay accurate down to ~1e−16 relative.

use std::io::Write;

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::accel::{acc_sonata_run, AccObserver, AccRun, AccelParams, OuterView};
use crate::error::{Error, Result};
use crate::linalg::{disagreement, mean_vector, sym_extremes, Matrix, Vector};
use crate::network::GossipMatrix;
use crate::problems::{Constants, ProblemSpec};
use crate::sonata::{tracking_residual, AgentState, Shift, SolverOptions, SurrogateKind, TrackingInit};

const ORACLE_MAX_ITERS: usize = 200_000;

/// Minimizer and optimal value of u (or of a shifted u_k).
#[derive(Debug, Clone)]
pub struct Oracle {
    pub x_star: Vector,
    pub u_star: f64,
    /// Hessian of the objective when it is an unconstrained quadratic.
    pub hessian: Option<Matrix>,
}

impl Oracle {
    /// u(x) − u* for the objective this oracle solved, given its value at x.
    fn suboptimality(&self, x: &Vector, value: impl FnOnce() -> f64) -> f64 {
        match &self.hessian {
            Some(h) => {
                let e = x - &self.x_star;
                0.5 * e.dot(&(h * &e))
            }
            None => value() - self.u_star,
        }
    }
}

/// Exact solve for quadratic problems with r = 0; otherwise FISTA with
/// gradient restarts until the gradient mapping is at most `tol`.
pub fn centralized_solve(p: &ProblemSpec, tol: f64) -> Result<Oracle> {
    centralized_solve_shifted(p, &Shift::none(p.agents(), p.dim()), tol)
}

/// Minimizes u_k(x) = (1/m)Σ f_i^k(x) + r(x).
pub fn centralized_solve_shifted(p: &ProblemSpec, shift: &Shift, tol: f64) -> Result<Oracle> {
    let center = mean_vector(&shift.centers);
    if let (Some(h), Some(lin), true) = (p.quadratic_hessian(), p.quadratic_linear(), p.regularizer().is_zero()) {
        let mut hk = h;
        for k in 0..p.dim() {
            hk[(k, k)] += shift.delta;
        }
        let rhs = lin + &center * shift.delta;
        let chol = Cholesky::new(hk.clone()).ok_or(Error::DegenerateStrongConvexity { mu: sym_extremes(&hk).0 })?;
        let x = chol.solve(&rhs);
        let u = shift.objective(p, &x);
        return Ok(Oracle { x_star: x, u_star: u, hessian: Some(hk) });
    }

    let smooth = {
        let mut h = Matrix::zeros(p.dim(), p.dim());
        for i in 0..p.agents() {
            h += p.hessian_bound(i);
        }
        sym_extremes(&(h / p.agents() as f64)).1 + shift.delta
    };
    let step = 1.0 / smooth;
    let grad = |x: &Vector| {
        let mut g = Vector::zeros(p.dim());
        for i in 0..p.agents() {
            g += shift.grad(p, i, x);
        }
        g / p.agents() as f64
    };

    let mut x = Vector::zeros(p.dim());
    let mut v = x.clone();
    let mut theta: f64 = 1.0;
    let mut residual = f64::INFINITY;
    for _ in 0..ORACLE_MAX_ITERS {
        let next = p.regularizer().prox(&(&v - grad(&v) * step), step);
        let mapping = (&v - &next) / step;
        // Restart when the momentum points uphill.
        let uphill = mapping.dot(&(&next - &x)) < 0.0;
        residual = (&next - &x).norm() / step;
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let momentum = if uphill { 0.0 } else { (theta - 1.0) / theta_next };
        v = &next + (&next - &x) * momentum;
        theta = if uphill { 1.0 } else { theta_next };
        x = next;
        let gm = (&x - p.regularizer().prox(&(&x - grad(&x) * step), step)).norm() / step;
        if gm <= tol {
            let u = shift.objective(p, &x);
            return Ok(Oracle { x_star: x, u_star: u, hessian: None });
        }
        residual = residual.min(gm);
    }
    Err(Error::OracleNotConverged { iters: ORACLE_MAX_ITERS, residual })
}

/// Δ = max{(1/m)Σ u(x_i) − u*, (1/m)Σ‖x_i − x̄‖²}.
pub fn optimality_gap(p: &ProblemSpec, xs: &[Vector], oracle: &Oracle) -> f64 {
    let sub = xs.iter().map(|x| oracle.suboptimality(x, || p.objective(x))).sum::<f64>() / xs.len() as f64;
    sub.max(disagreement(xs))
}

/// Weights and rates of the inner (g + e) and outer (P) potentials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialConstants {
    pub c_x: f64,
    pub c_y: f64,
    /// Per-iteration contraction of g + e guaranteed when ρ ≤ rho_bound.
    pub contraction: f64,
    pub rho_bound: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Largest ρ for which the inner potential provably contracts.
pub fn admissible_rho(c: &Constants, mode: SurrogateKind) -> f64 {
    let (mu, l, beta) = (c.mu, c.l, c.beta);
    match mode {
        SurrogateKind::F => {
            beta * (2.0 * beta - mu) / ((l + 2.0 * beta - mu) * (l + 4.0 * beta - mu)) / (4.0 * 1785f64.sqrt())
        }
        SurrogateKind::L => l * l / (2.0 * l - mu + beta).powi(2) / (70.0 * 15f64.sqrt()),
    }
}

impl PotentialConstants {
    pub fn new(c: &Constants, params: &AccelParams) -> Self {
        let (mu, l, beta) = (c.mu, c.l, c.beta);
        let (c_x, c_y, contraction) = match params.mode {
            SurrogateKind::F => (8.0 * (l + 2.0 * beta - mu).powi(2) / beta, 4.0 / beta, 33.0 / 34.0),
            SurrogateKind::L => (56.0 * (2.0 * l + beta - mu).powi(2) / l, 28.0 / l, 0.9),
        };
        let (alpha, cs) = (params.alpha, params.c_seq);
        let q = 1.0 - cs * alpha;
        let c1 = 1.0 + params.delta / c_x * (1.5 * q * q + 5.0 - 4.0 * cs * alpha) / (q * q);
        let c2 = if alpha < 1.0 {
            (2.0 + c1.sqrt()).powi(2) / (((q / (1.0 - alpha)).sqrt() - 1.0).powi(2) * (1.0 - alpha))
        } else {
            f64::INFINITY
        };
        PotentialConstants { c_x, c_y, contraction, rho_bound: admissible_rho(c, params.mode), c1, c2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerPotential {
    pub g: f64,
    pub e: f64,
}

impl InnerPotential {
    pub fn sum(&self) -> f64 {
        self.g + self.e
    }
}

/// (1/m)Σ‖y_i − ȳ‖².
pub fn tracking_error(states: &[AgentState]) -> f64 {
    let ys: Vec<Vector> = states.iter().map(|s| s.y.clone()).collect();
    disagreement(&ys)
}

pub fn consensus_error(states: &[AgentState]) -> f64 {
    let xs: Vec<Vector> = states.iter().map(|s| s.x.clone()).collect();
    disagreement(&xs)
}

/// g = (1/m)Σ(u_k(x_i) − u_k*) and e = c_x‖x_⊥‖² + c_y‖y_⊥‖², with
/// `oracle_k` the minimizer of the shifted problem.
pub fn inner_potential(
    p: &ProblemSpec,
    shift: &Shift,
    states: &[AgentState],
    pc: &PotentialConstants,
    oracle_k: &Oracle,
) -> InnerPotential {
    let g = states.iter().map(|s| oracle_k.suboptimality(&s.x, || shift.objective(p, &s.x))).sum::<f64>()
        / states.len() as f64;
    let e = pc.c_x * consensus_error(states) + pc.c_y * tracking_error(states);
    InnerPotential { g, e }
}

/// P^k = (1/m)Σ(u(x_j^k) − u*) + (1/m)Σ(μ/2)‖x_j^{k−1} + (x_j^k − x_j^{k−1})/α − x*‖² + e^{k−1,T}.
pub fn outer_potential(
    p: &ProblemSpec,
    prev: &[Vector],
    cur: &[Vector],
    alpha: f64,
    mu: f64,
    e_prev: f64,
    oracle: &Oracle,
) -> f64 {
    let m = cur.len() as f64;
    let sub = cur.iter().map(|x| oracle.suboptimality(x, || p.objective(x))).sum::<f64>() / m;
    let dist =
        prev.iter().zip(cur).map(|(a, b)| (a + (b - a) / alpha - &oracle.x_star).norm_squared()).sum::<f64>() / m;
    sub + 0.5 * mu * dist + e_prev
}

/// Largest c with (g+e)^{k,T} ≤ P⁰(1 − cα)^{k+1} for every k.
pub fn measured_c(final_inner: &[f64], p0: f64, alpha: f64) -> f64 {
    final_inner
        .iter()
        .enumerate()
        .map(|(k, &v)| (1.0 - (v / p0).powf(1.0 / (k + 1) as f64)) / alpha)
        .fold(f64::INFINITY, f64::min)
}

/// Geometric factor exp(slope) of a least-squares fit of ln(values) against
/// the index. Nonpositive values are skipped.
pub fn fit_contraction(values: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(i, v)| (i as f64, v.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxy / sxx).exp()
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub k: usize,
    pub t: usize,
    pub comms: usize,
    pub gap: f64,
    pub consensus_err: f64,
    pub tracking_err: f64,
    pub g_plus_e: Option<f64>,
    pub p_k: Option<f64>,
}

/// One record at the start and one per inner iteration; comms strictly increase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
}

pub const TRAJECTORY_SCHEMA_VERSION: u32 = 1;

impl Trajectory {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "t", "comms", "gap", "consensus_err", "tracking_err", "g_plus_e", "p_k"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.records {
            w.write_record([
                r.k.to_string(),
                r.t.to_string(),
                r.comms.to_string(),
                format!("{:e}", r.gap),
                format!("{:e}", r.consensus_err),
                format!("{:e}", r.tracking_err),
                opt(r.g_plus_e),
                opt(r.p_k),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// First cumulative communication count whose gap is ≤ eps.
pub fn comms_to_accuracy(traj: &Trajectory, eps: f64) -> Option<usize> {
    traj.records.iter().find(|r| r.gap <= eps).map(|r| r.comms)
}

/// Per-outer-iteration summary of a diagnosed run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub k: usize,
    pub comms: usize,
    /// Δ(x^{k+1}).
    pub gap: f64,
    /// (g + e)^{k,0}, right after the warm restart.
    pub potential_start: Option<f64>,
    /// (g + e)^{k,T}.
    pub potential_end: Option<f64>,
    /// P^{k+1}.
    pub p_next: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticOptions {
    /// Evaluate g + e and P^k; needs the constants and one shifted solve per outer iteration.
    pub potentials: Option<Constants>,
    /// Stop after the first outer iteration that ends with Δ ≤ target.
    pub target_gap: Option<f64>,
    /// Record the tracking-conservation residual at every step.
    pub check_tracking: bool,
    pub oracle_tol: f64,
}

#[derive(Debug, Clone)]
pub struct DiagnosedRun {
    pub run: AccRun,
    pub trajectory: Trajectory,
    pub outer: Vec<OuterRecord>,
    pub potential_constants: Option<PotentialConstants>,
    /// P⁰.
    pub p0: Option<f64>,
    /// (g + e)^{k,t} for every inner step, indexed [k][t], t = 0..=T.
    pub inner_potentials: Vec<Vec<f64>>,
    pub max_tracking_residual: f64,
}

struct Recorder<'a> {
    p: &'a ProblemSpec,
    params: &'a AccelParams,
    oracle: &'a Oracle,
    opts: DiagnosticOptions,
    pc: Option<PotentialConstants>,
    /// Factor of H + δI for exact shifted oracles on quadratics.
    shifted: Option<(Cholesky<f64, nalgebra::Dyn>, Matrix, Vector)>,
    oracle_k: Option<Oracle>,
    trajectory: Trajectory,
    outer: Vec<OuterRecord>,
    inner: Vec<Vec<f64>>,
    p0: Option<f64>,
    tracking: f64,
    error: Option<Error>,
}

impl Recorder<'_> {
    fn shifted_oracle(&self, shift: &Shift) -> Result<Oracle> {
        match &self.shifted {
            Some((chol, h, lin)) => {
                let rhs = lin + mean_vector(&shift.centers) * shift.delta;
                let x = chol.solve(&rhs);
                let u = shift.objective(self.p, &x);
                Ok(Oracle { x_star: x, u_star: u, hessian: Some(h.clone()) })
            }
            None => centralized_solve_shifted(self.p, shift, self.opts.oracle_tol),
        }
    }

    fn record(&mut self, view: &OuterView<'_>, t: usize) -> Option<f64> {
        let xs: Vec<Vector> = view.states.iter().map(|s| s.x.clone()).collect();
        let potential = match (&self.pc, &self.oracle_k) {
            (Some(pc), Some(ok)) => Some(inner_potential(self.p, view.shift, view.states, pc, ok).sum()),
            _ => None,
        };
        if let Some(v) = potential {
            self.inner.last_mut().expect("restart precedes steps").push(v);
        }
        if self.opts.check_tracking {
            self.tracking = self.tracking.max(tracking_residual(self.p, view.shift, view.states));
        }
        self.trajectory.records.push(TrajectoryRecord {
            k: view.k,
            t,
            comms: view.comms,
            gap: optimality_gap(self.p, &xs, self.oracle),
            consensus_err: disagreement(&xs),
            tracking_err: tracking_error(view.states),
            g_plus_e: potential,
            p_k: None,
        });
        potential
    }
}

impl AccObserver for Recorder<'_> {
    fn on_restart(&mut self, view: &OuterView<'_>) {
        if self.error.is_some() {
            return;
        }
        if self.pc.is_some() {
            match self.shifted_oracle(view.shift) {
                Ok(o) => self.oracle_k = Some(o),
                Err(e) => {
                    self.error = Some(e);
                    return;
                }
            }
            self.inner.push(Vec::new());
        }
        if view.k == 0 {
            let xs: Vec<Vector> = view.states.iter().map(|s| s.x.clone()).collect();
            if self.pc.is_some() {
                // x^{−1} = x^0, so v^0 = x^0 and e^{−1,T} = 0.
                self.p0 = Some(outer_potential(self.p, &xs, &xs, 1.0, self.params.mu, 0.0, self.oracle));
            }
            self.trajectory.records.push(TrajectoryRecord {
                k: 0,
                t: 0,
                comms: 0,
                gap: optimality_gap(self.p, &xs, self.oracle),
                consensus_err: disagreement(&xs),
                tracking_err: tracking_error(view.states),
                g_plus_e: None,
                p_k: self.p0,
            });
        }
        if let (Some(pc), Some(ok)) = (&self.pc, &self.oracle_k) {
            let v = inner_potential(self.p, view.shift, view.states, pc, ok).sum();
            self.inner.last_mut().expect("pushed above").push(v);
        }
        if self.opts.check_tracking {
            self.tracking = self.tracking.max(tracking_residual(self.p, view.shift, view.states));
        }
    }

    fn on_inner_step(&mut self, view: &OuterView<'_>, t: usize) {
        if self.error.is_none() {
            self.record(view, t);
        }
    }

    fn on_outer_end(&mut self, view: &OuterView<'_>) -> bool {
        if self.error.is_some() {
            return true;
        }
        let xs: Vec<Vector> = view.states.iter().map(|s| s.x.clone()).collect();
        let gap = optimality_gap(self.p, &xs, self.oracle);
        let (start, end) = match self.inner.last() {
            Some(v) if self.pc.is_some() => (v.first().copied(), v.last().copied()),
            _ => (None, None),
        };
        // P^{k+1} uses x^k, x^{k+1} and e^{k,T}.
        let p_next = self.pc.map(|pc| {
            let e = pc.c_x * consensus_error(view.states) + pc.c_y * tracking_error(view.states);
            outer_potential(self.p, view.start, &xs, self.params.alpha, self.params.mu, e, self.oracle)
        });
        if let (Some(v), Some(last)) = (p_next, self.trajectory.records.last_mut()) {
            last.p_k = Some(v);
        }
        self.outer.push(OuterRecord {
            k: view.k,
            comms: view.comms,
            gap,
            potential_start: start,
            potential_end: end,
            p_next,
        });
        matches!(self.opts.target_gap, Some(t) if gap <= t)
    }
}

/// ACC-SONATA with a recorder attached: trajectory, per-outer summaries and
/// optionally the potential functions.
pub fn run_diagnosed(
    p: &ProblemSpec,
    params: &AccelParams,
    w: &GossipMatrix,
    solver: SolverOptions,
    init: TrackingInit,
    oracle: &Oracle,
    opts: DiagnosticOptions,
) -> Result<DiagnosedRun> {
    let pc = opts.potentials.map(|c| PotentialConstants::new(&c, params));
    let shifted = match (p.quadratic_hessian(), p.quadratic_linear(), p.regularizer().is_zero()) {
        (Some(mut h), Some(lin), true) if pc.is_some() => {
            for k in 0..p.dim() {
                h[(k, k)] += params.delta;
            }
            let chol = Cholesky::new(h.clone()).ok_or(Error::DegenerateStrongConvexity { mu: sym_extremes(&h).0 })?;
            Some((chol, h, lin))
        }
        _ => None,
    };
    let mut rec = Recorder {
        p,
        params,
        oracle,
        opts: DiagnosticOptions { oracle_tol: if opts.oracle_tol > 0.0 { opts.oracle_tol } else { 1e-12 }, ..opts },
        pc,
        shifted,
        oracle_k: None,
        trajectory: Trajectory::default(),
        outer: Vec::new(),
        inner: Vec::new(),
        p0: None,
        tracking: 0.0,
        error: None,
    };
    let run = acc_sonata_run(p, params, w, solver, init, &mut rec)?;
    if let Some(e) = rec.error {
        return Err(e);
    }
    Ok(DiagnosedRun {
        run,
        trajectory: rec.trajectory,
        outer: rec.outer,
        potential_constants: pc,
        p0: rec.p0,
        inner_potentials: rec.inner,
        max_tracking_residual: rec.tracking,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_ridge, SyntheticRidgeConfig};
    use crate::problems::{AgentData, LossKind, Regularizer};
    use proptest::prelude::*;

    fn logistic_problem(reg: Regularizer) -> ProblemSpec {
        let agents = (0..3)
            .map(|i| {
                let features = Matrix::from_fn(6, 3, |r, c| ((r * 3 + c + i) as f64 * 0.7).sin());
                let labels = Vector::from_fn(6, |r, _| if (r + i) % 3 == 0 { -1.0 } else { 1.0 });
                AgentData { features, labels }
            })
            .collect();
        ProblemSpec::new(LossKind::Logistic, agents, 0.05, reg).unwrap()
    }

    fn record(gap: f64, comms: usize) -> TrajectoryRecord {
        TrajectoryRecord { k: 0, t: 0, comms, gap, consensus_err: 0.0, tracking_err: 0.0, g_plus_e: None, p_k: None }
    }

    #[test]
    fn noiseless_ridge_recovers_truth() {
        let inst =
            gen_ridge(&SyntheticRidgeConfig { m: 4, n: 30, d: 10, noise_std: 0.0, seed: 8, ..Default::default() })
                .unwrap();
        let oracle = centralized_solve(&inst.problem, 1e-12).unwrap();
        assert!((oracle.x_star - inst.ground_truth).amax() < 1e-8);
    }

    #[test]
    fn iterative_oracle_satisfies_prox_fixed_point() {
        let p = logistic_problem(Regularizer::L1 { weight: 0.05 });
        let o = centralized_solve(&p, 1e-10).unwrap();
        assert!(o.hessian.is_none());
        let step = 0.1;
        let fixed = p.prox_r(&(&o.x_star - p.smooth_grad(&o.x_star) * step), step).unwrap();
        assert!((fixed - &o.x_star).norm() / step < 1e-8);
    }

    #[test]
    fn shifted_quadratic_oracle_matches_closed_form() {
        let p = gen_ridge(&SyntheticRidgeConfig { m: 3, n: 40, d: 4, seed: 1, ..Default::default() }).unwrap().problem;
        let centers: Vec<Vector> = (0..3).map(|i| Vector::from_element(4, i as f64)).collect();
        let shift = Shift { delta: 2.5, centers };
        let o = centralized_solve_shifted(&p, &shift, 1e-12).unwrap();
        let h = p.quadratic_hessian().unwrap() + Matrix::identity(4, 4) * 2.5;
        let rhs = p.quadratic_linear().unwrap() + Vector::from_element(4, 1.0) * 2.5;
        let x = h.lu().solve(&rhs).unwrap();
        assert!((o.x_star - x).amax() < 1e-10);
    }

    #[test]
    fn shifted_iterative_oracle_zeroes_the_gradient() {
        let p = logistic_problem(Regularizer::Zero);
        let shift = Shift { delta: 0.7, centers: vec![Vector::from_element(3, 0.3); 3] };
        let o = centralized_solve_shifted(&p, &shift, 1e-10).unwrap();
        let g = p.smooth_grad(&o.x_star) + (&o.x_star - Vector::from_element(3, 0.3)) * 0.7;
        assert!(g.norm() < 1e-8);
    }

    #[test]
    fn gap_uses_the_larger_arm() {
        let p = gen_ridge(&SyntheticRidgeConfig { m: 2, n: 20, d: 3, seed: 4, ..Default::default() }).unwrap().problem;
        let o = centralized_solve(&p, 1e-12).unwrap();
        let at_opt = vec![o.x_star.clone(); 2];
        assert!(optimality_gap(&p, &at_opt, &o) < 1e-18);

        let shifted = vec![&o.x_star + Vector::from_element(3, 0.1); 2];
        let h = p.quadratic_hessian().unwrap();
        let e = Vector::from_element(3, 0.1);
        assert!((optimality_gap(&p, &shifted, &o) - 0.5 * e.dot(&(&h * &e))).abs() < 1e-12);

        // Symmetric perturbations: the consensus arm is at least avg ‖e_i‖².
        let e = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let split = vec![&o.x_star + &e, &o.x_star - &e];
        assert!(optimality_gap(&p, &split, &o) >= e.norm_squared() - 1e-12);
    }

    #[test]
    fn initial_potential_formula() {
        let p = gen_ridge(&SyntheticRidgeConfig { m: 2, n: 20, d: 3, seed: 4, ..Default::default() }).unwrap().problem;
        let o = centralized_solve(&p, 1e-12).unwrap();
        let x0 = vec![Vector::zeros(3); 2];
        let mu = 0.8;
        let p0 = outer_potential(&p, &x0, &x0, 1.0, mu, 0.0, &o);
        let expected = p.objective(&Vector::zeros(3)) - o.u_star + 0.5 * mu * o.x_star.norm_squared();
        assert!((p0 - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn comms_to_accuracy_cases() {
        let traj = Trajectory { records: vec![record(1.0, 0), record(0.1, 3), record(0.01, 6), record(0.001, 9)] };
        assert_eq!(comms_to_accuracy(&traj, 2.0), Some(0));
        assert_eq!(comms_to_accuracy(&traj, 0.05), Some(6));
        assert_eq!(comms_to_accuracy(&traj, 0.01), Some(6));
        assert_eq!(comms_to_accuracy(&traj, 1e-6), None);
    }

    #[test]
    fn trajectory_csv_header_and_blanks() {
        let traj = Trajectory { records: vec![record(0.5, 0)] };
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k,t,comms,gap,consensus_err,tracking_err,g_plus_e,p_k"));
        assert_eq!(lines.next(), Some("0,0,0,5e-1,0e0,0e0,,"));
    }

    #[test]
    fn fitted_rates_on_exact_sequences() {
        let seq: Vec<f64> = (0..20).map(|k| 3.0 * 0.8f64.powi(k)).collect();
        assert!((fit_contraction(&seq) - 0.8).abs() < 1e-12);
        let xs = [1.0, 10.0, 100.0, 1000.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 7.0 * x.sqrt()).collect();
        assert!((loglog_slope(&xs, &ys) - 0.5).abs() < 1e-12);
        // (g+e)^{k,T} = P⁰(1 − cα)^{k+1} exactly gives back c.
        let (p0, alpha, c) = (5.0f64, 0.2f64, 0.3f64);
        let finals: Vec<f64> = (0..10).map(|k| p0 * (1.0 - c * alpha).powi(k + 1)).collect();
        assert!((measured_c(&finals, p0, alpha) - c).abs() < 1e-12);
    }

    #[test]
    fn potential_weights_by_mode() {
        let c = Constants { mu: 1.0, l: 10.0, l_max: 12.0, beta: 3.0 };
        let f = AccelParams::with_delta(SurrogateKind::F, 1.0, 2.0, 3.0, 2, 5).unwrap();
        let pc = PotentialConstants::new(&c, &f);
        assert!((pc.c_x - 8.0 * 15.0f64.powi(2) / 3.0).abs() < 1e-12);
        assert!((pc.c_y - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(pc.contraction, 33.0 / 34.0);
        let l = AccelParams::with_delta(SurrogateKind::L, 1.0, 9.0, 19.0, 2, 5).unwrap();
        let pc = PotentialConstants::new(&c, &l);
        assert!((pc.c_x - 56.0 * 22.0f64.powi(2) / 10.0).abs() < 1e-10);
        assert!((pc.c_y - 2.8).abs() < 1e-15);
        assert!(pc.c1 > 1.0 && pc.c2.is_finite() && pc.c2 > 0.0);
    }

    proptest! {
        #[test]
        fn admissible_rho_in_unit_interval(mu in 0.01f64..1.0, lr in 1.0f64..1e4, br in 0.0f64..1.0) {
            let l = mu * lr;
            let beta = mu + br * (l - mu).max(0.0) + 1e-6;
            let c = Constants { mu, l, l_max: l, beta };
            for mode in [SurrogateKind::F, SurrogateKind::L] {
                let r = admissible_rho(&c, mode);
                prop_assert!(r > 0.0 && r < 1.0);
            }
        }

        #[test]
        fn admissible_rho_shrinks_with_l(mu in 0.01f64..1.0, lr in 1.0f64..1e3, br in 0.5f64..50.0, grow in 1.01f64..10.0) {
            let (l, beta) = (mu * lr, mu * br);
            let a = Constants { mu, l, l_max: l, beta };
            let b = Constants { l: l * grow, ..a };
            prop_assert!(admissible_rho(&b, SurrogateKind::F) <= admissible_rho(&a, SurrogateKind::F));
            let worse = Constants { beta: beta * grow, ..a };
            prop_assert!(admissible_rho(&worse, SurrogateKind::L) <= admissible_rho(&a, SurrogateKind::L));
        }

        #[test]
        fn optimum_beats_random_points(x in proptest::collection::vec(-3.0f64..3.0, 3)) {
            let p = logistic_problem(Regularizer::L1 { weight: 0.05 });
            let o = centralized_solve(&p, 1e-10).unwrap();
            prop_assert!(o.u_star <= p.objective(&Vector::from_vec(x)) + 1e-12);
        }
    }
}
