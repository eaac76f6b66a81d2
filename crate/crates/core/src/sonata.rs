//! SONATA: local surrogate minimization followed by consensus and
//! gradient-tracking gossip.
//!
//! Every iteration has two phases.
//!
//! 1. (S.1) Each agent minimizes its surrogate of the shifted local loss
//!    `f_i^k(x) = f_i(x) + (δ/2)‖x − z_i‖²`, corrected by its tracking
//!    variable: `x_i^{+½} = argmin f̃_i(x; x_i) + ⟨y_i − ∇f_i^k(x_i), x − x_i⟩ + r(x)`.
//! 2. (S.2) `x_i ← Σ_j w_ij x_j^{+½}` and then
//!    `y_i ← Σ_j w_ij (y_j + ∇f_j^k(x_j^new) − ∇f_j^k(x_j^old))`.
//!
//! Phase 1 runs in parallel over agents. Each agent reads only its own state
//! from the previous round, so the result is bit-identical to a sequential
//! sweep.

use nalgebra::Cholesky;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mean_vector, Vector};
use crate::network::GossipMatrix;
use crate::problems::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurrogateKind {
    /// Full local loss plus a β-proximal term.
    F,
    /// Linearization plus an L-proximal term.
    L,
}

impl std::fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SurrogateKind::F => "F",
            SurrogateKind::L => "L",
        })
    }
}

/// Surrogate kind with its proximal coefficient (β for F, L_surr for L).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    pub kind: SurrogateKind,
    pub prox: f64,
}

/// The proximal shift `(δ/2)‖x − z_i‖²` added to every local loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Shift {
    pub delta: f64,
    pub centers: Vec<Vector>,
}

impl Shift {
    /// δ = 0: the original problem.
    pub fn none(m: usize, d: usize) -> Self {
        Shift { delta: 0.0, centers: vec![Vector::zeros(d); m] }
    }

    /// `∇f_i^k(x)`.
    pub fn grad(&self, p: &ProblemSpec, i: usize, x: &Vector) -> Vector {
        let mut g = p.grad_of(i, x);
        if self.delta != 0.0 {
            g += (x - &self.centers[i]) * self.delta;
        }
        g
    }

    /// `f_i^k(x)`.
    pub fn value(&self, p: &ProblemSpec, i: usize, x: &Vector) -> f64 {
        p.value_of(i, x) + 0.5 * self.delta * (x - &self.centers[i]).norm_squared()
    }

    /// `u_k(x) = (1/m) Σ f_i^k(x) + r(x)`.
    pub fn objective(&self, p: &ProblemSpec, x: &Vector) -> f64 {
        let m = p.agents();
        (0..m).map(|i| self.value(p, i, x)).sum::<f64>() / m as f64 + p.regularizer().value(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub x: Vector,
    pub y: Vector,
    /// ∇f_i^k(x) at the current x, the "old" gradient of the next tracking update.
    pub grad_cache: Vector,
}

/// How the tracking variable starts in a standalone run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TrackingInit {
    /// y_i = ∇f_i^k(x_i).
    #[default]
    Local,
    /// y_i = (1/m) Σ_j ∇f_j^k(x_j), as a master node would broadcast.
    Averaged,
}

pub fn init_states(p: &ProblemSpec, shift: &Shift, x0: &[Vector], init: TrackingInit) -> Vec<AgentState> {
    let grads: Vec<Vector> = x0.iter().enumerate().map(|(i, x)| shift.grad(p, i, x)).collect();
    let avg = mean_vector(&grads);
    x0.iter()
        .zip(grads)
        .map(|(x, g)| AgentState {
            x: x.clone(),
            y: match init {
                TrackingInit::Local => g.clone(),
                TrackingInit::Averaged => avg.clone(),
            },
            grad_cache: g,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Stop when the gradient mapping ‖x_{t+1} − x_t‖/step is at most this.
    pub subproblem_tol: f64,
    pub max_inner_iters: usize,
    /// Count x and y exchanges as two rounds instead of one.
    pub half_duplex: bool,
    pub parallel: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { subproblem_tol: 1e-10, max_inner_iters: 10_000, half_duplex: false, parallel: true }
    }
}

impl SolverOptions {
    pub fn rounds_per_step(&self, w: &GossipMatrix) -> usize {
        w.rounds_per_application() * if self.half_duplex { 2 } else { 1 }
    }
}

/// Work done by one (S.1) solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SubproblemStats {
    pub iterations: usize,
    pub converged: bool,
}

/// Per-agent solver state that survives across iterations: the Cholesky
/// factor of `H_i + (δ + β)I` for quadratic F-surrogates, and local
/// smoothness constants for the iterative path.
pub struct SubproblemSolver {
    surrogate: Surrogate,
    delta: f64,
    factors: Vec<Option<Cholesky<f64, nalgebra::Dyn>>>,
    smoothness: Vec<f64>,
    opts: SolverOptions,
}

impl SubproblemSolver {
    pub fn new(p: &ProblemSpec, surrogate: Surrogate, delta: f64, opts: SolverOptions) -> Result<Self> {
        if !(surrogate.prox >= 0.0 && surrogate.prox.is_finite()) {
            return Err(Error::invalid(format!("surrogate coefficient {} must be >= 0", surrogate.prox)));
        }
        if surrogate.kind == SurrogateKind::L && surrogate.prox <= 0.0 {
            return Err(Error::invalid("the linearized surrogate needs L_surr > 0"));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("delta = {delta} must be >= 0")));
        }
        let m = p.agents();
        let direct = surrogate.kind == SurrogateKind::F && p.is_quadratic() && p.regularizer().is_zero();
        let mut factors = Vec::with_capacity(m);
        for i in 0..m {
            if direct {
                let mut h = p.agent_hessian(i).expect("quadratic problem").clone();
                for k in 0..p.dim() {
                    h[(k, k)] += delta + surrogate.prox;
                }
                let chol = Cholesky::new(h)
                    .ok_or_else(|| Error::invalid(format!("agent {i}: subproblem matrix is not positive definite")))?;
                factors.push(Some(chol));
            } else {
                factors.push(None);
            }
        }
        let smoothness =
            if surrogate.kind == SurrogateKind::F && !direct { p.agent_smoothness() } else { vec![0.0; m] };
        Ok(SubproblemSolver { surrogate, delta, factors, smoothness, opts })
    }

    pub fn surrogate(&self) -> Surrogate {
        self.surrogate
    }

    /// (S.1) for agent i.
    pub fn solve(&self, p: &ProblemSpec, shift: &Shift, i: usize, state: &AgentState) -> (Vector, SubproblemStats) {
        let correction = &state.y - &state.grad_cache;
        match self.surrogate.kind {
            SurrogateKind::L => {
                let step = 1.0 / self.surrogate.prox;
                let x = p.regularizer().prox(&(&state.x - &state.y * step), step);
                (x, SubproblemStats { iterations: 1, converged: true })
            }
            SurrogateKind::F => {
                let beta = self.surrogate.prox;
                if let Some(chol) = &self.factors[i] {
                    let lin = p.agent_linear(i).expect("quadratic problem");
                    let rhs = lin + &shift.centers[i] * self.delta + &state.x * beta - correction;
                    return (chol.solve(&rhs), SubproblemStats { iterations: 1, converged: true });
                }
                self.proximal_gradient(p, shift, i, state, &correction)
            }
        }
    }

    fn proximal_gradient(
        &self,
        p: &ProblemSpec,
        shift: &Shift,
        i: usize,
        state: &AgentState,
        correction: &Vector,
    ) -> (Vector, SubproblemStats) {
        let beta = self.surrogate.prox;
        let step = 1.0 / (self.smoothness[i] + self.delta + beta);
        let mut x = state.x.clone();
        for it in 1..=self.opts.max_inner_iters {
            let grad = shift.grad(p, i, &x) + (&x - &state.x) * beta + correction;
            let next = p.regularizer().prox(&(&x - grad * step), step);
            let moved = (&next - &x).norm() / step;
            x = next;
            if moved <= self.opts.subproblem_tol {
                return (x, SubproblemStats { iterations: it, converged: true });
            }
        }
        (x, SubproblemStats { iterations: self.opts.max_inner_iters, converged: false })
    }
}

/// (S.2): mix x with W, refresh gradients at the mixed point, then mix
/// `y + ∇new − ∇old`. `states[i].x` must hold x_i^{+½} on entry.
pub fn gossip_round(p: &ProblemSpec, shift: &Shift, states: &mut [AgentState], w: &GossipMatrix, parallel: bool) {
    let halves: Vec<Vector> = states.iter().map(|s| s.x.clone()).collect();
    let mixed = w.apply(&halves);
    let fresh: Vec<Vector> = if parallel {
        mixed.par_iter().enumerate().map(|(i, x)| shift.grad(p, i, x)).collect()
    } else {
        mixed.iter().enumerate().map(|(i, x)| shift.grad(p, i, x)).collect()
    };
    let pre: Vec<Vector> = states.iter().zip(&fresh).map(|(s, g)| &s.y + g - &s.grad_cache).collect();
    let ys = w.apply(&pre);
    for (((s, x), y), g) in states.iter_mut().zip(mixed).zip(ys).zip(fresh) {
        s.x = x;
        s.y = y;
        s.grad_cache = g;
    }
}

/// Outcome of one SONATA iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepReport {
    pub comms: usize,
    pub max_subproblem_iters: usize,
    pub all_converged: bool,
}

/// One (S.1) + (S.2) iteration.
pub fn sonata_step(
    p: &ProblemSpec,
    shift: &Shift,
    states: &mut [AgentState],
    w: &GossipMatrix,
    solver: &SubproblemSolver,
) -> StepReport {
    let solve = |(i, s): (usize, &AgentState)| solver.solve(p, shift, i, s);
    let results: Vec<(Vector, SubproblemStats)> = if solver.opts.parallel {
        states.par_iter().enumerate().map(solve).collect()
    } else {
        states.iter().enumerate().map(solve).collect()
    };
    let mut report = StepReport { comms: solver.opts.rounds_per_step(w), max_subproblem_iters: 0, all_converged: true };
    for (s, (x, stats)) in states.iter_mut().zip(results) {
        s.x = x;
        report.max_subproblem_iters = report.max_subproblem_iters.max(stats.iterations);
        report.all_converged &= stats.converged;
    }
    gossip_round(p, shift, states, w, solver.opts.parallel);
    report
}

/// Summary of a SONATA run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SonataReport {
    pub iterations: usize,
    pub comms: usize,
    /// Iterations in which some subproblem hit the inner iteration cap.
    pub unconverged_steps: usize,
}

/// T iterations of SONATA on the shifted problem. `observer(t, states, step)`
/// sees the states after iteration t = 1..=T.
pub fn sonata_run(
    p: &ProblemSpec,
    shift: &Shift,
    states: &mut [AgentState],
    iterations: usize,
    w: &GossipMatrix,
    solver: &SubproblemSolver,
    observer: &mut dyn FnMut(usize, &[AgentState], &StepReport),
) -> Result<SonataReport> {
    if states.len() != p.agents() || w.nodes() != p.agents() || shift.centers.len() != p.agents() {
        return Err(Error::invalid(format!(
            "{} agents, {} states, {} centers and a {}-node gossip matrix",
            p.agents(),
            states.len(),
            shift.centers.len(),
            w.nodes()
        )));
    }
    let mut report = SonataReport::default();
    for t in 1..=iterations {
        let step = sonata_step(p, shift, states, w, solver);
        report.iterations += 1;
        report.comms += step.comms;
        if !step.all_converged {
            report.unconverged_steps += 1;
        }
        observer(t, states, &step);
    }
    Ok(report)
}

/// (1/m)Σ y_i − (1/m)Σ ∇f_i^k(x_i), the tracking-conservation residual.
pub fn tracking_residual(p: &ProblemSpec, shift: &Shift, states: &[AgentState]) -> f64 {
    let ys: Vec<Vector> = states.iter().map(|s| s.y.clone()).collect();
    let gs: Vec<Vector> = states.iter().enumerate().map(|(i, s)| shift.grad(p, i, &s.x)).collect();
    (mean_vector(&ys) - mean_vector(&gs)).amax()
}
