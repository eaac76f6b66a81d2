//! ACC-SONATA: an inexact accelerated proximal-point outer loop whose
//! subproblems `u_k(x) = (1/m) Σ [f_i(x) + (δ/2)‖x − z_i^k‖²] + r(x)` are
//! solved by T warm-started SONATA iterations.
//!
//! Tuning: with similarity (mode F) δ = β − μ and T = ⌈ln(β/μ)⌉, giving a
//! √(β/μ) outer rate. Without it (mode L) δ = L − μ and T = ⌈ln κ⌉.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mean_vector, Vector};
use crate::network::GossipMatrix;
use crate::problems::{Constants, ProblemSpec};
use crate::sonata::{
    init_states, sonata_run, AgentState, Shift, SolverOptions, SubproblemSolver, Surrogate, SurrogateKind, TrackingInit,
};

/// Which closed form picks the number of inner iterations T.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InnerRule {
    /// T = ⌈ln(β/μ)⌉ for F and ⌈ln κ⌉ for L.
    #[default]
    Standard,
    /// T = ⌈1.4 ln(L/μ)⌉ for F and ⌈ln(β/μ)⌉ for L.
    Alternative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelParams {
    pub mode: SurrogateKind,
    /// μ used in α.
    pub mu: f64,
    pub delta: f64,
    pub alpha: f64,
    /// Inner SONATA iterations per outer iteration.
    pub inner_iters: usize,
    /// Maximum number of outer iterations.
    pub outer_iters: usize,
    /// Proximal coefficient of the surrogate: β for F, L + δ for L.
    pub surrogate_prox: f64,
    /// c of the diagnostic sequence ε^k = P⁰(1 − cα)^k.
    pub c_seq: f64,
}

impl AccelParams {
    /// Parameters for an explicit δ; α follows from μ and δ.
    pub fn with_delta(
        mode: SurrogateKind,
        mu: f64,
        delta: f64,
        surrogate_prox: f64,
        inner_iters: usize,
        outer_iters: usize,
    ) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::DegenerateStrongConvexity { mu });
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("delta = {delta} must be >= 0")));
        }
        Ok(AccelParams {
            mode,
            mu,
            delta,
            alpha: (mu / (mu + delta)).sqrt(),
            inner_iters,
            outer_iters,
            surrogate_prox,
            c_seq: 0.5,
        })
    }

    pub fn extrapolation(&self) -> f64 {
        (1.0 - self.alpha) / (1.0 + self.alpha)
    }

    pub fn surrogate(&self) -> Surrogate {
        Surrogate { kind: self.mode, prox: self.surrogate_prox }
    }
}

fn ceil_log(x: f64) -> usize {
    (x.ln().ceil() as usize).max(1)
}

pub fn inner_iterations(c: &Constants, mode: SurrogateKind, rule: InnerRule) -> usize {
    match (mode, rule) {
        (SurrogateKind::F, InnerRule::Standard) => ceil_log(c.beta / c.mu),
        (SurrogateKind::L, InnerRule::Standard) => ceil_log(c.kappa()),
        (SurrogateKind::F, InnerRule::Alternative) => ((1.4 * c.kappa().ln()).ceil() as usize).max(1),
        (SurrogateKind::L, InnerRule::Alternative) => ceil_log(c.beta / c.mu),
    }
}

/// Theorem-level tuning from estimated constants.
pub fn tune(c: &Constants, mode: SurrogateKind, rule: InnerRule, outer_iters: usize) -> Result<AccelParams> {
    if !(c.mu > 0.0) {
        return Err(Error::DegenerateStrongConvexity { mu: c.mu });
    }
    let (delta, prox) = match mode {
        SurrogateKind::F => {
            if !(c.beta > c.mu) {
                return Err(Error::DegenerateSimilarity { beta: c.beta, mu: c.mu });
            }
            (c.beta - c.mu, c.beta)
        }
        SurrogateKind::L => {
            if !(c.kappa() > 1.0) {
                return Err(Error::PerfectlyConditioned { kappa: c.kappa() });
            }
            let delta = c.l - c.mu;
            (delta, c.l + delta)
        }
    };
    AccelParams::with_delta(mode, c.mu, delta, prox, inner_iterations(c, mode, rule), outer_iters)
}

/// Snapshot handed to observers.
pub struct OuterView<'a> {
    pub k: usize,
    /// Cumulative communication rounds so far.
    pub comms: usize,
    pub shift: &'a Shift,
    pub states: &'a [AgentState],
    /// x^k, the iterate the current outer iteration started from.
    pub start: &'a [Vector],
}

/// Hooks into an ACC-SONATA run. All methods default to no-ops.
pub trait AccObserver {
    /// After the shift to u_k and the tracking warm restart, before any inner step.
    fn on_restart(&mut self, _view: &OuterView<'_>) {}
    /// After inner iteration t (1-based) of outer iteration k.
    fn on_inner_step(&mut self, _view: &OuterView<'_>, _t: usize) {}
    /// After the extrapolation of outer iteration k; return true to stop.
    fn on_outer_end(&mut self, _view: &OuterView<'_>) -> bool {
        false
    }
}

impl AccObserver for () {}

#[derive(Debug, Clone)]
pub struct AccRun {
    pub states: Vec<AgentState>,
    pub z: Vec<Vector>,
    pub outer_iters: usize,
    pub comms: usize,
    /// Inner iterations in which a subproblem hit its iteration cap.
    pub unconverged_steps: usize,
}

/// Runs up to `params.outer_iters` outer iterations from x⁰ = z⁰ = z⁻¹ = 0,
/// y⁰_i = ∇f_i(0).
pub fn acc_sonata_run(
    p: &ProblemSpec,
    params: &AccelParams,
    w: &GossipMatrix,
    opts: SolverOptions,
    init: TrackingInit,
    observer: &mut dyn AccObserver,
) -> Result<AccRun> {
    let (m, d) = (p.agents(), p.dim());
    if w.nodes() != m {
        return Err(Error::invalid(format!("gossip matrix has {} nodes for {m} agents", w.nodes())));
    }
    let solver = SubproblemSolver::new(p, params.surrogate(), params.delta, opts)?;
    let beta_e = params.extrapolation();

    let mut shift = Shift { delta: params.delta, centers: vec![Vector::zeros(d); m] };
    let mut states = init_states(p, &shift, &vec![Vector::zeros(d); m], init);
    let mut z_prev = vec![Vector::zeros(d); m];
    let mut comms = 0;
    let mut unconverged = 0;
    let mut done = 0;

    for k in 0..params.outer_iters {
        // Switch to u_k: centers z^k, and y^k + δ(z^{k−1} − z^k).
        if k > 0 {
            for (i, s) in states.iter_mut().enumerate() {
                s.y += (&z_prev[i] - &shift.centers[i]) * params.delta;
                s.grad_cache = shift.grad(p, i, &s.x);
            }
        }
        let start: Vec<Vector> = states.iter().map(|s| s.x.clone()).collect();
        observer.on_restart(&OuterView { k, comms, shift: &shift, states: &states, start: &start });

        let mut inner_comms = comms;
        let report = sonata_run(p, &shift, &mut states, params.inner_iters, w, &solver, &mut |t, st, step| {
            inner_comms += step.comms;
            observer.on_inner_step(&OuterView { k, comms: inner_comms, shift: &shift, states: st, start: &start }, t);
        })?;
        comms += report.comms;
        unconverged += report.unconverged_steps;

        // z^{k+1} = x^{k+1} + ((1−α)/(1+α))(x^{k+1} − x^k)
        let next: Vec<Vector> = states.iter().zip(&start).map(|(s, x0)| &s.x + (&s.x - x0) * beta_e).collect();
        z_prev = std::mem::replace(&mut shift.centers, next);
        done = k + 1;

        let stop = observer.on_outer_end(&OuterView { k, comms, shift: &shift, states: &states, start: &start });
        if stop {
            break;
        }
    }

    Ok(AccRun { states, z: shift.centers, outer_iters: done, comms, unconverged_steps: unconverged })
}

/// Master/worker variant: the master holds one x, broadcasts the averaged
/// gradient and averages the workers' surrogate minimizers. Returns x^k for
/// k = 0..=K (one entry per outer iteration).
pub fn acc_sonata_star(p: &ProblemSpec, params: &AccelParams, opts: SolverOptions) -> Result<Vec<Vector>> {
    let (m, d) = (p.agents(), p.dim());
    let solver = SubproblemSolver::new(p, params.surrogate(), params.delta, opts)?;
    let beta_e = params.extrapolation();
    let mut x = Vector::zeros(d);
    let mut z = Vector::zeros(d);
    let mut history = vec![x.clone()];
    for _ in 0..params.outer_iters {
        let shift = Shift { delta: params.delta, centers: vec![z.clone(); m] };
        let start = x.clone();
        for _ in 0..params.inner_iters {
            let grads: Vec<Vector> = (0..m).map(|i| shift.grad(p, i, &x)).collect();
            let avg = mean_vector(&grads);
            let halves: Vec<Vector> = grads
                .into_iter()
                .enumerate()
                .map(|(i, g)| {
                    let state = AgentState { x: x.clone(), y: avg.clone(), grad_cache: g };
                    solver.solve(p, &shift, i, &state).0
                })
                .collect();
            x = mean_vector(&halves);
        }
        z = &x + (&x - &start) * beta_e;
        history.push(x.clone());
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_ridge, SyntheticRidgeConfig};
    use crate::linalg::{conjugate_gradient, Matrix};
    use crate::network::{erdos_renyi, exact_averaging, metropolis_hastings};
    use crate::problems::estimate_constants;

    fn constants(mu: f64, l: f64, beta: f64) -> Constants {
        Constants { mu, l, l_max: l, beta }
    }

    #[test]
    fn alpha_formula() {
        let p = AccelParams::with_delta(SurrogateKind::F, 1.0, 3.0, 4.0, 1, 1).unwrap();
        assert_eq!(p.alpha, 0.5);
        assert!((p.alpha * p.alpha * (p.mu + p.delta) - p.mu).abs() < 1e-12);
    }

    #[test]
    fn inner_iteration_rules() {
        let e2 = std::f64::consts::E.powi(2);
        let t = tune(&constants(1.0, 100.0, e2 * 0.999_999), SurrogateKind::F, InnerRule::Standard, 1).unwrap();
        assert_eq!(t.inner_iters, 2);
        let t = tune(&constants(1.0, 100.0, 1.0001), SurrogateKind::F, InnerRule::Standard, 1).unwrap();
        assert_eq!(t.inner_iters, 1);
        let t = tune(&constants(2.0, 200.0, 10.0), SurrogateKind::L, InnerRule::Standard, 1).unwrap();
        assert_eq!(t.inner_iters, 5);
        assert_eq!(t.delta, 198.0);
        assert_eq!(t.surrogate_prox, 398.0);
        let alt = inner_iterations(&constants(1.0, 100.0, 10.0), SurrogateKind::F, InnerRule::Alternative);
        assert_eq!(alt, 7);
    }

    #[test]
    fn tune_rejects_degenerate_constants() {
        assert!(matches!(
            tune(&constants(1.0, 10.0, 0.5), SurrogateKind::F, InnerRule::Standard, 1),
            Err(Error::DegenerateSimilarity { .. })
        ));
        assert!(matches!(
            tune(&constants(1.0, 1.0, 0.5), SurrogateKind::L, InnerRule::Standard, 1),
            Err(Error::PerfectlyConditioned { .. })
        ));
    }

    fn instance(m: usize, seed: u64) -> ProblemSpec {
        gen_ridge(&SyntheticRidgeConfig { m, n: 40, d: 6, mu0: 1.0, l0: 50.0, seed, ..Default::default() })
            .unwrap()
            .problem
    }

    #[test]
    fn zero_delta_is_restarted_sonata() {
        let p = instance(5, 3);
        let c = estimate_constants(&p).unwrap();
        let w = metropolis_hastings(&erdos_renyi(5, 0.6, 2).unwrap());
        let params = AccelParams::with_delta(SurrogateKind::F, c.mu, 0.0, c.beta, 3, 6).unwrap();
        assert_eq!(params.extrapolation(), 0.0);
        let acc = acc_sonata_run(&p, &params, &w, SolverOptions::default(), TrackingInit::Local, &mut ()).unwrap();

        let shift = Shift::none(5, 6);
        let mut states = init_states(&p, &shift, &vec![Vector::zeros(6); 5], TrackingInit::Local);
        let solver = SubproblemSolver::new(&p, params.surrogate(), 0.0, SolverOptions::default()).unwrap();
        sonata_run(&p, &shift, &mut states, 18, &w, &solver, &mut |_, _, _| {}).unwrap();
        for (a, b) in acc.states.iter().zip(&states) {
            assert!((&a.x - &b.x).amax() <= 1e-12);
        }
        assert_eq!(acc.comms, 18);
    }

    #[test]
    fn comms_are_k_times_t_times_rounds() {
        let p = instance(4, 1);
        let c = estimate_constants(&p).unwrap();
        let base = metropolis_hastings(&crate::network::line_graph(4));
        let w = crate::network::chebyshev_accelerate(&base, 3).unwrap();
        let params = tune(&c, SurrogateKind::L, InnerRule::Standard, 5).unwrap();
        let run = acc_sonata_run(&p, &params, &w, SolverOptions::default(), TrackingInit::Local, &mut ()).unwrap();
        assert_eq!(run.comms, 5 * params.inner_iters * 3);
        let half = SolverOptions { half_duplex: true, ..Default::default() };
        let run = acc_sonata_run(&p, &params, &w, half, TrackingInit::Local, &mut ()).unwrap();
        assert_eq!(run.comms, 5 * params.inner_iters * 6);
    }

    #[test]
    fn single_agent_matches_accelerated_proximal_point() {
        let p = instance(1, 9);
        let c = estimate_constants(&p).unwrap();
        let beta = 0.2 * c.l;
        let params = AccelParams::with_delta(SurrogateKind::F, c.mu, beta, beta, 3, 12).unwrap();
        let mut history = Vec::new();
        struct Rec<'a>(&'a mut Vec<Vector>);
        impl AccObserver for Rec<'_> {
            fn on_outer_end(&mut self, v: &OuterView<'_>) -> bool {
                self.0.push(v.states[0].x.clone());
                false
            }
        }
        acc_sonata_run(
            &p,
            &params,
            &exact_averaging(1),
            SolverOptions::default(),
            TrackingInit::Local,
            &mut Rec(&mut history),
        )
        .unwrap();

        // Reference: each outer step runs T proximal-point steps with
        // coefficient β on x ↦ f(x) + (δ/2)‖x − z‖², then extrapolates.
        let h = p.hessian_bound(0);
        let b = p.agent_linear(0).unwrap().clone();
        let sys = &h + Matrix::identity(6, 6) * (params.delta + beta);
        let (mut x, mut z) = (Vector::zeros(6), Vector::zeros(6));
        for got in &history {
            let start = x.clone();
            for _ in 0..params.inner_iters {
                let rhs = &b + &z * params.delta + &x * beta;
                x = conjugate_gradient(&sys, &rhs, 1e-16, 500);
            }
            z = &x + (&x - &start) * params.extrapolation();
            assert!((got - &x).amax() <= 1e-9 * x.amax().max(1.0));
        }
    }

    #[test]
    fn star_matches_exact_averaging_mesh() {
        let p = instance(4, 5);
        let c = estimate_constants(&p).unwrap();
        for mode in [SurrogateKind::F, SurrogateKind::L] {
            let params = tune(&c, mode, InnerRule::Standard, 8).unwrap();
            let star = acc_sonata_star(&p, &params, SolverOptions::default()).unwrap();
            let mut mesh = Vec::new();
            struct Rec<'a>(&'a mut Vec<Vec<Vector>>);
            impl AccObserver for Rec<'_> {
                fn on_outer_end(&mut self, v: &OuterView<'_>) -> bool {
                    self.0.push(v.states.iter().map(|s| s.x.clone()).collect());
                    false
                }
            }
            acc_sonata_run(
                &p,
                &params,
                &exact_averaging(4),
                SolverOptions::default(),
                TrackingInit::Averaged,
                &mut Rec(&mut mesh),
            )
            .unwrap();
            for (xs, x) in mesh.iter().zip(&star[1..]) {
                for xi in xs {
                    assert!((xi - x).amax() <= 1e-12 * x.amax().max(1.0), "mode {mode}");
                }
            }
        }
    }
}
