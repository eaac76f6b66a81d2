use serde::Serialize;

use crate::accel::{acc_sonata_run, tune, AccObserver, InnerRule, OuterView};
use crate::diagnostics::{centralized_solve, optimality_gap, Oracle};
use crate::error::{Error, Result};
use crate::network::{hard_instance, line_gossip_for_rho, support_end};
use crate::problems::estimate_constants;
use crate::problems::ProblemSpec;
use crate::sonata::{SolverOptions, SurrogateKind, TrackingInit};

/// Largest line the check will build.
const MAX_NODES: usize = 4096;

/// Support of the left agents after a given number of rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportRecord {
    pub comms: usize,
    /// Largest nonzero index over the left agents' x (0-based), if any.
    pub max_support: Option<usize>,
    /// ⌊comms/d_c⌋ + 1.
    pub allowed: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundReport {
    pub rho_target: f64,
    pub rho_achieved: f64,
    pub nodes: usize,
    pub weight_a: f64,
    /// Graph distance between the two agent groups.
    pub d_c: usize,
    /// (4/25)·√(1/(1−ρ)).
    pub cut_bound: f64,
    pub support: Vec<SupportRecord>,
    pub invariant_holds: bool,
    pub rounds_run: usize,
    pub final_gap: f64,
    pub comms_to_target: Option<usize>,
}

struct SupportTracker<'a> {
    p: &'a ProblemSpec,
    oracle: &'a Oracle,
    target_gap: f64,
    comms_to_target: Option<usize>,
    left: &'a [usize],
    d_c: usize,
    rounds: usize,
    records: Vec<SupportRecord>,
    done: bool,
}

impl SupportTracker<'_> {
    fn record(&mut self, view: &OuterView<'_>) {
        if self.done {
            return;
        }
        let max_support = self.left.iter().filter_map(|&i| support_end(&view.states[i].x)).max();
        self.records.push(SupportRecord { comms: view.comms, max_support, allowed: view.comms / self.d_c + 1 });
        self.done = view.comms >= self.rounds;
    }
}

impl AccObserver for SupportTracker<'_> {
    fn on_inner_step(&mut self, view: &OuterView<'_>, _t: usize) {
        self.record(view);
    }

    fn on_outer_end(&mut self, view: &OuterView<'_>) -> bool {
        if self.comms_to_target.is_none() {
            let xs: Vec<_> = view.states.iter().map(|s| s.x.clone()).collect();
            if optimality_gap(self.p, &xs, self.oracle) <= self.target_gap {
                self.comms_to_target = Some(view.comms);
            }
        }
        self.done
    }
}

/// Builds the line network with ρ = `rho_target` and the matching hard
/// instance, runs ACC-SONATA-F for at least `rounds` communication rounds and
/// checks after every step that the left agents' support has not outrun the
/// information flow across the cut.
///
/// `comms_to_target` is the first outer-iteration boundary with Δ ≤
/// `target_gap`, if reached within the run.
///
/// Rounds are counted half-duplex so that one round moves information by one
/// hop: x and y are exchanged separately within a SONATA step.
pub fn lowerbound_check(
    mu: f64,
    beta: f64,
    rho_target: f64,
    d: usize,
    rounds: usize,
    target_gap: f64,
) -> Result<LowerBoundReport> {
    if !(0.0..1.0).contains(&mu) || !(beta > 0.0 && beta < 1.0) || !(rho_target > 0.0 && rho_target < 1.0) {
        return Err(Error::invalid(format!(
            "need mu in [0, 1), beta in (0, 1), rho in (0, 1); got {mu}, {beta}, {rho_target}"
        )));
    }
    let line = line_gossip_for_rho(rho_target, MAX_NODES)?;
    let nodes = line.gossip.nodes();
    let inst = hard_instance(mu, beta, nodes, d)?;
    let d_c = line.graph.set_distance(&inst.left, &inst.right);

    let constants = estimate_constants(&inst.problem)?;
    let mut params = tune(&constants, SurrogateKind::F, InnerRule::Standard, usize::MAX)?;
    let opts = SolverOptions { half_duplex: true, ..SolverOptions::default() };
    let per_outer = params.inner_iters * opts.rounds_per_step(&line.gossip);
    params.outer_iters = rounds.div_ceil(per_outer).max(1);

    let oracle = centralized_solve(&inst.problem, 1e-12)?;
    let mut tracker = SupportTracker {
        p: &inst.problem,
        oracle: &oracle,
        target_gap,
        comms_to_target: None,
        left: &inst.left,
        d_c: d_c.max(1),
        rounds,
        records: Vec::new(),
        done: false,
    };
    let run = acc_sonata_run(&inst.problem, &params, &line.gossip, opts, TrackingInit::Local, &mut tracker)?;

    let xs: Vec<_> = run.states.iter().map(|s| s.x.clone()).collect();
    let final_gap = optimality_gap(&inst.problem, &xs, &oracle);
    let invariant_holds = tracker.records.iter().all(|r| r.max_support.is_none_or(|s| s <= r.allowed));

    Ok(LowerBoundReport {
        rho_target,
        rho_achieved: line.gossip.rho(),
        nodes,
        weight_a: line.weight_a,
        d_c,
        cut_bound: 4.0 / 25.0 * (1.0 / (1.0 - line.gossip.rho())).sqrt(),
        support: tracker.records,
        invariant_holds,
        rounds_run: run.comms,
        final_gap,
        comms_to_target: tracker.comms_to_target,
    })
}
