//! Topologies and gossip matrices.
//!
//! A [`GossipMatrix`] is a doubly stochastic W with its cached spectral gap
//! ρ = ‖W − 11ᵀ/m‖₂ and the number of physical communication rounds one
//! multiplication by W costs. Polynomial (Chebyshev) acceleration trades
//! extra rounds for a smaller ρ.

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::problems::{AgentData, LossKind, ProblemSpec, Regularizer};

const MAX_RESAMPLES: usize = 100;

/// Undirected graph; edges are stored once with `i < j`, self-loops implied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    m: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(m: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut list = Vec::new();
        for (a, b) in edges {
            if a == b || a >= m || b >= m {
                return Err(Error::invalid(format!("bad edge ({a}, {b}) for m = {m}")));
            }
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        list.dedup();
        Ok(Graph { m, edges: list })
    }

    pub fn nodes(&self) -> usize {
        self.m
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.m];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn is_connected(&self) -> bool {
        let mut uf = UnionFind::new(self.m);
        for &(a, b) in &self.edges {
            uf.union(a, b);
        }
        self.m <= 1 || (1..self.m).all(|v| uf.find(v) == uf.find(0))
    }

    /// Hop distances from `src` (usize::MAX when unreachable).
    pub fn bfs_distances(&self, src: usize) -> Vec<usize> {
        let mut adj = vec![Vec::new(); self.m];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut dist = vec![usize::MAX; self.m];
        let mut queue = std::collections::VecDeque::from([src]);
        dist[src] = 0;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Shortest hop distance between two node sets.
    pub fn set_distance(&self, from: &[usize], to: &[usize]) -> usize {
        from.iter()
            .flat_map(|&s| {
                let dist = self.bfs_distances(s);
                to.iter().map(move |&t| dist[t])
            })
            .min()
            .unwrap_or(usize::MAX)
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// G(m, p); attempt `k` draws from ChaCha stream `k` until the graph is connected.
pub fn erdos_renyi(m: usize, p: f64, seed: u64) -> Result<Graph> {
    if m < 2 {
        return Err(Error::invalid(format!("erdos-renyi needs m >= 2, got {m}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("edge probability {p} outside (0, 1]")));
    }
    for attempt in 0..MAX_RESAMPLES {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let mut edges = Vec::new();
        for a in 0..m {
            for b in a + 1..m {
                if rng.random::<f64>() < p {
                    edges.push((a, b));
                }
            }
        }
        let g = Graph { m, edges };
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::TopologyGenerationFailed { attempts: MAX_RESAMPLES })
}

pub fn line_graph(m: usize) -> Graph {
    Graph { m, edges: (1..m).map(|i| (i - 1, i)).collect() }
}

pub fn star_graph(m: usize) -> Graph {
    Graph { m, edges: (1..m).map(|i| (0, i)).collect() }
}

pub fn complete_graph(m: usize) -> Graph {
    Graph { m, edges: (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GossipMatrix {
    w: Matrix,
    rho: f64,
    rounds_per_application: usize,
}

/// ‖W − 11ᵀ/m‖₂ of the symmetric part of W.
pub fn spectral_gap(w: &Matrix) -> f64 {
    let m = w.nrows();
    let centered = (w + w.transpose()) * 0.5 - Matrix::from_element(m, m, 1.0 / m as f64);
    crate::linalg::sym_spectral_norm(&centered)
}

impl GossipMatrix {
    /// Wraps a doubly stochastic matrix, checking sums to 1e−12 and ρ < 1.
    pub fn from_matrix(w: Matrix, rounds_per_application: usize) -> Result<Self> {
        let m = w.nrows();
        if m == 0 || w.ncols() != m {
            return Err(Error::invalid("gossip matrix must be square and nonempty"));
        }
        for k in 0..m {
            let (r, c) = (w.row(k).sum(), w.column(k).sum());
            if (r - 1.0).abs() > 1e-12 || (c - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("row/column {k} sums to {r}/{c}, not 1")));
            }
        }
        let rho = spectral_gap(&w);
        if !(rho < 1.0) {
            return Err(Error::invalid(format!("rho = {rho} is not < 1 (disconnected graph?)")));
        }
        Ok(GossipMatrix { w, rho, rounds_per_application: rounds_per_application.max(1) })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.w
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn nodes(&self) -> usize {
        self.w.nrows()
    }

    pub fn rounds_per_application(&self) -> usize {
        self.rounds_per_application
    }

    /// W = I, which is not a valid mixing matrix for m > 1.
    #[cfg(test)]
    pub(crate) fn identity_unchecked(m: usize) -> Self {
        GossipMatrix { w: Matrix::identity(m, m), rho: 1.0, rounds_per_application: 1 }
    }

    /// out_i = Σ_j w_ij v_j.
    pub fn apply(&self, v: &[Vector]) -> Vec<Vector> {
        let m = self.nodes();
        assert_eq!(v.len(), m, "one vector per node");
        (0..m)
            .map(|i| {
                let mut acc = Vector::zeros(v[0].len());
                for (j, vj) in v.iter().enumerate() {
                    let wij = self.w[(i, j)];
                    if wij != 0.0 {
                        acc.axpy(wij, vj, 1.0);
                    }
                }
                acc
            })
            .collect()
    }

    /// Extreme eigenvalues of the symmetric part of W restricted to 1⊥.
    pub fn consensus_interval(&self) -> (f64, f64) {
        let m = self.nodes();
        if m == 1 {
            return (0.0, 0.0);
        }
        let sym = (&self.w + self.w.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let ones = Vector::from_element(m, 1.0 / (m as f64).sqrt());
        let drop = (0..m)
            .max_by(|&a, &b| {
                let da = eig.eigenvectors.column(a).dot(&ones).abs();
                let db = eig.eigenvectors.column(b).dot(&ones).abs();
                da.total_cmp(&db)
            })
            .unwrap_or(0);
        let rest = (0..m).filter(|&k| k != drop).map(|k| eig.eigenvalues[k]);
        rest.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

/// w_ij = 1/(1 + max(deg_i, deg_j)) on edges, w_ii takes the rest.
pub fn metropolis_hastings(g: &Graph) -> GossipMatrix {
    let m = g.nodes();
    let deg = g.degrees();
    let mut w = Matrix::zeros(m, m);
    for &(a, b) in g.edges() {
        let v = 1.0 / (1 + deg[a].max(deg[b])) as f64;
        w[(a, b)] = v;
        w[(b, a)] = v;
    }
    for i in 0..m {
        let off: f64 = (0..m).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    let rho = spectral_gap(&w);
    GossipMatrix { w, rho, rounds_per_application: 1 }
}

/// W = 11ᵀ/m: the master node of a star computing the exact average.
pub fn exact_averaging(m: usize) -> GossipMatrix {
    GossipMatrix { w: Matrix::from_element(m, m, 1.0 / m as f64), rho: 0.0, rounds_per_application: 1 }
}

/// Smallest achievable ρ of `chebyshev_accelerate` for a consensus spectrum
/// in [lo, hi]: 1/T_M(z₀) with z₀ = (2 − lo − hi)/(hi − lo).
pub fn chebyshev_bound(lo: f64, hi: f64, degree: usize) -> f64 {
    let width = hi - lo;
    if width <= 0.0 {
        return 0.0;
    }
    let z0 = (2.0 - lo - hi) / width;
    let xi = z0 - (z0 * z0 - 1.0).sqrt();
    let xm = xi.powi(degree as i32);
    2.0 * xm / (1.0 + xm * xm)
}

/// W = T_M(A)/T_M(z₀) with A = (2W̄ − (lo+hi)I)/(hi − lo), where [lo, hi] is
/// the spectrum of W̄ on 1⊥. The polynomial fixes P_M(1) = 1 and is the
/// minimax choice over that interval. Evaluated with a normalized three-term
/// recurrence so nothing overflows for large M.
pub fn chebyshev_accelerate(base: &GossipMatrix, degree: usize) -> Result<GossipMatrix> {
    if degree == 0 {
        return Err(Error::invalid("polynomial degree must be >= 1"));
    }
    if !(base.rho < 1.0) {
        return Err(Error::invalid(format!("base rho {} must be < 1", base.rho)));
    }
    let m = base.nodes();
    let rounds = degree * base.rounds_per_application;
    let (lo, hi) = base.consensus_interval();
    let width = hi - lo;
    if width <= 1e-14 {
        // A single consensus eigenvalue: one degree-1 step already averages exactly.
        let mut w = exact_averaging(m);
        w.rounds_per_application = rounds;
        return Ok(w);
    }
    let shift = lo + hi;
    let z0 = (2.0 - shift) / width;
    let mut a = &base.w * (2.0 / width);
    for k in 0..m {
        a[(k, k)] -= shift / width;
    }

    let identity = Matrix::identity(m, m);
    let mut prev = identity;
    let mut cur = &a / z0;
    let mut q_prev = 1.0 / z0;
    for _ in 1..degree {
        let q = 1.0 / (2.0 * z0 - q_prev);
        let next = (&a * &cur) * (2.0 * q) - &prev * (q * q_prev);
        prev = cur;
        cur = next;
        q_prev = q;
    }

    // Roundoff in the recurrence can leave row sums a few ulps off; restore them.
    let ones_err = (&cur * Vector::from_element(m, 1.0)).add_scalar(-1.0);
    for i in 0..m {
        cur[(i, i)] -= ones_err[i];
    }

    let rho = spectral_gap(&cur);
    let bound = chebyshev_bound(lo, hi, degree);
    if rho > bound + 1e-8 {
        return Err(Error::ChebyshevVerification { measured: rho, bound });
    }
    GossipMatrix::from_matrix(cur, rounds)
}

/// Smallest degree M whose Chebyshev bound is ≤ `target`, assuming only that
/// the consensus spectrum lies in [−ρ̄, ρ̄]. That is the worst case for a given
/// ρ̄, so the degree is enough for every W̄ with ‖W̄ − J‖ = ρ̄.
pub fn rounds_for_target(base_rho: f64, target_rho: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&target_rho) || !(0.0..1.0).contains(&base_rho) {
        return Err(Error::invalid(format!("need base {base_rho} and target {target_rho} in [0, 1)")));
    }
    if base_rho <= target_rho || base_rho == 0.0 {
        return Ok(1);
    }
    if target_rho == 0.0 {
        return Err(Error::UnreachableTarget { base: base_rho, target: target_rho });
    }
    let mut degree = 1;
    while chebyshev_bound(-base_rho, base_rho, degree) > target_rho {
        degree += 1;
    }
    Ok(degree)
}

/// Smallest degree whose spectrally measured ρ is ≤ `target` for this W̄.
pub fn rounds_for_target_spectral(base: &GossipMatrix, target_rho: f64) -> Result<usize> {
    let upper = rounds_for_target(base.rho, target_rho)?;
    for degree in 1..upper {
        if chebyshev_accelerate(base, degree)?.rho <= target_rho {
            return Ok(degree);
        }
    }
    Ok(upper)
}

/// ρ_m = ρ/(2+ρ) + 2cos(π/m)/(2+ρ), the gap of I − L/(2+ρ) on an m-node line.
pub fn line_rho(rho: f64, m: usize) -> f64 {
    rho / (2.0 + rho) + 2.0 / (2.0 + rho) * (std::f64::consts::PI / m as f64).cos()
}

/// The hard-instance network: either a weighted line or, for small ρ, a
/// weighted triangle.
#[derive(Debug, Clone)]
pub struct LineGossip {
    pub gossip: GossipMatrix,
    pub graph: Graph,
    /// The m of ρ_m < ρ ≤ ρ_{m+1}. For m = 2 the network is a 3-node complete graph.
    pub m: usize,
    pub weight_a: f64,
}

/// Builds W with ‖W − 11ᵀ/m‖ = `rho_target` (within 1e−6): W_{m,a} = I − L_{m,a}/(2+ρ)
/// on a line whose first edge has weight 1 − a, or W_a = I − L_a/3 on a triangle
/// when m = 2.
pub fn line_gossip_for_rho(rho_target: f64, max_m: usize) -> Result<LineGossip> {
    if !(rho_target > 0.0 && rho_target < 1.0) {
        return Err(Error::invalid(format!("target rho {rho_target} outside (0, 1)")));
    }
    let mut m = 2;
    while line_rho(rho_target, m + 1) < rho_target {
        m += 1;
        if m > max_m {
            return Err(Error::InstanceTooLarge { required: m, max: max_m });
        }
    }
    if m > max_m {
        return Err(Error::InstanceTooLarge { required: m, max: max_m });
    }

    let (nodes, scale, graph) = if m == 2 { (3, 3.0, complete_graph(3)) } else { (m, 2.0 + rho_target, line_graph(m)) };
    let build = |a: f64| -> Matrix {
        let mut lap = Matrix::zeros(nodes, nodes);
        for &(i, j) in graph.edges() {
            let wt = if (i, j) == (0, 1) { 1.0 - a } else { 1.0 };
            lap[(i, j)] -= wt;
            lap[(j, i)] -= wt;
            lap[(i, i)] += wt;
            lap[(j, j)] += wt;
        }
        Matrix::identity(nodes, nodes) - lap / scale
    };

    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spectral_gap(&build(mid)) < rho_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let a = 0.5 * (lo + hi);
    let gossip = GossipMatrix::from_matrix(build(a), 1)?;
    Ok(LineGossip { gossip, graph, m, weight_a: a })
}

/// The split-quadratic instance with its two far-apart agent groups.
#[derive(Debug, Clone)]
pub struct HardInstance {
    pub problem: ProblemSpec,
    /// Agents holding the A₁ chain and the linear e₁ term.
    pub left: Vec<usize>,
    /// Agents holding the A₂ chain.
    pub right: Vec<usize>,
    /// Constant that the ridge encoding adds to the objective.
    pub offset: f64,
}

/// Agents 1..⌈ζm⌉ (ζ = 1/32) hold a·xᵀA₁x − 2a·e₁ᵀx + (μ/2)‖x‖², agents
/// ⌊(1−ζ)m⌋+1..m hold a·xᵀA₂x + (μ/2)‖x‖², the rest hold (μ/2)‖x‖², with
/// a = β(1−μ)m/(8⌈ζm⌉). A₁ couples coordinates (2,3), (4,5), … (1-based) and
/// A₂ couples (1,2), (3,4), …, truncated to dimension d.
///
/// Each block is written as ridge data: rows s·v with s = √(2an) for every
/// rank-one piece v vᵀ, n = d/2 rows per agent and λ = μ/2.
pub fn hard_instance(mu: f64, beta: f64, m: usize, d: usize) -> Result<HardInstance> {
    if !(0.0..1.0).contains(&mu) || !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid(format!("need mu in [0, 1) and beta in (0, 1), got {mu}, {beta}")));
    }
    if d < 4 || !d.is_multiple_of(2) {
        return Err(Error::invalid(format!("dimension {d} must be even and >= 4")));
    }
    if m < 2 {
        return Err(Error::invalid("the hard instance needs m >= 2"));
    }
    let zeta = 1.0 / 32.0;
    let n_left = (zeta * m as f64).ceil() as usize;
    let right_start = ((1.0 - zeta) * m as f64).floor() as usize;
    let left: Vec<usize> = (0..n_left).collect();
    let right: Vec<usize> = (right_start..m).collect();

    let a = beta * (1.0 - mu) / 8.0 * m as f64 / n_left as f64;
    let rows = d / 2;
    let s = (2.0 * a * rows as f64).sqrt();

    let mut a1 = Matrix::zeros(rows, d);
    a1[(0, 0)] = s;
    for k in 1..rows {
        a1[(k, 2 * k - 1)] = s;
        a1[(k, 2 * k)] = -s;
    }
    let mut b1 = Vector::zeros(rows);
    b1[0] = s;
    let mut a2 = Matrix::zeros(rows, d);
    for k in 0..rows {
        a2[(k, 2 * k)] = s;
        a2[(k, 2 * k + 1)] = -s;
    }

    let agents = (0..m)
        .map(|i| {
            if i < n_left {
                AgentData { features: a1.clone(), labels: b1.clone() }
            } else if i >= right_start {
                AgentData { features: a2.clone(), labels: Vector::zeros(rows) }
            } else {
                AgentData { features: Matrix::zeros(rows, d), labels: Vector::zeros(rows) }
            }
        })
        .collect();
    let problem = ProblemSpec::new(LossKind::QuadraticRidge, agents, mu / 2.0, Regularizer::Zero)?;
    // ‖b₁‖²/(2n) = a on each left agent.
    let offset = a * n_left as f64 / m as f64;
    Ok(HardInstance { problem, left, right, offset })
}

/// Largest index with a nonzero entry.
pub fn support_end(x: &Vector) -> Option<usize> {
    x.iter().rposition(|&v| v != 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Topology {
    ErdosRenyi {
        p: f64,
    },
    Line,
    Star,
    Complete,
    /// Exact averaging by a master node (ρ = 0).
    ExactAveraging,
}

/// Builds the Metropolis-Hastings matrix for a topology descriptor, then
/// optionally accelerates it to reach `target_rho`.
pub fn build_gossip(topology: Topology, m: usize, seed: u64, target_rho: Option<f64>) -> Result<GossipMatrix> {
    let base = match topology {
        Topology::ErdosRenyi { p } => metropolis_hastings(&erdos_renyi(m, p, seed)?),
        Topology::Line => metropolis_hastings(&line_graph(m)),
        Topology::Star => metropolis_hastings(&star_graph(m)),
        Topology::Complete => metropolis_hastings(&complete_graph(m)),
        Topology::ExactAveraging => return Ok(exact_averaging(m)),
    };
    match target_rho {
        Some(t) if base.rho > t => {
            let degree = rounds_for_target_spectral(&base, t)?;
            chebyshev_accelerate(&base, degree)
        }
        _ => Ok(base),
    }
}
