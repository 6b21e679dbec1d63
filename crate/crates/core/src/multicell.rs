//! Multi-cell saturation analysis.
//!
//! Each cell alternates between backoff, transmitting and blocked. The set
//! of transmitting cells evolves as a reversible CTMC over the independent
//! sets of the contention graph, with activation rate `λ_i` and deactivation
//! rate `μ_i` per cell, so its stationary law has product form in the access
//! intensities `ρ_i = λ_i / μ_i`. The collision probability of each cell is
//! then averaged over the states in which it is in backoff, and the whole
//! chain `β → (λ, μ) → π → γ → G(γ)` is iterated to a fixed point.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dcf::{
    attempt_probability, frame_exchange_times, solve_single_cell, BackoffParams, DcfError,
    MacPhyParams, SingleCellSolution,
};
use crate::topology::{
    enumerate_independent_sets_capped, mis_stats_capped, ContentionGraph, MisStats, State,
    StateSpace, TopologyError, DEFAULT_STATE_CAP,
};
use crate::CellSet;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MulticellError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Dcf(#[from] DcfError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cell {cell} has zero attempt probability; its activity time is undefined")]
    ZeroAttempt { cell: usize },
    #[error("cell {cell} is not in backoff in state {state:?}")]
    NotInBackoff { cell: usize, state: Vec<usize> },
    #[error("cell {cell} is in backoff with zero probability; its collision probability is undefined")]
    DegenerateBackoff { cell: usize },
    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("fixed point depends on the starting point: solutions differ by {spread:e}")]
    StartDependence { spread: f64 },
}

/// Starting point for the attempt-probability iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialBeta {
    /// `1/b_0` in every cell, the attempt probability without collisions.
    NoCollision,
    Uniform(f64),
    PerCell(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    /// Sup-norm residual `|G(Γ(β)) - β|` at which iteration stops.
    pub tolerance: f64,
    /// Step size `w` of `β ← (1-w)β + w G(Γ(β))`.
    pub damping: f64,
    pub max_iterations: usize,
    pub initial_beta: InitialBeta,
    /// Extra solves from random starting points used to confirm that the
    /// fixed point is unique. Zero disables the check.
    pub restarts: usize,
    /// Seed for the random starting points.
    pub seed: u64,
    pub state_cap: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            damping: 0.5,
            max_iterations: 5000,
            initial_beta: InitialBeta::NoCollision,
            restarts: 3,
            seed: 1,
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<(), MulticellError> {
        if !(self.tolerance > 0.0) {
            return Err(MulticellError::InvalidInput("tolerance must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(MulticellError::InvalidInput("damping must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Everything the saturation fixed point needs.
#[derive(Debug, Clone)]
pub struct MulticellInput {
    pub graph: ContentionGraph,
    pub node_counts: Vec<u32>,
    pub mac_phy: MacPhyParams,
    pub backoff: BackoffParams,
}

impl MulticellInput {
    pub fn validate(&self) -> Result<(), MulticellError> {
        if self.node_counts.len() != self.graph.len() {
            return Err(MulticellError::InvalidInput(format!(
                "{} node counts for {} cells",
                self.node_counts.len(),
                self.graph.len()
            )));
        }
        if let Some(k) = self.node_counts.iter().position(|&n| n < 1) {
            return Err(MulticellError::InvalidInput(format!(
                "cell {} needs at least one node",
                k + 1
            )));
        }
        self.mac_phy.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MulticellSolution {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Activation rates, 1/s.
    pub lambda: Vec<f64>,
    /// Deactivation rates, 1/s.
    pub mu: Vec<f64>,
    pub rho: Vec<f64>,
    /// Transmitting sets, aligned with `pi`.
    pub states: Vec<CellSet>,
    pub pi: Vec<f64>,
    /// Fraction of time each cell is not blocked.
    pub x: Vec<f64>,
    pub single_cell: Vec<SingleCellSolution>,
    /// Aggregate packets/s per cell.
    pub cell_throughput_pkts: Vec<f64>,
    /// Packets/s per node.
    pub per_node_throughput_pkts: Vec<f64>,
    pub normalized_network_throughput: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Largest sup-norm distance between this solution and those reached
    /// from random starting points, when restarts were run.
    pub restart_spread: Option<f64>,
}

/// `λ_i = (1 - (1-β_i)^{n_i}) / σ`.
pub fn activation_rate(beta: f64, n: u32, sigma: f64) -> f64 {
    (1.0 - (1.0 - beta).powi(n as i32)) / sigma
}

/// Probability that a transmission started by the cell is not an
/// intra-cell collision.
pub fn success_probability(beta: f64, n: u32) -> f64 {
    n as f64 * beta * (1.0 - beta).powi(n as i32 - 1) / (1.0 - (1.0 - beta).powi(n as i32))
}

/// `1/μ_i = p_succ T_s + (1 - p_succ) T_c`.
pub fn mean_activity_time(beta: f64, n: u32, ts: f64, tc: f64) -> Result<f64, MulticellError> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(MulticellError::ZeroAttempt { cell: 0 });
    }
    let p = success_probability(beta, n);
    Ok(p * ts + (1.0 - p) * tc)
}

/// Product-form stationary law `π(A) ∝ Π_{i∈A} ρ_i`, normalized. Weights
/// are formed in log space so that large `ρ` and many cells cannot overflow.
pub fn stationary_distribution(ss: &StateSpace, rho: &[f64]) -> Result<Vec<f64>, MulticellError> {
    if rho.len() != ss.n_cells() {
        return Err(MulticellError::InvalidInput(format!(
            "{} access intensities for {} cells",
            rho.len(),
            ss.n_cells()
        )));
    }
    if let Some(r) = rho.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
        return Err(MulticellError::InvalidInput(format!(
            "access intensity {r} must be finite and non-negative"
        )));
    }
    let log_rho: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
    let log_w: Vec<f64> = ss
        .states()
        .iter()
        .map(|s| s.active.iter().map(|i| log_rho[i]).sum())
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / z).collect())
}

/// Collision probability of an attempt by a node of cell `i` in `state`:
/// `1 - (1-β_i)^{n_i-1} Π_{j ∈ N_i ∩ U_A} (1-β_j)^{n_j}`.
pub fn per_state_collision(
    g: &ContentionGraph,
    state: &State,
    cell: usize,
    beta: &[f64],
    n: &[u32],
) -> Result<f64, MulticellError> {
    if !state.backoff.contains(cell) {
        return Err(MulticellError::NotInBackoff {
            cell,
            state: state.active.to_vec(),
        });
    }
    let silent: f64 = g
        .neighbors(cell)
        .intersection(state.backoff)
        .iter()
        .map(|j| (1.0 - beta[j]).powi(n[j] as i32))
        .product();
    Ok(1.0 - (1.0 - beta[cell]).powi(n[cell] as i32 - 1) * silent)
}

/// Collision probability of each cell, averaged over the states in which
/// the cell is in backoff with weights `π`.
pub fn collision_probability(
    g: &ContentionGraph,
    ss: &StateSpace,
    pi: &[f64],
    beta: &[f64],
    n: &[u32],
) -> Result<Vec<f64>, MulticellError> {
    let cells = g.len();
    let silent: Vec<f64> = (0..cells)
        .map(|j| (1.0 - beta[j]).powi(n[j] as i32))
        .collect();
    let own: Vec<f64> = (0..cells)
        .map(|i| (1.0 - beta[i]).powi(n[i] as i32 - 1))
        .collect();
    let mut num = vec![0.0; cells];
    let mut den = vec![0.0; cells];
    for (s, &p) in ss.states().iter().zip(pi) {
        for i in s.backoff.iter() {
            let others: f64 = g
                .neighbors(i)
                .intersection(s.backoff)
                .iter()
                .map(|j| silent[j])
                .product();
            num[i] += p * (1.0 - own[i] * others);
            den[i] += p;
        }
    }
    (0..cells)
        .map(|i| {
            if den[i] > 0.0 {
                Ok(num[i] / den[i])
            } else {
                Err(MulticellError::DegenerateBackoff { cell: i })
            }
        })
        .collect()
}

/// `x_i = Σ_{A : i ∈ A ∪ U_A} π(A)`.
pub fn unblocked_fraction(ss: &StateSpace, pi: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; ss.n_cells()];
    for (s, &p) in ss.states().iter().zip(pi) {
        for i in s.active.union(s.backoff).iter() {
            x[i] += p;
        }
    }
    x
}

/// Largest relative violation of `π(A) λ_i = π(A ∪ {i}) μ_i` over all
/// states and all cells in backoff.
pub fn detailed_balance_residual(ss: &StateSpace, pi: &[f64], lambda: &[f64], mu: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, s) in ss.states().iter().enumerate() {
        for i in s.backoff.iter() {
            let up = ss
                .index_of(s.active.with(i))
                .expect("adding a backoff cell keeps the set independent");
            let lhs = pi[k] * lambda[i];
            let rhs = pi[up] * mu[i];
            if lhs > 0.0 {
                worst = worst.max((lhs - rhs).abs() / lhs);
            }
        }
    }
    worst
}

/// Rates and stationary quantities implied by one attempt vector.
struct Evaluation {
    lambda: Vec<f64>,
    mu: Vec<f64>,
    rho: Vec<f64>,
    pi: Vec<f64>,
    gamma: Vec<f64>,
}

fn evaluate(
    input: &MulticellInput,
    ss: &StateSpace,
    ts: f64,
    tc: f64,
    beta: &[f64],
) -> Result<Evaluation, MulticellError> {
    let sigma = input.mac_phy.slot_time;
    let n = &input.node_counts;
    let lambda: Vec<f64> = beta
        .iter()
        .zip(n)
        .map(|(&b, &k)| activation_rate(b, k, sigma))
        .collect();
    let mu = beta
        .iter()
        .zip(n)
        .enumerate()
        .map(|(i, (&b, &k))| {
            mean_activity_time(b, k, ts, tc)
                .map(|t| 1.0 / t)
                .map_err(|_| MulticellError::ZeroAttempt { cell: i })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let rho: Vec<f64> = lambda.iter().zip(&mu).map(|(l, m)| l / m).collect();
    let pi = stationary_distribution(ss, &rho)?;
    let gamma = collision_probability(&input.graph, ss, &pi, beta, n)?;
    Ok(Evaluation {
        lambda,
        mu,
        rho,
        pi,
        gamma,
    })
}

struct Converged {
    beta: Vec<f64>,
    eval: Evaluation,
    residual: f64,
    iterations: usize,
}

fn iterate(
    input: &MulticellInput,
    ss: &StateSpace,
    cfg: &FixedPointConfig,
    start: Vec<f64>,
) -> Result<Converged, MulticellError> {
    let (ts, tc) = frame_exchange_times(&input.mac_phy);
    let mut beta = start;
    let mut w = cfg.damping;
    let mut last_residual = f64::INFINITY;
    let mut iterations = 0;
    loop {
        let eval = evaluate(input, ss, ts, tc, &beta)?;
        let next: Vec<f64> = eval
            .gamma
            .iter()
            .map(|&g| attempt_probability(g, &input.backoff))
            .collect();
        let residual = next
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if residual < cfg.tolerance {
            return Ok(Converged {
                beta,
                eval,
                residual,
                iterations,
            });
        }
        if iterations >= cfg.max_iterations {
            return Err(MulticellError::NonConvergence {
                iterations,
                residual,
            });
        }
        if residual > last_residual {
            w = (w * 0.5).max(1e-3);
        }
        last_residual = residual;
        for (b, nb) in beta.iter_mut().zip(&next) {
            *b = (1.0 - w) * *b + w * nb;
        }
        iterations += 1;
    }
}

fn initial_beta(input: &MulticellInput, init: &InitialBeta) -> Result<Vec<f64>, MulticellError> {
    let n = input.graph.len();
    let v = match init {
        InitialBeta::NoCollision => vec![1.0 / input.backoff.b0(); n],
        InitialBeta::Uniform(b) => vec![*b; n],
        InitialBeta::PerCell(v) => v.clone(),
    };
    if v.len() != n || v.iter().any(|b| !(*b > 0.0 && *b <= 1.0)) {
        return Err(MulticellError::InvalidInput(
            "initial attempt probabilities must be one per cell in (0, 1]".into(),
        ));
    }
    Ok(v)
}

/// Solves the N-dimensional fixed point `β = (G(Γ_1(β)), …, G(Γ_N(β)))` and
/// derives every per-cell quantity from the converged point.
pub fn solve_fixed_point(
    input: &MulticellInput,
    cfg: &FixedPointConfig,
) -> Result<MulticellSolution, MulticellError> {
    input.validate()?;
    cfg.validate()?;
    let ss = enumerate_independent_sets_capped(&input.graph, cfg.state_cap)?;
    solve_on(input, &ss, cfg)
}

/// [`solve_fixed_point`] with a state space enumerated by the caller.
pub fn solve_on(
    input: &MulticellInput,
    ss: &StateSpace,
    cfg: &FixedPointConfig,
) -> Result<MulticellSolution, MulticellError> {
    let main = iterate(input, ss, cfg, initial_beta(input, &cfg.initial_beta)?)?;

    let restart_spread = if cfg.restarts > 0 {
        let mut rng = crate::rng::stream(cfg.seed, 0x5eed);
        let mut spread: f64 = 0.0;
        for _ in 0..cfg.restarts {
            let start: Vec<f64> = (0..input.graph.len())
                .map(|_| rng.random_range(1e-3..1.0))
                .collect();
            let other = iterate(input, ss, cfg, start)?;
            let d = other
                .beta
                .iter()
                .zip(&main.beta)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            spread = spread.max(d);
        }
        if spread > 100.0 * cfg.tolerance {
            return Err(MulticellError::StartDependence { spread });
        }
        Some(spread)
    } else {
        None
    };

    let single_cell = single_cell_bases(&input.node_counts, &input.mac_phy, &input.backoff)?;
    let x = unblocked_fraction(ss, &main.eval.pi);
    let (cell_throughput_pkts, per_node_throughput_pkts) =
        saturation_throughputs(&x, &single_cell);
    let Converged {
        beta,
        eval,
        residual,
        iterations,
    } = main;
    Ok(MulticellSolution {
        normalized_network_throughput: x.iter().sum(),
        beta,
        gamma: eval.gamma,
        lambda: eval.lambda,
        mu: eval.mu,
        rho: eval.rho,
        states: ss.states().iter().map(|s| s.active).collect(),
        pi: eval.pi,
        x,
        single_cell,
        cell_throughput_pkts,
        per_node_throughput_pkts,
        residual,
        iterations,
        restart_spread,
    })
}

/// Isolated-cell solution for each cell's node count.
pub fn single_cell_bases(
    node_counts: &[u32],
    mac_phy: &MacPhyParams,
    backoff: &BackoffParams,
) -> Result<Vec<SingleCellSolution>, DcfError> {
    let mut cache: Vec<SingleCellSolution> = Vec::new();
    node_counts
        .iter()
        .map(|&n| {
            if let Some(s) = cache.iter().find(|s| s.n == n) {
                return Ok(s.clone());
            }
            let s = solve_single_cell(n, mac_phy, backoff)?;
            cache.push(s.clone());
            Ok(s)
        })
        .collect()
}

/// `Θ_i = x_i Θ^{sat}_{n_i}` and `θ_i = Θ_i / n_i`.
pub fn saturation_throughputs(x: &[f64], bases: &[SingleCellSolution]) -> (Vec<f64>, Vec<f64>) {
    let cell: Vec<f64> = x
        .iter()
        .zip(bases)
        .map(|(xi, b)| xi * b.throughput_pkts)
        .collect();
    let node = cell
        .iter()
        .zip(bases)
        .map(|(c, b)| c / b.n as f64)
        .collect();
    (cell, node)
}

/// MAC-level sizes of TCP segments, in bits, including the IP header.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcpSizes {
    pub data: f64,
    pub ack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TcpLongSolution {
    /// The equivalent saturated network: two nodes per cell, averaged payload.
    pub saturated: MulticellSolution,
    /// AP throughput of an isolated cell, packets/s.
    pub single_cell_ap_pkts: f64,
    /// AP throughput of each cell, packets/s.
    pub ap_throughput_pkts: Vec<f64>,
}

/// AP throughputs under long-lived TCP downloads. Every cell is replaced by
/// a saturated AP and one saturated STA exchanging frames of the mean of the
/// DATA and ACK sizes; half of the isolated cell's successes belong to the AP.
pub fn tcp_long_throughputs(
    graph: &ContentionGraph,
    mac_phy: &MacPhyParams,
    backoff: &BackoffParams,
    sizes: TcpSizes,
    cfg: &FixedPointConfig,
) -> Result<TcpLongSolution, MulticellError> {
    if !(sizes.data > 0.0 && sizes.ack > 0.0) {
        return Err(MulticellError::InvalidInput(
            "TCP DATA and ACK sizes must be positive".into(),
        ));
    }
    let mut p = mac_phy.clone();
    p.payload_size = 0.5 * (sizes.data + sizes.ack);
    let input = MulticellInput {
        graph: graph.clone(),
        node_counts: vec![2; graph.len()],
        mac_phy: p,
        backoff: backoff.clone(),
    };
    let saturated = solve_fixed_point(&input, cfg)?;
    let single_cell_ap_pkts = single_cell_ap_tcp_throughput(mac_phy, backoff, sizes)?;
    let ap_throughput_pkts = saturated.x.iter().map(|x| x * single_cell_ap_pkts).collect();
    Ok(TcpLongSolution {
        saturated,
        single_cell_ap_pkts,
        ap_throughput_pkts,
    })
}

/// TCP data packets/s delivered by the AP of an isolated cell: half of the
/// successes of two saturated nodes sending frames of the averaged size.
pub fn single_cell_ap_tcp_throughput(
    mac_phy: &MacPhyParams,
    backoff: &BackoffParams,
    sizes: TcpSizes,
) -> Result<f64, MulticellError> {
    if !(sizes.data > 0.0 && sizes.ack > 0.0) {
        return Err(MulticellError::InvalidInput(
            "TCP DATA and ACK sizes must be positive".into(),
        ));
    }
    let mut p = mac_phy.clone();
    p.payload_size = 0.5 * (sizes.data + sizes.ack);
    Ok(solve_single_cell(2, &p, backoff)?.throughput_pkts / 2.0)
}

/// Limit of the unblocked fractions as every access intensity grows without
/// bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfiniteRhoLimit {
    pub stats: MisStats,
    /// `η_i / η`.
    pub x: Vec<f64>,
    /// `Σ_i x_i`, which equals the independence number.
    pub normalized_network_throughput: f64,
}

pub fn infinite_rho_x(g: &ContentionGraph) -> Result<InfiniteRhoLimit, MulticellError> {
    infinite_rho_x_capped(g, DEFAULT_STATE_CAP)
}

pub fn infinite_rho_x_capped(g: &ContentionGraph, cap: usize) -> Result<InfiniteRhoLimit, MulticellError> {
    let stats = mis_stats_capped(g, cap)?;
    let x = stats.fractions();
    // Σ η_i = α η, so the integer quotient is exact
    let total: u64 = stats.eta_per_cell.iter().sum();
    let normalized_network_throughput = (total / stats.eta) as f64;
    Ok(InfiniteRhoLimit {
        stats,
        x,
        normalized_network_throughput,
    })
}

/// One payload of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub payload_bytes: f64,
    pub outcome: Result<MulticellSolution, MulticellError>,
}

/// Solves the saturation model at each payload size. A failure at one point
/// is recorded and the sweep moves on.
pub fn payload_sweep(
    input: &MulticellInput,
    payloads_bytes: &[f64],
    cfg: &FixedPointConfig,
) -> Result<Vec<SweepPoint>, MulticellError> {
    input.validate()?;
    cfg.validate()?;
    let ss = enumerate_independent_sets_capped(&input.graph, cfg.state_cap)?;
    Ok(payloads_bytes
        .iter()
        .map(|&bytes| {
            let mut at = input.clone();
            at.mac_phy.payload_size = bytes * 8.0;
            let outcome = at
                .mac_phy
                .validate()
                .map_err(MulticellError::from)
                .and_then(|_| solve_on(&at, &ss, cfg));
            SweepPoint {
                payload_bytes: bytes,
                outcome,
            }
        })
        .collect())
}
