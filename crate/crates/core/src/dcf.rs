//! MAC/PHY timing and single-cell DCF saturation analysis.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DcfError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("single-cell fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessMode {
    Basic,
    RtsCts,
}

/// Timing parameters of the MAC and PHY. All times in seconds, sizes in
/// bits, rates in bits per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacPhyParams {
    /// Backoff slot duration.
    pub slot_time: f64,
    pub sifs: f64,
    pub difs: f64,
    /// PHY preamble and PLCP header duration, paid once per frame.
    pub phy_overhead: f64,
    /// MAC header plus FCS of a DATA frame, sent at the data rate.
    pub mac_header_size: f64,
    pub data_rate: f64,
    pub control_rate: f64,
    pub ack_size: f64,
    /// Mean DATA payload.
    pub payload_size: f64,
    pub access_mode: AccessMode,
    pub rts_size: f64,
    pub cts_size: f64,
}

impl MacPhyParams {
    /// 802.11b DSSS at 11 Mbps data and control rate with long preamble.
    pub fn dot11b_11mbps() -> Self {
        Self {
            slot_time: 20e-6,
            sifs: 10e-6,
            difs: 50e-6,
            phy_overhead: 192e-6,
            mac_header_size: 28.0 * 8.0,
            data_rate: 11e6,
            control_rate: 11e6,
            ack_size: 14.0 * 8.0,
            payload_size: 1000.0 * 8.0,
            access_mode: AccessMode::Basic,
            rts_size: 20.0 * 8.0,
            cts_size: 14.0 * 8.0,
        }
    }

    pub fn with_payload_bytes(mut self, bytes: f64) -> Self {
        self.payload_size = bytes * 8.0;
        self
    }

    pub fn validate(&self) -> Result<(), DcfError> {
        let positive = [
            ("slot_time", self.slot_time),
            ("sifs", self.sifs),
            ("difs", self.difs),
            ("phy_overhead", self.phy_overhead),
            ("data_rate", self.data_rate),
            ("control_rate", self.control_rate),
            ("ack_size", self.ack_size),
            ("payload_size", self.payload_size),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(DcfError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.mac_header_size >= 0.0) {
            return Err(DcfError::InvalidParams("mac_header_size must be non-negative".into()));
        }
        if self.access_mode == AccessMode::RtsCts && !(self.rts_size > 0.0 && self.cts_size > 0.0) {
            return Err(DcfError::InvalidParams(
                "rts_size and cts_size must be positive in RTS/CTS mode".into(),
            ));
        }
        Ok(())
    }
}

/// Retransmit limit and mean backoff per attempt stage, in slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackoffParams {
    pub retry_limit: u32,
    /// `b_0 ..= b_K`.
    pub mean_backoffs: Vec<f64>,
}

impl BackoffParams {
    pub fn new(mean_backoffs: Vec<f64>) -> Result<Self, DcfError> {
        if mean_backoffs.is_empty() {
            return Err(DcfError::InvalidParams("need at least b_0".into()));
        }
        if let Some(b) = mean_backoffs.iter().find(|&&b| !(b > 0.0) || !b.is_finite()) {
            return Err(DcfError::InvalidParams(format!("mean backoff {b} must be positive")));
        }
        Ok(Self {
            retry_limit: (mean_backoffs.len() - 1) as u32,
            mean_backoffs,
        })
    }

    /// 802.11b: CWmin 32, CWmax 1024, retry limit 7.
    pub fn dot11b() -> Self {
        mean_backoffs(32, 1024, 7).expect("valid 802.11b windows")
    }

    pub fn b0(&self) -> f64 {
        self.mean_backoffs[0]
    }
}

/// Mean backoffs for binary exponential backoff: stage `k` draws uniformly
/// from `0..CW_k` with `CW_k = min(2^k cw_min, cw_max)`.
pub fn mean_backoffs(cw_min: u32, cw_max: u32, retry_limit: u32) -> Result<BackoffParams, DcfError> {
    if !cw_min.is_power_of_two() || !cw_max.is_power_of_two() {
        return Err(DcfError::InvalidParams(format!(
            "contention windows must be powers of two, got {cw_min}/{cw_max}"
        )));
    }
    if cw_min > cw_max {
        return Err(DcfError::InvalidParams(format!("cw_min {cw_min} exceeds cw_max {cw_max}")));
    }
    let b = (0..=retry_limit)
        .map(|k| {
            let cw = (cw_min as u64)
                .checked_shl(k)
                .filter(|&w| w <= cw_max as u64)
                .unwrap_or(cw_max as u64);
            (cw as f64 - 1.0) / 2.0
        })
        .collect();
    BackoffParams::new(b)
}

/// Attempt probability per backoff slot given the conditional collision
/// probability `gamma`:
/// `(1 + γ + … + γ^K) / (b_0 + γ b_1 + … + γ^K b_K)`.
pub fn attempt_probability(gamma: f64, b: &BackoffParams) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut g = 1.0;
    for &bk in &b.mean_backoffs {
        num += g;
        den += g * bk;
        g *= gamma;
    }
    num / den
}

/// Channel hold times `(T_s, T_c)` for a success and for a collision.
pub fn frame_exchange_times(p: &MacPhyParams) -> (f64, f64) {
    let t_data = p.phy_overhead + (p.mac_header_size + p.payload_size) / p.data_rate;
    let t_ack = p.phy_overhead + p.ack_size / p.control_rate;
    match p.access_mode {
        AccessMode::Basic => (t_data + p.sifs + t_ack + p.difs, t_data + p.difs),
        AccessMode::RtsCts => {
            let t_rts = p.phy_overhead + p.rts_size / p.control_rate;
            let t_cts = p.phy_overhead + p.cts_size / p.control_rate;
            (
                t_rts + p.sifs + t_cts + p.sifs + t_data + p.sifs + t_ack + p.difs,
                t_rts + p.difs,
            )
        }
    }
}

/// Saturation operating point of an isolated cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleCellSolution {
    pub n: u32,
    pub beta: f64,
    pub gamma: f64,
    /// Aggregate successful packets per second.
    pub throughput_pkts: f64,
    pub p_idle: f64,
    pub p_succ: f64,
    pub p_coll: f64,
    pub iterations: usize,
}

const SINGLE_CELL_DAMPING: f64 = 0.5;
const SINGLE_CELL_TOLERANCE: f64 = 1e-10;
const SINGLE_CELL_MAX_ITER: usize = 10_000;

/// Collision probability seen by one of `n` nodes that all attempt with
/// probability `beta`.
pub fn intra_cell_collision(beta: f64, n: u32) -> f64 {
    1.0 - (1.0 - beta).powi(n as i32 - 1)
}

/// Solves `β = G(1 - (1-β)^(n-1))` by damped iteration and evaluates the
/// renewal-reward throughput of the cell.
pub fn solve_single_cell(
    n: u32,
    p: &MacPhyParams,
    b: &BackoffParams,
) -> Result<SingleCellSolution, DcfError> {
    if n < 1 {
        return Err(DcfError::InvalidParams("a cell needs at least one node".into()));
    }
    p.validate()?;
    let map = |beta: f64| attempt_probability(intra_cell_collision(beta, n), b);

    let mut beta = 1.0 / b.b0();
    let mut w = SINGLE_CELL_DAMPING;
    let mut last_residual = f64::INFINITY;
    let mut iterations = 0;
    loop {
        let next = map(beta);
        let residual = (next - beta).abs();
        if residual < SINGLE_CELL_TOLERANCE {
            break;
        }
        if iterations >= SINGLE_CELL_MAX_ITER {
            return Err(DcfError::NonConvergence {
                iterations,
                residual,
            });
        }
        // an oscillating map needs a smaller step
        if residual > last_residual {
            w = (w * 0.5).max(1e-3);
        }
        last_residual = residual;
        beta = (1.0 - w) * beta + w * next;
        iterations += 1;
    }
    Ok(single_cell_at(n, beta, p, iterations))
}

/// Slot fractions and throughput of a cell of `n` nodes attempting with `beta`.
pub fn single_cell_at(n: u32, beta: f64, p: &MacPhyParams, iterations: usize) -> SingleCellSolution {
    let (ts, tc) = frame_exchange_times(p);
    let p_idle = (1.0 - beta).powi(n as i32);
    let p_succ = n as f64 * beta * (1.0 - beta).powi(n as i32 - 1);
    let p_coll = 1.0 - p_idle - p_succ;
    let throughput_pkts = p_succ / (p_idle * p.slot_time + p_succ * ts + p_coll * tc);
    SingleCellSolution {
        n,
        beta,
        gamma: intra_cell_collision(beta, n),
        throughput_pkts,
        p_idle,
        p_succ,
        p_coll,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn horner(gamma: f64, b: &BackoffParams) -> f64 {
        let num = b.mean_backoffs.iter().fold(0.0, |acc, _| acc * gamma + 1.0);
        let den = b.mean_backoffs.iter().rev().fold(0.0, |acc, &bk| acc * gamma + bk);
        num / den
    }

    /// Root of `β - G(1-(1-β)^(n-1))` by bisection; the map is decreasing in
    /// β so the difference is increasing and the root is unique.
    fn bisection_root(n: u32, b: &BackoffParams) -> f64 {
        let f = |beta: f64| beta - attempt_probability(intra_cell_collision(beta, n), b);
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn dot11b_backoffs() {
        let b = mean_backoffs(32, 1024, 7).unwrap();
        assert_eq!(b.retry_limit, 7);
        assert_eq!(b.mean_backoffs, vec![15.5, 31.5, 63.5, 127.5, 255.5, 511.5, 511.5, 511.5]);
        assert_eq!(mean_backoffs(32, 32, 0).unwrap().mean_backoffs, vec![15.5]);
        assert_eq!(mean_backoffs(2, 2, 1).unwrap().mean_backoffs, vec![0.5, 0.5]);
        assert!(mean_backoffs(64, 32, 3).is_err());
        assert!(mean_backoffs(30, 1024, 3).is_err());
    }

    #[test]
    fn attempt_probability_endpoints() {
        let b = BackoffParams::dot11b();
        assert_eq!(attempt_probability(0.0, &b), 1.0 / 15.5);
        let sum: f64 = b.mean_backoffs.iter().sum();
        assert!((attempt_probability(1.0, &b) - 8.0 / sum).abs() < 1e-15);
        for g in [0.1, 0.5, 0.9] {
            assert!((attempt_probability(g, &b) - horner(g, &b)).abs() < 1e-15);
        }
    }

    #[test]
    fn dot11b_frame_times() {
        // T_DATA = 192 + (224 + 8000)/11 us, T_ACK = 192 + 112/11 us
        let (ts, tc) = frame_exchange_times(&MacPhyParams::dot11b_11mbps());
        assert!((ts - 1201.818_181_818_181_8e-6).abs() < 1e-15);
        assert!((tc - 989.636_363_636_363_6e-6).abs() < 1e-15);
    }

    #[test]
    fn zero_payload_difference_is_sifs_plus_ack() {
        let mut p = MacPhyParams::dot11b_11mbps();
        p.payload_size = 0.0;
        let (ts, tc) = frame_exchange_times(&p);
        let t_ack = p.phy_overhead + p.ack_size / p.control_rate;
        assert!((ts - tc - (p.sifs + t_ack)).abs() < 1e-15);
    }

    #[test]
    fn frame_times_linear_in_payload() {
        for mode in [AccessMode::Basic, AccessMode::RtsCts] {
            let mut p = MacPhyParams::dot11b_11mbps();
            p.access_mode = mode;
            let (ts1, tc1) = frame_exchange_times(&p);
            let l = p.payload_size;
            p.payload_size = 2.0 * l;
            let (ts2, tc2) = frame_exchange_times(&p);
            assert!((ts2 - ts1 - l / p.data_rate).abs() < 1e-15);
            if mode == AccessMode::Basic {
                assert!((tc2 - tc1 - l / p.data_rate).abs() < 1e-15);
            } else {
                // an RTS collision does not carry the payload
                assert_eq!(tc2, tc1);
            }
        }
    }

    #[test]
    fn lone_node_never_collides() {
        let p = MacPhyParams::dot11b_11mbps();
        let b = BackoffParams::dot11b();
        let s = solve_single_cell(1, &p, &b).unwrap();
        let (ts, _) = frame_exchange_times(&p);
        assert_eq!(s.gamma, 0.0);
        assert_eq!(s.beta, 1.0 / 15.5);
        let expected = s.beta / ((1.0 - s.beta) * p.slot_time + s.beta * ts);
        assert!((s.throughput_pkts - expected).abs() < 1e-9);
    }

    #[test]
    fn two_nodes_gamma_equals_beta() {
        let b = BackoffParams::dot11b();
        let s = solve_single_cell(2, &MacPhyParams::dot11b_11mbps(), &b).unwrap();
        assert!((s.gamma - s.beta).abs() < 1e-15);
        assert!((attempt_probability(s.beta, &b) - s.beta).abs() < 1e-10);
    }

    #[test]
    fn matches_bisection_oracle() {
        let p = MacPhyParams::dot11b_11mbps();
        let b = BackoffParams::dot11b();
        for n in [2, 5, 10, 20, 30] {
            let s = solve_single_cell(n, &p, &b).unwrap();
            let root = bisection_root(n, &b);
            assert!((s.beta - root).abs() < 1e-8, "n={n}: {} vs {root}", s.beta);
            let oracle = single_cell_at(n, root, &p, 0);
            assert!((s.throughput_pkts - oracle.throughput_pkts).abs() < 1e-6);
        }
    }

    #[test]
    fn gamma_nondecreasing_in_n() {
        let p = MacPhyParams::dot11b_11mbps();
        let b = BackoffParams::dot11b();
        let mut last = -1.0;
        for n in 1..=30 {
            let s = solve_single_cell(n, &p, &b).unwrap();
            assert!(s.gamma >= last);
            assert!((s.p_idle + s.p_succ + s.p_coll - 1.0).abs() < 1e-12);
            assert!(s.beta > 0.0 && s.beta <= 1.0);
            last = s.gamma;
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let b = BackoffParams::dot11b();
        assert!(solve_single_cell(0, &MacPhyParams::dot11b_11mbps(), &b).is_err());
        let mut p = MacPhyParams::dot11b_11mbps();
        p.data_rate = 0.0;
        assert!(matches!(solve_single_cell(2, &p, &b), Err(DcfError::InvalidParams(_))));
        assert!(BackoffParams::new(vec![1.0, 0.0]).is_err());
    }
}
