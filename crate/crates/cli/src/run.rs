use cellwlan::flows::{
    effective_rate_fixed_point, mean_delay_analytic, simulate_flow_network, FlowParams,
};
use cellwlan::multicell::{
    infinite_rho_x_capped, payload_sweep, single_cell_ap_tcp_throughput, solve_fixed_point,
    tcp_long_throughputs, MulticellInput, MulticellSolution,
};
use cellwlan::simkit::{simulate_slotted, slots_for, SlottedParams};
use cellwlan::topology::{check_pbd, PairRelation};
use cellwlan::dcf::frame_exchange_times;

use crate::config::{AnalysisConfig, Network, TrafficMode};
use crate::output::{ResultBundle, Table, Value};
use crate::CliError;

fn failure(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

/// Resolves the network and records geometry warnings in the bundle.
fn network(cfg: &AnalysisConfig, bundle: &mut ResultBundle) -> Result<Network, CliError> {
    let net = cfg.deployment.resolve()?;
    match &net.deployment {
        Some(dep) => {
            for v in check_pbd(dep).violations() {
                bundle.warnings.push(format!(
                    "cells {} and {} are neither completely dependent nor independent \
                     (AP distance {} m); results assume they are",
                    dep.cells[v.a].id, dep.cells[v.b].id, v.ap_distance
                ));
            }
        }
        None => bundle
            .warnings
            .push("custom contention graph: geometric consistency not checked".into()),
    }
    Ok(net)
}

fn cell_tables(sol: &MulticellSolution, payload_bits: f64) -> Vec<Table> {
    let mut cells = Table::new(
        "cells",
        &[
            "cell",
            "nodes",
            "beta",
            "gamma",
            "lambda_per_s",
            "mu_per_s",
            "rho",
            "x",
            "single_cell_throughput_pkts",
            "throughput_pkts",
            "per_node_throughput_pkts",
            "throughput_bps",
        ],
    );
    for i in 0..sol.beta.len() {
        cells.push(vec![
            (i + 1).into(),
            sol.single_cell[i].n.into(),
            sol.beta[i].into(),
            sol.gamma[i].into(),
            sol.lambda[i].into(),
            sol.mu[i].into(),
            sol.rho[i].into(),
            sol.x[i].into(),
            sol.single_cell[i].throughput_pkts.into(),
            sol.cell_throughput_pkts[i].into(),
            sol.per_node_throughput_pkts[i].into(),
            (sol.cell_throughput_pkts[i] * payload_bits).into(),
        ]);
    }
    let mut states = Table::new("states", &["state", "pi"]);
    for (s, p) in sol.states.iter().zip(&sol.pi) {
        states.push(vec![s.to_string().into(), (*p).into()]);
    }
    let mut summary = Table::new("summary", &["quantity", "value"]);
    summary.push(vec![
        "normalized_network_throughput".into(),
        sol.normalized_network_throughput.into(),
    ]);
    summary.push(vec!["iterations".into(), sol.iterations.into()]);
    summary.push(vec!["residual".into(), sol.residual.into()]);
    summary.push(vec!["restart_spread".into(), sol.restart_spread.into()]);
    vec![cells, states, summary]
}

pub fn saturation(cfg: &AnalysisConfig) -> Result<ResultBundle, CliError> {
    cfg.require_mode("saturation", &[TrafficMode::Saturated])?;
    let mut bundle = ResultBundle::new("saturation", cfg);
    let net = network(cfg, &mut bundle)?;
    let input = MulticellInput {
        node_counts: cfg.traffic.node_counts(&net)?,
        graph: net.graph,
        mac_phy: cfg.mac_phy.resolve()?,
        backoff: cfg.backoff.resolve()?,
    };
    let solver = cfg.solver.resolve(cfg.seed)?;
    let sol = solve_fixed_point(&input, &solver).map_err(failure)?;
    bundle.tables = cell_tables(&sol, input.mac_phy.payload_size);

    if cfg.sim.slotted_slots > 0 {
        let p = &input.mac_phy;
        let (ts, tc) = frame_exchange_times(p);
        let run = simulate_slotted(
            &input.graph,
            &input.node_counts,
            &sol.beta,
            slots_for(ts, p.slot_time),
            slots_for(tc, p.slot_time),
            &SlottedParams {
                seed: cfg.seed,
                horizon_slots: cfg.sim.slotted_slots,
                slot_time: p.slot_time,
            },
        )
        .map_err(failure)?;
        let mut t = Table::new(
            "slotted_check",
            &[
                "cell",
                "gamma_analytic",
                "gamma_slotted",
                "throughput_analytic_pkts",
                "throughput_slotted_pkts",
                "tagged_attempts",
            ],
        );
        for i in 0..input.graph.len() {
            t.push(vec![
                (i + 1).into(),
                sol.gamma[i].into(),
                run.empirical_gamma[i].into(),
                sol.cell_throughput_pkts[i].into(),
                run.empirical_throughput_pkts[i].into(),
                run.attempts[i].into(),
            ]);
        }
        if run.exclusion_violations > 0 {
            bundle.warnings.push(format!(
                "slotted engine reported {} exclusion violations",
                run.exclusion_violations
            ));
        }
        bundle.tables.push(t);
    }
    Ok(bundle)
}

pub fn tcp_long(cfg: &AnalysisConfig) -> Result<ResultBundle, CliError> {
    cfg.require_mode("tcp-long", &[TrafficMode::TcpLong])?;
    let mut bundle = ResultBundle::new("tcp-long", cfg);
    let net = network(cfg, &mut bundle)?;
    let sizes = cfg.traffic.tcp_sizes()?;
    let sol = tcp_long_throughputs(
        &net.graph,
        &cfg.mac_phy.resolve()?,
        &cfg.backoff.resolve()?,
        sizes,
        &cfg.solver.resolve(cfg.seed)?,
    )
    .map_err(failure)?;
    let mut t = Table::new(
        "ap_throughput",
        &["cell", "beta", "gamma", "x", "ap_throughput_pkts", "ap_throughput_bps"],
    );
    let s = &sol.saturated;
    for i in 0..s.x.len() {
        t.push(vec![
            (i + 1).into(),
            s.beta[i].into(),
            s.gamma[i].into(),
            s.x[i].into(),
            sol.ap_throughput_pkts[i].into(),
            (sol.ap_throughput_pkts[i] * sizes.data).into(),
        ]);
    }
    let mut summary = Table::new("summary", &["quantity", "value"]);
    summary.push(vec!["single_cell_ap_pkts".into(), sol.single_cell_ap_pkts.into()]);
    summary.push(vec!["iterations".into(), s.iterations.into()]);
    summary.push(vec!["residual".into(), s.residual.into()]);
    bundle.tables = vec![t, summary];
    Ok(bundle)
}

pub fn tcp_short(cfg: &AnalysisConfig) -> Result<ResultBundle, CliError> {
    cfg.require_mode("tcp-short", &[TrafficMode::TcpShort])?;
    let mut bundle = ResultBundle::new("tcp-short", cfg);
    let net = network(cfg, &mut bundle)?;
    let n = net.graph.len();
    let nu = cfg.traffic.arrival_rates(n)?;
    let services = cfg.traffic.mean_service_s()?;
    let models = cfg.traffic.service_models();
    let mac_phy = cfg.mac_phy.resolve()?;
    let backoff = cfg.backoff.resolve()?;
    let theta = single_cell_ap_tcp_throughput(&mac_phy, &backoff, cfg.traffic.tcp_sizes()?)
        .map_err(failure)?
        * cfg.traffic.app_data_bits()?;
    let sim = cfg.sim.resolve(cfg.seed)?;
    let er = cfg.solver.effective_rate();

    let mut delays = Table::new(
        "delays",
        &[
            "cell",
            "source",
            "model",
            "nu_per_s",
            "mean_service_s",
            "mean_delay_s",
            "ci_halfwidth_s",
            "stable",
        ],
    );
    let mut rates = Table::new("effective_rates", &["mean_service_s", "cell", "xhat"]);
    let active: Vec<usize> = (0..n).filter(|&i| nu[i] > 0.0).collect();
    if !active.is_empty() {
        for &s in &services {
            let mut push_rows = |source: &str, model: &str, r: &cellwlan::flows::DelayResult| {
                for &i in &active {
                    delays.push(vec![
                        (i + 1).into(),
                        source.into(),
                        model.into(),
                        nu[i].into(),
                        s.into(),
                        r.mean_delay[i].into(),
                        r.confidence_halfwidth[i].into(),
                        r.stable[i].into(),
                    ]);
                }
            };
            let mut warn = Vec::new();
            for &m in &models {
                let fp = FlowParams {
                    arrival_rates: nu.clone(),
                    mean_flow_size: s * theta,
                    single_cell_rate: theta,
                    service_model: m,
                };
                let r = simulate_flow_network(&net.graph, &fp, &sim).map_err(failure)?;
                push_rows("simulation", m.name(), &r);
                for &i in &active {
                    if !r.stable[i] {
                        warn.push(format!(
                            "cell {} unstable in simulation ({}, E[V]/Theta = {s} s)",
                            i + 1,
                            m.name()
                        ));
                    }
                }
            }
            let fp = FlowParams {
                arrival_rates: nu.clone(),
                mean_flow_size: s * theta,
                single_cell_rate: theta,
                service_model: cellwlan::flows::ServiceModel::Model2,
            };
            let xhat = effective_rate_fixed_point(&net.graph, &fp, &er).map_err(failure)?;
            let r = mean_delay_analytic(&xhat, &fp);
            push_rows("analysis", "effective-rate", &r);
            for &i in &active {
                if !r.stable[i] {
                    warn.push(format!(
                        "cell {} unstable in the effective-rate analysis (E[V]/Theta = {s} s)",
                        i + 1
                    ));
                }
            }
            for (i, x) in xhat.iter().enumerate() {
                rates.push(vec![s.into(), (i + 1).into(), (*x).into()]);
            }
            bundle.warnings.extend(warn);
        }
    }
    let mut summary = Table::new("summary", &["quantity", "value"]);
    summary.push(vec!["theta_bps".into(), theta.into()]);
    bundle.tables = vec![delays, rates, summary];
    Ok(bundle)
}

pub fn infinite_rho(cfg: &AnalysisConfig) -> Result<ResultBundle, CliError> {
    let mut bundle = ResultBundle::new("infinite-rho", cfg);
    let net = network(cfg, &mut bundle)?;
    let lim = infinite_rho_x_capped(&net.graph, cfg.solver.state_cap).map_err(failure)?;
    let mut t = Table::new("mis", &["cell", "eta_i", "x"]);
    for (i, (e, x)) in lim.stats.eta_per_cell.iter().zip(&lim.x).enumerate() {
        t.push(vec![(i + 1).into(), (*e).into(), (*x).into()]);
    }
    let mut summary = Table::new("summary", &["quantity", "value"]);
    summary.push(vec!["alpha".into(), lim.stats.alpha.into()]);
    summary.push(vec!["eta".into(), lim.stats.eta.into()]);
    summary.push(vec![
        "normalized_network_throughput".into(),
        lim.normalized_network_throughput.into(),
    ]);
    bundle.tables = vec![t, summary];
    Ok(bundle)
}

pub fn sweep(cfg: &AnalysisConfig) -> Result<ResultBundle, CliError> {
    cfg.require_mode("sweep", &[TrafficMode::Saturated, TrafficMode::TcpLong])?;
    let payloads = cfg
        .sweep
        .as_ref()
        .map(|s| s.payload_bytes.clone())
        .filter(|p| !p.is_empty())
        .ok_or_else(|| CliError::Validation("sweep.payload_bytes is required for `sweep`".into()))?;
    let mut bundle = ResultBundle::new("sweep", cfg);
    let net = network(cfg, &mut bundle)?;
    let n = net.graph.len();
    let (node_counts, mac_payloads) = match cfg.traffic.mode {
        // the swept value is the TCP data segment; frames carry the mean of
        // DATA and ACK sizes
        TrafficMode::TcpLong => {
            let ack = cfg.traffic.tcp_sizes()?.ack / 8.0;
            (vec![2; n], payloads.iter().map(|p| 0.5 * (p + ack)).collect())
        }
        _ => (cfg.traffic.node_counts(&net)?, payloads.clone()),
    };
    let input = MulticellInput {
        graph: net.graph,
        node_counts,
        mac_phy: cfg.mac_phy.resolve()?,
        backoff: cfg.backoff.resolve()?,
    };
    let points = payload_sweep(&input, &mac_payloads, &cfg.solver.resolve(cfg.seed)?)
        .map_err(failure)?;
    let mut t = Table::new(
        "sweep",
        &["payload_bytes", "cell", "rho", "x", "beta", "gamma", "error"],
    );
    for (payload, pt) in payloads.iter().zip(points) {
        match pt.outcome {
            Ok(sol) => {
                for i in 0..n {
                    t.push(vec![
                        (*payload).into(),
                        (i + 1).into(),
                        sol.rho[i].into(),
                        sol.x[i].into(),
                        sol.beta[i].into(),
                        sol.gamma[i].into(),
                        Value::Empty,
                    ]);
                }
            }
            Err(e) => {
                bundle
                    .warnings
                    .push(format!("payload {payload} bytes failed: {e}"));
                for i in 0..n {
                    t.push(vec![
                        (*payload).into(),
                        (i + 1).into(),
                        Value::Empty,
                        Value::Empty,
                        Value::Empty,
                        Value::Empty,
                        e.to_string().into(),
                    ]);
                }
            }
        }
    }
    bundle.tables = vec![t];
    Ok(bundle)
}

/// Returns the bundle and whether every pair passed the check.
pub fn validate(cfg: &AnalysisConfig) -> Result<(ResultBundle, bool), CliError> {
    let mut bundle = ResultBundle::new("validate", cfg);
    let net = network(cfg, &mut bundle)?;
    let mut graph = Table::new("graph", &["cell", "neighbors"]);
    for i in 0..net.graph.len() {
        let nb: Vec<String> = net.graph.neighbors(i).iter().map(|j| (j + 1).to_string()).collect();
        graph.push(vec![(i + 1).into(), nb.join(" ").into()]);
    }
    let mut ok = true;
    let mut tables = Vec::new();
    if let Some(dep) = &net.deployment {
        let report = check_pbd(dep);
        ok = report.passes();
        let mut pbd = Table::new("pbd", &["cell_a", "cell_b", "ap_distance_m", "relation"]);
        for p in &report.pairs {
            pbd.push(vec![
                dep.cells[p.a].id.into(),
                dep.cells[p.b].id.into(),
                p.ap_distance.into(),
                match p.relation {
                    PairRelation::Independent => "independent",
                    PairRelation::CompletelyDependent => "completely-dependent",
                    PairRelation::Violation => "violation",
                }
                .into(),
            ]);
        }
        tables.push(pbd);
    }
    tables.push(graph);
    bundle.tables = tables;
    Ok((bundle, ok))
}
