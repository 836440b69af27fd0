use serde::{Deserialize, Serialize};

use super::kpi::{kpi, HeatGrid, KpiReport};
use super::measure::measure_round;
use super::network::Network;
use super::SimError;
use crate::engine::{
    classify, gate, run_cell_round, Action, ActionWindow, Classification, EvalTimer, Gate, NoOpReason,
};
use crate::array::SpatialSpectrum;
use crate::geometry::AggregatedMap;

/// One line of the action log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub round: u64,
    pub cell_id: usize,
    /// False when the cell was not due this round; no action is taken then.
    pub evaluated: bool,
    pub gate_result: Gate,
    pub classification: Classification,
    pub proposed_action: Action,
    pub applied_action: Action,
    pub tilt_deg: f64,
    pub p_rs_dbm: f64,
    pub rotation_deg: f64,
    pub clamped: bool,
    pub mr_count: usize,
    pub r_md_avg_m: Option<f64>,
    pub rsrp_probe_dbm: Option<f64>,
    pub traffic_gb: f64,
    pub n_user: u32,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub network: Network,
    /// Baseline first, then one report per round.
    pub kpis: Vec<KpiReport>,
    pub grids: Vec<HeatGrid>,
    /// Ordered by (round, cell id).
    pub log: Vec<ActionRecord>,
    /// Per round, one map per cell.
    pub maps: Vec<Vec<AggregatedMap>>,
    /// Per round, the first Capon spectrum each cell computed.
    pub spectra: Vec<Vec<Option<SpatialSpectrum>>>,
}

/// Alternates measurement rounds with per-cell optimization.
pub fn run_rounds(mut net: Network, rounds: u64) -> Result<RunResult, SimError> {
    if rounds == 0 {
        return Err(SimError::Config("at least one round is required".into()));
    }
    let th = net.config.thresholds.clone();
    let n_cells = net.cells.len();
    let mut windows = vec![ActionWindow::new(th.window); n_cells];
    let mut timers = vec![EvalTimer::new(net.config.schedule.t_eopt_rounds); n_cells];

    let (baseline, grid) = kpi(&net, 0);
    let mut kpis = vec![baseline];
    let mut grids = vec![grid];
    let mut log = Vec::new();
    let mut maps = Vec::new();
    let mut spectra = Vec::new();

    for round in 1..=rounds {
        net.round = round;
        let measured = measure_round(&mut net, round)?;
        let mut next = net.cells.clone();
        for cell in 0..n_cells {
            let state = &net.cells[cell];
            let stats = &measured.stats[cell];
            let record = if timers[cell].is_due(round) {
                let out = run_cell_round(state, &mut windows[cell], stats, &measured.maps[cell], &th, round);
                timers[cell].record(round, matches!(out.gate, Gate::Gated(_)));
                let rec = ActionRecord {
                    round,
                    cell_id: cell,
                    evaluated: true,
                    gate_result: out.gate,
                    classification: out.classification,
                    proposed_action: out.proposed,
                    applied_action: out.applied,
                    tilt_deg: out.state.tilt_deg,
                    p_rs_dbm: out.state.p_rs_dbm,
                    rotation_deg: out.state.rotation_deg,
                    clamped: out.clamped,
                    mr_count: stats.mr_count,
                    r_md_avg_m: stats.r_md_avg_m,
                    rsrp_probe_dbm: stats.rsrp_probe_dbm,
                    traffic_gb: stats.traffic_gb,
                    n_user: stats.n_user,
                };
                next[cell] = out.state;
                rec
            } else {
                let noop = Action::noop(NoOpReason::Deferred, None, round);
                ActionRecord {
                    round,
                    cell_id: cell,
                    evaluated: false,
                    gate_result: gate(stats, &th),
                    classification: classify(stats, state.r_exp_m, &th),
                    proposed_action: noop,
                    applied_action: noop,
                    tilt_deg: state.tilt_deg,
                    p_rs_dbm: state.p_rs_dbm,
                    rotation_deg: state.rotation_deg,
                    clamped: false,
                    mr_count: stats.mr_count,
                    r_md_avg_m: stats.r_md_avg_m,
                    rsrp_probe_dbm: stats.rsrp_probe_dbm,
                    traffic_gb: stats.traffic_gb,
                    n_user: stats.n_user,
                }
            };
            log.push(record);
        }
        net.cells = next;
        spectra.push(measured.cells.into_iter().map(|c| c.spectrum).collect());
        maps.push(measured.maps);
        let (report, grid) = kpi(&net, round);
        kpis.push(report);
        grids.push(grid);
    }
    Ok(RunResult {
        network: net,
        kpis,
        grids,
        log,
        maps,
        spectra,
    })
}
