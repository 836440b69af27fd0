//! Per-cell coverage decision logic: gating, overshoot/limited
//! classification, tilt/power/rotation selection and the progressive
//! sliding window.

mod decide;
mod schedule;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::RotationDirection;
use crate::geometry::{wrap_deg, CellGeometry, MeasurementReport};

pub use decide::{
    angular_action, apply, classify, gate, limited_action, overshoot_action, progressive_filter, run_cell_round,
    tilt_correction, RoundOutcome,
};
pub use schedule::EvalTimer;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("d' must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("invalid cell state: {0}")]
    InvalidState(String),
}

/// Detection thresholds and step sizes shared by all cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub tau_rsrp_dbm: f64,
    pub tau_traffic_gb: f64,
    pub tau_user: u32,
    /// Overshoot factor `∂`.
    pub partial_d: f64,
    /// Limited-coverage factor `ε`.
    pub epsilon_cov: f64,
    /// RS power step `Δ`, dB.
    pub delta_p_db: f64,
    /// Percentile of the measured range used by the limited-coverage tree.
    pub gamma_pct: f64,
    /// Sub-areas with a mean RSRP below this are faulty.
    pub x_rsrp_dbm: f64,
    pub epsilon_rot_deg: f64,
    /// Share of MRs that must reach the gate RSRP.
    pub coverage_probe_pct: f64,
    /// Share of faulty MRs on one side of `R_exp/2` that makes the
    /// percentile test decisive.
    pub majority_fraction: f64,
    /// Share of AoD mass in one half that triggers a rotation.
    pub rotation_majority: f64,
    /// Sliding window size `W`.
    pub window: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            tau_rsrp_dbm: -80.0,
            tau_traffic_gb: 25.0,
            tau_user: 9,
            partial_d: 2.1,
            epsilon_cov: 0.4,
            delta_p_db: 1.0,
            gamma_pct: 50.0,
            x_rsrp_dbm: -85.0,
            epsilon_rot_deg: 15.0,
            coverage_probe_pct: 75.0,
            majority_fraction: 0.6,
            rotation_majority: 0.8,
            window: 3,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), EngineError> {
        let fail = |msg: &str| Err(EngineError::InvalidThresholds(msg.to_string()));
        if !(self.partial_d > 1.0) {
            return fail("∂ must exceed 1");
        }
        if !(self.epsilon_cov > 0.0 && self.epsilon_cov < 1.0) {
            return fail("ε must lie in (0, 1)");
        }
        if !(self.partial_d >= 2.0 * self.epsilon_cov) {
            return fail("∂ must be at least 2ε");
        }
        if !(self.delta_p_db > 0.0) {
            return fail("Δ must be positive");
        }
        if !(self.gamma_pct > 0.0 && self.gamma_pct < 100.0) {
            return fail("γ must lie in (0, 100)");
        }
        if !(self.coverage_probe_pct > 0.0 && self.coverage_probe_pct < 100.0) {
            return fail("coverage probe percentile must lie in (0, 100)");
        }
        if !(self.majority_fraction > 0.5 && self.majority_fraction <= 1.0) {
            return fail("majority fraction must lie in (0.5, 1]");
        }
        if !(self.rotation_majority > 0.5 && self.rotation_majority <= 1.0) {
            return fail("rotation majority must lie in (0.5, 1]");
        }
        if !(self.epsilon_rot_deg > 0.0 && self.epsilon_rot_deg <= 60.0) {
            return fail("rotation step must lie in (0, 60]");
        }
        if self.window == 0 {
            return fail("window size must be at least 1");
        }
        if !(self.tau_traffic_gb >= 0.0) || !self.tau_rsrp_dbm.is_finite() || !self.x_rsrp_dbm.is_finite() {
            return fail("gate thresholds must be finite and non-negative where applicable");
        }
        Ok(())
    }
}

/// Largest beam rotation either side of the boresight.
pub const MAX_ROTATION_DEG: f64 = 60.0;

/// A cell's controllable radio state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub cell_id: usize,
    /// Total downtilt; moves in whole degrees.
    pub tilt_deg: f64,
    pub tilt_min_deg: f64,
    pub tilt_max_deg: f64,
    pub p_rs_dbm: f64,
    pub p_rs_min_dbm: f64,
    pub p_rs_max_dbm: f64,
    /// Signed beam rotation off the sector boresight.
    pub rotation_deg: f64,
    pub geometry: CellGeometry,
    /// Planned range, fixed for the life of the cell.
    pub r_exp_m: f64,
}

impl CellState {
    pub fn validate(&self) -> Result<(), EngineError> {
        let fail = |msg: String| Err(EngineError::InvalidState(msg));
        if !(self.tilt_min_deg <= self.tilt_deg && self.tilt_deg <= self.tilt_max_deg) {
            return fail(format!(
                "tilt {} outside [{}, {}]",
                self.tilt_deg, self.tilt_min_deg, self.tilt_max_deg
            ));
        }
        if !(self.p_rs_min_dbm <= self.p_rs_dbm && self.p_rs_dbm <= self.p_rs_max_dbm) {
            return fail(format!(
                "P_RS {} outside [{}, {}]",
                self.p_rs_dbm, self.p_rs_min_dbm, self.p_rs_max_dbm
            ));
        }
        if !(self.rotation_deg.abs() <= MAX_ROTATION_DEG) {
            return fail(format!("rotation {} exceeds ±{MAX_ROTATION_DEG}", self.rotation_deg));
        }
        if !(self.r_exp_m > 0.0) {
            return fail(format!("R_exp {} must be positive", self.r_exp_m));
        }
        Ok(())
    }

    /// Current beam direction as an absolute azimuth.
    pub fn beam_azimuth_deg(&self) -> f64 {
        (self.geometry.boresight_deg + self.rotation_deg).rem_euclid(360.0)
    }

    pub fn can_down_tilt(&self) -> bool {
        self.tilt_deg < self.tilt_max_deg
    }

    pub fn can_up_tilt(&self) -> bool {
        self.tilt_deg > self.tilt_min_deg
    }

    pub fn can_power_down(&self) -> bool {
        self.p_rs_dbm > self.p_rs_min_dbm
    }

    pub fn can_power_up(&self) -> bool {
        self.p_rs_dbm < self.p_rs_max_dbm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateReason {
    CoverageAdequate,
    Traffic,
    Users,
    /// No measurement reports reached the cell this window.
    NoReports,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "result", content = "reason", rename_all = "snake_case")]
pub enum Gate {
    Proceed,
    Gated(GateReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Overshoot,
    Limited,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoOpReason {
    Gated,
    /// Neither tilt nor power can move in the required direction.
    Exhausted,
    NoData,
    /// Normal coverage without an angular majority.
    Balanced,
    /// The cell was not due for evaluation this round.
    Deferred,
}

/// Tilt moves toward larger (down) or smaller (up) angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiltDirection {
    Down,
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionKind {
    DownTilt { deg: u32 },
    UpTilt { deg: u32 },
    PowerDown { db: f64 },
    PowerUp { db: f64 },
    RotateBeam { deg: f64, direction: RotationDirection },
    NoOp { reason: NoOpReason },
}

impl ActionKind {
    pub fn tilt_direction(&self) -> Option<TiltDirection> {
        match self {
            ActionKind::DownTilt { .. } => Some(TiltDirection::Down),
            ActionKind::UpTilt { .. } => Some(TiltDirection::Up),
            _ => None,
        }
    }

    pub fn is_noop(&self) -> bool {
        matches!(self, ActionKind::NoOp { .. })
    }

    /// Unsigned size of the step; zero for `NoOp`.
    pub fn magnitude(&self) -> f64 {
        match *self {
            ActionKind::DownTilt { deg } | ActionKind::UpTilt { deg } => f64::from(deg),
            ActionKind::PowerDown { db } | ActionKind::PowerUp { db } => db,
            ActionKind::RotateBeam { deg, .. } => deg,
            ActionKind::NoOp { .. } => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    Overshoot,
    LimitedMajority,
    LimitedOuter,
    LimitedInner,
    AngularSkew,
    Gated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    pub cause: Option<Cause>,
    pub window_id: u64,
}

impl Action {
    pub fn new(kind: ActionKind, cause: Option<Cause>, window_id: u64) -> Self {
        Self { kind, cause, window_id }
    }

    pub fn noop(reason: NoOpReason, cause: Option<Cause>, window_id: u64) -> Self {
        Self::new(ActionKind::NoOp { reason }, cause, window_id)
    }
}

/// The last `W − 1` applied actions of one cell, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionWindow {
    size: usize,
    history: VecDeque<Action>,
}

impl ActionWindow {
    pub fn new(size: usize) -> Self {
        Self {
            size: size.max(1),
            history: VecDeque::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn push(&mut self, applied: Action) {
        let capacity = self.size - 1;
        if capacity == 0 {
            return;
        }
        if self.history.len() == capacity {
            self.history.pop_front();
        }
        self.history.push_back(applied);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Action> {
        self.history.iter()
    }

    /// Direction shared by the two most recent actions when both are tilts.
    pub fn tilt_streak(&self) -> Option<TiltDirection> {
        let n = self.history.len();
        if n < 2 {
            return None;
        }
        let a = self.history[n - 2].kind.tilt_direction()?;
        let b = self.history[n - 1].kind.tilt_direction()?;
        (a == b).then_some(a)
    }
}

/// Linear-interpolated percentile of `values`, `pct` in [0, 100].
pub fn percentile(values: &[f64], pct: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = (pct / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Statistics gathered from one completed reporting window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellWindowStats {
    pub mr_count: usize,
    /// Mean TA-reported range over all MRs.
    pub r_md_avg_m: Option<f64>,
    /// γ-percentile range over faulty MRs, or over all MRs when none is faulty.
    pub r_md_gamma_m: Option<f64>,
    /// Share of the same MR population closer than `R_exp/2`.
    pub near_fraction: Option<f64>,
    /// RSRP reached by the coverage-probe share of MRs.
    pub rsrp_probe_dbm: Option<f64>,
    pub traffic_gb: f64,
    pub n_user: u32,
    /// AoD counts left (`[0]`, negative offsets) and right (`[1]`) of the beam.
    pub aod_halves: [u64; 2],
}

impl CellWindowStats {
    pub fn from_reports(
        reports: &[MeasurementReport],
        state: &CellState,
        th: &Thresholds,
        traffic_gb: f64,
        n_user: u32,
    ) -> Self {
        let ranges: Vec<f64> = reports.iter().map(|r| r.range_m).collect();
        let rsrp: Vec<f64> = reports.iter().map(|r| r.rsrp_dbm).collect();
        let faulty: Vec<f64> = reports
            .iter()
            .filter(|r| r.rsrp_dbm < th.x_rsrp_dbm)
            .map(|r| r.range_m)
            .collect();
        let population = if faulty.is_empty() { &ranges } else { &faulty };
        let half = state.r_exp_m / 2.0;
        let near_fraction = (!population.is_empty())
            .then(|| population.iter().filter(|&&r| r < half).count() as f64 / population.len() as f64);

        let beam = state.beam_azimuth_deg();
        let mut aod_halves = [0u64; 2];
        for r in reports {
            let side = usize::from(wrap_deg(r.azimuth_deg - beam) >= 0.0);
            aod_halves[side] += 1;
        }

        Self {
            mr_count: reports.len(),
            r_md_avg_m: (!ranges.is_empty()).then(|| ranges.iter().sum::<f64>() / ranges.len() as f64),
            r_md_gamma_m: percentile(population, th.gamma_pct),
            near_fraction,
            rsrp_probe_dbm: percentile(&rsrp, 100.0 - th.coverage_probe_pct),
            traffic_gb,
            n_user,
            aod_halves,
        }
    }
}
