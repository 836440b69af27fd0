//! Cluster-scale downlink simulation: wraparound layout, UE drops, fault
//! injection, measurement windows, the optimization schedule and KPIs.

mod kpi;
mod layout;
mod measure;
mod network;
mod run;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::{ArrayConfig, ArrayError};
use crate::engine::{EngineError, Thresholds};
use crate::geometry::{GeometryError, RsrpAveraging};
use crate::radio::{PathlossModel, RadioError, SectorAntenna};

pub use kpi::{kpi, HeatGrid, KpiReport};
pub use layout::{Layout, SECTOR_BORESIGHTS_DEG};
pub use measure::{measure_round, simulate_window, CellMeasurements, RoundMeasurements};
pub use network::{drop_network, Network, Ue};
pub use run::{run_rounds, ActionRecord, RunResult};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("fault targets cell {cell}, but the network has {cells} cells")]
    FaultTarget { cell: usize, cells: usize },
    #[error("invalid fault on cell {cell}: {reason}")]
    FaultParameter { cell: usize, reason: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Array(#[from] ArrayError),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Three sectors per site.
    pub cells: usize,
    pub ues_per_cell: usize,
    pub isd_m: f64,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
    pub mech_tilt_deg: f64,
    /// Electrical tilt. Derived from `sub_area_depth_m` when absent.
    pub vertical_tilt_deg: Option<f64>,
    /// Planned sub-area depth `d`; fixes the planned range at `n_d·d`.
    pub sub_area_depth_m: f64,
    pub tilt_min_deg: f64,
    pub tilt_max_deg: f64,
    pub ue_elements: usize,
    pub ue_speed_mps: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            cells: 21,
            ues_per_cell: 10,
            isd_m: 1732.0,
            bs_height_m: 30.0,
            ue_height_m: 1.5,
            mech_tilt_deg: 0.0,
            vertical_tilt_deg: None,
            sub_area_depth_m: 210.0,
            tilt_min_deg: 0.0,
            tilt_max_deg: 20.0,
            ue_elements: 2,
            ue_speed_mps: 0.83,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioConfig {
    pub p_rs_dbm: f64,
    pub p_rs_min_dbm: f64,
    pub p_rs_max_dbm: f64,
    pub pci_reuse: u32,
    /// Log-normal shadowing standard deviation.
    pub shadowing_db: f64,
    /// Noise power over one RS resource element.
    pub noise_dbm: f64,
    pub ue_gain_db: f64,
    /// Adds the empirical height/range gain wherever it is defined.
    pub empirical_gain: bool,
    pub antenna: SectorAntenna,
    pub pathloss: PathlossModel,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            p_rs_dbm: 15.0,
            p_rs_min_dbm: 0.0,
            p_rs_max_dbm: 18.0,
            pci_reuse: 3,
            shadowing_db: 8.0,
            // -174 dBm/Hz over 15 kHz plus a 7 dB noise figure.
            noise_dbm: -125.2,
            ue_gain_db: 0.0,
            empirical_gain: false,
            antenna: SectorAntenna::default(),
            pathloss: PathlossModel::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AodMappingKind {
    Identity,
    Phi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasurementConfig {
    pub snapshots: usize,
    pub snapshot_interval_s: f64,
    pub ul_snr_db: f64,
    pub subpaths: usize,
    /// Standard deviation of sub-path departures around the direct path.
    pub angular_spread_deg: f64,
    pub grid_step_deg: f64,
    pub aod_mapping: AodMappingKind,
    /// Phase resolution of the downlink signatures used to fit `Φ`.
    pub phi_phase_bits: Option<u32>,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self {
            snapshots: 64,
            snapshot_interval_s: 1e-3,
            ul_snr_db: 20.0,
            subpaths: 20,
            angular_spread_deg: 1.0,
            grid_step_deg: 0.5,
            aod_mapping: AodMappingKind::Phi,
            phi_phase_bits: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoverageConfig {
    /// Angle splits per distance ring; its length is `n_d`.
    pub angle_splits: Vec<u32>,
    pub averaging: RsrpAveraging,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            angle_splits: vec![2, 4, 8, 8],
            averaging: RsrpAveraging::Dbm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub t_mr_minutes: f64,
    /// Length of one optimization round.
    pub t_eopt_days: f64,
    /// Base evaluation period, in rounds.
    pub t_eopt_rounds: u32,
    /// Reporting windows sampled per round, each with a fresh UE drop.
    pub windows_per_round: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            t_mr_minutes: 15.0,
            t_eopt_days: 2.0,
            t_eopt_rounds: 1,
            windows_per_round: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficConfig {
    /// Mean of the per-UE, per-window log-normal volume.
    pub mean_gb_per_ue: f64,
    /// Standard deviation of the underlying normal.
    pub log_sigma: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            mean_gb_per_ue: 3.0,
            log_sigma: 1.0,
        }
    }
}

impl TrafficConfig {
    pub fn log_mu(&self) -> f64 {
        self.mean_gb_per_ue.ln() - self.log_sigma * self.log_sigma / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KpiConfig {
    pub grid_step_m: f64,
    pub hole_threshold_dbm: f64,
    pub rrc_failure_sinr_db: f64,
    pub throughput_cap: f64,
}

impl Default for KpiConfig {
    fn default() -> Self {
        Self {
            grid_step_m: 25.0,
            hole_threshold_dbm: -110.0,
            rrc_failure_sinr_db: -6.0,
            throughput_cap: 6.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub network: NetworkConfig,
    pub radio: RadioConfig,
    pub array: ArrayConfig,
    pub measurement: MeasurementConfig,
    pub coverage: CoverageConfig,
    pub thresholds: Thresholds,
    pub schedule: ScheduleConfig,
    pub traffic: TrafficConfig,
    pub kpi: KpiConfig,
}

impl SimulationConfig {
    pub fn site_count(&self) -> usize {
        self.network.cells / 3
    }

    pub fn ring_count(&self) -> usize {
        self.coverage.angle_splits.len()
    }

    /// Electrical tilt in effect for an unfaulted cell.
    pub fn vertical_tilt_deg(&self) -> f64 {
        let n = &self.network;
        n.vertical_tilt_deg.unwrap_or_else(|| {
            let range = self.ring_count() as f64 * n.sub_area_depth_m;
            ((n.bs_height_m - n.ue_height_m) / range).atan().to_degrees() - n.mech_tilt_deg
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::Config(msg));
        let n = &self.network;
        if n.cells == 0 || !n.cells.is_multiple_of(3) {
            return fail(format!("cell count must be a positive multiple of 3, got {}", n.cells));
        }
        if !matches!(self.site_count(), 1 | 7 | 19) {
            return fail(format!("cell count must be 3, 21 or 57, got {}", n.cells));
        }
        if !(n.isd_m > 0.0) {
            return fail("inter-site distance must be positive".into());
        }
        if !(n.ue_height_m > 0.0 && n.bs_height_m > n.ue_height_m) {
            return fail("heights must satisfy H_BS > h_MS > 0".into());
        }
        if !(n.sub_area_depth_m > 0.0) {
            return fail("sub-area depth must be positive".into());
        }
        let planned = n.mech_tilt_deg + self.vertical_tilt_deg();
        if !(planned > 0.0 && planned < 90.0) {
            return fail(format!("planned tilt {planned}° must lie in (0, 90)"));
        }
        if !(n.tilt_min_deg <= planned && planned <= n.tilt_max_deg) {
            return fail(format!(
                "planned tilt {planned}° outside [{}, {}]",
                n.tilt_min_deg, n.tilt_max_deg
            ));
        }
        if n.ue_elements == 0 || !(n.ue_speed_mps >= 0.0) {
            return fail("UE array needs an element and a non-negative speed".into());
        }
        let r = &self.radio;
        if !(r.p_rs_min_dbm <= r.p_rs_dbm && r.p_rs_dbm <= r.p_rs_max_dbm) {
            return fail(format!(
                "P_RS {} dBm outside [{}, {}]",
                r.p_rs_dbm, r.p_rs_min_dbm, r.p_rs_max_dbm
            ));
        }
        if !(r.shadowing_db >= 0.0) || !r.noise_dbm.is_finite() {
            return fail("shadowing must be non-negative and noise finite".into());
        }
        self.array.validate()?;
        let m = &self.measurement;
        if m.snapshots == 0 || m.subpaths == 0 {
            return fail("measurement needs at least one snapshot and one sub-path".into());
        }
        if !(m.grid_step_deg > 0.0) || !(m.angular_spread_deg >= 0.0) || !(m.snapshot_interval_s > 0.0) {
            return fail("measurement steps must be positive".into());
        }
        if self.coverage.angle_splits.is_empty() {
            return fail("at least one distance ring is required".into());
        }
        self.thresholds.validate()?;
        let s = &self.schedule;
        if s.windows_per_round == 0 || !(s.t_mr_minutes > 0.0) || !(s.t_eopt_days > 0.0) {
            return fail("schedule periods must be positive".into());
        }
        if !(1..=8).contains(&s.t_eopt_rounds) {
            return fail(format!("t_eOPT must lie in [1, 8] rounds, got {}", s.t_eopt_rounds));
        }
        if !(self.traffic.mean_gb_per_ue > 0.0 && self.traffic.log_sigma >= 0.0) {
            return fail("traffic mean must be positive and sigma non-negative".into());
        }
        if !(self.kpi.grid_step_m > 0.0 && self.kpi.throughput_cap > 0.0) {
            return fail("KPI grid step and throughput cap must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// Tilt pulled to its minimum.
    OvershootTilt,
    /// Tilt pushed to `tilt_deg`, or to its maximum.
    LimitedTilt,
    /// RS power at its minimum.
    PowerHole,
    /// Beam rotated by `offset_deg`.
    Rotated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    pub cell: usize,
    pub kind: FaultKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_deg: Option<f64>,
}

pub type FaultSpec = Vec<Fault>;

/// Independent random stream for one simulated entity. Streams depend only
/// on the seed and the entity's coordinates, never on evaluation order.
pub fn entity_rng(seed: u64, tag: u64, coords: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix64(seed ^ splitmix64(tag));
    for &c in coords {
        h = splitmix64(h ^ c.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    ChaCha8Rng::seed_from_u64(h)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub(crate) mod tags {
    pub const DROP: u64 = 1;
    pub const UE: u64 = 2;
}
