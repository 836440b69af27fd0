use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use super::network::Network;
use super::{entity_rng, tags, SimError};
use crate::array::{capon_estimate, CaponOptions, SnapshotSet, SpatialSpectrum};
use crate::engine::CellWindowStats;
use crate::geometry::{wrap_deg, AggregatedMap, CoverageMap, MeasurementReport, SECTOR_HALF_WIDTH_DEG};
use crate::radio::{measure_ta, rs_c_init, rs_waveform, rsrp_dbm, spatial_channel, ChannelParams, GoldSequence, SubPath, SPEED_OF_LIGHT};

/// What one cell collected over a window or a round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellMeasurements {
    pub reports: Vec<MeasurementReport>,
    pub traffic_gb: f64,
    pub users: u32,
    /// Capon spectrum of the first report of the round.
    pub spectrum: Option<SpatialSpectrum>,
}

impl CellMeasurements {
    fn merge(&mut self, other: CellMeasurements) {
        self.reports.extend(other.reports);
        self.traffic_gb += other.traffic_gb;
        self.users += other.users;
        if self.spectrum.is_none() {
            self.spectrum = other.spectrum;
        }
    }
}

/// Per-cell inputs to one optimization round.
#[derive(Debug, Clone)]
pub struct RoundMeasurements {
    pub cells: Vec<CellMeasurements>,
    pub stats: Vec<CellWindowStats>,
    pub maps: Vec<AggregatedMap>,
}

fn normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).map(|d| d.sample(rng)).unwrap_or(0.0)
    } else {
        0.0
    }
}

/// Uplink snapshots from a UE seen `theta_deg` off the array broadside.
pub(crate) fn uplink_snapshots(net: &Network, theta_deg: f64, pci: u32, rng: &mut ChaCha8Rng) -> Result<SnapshotSet, SimError> {
    let m = &net.config.measurement;
    let arr = &net.config.array;
    let k = 2.0 * PI * arr.f_ul_hz / SPEED_OF_LIGHT;
    let subpaths = (0..m.subpaths)
        .map(|_| SubPath {
            aod_deg: theta_deg + normal(rng, m.angular_spread_deg),
            aoa_deg: rng.random_range(-180.0..180.0),
            phase_rad: rng.random_range(0.0..2.0 * PI),
            bs_gain: 1.0,
            ue_gain: 1.0,
        })
        .collect();
    let params = ChannelParams {
        path_power: 1.0,
        shadow_gain: 1.0,
        subpaths,
        ue_speed_mps: net.config.network.ue_speed_mps,
        ue_direction_deg: rng.random_range(0.0..360.0),
        wavenumber: k,
        // Elements sit at negative positions so the channel phase matches the
        // steering-vector convention.
        bs_element_spacing_m: -arr.spacing_m(),
        ue_element_spacing_m: PI / k,
    };
    params.validate()?;

    let bits = GoldSequence::new(rs_c_init(0, 0, pci, true)).take_bits(2 * m.snapshots);
    let symbols = rs_waveform(&bits, m.snapshots)?;
    let noise_sd = (10f64.powf(-m.ul_snr_db / 10.0) / 2.0).sqrt();
    let noise = Normal::new(0.0, noise_sd).map_err(|e| SimError::Config(e.to_string()))?;
    let data = DMatrix::from_fn(arr.elements, m.snapshots, |s, n| {
        let t = n as f64 * m.snapshot_interval_s;
        let h = spatial_channel(&params, t, 0, s);
        h * symbols[n] + Complex64::new(noise.sample(rng), noise.sample(rng))
    });
    Ok(SnapshotSet::new(data)?)
}

/// Measures every UE of the current drop against every cell and returns the
/// reports grouped by serving cell.
pub fn simulate_window(net: &Network, round: u64, window: u64) -> Result<Vec<CellMeasurements>, SimError> {
    let cfg = &net.config;
    let n_cells = net.cells.len();
    let mut out = vec![CellMeasurements::default(); n_cells];
    let traffic = LogNormal::new(cfg.traffic.log_mu(), cfg.traffic.log_sigma)
        .map_err(|e| SimError::Config(format!("traffic distribution: {e}")))?;
    let capon = CaponOptions {
        grid_step_deg: cfg.measurement.grid_step_deg,
        ..CaponOptions::default()
    };
    let timestamp = (round.saturating_sub(1) as f64 * cfg.schedule.t_eopt_days * 86_400.0)
        + window as f64 * cfg.schedule.t_mr_minutes * 60.0;

    for ue in &net.ues {
        let mut rng = entity_rng(cfg.network.seed, tags::UE, &[round, window, ue.id as u64]);
        let mut best: Option<(usize, f64)> = None;
        for cell in 0..n_cells {
            let shadow = normal(&mut rng, cfg.radio.shadowing_db);
            let geo = net.link_geometry(cell, ue.position);
            let rsrp = rsrp_dbm(net.cells[cell].p_rs_dbm, &net.link(cell, geo, shadow));
            if best.is_none_or(|(_, b)| rsrp > b) {
                best = Some((cell, rsrp));
            }
        }
        let Some((serving, rsrp)) = best else { continue };
        let volume = traffic.sample(&mut rng);

        let st = &net.cells[serving];
        let geo = net.link_geometry(serving, ue.position);
        let theta = wrap_deg(geo.azimuth_deg - st.geometry.boresight_deg);
        let snaps = uplink_snapshots(net, theta, net.pci[serving], &mut rng)?;
        let spectrum = capon_estimate(&snaps, &cfg.array, &capon)?;
        let aoa = spectrum.peak_deg;
        let aod = net
            .aod_mapping
            .aod_deg(aoa, &cfg.array, cfg.measurement.grid_step_deg)?
            .clamp(-SECTOR_HALF_WIDTH_DEG, SECTOR_HALF_WIDTH_DEG);
        let ta = measure_ta(geo.distance_m);

        let cell = &mut out[serving];
        cell.reports.push(MeasurementReport {
            ue_id: ue.id,
            cell_id: serving,
            rsrp_dbm: rsrp,
            ta_samples: ta.samples,
            range_m: ta.range_m,
            azimuth_deg: (st.geometry.boresight_deg + aod).rem_euclid(360.0),
            timestamp_s: timestamp,
        });
        cell.traffic_gb += volume;
        cell.users += 1;
        if cell.spectrum.is_none() {
            cell.spectrum = Some(spectrum);
        }
    }
    Ok(out)
}

/// Runs every reporting window of `round` (fresh drop each), then builds
/// per-cell statistics and coverage maps.
pub fn measure_round(net: &mut Network, round: u64) -> Result<RoundMeasurements, SimError> {
    let n_cells = net.cells.len();
    let mut cells = vec![CellMeasurements::default(); n_cells];
    for window in 0..net.config.schedule.windows_per_round as u64 {
        net.drop_ues(round, window);
        for (acc, m) in cells.iter_mut().zip(simulate_window(net, round, window)?) {
            acc.merge(m);
        }
    }

    let mut stats = Vec::with_capacity(n_cells);
    let mut maps = Vec::with_capacity(n_cells);
    for (id, m) in cells.iter().enumerate() {
        let st = &net.cells[id];
        let mut map = CoverageMap::with_rings(id, net.rings.clone()).with_averaging(net.config.coverage.averaging);
        for r in &m.reports {
            map.project(&st.geometry, r)?;
        }
        maps.push(map.window_average());
        stats.push(CellWindowStats::from_reports(
            &m.reports,
            st,
            &net.config.thresholds,
            m.traffic_gb,
            m.users,
        ));
    }
    Ok(RoundMeasurements { cells, stats, maps })
}
