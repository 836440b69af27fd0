use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layout::{Layout, SECTOR_BORESIGHTS_DEG};
use super::{entity_rng, tags, AodMappingKind, FaultKind, FaultSpec, SimError, SimulationConfig};
use crate::array::{angle_grid, calibrate_phi, AodMapping};
use crate::engine::{CellState, MAX_ROTATION_DEG};
use crate::geometry::{empirical_gain, ideal_coverage, wrap_deg, CellGeometry, Point, RingSpec};
use crate::radio::{elevation_deg, rsrp_dbm, LinkBudget};

/// A dropped user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ue {
    pub id: usize,
    /// Cell whose sector the UE was dropped in.
    pub home_cell: usize,
    pub position: Point,
}

/// The simulated cluster.
#[derive(Debug, Clone)]
pub struct Network {
    pub config: SimulationConfig,
    pub layout: Layout,
    pub cells: Vec<CellState>,
    pub pci: Vec<u32>,
    /// Most recent drop.
    pub ues: Vec<Ue>,
    pub round: u64,
    pub aod_mapping: AodMapping,
    pub rings: RingSpec,
}

/// Ground geometry of a link, measured from the site to the UE's nearest image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub distance_m: f64,
    /// Absolute azimuth, degrees in [0, 360).
    pub azimuth_deg: f64,
}

impl Network {
    pub fn link_geometry(&self, cell: usize, p: Point) -> LinkGeometry {
        let site = self.cells[cell].geometry.site;
        let v = self.layout.wrap_vector(site, p);
        LinkGeometry {
            distance_m: v.x.hypot(v.y),
            azimuth_deg: v.y.atan2(v.x).to_degrees().rem_euclid(360.0),
        }
    }

    /// Link budget to `cell` from a point, with `shadow_db` of shadowing.
    pub fn link(&self, cell: usize, geo: LinkGeometry, shadow_db: f64) -> LinkBudget {
        let st = &self.cells[cell];
        let g = &st.geometry;
        let r = &self.config.radio;
        let offset = wrap_deg(geo.azimuth_deg - st.beam_azimuth_deg());
        let elev = elevation_deg(geo.distance_m, g.bs_height_m, g.ue_height_m);
        let mut bs_gain = r.antenna.gain_db(offset, elev, st.tilt_deg);
        if r.empirical_gain {
            if let Ok(extra) = empirical_gain(g.bs_height_m, geo.distance_m, g.vertical_tilt_deg) {
                bs_gain += extra;
            }
        }
        LinkBudget {
            distance_m: geo.distance_m,
            pathloss_db: r.pathloss.loss_db(geo.distance_m),
            bs_gain_db: bs_gain,
            ue_gain_db: r.ue_gain_db,
            channel_gain: 10f64.powf(shadow_db / 10.0),
            noise_dbm: r.noise_dbm,
        }
    }

    pub fn rsrp_at(&self, cell: usize, p: Point, shadow_db: f64) -> f64 {
        let link = self.link(cell, self.link_geometry(cell, p), shadow_db);
        rsrp_dbm(self.cells[cell].p_rs_dbm, &link)
    }

    /// Cells whose RS collides with `cell`'s under the PCI reuse rule.
    pub fn rs_interferers(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        let reuse = self.config.radio.pci_reuse;
        let pci = self.pci[cell];
        (0..self.cells.len())
            .filter(move |&c| c != cell && crate::radio::shares_rs_shift(pci, self.pci[c], reuse))
    }

    /// Drops `ues_per_cell` users uniformly over each sector's rhombus.
    pub fn drop_ues(&mut self, round: u64, window: u64) {
        let n = self.config.network.ues_per_cell;
        let seed = self.config.network.seed;
        let mut ues = Vec::with_capacity(n * self.cells.len());
        for (cell, st) in self.cells.iter().enumerate() {
            let (a, c) = self.layout.sector_corners(st.geometry.boresight_deg);
            let mut rng = entity_rng(seed, tags::DROP, &[round, window, cell as u64]);
            for k in 0..n {
                let (u, v): (f64, f64) = (rng.random(), rng.random());
                let site = st.geometry.site;
                ues.push(Ue {
                    id: cell * n + k,
                    home_cell: cell,
                    position: Point::new(site.x + u * a.x + v * c.x, site.y + u * a.y + v * c.y),
                });
            }
        }
        self.ues = ues;
    }
}

fn planned_state(cfg: &SimulationConfig, cell_id: usize, site: Point, boresight: f64) -> Result<CellState, SimError> {
    let n = &cfg.network;
    let geometry = CellGeometry {
        site,
        boresight_deg: boresight,
        bs_height_m: n.bs_height_m,
        ue_height_m: n.ue_height_m,
        mech_tilt_deg: n.mech_tilt_deg,
        vertical_tilt_deg: cfg.vertical_tilt_deg(),
    };
    let ideal = ideal_coverage(&geometry, cfg.ring_count())?;
    Ok(CellState {
        cell_id,
        tilt_deg: ideal.tilt_deg,
        tilt_min_deg: n.tilt_min_deg,
        tilt_max_deg: n.tilt_max_deg,
        p_rs_dbm: cfg.radio.p_rs_dbm,
        p_rs_min_dbm: cfg.radio.p_rs_min_dbm,
        p_rs_max_dbm: cfg.radio.p_rs_max_dbm,
        rotation_deg: 0.0,
        geometry,
        r_exp_m: ideal.range_m,
    })
}

/// Rings of depth `d` out to `(n_d − 1)·d`, with the last ring stretched to
/// the overshoot margin `∂·R_exp`.
pub fn coverage_rings(cfg: &SimulationConfig, r_exp_m: f64) -> Result<RingSpec, SimError> {
    let n_d = cfg.ring_count();
    let depth = r_exp_m / n_d as f64;
    let mut radii: Vec<f64> = (1..=n_d).map(|i| depth * i as f64).collect();
    radii[n_d - 1] = r_exp_m * cfg.thresholds.partial_d;
    Ok(RingSpec::new(radii, cfg.coverage.angle_splits.clone())?)
}

fn apply_faults(cells: &mut [CellState], faults: &FaultSpec) -> Result<(), SimError> {
    for f in faults {
        let total = cells.len();
        let st = cells.get_mut(f.cell).ok_or(SimError::FaultTarget {
            cell: f.cell,
            cells: total,
        })?;
        let bad = |reason: &str| SimError::FaultParameter {
            cell: f.cell,
            reason: reason.to_string(),
        };
        match f.kind {
            FaultKind::OvershootTilt => st.tilt_deg = st.tilt_min_deg,
            FaultKind::LimitedTilt => {
                let tilt = f.tilt_deg.unwrap_or(st.tilt_max_deg);
                if !(st.tilt_min_deg..=st.tilt_max_deg).contains(&tilt) {
                    return Err(bad("tilt_deg outside the tilt range"));
                }
                st.tilt_deg = tilt;
            }
            FaultKind::PowerHole => st.p_rs_dbm = st.p_rs_min_dbm,
            FaultKind::Rotated => {
                let offset = f.offset_deg.ok_or_else(|| bad("rotated faults need offset_deg"))?;
                if !(offset.abs() <= MAX_ROTATION_DEG) {
                    return Err(bad("offset_deg must lie within ±60°"));
                }
                st.rotation_deg = offset;
            }
        }
    }
    Ok(())
}

/// Builds the cluster, applies `faults` and drops the first UEs.
pub fn drop_network(cfg: &SimulationConfig, faults: &FaultSpec) -> Result<Network, SimError> {
    cfg.validate()?;
    let layout = Layout::hexagonal(cfg.site_count(), cfg.network.isd_m)?;
    let mut cells = Vec::with_capacity(cfg.network.cells);
    for (s, &site) in layout.sites.iter().enumerate() {
        for (k, &boresight) in SECTOR_BORESIGHTS_DEG.iter().enumerate() {
            cells.push(planned_state(cfg, 3 * s + k, site, boresight)?);
        }
    }
    let rings = coverage_rings(cfg, cells[0].r_exp_m)?;
    apply_faults(&mut cells, faults)?;

    let aod_mapping = match cfg.measurement.aod_mapping {
        AodMappingKind::Identity => AodMapping::Identity,
        AodMappingKind::Phi => {
            let angles: Vec<f64> = angle_grid(1.0)?.into_iter().filter(|a| a.abs() <= 60.0).collect();
            AodMapping::Linear(calibrate_phi(&cfg.array, &angles, cfg.measurement.phi_phase_bits)?)
        }
    };
    let pci = (0..cells.len() as u32).collect();
    let mut net = Network {
        config: cfg.clone(),
        layout,
        cells,
        pci,
        ues: Vec::new(),
        round: 0,
        aod_mapping,
        rings,
    };
    net.drop_ues(0, 0);
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Fault;

    #[test]
    fn default_drop_counts() {
        let net = drop_network(&SimulationConfig::default(), &Vec::new()).unwrap();
        assert_eq!(net.cells.len(), 21);
        assert_eq!(net.ues.len(), 210);
        assert!((net.cells[0].r_exp_m - 840.0).abs() < 1e-9);
    }

    #[test]
    fn drops_stay_in_home_sector() {
        let net = drop_network(&SimulationConfig::default(), &Vec::new()).unwrap();
        for ue in &net.ues {
            let st = &net.cells[ue.home_cell];
            let geo = net.link_geometry(ue.home_cell, ue.position);
            assert!(st.geometry.sector_offset(geo.azimuth_deg).abs() <= 60.0 + 1e-9);
            assert!(geo.distance_m <= net.config.network.isd_m / 3f64.sqrt() + 1e-6);
        }
    }

    #[test]
    fn fault_targets_are_checked() {
        let fault = Fault {
            cell: 40,
            kind: FaultKind::PowerHole,
            tilt_deg: None,
            offset_deg: None,
        };
        assert!(matches!(
            drop_network(&SimulationConfig::default(), &vec![fault]),
            Err(SimError::FaultTarget { cell: 40, cells: 21 })
        ));
    }
}
