//! Ideal cell coverage and the per-cell angle/distance coverage map.
//!
//! Every cell owns a virtual map of its 120° sector, split into distance
//! rings and, per ring, into equal angle bins. Localized measurement reports
//! are projected onto that map and averaged once per reporting window.
//!
//! Angles are in degrees. Azimuths are measured counter-clockwise from the
//! +x axis; sector offsets are relative to the cell boresight and lie in
//! [-60°, 60°].

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Angular width of one sector.
pub const SECTOR_WIDTH_DEG: f64 = 120.0;
/// Half of [`SECTOR_WIDTH_DEG`]; offsets beyond this belong to another cell.
pub const SECTOR_HALF_WIDTH_DEG: f64 = 60.0;

// Offsets within this tolerance of the sector edge are treated as on the edge.
const EDGE_EPS_DEG: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("BS height {bs_height_m} m must exceed UE height {ue_height_m} m (and both must be positive)")]
    DegenerateHeight { bs_height_m: f64, ue_height_m: f64 },
    #[error("total tilt {0}° is outside (0°, 90°)")]
    DegenerateTilt(f64),
    #[error("empirical gain undefined: {0}")]
    Domain(String),
    #[error("{rings} ring boundaries do not match {splits} angle-split entries")]
    RingCountMismatch { rings: usize, splits: usize },
    #[error("invalid ring specification: {0}")]
    InvalidRings(String),
    #[error("report offset {offset_deg:.3}° from boresight is outside the sector")]
    OutOfSector { offset_deg: f64 },
    #[error("negative report range {0} m")]
    NegativeRange(f64),
}

/// A position on the simulation plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Azimuth of `other` as seen from `self`, in [0, 360).
    pub fn bearing_to(self, other: Point) -> f64 {
        let deg = (other.y - self.y).atan2(other.x - self.x).to_degrees();
        deg.rem_euclid(360.0)
    }

    /// Point at `range` meters along `azimuth_deg` from `self`.
    pub fn offset(self, range: f64, azimuth_deg: f64) -> Point {
        let a = azimuth_deg.to_radians();
        Point::new(self.x + range * a.cos(), self.y + range * a.sin())
    }
}

/// Wraps an angle to (-180, 180].
pub fn wrap_deg(angle: f64) -> f64 {
    let a = angle.rem_euclid(360.0);
    if a > 180.0 {
        a - 360.0
    } else {
        a
    }
}

/// Static planning data of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry {
    pub site: Point,
    /// Sector boresight azimuth, degrees in [0, 360).
    pub boresight_deg: f64,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
    /// Mechanical tilt.
    pub mech_tilt_deg: f64,
    /// Vertical beamwidth / electrical tilt contribution to the planned tilt.
    pub vertical_tilt_deg: f64,
}

impl CellGeometry {
    pub fn planned_tilt_deg(&self) -> f64 {
        self.mech_tilt_deg + self.vertical_tilt_deg
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.ue_height_m > 0.0 && self.bs_height_m > self.ue_height_m) {
            return Err(GeometryError::DegenerateHeight {
                bs_height_m: self.bs_height_m,
                ue_height_m: self.ue_height_m,
            });
        }
        let tilt = self.planned_tilt_deg();
        if !(tilt > 0.0 && tilt < 90.0) {
            return Err(GeometryError::DegenerateTilt(tilt));
        }
        Ok(())
    }

    /// Offset of `azimuth_deg` from the boresight, in (-180, 180].
    pub fn sector_offset(&self, azimuth_deg: f64) -> f64 {
        wrap_deg(azimuth_deg - self.boresight_deg)
    }
}

/// Planned footprint of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealCoverage {
    pub tilt_deg: f64,
    /// Expected cell range `R_exp`.
    pub range_m: f64,
    /// Minimum sub-area depth `d = R_exp / n_d`.
    pub depth_m: f64,
}

impl IdealCoverage {
    /// Number of distance rings this coverage was divided into.
    pub fn ring_count(&self) -> usize {
        (self.range_m / self.depth_m).round() as usize
    }
}

/// Computes the planned footprint: total tilt, the ground distance where the
/// tilted boresight meets UE height, and the sub-area depth for `n_d` rings.
pub fn ideal_coverage(geom: &CellGeometry, n_d: usize) -> Result<IdealCoverage, GeometryError> {
    geom.validate()?;
    if n_d == 0 {
        return Err(GeometryError::InvalidRings("at least one ring is required".into()));
    }
    let tilt_deg = geom.planned_tilt_deg();
    let range_m = (geom.bs_height_m - geom.ue_height_m) / tilt_deg.to_radians().tan();
    if !(range_m > 0.0 && range_m.is_finite()) {
        return Err(GeometryError::DegenerateTilt(tilt_deg));
    }
    Ok(IdealCoverage {
        tilt_deg,
        range_m,
        depth_m: range_m / n_d as f64,
    })
}

/// Empirical BS antenna gain correction `3·ln(H_BS − R_exp^0.8)·log10(θ_VerB)`.
///
/// Only defined while `H_BS > R_exp^0.8` and `θ_VerB > 1`.
pub fn empirical_gain(
    bs_height_m: f64,
    range_m: f64,
    vertical_beamwidth_deg: f64,
) -> Result<f64, GeometryError> {
    let margin = bs_height_m - range_m.max(0.0).powf(0.8);
    if !(margin > 0.0) {
        return Err(GeometryError::Domain(format!(
            "H_BS - R_exp^0.8 = {margin:.3} is not positive"
        )));
    }
    if !(vertical_beamwidth_deg > 1.0) {
        return Err(GeometryError::Domain(format!(
            "vertical beamwidth {vertical_beamwidth_deg}° must exceed 1°"
        )));
    }
    Ok(3.0 * margin.ln() * vertical_beamwidth_deg.log10())
}

/// Position of one sub-area on a coverage map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubAreaIndex {
    pub ring: usize,
    pub angle: usize,
}

/// Polar extent of one sub-area. Ring `i` spans `(inner, outer]` (ring 0
/// includes the origin); angle bins span `[start, end)` with the last bin of
/// a ring closed at +60°.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubAreaBounds {
    pub inner_radius_m: f64,
    pub outer_radius_m: f64,
    pub start_deg: f64,
    pub end_deg: f64,
}

impl SubAreaBounds {
    /// Polar midpoint, as (range, offset).
    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.inner_radius_m + self.outer_radius_m),
            0.5 * (self.start_deg + self.end_deg),
        )
    }

    /// Distance between the inner-start and outer-end corners.
    pub fn diagonal_m(&self) -> f64 {
        let a = Point::new(0.0, 0.0).offset(self.inner_radius_m, self.start_deg);
        let b = Point::new(0.0, 0.0).offset(self.outer_radius_m, self.end_deg);
        a.distance(b)
    }
}

/// Distance rings and their angle splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    outer_radii_m: Vec<f64>,
    angle_splits: Vec<u32>,
}

impl RingSpec {
    pub fn new(outer_radii_m: Vec<f64>, angle_splits: Vec<u32>) -> Result<Self, GeometryError> {
        if outer_radii_m.len() != angle_splits.len() {
            return Err(GeometryError::RingCountMismatch {
                rings: outer_radii_m.len(),
                splits: angle_splits.len(),
            });
        }
        if outer_radii_m.is_empty() {
            return Err(GeometryError::InvalidRings("at least one ring is required".into()));
        }
        let mut prev = 0.0;
        for &r in &outer_radii_m {
            if !(r > prev && r.is_finite()) {
                return Err(GeometryError::InvalidRings(format!(
                    "ring boundaries must be positive and strictly increasing, got {outer_radii_m:?}"
                )));
            }
            prev = r;
        }
        if angle_splits.contains(&0) {
            return Err(GeometryError::InvalidRings("angle splits must be at least 1".into()));
        }
        if angle_splits.windows(2).any(|w| w[1] < w[0]) {
            return Err(GeometryError::InvalidRings(format!(
                "angle splits must be non-decreasing with distance, got {angle_splits:?}"
            )));
        }
        Ok(Self {
            outer_radii_m,
            angle_splits,
        })
    }

    /// Rings at uniform multiples of `range_m / splits.len()`.
    pub fn uniform(range_m: f64, angle_splits: Vec<u32>) -> Result<Self, GeometryError> {
        let n = angle_splits.len();
        if n == 0 {
            return Err(GeometryError::InvalidRings("at least one ring is required".into()));
        }
        let depth = range_m / n as f64;
        let mut radii: Vec<f64> = (1..=n).map(|i| depth * i as f64).collect();
        radii[n - 1] = range_m;
        Self::new(radii, angle_splits)
    }

    pub fn ring_count(&self) -> usize {
        self.outer_radii_m.len()
    }

    pub fn outer_radii_m(&self) -> &[f64] {
        &self.outer_radii_m
    }

    pub fn angle_splits(&self) -> &[u32] {
        &self.angle_splits
    }

    pub fn outer_radius_m(&self) -> f64 {
        *self.outer_radii_m.last().expect("validated non-empty")
    }

    pub fn sub_area_count(&self) -> usize {
        self.angle_splits.iter().map(|&s| s as usize).sum()
    }

    /// All sub-area indices, ring-major.
    pub fn indices(&self) -> impl Iterator<Item = SubAreaIndex> + '_ {
        self.angle_splits
            .iter()
            .enumerate()
            .flat_map(|(ring, &n)| (0..n as usize).map(move |angle| SubAreaIndex { ring, angle }))
    }

    fn bin_start(&self, ring: usize, bin: usize) -> f64 {
        let width = SECTOR_WIDTH_DEG / self.angle_splits[ring] as f64;
        -SECTOR_HALF_WIDTH_DEG + width * bin as f64
    }

    pub fn bounds(&self, idx: SubAreaIndex) -> SubAreaBounds {
        let inner = if idx.ring == 0 {
            0.0
        } else {
            self.outer_radii_m[idx.ring - 1]
        };
        let last = self.angle_splits[idx.ring] as usize - 1;
        SubAreaBounds {
            inner_radius_m: inner,
            outer_radius_m: self.outer_radii_m[idx.ring],
            start_deg: self.bin_start(idx.ring, idx.angle),
            end_deg: if idx.angle == last {
                SECTOR_HALF_WIDTH_DEG
            } else {
                self.bin_start(idx.ring, idx.angle + 1)
            },
        }
    }

    /// Sub-area holding a point at `range_m` and `offset_deg` from boresight.
    /// Ranges past the outer boundary land in the outermost ring.
    pub fn locate(&self, range_m: f64, offset_deg: f64) -> Result<SubAreaIndex, GeometryError> {
        if range_m < 0.0 || range_m.is_nan() {
            return Err(GeometryError::NegativeRange(range_m));
        }
        if !(offset_deg.abs() <= SECTOR_HALF_WIDTH_DEG + EDGE_EPS_DEG) {
            return Err(GeometryError::OutOfSector { offset_deg });
        }
        let offset = offset_deg.clamp(-SECTOR_HALF_WIDTH_DEG, SECTOR_HALF_WIDTH_DEG);
        let ring = self
            .outer_radii_m
            .iter()
            .position(|&outer| range_m <= outer)
            .unwrap_or(self.outer_radii_m.len() - 1);

        let splits = self.angle_splits[ring] as usize;
        let width = SECTOR_WIDTH_DEG / splits as f64;
        let mut bin = (((offset + SECTOR_HALF_WIDTH_DEG) / width).floor().max(0.0) as usize).min(splits - 1);
        // Float division can land one bin off at an exact edge; settle against
        // the same edges `bounds` reports.
        while bin > 0 && offset < self.bin_start(ring, bin) {
            bin -= 1;
        }
        while bin + 1 < splits && offset >= self.bin_start(ring, bin + 1) {
            bin += 1;
        }
        Ok(SubAreaIndex { ring, angle: bin })
    }
}

/// How per-sub-area RSRP is averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RsrpAveraging {
    /// Arithmetic mean of dBm values.
    #[default]
    Dbm,
    /// Mean of linear milliwatts, reported back in dBm.
    Linear,
}

/// One localized measurement report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementReport {
    pub ue_id: usize,
    pub cell_id: usize,
    pub rsrp_dbm: f64,
    /// Timing advance, in 16·Ts samples.
    pub ta_samples: u32,
    /// Range reported through the timing advance.
    pub range_m: f64,
    /// Estimated downlink departure azimuth from the site, degrees in [0, 360).
    pub azimuth_deg: f64,
    pub timestamp_s: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Accumulator {
    count: u64,
    rsrp_sum: f64,
    range_sum: f64,
}

/// A cell's live coverage map for the current reporting window.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMap {
    cell_id: usize,
    rings: RingSpec,
    averaging: RsrpAveraging,
    acc: Vec<Vec<Accumulator>>,
    span: Option<(f64, f64)>,
}

impl CoverageMap {
    /// Builds an empty map for `ideal`, whose ring count must match `rings`.
    pub fn build(cell_id: usize, ideal: &IdealCoverage, rings: RingSpec) -> Result<Self, GeometryError> {
        if ideal.ring_count() != rings.ring_count() {
            return Err(GeometryError::RingCountMismatch {
                rings: ideal.ring_count(),
                splits: rings.ring_count(),
            });
        }
        Ok(Self::with_rings(cell_id, rings))
    }

    pub fn with_rings(cell_id: usize, rings: RingSpec) -> Self {
        let acc = rings
            .angle_splits()
            .iter()
            .map(|&n| vec![Accumulator::default(); n as usize])
            .collect();
        Self {
            cell_id,
            rings,
            averaging: RsrpAveraging::Dbm,
            acc,
            span: None,
        }
    }

    pub fn with_averaging(mut self, averaging: RsrpAveraging) -> Self {
        self.averaging = averaging;
        self
    }

    pub fn cell_id(&self) -> usize {
        self.cell_id
    }

    pub fn rings(&self) -> &RingSpec {
        &self.rings
    }

    pub fn sub_area_count(&self) -> usize {
        self.rings.sub_area_count()
    }

    /// Number of reports accumulated in `idx` during the current window.
    pub fn count(&self, idx: SubAreaIndex) -> u64 {
        self.acc[idx.ring][idx.angle].count
    }

    pub fn total_count(&self) -> u64 {
        self.acc.iter().flatten().map(|a| a.count).sum()
    }

    /// Assigns `mr` to its sub-area and folds it into the running window.
    pub fn project(&mut self, geom: &CellGeometry, mr: &MeasurementReport) -> Result<SubAreaIndex, GeometryError> {
        let idx = self.rings.locate(mr.range_m, geom.sector_offset(mr.azimuth_deg))?;
        let a = &mut self.acc[idx.ring][idx.angle];
        a.count += 1;
        a.rsrp_sum += match self.averaging {
            RsrpAveraging::Dbm => mr.rsrp_dbm,
            RsrpAveraging::Linear => 10f64.powf(mr.rsrp_dbm / 10.0),
        };
        a.range_sum += mr.range_m;
        self.span = Some(match self.span {
            None => (mr.timestamp_s, mr.timestamp_s),
            Some((lo, hi)) => (lo.min(mr.timestamp_s), hi.max(mr.timestamp_s)),
        });
        Ok(idx)
    }

    /// Freezes the window's averages and clears the accumulators.
    pub fn window_average(&mut self) -> AggregatedMap {
        let sub_areas = self
            .rings
            .indices()
            .map(|idx| {
                let a = self.acc[idx.ring][idx.angle];
                let b = self.rings.bounds(idx);
                let (mean_rsrp_dbm, mean_range_m) = if a.count == 0 {
                    (None, None)
                } else {
                    let n = a.count as f64;
                    let rsrp = match self.averaging {
                        RsrpAveraging::Dbm => a.rsrp_sum / n,
                        RsrpAveraging::Linear => 10.0 * (a.rsrp_sum / n).log10(),
                    };
                    (Some(rsrp), Some(a.range_sum / n))
                };
                SubAreaSnapshot {
                    cell_id: self.cell_id,
                    ring: idx.ring,
                    angle_bin: idx.angle,
                    inner_radius_m: b.inner_radius_m,
                    outer_radius_m: b.outer_radius_m,
                    start_deg: b.start_deg,
                    end_deg: b.end_deg,
                    count: a.count,
                    mean_rsrp_dbm,
                    mean_range_m,
                }
            })
            .collect();
        let window = self.span.take();
        for a in self.acc.iter_mut().flatten() {
            *a = Accumulator::default();
        }
        AggregatedMap {
            cell_id: self.cell_id,
            window,
            sub_areas,
        }
    }
}

/// Frozen statistics of one sub-area; also the CSV row layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubAreaSnapshot {
    pub cell_id: usize,
    pub ring: usize,
    pub angle_bin: usize,
    pub inner_radius_m: f64,
    pub outer_radius_m: f64,
    pub start_deg: f64,
    pub end_deg: f64,
    pub count: u64,
    /// `None` when no report landed here during the window.
    pub mean_rsrp_dbm: Option<f64>,
    pub mean_range_m: Option<f64>,
}

impl SubAreaSnapshot {
    pub fn index(&self) -> SubAreaIndex {
        SubAreaIndex {
            ring: self.ring,
            angle: self.angle_bin,
        }
    }

    pub fn has_data(&self) -> bool {
        self.count > 0
    }
}

/// A window-averaged coverage map.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedMap {
    pub cell_id: usize,
    /// First and last report timestamps folded into this snapshot.
    pub window: Option<(f64, f64)>,
    pub sub_areas: Vec<SubAreaSnapshot>,
}

impl AggregatedMap {
    pub fn get(&self, idx: SubAreaIndex) -> Option<&SubAreaSnapshot> {
        self.sub_areas.iter().find(|s| s.index() == idx)
    }

    pub fn total_reports(&self) -> u64 {
        self.sub_areas.iter().map(|s| s.count).sum()
    }

    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        for s in &self.sub_areas {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(reader: R) -> Result<Vec<SubAreaSnapshot>, csv::Error> {
        csv::Reader::from_reader(reader).deserialize().collect()
    }
}
