//! Uniform linear array processing.
//!
//! Steering vectors follow `a_k(θ) = exp(-j·2π·Δ·(f/F₀)·k·sin θ)` where Δ is
//! the element spacing in wavelengths of the reference frequency `F₀` and θ
//! is measured from array broadside (the sector boresight).

use std::f64::consts::PI;
use std::io;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::SECTOR_HALF_WIDTH_DEG;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Condition number above which a Gram matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArrayError {
    #[error("invalid array configuration: {0}")]
    InvalidConfig(String),
    #[error("covariance is singular even with diagonal loading {loading:e}")]
    SingularCovariance { loading: f64 },
    #[error("uplink signature matrix is rank deficient (condition estimate {condition:e})")]
    RankDeficient { condition: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("grid step must be positive and at most 180°, got {0}")]
    InvalidGridStep(f64),
}

/// Carrier and geometry of a uniform linear array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArrayConfig {
    pub elements: usize,
    /// Element spacing in wavelengths of `f_ref_hz`.
    pub spacing_wavelengths: f64,
    pub f_ul_hz: f64,
    pub f_dl_hz: f64,
    pub f_ref_hz: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        // Band 3 FDD centre frequencies; elements spaced λ/2 at the DL carrier.
        Self {
            elements: 4,
            spacing_wavelengths: 0.5,
            f_ul_hz: 1747.5e6,
            f_dl_hz: 1842.5e6,
            f_ref_hz: 1842.5e6,
        }
    }
}

impl ArrayConfig {
    pub fn validate(&self) -> Result<(), ArrayError> {
        if self.elements < 2 {
            return Err(ArrayError::InvalidConfig(format!(
                "array needs at least 2 elements, got {}",
                self.elements
            )));
        }
        if !(self.spacing_wavelengths > 0.0) {
            return Err(ArrayError::InvalidConfig("element spacing must be positive".into()));
        }
        if !(self.f_ul_hz > 0.0 && self.f_dl_hz > 0.0 && self.f_ref_hz > 0.0) {
            return Err(ArrayError::InvalidConfig("carrier frequencies must be positive".into()));
        }
        Ok(())
    }

    pub fn carrier_hz(&self, link: Link) -> f64 {
        match link {
            Link::Uplink => self.f_ul_hz,
            Link::Downlink => self.f_dl_hz,
        }
    }

    /// Phase advance per element per unit `sin θ`, in radians.
    fn phase_slope(&self, link: Link) -> f64 {
        2.0 * PI * self.spacing_wavelengths * self.carrier_hz(link) / self.f_ref_hz
    }

    /// Physical element spacing in meters.
    pub fn spacing_m(&self) -> f64 {
        self.spacing_wavelengths * crate::radio::SPEED_OF_LIGHT / self.f_ref_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Uplink,
    Downlink,
}

pub fn steering_vector(theta_deg: f64, cfg: &ArrayConfig, link: Link) -> CVector {
    let psi = cfg.phase_slope(link) * theta_deg.to_radians().sin();
    CVector::from_fn(cfg.elements, |k, _| {
        if k == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, -psi * k as f64)
        }
    })
}

/// Array snapshots `x(n)`, stored one snapshot per column.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    data: CMatrix,
}

impl SnapshotSet {
    pub fn new(data: CMatrix) -> Result<Self, ArrayError> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(ArrayError::Dimension("snapshot set is empty".into()));
        }
        Ok(Self { data })
    }

    pub fn from_columns(columns: &[CVector]) -> Result<Self, ArrayError> {
        let Some(first) = columns.first() else {
            return Err(ArrayError::Dimension("snapshot set is empty".into()));
        };
        if columns.iter().any(|c| c.len() != first.len()) {
            return Err(ArrayError::Dimension("snapshots differ in length".into()));
        }
        Self::new(CMatrix::from_columns(columns))
    }

    pub fn elements(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    /// Sample covariance `(1/N) Σ x(n) x(n)ᴴ`.
    pub fn covariance(&self) -> CMatrix {
        let n = self.data.ncols() as f64;
        (&self.data * self.data.adjoint()).unscale(n)
    }
}

/// Diagonal loading added before inverting the covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalLoading {
    /// Fraction of the mean element power, `δ = f·tr(R)/M`.
    Relative(f64),
    Absolute(f64),
}

impl Default for DiagonalLoading {
    fn default() -> Self {
        DiagonalLoading::Relative(1e-6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaponOptions {
    pub grid_step_deg: f64,
    pub loading: DiagonalLoading,
    /// Carrier the snapshots were received on.
    pub link: Link,
}

impl Default for CaponOptions {
    fn default() -> Self {
        Self {
            grid_step_deg: 0.5,
            loading: DiagonalLoading::default(),
            link: Link::Uplink,
        }
    }
}

/// Uniform angle grid over [-90°, 90°].
pub fn angle_grid(step_deg: f64) -> Result<Vec<f64>, ArrayError> {
    if !(step_deg > 0.0 && step_deg <= 180.0) {
        return Err(ArrayError::InvalidGridStep(step_deg));
    }
    let n = (180.0 / step_deg + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| -90.0 + step_deg * i as f64).collect())
}

/// Index of the largest value; ties go to the angle nearest boresight, then
/// to the more negative angle.
fn argmax_toward_boresight(angles: &[f64], values: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        let (v, b) = (values[i], values[best]);
        let closer = angles[i].abs() < angles[best].abs()
            || (angles[i].abs() == angles[best].abs() && angles[i] < angles[best]);
        if v > b || (v == b && closer) {
            best = i;
        }
    }
    best
}

/// A sampled spatial power spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSpectrum {
    pub angles_deg: Vec<f64>,
    pub power: Vec<f64>,
    pub peak_deg: f64,
}

impl SpatialSpectrum {
    /// Grid angles that are strict local maxima (edges compare one side).
    pub fn local_maxima(&self) -> Vec<f64> {
        let p = &self.power;
        (0..p.len())
            .filter(|&i| {
                let left = i == 0 || p[i] > p[i - 1];
                let right = i + 1 == p.len() || p[i] > p[i + 1];
                left && right
            })
            .map(|i| self.angles_deg[i])
            .collect()
    }

    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["angle_deg", "power"])?;
        for (a, p) in self.angles_deg.iter().zip(&self.power) {
            w.write_record([a.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn loading_value(cov: &CMatrix, loading: DiagonalLoading) -> f64 {
    match loading {
        DiagonalLoading::Relative(f) => f * cov.trace().re / cov.nrows() as f64,
        DiagonalLoading::Absolute(v) => v,
    }
}

/// Capon spectrum `P(θ) = 1 / (aᴴ(θ) (R + δI)⁻¹ a(θ))` over the angle grid.
pub fn capon_spectrum(cov: &CMatrix, cfg: &ArrayConfig, opts: &CaponOptions) -> Result<SpatialSpectrum, ArrayError> {
    cfg.validate()?;
    if cov.nrows() != cfg.elements || cov.ncols() != cfg.elements {
        return Err(ArrayError::Dimension(format!(
            "covariance is {}x{}, array has {} elements",
            cov.nrows(),
            cov.ncols(),
            cfg.elements
        )));
    }
    let angles = angle_grid(opts.grid_step_deg)?;
    let delta = loading_value(cov, opts.loading);
    let mut loaded = cov.clone();
    for i in 0..loaded.nrows() {
        loaded[(i, i)] += Complex64::new(delta, 0.0);
    }
    let singular = ArrayError::SingularCovariance { loading: delta };
    let chol = loaded.cholesky().ok_or_else(|| singular.clone())?;

    let mut power = Vec::with_capacity(angles.len());
    for &theta in &angles {
        let a = steering_vector(theta, cfg, opts.link);
        let denom = a.dotc(&chol.solve(&a)).re;
        if !(denom > 0.0 && denom.is_finite()) {
            return Err(singular);
        }
        power.push(1.0 / denom);
    }
    let peak = argmax_toward_boresight(&angles, &power);
    Ok(SpatialSpectrum {
        peak_deg: angles[peak],
        angles_deg: angles,
        power,
    })
}

/// Capon angle-of-arrival estimate from raw snapshots.
pub fn capon_estimate(
    snapshots: &SnapshotSet,
    cfg: &ArrayConfig,
    opts: &CaponOptions,
) -> Result<SpatialSpectrum, ArrayError> {
    capon_spectrum(&snapshots.covariance(), cfg, opts)
}

/// Diagonal `T(θ)` with `a_DL(θ) = T(θ)·a_UL(θ)`.
pub fn fdd_transform_diag(theta_deg: f64, cfg: &ArrayConfig) -> CMatrix {
    let slope = 2.0 * PI * cfg.spacing_wavelengths * (cfg.f_ul_hz - cfg.f_dl_hz) / cfg.f_ref_hz;
    let psi = slope * theta_deg.to_radians().sin();
    let diag = CVector::from_fn(cfg.elements, |k, _| {
        if k == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, psi * k as f64)
        }
    });
    CMatrix::from_diagonal(&diag)
}

fn condition_estimate(m: &CMatrix) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Least-squares linear map `Φ = A_dl A_ulᴴ (A_ul A_ulᴴ)⁻¹` taking uplink
/// signatures (columns of `a_ul`) onto downlink ones.
pub fn estimate_phi(a_dl: &CMatrix, a_ul: &CMatrix) -> Result<CMatrix, ArrayError> {
    if a_dl.ncols() != a_ul.ncols() {
        return Err(ArrayError::Dimension(format!(
            "A_dl has {} columns, A_ul has {}",
            a_dl.ncols(),
            a_ul.ncols()
        )));
    }
    let gram = a_ul * a_ul.adjoint();
    let condition = condition_estimate(&gram);
    if !(condition <= MAX_CONDITION) {
        return Err(ArrayError::RankDeficient { condition });
    }
    let chol = gram.cholesky().ok_or(ArrayError::RankDeficient { condition })?;
    // Φ = B G⁻¹ with G Hermitian, so Φᴴ = G⁻¹ Bᴴ.
    let b = a_dl * a_ul.adjoint();
    Ok(chol.solve(&b.adjoint()).adjoint())
}

/// Builds `Φ` from steering signatures at `angles_deg`. With `phase_bits`,
/// the downlink signatures are phase-quantized the way a codebook feedback
/// would report them.
pub fn calibrate_phi(cfg: &ArrayConfig, angles_deg: &[f64], phase_bits: Option<u32>) -> Result<CMatrix, ArrayError> {
    cfg.validate()?;
    let ul: Vec<CVector> = angles_deg.iter().map(|&a| steering_vector(a, cfg, Link::Uplink)).collect();
    let dl: Vec<CVector> = angles_deg
        .iter()
        .map(|&a| {
            let v = steering_vector(a, cfg, Link::Downlink);
            match phase_bits {
                Some(bits) => v.map(|z| quantize_phase(z, bits)),
                None => v,
            }
        })
        .collect();
    if ul.is_empty() {
        return Err(ArrayError::Dimension("no calibration angles".into()));
    }
    estimate_phi(&CMatrix::from_columns(&dl), &CMatrix::from_columns(&ul))
}

fn quantize_phase(z: Complex64, bits: u32) -> Complex64 {
    let levels = (1u64 << bits.min(16)) as f64;
    let step = 2.0 * PI / levels;
    let q = (z.arg() / step).round() * step;
    Complex64::from_polar(z.norm(), q)
}

/// Grid angle whose downlink steering vector best matches `signature`.
pub fn match_downlink(signature: &CVector, cfg: &ArrayConfig, grid_step_deg: f64) -> Result<f64, ArrayError> {
    let angles = angle_grid(grid_step_deg)?;
    let scores: Vec<f64> = angles
        .iter()
        .map(|&a| steering_vector(a, cfg, Link::Downlink).dotc(signature).norm_sqr())
        .collect();
    Ok(angles[argmax_toward_boresight(&angles, &scores)])
}

/// How an uplink AoA becomes a downlink AoD.
#[derive(Debug, Clone, PartialEq)]
pub enum AodMapping {
    /// Small duplex gap: AoD ≈ AoA.
    Identity,
    /// Transform the uplink signature through `Φ` and re-run the grid match.
    Linear(CMatrix),
}

impl AodMapping {
    pub fn aod_deg(&self, aoa_deg: f64, cfg: &ArrayConfig, grid_step_deg: f64) -> Result<f64, ArrayError> {
        match self {
            AodMapping::Identity => Ok(aoa_deg),
            AodMapping::Linear(phi) => {
                let sig = phi * steering_vector(aoa_deg, cfg, Link::Uplink);
                match_downlink(&sig, cfg, grid_step_deg)
            }
        }
    }
}

/// Side of the boresight a beam is rotated toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationDirection {
    /// Toward negative sector offsets.
    Negative,
    /// Toward positive sector offsets.
    Positive,
}

impl RotationDirection {
    pub fn sign(self) -> f64 {
        match self {
            RotationDirection::Negative => -1.0,
            RotationDirection::Positive => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotatedBeam {
    pub angle_deg: f64,
    /// The rotated angle left the sector and was pulled back to its edge.
    pub clamped: bool,
    pub weights: CVector,
}

/// Downlink steering vector at `φ' = φ_DL ± ε`, kept within the sector.
pub fn rotate_beam(
    phi_dl_deg: f64,
    epsilon_deg: f64,
    direction: RotationDirection,
    cfg: &ArrayConfig,
) -> RotatedBeam {
    let target = phi_dl_deg + direction.sign() * epsilon_deg;
    let angle = target.clamp(-SECTOR_HALF_WIDTH_DEG, SECTOR_HALF_WIDTH_DEG);
    RotatedBeam {
        angle_deg: angle,
        clamped: angle != target,
        weights: steering_vector(angle, cfg, Link::Downlink),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(m: usize) -> ArrayConfig {
        ArrayConfig {
            elements: m,
            spacing_wavelengths: 0.5,
            f_ul_hz: 1.0e9,
            f_dl_hz: 1.0e9,
            f_ref_hz: 1.0e9,
        }
    }

    #[test]
    fn boresight_steering_is_all_ones() {
        let a = steering_vector(0.0, &ArrayConfig::default(), Link::Downlink);
        assert!(a.iter().all(|z| *z == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn endfire_two_element() {
        let a = steering_vector(90.0, &cfg(2), Link::Uplink);
        assert_eq!(a[0], Complex64::new(1.0, 0.0));
        assert!((a[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn transform_phase_example() {
        let mut c = cfg(2);
        c.f_ul_hz = 1.1e9;
        let t = fdd_transform_diag(30.0, &c);
        let expected = 2.0 * PI * 0.5 * 0.1 * 0.5;
        assert_relative_eq!(t[(1, 1)].arg(), expected, epsilon = 1e-12);
        assert_eq!(t[(0, 1)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn transform_identities() {
        let c = ArrayConfig::default();
        assert_eq!(fdd_transform_diag(0.0, &c), CMatrix::identity(4, 4));
        assert_eq!(fdd_transform_diag(37.0, &cfg(6)), CMatrix::identity(6, 6));
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(cfg(1).validate().is_err());
        let mut c = cfg(4);
        c.spacing_wavelengths = 0.0;
        assert!(c.validate().is_err());
        assert!(angle_grid(0.0).is_err());
    }

    #[test]
    fn capon_noiseless_boresight() {
        let c = cfg(4);
        let a = steering_vector(0.0, &c, Link::Uplink);
        let cols: Vec<CVector> = (0..16)
            .map(|n| &a * Complex64::from_polar(1.0, 0.3 * n as f64))
            .collect();
        let snaps = SnapshotSet::from_columns(&cols).unwrap();
        let spec = capon_estimate(&snaps, &c, &CaponOptions::default()).unwrap();
        assert_eq!(spec.peak_deg, 0.0);
        assert!(spec.power.iter().all(|p| *p > 0.0));
    }

    #[test]
    fn capon_zero_snapshots_are_singular() {
        let snaps = SnapshotSet::new(CMatrix::zeros(4, 8)).unwrap();
        let err = capon_estimate(&snaps, &cfg(4), &CaponOptions::default()).unwrap_err();
        assert!(matches!(err, ArrayError::SingularCovariance { .. }));
    }

    #[test]
    fn phi_scalar_and_identity() {
        let c = cfg(3);
        let cols: Vec<CVector> = [-40.0, -5.0, 20.0, 50.0]
            .iter()
            .map(|&a| steering_vector(a, &c, Link::Uplink))
            .collect();
        let a_ul = CMatrix::from_columns(&cols);
        let phi = estimate_phi(&a_ul, &a_ul).unwrap();
        assert!((phi - CMatrix::identity(3, 3)).norm() < 1e-9);
        let phi2 = estimate_phi(&a_ul.scale(2.0), &a_ul).unwrap();
        assert!((phi2 - CMatrix::identity(3, 3).scale(2.0)).norm() < 1e-9);
    }

    #[test]
    fn phi_rank_deficient() {
        let c = cfg(4);
        let a = steering_vector(10.0, &c, Link::Uplink);
        let a_ul = CMatrix::from_columns(&[a.clone(), a.clone(), a]);
        assert!(matches!(
            estimate_phi(&a_ul, &a_ul),
            Err(ArrayError::RankDeficient { .. })
        ));
    }

    #[test]
    fn identity_mapping_for_equal_carriers() {
        let c = cfg(4);
        let angles: Vec<f64> = (-12..=12).map(|i| i as f64 * 5.0).collect();
        let phi = calibrate_phi(&c, &angles, None).unwrap();
        let map = AodMapping::Linear(phi);
        for aoa in [-42.5, 0.0, 17.0, 33.5] {
            assert_eq!(map.aod_deg(aoa, &c, 0.5).unwrap(), aoa);
        }
    }

    #[test]
    fn rotation_rules() {
        let c = ArrayConfig::default();
        let zero = rotate_beam(23.0, 0.0, RotationDirection::Positive, &c);
        assert_eq!(zero.weights, steering_vector(23.0, &c, Link::Downlink));
        assert!(!zero.clamped);

        let r = rotate_beam(10.0, 15.0, RotationDirection::Positive, &c);
        assert_eq!(r.angle_deg, 25.0);
        assert_eq!(r.weights, steering_vector(25.0, &c, Link::Downlink));

        let r = rotate_beam(55.0, 15.0, RotationDirection::Positive, &c);
        assert_eq!(r.angle_deg, 60.0);
        assert!(r.clamped);
        let r = rotate_beam(-50.0, 15.0, RotationDirection::Negative, &c);
        assert_eq!(r.angle_deg, -60.0);
        assert!(r.clamped);
    }

    #[test]
    fn spectrum_csv_header() {
        let spec = SpatialSpectrum {
            angles_deg: vec![-0.5, 0.0],
            power: vec![1.5, 2.0],
            peak_deg: 0.0,
        };
        let mut buf = Vec::new();
        spec.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "angle_deg,power\n-0.5,1.5\n0,2\n");
    }
}
