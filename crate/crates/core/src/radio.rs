//! Physical-layer ground truth: reference-signal waveform, link budget,
//! RS SINR/RSRP, the per-path spatial channel and timing advance.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Range covered by one timing-advance step: 16·Ts·c/2 with Ts = 1/30.72 MHz
/// and c rounded to 3e8 m/s.
pub const TA_STEP_M: f64 = 78.125;

/// Reported instead of `-inf` when the channel gain vanishes.
pub const RSRP_FLOOR_DBM: f64 = -200.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadioError {
    #[error("{needed} sequence bits needed, only {available} supplied")]
    InsufficientBits { needed: usize, available: usize },
    #[error("invalid RS configuration: {0}")]
    InvalidRs(String),
    #[error("invalid channel parameters: {0}")]
    InvalidChannel(String),
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Length-31 Gold sequence generator `c(n)` with the standard 1600-sample
/// fast-forward.
///
/// Bit `i` of each register holds `x(n + i)`.
#[derive(Debug, Clone)]
pub struct GoldSequence {
    x1: u32,
    x2: u32,
}

impl GoldSequence {
    pub const FAST_FORWARD: usize = 1600;
    const MASK: u32 = 0x7fff_ffff;

    pub fn new(c_init: u32) -> Self {
        let mut g = Self {
            x1: 1,
            x2: c_init & Self::MASK,
        };
        for _ in 0..Self::FAST_FORWARD {
            g.step();
        }
        g
    }

    fn step(&mut self) {
        let f1 = (self.x1 ^ (self.x1 >> 3)) & 1;
        let f2 = (self.x2 ^ (self.x2 >> 1) ^ (self.x2 >> 2) ^ (self.x2 >> 3)) & 1;
        self.x1 = (self.x1 >> 1) | (f1 << 30);
        self.x2 = (self.x2 >> 1) | (f2 << 30);
    }

    pub fn take_bits(&mut self, n: usize) -> Vec<u8> {
        self.by_ref().take(n).collect()
    }
}

impl Iterator for GoldSequence {
    type Item = u8;

    fn next(&mut self) -> Option<u8> {
        let bit = ((self.x1 ^ self.x2) & 1) as u8;
        self.step();
        Some(bit)
    }
}

/// Cell-specific RS scrambling seed for slot `slot`, OFDM symbol `symbol`.
pub fn rs_c_init(slot: u32, symbol: u32, pci: u32, normal_cp: bool) -> u32 {
    (1 << 10) * (7 * (slot + 1) + symbol + 1) * (2 * pci + 1) + 2 * pci + u32::from(normal_cp)
}

/// QPSK reference symbols `((1−2c(2m)) + j(1−2c(2m+1)))/√2`.
pub fn rs_waveform(bits: &[u8], count: usize) -> Result<Vec<Complex64>, RadioError> {
    let needed = 2 * count;
    if bits.len() < needed {
        return Err(RadioError::InsufficientBits {
            needed,
            available: bits.len(),
        });
    }
    let level = |b: u8| FRAC_1_SQRT_2 * (1.0 - 2.0 * f64::from(b & 1));
    Ok(bits[..needed]
        .chunks_exact(2)
        .map(|p| Complex64::new(level(p[0]), level(p[1])))
        .collect())
}

/// Cell-specific reference-signal settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RsConfig {
    pub p_rs_dbm: f64,
    pub p_rs_min_dbm: f64,
    pub p_rs_max_dbm: f64,
    pub pci: u32,
    /// PCI reuse factor `n`; cells sharing `pci mod n` interfere on RS.
    pub reuse: u32,
}

impl Default for RsConfig {
    fn default() -> Self {
        Self {
            p_rs_dbm: 15.0,
            p_rs_min_dbm: 0.0,
            p_rs_max_dbm: 21.0,
            pci: 0,
            reuse: 3,
        }
    }
}

impl RsConfig {
    pub fn validate(&self) -> Result<(), RadioError> {
        if !(self.p_rs_min_dbm <= self.p_rs_dbm && self.p_rs_dbm <= self.p_rs_max_dbm) {
            return Err(RadioError::InvalidRs(format!(
                "P_RS {} dBm outside [{}, {}]",
                self.p_rs_dbm, self.p_rs_min_dbm, self.p_rs_max_dbm
            )));
        }
        Ok(())
    }

    pub fn interferes_with(&self, other: &RsConfig) -> bool {
        shares_rs_shift(self.pci, other.pci, self.reuse)
    }
}

/// Log-distance macro pathloss with a free-space floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathlossModel {
    pub intercept_db: f64,
    /// dB per decade of distance in km.
    pub slope_db: f64,
    pub carrier_hz: f64,
    pub min_distance_m: f64,
}

impl Default for PathlossModel {
    fn default() -> Self {
        Self {
            intercept_db: 128.1,
            slope_db: 37.6,
            carrier_hz: 1842.5e6,
            min_distance_m: 10.0,
        }
    }
}

impl PathlossModel {
    pub fn free_space_db(distance_m: f64, carrier_hz: f64) -> f64 {
        20.0 * (4.0 * PI * distance_m * carrier_hz / SPEED_OF_LIGHT).log10()
    }

    pub fn loss_db(&self, distance_m: f64) -> f64 {
        let d = distance_m.max(self.min_distance_m);
        let model = self.intercept_db + self.slope_db * (d / 1000.0).log10();
        model.max(Self::free_space_db(d, self.carrier_hz))
    }
}

/// Sector antenna with parabolic horizontal and vertical cuts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SectorAntenna {
    pub max_gain_dbi: f64,
    pub horizontal_beamwidth_deg: f64,
    pub front_to_back_db: f64,
    pub vertical_beamwidth_deg: f64,
    pub vertical_sidelobe_db: f64,
}

impl Default for SectorAntenna {
    fn default() -> Self {
        Self {
            max_gain_dbi: 15.0,
            horizontal_beamwidth_deg: 65.0,
            front_to_back_db: 25.0,
            vertical_beamwidth_deg: 10.0,
            vertical_sidelobe_db: 20.0,
        }
    }
}

impl SectorAntenna {
    pub fn horizontal_attenuation_db(&self, offset_deg: f64) -> f64 {
        let r = offset_deg / self.horizontal_beamwidth_deg;
        (12.0 * r * r).min(self.front_to_back_db)
    }

    pub fn vertical_attenuation_db(&self, elevation_deg: f64, tilt_deg: f64) -> f64 {
        let r = (elevation_deg - tilt_deg) / self.vertical_beamwidth_deg;
        (12.0 * r * r).min(self.vertical_sidelobe_db)
    }

    /// Gain toward a point `offset_deg` off boresight seen `elevation_deg`
    /// below the horizon.
    pub fn gain_db(&self, offset_deg: f64, elevation_deg: f64, tilt_deg: f64) -> f64 {
        let att = self.horizontal_attenuation_db(offset_deg) + self.vertical_attenuation_db(elevation_deg, tilt_deg);
        self.max_gain_dbi - att.min(self.front_to_back_db)
    }
}

/// Depression angle from a BS antenna to a UE at ground distance `distance_m`.
pub fn elevation_deg(distance_m: f64, bs_height_m: f64, ue_height_m: f64) -> f64 {
    (bs_height_m - ue_height_m).atan2(distance_m).to_degrees()
}

/// Link between one cell and one UE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub distance_m: f64,
    pub pathloss_db: f64,
    /// BS antenna gain toward the UE, `G_mc`.
    pub bs_gain_db: f64,
    pub ue_gain_db: f64,
    /// Linear channel power gain `H_mc` (shadowing, fading).
    pub channel_gain: f64,
    /// Receiver noise power σ² over the RS bandwidth.
    pub noise_dbm: f64,
}

impl LinkBudget {
    /// Received power in mW for a transmit power of `tx_dbm`.
    pub fn received_mw(&self, tx_dbm: f64) -> f64 {
        db_to_linear(tx_dbm - self.pathloss_db + self.bs_gain_db + self.ue_gain_db) * self.channel_gain
    }
}

/// RS SINR, linear: serving power over noise plus the listed interferers.
pub fn rs_sinr(serving: &LinkBudget, p_rs_dbm: f64, interferers: &[(LinkBudget, f64)]) -> f64 {
    let signal = serving.received_mw(p_rs_dbm);
    let interference: f64 = interferers.iter().map(|(l, p)| l.received_mw(*p)).sum();
    signal / (db_to_linear(serving.noise_dbm) + interference)
}

/// Whether `other` belongs to `pci`'s RS interferer set under reuse `n`.
pub fn shares_rs_shift(pci: u32, other: u32, reuse: u32) -> bool {
    reuse == 0 || pci % reuse == other % reuse
}

pub fn rsrp_dbm(p_rs_dbm: f64, link: &LinkBudget) -> f64 {
    if !(link.channel_gain > 0.0) {
        return RSRP_FLOOR_DBM;
    }
    let v = p_rs_dbm - link.pathloss_db + link.bs_gain_db + link.ue_gain_db + linear_to_db(link.channel_gain);
    v.max(RSRP_FLOOR_DBM)
}

/// One sub-path of a propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubPath {
    pub aod_deg: f64,
    pub aoa_deg: f64,
    /// Random phase in [0, 2π).
    pub phase_rad: f64,
    /// Linear BS antenna gain toward `aod_deg`.
    pub bs_gain: f64,
    /// Linear UE antenna gain toward `aoa_deg`.
    pub ue_gain: f64,
}

/// One path of the spatial channel model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub path_power: f64,
    /// Realized linear shadow-fading gain.
    pub shadow_gain: f64,
    pub subpaths: Vec<SubPath>,
    pub ue_speed_mps: f64,
    pub ue_direction_deg: f64,
    /// Wavenumber 2π/λ of the carrier, rad/m.
    pub wavenumber: f64,
    /// Signed spacing between consecutive BS elements along the array axis.
    pub bs_element_spacing_m: f64,
    pub ue_element_spacing_m: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), RadioError> {
        if self.subpaths.is_empty() {
            return Err(RadioError::InvalidChannel("at least one sub-path is required".into()));
        }
        if !(self.path_power >= 0.0 && self.shadow_gain >= 0.0) {
            return Err(RadioError::InvalidChannel("powers must be non-negative".into()));
        }
        if self
            .subpaths
            .iter()
            .any(|s| !(0.0..2.0 * PI).contains(&s.phase_rad) || s.bs_gain < 0.0 || s.ue_gain < 0.0)
        {
            return Err(RadioError::InvalidChannel(
                "sub-path phases must lie in [0, 2π) and gains be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Coefficient between BS element `s` and UE element `u` at time `t_s`.
pub fn spatial_channel(p: &ChannelParams, t_s: f64, u: usize, s: usize) -> Complex64 {
    let k = p.wavenumber;
    let d_s = s as f64 * p.bs_element_spacing_m;
    let d_u = u as f64 * p.ue_element_spacing_m;
    let sum: Complex64 = p
        .subpaths
        .iter()
        .map(|sp| {
            let aod = sp.aod_deg.to_radians();
            let aoa = sp.aoa_deg.to_radians();
            let doppler = k * p.ue_speed_mps * (aoa - p.ue_direction_deg.to_radians()).cos() * t_s;
            let phase = k * d_s * aod.sin() + sp.phase_rad + k * d_u * aoa.sin() + doppler;
            Complex64::from_polar((sp.bs_gain * sp.ue_gain).sqrt(), phase)
        })
        .sum();
    sum * (p.path_power * p.shadow_gain / p.subpaths.len() as f64).sqrt()
}

/// A quantized timing advance and the range it reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingAdvance {
    pub samples: u32,
    pub range_m: f64,
}

pub fn measure_ta(distance_m: f64) -> TimingAdvance {
    let samples = (distance_m.max(0.0) / TA_STEP_M).round() as u32;
    TimingAdvance {
        samples,
        range_m: f64::from(samples) * TA_STEP_M,
    }
}
