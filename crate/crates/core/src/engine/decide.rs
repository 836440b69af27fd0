use serde::{Deserialize, Serialize};

use super::{
    Action, ActionKind, ActionWindow, Cause, CellState, CellWindowStats, Classification, EngineError, Gate,
    GateReason, NoOpReason, Thresholds, TiltDirection, MAX_ROTATION_DEG,
};
use crate::array::RotationDirection;
use crate::geometry::AggregatedMap;

/// Absorbs float noise so an exact whole-degree angle is not floored down.
const FLOOR_SLACK_DEG: f64 = 1e-9;

pub fn gate(stats: &CellWindowStats, th: &Thresholds) -> Gate {
    let Some(probe) = stats.rsrp_probe_dbm else {
        return Gate::Gated(GateReason::NoReports);
    };
    if probe > th.tau_rsrp_dbm {
        Gate::Gated(GateReason::CoverageAdequate)
    } else if stats.traffic_gb < th.tau_traffic_gb {
        Gate::Gated(GateReason::Traffic)
    } else if stats.n_user < th.tau_user {
        Gate::Gated(GateReason::Users)
    } else {
        Gate::Proceed
    }
}

/// A window without reports classifies as `Normal`.
pub fn classify(stats: &CellWindowStats, r_exp_m: f64, th: &Thresholds) -> Classification {
    match stats.r_md_avg_m {
        Some(r) if r > th.partial_d * r_exp_m => Classification::Overshoot,
        Some(r) if r < th.epsilon_cov * r_exp_m => Classification::Limited,
        _ => Classification::Normal,
    }
}

/// Whole-degree tilt step that moves the beam edge by `d_prime_m`.
pub fn tilt_correction(bs_height_m: f64, ue_height_m: f64, d_prime_m: f64) -> Result<u32, EngineError> {
    if !(d_prime_m > 0.0) {
        return Err(EngineError::NonPositiveDistance(d_prime_m));
    }
    let rise = (bs_height_m - ue_height_m).max(0.0);
    let deg = (rise / (2.0 * d_prime_m)).atan().to_degrees();
    Ok((deg + FLOOR_SLACK_DEG).floor() as u32)
}

/// Tilt by the correction for `d_prime_m`, falling back to the matching
/// power step when the tilt cannot move or the correction floors to zero.
fn tilt_or_power(
    state: &CellState,
    direction: TiltDirection,
    d_prime_m: f64,
    th: &Thresholds,
    cause: Cause,
    window_id: u64,
) -> Action {
    let g = &state.geometry;
    let deg = tilt_correction(g.bs_height_m, g.ue_height_m, d_prime_m).unwrap_or(0);
    let kind = match direction {
        TiltDirection::Down if deg >= 1 && state.can_down_tilt() => ActionKind::DownTilt { deg },
        TiltDirection::Up if deg >= 1 && state.can_up_tilt() => ActionKind::UpTilt { deg },
        TiltDirection::Down if state.can_power_down() => ActionKind::PowerDown { db: th.delta_p_db },
        TiltDirection::Up if state.can_power_up() => ActionKind::PowerUp { db: th.delta_p_db },
        _ => ActionKind::NoOp {
            reason: NoOpReason::Exhausted,
        },
    };
    Action::new(kind, Some(cause), window_id)
}

pub fn overshoot_action(state: &CellState, stats: &CellWindowStats, th: &Thresholds, window_id: u64) -> Action {
    let Some(avg) = stats.r_md_avg_m else {
        return Action::noop(NoOpReason::NoData, Some(Cause::Overshoot), window_id);
    };
    tilt_or_power(
        state,
        TiltDirection::Down,
        avg - state.r_exp_m,
        th,
        Cause::Overshoot,
        window_id,
    )
}

pub fn limited_action(
    state: &CellState,
    agg: &AggregatedMap,
    stats: &CellWindowStats,
    th: &Thresholds,
    window_id: u64,
) -> Action {
    let (Some(gamma), Some(near)) = (stats.r_md_gamma_m, stats.near_fraction) else {
        return Action::noop(NoOpReason::NoData, Some(Cause::LimitedMajority), window_id);
    };
    if agg.total_reports() == 0 {
        return Action::noop(NoOpReason::NoData, Some(Cause::LimitedMajority), window_id);
    }
    let r_exp = state.r_exp_m;
    let half = r_exp / 2.0;
    let inner_d = r_exp / 4.0;
    let outer_d = 3.0 * r_exp / 4.0;

    if gamma < half && near >= th.majority_fraction {
        return tilt_or_power(state, TiltDirection::Down, inner_d, th, Cause::LimitedMajority, window_id);
    }
    if gamma >= half && 1.0 - near >= th.majority_fraction {
        return tilt_or_power(state, TiltDirection::Up, outer_d, th, Cause::LimitedMajority, window_id);
    }

    let (mut c_a, mut c_b) = (0usize, 0usize);
    for sa in &agg.sub_areas {
        if !sa.mean_rsrp_dbm.is_some_and(|m| m < th.x_rsrp_dbm) {
            continue;
        }
        let radius = (sa.inner_radius_m + sa.outer_radius_m) / 2.0;
        if radius > half {
            c_a += 1;
        } else if radius < half {
            c_b += 1;
        }
    }
    if c_a > c_b {
        tilt_or_power(state, TiltDirection::Up, outer_d, th, Cause::LimitedOuter, window_id)
    } else {
        tilt_or_power(state, TiltDirection::Down, inner_d, th, Cause::LimitedInner, window_id)
    }
}

pub fn angular_action(stats: &CellWindowStats, th: &Thresholds, window_id: u64) -> Action {
    let [left, right] = stats.aod_halves;
    let total = left + right;
    if total > 0 {
        let (heavy, direction) = if left > right {
            (left, RotationDirection::Negative)
        } else {
            (right, RotationDirection::Positive)
        };
        if heavy as f64 >= th.rotation_majority * total as f64 {
            return Action::new(
                ActionKind::RotateBeam {
                    deg: th.epsilon_rot_deg,
                    direction,
                },
                Some(Cause::AngularSkew),
                window_id,
            );
        }
    }
    Action::noop(NoOpReason::Balanced, None, window_id)
}

/// Replaces a third consecutive same-direction tilt with a power step in
/// the same sense.
pub fn progressive_filter(window: &ActionWindow, proposed: Action, th: &Thresholds) -> Action {
    let Some(dir) = proposed.kind.tilt_direction() else {
        return proposed;
    };
    if window.tilt_streak() != Some(dir) {
        return proposed;
    }
    let kind = match dir {
        TiltDirection::Down => ActionKind::PowerDown { db: th.delta_p_db },
        TiltDirection::Up => ActionKind::PowerUp { db: th.delta_p_db },
    };
    Action { kind, ..proposed }
}

/// Applies `kind`, clamping to the state's bounds. The flag reports whether
/// any clamping happened.
pub fn apply(state: &CellState, kind: &ActionKind) -> (CellState, bool) {
    let mut next = state.clone();
    let clamp = |v: f64, lo: f64, hi: f64| -> (f64, bool) {
        let c = v.clamp(lo, hi);
        (c, c != v)
    };
    let clamped = match *kind {
        ActionKind::DownTilt { deg } | ActionKind::UpTilt { deg } => {
            let sign = if matches!(kind, ActionKind::DownTilt { .. }) { 1.0 } else { -1.0 };
            let (t, c) = clamp(state.tilt_deg + sign * f64::from(deg), state.tilt_min_deg, state.tilt_max_deg);
            next.tilt_deg = t;
            c
        }
        ActionKind::PowerDown { db } | ActionKind::PowerUp { db } => {
            let sign = if matches!(kind, ActionKind::PowerUp { .. }) { 1.0 } else { -1.0 };
            let (p, c) = clamp(state.p_rs_dbm + sign * db, state.p_rs_min_dbm, state.p_rs_max_dbm);
            next.p_rs_dbm = p;
            c
        }
        ActionKind::RotateBeam { deg, direction } => {
            let (r, c) = clamp(
                state.rotation_deg + direction.sign() * deg,
                -MAX_ROTATION_DEG,
                MAX_ROTATION_DEG,
            );
            next.rotation_deg = r;
            c
        }
        ActionKind::NoOp { .. } => false,
    };
    (next, clamped)
}

/// Everything one evaluation of one cell produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub gate: Gate,
    /// Computed even for gated cells.
    pub classification: Classification,
    pub proposed: Action,
    pub applied: Action,
    pub clamped: bool,
    pub state: CellState,
}

/// Gate, classify, select, filter and apply for one cell; records the
/// applied action in `window`.
pub fn run_cell_round(
    state: &CellState,
    window: &mut ActionWindow,
    stats: &CellWindowStats,
    agg: &AggregatedMap,
    th: &Thresholds,
    window_id: u64,
) -> RoundOutcome {
    let gate_result = gate(stats, th);
    let classification = classify(stats, state.r_exp_m, th);
    let proposed = match (gate_result, classification) {
        (Gate::Gated(_), _) => Action::noop(NoOpReason::Gated, Some(Cause::Gated), window_id),
        (Gate::Proceed, Classification::Overshoot) => overshoot_action(state, stats, th, window_id),
        (Gate::Proceed, Classification::Limited) => limited_action(state, agg, stats, th, window_id),
        (Gate::Proceed, Classification::Normal) => angular_action(stats, th, window_id),
    };
    let applied = progressive_filter(window, proposed, th);
    let (next, clamped) = apply(state, &applied.kind);
    window.push(applied);
    RoundOutcome {
        gate: gate_result,
        classification,
        proposed,
        applied,
        clamped,
        state: next,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CellGeometry, Point};

    fn state(tilt: f64) -> CellState {
        CellState {
            cell_id: 0,
            tilt_deg: tilt,
            tilt_min_deg: 0.0,
            tilt_max_deg: 15.0,
            p_rs_dbm: 15.0,
            p_rs_min_dbm: 0.0,
            p_rs_max_dbm: 21.0,
            rotation_deg: 0.0,
            geometry: CellGeometry {
                site: Point::new(0.0, 0.0),
                boresight_deg: 30.0,
                bs_height_m: 30.0,
                ue_height_m: 1.5,
                mech_tilt_deg: 0.0,
                vertical_tilt_deg: tilt.max(1.0),
            },
            r_exp_m: 840.0,
        }
    }

    #[test]
    fn tilt_correction_examples() {
        assert_eq!(tilt_correction(30.0, 1.5, 100.0).unwrap(), 8);
        assert_eq!(tilt_correction(30.0, 1.5, 960.0).unwrap(), 0);
        assert_eq!(tilt_correction(30.0, 30.0, 5.0).unwrap(), 0);
        assert_eq!(tilt_correction(30.0, 1.5, 210.0).unwrap(), 3);
        assert_eq!(tilt_correction(30.0, 1.5, 630.0).unwrap(), 1);
        assert!(tilt_correction(30.0, 1.5, 0.0).is_err());
    }

    #[test]
    fn apply_examples() {
        let (s, c) = apply(&state(4.0), &ActionKind::DownTilt { deg: 2 });
        assert_eq!((s.tilt_deg, c), (6.0, false));
        let (s, c) = apply(&state(14.0), &ActionKind::DownTilt { deg: 8 });
        assert_eq!((s.tilt_deg, c), (15.0, true));
        let (s, _) = apply(&state(4.0), &ActionKind::PowerDown { db: 1.0 });
        assert_eq!(s.p_rs_dbm, 14.0);
        let st = state(4.0);
        let (s, c) = apply(&st, &ActionKind::NoOp { reason: NoOpReason::Gated });
        assert_eq!((s, c), (st, false));
    }

    #[test]
    fn filter_examples() {
        let th = Thresholds::default();
        let dt = Action::new(ActionKind::DownTilt { deg: 2 }, Some(Cause::Overshoot), 0);
        let ut = Action::new(ActionKind::UpTilt { deg: 2 }, Some(Cause::LimitedOuter), 0);
        let mut w = ActionWindow::new(3);
        assert_eq!(progressive_filter(&w, dt, &th), dt);
        w.push(dt);
        w.push(dt);
        assert_eq!(progressive_filter(&w, dt, &th).kind, ActionKind::PowerDown { db: 1.0 });
        assert_eq!(progressive_filter(&w, ut, &th), ut);
        let mut w = ActionWindow::new(3);
        w.push(dt);
        w.push(ut);
        assert_eq!(progressive_filter(&w, dt, &th), dt);
    }
}
