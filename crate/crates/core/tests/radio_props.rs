use std::collections::HashSet;
use std::f64::consts::PI;

use aco_core::radio::{
    measure_ta, rs_sinr, rs_waveform, rsrp_dbm, spatial_channel, ChannelParams, GoldSequence, LinkBudget,
    PathlossModel, SubPath,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn link(pathloss_db: f64) -> LinkBudget {
    LinkBudget {
        distance_m: 300.0,
        pathloss_db,
        bs_gain_db: 12.0,
        ue_gain_db: 0.0,
        channel_gain: 1.0,
        noise_dbm: -125.2,
    }
}

fn channel(rng: &mut ChaCha8Rng, subpaths: usize, speed: f64) -> ChannelParams {
    ChannelParams {
        path_power: rng.random_range(0.1..2.0),
        shadow_gain: rng.random_range(0.1..4.0),
        subpaths: (0..subpaths)
            .map(|_| SubPath {
                aod_deg: rng.random_range(-90.0..90.0),
                aoa_deg: rng.random_range(-180.0..180.0),
                phase_rad: rng.random_range(0.0..2.0 * PI),
                bs_gain: rng.random_range(0.1..3.0),
                ue_gain: rng.random_range(0.1..3.0),
            })
            .collect(),
        ue_speed_mps: speed,
        ue_direction_deg: rng.random_range(0.0..360.0),
        wavenumber: 2.0 * PI * 1.8425e9 / 299_792_458.0,
        bs_element_spacing_m: -0.0814,
        ue_element_spacing_m: 0.0814,
    }
}

proptest! {
    #[test]
    fn rs_symbols_have_unit_modulus(c_init in 0u32..(1 << 31)) {
        let bits = GoldSequence::new(c_init).take_bits(2000);
        for z in rs_waveform(&bits, 1000).unwrap() {
            prop_assert!((z.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn ta_error_is_at_most_half_a_sample(d in 0.0f64..100_000.0) {
        let ta = measure_ta(d);
        prop_assert!((ta.range_m - d).abs() <= 39.0625);
        prop_assert_eq!(ta.samples, (d / 78.125).round() as u32);
    }

    #[test]
    fn adding_an_interferer_lowers_sinr(
        serving in 70.0f64..140.0,
        others in prop::collection::vec((70.0f64..160.0, 0.0f64..20.0), 0..6),
        extra in (70.0f64..160.0, 0.0f64..20.0),
    ) {
        let mut interferers: Vec<(LinkBudget, f64)> = others.iter().map(|&(pl, p)| (link(pl), p)).collect();
        let before = rs_sinr(&link(serving), 15.0, &interferers);
        interferers.push((link(extra.0), extra.1));
        prop_assert!(rs_sinr(&link(serving), 15.0, &interferers) < before);
    }

    #[test]
    fn raising_rs_power_raises_sinr(serving in 70.0f64..140.0, p in 0.0f64..18.0, step in 0.01f64..6.0) {
        let interferers = [(link(110.0), 15.0), (link(125.0), 15.0)];
        prop_assert!(rs_sinr(&link(serving), p + step, &interferers) > rs_sinr(&link(serving), p, &interferers));
    }

    #[test]
    fn static_ue_channel_is_time_invariant(seed in any::<u64>(), t1 in 0.0f64..10.0, t2 in 0.0f64..10.0, s in 0usize..8, u in 0usize..2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = channel(&mut rng, 20, 0.0);
        prop_assert_eq!(spatial_channel(&p, t1, u, s), spatial_channel(&p, t2, u, s));
    }

    #[test]
    fn channel_obeys_triangle_bound(seed in any::<u64>(), t in 0.0f64..1.0, n in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = channel(&mut rng, n, 0.83);
        let bound = (p.path_power * p.shadow_gain / n as f64).sqrt()
            * p.subpaths.iter().map(|sp| (sp.bs_gain * sp.ue_gain).sqrt()).sum::<f64>();
        prop_assert!(spatial_channel(&p, t, 1, 3).norm() <= bound * (1.0 + 1e-12));
    }
}

#[test]
fn constellation_hits_all_four_points() {
    let bits = GoldSequence::new(0x1234_5678 & 0x7fff_ffff).take_bits(2000);
    let points: HashSet<(bool, bool)> = rs_waveform(&bits, 1000)
        .unwrap()
        .iter()
        .map(|z| (z.re > 0.0, z.im > 0.0))
        .collect();
    assert_eq!(points.len(), 4);
}

#[test]
fn mean_channel_power_matches_path_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let draws = 10_000;
    let (mut empirical, mut expected) = (0.0, 0.0);
    for _ in 0..draws {
        let mut p = channel(&mut rng, 20, 0.83);
        p.path_power = 1.0;
        p.shadow_gain = 2.0;
        empirical += spatial_channel(&p, 0.0, 0, 2).norm_sqr();
        let mean_gain: f64 = p.subpaths.iter().map(|s| s.bs_gain * s.ue_gain).sum::<f64>() / 20.0;
        expected += 2.0 * mean_gain;
    }
    let ratio = empirical / expected;
    assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn doubling_distance_costs_eleven_point_three_db() {
    let model = PathlossModel::default();
    for d in [200.0, 500.0, 1500.0] {
        let drop = rsrp_dbm(15.0, &link(model.loss_db(d))) - rsrp_dbm(15.0, &link(model.loss_db(2.0 * d)));
        assert!((drop - 37.6 * 2f64.log10()).abs() < 1e-9, "{drop}");
    }
}
