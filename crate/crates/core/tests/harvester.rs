use proptest::prelude::*;
use rfid_harvest_core::harvester::{
    charge_time, charge_time_for_inflow, energy_window, DcOutput, Harvester,
};
use rfid_harvest_core::{
    ChargePumpParams, Frequency, HarvesterState, Phase, PowerLevel, PowerMode, RectifierModel,
    StorageCapacitor,
};

fn dc_at(dbm: f64) -> DcOutput {
    RectifierModel::default().rectified_dc(PowerLevel::dbm(dbm), Frequency::from_mhz(866.5).unwrap())
}

#[test]
fn window_and_charge_time() {
    let p = ChargePumpParams::default();
    let c = StorageCapacitor::default();
    let oracle = 0.5 * 10e-6 * (2.4f64.powi(2) - 1.85f64.powi(2));
    assert!((energy_window(&p, &c) - oracle).abs() < 1e-15);
    assert!((energy_window(&p, &c) * 1e6 - 11.69).abs() <= 0.01);
    let t = charge_time_for_inflow(5e-6, &p, &c).unwrap();
    assert!((t - oracle / 5e-6).abs() < 1e-12);
    assert!((t - 2.34).abs() <= 1e-3 + 0.0025);
    assert_eq!(charge_time(10e-6, &p, &c).unwrap(), t);
}

#[test]
fn stepped_charge_matches_closed_form() {
    // A pump ceiling of 5 µW gives the 5 µW effective inflow directly.
    let params = ChargePumpParams {
        max_output_w: 5e-6,
        ..ChargePumpParams::default()
    };
    let h = Harvester::new(params, &RectifierModel::default());
    let dc = dc_at(0.0);
    let dt = 1e-3;
    let start = StorageCapacitor::new(10e-6, params.v_low);
    let mut s = HarvesterState {
        phase: Phase::Charging,
        cap: start,
        mode: PowerMode::Boosted,
    };
    let mut steps = 0u32;
    while s.phase != Phase::Supplying {
        s = h.step(s, dc, 0.0, dt).unwrap().0;
        steps += 1;
    }
    let expected = charge_time_for_inflow(5e-6, &params, &start).unwrap();
    assert!((steps as f64 * dt - expected).abs() <= dt, "{steps}");
}

#[test]
fn weak_field_never_pumps() {
    let h = Harvester::new(ChargePumpParams::default(), &RectifierModel::default());
    let mut s = HarvesterState::new(PowerMode::Boosted, StorageCapacitor::default());
    for _ in 0..1000 {
        let (n, e) = h.step(s, dc_at(-14.5), 0.0, 1e-3).unwrap();
        assert_eq!(e.stored_j, 0.0);
        s = n;
    }
    assert_eq!(s.phase, Phase::Idle);
}

#[test]
fn invalid_step_rejected() {
    let h = Harvester::new(ChargePumpParams::default(), &RectifierModel::default());
    let s = HarvesterState::new(PowerMode::Boosted, StorageCapacitor::default());
    assert!(h.step(s, dc_at(0.0), 0.0, 0.0).is_err());
    assert!(h.step(s, dc_at(0.0), -1.0, 1e-3).is_err());
}

fn step_inputs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    // (received dBm, load µW)
    proptest::collection::vec((-20.0f64..5.0, 0.0f64..2000.0), 1..3000)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boosted_invariants(inputs in step_inputs(), v0 in 0.0f64..2.4) {
        let params = ChargePumpParams::default();
        let h = Harvester::new(params, &RectifierModel::default());
        let dt = 1e-3;
        let mut s = HarvesterState::new(PowerMode::Boosted, StorageCapacitor::new(10e-6, v0));
        let (mut harvested, mut stored, mut delivered) = (0.0, 0.0, 0.0);
        let e0 = s.cap.energy_j();
        for (dbm, load_uw) in inputs {
            let dc = dc_at(dbm);
            let (n, e) = h.step(s, dc, load_uw * 1e-6, dt).unwrap();
            // Per-step bookkeeping.
            prop_assert!(e.stored_j <= params.pump_efficiency * e.harvested_j + 1e-18);
            prop_assert!(e.stored_j <= params.max_output_w * dt + 1e-18);
            prop_assert!((n.cap.energy_j() - (s.cap.energy_j() + e.stored_j - e.delivered_j)).abs() < 1e-15);
            // Hysteresis: the load is only connected between v_high and v_low.
            if s.phase != Phase::Supplying && n.phase == Phase::Supplying {
                prop_assert!(n.cap.voltage() >= params.v_high);
            }
            if s.phase == Phase::Supplying && n.phase != Phase::Supplying {
                prop_assert!((n.cap.voltage() - params.v_low).abs() < 1e-12);
            }
            if n.phase == Phase::Supplying {
                prop_assert!(n.cap.voltage() >= params.v_low - 1e-12);
            }
            if s.phase != Phase::Supplying {
                prop_assert_eq!(e.delivered_j, 0.0);
            }
            // Overshoot past v_high is bounded by one step of inflow.
            let ceiling = s.cap.energy_at(params.v_high).max(s.cap.energy_j()) + params.max_output_w * dt;
            prop_assert!(n.cap.energy_j() <= ceiling + 1e-15);
            harvested += e.harvested_j;
            stored += e.stored_j;
            delivered += e.delivered_j;
            s = n;
        }
        let gain = s.cap.energy_j() - e0;
        prop_assert!(delivered + gain <= harvested + 1e-12);
        prop_assert!((stored - delivered - gain).abs() < 1e-12);
    }

    #[test]
    fn bypass_serves_at_most_rectified_power(inputs in step_inputs()) {
        let h = Harvester::new(ChargePumpParams::default(), &RectifierModel::default());
        let mut s = HarvesterState::new(PowerMode::Bypass, StorageCapacitor::default());
        for (dbm, load_uw) in inputs {
            let (n, e) = h.step(s, dc_at(dbm), load_uw * 1e-6, 1e-3).unwrap();
            prop_assert!(e.delivered_j <= e.harvested_j);
            if dbm > -9.0 + 1e-9 {
                prop_assert_eq!(n.phase, Phase::Supplying);
            } else if dbm < -9.0 - 1e-9 {
                prop_assert_eq!(n.phase, Phase::Idle);
                prop_assert_eq!(e.delivered_j, 0.0);
            }
            s = n;
        }
    }

    #[test]
    fn step_is_deterministic(inputs in step_inputs()) {
        let h = Harvester::new(ChargePumpParams::default(), &RectifierModel::default());
        let run = || {
            let mut s = HarvesterState::new(PowerMode::Boosted, StorageCapacitor::default());
            let mut trace = Vec::new();
            for &(dbm, load_uw) in &inputs {
                let (n, e) = h.step(s, dc_at(dbm), load_uw * 1e-6, 1e-3).unwrap();
                trace.push((n, e));
                s = n;
            }
            trace
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn charge_time_scales_inversely(p in 1e-7f64..1e-3, k in 1.1f64..10.0) {
        let params = ChargePumpParams::default();
        let c = StorageCapacitor::default();
        let a = charge_time(p, &params, &c).unwrap();
        let b = charge_time(p * k, &params, &c).unwrap();
        prop_assert!((a / b - k).abs() < 1e-9);
    }
}
