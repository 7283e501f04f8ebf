use proptest::prelude::*;
use rectenna_core::pmic::{
    end_to_end_point, simulate, step, BoostEfficiency, ColdStartOptions, Harvester, HarvesterCurve, Mode, PmicConfig,
    PmicState,
};
use rectenna_core::PowerLevel;

/// Triangle-ish curve peaking at half of `voc`.
fn curve(voc: f64, peak: f64) -> HarvesterCurve {
    HarvesterCurve { open_circuit_voltage: voc, points: vec![(0.5 * voc, peak)] }
}

fn config(eta: f64, c: f64, iq: f64, ireg: f64, inrush: f64) -> PmicConfig {
    PmicConfig {
        boost_efficiency: BoostEfficiency::Constant(eta),
        storage_capacitance: c,
        ic_quiescent_current: iq,
        regulator_quiescent_current: ireg,
        inrush_charge: inrush,
        ..PmicConfig::default()
    }
}

fn any_config() -> impl Strategy<Value = PmicConfig> {
    (0.3f64..1.0, 10e-6f64..200e-6, 0.0f64..3e-6, 0.0f64..2e-6, 0.0f64..80e-6)
        .prop_map(|(eta, c, iq, ireg, inrush)| config(eta, c, iq, ireg, inrush))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stored_energy_never_outruns_the_harvest(
        cfg in any_config(),
        voc in 0.3f64..3.0,
        peak in 1e-6f64..2e-3,
        load in 0.0f64..1e-4,
    ) {
        let h = curve(voc, peak);
        let p_op = h.power_at(cfg.mppt_fraction * voc);
        let eta = match cfg.boost_efficiency { BoostEfficiency::Constant(e) => e, _ => unreachable!() };
        let dt = 5e-3;
        let mut s = PmicState::default();
        let mut budget = 0.0;
        for _ in 0..20_000 {
            s = step(&s, &cfg, &h, load, dt).unwrap();
            budget += p_op * eta * dt;
            let stored = 0.5 * cfg.storage_capacitance * s.v_storage * s.v_storage;
            prop_assert!(stored <= budget * (1.0 + 1e-12) + 1e-18, "{stored} > {budget}");
            prop_assert!(s.v_storage >= 0.0);
            prop_assert!(s.v_storage <= cfg.v_overcharge + 1e-12);
        }
    }

    #[test]
    fn output_only_runs_in_allowed_modes(cfg in any_config(), peak in 5e-6f64..1e-3) {
        let opts = ColdStartOptions { duration: 60.0, dt: 2e-3, record_interval: 0.05, load_current: 0.0 };
        let trace = simulate(&cfg, &curve(1.0, peak), opts).unwrap();
        for s in &trace.samples {
            if s.v_out_active {
                prop_assert!(matches!(s.mode, Mode::Normal | Mode::OverchargeProtect), "{:?}", s.mode);
            }
        }
        for w in trace.samples.windows(2) {
            prop_assert!(w[1].time > w[0].time);
        }
        for w in trace.milestones.windows(2) {
            prop_assert!(w[1].time >= w[0].time);
        }
    }

    #[test]
    fn lockout_holds_until_the_reenable_threshold(cfg in any_config(), peak in 5e-6f64..2e-4, load in 0.0f64..5e-5) {
        let h = curve(1.0, peak);
        let mut s = PmicState::default();
        let mut locked = false;
        for _ in 0..40_000 {
            let next = step(&s, &cfg, &h, load, 2e-3).unwrap();
            if next.mode == Mode::UvloLockout {
                locked = true;
            }
            if locked && next.v_out_active {
                // Switched back on: storage must have been within one step's
                // harvest of the threshold before the inrush came out of it.
                prop_assert_eq!(s.mode, Mode::UvloLockout);
                let one_step = 2.0 * peak * 2e-3 / (cfg.storage_capacitance * cfg.v_uvlo);
                prop_assert!(s.v_storage >= cfg.reenable_voltage() - one_step, "{}", s.v_storage);
                prop_assert!(cfg.reenable_voltage() > cfg.v_uvlo);
                locked = false;
            } else if locked {
                prop_assert!(!next.v_out_active);
            }
            s = next;
        }
    }

    #[test]
    fn harvested_current_rises_with_input_power(cfg in any_config(), a in -30.0f64..10.0, b in -30.0f64..10.0) {
        // A matched linear source: Voc and peak power both scale with drive.
        let point = |dbm: f64| {
            let p = PowerLevel::from_dbm(dbm).unwrap();
            let voc = (8.0 * 1e3 * p.watts()).sqrt();
            end_to_end_point(&cfg, &curve(voc, p.watts()), p, 3.5)
        };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(point(lo).storage_current <= point(hi).storage_current);
    }
}

#[test]
fn identical_runs_give_identical_traces() {
    let cfg = config(0.8, 90e-6, 1.8e-6, 0.6e-6, 55e-6);
    let h = curve(0.9, 40e-6);
    let opts = ColdStartOptions { duration: 100.0, ..ColdStartOptions::default() };
    let a = simulate(&cfg, &h, opts).unwrap();
    let b = simulate(&cfg, &h, opts).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.milestones, b.milestones);
}

#[test]
fn weak_input_never_wakes() {
    let cfg = PmicConfig::default();
    let opts = ColdStartOptions { duration: 30.0, ..ColdStartOptions::default() };
    for h in [curve(1.0, 1e-6), curve(0.3, 1e-3)] {
        let trace = simulate(&cfg, &h, opts).unwrap();
        assert!(trace.milestones.is_empty());
        assert!(trace.samples.iter().all(|s| s.mode == Mode::Asleep && s.v_storage == 0.0));
    }
}

#[test]
fn overcharge_clamps_storage() {
    let cfg = PmicConfig::default();
    let h = curve(1.0, 1e-3);
    let mut s =
        PmicState { mode: Mode::Normal, v_storage: cfg.v_overcharge, v_out_active: true, ..PmicState::default() };
    for _ in 0..1000 {
        s = step(&s, &cfg, &h, 0.0, 1e-3).unwrap();
    }
    assert_eq!(s.mode, Mode::OverchargeProtect);
    assert_eq!(s.v_storage, cfg.v_overcharge);
}

#[test]
fn load_step_trips_the_lockout() {
    let cfg = PmicConfig::default();
    let h = curve(1.0, 10e-6);
    let mut s =
        PmicState { mode: Mode::Normal, v_storage: 2.5, v_out_active: true, v_rail: 1.2, ..PmicState::default() };
    while s.mode == Mode::Normal {
        s = step(&s, &cfg, &h, 5e-3, 1e-3).unwrap();
    }
    assert_eq!(s.mode, Mode::UvloLockout);
    assert!(!s.v_out_active);
    assert!(s.v_storage < cfg.v_uvlo);
}
