use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rectenna_core::matching::{build_reference_network, QConfig, REFERENCE_C3_F};
use rectenna_core::rectifier::{
    efficiency_sweep, fundamental, fundamental_input_impedance, solve_resolved, solve_steady_state, CapacitanceModel,
    DiodeModel, FrontEnd, LoadMode, RectifierCircuit, SourceSpec, Topology, DEFAULT_MAX_PERIODS,
    DEFAULT_STEPS_PER_PERIOD, THERMAL_VOLTAGE_300K,
};
use rectenna_core::{ComplexImpedance, Frequency, LumpedElement, Placement, PowerLevel};

fn diode() -> DiodeModel {
    DiodeModel {
        saturation_current: 3.4e-7,
        ideality_factor: 1.1,
        series_resistance: 2.7,
        junction_capacitance_zero_bias: 0.34e-12,
        thermal_voltage: THERMAL_VOLTAGE_300K,
        junction_potential: 0.3,
        grading_coefficient: 0.5,
        capacitance_model: CapacitanceModel::Constant,
    }
}

fn q() -> QConfig {
    QConfig { dc_block: Some(150.0), shunt_capacitor: Some(300.0), series_inductor: Some(50.0) }
}

fn dbm(x: f64) -> PowerLevel {
    PowerLevel::from_dbm(x).unwrap()
}

fn reference(p_dbm: f64, load: f64) -> RectifierCircuit {
    RectifierCircuit {
        front_end: FrontEnd::Matched(build_reference_network(q())),
        diode: diode(),
        output_capacitor: LumpedElement::capacitor(REFERENCE_C3_F, Placement::Shunt).unwrap(),
        load_resistance: load,
        source: SourceSpec::from_available_power(
            dbm(p_dbm),
            ComplexImpedance::resistive(50.0),
            Frequency::from_mhz(915.0).unwrap(),
        ),
        topology: Topology::VoltageDoubler,
    }
}

fn random_circuit(rng: &mut ChaCha8Rng) -> RectifierCircuit {
    let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| (rng.gen_range(lo.ln()..hi.ln())).exp();
    let d = DiodeModel {
        saturation_current: log_uniform(rng, 1e-9, 1e-5),
        ideality_factor: rng.gen_range(1.0..1.5),
        series_resistance: rng.gen_range(0.5..20.0),
        junction_capacitance_zero_bias: rng.gen_range(0.05e-12..1.0e-12),
        thermal_voltage: THERMAL_VOLTAGE_300K,
        junction_potential: rng.gen_range(0.2..0.6),
        grading_coefficient: rng.gen_range(0.3..0.6),
        capacitance_model: if rng.gen_bool(0.5) { CapacitanceModel::Constant } else { CapacitanceModel::BiasDependent },
    };
    let front_end = match rng.gen_range(0..3) {
        0 => FrontEnd::Matched(build_reference_network(QConfig {
            dc_block: Some(rng.gen_range(50.0..500.0)),
            shunt_capacitor: Some(rng.gen_range(50.0..500.0)),
            series_inductor: Some(rng.gen_range(20.0..100.0)),
        })),
        1 => FrontEnd::Matched(build_reference_network(QConfig::default())),
        _ => FrontEnd::Coupled { capacitance: log_uniform(rng, 5e-12, 100e-12) },
    };
    RectifierCircuit {
        front_end,
        diode: d,
        output_capacitor: LumpedElement::capacitor(log_uniform(rng, 1e-12, 100e-12), Placement::Shunt).unwrap(),
        load_resistance: log_uniform(rng, 100.0, 1e6),
        source: SourceSpec::from_available_power(
            dbm(rng.gen_range(-25.0..10.0)),
            ComplexImpedance::resistive(50.0),
            Frequency::from_mhz(rng.gen_range(800.0..1000.0)).unwrap(),
        ),
        topology: if rng.gen_bool(0.8) { Topology::VoltageDoubler } else { Topology::HalfWave },
    }
}

#[test]
fn energy_balances_on_random_circuits() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let c = random_circuit(&mut rng);
        let s = solve_resolved(&c).unwrap_or_else(|e| panic!("case {k}: {e} for {c:?}"));
        assert!(s.converged, "case {k} did not converge: {c:?}");
        let r = s.energy.relative_residual();
        assert!(r <= 1e-4, "case {k}: residual {r:e} for {c:?}");
        assert!((0.0..=1.0).contains(&s.efficiency), "case {k}: efficiency {}", s.efficiency);
        if let Some(z) = s.fundamental_input_impedance {
            assert!(z.resistance >= 0.0, "case {k}: {z}");
        }
        worst = worst.max(r);
    }
    println!("worst energy residual over 100 circuits: {worst:e}");
}

#[test]
fn halving_the_step_barely_moves_the_output() {
    for (p, load) in [(-15.0, 20e3), (-5.0, 5e3), (0.0, 3e3), (5.0, 2e3)] {
        let c = reference(p, load);
        let coarse = solve_steady_state(&c, DEFAULT_STEPS_PER_PERIOD, DEFAULT_MAX_PERIODS).unwrap();
        let fine = solve_steady_state(&c, 2 * DEFAULT_STEPS_PER_PERIOD, DEFAULT_MAX_PERIODS).unwrap();
        let change = (coarse.dc_output_voltage / fine.dc_output_voltage - 1.0).abs();
        assert!(change <= 2e-3, "{p} dBm: {change:e}");
    }
}

#[test]
fn more_periods_do_not_change_a_converged_answer() {
    let c = reference(-5.0, 8e3);
    let a = solve_steady_state(&c, DEFAULT_STEPS_PER_PERIOD, 100).unwrap();
    let b = solve_steady_state(&c, DEFAULT_STEPS_PER_PERIOD, 200).unwrap();
    assert!(a.converged && b.converged);
    let vmax = a.node_waveforms.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a
        .node_waveforms
        .iter()
        .flatten()
        .zip(b.node_waveforms.iter().flatten())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(diff / vmax <= 1e-6);
}

/// A diode with a huge saturation current is a resistor of `n Vt / Is` in
/// series with `Rs`, so the half-wave circuit is a linear RC divider.
#[test]
fn shorted_diode_matches_linear_ac_analysis() {
    let mut d = diode();
    d.saturation_current = 10.0;
    d.junction_capacitance_zero_bias = 0.0;
    let f = Frequency::from_mhz(915.0).unwrap();
    let (rs, rl, cl) = (50.0, 200.0, 1e-12);
    let c = RectifierCircuit {
        front_end: FrontEnd::Direct,
        diode: d,
        output_capacitor: LumpedElement::capacitor(cl, Placement::Shunt).unwrap(),
        load_resistance: rl,
        source: SourceSpec { amplitude: 0.01, impedance: ComplexImpedance::resistive(rs), frequency: f },
        topology: Topology::HalfWave,
    };
    let s = solve_steady_state(&c, 1024, DEFAULT_MAX_PERIODS).unwrap();
    assert!(s.converged);

    let w = f.omega();
    let r_diode = d.series_resistance + d.ideality_factor * d.thermal_voltage / d.saturation_current;
    let z_load = Complex64::new(rl, 0.0) / Complex64::new(1.0, w * rl * cl);
    let z_in = z_load + r_diode;
    let v_out = Complex64::new(c.source.amplitude, 0.0) * z_load / (z_in + rs);

    let zin = fundamental_input_impedance(&s).unwrap().as_complex();
    assert!((zin - z_in).norm() / z_in.norm() < 1e-3, "{zin} vs {z_in}");
    let time: Vec<f64> = (0..s.node(s.output_node).len()).map(|k| k as f64 * f.period() / 1024.0).collect();
    let out = fundamental(s.node(s.output_node), &time, w);
    assert!((out.norm() - v_out.norm()).abs() / v_out.norm() < 1e-3, "{} vs {}", out.norm(), v_out.norm());
    assert!(s.dc_output_voltage.abs() < 1e-3 * v_out.norm());
}

fn near_ideal_diode() -> DiodeModel {
    DiodeModel {
        saturation_current: 1e-9,
        ideality_factor: 1.0,
        series_resistance: 0.0,
        // A femtofarad keeps the conduction pulse wide enough to resolve.
        junction_capacitance_zero_bias: 1e-15,
        thermal_voltage: 2e-3,
        ..diode()
    }
}

fn limit_circuit(topology: Topology, front_end: FrontEnd) -> RectifierCircuit {
    RectifierCircuit {
        front_end,
        diode: near_ideal_diode(),
        output_capacitor: LumpedElement::capacitor(1e-9, Placement::Shunt).unwrap(),
        load_resistance: 1e6,
        source: SourceSpec {
            amplitude: 2.0,
            impedance: ComplexImpedance::resistive(50.0),
            frequency: Frequency::from_mhz(915.0).unwrap(),
        },
        topology,
    }
}

#[test]
fn peak_detector_reaches_the_source_peak() {
    let s = solve_resolved(&limit_circuit(Topology::HalfWave, FrontEnd::Direct)).unwrap();
    assert!((s.dc_output_voltage / 2.0 - 1.0).abs() < 0.02, "{}", s.dc_output_voltage);
}

#[test]
fn doubler_reaches_twice_the_source_peak() {
    let s = solve_resolved(&limit_circuit(Topology::VoltageDoubler, FrontEnd::Coupled { capacitance: 1e-9 })).unwrap();
    assert!((s.dc_output_voltage / 4.0 - 1.0).abs() < 0.02, "{}", s.dc_output_voltage);
}

#[test]
fn efficiency_vanishes_with_the_drive() {
    let eff: Vec<f64> =
        [-60.0, -50.0, -40.0].iter().map(|&p| solve_resolved(&reference(p, 20e3)).unwrap().efficiency).collect();
    assert!(eff[0] < eff[1] && eff[1] < eff[2], "{eff:?}");
    assert!(eff[0] < 1e-3, "{eff:?}");
}

#[test]
fn input_impedance_depends_on_drive() {
    let z = |p: f64| {
        let s = solve_resolved(&reference(p, 3e3)).unwrap();
        fundamental_input_impedance(&s).unwrap().as_complex()
    };
    let (low, high) = (z(-10.0), z(5.0));
    assert!((low - high).norm() > 1.0, "{low} vs {high}");
}

#[test]
fn fixed_load_sweep_keeps_order_and_bounds() {
    let powers: Vec<PowerLevel> = [-20.0, -10.0, 0.0, 5.0].iter().map(|&p| dbm(p)).collect();
    let out = efficiency_sweep(&reference(0.0, 3e3), &powers, LoadMode::Fixed).unwrap();
    assert_eq!(out.len(), powers.len());
    for ((p, r), q) in out.iter().zip(&powers) {
        assert_eq!(p, q);
        let e = r.as_ref().unwrap().efficiency;
        assert!((0.0..=1.0).contains(&e));
    }
    let effs: Vec<f64> = out.iter().map(|(_, r)| r.as_ref().unwrap().efficiency).collect();
    assert!(effs[0] < effs[2]);
}
