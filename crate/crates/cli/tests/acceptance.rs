//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Uses the shipped example scenarios and preset.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rectenna_cli::commands::DEFAULTS_FILE;
use rectenna_cli::{compute, render, Command, Output, Report, ResultTable, Scenario};
use rectenna_core::matching::{build_reference_network, synthesize_pi, QConfig, REFERENCE_C2_F, REFERENCE_L1_H};
use rectenna_core::mpp::{mpp_ratio_sweep_with, LoadRange, TheveninSource};
use rectenna_core::rectifier::{
    fundamental, fundamental_input_impedance, solve_resolved, solve_steady_state, CapacitanceModel, DiodeModel,
    FrontEnd, RectifierCircuit, SourceSpec, Topology, DEFAULT_MAX_PERIODS, DEFAULT_STEPS_PER_PERIOD,
    THERMAL_VOLTAGE_300K,
};
use rectenna_core::{ComplexImpedance, Frequency, LumpedElement, Placement, PowerLevel};

fn scenario_path(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(file)
}

struct Run {
    command: Command,
    file: &'static str,
    scenario: Scenario,
    report: Report,
    outputs: Vec<Output>,
    elapsed: Duration,
}

fn run(command: Command, file: &'static str) -> Result<Run, String> {
    let scenario = Scenario::load(&scenario_path(file)).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let report = compute(command, &scenario).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let outputs = render(&scenario, &report).map_err(|e| e.to_string())?;
    Ok(Run { command, file, scenario, report, outputs, elapsed })
}

fn dbm(x: f64) -> PowerLevel {
    PowerLevel::from_dbm(x).expect("finite")
}

/// Value of `column` in the row whose `key` column equals `at`.
fn lookup(t: &ResultTable, key: &str, at: f64, column: &str) -> Result<f64, String> {
    let keys = t.numbers(key).ok_or(format!("no column {key}"))?;
    let vals = t.numbers(column).ok_or(format!("no column {column}"))?;
    let i = keys
        .iter()
        .position(|k| k.is_some_and(|k| (k - at).abs() < 1e-9))
        .ok_or(format!("no row with {key} = {at}"))?;
    vals[i].ok_or(format!("row {key} = {at} failed"))
}

type Verdict = Result<String, String>;

fn check(cond: bool, detail: String) -> Verdict {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn matching_signature(s11: &Run) -> Verdict {
    let t = &s11.report.main;
    let f = t.numbers("frequency").ok_or("no frequency column")?;
    let db = t.numbers("s11").ok_or("no s11 column")?;
    let (i, min) = db
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or("empty sweep")?;
    let fmin = f[i].ok_or("bad frequency")?;
    let detail = format!(
        "minimum {min:.2} dB at {:.1} MHz over {} points in {:.1} ms",
        fmin / 1e6,
        t.len(),
        s11.elapsed.as_secs_f64() * 1e3
    );
    check(
        (fmin - 915e6).abs() <= 5e6 && min <= -15.0 && t.len() == 1901 && s11.elapsed < Duration::from_secs(1),
        detail,
    )
}

fn thevenin_oracle() -> Verdict {
    let start = Instant::now();
    let powers: Vec<PowerLevel> = (-20..=10).map(|p| dbm(p as f64)).collect();
    let mut worst_load: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for rs in [50.0, 1e3, 12e3] {
        // Four decades either side, so the optimum is never at an edge.
        let range = LoadRange { min_ohms: rs * 1e-4, max_ohms: rs * 1e4, ..LoadRange::default() };
        let sweep = mpp_ratio_sweep_with(
            |p| TheveninSource { open_circuit_voltage: (8.0 * rs * p.watts()).sqrt(), resistance: rs },
            &powers,
            range,
        )
        .map_err(|e| e.to_string())?;
        for (p, m) in sweep {
            let m = m.map_err(|e| format!("{} dBm: {e}", p.dbm()))?;
            worst_load = worst_load.max((m.optimal_load_resistance / rs - 1.0).abs());
            worst_ratio = worst_ratio.max((m.mpp_ratio - 0.5).abs());
        }
    }
    check(
        worst_load <= 0.01 && worst_ratio <= 0.005,
        format!(
            "worst load error {:.3} %, worst ratio error {:.4} over 3 sources x 31 powers in {:.2} s",
            100.0 * worst_load,
            worst_ratio,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn calibrated_efficiency(e2e: &Run, cal: &Run) -> Verdict {
    let t = &e2e.report.main;
    let peak = lookup(t, "input_power", 3.0, "efficiency")?;
    let low = lookup(t, "input_power", -10.0, "efficiency")?;
    let c = &cal.report.main;
    let names = c.texts("parameter").ok_or("no parameter column")?;
    let values = c.numbers("value").ok_or("no value column")?;
    let floor = names
        .iter()
        .position(|n| n == "energy_positive_floor")
        .and_then(|i| values[i])
        .ok_or("calibration found no energy-positive floor")?;
    // The table must agree with the bisected floor: negative below, positive above.
    let below = lookup(t, "input_power", (floor - 1.0).round(), "efficiency")?;
    let above = lookup(t, "input_power", (floor + 1.0).round(), "efficiency")?;
    check(
        (peak - 0.57).abs() <= 0.05 && low > 0.30 && (floor + 16.0).abs() <= 1.0 && below <= 0.0 && above > 0.0,
        format!(
            "{peak:.4} at 3 dBm, {low:.4} at -10 dBm, energy-positive floor {floor:.2} dBm; sweep {:.1} s, calibration {:.1} s",
            e2e.elapsed.as_secs_f64(),
            cal.elapsed.as_secs_f64()
        ),
    )
}

/// Expected milestone order after the initial cold start.
fn order_ok(names: &[String]) -> bool {
    let rest: Vec<&str> = names.iter().map(String::as_str).skip_while(|n| *n == "cold_start").collect();
    let Some((&"wake_up", mut rest)) = rest.split_first() else { return false };
    let mut lockouts = 0;
    while let ["uvlo_lockout", "normal", tail @ ..] = rest {
        lockouts += 1;
        rest = tail;
    }
    lockouts >= 1 && rest == ["overcharge_protect"]
}

fn cold_start(cs: &Run) -> Verdict {
    let (_, m) = cs.report.extra.iter().find(|(n, _)| *n == "milestones").ok_or("no milestone table")?;
    let names = m.texts("milestone").ok_or("no milestone column")?;
    let times = m.numbers("time").ok_or("no time column")?;
    if m.errors().any(|e| e.is_some()) {
        return Err(format!("simulation aborted: {names:?}"));
    }
    let at = |name: &str, last: bool| {
        let mut it = names.iter().zip(&times).filter(|(n, _)| *n == name).map(|(_, t)| t.unwrap_or(f64::NAN));
        if last {
            it.next_back()
        } else {
            it.next()
        }
    };
    let (wake, normal, oc) = (
        at("wake_up", false).unwrap_or(f64::NAN),
        at("normal", true).unwrap_or(f64::NAN),
        at("overcharge_protect", false).unwrap_or(f64::NAN),
    );
    let within = |t: f64, target: f64| (t / target - 1.0).abs() <= 0.2;
    let lockouts = names.iter().filter(|n| *n == "uvlo_lockout").count();

    // The order must not hinge on the exact storage size the fit picked.
    let mut robust = true;
    for scale in [0.8, 1.25] {
        let mut s = cs.scenario.clone();
        s.pmic.storage_capacitance *= scale;
        let r = compute(Command::ColdStart, &s).map_err(|e| e.to_string())?;
        let (_, m) = r.extra.iter().find(|(n, _)| *n == "milestones").ok_or("no milestone table")?;
        robust &= order_ok(&m.texts("milestone").ok_or("no milestone column")?);
    }
    check(
        order_ok(&names) && robust && within(wake, 35.0) && within(normal, 56.0) && within(oc, 93.0),
        format!(
            "order {}, {lockouts} lockouts, wake {wake:.1} s, normal {normal:.1} s, overcharge {oc:.1} s, order holds at 0.8x/1.25x storage: {robust}; {:.2} s",
            names.join(" > "),
            cs.elapsed.as_secs_f64()
        ),
    )
}

fn base_diode() -> DiodeModel {
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

fn random_circuit(rng: &mut ChaCha8Rng) -> RectifierCircuit {
    let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| rng.gen_range(lo.ln()..hi.ln()).exp();
    let diode = DiodeModel {
        saturation_current: log_uniform(rng, 1e-9, 1e-5),
        ideality_factor: rng.gen_range(1.0..1.5),
        series_resistance: rng.gen_range(0.5..20.0),
        junction_capacitance_zero_bias: rng.gen_range(0.05e-12..1.0e-12),
        junction_potential: rng.gen_range(0.2..0.6),
        grading_coefficient: rng.gen_range(0.3..0.6),
        capacitance_model: if rng.gen_bool(0.5) { CapacitanceModel::Constant } else { CapacitanceModel::BiasDependent },
        ..base_diode()
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
        diode,
        output_capacitor: LumpedElement::capacitor(log_uniform(rng, 1e-12, 100e-12), Placement::Shunt)
            .expect("positive"),
        load_resistance: log_uniform(rng, 100.0, 1e6),
        source: SourceSpec::from_available_power(
            dbm(rng.gen_range(-25.0..10.0)),
            ComplexImpedance::resistive(50.0),
            Frequency::from_mhz(rng.gen_range(800.0..1000.0)).expect("positive"),
        ),
        topology: if rng.gen_bool(0.8) { Topology::VoltageDoubler } else { Topology::HalfWave },
    }
}

/// A diode with an enormous saturation current is a small linear
/// resistor, so a half-wave stage reduces to an RC divider.
fn linear_limit_error() -> Result<f64, String> {
    let diode = DiodeModel { saturation_current: 10.0, junction_capacitance_zero_bias: 0.0, ..base_diode() };
    let f = Frequency::from_mhz(915.0).expect("positive");
    let (rs, rl, cl) = (50.0, 200.0, 1e-12);
    let c = RectifierCircuit {
        front_end: FrontEnd::Direct,
        diode,
        output_capacitor: LumpedElement::capacitor(cl, Placement::Shunt).expect("positive"),
        load_resistance: rl,
        source: SourceSpec { amplitude: 0.01, impedance: ComplexImpedance::resistive(rs), frequency: f },
        topology: Topology::HalfWave,
    };
    let s = solve_steady_state(&c, 1024, DEFAULT_MAX_PERIODS).map_err(|e| e.to_string())?;
    let w = f.omega();
    let r_diode = diode.series_resistance + diode.ideality_factor * diode.thermal_voltage / diode.saturation_current;
    let z_load = Complex64::new(rl, 0.0) / Complex64::new(1.0, w * rl * cl);
    let z_in = z_load + r_diode;
    let v_out = Complex64::new(c.source.amplitude, 0.0) * z_load / (z_in + rs);
    let zin = fundamental_input_impedance(&s).map_err(|e| e.to_string())?.as_complex();
    let time: Vec<f64> = (0..s.node(s.output_node).len()).map(|k| k as f64 * f.period() / 1024.0).collect();
    let out = fundamental(s.node(s.output_node), &time, w);
    Ok(((zin - z_in).norm() / z_in.norm()).max((out.norm() - v_out.norm()).abs() / v_out.norm()))
}

fn solver_physics(preset: &Scenario) -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst_residual: f64 = 0.0;
    let mut efficiency_ok = true;
    for k in 0..100 {
        let c = random_circuit(&mut rng);
        let s = solve_resolved(&c).map_err(|e| format!("random case {k}: {e}"))?;
        if !s.converged {
            return Err(format!("random case {k} did not converge"));
        }
        worst_residual = worst_residual.max(s.energy.relative_residual());
        efficiency_ok &= (0.0..=1.0).contains(&s.efficiency);
    }
    let mut worst_halving: f64 = 0.0;
    for (p, load) in [(-15.0, 20e3), (-5.0, 12e3), (0.0, 12e3), (5.0, 5e3)] {
        let c = preset.frontend.circuit.with_input_power(dbm(p)).with_load(load);
        let coarse =
            solve_steady_state(&c, DEFAULT_STEPS_PER_PERIOD, DEFAULT_MAX_PERIODS).map_err(|e| e.to_string())?;
        let fine =
            solve_steady_state(&c, 2 * DEFAULT_STEPS_PER_PERIOD, DEFAULT_MAX_PERIODS).map_err(|e| e.to_string())?;
        efficiency_ok &= (0.0..=1.0).contains(&coarse.efficiency) && (0.0..=1.0).contains(&fine.efficiency);
        worst_halving = worst_halving.max((coarse.dc_output_voltage / fine.dc_output_voltage - 1.0).abs());
    }
    let linear = linear_limit_error()?;
    check(
        worst_residual <= 1e-4 && worst_halving <= 2e-3 && efficiency_ok && linear <= 1e-3,
        format!(
            "worst energy residual {worst_residual:.2e} over 100 random circuits, step halving {:.3} %, efficiency in [0,1]: {efficiency_ok}, linear limit error {:.4} %; {:.1} s",
            100.0 * worst_halving,
            100.0 * linear,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn mpp_trend(mpp: &Run) -> Verdict {
    let t = &mpp.report.main;
    let p = t.numbers("input_power").ok_or("no input_power column")?;
    let r = t.numbers("mpp_ratio").ok_or("no mpp_ratio column")?;
    let pts: Vec<(f64, f64)> = p
        .iter()
        .zip(&r)
        .map(|(p, r)| Ok((p.ok_or("bad power")?, r.ok_or("failed point")?)))
        .collect::<Result<_, String>>()?;
    let flat: Vec<f64> = pts.iter().filter(|(p, _)| (-10.0..=4.0).contains(p)).map(|x| x.1).collect();
    let spread =
        flat.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - flat.iter().cloned().fold(f64::INFINITY, f64::min);
    let high: Vec<f64> = pts.iter().filter(|(p, _)| *p >= 4.0).map(|x| x.1).collect();
    let rising = high.windows(2).all(|w| w[1] > w[0]);
    check(
        flat.len() >= 2 && high.len() >= 3 && spread <= 0.10 && rising,
        format!(
            "spread {:.1} pp over -10..+4 dBm ({} points), strictly increasing over {} points from +4 dBm: {rising}; {:.1} s",
            100.0 * spread,
            flat.len(),
            high.len(),
            mpp.elapsed.as_secs_f64()
        ),
    )
}

fn determinism(runs: &[Run], cal: &Run) -> Verdict {
    let mut same = Vec::new();
    for first in runs {
        let again = run(first.command, first.file)?;
        if again.outputs != first.outputs {
            return Err(format!("`{}` output changed between runs", first.command.name()));
        }
        same.push(first.command.name());
    }
    // Calibration is the slow one: compare against the files committed
    // from an earlier run instead of running it twice.
    let golden = std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/calibration.csv"))
        .map_err(|e| e.to_string())?;
    let preset = std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(DEFAULTS_FILE))
        .map_err(|e| e.to_string())?;
    let find = |name: &str| cal.outputs.iter().find(|o| o.file == name).map(|o| o.bytes.clone());
    if find(&cal.scenario.csv_name) != Some(golden) {
        return Err("calibration CSV differs from the committed run".into());
    }
    if find(DEFAULTS_FILE) != Some(preset) {
        return Err("calibration no longer reproduces the shipped preset".into());
    }
    same.push("calibrate");
    Ok(format!("byte-identical CSV on re-run for {}", same.join(", ")))
}

fn synthesis(preset: &Scenario) -> Verdict {
    let d = preset.frontend.design();
    let (rp, c) = (preset.frontend.termination_resistance, d.effective_diode_capacitance);
    let f = d.target_frequency;
    // Parallel R-C of the rectifier input, as an impedance.
    let y = Complex64::new(1.0 / rp, f.omega() * c);
    let z = ComplexImpedance::from_complex(y.inv());
    // Loaded Q chosen so the diode capacitance is the whole load-side shunt.
    let q = f.omega() * c * rp;
    let s = synthesize_pi(ComplexImpedance::resistive(50.0), z, f, q).map_err(|e| e.to_string())?;
    let dc2 = s.shunt_capacitor.value / REFERENCE_C2_F - 1.0;
    let dl1 = s.series_inductor.value / REFERENCE_L1_H - 1.0;
    check(
        dc2.abs() <= 0.3 && dl1.abs() <= 0.3,
        format!(
            "C2 {:.3} pF ({:+.1} %), L1 {:.2} nH ({:+.1} %)",
            s.shunt_capacitor.value * 1e12,
            100.0 * dc2,
            s.series_inductor.value * 1e9,
            100.0 * dl1
        ),
    )
}

fn report(label: &str, v: &Verdict) -> bool {
    match v {
        Ok(d) => println!("PASS {label}: {d}"),
        Err(d) => println!("FAIL {label}: {d}"),
    }
    v.is_ok()
}

fn main() {
    let started = Instant::now();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (command, file) in [
        (Command::S11, "s11.scn"),
        (Command::RectEff, "rect_eff.scn"),
        (Command::Mpp, "mpp.scn"),
        (Command::EndToEnd, "end_to_end.scn"),
        (Command::ColdStart, "coldstart.scn"),
        (Command::Link, "link.scn"),
    ] {
        match run(command, file) {
            Ok(r) => runs.push(r),
            Err(e) => failures.push(format!("{file}: {e}")),
        }
    }
    let cal = run(Command::Calibrate, "calibrate.scn");
    if !failures.is_empty() || cal.is_err() {
        for f in &failures {
            println!("FAIL setup: {f}");
        }
        if let Err(e) = &cal {
            println!("FAIL setup: calibrate.scn: {e}");
        }
        std::process::exit(1);
    }
    let cal = cal.expect("checked");
    let get = |c: Command| runs.iter().find(|r| r.command == c).expect("every command ran");

    let results = [
        ("criterion 1 matching signature", matching_signature(get(Command::S11))),
        ("criterion 2 maximum-power-transfer oracle", thevenin_oracle()),
        ("criterion 3 calibrated end-to-end efficiency", calibrated_efficiency(get(Command::EndToEnd), &cal)),
        ("criterion 4 cold-start sequence", cold_start(get(Command::ColdStart))),
        ("criterion 5 solver physics", solver_physics(&get(Command::S11).scenario)),
        ("criterion 6 MPP trend", mpp_trend(get(Command::Mpp))),
        ("criterion 7 determinism", determinism(&runs, &cal)),
        ("matching synthesis consistency", synthesis(&get(Command::S11).scenario)),
    ];
    let mut all = true;
    for (label, v) in &results {
        all &= report(label, v);
    }
    println!("acceptance finished in {:.1} s", started.elapsed().as_secs_f64());
    if !all {
        std::process::exit(1);
    }
}
