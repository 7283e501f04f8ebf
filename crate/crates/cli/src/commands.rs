//! One runner per sweep kind. Each produces its tables and plot in memory;
//! nothing touches the disk until every point has been computed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rectenna_core::calibration::{calibrate, CalibrationReport, CalibrationTargets};
use rectenna_core::link::{path_loss_db, range_for_power, received_power, LinkBudget};
use rectenna_core::mpp::{mpp_ratio_sweep, LoadRange};
use rectenna_core::network::{linear_grid, s11_sweep};
use rectenna_core::pmic::{end_to_end_efficiency, simulate_cold_start, BoostEfficiency, ColdStartOptions};
use rectenna_core::rectifier::{efficiency_sweep, CapacitanceModel, FrontEnd, LoadMode, Topology};
use rectenna_core::units::Z0_OHMS;
use rectenna_core::{ComplexImpedance, Frequency, PowerLevel};

use crate::error::CliError;
use crate::quantity::{format_number, format_quantity, Unit};
use crate::scenario::{LinkSweep, Scenario, Sweep};
use crate::svg::{emit_svg, PlotSpec};
use crate::table::{read_provenance, tool_id, Cell, Provenance, ResultTable};

/// Subcommands that run a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    S11,
    RectEff,
    Mpp,
    EndToEnd,
    ColdStart,
    Link,
    Calibrate,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::S11,
        Command::RectEff,
        Command::Mpp,
        Command::EndToEnd,
        Command::ColdStart,
        Command::Link,
        Command::Calibrate,
    ];

    /// The `sweep.kind` a scenario must declare for this subcommand.
    pub fn sweep_kind(self) -> &'static str {
        match self {
            Command::S11 => "s11",
            Command::RectEff => "rect_efficiency",
            Command::Mpp => "mpp_ratio",
            Command::EndToEnd => "end_to_end",
            Command::ColdStart => "cold_start",
            Command::Link => "link",
            Command::Calibrate => "calibrate",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::S11 => "s11",
            Command::RectEff => "rect-eff",
            Command::Mpp => "mpp",
            Command::EndToEnd => "end-to-end",
            Command::ColdStart => "coldstart",
            Command::Link => "link",
            Command::Calibrate => "calibrate",
        }
    }
}

/// Computed results before rendering.
#[derive(Debug, Clone)]
pub struct Report {
    /// The main table goes to `outputs.csv`; the rest get a suffix.
    pub main: ResultTable,
    pub extra: Vec<(&'static str, ResultTable)>,
    pub plot: Option<PlotSpec>,
    /// Non-CSV files, e.g. the defaults written by `calibrate`.
    pub files: Vec<(String, Vec<u8>)>,
}

impl Report {
    fn new(main: ResultTable, plot: Option<PlotSpec>) -> Self {
        Self { main, extra: Vec::new(), plot, files: Vec::new() }
    }
}

/// A file ready to be written into the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub file: String,
    pub bytes: Vec<u8>,
}

pub fn compute(command: Command, scenario: &Scenario) -> Result<Report, CliError> {
    if scenario.sweep.kind() != command.sweep_kind() {
        return Err(CliError::Schema {
            path: scenario.name.clone(),
            key: "sweep.kind".into(),
            message: format!(
                "`{}` needs kind = {}, the scenario has {}",
                command.name(),
                command.sweep_kind(),
                scenario.sweep.kind()
            ),
        });
    }
    match &scenario.sweep {
        Sweep::S11 { start, stop, points } => run_s11(scenario, *start, *stop, *points),
        Sweep::RectEff { powers, fixed_load, range } => run_rect_eff(scenario, &powers.levels(), *fixed_load, *range),
        Sweep::Mpp { powers, range } => run_mpp(scenario, &powers.levels(), *range),
        Sweep::EndToEnd { powers, hold_voltage } => run_end_to_end(scenario, &powers.levels(), *hold_voltage),
        Sweep::ColdStart { input_power, duration, dt, record_interval, load_current } => run_cold_start(
            scenario,
            *input_power,
            ColdStartOptions {
                duration: *duration,
                dt: *dt,
                record_interval: *record_interval,
                load_current: *load_current,
            },
        ),
        Sweep::Link(l) => run_link(l),
        Sweep::Calibrate(t) => run_calibrate(scenario, t),
    }
}

fn stem(csv_name: &str) -> &str {
    csv_name.strip_suffix(".csv").unwrap_or(csv_name)
}

/// Renders a report into files. Plot failures are errors so a requested
/// SVG never silently goes missing.
pub fn render(scenario: &Scenario, report: &Report) -> Result<Vec<Output>, CliError> {
    let mut out =
        vec![Output { file: scenario.csv_name.clone(), bytes: report.main.to_csv(&scenario.name, &scenario.hash)? }];
    for (suffix, t) in &report.extra {
        out.push(Output {
            file: format!("{}_{suffix}.csv", stem(&scenario.csv_name)),
            bytes: t.to_csv(&scenario.name, &scenario.hash)?,
        });
    }
    if let Some(svg) = &scenario.svg_name {
        let spec = report.plot.as_ref().ok_or_else(|| CliError::Schema {
            path: scenario.name.clone(),
            key: "outputs.svg".into(),
            message: format!("sweep kind `{}` has no plot", scenario.sweep.kind()),
        })?;
        out.push(Output { file: svg.clone(), bytes: emit_svg(&report.main, spec)?.into_bytes() });
    }
    for (file, bytes) in &report.files {
        out.push(Output { file: file.clone(), bytes: bytes.clone() });
    }
    Ok(out)
}

pub fn write_outputs(dir: &Path, outputs: &[Output]) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    outputs
        .iter()
        .map(|o| {
            let path = dir.join(&o.file);
            std::fs::write(&path, &o.bytes).map_err(|e| CliError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

/// Loads, runs and writes one scenario; returns the files written.
pub fn execute(command: Command, scenario_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let scenario = Scenario::load(scenario_path)?;
    let report = compute(command, &scenario)?;
    let outputs = render(&scenario, &report)?;
    write_outputs(out_dir, &outputs)
}

/// Re-checks that every CSV the scenario produces carries its hash and
/// this tool's version.
pub fn verify(scenario_path: &Path, out_dir: &Path) -> Result<Vec<(PathBuf, Provenance)>, CliError> {
    let scenario = Scenario::load(scenario_path)?;
    let mut names = vec![scenario.csv_name.clone()];
    let extras: &[&str] = match scenario.sweep {
        Sweep::ColdStart { .. } => &["milestones"],
        Sweep::Link(LinkSweep { target_power: Some(_), .. }) => &["range"],
        _ => &[],
    };
    names.extend(extras.iter().map(|s| format!("{}_{s}.csv", stem(&scenario.csv_name))));
    let mut checked = Vec::new();
    for name in names {
        let path = out_dir.join(&name);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        let shown = path.display().to_string();
        let p = read_provenance(&bytes, &shown)?;
        if p.scenario_hash != scenario.hash {
            return Err(CliError::Verify {
                path: shown,
                message: format!("scenario hash {} does not match {}", p.scenario_hash, scenario.hash),
            });
        }
        if p.tool != tool_id() {
            return Err(CliError::Verify {
                path: shown,
                message: format!("written by `{}`, this is `{}`", p.tool, tool_id()),
            });
        }
        checked.push((path, p));
    }
    Ok(checked)
}

fn run_s11(sc: &Scenario, start: Frequency, stop: Frequency, points: usize) -> Result<Report, CliError> {
    let grid = linear_grid(start, stop, points)?;
    let term = ComplexImpedance::resistive(sc.frontend.termination_resistance);
    let r = s11_sweep(&sc.frontend.design().network(), |_| term, &grid, ComplexImpedance::resistive(Z0_OHMS))?;
    let mut t = ResultTable::new(
        "S11 of the matching network terminated by the rectifier equivalent",
        &[("frequency", "Hz"), ("s11", "dB"), ("z_in_real", "ohm"), ("z_in_imag", "ohm")],
    );
    for ((f, db), z) in grid.iter().zip(r.s11_db()).zip(&r.input_impedance) {
        t.push(vec![f.hz().into(), db.into(), z.resistance.into(), z.reactance.into()]);
    }
    let plot = PlotSpec::line("Input reflection", "frequency", &["s11"], "|S11|").x_in(1e-6, "MHz");
    Ok(Report::new(t, Some(plot)))
}

fn run_rect_eff(
    sc: &Scenario,
    powers: &[PowerLevel],
    fixed_load: Option<f64>,
    range: LoadRange,
) -> Result<Report, CliError> {
    let (circuit, mode) = match fixed_load {
        Some(l) => (sc.frontend.circuit.with_load(l), LoadMode::Fixed),
        None => (sc.frontend.circuit, LoadMode::MppTracked(range)),
    };
    let mut t = ResultTable::new(
        "Rectifier power conversion efficiency",
        &[
            ("input_power", "dBm"),
            ("efficiency", "1"),
            ("load_resistance", "ohm"),
            ("dc_output_voltage", "V"),
            ("mpp_ratio", "1"),
        ],
    );
    for (p, point) in efficiency_sweep(&circuit, powers, mode)? {
        match point {
            Ok(e) => t.push(vec![
                p.dbm().into(),
                e.efficiency.into(),
                e.load_resistance.into(),
                e.dc_output_voltage.into(),
                e.mpp_ratio.into(),
            ]),
            Err(err) => t.push_error(vec![p.dbm().into()], err),
        }
    }
    let plot = PlotSpec::line("Rectifier efficiency", "input_power", &["efficiency"], "efficiency").percent();
    Ok(Report::new(t, Some(plot)))
}

fn run_mpp(sc: &Scenario, powers: &[PowerLevel], range: LoadRange) -> Result<Report, CliError> {
    let mut t = ResultTable::new(
        "Maximum power point versus input power",
        &[
            ("input_power", "dBm"),
            ("mpp_ratio", "1"),
            ("optimal_load", "ohm"),
            ("mpp_voltage", "V"),
            ("open_circuit_voltage", "V"),
            ("output_power", "W"),
            ("unimodal", ""),
        ],
    );
    for (p, point) in mpp_ratio_sweep(&sc.frontend.circuit, powers, range)? {
        match point {
            Ok(m) => t.push(vec![
                p.dbm().into(),
                m.mpp_ratio.into(),
                m.optimal_load_resistance.into(),
                m.mpp_voltage.into(),
                m.open_circuit_voltage.into(),
                m.output_power_at_mpp.into(),
                Cell::Text(m.unimodal.to_string()),
            ]),
            Err(err) => t.push_error(vec![p.dbm().into()], err),
        }
    }
    let mut plot = PlotSpec::line("MPP voltage ratio", "input_power", &["mpp_ratio"], "V_mpp / V_oc");
    plot.y_range = Some((0.0, 1.0));
    Ok(Report::new(t, Some(plot)))
}

fn run_end_to_end(sc: &Scenario, powers: &[PowerLevel], hold: f64) -> Result<Report, CliError> {
    let mut t = ResultTable::new(
        "End-to-end efficiency into a held storage voltage",
        &[
            ("input_power", "dBm"),
            ("efficiency", "1"),
            ("operating_voltage", "V"),
            ("harvested_power", "W"),
            ("storage_power", "W"),
            ("energy_positive", ""),
        ],
    );
    let points = end_to_end_efficiency(&sc.pmic, &sc.frontend.circuit, powers, hold)?;
    for (p, point) in powers.iter().zip(points) {
        match point {
            Ok(e) => t.push(vec![
                p.dbm().into(),
                e.efficiency.into(),
                e.operating_voltage.into(),
                e.harvested_power.into(),
                e.storage_power.into(),
                Cell::Text(e.energy_positive().to_string()),
            ]),
            Err(err) => t.push_error(vec![p.dbm().into()], err),
        }
    }
    let plot = PlotSpec::line("End-to-end efficiency", "input_power", &["efficiency"], "efficiency").percent();
    Ok(Report::new(t, Some(plot)))
}

fn run_cold_start(sc: &Scenario, p: PowerLevel, opts: ColdStartOptions) -> Result<Report, CliError> {
    let trace = simulate_cold_start(&sc.pmic, p, &sc.frontend.circuit, opts)?;
    let mut t = ResultTable::new(
        &format!("Cold start from empty storage at {} dBm", p.dbm()),
        &[
            ("time", "s"),
            ("mode", ""),
            ("v_storage", "V"),
            ("output_enabled", "1"),
            ("harvested_power", "W"),
            ("load_power", "W"),
        ],
    );
    for s in &trace.samples {
        t.push(vec![
            s.time.into(),
            s.mode.name().into(),
            s.v_storage.into(),
            (if s.v_out_active { 1.0 } else { 0.0 }).into(),
            s.harvested_power.into(),
            s.load_power.into(),
        ]);
    }
    let mut m = ResultTable::new("Mode transitions", &[("time", "s"), ("milestone", "")]);
    for ms in &trace.milestones {
        m.push(vec![ms.time.into(), ms.kind.name().into()]);
    }
    if let Some(err) = &trace.aborted {
        let last = trace.samples.last().map_or(0.0, |s| s.time);
        m.push_error(vec![last.into()], err);
    }
    let mut plot = PlotSpec::line("Storage voltage during cold start", "time", &["v_storage"], "storage voltage");
    plot.step = true;
    plot.markers = trace.milestones.iter().map(|ms| (ms.time, ms.kind.name().to_string())).collect();
    let mut report = Report::new(t, Some(plot));
    report.extra.push(("milestones", m));
    Ok(report)
}

fn run_link(l: &LinkSweep) -> Result<Report, CliError> {
    let mut t = ResultTable::new(
        "Free-space link budget",
        &[("distance", "m"), ("received_power", "dBm"), ("path_loss", "dB"), ("far_field", "")],
    );
    let budget = |d| LinkBudget {
        tx_power: l.tx_power,
        tx_gain_dbi: l.tx_gain_dbi,
        rx_gain_dbi: l.rx_gain_dbi,
        frequency: l.frequency,
        distance: d,
    };
    let step = (l.distance_stop - l.distance_start) / (l.points - 1) as f64;
    for i in 0..l.points {
        let d = if i + 1 == l.points { l.distance_stop } else { l.distance_start + step * i as f64 };
        let b = budget(d);
        match (received_power(&b), path_loss_db(d, l.frequency)) {
            (Ok(p), Ok(pl)) => {
                t.push(vec![d.into(), p.dbm().into(), pl.into(), b.is_far_field().to_string().as_str().into()])
            }
            (Err(e), _) | (_, Err(e)) => t.push_error(vec![d.into()], e),
        }
    }
    let plot = PlotSpec::line("Received power", "distance", &["received_power"], "received power");
    let mut report = Report::new(t, Some(plot));
    if let Some(target) = l.target_power {
        let mut r = ResultTable::new("Range for a target received power", &[("target_power", "dBm"), ("range", "m")]);
        match range_for_power(&budget(l.distance_start), target) {
            Ok(d) => r.push(vec![target.dbm().into(), d.into()]),
            Err(e) => r.push_error(vec![target.dbm().into()], e),
        }
        report.extra.push(("range", r));
    }
    Ok(report)
}

/// File name of the defaults written by `calibrate`.
pub const DEFAULTS_FILE: &str = "defaults.scn";

fn run_calibrate(sc: &Scenario, targets: &CalibrationTargets) -> Result<Report, CliError> {
    let r = calibrate(&sc.frontend.circuit, &sc.pmic, targets, LoadRange::default())?;
    let mut t =
        ResultTable::new("Calibration result", &[("parameter", ""), ("value", ""), ("unit", ""), ("target", "")]);
    let mut row = |name: &str, value: f64, unit: &str, target: Option<f64>| {
        t.push(vec![name.into(), value.into(), unit.into(), target.into()]);
    };
    row("diode_is_scale", r.is_scale, "1", None);
    row("diode_rs_scale", r.rs_scale, "1", None);
    row("junction_capacitance", r.junction_capacitance, "F", None);
    row("effective_capacitance", r.signature.effective_capacitance, "F", None);
    row("termination_resistance", r.signature.termination_resistance, "ohm", None);
    row("s11_minimum_frequency", r.signature.minimum_frequency.hz(), "Hz", Some(targets.match_frequency.hz()));
    row("s11_minimum", r.signature.minimum_db, "dB", None);
    row("boost_efficiency", r.boost.boost_efficiency, "1", None);
    row("ic_quiescent_current", r.boost.ic_quiescent_current, "A", None);
    row("storage_capacitance", r.cold_start.storage_capacitance, "F", None);
    row("regulator_quiescent_current", r.cold_start.regulator_quiescent_current, "A", None);
    row("inrush_charge", r.cold_start.inrush_charge, "C", None);
    row("wake_time", r.cold_start_times.wake, "s", Some(targets.wake_time));
    row("normal_time", r.cold_start_times.normal, "s", Some(targets.normal_time));
    row("overcharge_time", r.cold_start_times.overcharge, "s", Some(targets.overcharge_time));
    row("uvlo_lockouts", r.cold_start_times.lockouts as f64, "1", None);
    row("peak_efficiency", r.peak_efficiency, "1", Some(targets.peak_efficiency));
    row("efficiency_at_minus_10_dbm", r.efficiency_at_minus_10_dbm, "1", None);
    match r.energy_positive_floor_dbm {
        Some(f) => row("energy_positive_floor", f, "dBm", Some(targets.floor_power.dbm())),
        None => t.push_error(vec!["energy_positive_floor".into()], "no sign change inside the search bracket"),
    }
    let mut report = Report::new(t, None);
    report.files.push((DEFAULTS_FILE.to_string(), defaults_text(sc, &r).into_bytes()));
    Ok(report)
}

/// Renders the calibrated front end and PMIC as a preset file. Every
/// value is written in full precision so the preset reproduces the fit
/// bit for bit.
pub fn defaults_text(sc: &Scenario, r: &CalibrationReport) -> String {
    let FrontEnd::Matched(design) = r.frontend.front_end else {
        unreachable!("scenarios always build a matched front end")
    };
    let q = |v: Option<f64>| v.map_or_else(|| "ideal".to_string(), format_number);
    let fq = format_quantity;
    let d = &r.frontend.diode;
    let p = &r.pmic;
    let BoostEfficiency::Constant(eta) = p.boost_efficiency else {
        unreachable!("calibration fits a constant boost efficiency")
    };
    let mut s = String::new();
    let _ = writeln!(s, "# Calibrated defaults behind `preset = table1-custom`.");
    let _ = writeln!(s, "# Written by `rectenna calibrate`; regenerate instead of editing.");
    let _ = writeln!(s, "# tool: {}", tool_id());
    let _ = writeln!(s, "# calibration scenario sha256: {}", sc.hash);
    let _ = writeln!(s, "# fitted: cj0, c_eff, r_term, boost_efficiency, ic_quiescent_current, storage_capacitance,");
    let _ = writeln!(s, "#   regulator_quiescent_current, inrush_charge");
    let _ = writeln!(
        s,
        "# reached: S11 minimum {:.4e} Hz at {:.2} dB, end-to-end efficiency {:.4} at peak power,",
        r.signature.minimum_frequency.hz(),
        r.signature.minimum_db,
        r.peak_efficiency
    );
    let _ = writeln!(
        s,
        "#   {:.4} at -10 dBm, energy-positive floor {}, cold start {:.1}/{:.1}/{:.1} s with {} lockouts",
        r.efficiency_at_minus_10_dbm,
        r.energy_positive_floor_dbm.map_or_else(|| "not found".to_string(), |f| format!("{f:.2} dBm")),
        r.cold_start_times.wake,
        r.cold_start_times.normal,
        r.cold_start_times.overcharge,
        r.cold_start_times.lockouts
    );
    let topology = match r.frontend.topology {
        Topology::VoltageDoubler => "doubler",
        Topology::HalfWave => "half_wave",
    };
    let _ = write!(
        s,
        "
[frontend]
topology = {topology}
carrier = {}
source_resistance = {}
c1 = {}
c2 = {}
l1 = {}
c3 = {}
q_c1 = {}
q_c2 = {}
q_l1 = {}
c_eff = {}
r_term = {}

[diode]
is = {}
n = {}
rs = {}
cj0 = {}
vt = {}
vj = {}
m = {}
capacitance = {}

[pmic]
cold_start_min_voltage = {}
cold_start_min_power = {}
normal_min_voltage = {}
mppt_fraction = {}
mppt_sample_period = {}
mppt_sense_window = {}
v_overcharge = {}
overcharge_hysteresis = {}
v_uvlo = {}
uvlo_hysteresis = {}
wake_fraction = {}
v_regulated = {}
boost_max_voltage = {}
boost_efficiency = {}
storage_capacitance = {}
ic_quiescent_current = {}
regulator_quiescent_current = {}
inrush_charge = {}
",
        fq(design.target_frequency.hz(), Unit::Hertz),
        fq(r.frontend.source.impedance.resistance, Unit::Ohm),
        fq(design.dc_block.value, Unit::Farad),
        fq(design.shunt_capacitor.value, Unit::Farad),
        fq(design.series_inductor.value, Unit::Henry),
        fq(r.frontend.output_capacitor.value, Unit::Farad),
        q(design.dc_block.q_factor),
        q(design.shunt_capacitor.q_factor),
        q(design.series_inductor.q_factor),
        fq(design.effective_diode_capacitance, Unit::Farad),
        fq(r.signature.termination_resistance, Unit::Ohm),
        fq(d.saturation_current, Unit::Ampere),
        format_number(d.ideality_factor),
        fq(d.series_resistance, Unit::Ohm),
        fq(d.junction_capacitance_zero_bias, Unit::Farad),
        fq(d.thermal_voltage, Unit::Volt),
        fq(d.junction_potential, Unit::Volt),
        format_number(d.grading_coefficient),
        match d.capacitance_model {
            CapacitanceModel::Constant => "constant",
            CapacitanceModel::BiasDependent => "bias_dependent",
        },
        fq(p.cold_start_min_voltage, Unit::Volt),
        fq(p.cold_start_min_power, Unit::Watt),
        fq(p.normal_min_voltage, Unit::Volt),
        format_number(p.mppt_fraction),
        fq(p.mppt_sample_period, Unit::Second),
        fq(p.mppt_sense_window, Unit::Second),
        fq(p.v_overcharge, Unit::Volt),
        fq(p.overcharge_hysteresis, Unit::Volt),
        fq(p.v_uvlo, Unit::Volt),
        fq(p.uvlo_hysteresis, Unit::Volt),
        format_number(p.wake_fraction),
        fq(p.v_regulated, Unit::Volt),
        fq(p.boost_max_voltage, Unit::Volt),
        format_number(eta),
        fq(p.storage_capacitance, Unit::Farad),
        fq(p.ic_quiescent_current, Unit::Ampere),
        fq(p.regulator_quiescent_current, Unit::Ampere),
        fq(p.inrush_charge, Unit::Coulomb),
    );
    s
}
