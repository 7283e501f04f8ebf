//! Scenario files: line-oriented `key = value` pairs grouped by `[section]`
//! headers. Physical values carry units, unknown keys are rejected, and a
//! `preset` line pulls in the calibrated defaults underneath the file.

use std::collections::BTreeMap;
use std::path::Path;

use rectenna_core::calibration::CalibrationTargets;
use rectenna_core::matching::PiMatchDesign;
use rectenna_core::mpp::LoadRange;
use rectenna_core::pmic::{BoostEfficiency, PmicConfig};
use rectenna_core::rectifier::{CapacitanceModel, DiodeModel, FrontEnd, RectifierCircuit, SourceSpec, Topology};
use rectenna_core::{ComplexImpedance, Frequency, LumpedElement, Placement, PowerLevel, QConfig};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::quantity::{parse_number, parse_quantity, Unit};

/// Calibrated defaults behind `preset = table1-custom`.
pub const PRESET_DEFAULTS: &str = include_str!("../data/defaults.scn");
pub const PRESET_NAMES: &[&str] = &["table1-custom"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Quantity(Unit),
    Number,
    Count,
    Text,
    Choice(&'static [&'static str]),
    /// A number, or `ideal` for a lossless part.
    QFactor,
}

const SWEEP_KINDS: &[&str] = &["s11", "rect_efficiency", "mpp_ratio", "end_to_end", "cold_start", "link", "calibrate"];

struct KeySpec {
    section: &'static str,
    key: &'static str,
    kind: Kind,
    /// Sweep kinds that read this key; empty for non-sweep sections.
    used_by: &'static [&'static str],
}

const fn k(section: &'static str, key: &'static str, kind: Kind) -> KeySpec {
    KeySpec { section, key, kind, used_by: &[] }
}

const fn sw(key: &'static str, kind: Kind, used_by: &'static [&'static str]) -> KeySpec {
    KeySpec { section: "sweep", key, kind, used_by }
}

use Kind::{Choice, Count, Number, QFactor, Quantity, Text};
use Unit::*;

const POWER_GRID: &[&str] = &["rect_efficiency", "mpp_ratio", "end_to_end"];
const LOADS: &[&str] = &["rect_efficiency", "mpp_ratio"];

const SCHEMA: &[KeySpec] = &[
    k("", "name", Text),
    k("", "preset", Choice(PRESET_NAMES)),
    k("frontend", "topology", Choice(&["doubler", "half_wave"])),
    k("frontend", "carrier", Quantity(Hertz)),
    k("frontend", "source_resistance", Quantity(Ohm)),
    k("frontend", "c1", Quantity(Farad)),
    k("frontend", "c2", Quantity(Farad)),
    k("frontend", "l1", Quantity(Henry)),
    k("frontend", "c3", Quantity(Farad)),
    k("frontend", "q_c1", QFactor),
    k("frontend", "q_c2", QFactor),
    k("frontend", "q_l1", QFactor),
    k("frontend", "c_eff", Quantity(Farad)),
    k("frontend", "r_term", Quantity(Ohm)),
    k("diode", "is", Quantity(Ampere)),
    k("diode", "n", Number),
    k("diode", "rs", Quantity(Ohm)),
    k("diode", "cj0", Quantity(Farad)),
    k("diode", "vt", Quantity(Volt)),
    k("diode", "vj", Quantity(Volt)),
    k("diode", "m", Number),
    k("diode", "capacitance", Choice(&["constant", "bias_dependent"])),
    k("pmic", "cold_start_min_voltage", Quantity(Volt)),
    k("pmic", "cold_start_min_power", Quantity(Watt)),
    k("pmic", "normal_min_voltage", Quantity(Volt)),
    k("pmic", "mppt_fraction", Number),
    k("pmic", "mppt_sample_period", Quantity(Second)),
    k("pmic", "mppt_sense_window", Quantity(Second)),
    k("pmic", "v_overcharge", Quantity(Volt)),
    k("pmic", "overcharge_hysteresis", Quantity(Volt)),
    k("pmic", "v_uvlo", Quantity(Volt)),
    k("pmic", "uvlo_hysteresis", Quantity(Volt)),
    k("pmic", "wake_fraction", Number),
    k("pmic", "v_regulated", Quantity(Volt)),
    k("pmic", "boost_max_voltage", Quantity(Volt)),
    k("pmic", "boost_efficiency", Number),
    k("pmic", "storage_capacitance", Quantity(Farad)),
    k("pmic", "ic_quiescent_current", Quantity(Ampere)),
    k("pmic", "regulator_quiescent_current", Quantity(Ampere)),
    k("pmic", "inrush_charge", Quantity(Coulomb)),
    sw("kind", Choice(SWEEP_KINDS), SWEEP_KINDS),
    sw("freq_start", Quantity(Hertz), &["s11"]),
    sw("freq_stop", Quantity(Hertz), &["s11"]),
    sw("points", Count, &["s11", "link"]),
    sw("power_start", Quantity(Power), POWER_GRID),
    sw("power_stop", Quantity(Power), POWER_GRID),
    sw("power_step", Quantity(Decibel), POWER_GRID),
    sw("load_mode", Choice(&["fixed", "mpp"]), &["rect_efficiency"]),
    sw("load", Quantity(Ohm), &["rect_efficiency"]),
    sw("load_min", Quantity(Ohm), LOADS),
    sw("load_max", Quantity(Ohm), LOADS),
    sw("coarse_points", Count, LOADS),
    sw("hold_voltage", Quantity(Volt), &["end_to_end", "calibrate"]),
    sw("input_power", Quantity(Power), &["cold_start"]),
    sw("duration", Quantity(Second), &["cold_start"]),
    sw("dt", Quantity(Second), &["cold_start"]),
    sw("record_interval", Quantity(Second), &["cold_start"]),
    sw("load_current", Quantity(Ampere), &["cold_start"]),
    sw("tx_power", Quantity(Power), &["link"]),
    sw("tx_gain", Quantity(Decibel), &["link"]),
    sw("rx_gain", Quantity(Decibel), &["link"]),
    sw("frequency", Quantity(Hertz), &["link"]),
    sw("distance_start", Quantity(Metre), &["link"]),
    sw("distance_stop", Quantity(Metre), &["link"]),
    sw("target_power", Quantity(Power), &["link"]),
    sw("match_frequency", Quantity(Hertz), &["calibrate"]),
    sw("match_power", Quantity(Power), &["calibrate"]),
    sw("peak_power", Quantity(Power), &["calibrate"]),
    sw("peak_efficiency", Number, &["calibrate"]),
    sw("floor_power", Quantity(Power), &["calibrate"]),
    sw("cold_start_power", Quantity(Power), &["calibrate"]),
    sw("wake_time", Quantity(Second), &["calibrate"]),
    sw("normal_time", Quantity(Second), &["calibrate"]),
    sw("overcharge_time", Quantity(Second), &["calibrate"]),
    k("outputs", "csv", Text),
    k("outputs", "svg", Text),
];

fn spec_for(section: &str, key: &str) -> Option<&'static KeySpec> {
    SCHEMA.iter().find(|s| s.section == section && s.key == key)
}

/// One `key = value` line as written.
#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
    column: usize,
    /// Where the line came from, for error messages.
    source: String,
}

type Entries = BTreeMap<(String, String), Entry>;

fn parse_entries(text: &str, source: &str) -> Result<Entries, CliError> {
    let mut out = Entries::new();
    let mut section = String::new();
    let err = |line: usize, column: usize, message: String| CliError::Parse {
        path: source.to_string(),
        line,
        column,
        message,
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len() + 1;
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name =
                rest.strip_suffix(']').ok_or_else(|| err(line, indent, "section header is missing `]`".into()))?.trim();
            if !SCHEMA.iter().any(|s| s.section == name) || name.is_empty() {
                return Err(err(line, indent + 1, format!("unknown section `[{name}]`")));
            }
            section = name.to_string();
            continue;
        }
        let eq = content.find('=').ok_or_else(|| err(line, indent, "expected `key = value`".into()))?;
        let key = content[..eq].trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(err(line, indent, format!("malformed key `{key}`")));
        }
        let after = &content[eq + 1..];
        let value = after.trim();
        let column = eq + 2 + (after.len() - after.trim_start().len());
        if value.is_empty() {
            return Err(err(line, column, format!("key `{key}` has no value")));
        }
        if spec_for(&section, key).is_none() {
            let place = if section.is_empty() { "at top level".to_string() } else { format!("in [{section}]") };
            return Err(err(line, indent, format!("unknown key `{key}` {place}")));
        }
        let slot = (section.clone(), key.to_string());
        if let Some(prev) = out.get(&slot) {
            return Err(err(line, indent, format!("duplicate key `{key}` (first set on line {})", prev.line)));
        }
        out.insert(slot, Entry { value: value.to_string(), line, column, source: source.to_string() });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerGrid {
    pub start_dbm: f64,
    pub stop_dbm: f64,
    pub step_db: f64,
}

impl PowerGrid {
    pub fn levels(&self) -> Vec<PowerLevel> {
        let n = ((self.stop_dbm - self.start_dbm) / self.step_db + 1e-9).floor() as i64 + 1;
        (0..n.max(0)).map(|i| PowerLevel::from_dbm(self.start_dbm + i as f64 * self.step_db).expect("finite")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    S11 { start: Frequency, stop: Frequency, points: usize },
    RectEff { powers: PowerGrid, fixed_load: Option<f64>, range: LoadRange },
    Mpp { powers: PowerGrid, range: LoadRange },
    EndToEnd { powers: PowerGrid, hold_voltage: f64 },
    ColdStart { input_power: PowerLevel, duration: f64, dt: f64, record_interval: f64, load_current: f64 },
    Link(LinkSweep),
    Calibrate(CalibrationTargets),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSweep {
    pub tx_power: PowerLevel,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub frequency: Frequency,
    pub distance_start: f64,
    pub distance_stop: f64,
    pub points: usize,
    pub target_power: Option<PowerLevel>,
}

impl Sweep {
    pub fn kind(&self) -> &'static str {
        match self {
            Sweep::S11 { .. } => "s11",
            Sweep::RectEff { .. } => "rect_efficiency",
            Sweep::Mpp { .. } => "mpp_ratio",
            Sweep::EndToEnd { .. } => "end_to_end",
            Sweep::ColdStart { .. } => "cold_start",
            Sweep::Link(_) => "link",
            Sweep::Calibrate(_) => "calibrate",
        }
    }
}

/// The matched front end plus what the linear S11 model needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frontend {
    pub circuit: RectifierCircuit,
    /// Parallel resistance terminating the π in the S11 model.
    pub termination_resistance: f64,
}

impl Frontend {
    pub fn design(&self) -> PiMatchDesign {
        match self.circuit.front_end {
            FrontEnd::Matched(d) => d,
            _ => unreachable!("scenarios always build a matched front end"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub frontend: Frontend,
    pub pmic: PmicConfig,
    pub sweep: Sweep,
    pub csv_name: String,
    pub svg_name: Option<String>,
    /// Hex SHA-256 of the scenario file bytes.
    pub hash: String,
}

pub fn scenario_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Typed access to the merged entries, tracking which ones were read.
struct Reader<'a> {
    entries: &'a Entries,
    path: &'a str,
}

impl Reader<'_> {
    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    fn bad(&self, e: &Entry, message: String) -> CliError {
        CliError::Parse { path: e.source.clone(), line: e.line, column: e.column, message }
    }

    fn missing(&self, section: &str, key: &str) -> CliError {
        let full = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        CliError::Schema { path: self.path.to_string(), key: full, message: "required but not set".into() }
    }

    fn opt_quantity(&self, section: &str, key: &str) -> Result<Option<f64>, CliError> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        let Some(KeySpec { kind: Quantity(unit), .. }) = spec_for(section, key) else {
            unreachable!("schema kind for {section}.{key}")
        };
        parse_quantity(&e.value, *unit).map(Some).map_err(|m| self.bad(e, m))
    }

    fn quantity(&self, section: &str, key: &str) -> Result<f64, CliError> {
        self.opt_quantity(section, key)?.ok_or_else(|| self.missing(section, key))
    }

    fn opt_number(&self, section: &str, key: &str) -> Result<Option<f64>, CliError> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        parse_number(&e.value).map(Some).map_err(|m| self.bad(e, m))
    }

    fn number(&self, section: &str, key: &str) -> Result<f64, CliError> {
        self.opt_number(section, key)?.ok_or_else(|| self.missing(section, key))
    }

    fn opt_count(&self, section: &str, key: &str) -> Result<Option<usize>, CliError> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        e.value.parse::<usize>().map(Some).map_err(|_| self.bad(e, format!("`{}` is not a whole number", e.value)))
    }

    fn choice(&self, section: &str, key: &str) -> Result<&str, CliError> {
        let e = self.entry(section, key).ok_or_else(|| self.missing(section, key))?;
        let Some(KeySpec { kind: Choice(options), .. }) = spec_for(section, key) else {
            unreachable!("schema kind for {section}.{key}")
        };
        if options.contains(&e.value.as_str()) {
            Ok(&e.value)
        } else {
            Err(self.bad(e, format!("`{}` is not one of {}", e.value, options.join(", "))))
        }
    }

    fn q_factor(&self, key: &str) -> Result<Option<f64>, CliError> {
        let e = self.entry("frontend", key).ok_or_else(|| self.missing("frontend", key))?;
        if e.value == "ideal" {
            return Ok(None);
        }
        let q = parse_number(&e.value).map_err(|m| self.bad(e, format!("{m}; use a number or `ideal`")))?;
        if !(q > 0.0) {
            return Err(self.bad(e, format!("Q factor must be positive, got {q}")));
        }
        Ok(Some(q))
    }

    fn text(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }

    fn schema(&self, key: &str, message: impl Into<String>) -> CliError {
        CliError::Schema { path: self.path.to_string(), key: key.to_string(), message: message.into() }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Parse {
            path: path.display().to_string(),
            line: 1,
            column: 1,
            message: format!("not UTF-8: {e}"),
        })?;
        let mut s = Self::parse(&text, &path.display().to_string())?;
        s.hash = scenario_hash(&bytes);
        Ok(s)
    }

    pub fn parse(text: &str, path: &str) -> Result<Self, CliError> {
        let own = parse_entries(text, path)?;
        let mut entries = Entries::new();
        if let Some(e) = own.get(&(String::new(), "preset".to_string())) {
            let preset = match e.value.as_str() {
                "table1-custom" => PRESET_DEFAULTS,
                other => {
                    return Err(CliError::Parse {
                        path: path.to_string(),
                        line: e.line,
                        column: e.column,
                        message: format!("unknown preset `{other}`; known: {}", PRESET_NAMES.join(", ")),
                    })
                }
            };
            entries = parse_entries(preset, &format!("preset {}", e.value))?;
        }
        entries.extend(own);
        let r = Reader { entries: &entries, path };

        let kind = r.choice("sweep", "kind")?.to_string();
        for ((section, key), _) in entries.iter().filter(|((s, _), _)| s == "sweep") {
            let spec = spec_for(section, key).expect("checked while parsing");
            if !spec.used_by.contains(&kind.as_str()) {
                return Err(r.schema(&format!("sweep.{key}"), format!("not used by sweep kind `{kind}`")));
            }
        }

        let frontend = build_frontend(&r)?;
        let pmic = build_pmic(&r)?;
        let sweep = build_sweep(&r, &kind)?;
        let name = r.text("", "name").unwrap_or("unnamed").to_string();
        let csv_name = r.text("outputs", "csv").map_or_else(|| format!("{kind}.csv"), str::to_string);
        let svg_name = r.text("outputs", "svg").map(str::to_string);
        for (key, file) in [("outputs.csv", Some(&csv_name)), ("outputs.svg", svg_name.as_ref())] {
            if let Some(f) = file {
                if f.contains('/') || f.contains('\\') || f.starts_with('.') {
                    return Err(r.schema(key, "must be a plain file name inside the output directory"));
                }
            }
        }
        Ok(Self { name, frontend, pmic, sweep, csv_name, svg_name, hash: scenario_hash(text.as_bytes()) })
    }
}

fn build_frontend(r: &Reader) -> Result<Frontend, CliError> {
    let f = "frontend";
    let carrier = Frequency::from_hz(r.quantity(f, "carrier")?)?;
    let q = QConfig {
        dc_block: r.q_factor("q_c1")?,
        shunt_capacitor: r.q_factor("q_c2")?,
        series_inductor: r.q_factor("q_l1")?,
    };
    let design = PiMatchDesign::new(
        r.quantity(f, "c1")?,
        r.quantity(f, "c2")?,
        r.quantity(f, "l1")?,
        r.quantity(f, "c_eff")?,
        carrier,
        q,
    )?;
    let d = "diode";
    let diode = DiodeModel {
        saturation_current: r.quantity(d, "is")?,
        ideality_factor: r.number(d, "n")?,
        series_resistance: r.quantity(d, "rs")?,
        junction_capacitance_zero_bias: r.quantity(d, "cj0")?,
        thermal_voltage: r.quantity(d, "vt")?,
        junction_potential: r.quantity(d, "vj")?,
        grading_coefficient: r.number(d, "m")?,
        capacitance_model: match r.choice(d, "capacitance")? {
            "constant" => CapacitanceModel::Constant,
            _ => CapacitanceModel::BiasDependent,
        },
    };
    let topology = match r.choice(f, "topology")? {
        "doubler" => Topology::VoltageDoubler,
        _ => Topology::HalfWave,
    };
    let rs = r.quantity(f, "source_resistance")?;
    let circuit = RectifierCircuit {
        front_end: FrontEnd::Matched(design),
        diode,
        output_capacitor: LumpedElement::capacitor(r.quantity(f, "c3")?, Placement::Shunt)?,
        // Placeholder until a sweep picks a load.
        load_resistance: 1e4,
        source: SourceSpec::from_available_power(PowerLevel::from_dbm(0.0)?, ComplexImpedance::resistive(rs), carrier),
        topology,
    };
    circuit.validate()?;
    let termination_resistance = r.quantity(f, "r_term")?;
    if !(termination_resistance > 0.0) {
        return Err(r.schema("frontend.r_term", "must be positive"));
    }
    Ok(Frontend { circuit, termination_resistance })
}

fn build_pmic(r: &Reader) -> Result<PmicConfig, CliError> {
    let p = "pmic";
    let cfg = PmicConfig {
        cold_start_min_voltage: r.quantity(p, "cold_start_min_voltage")?,
        cold_start_min_power: r.quantity(p, "cold_start_min_power")?,
        normal_min_voltage: r.quantity(p, "normal_min_voltage")?,
        mppt_fraction: r.number(p, "mppt_fraction")?,
        mppt_sample_period: r.quantity(p, "mppt_sample_period")?,
        mppt_sense_window: r.quantity(p, "mppt_sense_window")?,
        v_overcharge: r.quantity(p, "v_overcharge")?,
        overcharge_hysteresis: r.quantity(p, "overcharge_hysteresis")?,
        v_uvlo: r.quantity(p, "v_uvlo")?,
        uvlo_hysteresis: r.quantity(p, "uvlo_hysteresis")?,
        wake_fraction: r.number(p, "wake_fraction")?,
        v_regulated: r.quantity(p, "v_regulated")?,
        boost_max_voltage: r.quantity(p, "boost_max_voltage")?,
        boost_efficiency: BoostEfficiency::Constant(r.number(p, "boost_efficiency")?),
        storage_capacitance: r.quantity(p, "storage_capacitance")?,
        ic_quiescent_current: r.quantity(p, "ic_quiescent_current")?,
        regulator_quiescent_current: r.quantity(p, "regulator_quiescent_current")?,
        inrush_charge: r.quantity(p, "inrush_charge")?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn power_grid(r: &Reader) -> Result<PowerGrid, CliError> {
    let g = PowerGrid {
        start_dbm: r.quantity("sweep", "power_start")?,
        stop_dbm: r.quantity("sweep", "power_stop")?,
        step_db: r.quantity("sweep", "power_step")?,
    };
    if !(g.step_db > 0.0) {
        return Err(r.schema("sweep.power_step", "must be positive"));
    }
    if g.levels().is_empty() {
        return Err(r.schema("sweep.power_start", "empty sweep grid: power_start is above power_stop"));
    }
    Ok(g)
}

fn load_range(r: &Reader) -> Result<LoadRange, CliError> {
    let d = LoadRange::default();
    let range = LoadRange {
        min_ohms: r.opt_quantity("sweep", "load_min")?.unwrap_or(d.min_ohms),
        max_ohms: r.opt_quantity("sweep", "load_max")?.unwrap_or(d.max_ohms),
        coarse_points: r.opt_count("sweep", "coarse_points")?.unwrap_or(d.coarse_points),
    };
    range.validate()?;
    Ok(range)
}

fn build_sweep(r: &Reader, kind: &str) -> Result<Sweep, CliError> {
    let s = "sweep";
    Ok(match kind {
        "s11" => {
            let points = r.opt_count(s, "points")?.ok_or_else(|| r.missing(s, "points"))?;
            if points < 2 {
                return Err(r.schema("sweep.points", "empty sweep grid: need at least 2 points"));
            }
            Sweep::S11 {
                start: Frequency::from_hz(r.quantity(s, "freq_start")?)?,
                stop: Frequency::from_hz(r.quantity(s, "freq_stop")?)?,
                points,
            }
        }
        "rect_efficiency" => {
            let fixed_load = match r.choice(s, "load_mode")? {
                "fixed" => Some(r.quantity(s, "load")?),
                _ => None,
            };
            if let Some(l) = fixed_load {
                if !(l > 0.0) {
                    return Err(r.schema("sweep.load", "must be positive"));
                }
            }
            Sweep::RectEff { powers: power_grid(r)?, fixed_load, range: load_range(r)? }
        }
        "mpp_ratio" => Sweep::Mpp { powers: power_grid(r)?, range: load_range(r)? },
        "end_to_end" => Sweep::EndToEnd { powers: power_grid(r)?, hold_voltage: r.quantity(s, "hold_voltage")? },
        "cold_start" => Sweep::ColdStart {
            input_power: PowerLevel::from_dbm(r.quantity(s, "input_power")?)?,
            duration: r.quantity(s, "duration")?,
            dt: r.opt_quantity(s, "dt")?.unwrap_or(1e-3),
            record_interval: r.opt_quantity(s, "record_interval")?.unwrap_or(0.1),
            load_current: r.opt_quantity(s, "load_current")?.unwrap_or(0.0),
        },
        "link" => {
            let points = r.opt_count(s, "points")?.ok_or_else(|| r.missing(s, "points"))?;
            if points < 2 {
                return Err(r.schema("sweep.points", "empty sweep grid: need at least 2 points"));
            }
            let (a, b) = (r.quantity(s, "distance_start")?, r.quantity(s, "distance_stop")?);
            if !(a > 0.0 && b > a) {
                return Err(r.schema("sweep.distance_start", "need 0 < distance_start < distance_stop"));
            }
            Sweep::Link(LinkSweep {
                tx_power: PowerLevel::from_dbm(r.quantity(s, "tx_power")?)?,
                tx_gain_dbi: r.quantity(s, "tx_gain")?,
                rx_gain_dbi: r.quantity(s, "rx_gain")?,
                frequency: Frequency::from_hz(r.quantity(s, "frequency")?)?,
                distance_start: a,
                distance_stop: b,
                points,
                target_power: r.opt_quantity(s, "target_power")?.map(PowerLevel::from_dbm).transpose()?,
            })
        }
        _ => {
            let d = CalibrationTargets::default();
            let power = |key: &str, default: PowerLevel| -> Result<PowerLevel, CliError> {
                Ok(match r.opt_quantity(s, key)? {
                    Some(x) => PowerLevel::from_dbm(x)?,
                    None => default,
                })
            };
            Sweep::Calibrate(CalibrationTargets {
                match_frequency: match r.opt_quantity(s, "match_frequency")? {
                    Some(f) => Frequency::from_hz(f)?,
                    None => d.match_frequency,
                },
                match_power: power("match_power", d.match_power)?,
                peak_power: power("peak_power", d.peak_power)?,
                peak_efficiency: r.opt_number(s, "peak_efficiency")?.unwrap_or(d.peak_efficiency),
                floor_power: power("floor_power", d.floor_power)?,
                hold_voltage: r.opt_quantity(s, "hold_voltage")?.unwrap_or(d.hold_voltage),
                cold_start_power: power("cold_start_power", d.cold_start_power)?,
                wake_time: r.opt_quantity(s, "wake_time")?.unwrap_or(d.wake_time),
                normal_time: r.opt_quantity(s, "normal_time")?.unwrap_or(d.normal_time),
                overcharge_time: r.opt_quantity(s, "overcharge_time")?.unwrap_or(d.overcharge_time),
            })
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "name = t\npreset = table1-custom\n[sweep]\nkind = s11\nfreq_start = 100 MHz\nfreq_stop = 2 GHz\npoints = 1901\n";

    #[test]
    fn preset_fills_everything_but_the_sweep() {
        let s = Scenario::parse(BASIC, "t.scn").unwrap();
        assert_eq!(s.name, "t");
        assert_eq!(s.csv_name, "s11.csv");
        assert!(matches!(s.sweep, Sweep::S11 { points: 1901, .. }));
        assert_eq!(s.frontend.design().shunt_capacitor.value, 2.2e-12);
    }

    #[test]
    fn file_values_override_the_preset() {
        let text = BASIC.replace("[sweep]", "[frontend]\nc2 = 2.7 pF\n[sweep]");
        let s = Scenario::parse(&text, "t.scn").unwrap();
        assert_eq!(s.frontend.design().shunt_capacitor.value, 2.7e-12);
    }

    #[test]
    fn errors_carry_positions() {
        let text = BASIC.replace("points = 1901", "points = 1901\nbogus = 3");
        match Scenario::parse(&text, "t.scn").unwrap_err() {
            CliError::Parse { line, column, message, .. } => {
                assert_eq!((line, column), (8, 1));
                assert!(message.contains("bogus"));
            }
            e => panic!("{e}"),
        }
        let text = BASIC.replace("100 MHz", "100");
        match Scenario::parse(&text, "t.scn").unwrap_err() {
            CliError::Parse { line, column, message, .. } => {
                assert_eq!((line, column), (5, 14));
                assert!(message.contains("needs a unit"), "{message}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn keys_of_another_sweep_kind_are_rejected() {
        let text = format!("{BASIC}hold_voltage = 3.5 V\n");
        match Scenario::parse(&text, "t.scn").unwrap_err() {
            CliError::Schema { key, .. } => assert_eq!(key, "sweep.hold_voltage"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn missing_keys_without_a_preset() {
        let text = BASIC.replace("preset = table1-custom\n", "");
        match Scenario::parse(&text, "t.scn").unwrap_err() {
            CliError::Schema { key, message, .. } => {
                assert!(key.starts_with("frontend."), "{key}");
                assert!(message.contains("required"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn empty_power_grid_is_a_schema_error() {
        let text = "preset = table1-custom\n[sweep]\nkind = end_to_end\npower_start = 5 dBm\npower_stop = -5 dBm\npower_step = 1 dB\nhold_voltage = 3.5 V\n";
        assert!(matches!(Scenario::parse(text, "t.scn").unwrap_err(), CliError::Schema { .. }));
    }

    #[test]
    fn power_grid_hits_the_end_point() {
        let g = PowerGrid { start_dbm: -20.0, stop_dbm: 10.0, step_db: 1.0 };
        let l = g.levels();
        assert_eq!(l.len(), 31);
        assert_eq!(l[30].dbm(), 10.0);
    }

    #[test]
    fn duplicates_and_bad_headers() {
        let dup = format!("{BASIC}points = 3\n");
        assert!(matches!(Scenario::parse(&dup, "t.scn").unwrap_err(), CliError::Parse { line: 8, .. }));
        let hdr = BASIC.replace("[sweep]", "[sweep");
        assert!(matches!(Scenario::parse(&hdr, "t.scn").unwrap_err(), CliError::Parse { line: 3, .. }));
    }

    #[test]
    fn hash_is_of_the_bytes() {
        let a = Scenario::parse(BASIC, "t.scn").unwrap();
        let b = Scenario::parse(&format!("{BASIC}\n"), "t.scn").unwrap();
        assert_ne!(a.hash, b.hash);
        assert_eq!(a.hash, scenario_hash(BASIC.as_bytes()));
        assert_eq!(a.hash.len(), 64);
    }
}
