//! Energy-flow model of the boost-converter power manager: cold start,
//! fractional open-circuit-voltage tracking, capacitor storage with
//! overcharge protection and under-voltage lockout, and the regulated rail.

use rayon::prelude::*;

use crate::error::{PmicError, SolverError};
use crate::mpp::{LoadResponse, OPEN_CIRCUIT_LOAD_OHMS};
use crate::rectifier::RectifierCircuit;
use crate::units::PowerLevel;

/// Boost conversion efficiency as a function of input power and voltage.
#[derive(Debug, Clone, PartialEq)]
pub enum BoostEfficiency {
    Constant(f64),
    /// Bilinear interpolation over `values[power][voltage]`, clamped at the
    /// table edges. Axes must be strictly increasing.
    Table {
        powers: Vec<f64>,
        voltages: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
    if axis.len() == 1 || x <= axis[0] {
        return (0, 0.0);
    }
    let last = axis.len() - 1;
    if x >= axis[last] {
        return (last - 1, 1.0);
    }
    let i = axis.partition_point(|&a| a <= x) - 1;
    (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
}

impl BoostEfficiency {
    pub fn at(&self, power: f64, voltage: f64) -> f64 {
        match self {
            Self::Constant(eta) => *eta,
            Self::Table { powers, voltages, values } => {
                let (i, tp) = bracket(powers, power);
                let (j, tv) = bracket(voltages, voltage);
                let get = |a: usize, b: usize| values[a.min(powers.len() - 1)][b.min(voltages.len() - 1)];
                let lo = get(i, j) * (1.0 - tv) + get(i, j + 1) * tv;
                let hi = get(i + 1, j) * (1.0 - tv) + get(i + 1, j + 1) * tv;
                lo * (1.0 - tp) + hi * tp
            }
        }
    }

    pub fn validate(&self) -> Result<(), PmicError> {
        let ok = |e: f64| (0.0..=1.0).contains(&e);
        match self {
            Self::Constant(eta) if ok(*eta) => Ok(()),
            Self::Constant(eta) => Err(PmicError::InvalidConfig(format!("boost efficiency {eta} outside [0, 1]"))),
            Self::Table { powers, voltages, values } => {
                let increasing = |a: &[f64]| !a.is_empty() && a.windows(2).all(|w| w[0] < w[1]);
                if !increasing(powers) || !increasing(voltages) {
                    return Err(PmicError::InvalidConfig("efficiency table axes must increase".into()));
                }
                if values.len() != powers.len()
                    || values.iter().any(|row| row.len() != voltages.len() || !row.iter().all(|&e| ok(e)))
                {
                    return Err(PmicError::InvalidConfig("efficiency table shape or values invalid".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmicConfig {
    pub cold_start_min_voltage: f64,
    pub cold_start_min_power: f64,
    pub normal_min_voltage: f64,
    pub mppt_fraction: f64,
    pub mppt_sample_period: f64,
    /// Harvesting pauses for this long at the start of every sample period.
    pub mppt_sense_window: f64,
    pub v_overcharge: f64,
    /// Released below `v_overcharge - overcharge_hysteresis`.
    pub overcharge_hysteresis: f64,
    pub v_uvlo: f64,
    /// Output re-enables at `v_uvlo + uvlo_hysteresis`.
    pub uvlo_hysteresis: f64,
    /// Cold start completes at `wake_fraction * v_overcharge`.
    pub wake_fraction: f64,
    pub v_regulated: f64,
    pub boost_max_voltage: f64,
    pub boost_efficiency: BoostEfficiency,
    pub storage_capacitance: f64,
    /// Drawn from storage whenever the IC is awake.
    pub ic_quiescent_current: f64,
    /// Drawn from storage while the regulated rail is on; also discharges
    /// the rail while it is off.
    pub regulator_quiescent_current: f64,
    /// Charge needed to bring a fully discharged rail up to `v_regulated`.
    pub inrush_charge: f64,
}

impl Default for PmicConfig {
    fn default() -> Self {
        Self {
            cold_start_min_voltage: 0.380,
            cold_start_min_power: 3e-6,
            normal_min_voltage: 0.050,
            mppt_fraction: 0.50,
            mppt_sample_period: 5.0,
            mppt_sense_window: 0.0,
            v_overcharge: 2.7,
            overcharge_hysteresis: 0.05,
            v_uvlo: 2.2,
            uvlo_hysteresis: 0.1,
            wake_fraction: 0.95,
            v_regulated: 1.2,
            boost_max_voltage: 4.5,
            boost_efficiency: BoostEfficiency::Constant(0.80),
            storage_capacitance: 47e-6,
            ic_quiescent_current: 0.0,
            regulator_quiescent_current: 1e-6,
            inrush_charge: 20e-6,
        }
    }
}

impl PmicConfig {
    pub fn validate(&self) -> Result<(), PmicError> {
        let bad = |m: &str| Err(PmicError::InvalidConfig(m.into()));
        if !(self.v_uvlo < self.v_overcharge) {
            return bad("v_uvlo must be below v_overcharge");
        }
        if !(self.mppt_fraction > 0.0 && self.mppt_fraction < 1.0) {
            return bad("mppt_fraction must lie in (0, 1)");
        }
        if !(self.mppt_sample_period > 0.0) || !(0.0..self.mppt_sample_period).contains(&self.mppt_sense_window) {
            return bad("MPPT sample period must be positive and exceed the sense window");
        }
        if !(self.storage_capacitance > 0.0) {
            return bad("storage capacitance must be positive");
        }
        if !(self.uvlo_hysteresis > 0.0) || !(self.overcharge_hysteresis >= 0.0) {
            return bad("hysteresis must be positive");
        }
        if !(self.v_uvlo + self.uvlo_hysteresis < self.v_overcharge) {
            return bad("UVLO re-enable threshold must be below v_overcharge");
        }
        if !(self.wake_fraction > 0.0 && self.wake_fraction <= 1.0) {
            return bad("wake_fraction must lie in (0, 1]");
        }
        let currents = [self.ic_quiescent_current, self.regulator_quiescent_current, self.inrush_charge];
        if currents.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return bad("currents and charges must be non-negative");
        }
        if !(self.v_regulated > 0.0) {
            return bad("regulated voltage must be positive");
        }
        self.boost_efficiency.validate()
    }

    pub fn wake_voltage(&self) -> f64 {
        self.wake_fraction * self.v_overcharge
    }

    pub fn reenable_voltage(&self) -> f64 {
        self.v_uvlo + self.uvlo_hysteresis
    }

    fn rail_capacitance(&self) -> f64 {
        self.inrush_charge / self.v_regulated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Asleep,
    ColdStart,
    Normal,
    UvloLockout,
    OverchargeProtect,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Asleep => "asleep",
            Mode::ColdStart => "cold_start",
            Mode::Normal => "normal",
            Mode::UvloLockout => "uvlo_lockout",
            Mode::OverchargeProtect => "overcharge_protect",
        }
    }

    fn output_allowed(self) -> bool {
        matches!(self, Mode::Normal | Mode::OverchargeProtect)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmicState {
    pub mode: Mode,
    pub v_storage: f64,
    pub v_out_active: bool,
    pub time: f64,
    /// Regulated rail voltage; decays while the output is off.
    pub v_rail: f64,
    /// Time since the last MPPT sample.
    pub mppt_clock: f64,
}

impl Default for PmicState {
    fn default() -> Self {
        Self { mode: Mode::Asleep, v_storage: 0.0, v_out_active: false, time: 0.0, v_rail: 0.0, mppt_clock: 0.0 }
    }
}

/// DC source seen by the converter input.
pub trait Harvester {
    fn open_circuit_voltage(&self) -> f64;
    /// Power delivered when the source is held at `voltage`.
    fn power_at(&self, voltage: f64) -> f64;
}

/// Piecewise-linear power-voltage curve through `(0, 0)` and `(Voc, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarvesterCurve {
    pub open_circuit_voltage: f64,
    /// `(voltage, power)` sorted by voltage, endpoints excluded.
    pub points: Vec<(f64, f64)>,
}

impl Harvester for HarvesterCurve {
    fn open_circuit_voltage(&self) -> f64 {
        self.open_circuit_voltage
    }

    fn power_at(&self, voltage: f64) -> f64 {
        if !(voltage > 0.0 && voltage < self.open_circuit_voltage) {
            return 0.0;
        }
        let mut prev = (0.0, 0.0);
        for &p in self.points.iter().chain(std::iter::once(&(self.open_circuit_voltage, 0.0))) {
            if voltage <= p.0 {
                let t = (voltage - prev.0) / (p.0 - prev.0);
                return prev.1 + t * (p.1 - prev.1);
            }
            prev = p;
        }
        0.0
    }
}

/// Load resistance at which the source output sits at `target` volts.
pub fn load_for_voltage<L: LoadResponse + ?Sized>(source: &L, target: f64) -> Result<(f64, f64), SolverError> {
    // Output voltage rises monotonically with load resistance; regula falsi
    // (Illinois) on ln R.
    let f = |x: f64| -> Result<f64, SolverError> { Ok(source.output_voltage(x.exp())? - target) };
    let (mut a, mut b) = (1.0f64.ln(), OPEN_CIRCUIT_LOAD_OHMS.ln());
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa >= 0.0 {
        return Ok((a.exp(), fa + target));
    }
    if fb <= 0.0 {
        return Ok((b.exp(), fb + target));
    }
    let tol = 1e-9 * target.abs().max(1e-9);
    let mut side = 0;
    for _ in 0..100 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c)?;
        if fc.abs() <= tol || (b - a).abs() < 1e-12 {
            return Ok((c.exp(), fc + target));
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    let c = 0.5 * (a + b);
    Ok((c.exp(), f(c)? + target))
}

impl HarvesterCurve {
    /// Samples the source exactly at the given fractions of its open-circuit
    /// voltage.
    pub fn sample<L: LoadResponse + ?Sized>(source: &L, fractions: &[f64]) -> Result<Self, SolverError> {
        let voc = source.output_voltage(OPEN_CIRCUIT_LOAD_OHMS)?;
        let mut fr: Vec<f64> = fractions.iter().copied().filter(|f| *f > 0.0 && *f < 1.0).collect();
        fr.sort_by(f64::total_cmp);
        fr.dedup();
        let mut points = Vec::with_capacity(fr.len());
        if voc > 0.0 {
            for f in fr {
                let (r, v) = load_for_voltage(source, f * voc)?;
                points.push((v, v * v / r));
            }
        }
        Ok(Self { open_circuit_voltage: voc, points })
    }
}

/// Power drawn at the fractional-Voc operating point and the voltage there.
fn operating_point(cfg: &PmicConfig, h: &dyn Harvester) -> (f64, f64) {
    let v = cfg.mppt_fraction * h.open_circuit_voltage();
    (v, h.power_at(v))
}

/// Advances the power manager by `dt`.
pub fn step(
    state: &PmicState,
    cfg: &PmicConfig,
    harvester: &dyn Harvester,
    load_current: f64,
    dt: f64,
) -> Result<PmicState, PmicError> {
    advance(state, cfg, harvester, load_current, dt).map(|(s, _)| s)
}

/// Like [`step`], also reporting whether the output was switched on.
fn advance(
    state: &PmicState,
    cfg: &PmicConfig,
    harvester: &dyn Harvester,
    load_current: f64,
    dt: f64,
) -> Result<(PmicState, bool), PmicError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(PmicError::InvalidStep(dt));
    }
    if dt > cfg.mppt_sample_period {
        return Err(PmicError::StepExceedsSamplePeriod { dt, period: cfg.mppt_sample_period });
    }
    let mut s = *state;
    let voc = harvester.open_circuit_voltage();
    let (v_op, p_op) = operating_point(cfg, harvester);
    let c = cfg.storage_capacitance;
    let mut energy = 0.5 * c * s.v_storage * s.v_storage;

    if s.mode == Mode::Asleep && voc >= cfg.cold_start_min_voltage && p_op >= cfg.cold_start_min_power {
        s.mode = Mode::ColdStart;
    }

    let sensing = s.mppt_clock < cfg.mppt_sense_window;
    let harvest = match s.mode {
        Mode::Asleep => 0.0,
        Mode::ColdStart => p_op,
        _ if sensing || v_op < cfg.normal_min_voltage => 0.0,
        _ => p_op,
    };
    let eta = cfg.boost_efficiency.at(harvest, v_op);
    let mut drain = 0.0;
    if !matches!(s.mode, Mode::Asleep | Mode::ColdStart) {
        drain += cfg.ic_quiescent_current;
    }
    if s.v_out_active {
        drain += cfg.regulator_quiescent_current + load_current.max(0.0);
    }
    energy += (harvest * eta - drain * s.v_storage) * dt;
    if !energy.is_finite() {
        return Err(PmicError::NonFiniteEnergy);
    }
    let mut v = (2.0 * energy.max(0.0) / c).sqrt();

    if s.mode == Mode::OverchargeProtect || v >= cfg.v_overcharge {
        v = v.min(cfg.v_overcharge);
    }
    if !s.v_out_active {
        let rail_c = cfg.rail_capacitance();
        if rail_c > 0.0 {
            s.v_rail = (s.v_rail - cfg.regulator_quiescent_current / rail_c * dt).max(0.0);
        } else {
            s.v_rail = 0.0;
        }
    }

    let mut enable = false;
    s.mode = match s.mode {
        Mode::Asleep => Mode::Asleep,
        Mode::ColdStart if v >= cfg.wake_voltage() => {
            enable = true;
            Mode::Normal
        }
        Mode::ColdStart if voc < cfg.cold_start_min_voltage || p_op < cfg.cold_start_min_power => Mode::Asleep,
        Mode::ColdStart => Mode::ColdStart,
        Mode::Normal if v < cfg.v_uvlo => Mode::UvloLockout,
        Mode::Normal if v >= cfg.v_overcharge => Mode::OverchargeProtect,
        Mode::Normal => Mode::Normal,
        Mode::UvloLockout if v >= cfg.reenable_voltage() => {
            enable = true;
            Mode::Normal
        }
        Mode::UvloLockout => Mode::UvloLockout,
        Mode::OverchargeProtect if v < cfg.v_overcharge - cfg.overcharge_hysteresis => Mode::Normal,
        Mode::OverchargeProtect => Mode::OverchargeProtect,
    };
    if enable {
        let q = cfg.rail_capacitance() * (cfg.v_regulated - s.v_rail).max(0.0);
        let e = (0.5 * c * v * v - q * v).max(0.0);
        v = (2.0 * e / c).sqrt();
        s.v_rail = cfg.v_regulated;
        if v < cfg.v_uvlo {
            s.mode = Mode::UvloLockout;
        }
    }
    s.v_out_active = s.mode.output_allowed();
    if s.v_out_active {
        s.v_rail = cfg.v_regulated;
    }
    s.v_storage = v;
    s.time += dt;
    s.mppt_clock = (s.mppt_clock + dt) % cfg.mppt_sample_period;
    Ok((s, enable))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilestoneKind {
    ColdStart,
    WakeUp,
    UvloLockout,
    Normal,
    OverchargeProtect,
    OverchargeRelease,
    Asleep,
}

impl MilestoneKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::ColdStart => "cold_start",
            Self::WakeUp => "wake_up",
            Self::UvloLockout => "uvlo_lockout",
            Self::Normal => "normal",
            Self::OverchargeProtect => "overcharge_protect",
            Self::OverchargeRelease => "overcharge_release",
            Self::Asleep => "asleep",
        }
    }

    fn of_transition(from: Mode, to: Mode) -> Self {
        match (from, to) {
            (Mode::ColdStart, Mode::Normal) => Self::WakeUp,
            (_, Mode::ColdStart) => Self::ColdStart,
            (_, Mode::UvloLockout) => Self::UvloLockout,
            (Mode::OverchargeProtect, Mode::Normal) => Self::OverchargeRelease,
            (_, Mode::Normal) => Self::Normal,
            (_, Mode::OverchargeProtect) => Self::OverchargeProtect,
            (_, Mode::Asleep) => Self::Asleep,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Milestone {
    pub kind: MilestoneKind,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub time: f64,
    pub mode: Mode,
    pub v_storage: f64,
    pub v_out_active: bool,
    pub harvested_power: f64,
    pub load_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub samples: Vec<TraceSample>,
    pub milestones: Vec<Milestone>,
    /// Set when the run stopped early; samples up to that point are kept.
    pub aborted: Option<PmicError>,
}

impl SimulationTrace {
    pub fn first(&self, kind: MilestoneKind) -> Option<f64> {
        self.milestones.iter().find(|m| m.kind == kind).map(|m| m.time)
    }

    /// Start of the last normal-mode stretch that leads into overcharge
    /// protection.
    pub fn normal_reached(&self) -> Option<f64> {
        let oc = self.milestones.iter().position(|m| m.kind == MilestoneKind::OverchargeProtect)?;
        self.milestones[..oc]
            .iter()
            .rev()
            .find(|m| matches!(m.kind, MilestoneKind::Normal | MilestoneKind::WakeUp))
            .map(|m| m.time)
    }

    pub fn count(&self, kind: MilestoneKind) -> usize {
        self.milestones.iter().filter(|m| m.kind == kind).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColdStartOptions {
    pub duration: f64,
    pub dt: f64,
    /// Spacing of recorded samples; mode changes are always recorded.
    pub record_interval: f64,
    pub load_current: f64,
}

impl Default for ColdStartOptions {
    fn default() -> Self {
        Self { duration: 120.0, dt: 1e-3, record_interval: 0.1, load_current: 0.0 }
    }
}

/// Runs the state machine from an empty store against a fixed harvester.
pub fn simulate(
    cfg: &PmicConfig,
    harvester: &dyn Harvester,
    opts: ColdStartOptions,
) -> Result<SimulationTrace, PmicError> {
    cfg.validate()?;
    if !(opts.duration > 0.0) {
        return Err(PmicError::InvalidConfig("duration must be positive".into()));
    }
    if !(opts.dt > 0.0) {
        return Err(PmicError::InvalidStep(opts.dt));
    }
    let steps = (opts.duration / opts.dt).round() as usize;
    let every = ((opts.record_interval / opts.dt).round() as usize).max(1);
    let mut state = PmicState::default();
    let mut trace = SimulationTrace { samples: Vec::new(), milestones: Vec::new(), aborted: None };
    let (v_op, p_op) = operating_point(cfg, harvester);
    let record = |s: &PmicState, trace: &mut SimulationTrace| {
        let harvesting = match s.mode {
            Mode::Asleep => false,
            Mode::ColdStart => true,
            _ => v_op >= cfg.normal_min_voltage,
        };
        let load =
            if s.v_out_active { (cfg.regulator_quiescent_current + opts.load_current) * s.v_storage } else { 0.0 };
        trace.samples.push(TraceSample {
            time: s.time,
            mode: s.mode,
            v_storage: s.v_storage,
            v_out_active: s.v_out_active,
            harvested_power: if harvesting { p_op } else { 0.0 },
            load_power: load,
        });
    };
    record(&state, &mut trace);
    for k in 1..=steps {
        let (next, enabled) = match advance(&state, cfg, harvester, opts.load_current, opts.dt) {
            Ok(n) => n,
            Err(e) => {
                trace.aborted = Some(e);
                break;
            }
        };
        // Keep the time base free of accumulated rounding.
        let next = PmicState { time: k as f64 * opts.dt, ..next };
        let changed = next.mode != state.mode || enabled;
        let mut push = |kind| trace.milestones.push(Milestone { kind, time: next.time });
        if enabled && next.mode == Mode::UvloLockout {
            // Inrush pulled storage straight back under the threshold.
            push(MilestoneKind::of_transition(state.mode, Mode::Normal));
            push(MilestoneKind::UvloLockout);
        } else if next.mode != state.mode {
            push(MilestoneKind::of_transition(state.mode, next.mode));
        }
        state = next;
        if changed || k % every == 0 {
            record(&state, &mut trace);
        }
    }
    Ok(trace)
}

/// Operating-point sampling used by the closed-loop runs.
pub fn harvester_for(
    cfg: &PmicConfig,
    frontend: &RectifierCircuit,
    input_power: PowerLevel,
) -> Result<HarvesterCurve, PmicError> {
    Ok(HarvesterCurve::sample(&frontend.with_input_power(input_power), &[cfg.mppt_fraction])?)
}

pub fn simulate_cold_start(
    cfg: &PmicConfig,
    input_power: PowerLevel,
    frontend: &RectifierCircuit,
    opts: ColdStartOptions,
) -> Result<SimulationTrace, PmicError> {
    cfg.validate()?;
    let h = harvester_for(cfg, frontend, input_power)?;
    simulate(cfg, &h, opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndToEndPoint {
    pub input_power: PowerLevel,
    pub operating_voltage: f64,
    pub harvested_power: f64,
    /// Net power into the held storage node (W).
    pub storage_power: f64,
    pub storage_current: f64,
    /// `storage_power / available power`; negative below the floor.
    pub efficiency: f64,
}

impl EndToEndPoint {
    pub fn energy_positive(&self) -> bool {
        self.storage_power > 0.0
    }
}

/// Steady-state efficiency with the storage node held at a fixed voltage.
pub fn end_to_end_point(
    cfg: &PmicConfig,
    harvester: &dyn Harvester,
    input_power: PowerLevel,
    hold_voltage: f64,
) -> EndToEndPoint {
    let (v_op, p_op) = operating_point(cfg, harvester);
    let p_in = if v_op >= cfg.normal_min_voltage { p_op } else { 0.0 };
    let duty = 1.0 - cfg.mppt_sense_window / cfg.mppt_sample_period;
    let storage_power = p_in * cfg.boost_efficiency.at(p_in, v_op) * duty - cfg.ic_quiescent_current * hold_voltage;
    EndToEndPoint {
        input_power,
        operating_voltage: v_op,
        harvested_power: p_in,
        storage_power,
        storage_current: storage_power / hold_voltage,
        efficiency: storage_power / input_power.watts(),
    }
}

fn check_hold(cfg: &PmicConfig, hold: f64) -> Result<(), PmicError> {
    if !(hold >= cfg.v_uvlo && hold <= cfg.boost_max_voltage) {
        return Err(PmicError::HoldVoltage { hold, min: cfg.v_uvlo, max: cfg.boost_max_voltage });
    }
    Ok(())
}

pub fn end_to_end_efficiency(
    cfg: &PmicConfig,
    frontend: &RectifierCircuit,
    input_powers: &[PowerLevel],
    hold_voltage: f64,
) -> Result<Vec<Result<EndToEndPoint, PmicError>>, PmicError> {
    cfg.validate()?;
    check_hold(cfg, hold_voltage)?;
    Ok(input_powers
        .par_iter()
        .map(|&p| {
            let h = harvester_for(cfg, frontend, p)?;
            Ok(end_to_end_point(cfg, &h, p, hold_voltage))
        })
        .collect())
}

/// Lowest input power with positive net storage power, by bisection
/// between a negative and a positive bracket.
pub fn energy_positive_floor(
    cfg: &PmicConfig,
    frontend: &RectifierCircuit,
    hold_voltage: f64,
    bracket_dbm: (f64, f64),
    tolerance_db: f64,
) -> Result<Option<f64>, PmicError> {
    cfg.validate()?;
    check_hold(cfg, hold_voltage)?;
    let positive = |dbm: f64| -> Result<bool, PmicError> {
        let p = PowerLevel::from_dbm(dbm).map_err(|e| PmicError::InvalidConfig(e.to_string()))?;
        let h = harvester_for(cfg, frontend, p)?;
        Ok(end_to_end_point(cfg, &h, p, hold_voltage).energy_positive())
    };
    let (mut lo, mut hi) = bracket_dbm;
    if positive(lo)? || !positive(hi)? {
        return Ok(None);
    }
    while hi - lo > tolerance_db {
        let mid = 0.5 * (lo + hi);
        if positive(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}
