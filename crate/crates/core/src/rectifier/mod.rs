//! Voltage-doubler Schottky rectifier behind the π matching network.
//!
//! The circuit is turned into a nodal netlist (diode series resistance and
//! component ESRs become explicit resistors) and solved for its periodic
//! steady state at the carrier frequency.

pub mod diode;
pub mod mna;

use num_complex::Complex64;
use rayon::prelude::*;

pub use diode::{CapacitanceModel, DiodeModel, Junction, THERMAL_VOLTAGE_300K};
use mna::{node_voltage, Element, Netlist, PeriodicOptions, GROUND};

use crate::error::{MppError, SolverError};
use crate::matching::PiMatchDesign;
use crate::mpp::{find_mpp, LoadRange};
use crate::network::{ElementKind, LumpedElement, Placement};
use crate::units::{ComplexImpedance, Frequency, PowerLevel};

pub const DEFAULT_STEPS_PER_PERIOD: usize = 256;
pub const DEFAULT_MAX_PERIODS: usize = 200;
/// Upper bound for automatic step refinement.
pub const MAX_STEPS_PER_PERIOD: usize = 4096;

/// Sinusoidal Thevenin generator at the antenna port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    /// Open-circuit peak voltage (V).
    pub amplitude: f64,
    pub impedance: ComplexImpedance,
    pub frequency: Frequency,
}

impl SourceSpec {
    pub fn from_available_power(p: PowerLevel, impedance: ComplexImpedance, frequency: Frequency) -> Self {
        Self { amplitude: (8.0 * impedance.resistance * p.watts()).sqrt(), impedance, frequency }
    }

    /// `V^2 / (8 Re Z)`.
    pub fn available_power(&self) -> f64 {
        self.amplitude * self.amplitude / (8.0 * self.impedance.resistance)
    }
}

/// What sits between the generator and the rectifier input node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrontEnd {
    Matched(PiMatchDesign),
    /// A single ideal series capacitor.
    Coupled {
        capacitance: f64,
    },
    /// Straight wire.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Clamp diode to ground followed by a series diode into the output.
    VoltageDoubler,
    /// A single series diode into the output capacitor.
    HalfWave,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectifierCircuit {
    pub front_end: FrontEnd,
    pub diode: DiodeModel,
    pub output_capacitor: LumpedElement,
    pub load_resistance: f64,
    pub source: SourceSpec,
    pub topology: Topology,
}

impl RectifierCircuit {
    pub fn with_input_power(mut self, p: PowerLevel) -> Self {
        self.source = SourceSpec::from_available_power(p, self.source.impedance, self.source.frequency);
        self
    }

    pub fn with_load(mut self, ohms: f64) -> Self {
        self.load_resistance = ohms;
        self
    }

    pub fn with_diode(mut self, diode: DiodeModel) -> Self {
        self.diode = diode;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        self.diode.validate()?;
        if !(self.load_resistance > 0.0 && self.load_resistance.is_finite()) {
            return Err(SolverError::InvalidCircuit("load resistance must be positive".into()));
        }
        if !(self.source.amplitude >= 0.0 && self.source.amplitude.is_finite()) {
            return Err(SolverError::InvalidCircuit("source amplitude must be non-negative".into()));
        }
        if !(self.source.impedance.resistance > 0.0) {
            return Err(SolverError::InvalidCircuit("source resistance must be positive".into()));
        }
        if self.output_capacitor.kind != ElementKind::Capacitor {
            return Err(SolverError::InvalidCircuit("output element must be a capacitor".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    SourceSide,
    Loss,
    Load,
    Storage,
    Junction,
}

/// The netlist plus the handles needed to read results back out.
#[derive(Debug, Clone)]
pub struct BuiltCircuit {
    pub netlist: Netlist,
    roles: Vec<Role>,
    pub port_node: usize,
    pub rectifier_node: usize,
    pub output_node: usize,
    /// Element whose `a -> b` current enters the port node.
    port_feed: usize,
    /// Element whose `a -> b` current enters the rectifier node.
    rectifier_feed: usize,
    pub diodes: Vec<usize>,
    amplitude: f64,
    source_ohms: f64,
}

fn reactive(kind: ElementKind, a: usize, b: usize, value: f64) -> Element {
    match kind {
        ElementKind::Capacitor => Element::Capacitor { a, b, farads: value },
        ElementKind::Inductor => Element::Inductor { a, b, henries: value },
        ElementKind::Resistor => Element::Resistor { a, b, ohms: value },
    }
}

impl BuiltCircuit {
    fn push(&mut self, e: Element, role: Role) -> usize {
        self.roles.push(role);
        self.netlist.add(e)
    }

    /// Series part from `from` into a new node; returns (new node, element
    /// carrying the through current).
    fn series(&mut self, from: usize, name: &str, part: &LumpedElement, f0: Frequency) -> (usize, usize) {
        let esr = part.loss_resistance(f0);
        let mut a = from;
        if esr > 0.0 {
            let mid = self.netlist.node(&format!("{name}_esr"));
            self.push(Element::Resistor { a, b: mid, ohms: esr }, Role::Loss);
            a = mid;
        }
        let to = self.netlist.node(name);
        let idx = self.push(reactive(part.kind, a, to, part.value), Role::Storage);
        (to, idx)
    }

    fn shunt(&mut self, at: usize, name: &str, part: &LumpedElement, f0: Frequency) {
        let esr = part.loss_resistance(f0);
        let mut a = at;
        if esr > 0.0 {
            let mid = self.netlist.node(&format!("{name}_esr"));
            self.push(Element::Resistor { a, b: mid, ohms: esr }, Role::Loss);
            a = mid;
        }
        self.push(reactive(part.kind, a, GROUND, part.value), Role::Storage);
    }

    fn diode(&mut self, anode: usize, cathode: usize, name: &str, model: &DiodeModel) -> usize {
        let mut a = anode;
        if model.series_resistance > 0.0 {
            let mid = self.netlist.node(&format!("{name}_j"));
            self.push(Element::Resistor { a, b: mid, ohms: model.series_resistance }, Role::Loss);
            a = mid;
        }
        let idx = self.push(Element::Diode { anode: a, cathode, junction: model.junction() }, Role::Junction);
        self.diodes.push(idx);
        idx
    }
}

pub fn build_netlist(c: &RectifierCircuit) -> Result<BuiltCircuit, SolverError> {
    c.validate()?;
    let f0 = c.source.frequency;
    let mut b = BuiltCircuit {
        netlist: Netlist::new(f0.omega()),
        roles: Vec::new(),
        port_node: 0,
        rectifier_node: 0,
        output_node: 0,
        port_feed: 0,
        rectifier_feed: 0,
        diodes: Vec::new(),
        amplitude: c.source.amplitude,
        source_ohms: c.source.impedance.resistance,
    };

    let x_src = c.source.impedance.reactance;
    let src_node = b.netlist.node(if x_src == 0.0 { "port" } else { "source" });
    let src = b.push(
        Element::Source {
            node: src_node,
            ohms: c.source.impedance.resistance,
            amplitude: c.source.amplitude,
            phase: 0.0,
        },
        Role::SourceSide,
    );
    let (port, port_feed) = if x_src == 0.0 {
        (src_node, src)
    } else {
        let port = b.netlist.node("port");
        let e = if x_src > 0.0 {
            Element::Inductor { a: src_node, b: port, henries: x_src / f0.omega() }
        } else {
            Element::Capacitor { a: src_node, b: port, farads: -1.0 / (x_src * f0.omega()) }
        };
        (port, b.push(e, Role::SourceSide))
    };
    b.port_node = port;
    b.port_feed = port_feed;

    let (rect, feed) = match &c.front_end {
        FrontEnd::Matched(m) => {
            let (n1, _) = b.series(port, "c1", &m.dc_block, f0);
            b.shunt(n1, "c2", &m.shunt_capacitor, f0);
            b.series(n1, "rect_in", &m.series_inductor, f0)
        }
        FrontEnd::Coupled { capacitance } => {
            let part = LumpedElement::capacitor(*capacitance, Placement::Series)
                .map_err(|e| SolverError::InvalidCircuit(e.to_string()))?;
            b.series(port, "rect_in", &part, f0)
        }
        FrontEnd::Direct => (port, port_feed),
    };
    b.rectifier_node = rect;
    b.rectifier_feed = feed;

    let out = b.netlist.node("out");
    b.output_node = out;
    match c.topology {
        Topology::VoltageDoubler => {
            b.diode(GROUND, rect, "d1", &c.diode);
            b.diode(rect, out, "d2", &c.diode);
        }
        Topology::HalfWave => {
            b.diode(rect, out, "d1", &c.diode);
        }
    }
    b.shunt(out, "c3", &c.output_capacitor, f0);
    b.push(Element::Resistor { a: out, b: GROUND, ohms: c.load_resistance }, Role::Load);
    Ok(b)
}

/// Per-period energy bookkeeping (J).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyBalance {
    pub delivered: f64,
    pub diode_dissipation: f64,
    pub resistive_loss: f64,
    pub stored_change: f64,
    pub load: f64,
}

impl EnergyBalance {
    pub fn residual(&self) -> f64 {
        self.delivered - self.diode_dissipation - self.resistive_loss - self.stored_change - self.load
    }

    pub fn relative_residual(&self) -> f64 {
        let scale = self.delivered.abs().max(1e-300);
        self.residual().abs() / scale
    }
}

#[derive(Debug, Clone)]
pub struct SteadyStateSolution {
    pub time: Vec<f64>,
    pub node_names: Vec<String>,
    /// `node_waveforms[node][sample]` over one period, `steps + 1` samples.
    pub node_waveforms: Vec<Vec<f64>>,
    pub diode_currents: Vec<Vec<f64>>,
    pub port_current: Vec<f64>,
    pub rectifier_current: Vec<f64>,
    pub port_node: usize,
    pub rectifier_node: usize,
    pub output_node: usize,
    pub frequency: Frequency,
    pub load_resistance: f64,
    pub dc_output_voltage: f64,
    pub dc_output_power: f64,
    pub input_power_available: f64,
    pub input_power_delivered: f64,
    pub efficiency: f64,
    pub fundamental_input_impedance: Option<ComplexImpedance>,
    pub rectifier_input_impedance: Option<ComplexImpedance>,
    pub energy: EnergyBalance,
    pub converged: bool,
    pub periods_used: usize,
    pub shooting_iterations: usize,
    pub periodicity_error: f64,
}

impl SteadyStateSolution {
    pub fn node(&self, node: usize) -> &[f64] {
        &self.node_waveforms[node - 1]
    }
}

fn element_current(b: &BuiltCircuit, slot_of: &dyn Fn(usize) -> Option<usize>, e: usize, s: &[f64], t: f64) -> f64 {
    match b.netlist.elements[e] {
        Element::Source { node, ohms, amplitude, phase } => {
            (amplitude * (b.netlist.omega * t + phase).sin() - node_voltage(s, node)) / ohms
        }
        Element::Resistor { a, b: bn, ohms } => (node_voltage(s, a) - node_voltage(s, bn)) / ohms,
        Element::Diode { anode, cathode, junction } => {
            junction.current(node_voltage(s, anode) - node_voltage(s, cathode)).0
                + s[slot_of(e).expect("diode has a slot")]
        }
        Element::Capacitor { .. } | Element::Inductor { .. } => s[slot_of(e).expect("reactive slot")],
    }
}

/// Fundamental Fourier coefficient of a periodic sampled signal
/// (samples `1..=N` of a period).
pub fn fundamental(samples: &[f64], time: &[f64], omega: f64) -> Complex64 {
    let n = samples.len() - 1;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 1..=n {
        acc += samples[k] * Complex64::from_polar(1.0, -omega * time[k]);
    }
    acc * (2.0 / n as f64)
}

fn impedance_from(v: &[f64], i: &[f64], time: &[f64], omega: f64) -> Option<ComplexImpedance> {
    let vi = fundamental(v, time, omega);
    let ii = fundamental(i, time, omega);
    let scale = i.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if ii.norm() <= 1e-12 * scale || ii.norm() == 0.0 {
        return None;
    }
    Some(ComplexImpedance::from_complex(vi / ii))
}

pub fn solve_steady_state(
    c: &RectifierCircuit,
    steps_per_period: usize,
    max_periods: usize,
) -> Result<SteadyStateSolution, SolverError> {
    let built = build_netlist(c)?;
    let opts = PeriodicOptions { steps_per_period, max_periods, ..PeriodicOptions::default() };
    let sol = mna::solve_periodic(&built.netlist, opts)?;
    let integ = mna::Integrator::new(&built.netlist, sol.time_step)?;
    let slot_of = |e: usize| integ.slot_of(e);
    let h = sol.time_step;
    let n = steps_per_period;
    let time: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
    let states = &sol.states;
    let omega = built.netlist.omega;

    let node_count = built.netlist.node_count();
    let node_waveforms: Vec<Vec<f64>> =
        (1..=node_count).map(|nd| states.iter().map(|s| node_voltage(s, nd)).collect()).collect();
    let current_of = |e: usize| -> Vec<f64> {
        states.iter().zip(&time).map(|(s, &t)| element_current(&built, &slot_of, e, s, t)).collect()
    };
    let diode_currents: Vec<Vec<f64>> = built
        .diodes
        .iter()
        .map(|&e| match built.netlist.elements[e] {
            Element::Diode { anode, cathode, junction } => {
                states.iter().map(|s| junction.current(node_voltage(s, anode) - node_voltage(s, cathode)).0).collect()
            }
            _ => unreachable!(),
        })
        .collect();
    let port_current = current_of(built.port_feed);
    let rectifier_current =
        if built.rectifier_feed == built.port_feed { port_current.clone() } else { current_of(built.rectifier_feed) };

    if built.amplitude > 0.0 {
        for i in &diode_currents {
            let peak = i.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if peak > 1e-15 {
                let jump = i.windows(2).fold(0.0f64, |m, w| m.max((w[1] - w[0]).abs()));
                let ratio = jump / peak;
                if ratio > 0.5 {
                    return Err(SolverError::Resolution { ratio });
                }
            }
        }
    }

    let energy = energy_balance(&built, states, &time, h, &slot_of);
    let period = n as f64 * h;
    let out = node_waveforms[built.output_node - 1][1..].iter().sum::<f64>() / n as f64;
    let p_avail = built.amplitude * built.amplitude / (8.0 * built.source_ohms);
    let dc_power = out * out / c.load_resistance;
    let efficiency = if p_avail > 0.0 { (dc_power / p_avail).clamp(0.0, 1.0) } else { 0.0 };

    let fundamental_input_impedance = impedance_from(&node_waveforms[built.port_node - 1], &port_current, &time, omega);
    let rectifier_input_impedance =
        impedance_from(&node_waveforms[built.rectifier_node - 1], &rectifier_current, &time, omega);

    Ok(SteadyStateSolution {
        node_names: built.netlist.node_names().to_vec(),
        node_waveforms,
        diode_currents,
        port_current,
        rectifier_current,
        port_node: built.port_node,
        rectifier_node: built.rectifier_node,
        output_node: built.output_node,
        frequency: c.source.frequency,
        load_resistance: c.load_resistance,
        dc_output_voltage: out,
        dc_output_power: dc_power,
        input_power_available: p_avail,
        input_power_delivered: energy.delivered / period,
        efficiency,
        fundamental_input_impedance,
        rectifier_input_impedance,
        energy,
        converged: sol.converged,
        periods_used: sol.periods_used,
        shooting_iterations: sol.shooting_iterations,
        periodicity_error: sol.periodicity_error,
        time,
    })
}

/// Solves at the default resolution and doubles the steps per period
/// whenever the diode current is under-resolved. Non-convergence is an error.
pub fn solve_resolved(c: &RectifierCircuit) -> Result<SteadyStateSolution, SolverError> {
    let mut steps = DEFAULT_STEPS_PER_PERIOD;
    loop {
        match solve_steady_state(c, steps, DEFAULT_MAX_PERIODS) {
            Err(SolverError::Resolution { .. }) if steps < MAX_STEPS_PER_PERIOD => steps *= 2,
            Ok(s) if !s.converged => return Err(SolverError::NotConverged),
            other => return other,
        }
    }
}

fn energy_balance(
    b: &BuiltCircuit,
    states: &[Vec<f64>],
    time: &[f64],
    h: f64,
    slot_of: &dyn Fn(usize) -> Option<usize>,
) -> EnergyBalance {
    let mut eb = EnergyBalance::default();
    let first = &states[0];
    let last = &states[states.len() - 1];
    let v = |s: &[f64], a: usize, bn: usize| node_voltage(s, a) - node_voltage(s, bn);

    for k in 0..states.len() - 1 {
        let (s0, s1) = (&states[k], &states[k + 1]);
        let i0 = element_current(b, slot_of, b.port_feed, s0, time[k]);
        let i1 = element_current(b, slot_of, b.port_feed, s1, time[k + 1]);
        let vp = 0.5 * (node_voltage(s0, b.port_node) + node_voltage(s1, b.port_node));
        eb.delivered += h * vp * 0.5 * (i0 + i1);
    }

    for (e, el) in b.netlist.elements.iter().enumerate() {
        match (*el, b.roles[e]) {
            (_, Role::SourceSide) => {}
            (Element::Resistor { a, b: bn, ohms }, role) => {
                let mut acc = 0.0;
                for k in 0..states.len() - 1 {
                    let vm = 0.5 * (v(&states[k], a, bn) + v(&states[k + 1], a, bn));
                    acc += h * vm * vm / ohms;
                }
                if role == Role::Load {
                    eb.load += acc;
                } else {
                    eb.resistive_loss += acc;
                }
            }
            (Element::Capacitor { a, b: bn, farads }, _) => {
                let (v0, v1) = (v(first, a, bn), v(last, a, bn));
                eb.stored_change += 0.5 * farads * (v1 * v1 - v0 * v0);
            }
            (Element::Inductor { henries, .. }, _) => {
                let s = slot_of(e).expect("inductor slot");
                eb.stored_change += 0.5 * henries * (last[s] * last[s] - first[s] * first[s]);
            }
            (Element::Diode { anode, cathode, junction }, _) => {
                let s = slot_of(e).expect("diode slot");
                for k in 0..states.len() - 1 {
                    let (a0, a1) = (&states[k], &states[k + 1]);
                    let vm = 0.5 * (v(a0, anode, cathode) + v(a1, anode, cathode));
                    let ij =
                        0.5 * (junction.current(v(a0, anode, cathode)).0 + junction.current(v(a1, anode, cathode)).0);
                    let ic = 0.5 * (a0[s] + a1[s]);
                    eb.diode_dissipation += h * vm * ij;
                    eb.stored_change += h * vm * ic;
                }
            }
            (Element::Source { .. }, _) => {}
        }
    }
    eb
}

pub fn fundamental_input_impedance(s: &SteadyStateSolution) -> Result<ComplexImpedance, SolverError> {
    if !s.converged {
        return Err(SolverError::NotConverged);
    }
    s.fundamental_input_impedance.ok_or(SolverError::ZeroFundamentalCurrent)
}

/// Large-signal impedance looking into the diode pair at the carrier.
pub fn rectifier_input_impedance(s: &SteadyStateSolution) -> Result<ComplexImpedance, SolverError> {
    if !s.converged {
        return Err(SolverError::NotConverged);
    }
    s.rectifier_input_impedance.ok_or(SolverError::ZeroFundamentalCurrent)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadMode {
    /// Use the circuit's own load resistance.
    Fixed,
    /// Search the load for maximum output power at every point.
    MppTracked(LoadRange),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyPoint {
    pub efficiency: f64,
    /// Only for tracked sweeps.
    pub mpp_ratio: Option<f64>,
    pub load_resistance: f64,
    pub dc_output_voltage: f64,
}

pub fn efficiency_sweep(
    c: &RectifierCircuit,
    input_powers: &[PowerLevel],
    load_mode: LoadMode,
) -> Result<crate::mpp::PowerSweep<EfficiencyPoint>, MppError> {
    if input_powers.is_empty() {
        return Err(MppError::EmptySweep);
    }
    Ok(input_powers
        .par_iter()
        .map(|&p| {
            let circuit = c.with_input_power(p);
            let point = match load_mode {
                LoadMode::Fixed => solve_resolved(&circuit).map_err(MppError::from).map(|s| EfficiencyPoint {
                    efficiency: s.efficiency,
                    mpp_ratio: None,
                    load_resistance: s.load_resistance,
                    dc_output_voltage: s.dc_output_voltage,
                }),
                LoadMode::MppTracked(range) => find_mpp(&circuit, range).map(|m| EfficiencyPoint {
                    efficiency: (m.output_power_at_mpp / circuit.source.available_power()).clamp(0.0, 1.0),
                    mpp_ratio: Some(m.mpp_ratio),
                    load_resistance: m.optimal_load_resistance,
                    dc_output_voltage: m.mpp_voltage,
                }),
            };
            (p, point)
        })
        .collect())
}
