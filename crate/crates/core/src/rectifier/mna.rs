//! Nodal time-domain engine for small nonlinear netlists driven by one
//! sinusoidal source.
//!
//! Reactive elements use trapezoidal companion models; the nonlinear
//! junctions are solved with damped Newton at every step. Periodic steady
//! state is found by shooting: the one-period map and its sensitivity matrix
//! are propagated together and `Φ(s) = s` is solved with Newton.

use nalgebra::DMatrix;

use super::diode::Junction;
use crate::error::SolverError;

pub const GROUND: usize = 0;

const NEWTON_ABSTOL: f64 = 1e-12;
const NEWTON_RELTOL: f64 = 1e-9;
const NEWTON_MAX_ITER: usize = 200;
const SHOOTING_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    Resistor {
        a: usize,
        b: usize,
        ohms: f64,
    },
    Capacitor {
        a: usize,
        b: usize,
        farads: f64,
    },
    Inductor {
        a: usize,
        b: usize,
        henries: f64,
    },
    /// `amplitude * sin(ωt + phase)` behind `ohms`, returning through ground.
    Source {
        node: usize,
        ohms: f64,
        amplitude: f64,
        phase: f64,
    },
    Diode {
        anode: usize,
        cathode: usize,
        junction: Junction,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    names: Vec<String>,
    pub elements: Vec<Element>,
    pub omega: f64,
}

impl Netlist {
    pub fn new(omega: f64) -> Self {
        Self { names: Vec::new(), elements: Vec::new(), omega }
    }

    /// Adds a node and returns its index (ground is 0).
    pub fn node(&mut self, name: &str) -> usize {
        self.names.push(name.to_string());
        self.names.len()
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn node_names(&self) -> &[String] {
        &self.names
    }

    pub fn add(&mut self, e: Element) -> usize {
        self.elements.push(e);
        self.elements.len() - 1
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }

    fn validate(&self) -> Result<(), SolverError> {
        let n = self.node_count();
        let check_node = |x: usize| {
            if x > n {
                Err(SolverError::InvalidCircuit(format!("node {x} does not exist")))
            } else {
                Ok(())
            }
        };
        if !(self.omega > 0.0) {
            return Err(SolverError::InvalidCircuit("angular frequency must be positive".into()));
        }
        for e in &self.elements {
            match *e {
                Element::Resistor { a, b, ohms: v }
                | Element::Capacitor { a, b, farads: v }
                | Element::Inductor { a, b, henries: v } => {
                    check_node(a)?;
                    check_node(b)?;
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(SolverError::InvalidCircuit(format!("element value {v}")));
                    }
                }
                Element::Source { node, ohms, amplitude, .. } => {
                    check_node(node)?;
                    if !(ohms > 0.0) || !(amplitude >= 0.0) {
                        return Err(SolverError::InvalidCircuit("source needs R > 0, amplitude >= 0".into()));
                    }
                }
                Element::Diode { anode, cathode, .. } => {
                    check_node(anode)?;
                    check_node(cathode)?;
                }
            }
        }
        Ok(())
    }
}

/// Where each quantity lives in the state vector.
#[derive(Debug, Clone)]
struct Layout {
    nodes: usize,
    /// Per element: index of its capacitor-current or inductor-current slot.
    slot: Vec<Option<usize>>,
    size: usize,
}

impl Layout {
    fn new(net: &Netlist) -> Self {
        let nodes = net.node_count();
        let mut next = nodes;
        let slot = net
            .elements
            .iter()
            .map(|e| match e {
                Element::Capacitor { .. } | Element::Inductor { .. } | Element::Diode { .. } => {
                    next += 1;
                    Some(next - 1)
                }
                _ => None,
            })
            .collect();
        Self { nodes, slot, size: next }
    }
}

fn volt(v: &[f64], node: usize) -> f64 {
    if node == GROUND {
        0.0
    } else {
        v[node - 1]
    }
}

/// Dense LU with partial pivoting on a row-major buffer.
#[derive(Debug, Clone)]
struct Lu {
    n: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl Lu {
    fn new(n: usize) -> Self {
        Self { n, a: vec![0.0; n * n], piv: vec![0; n] }
    }

    fn factor(&mut self) -> Result<(), SolverError> {
        let n = self.n;
        let a = &mut self.a;
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(SolverError::SingularMatrix);
            }
            self.piv[k] = p;
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
            }
            let d = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / d;
                a[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= f * a[k * n + j];
                    }
                }
            }
        }
        Ok(())
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let a = &self.a;
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= a[i * n + j] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= a[i * n + j] * b[j];
            }
            b[i] = s / a[i * n + i];
        }
    }
}

/// Fixed-step trapezoidal integrator over a netlist.
pub struct Integrator<'a> {
    net: &'a Netlist,
    layout: Layout,
    h: f64,
    lu: Lu,
    f: Vec<f64>,
    dy: Vec<f64>,
}

impl<'a> Integrator<'a> {
    pub fn new(net: &'a Netlist, h: f64) -> Result<Self, SolverError> {
        net.validate()?;
        let layout = Layout::new(net);
        let n = layout.nodes;
        Ok(Self { net, layout, h, lu: Lu::new(n), f: vec![0.0; n], dy: vec![0.0; n] })
    }

    pub fn state_size(&self) -> usize {
        self.layout.size
    }

    pub fn node_count(&self) -> usize {
        self.layout.nodes
    }

    /// Index of the current slot belonging to element `e`, if any.
    pub fn slot_of(&self, e: usize) -> Option<usize> {
        self.layout.slot[e]
    }

    /// Assembles residual (currents leaving each node) and Jacobian at `y`.
    /// Returns the largest branch-current magnitude seen.
    fn assemble(&mut self, y: &[f64], old: &[f64], t: f64) -> f64 {
        let n = self.layout.nodes;
        let h = self.h;
        self.f.iter_mut().for_each(|x| *x = 0.0);
        self.lu.a.iter_mut().for_each(|x| *x = 0.0);
        let mut imax: f64 = 0.0;
        let net = self.net;
        let slot = &self.layout.slot;
        let f = &mut self.f;
        let jac = &mut self.lu.a;
        let mut stamp = |a: usize, b: usize, i: f64, g: f64| {
            if a != GROUND {
                f[a - 1] += i;
                jac[(a - 1) * n + (a - 1)] += g;
                if b != GROUND {
                    jac[(a - 1) * n + (b - 1)] -= g;
                }
            }
            if b != GROUND {
                f[b - 1] -= i;
                jac[(b - 1) * n + (b - 1)] += g;
                if a != GROUND {
                    jac[(b - 1) * n + (a - 1)] -= g;
                }
            }
        };

        for (k, e) in net.elements.iter().enumerate() {
            match *e {
                Element::Resistor { a, b, ohms } => {
                    let g = 1.0 / ohms;
                    let i = g * (volt(y, a) - volt(y, b));
                    imax = imax.max(i.abs());
                    stamp(a, b, i, g);
                }
                Element::Capacitor { a, b, farads } => {
                    let s = slot[k].unwrap();
                    let gc = 2.0 * farads / h;
                    let v = volt(y, a) - volt(y, b);
                    let v0 = volt(old, a) - volt(old, b);
                    let i = gc * (v - v0) - old[s];
                    imax = imax.max(i.abs());
                    stamp(a, b, i, gc);
                }
                Element::Inductor { a, b, henries } => {
                    let s = slot[k].unwrap();
                    let gl = h / (2.0 * henries);
                    let v = volt(y, a) - volt(y, b);
                    let v0 = volt(old, a) - volt(old, b);
                    let i = old[s] + gl * (v + v0);
                    imax = imax.max(i.abs());
                    stamp(a, b, i, gl);
                }
                Element::Source { node, ohms, amplitude, phase } => {
                    let g = 1.0 / ohms;
                    let i = g * (volt(y, node) - amplitude * (net.omega * t + phase).sin());
                    imax = imax.max(i.abs());
                    stamp(node, GROUND, i, g);
                }
                Element::Diode { anode, cathode, junction } => {
                    let s = slot[k].unwrap();
                    let v = volt(y, anode) - volt(y, cathode);
                    let v0 = volt(old, anode) - volt(old, cathode);
                    let (id, gd) = junction.current(v);
                    let (q, c) = junction.charge(v);
                    let (q0, _) = junction.charge(v0);
                    let ic = 2.0 / h * (q - q0) - old[s];
                    imax = imax.max(id.abs()).max(ic.abs());
                    stamp(anode, cathode, id + ic, gd + 2.0 * c / h);
                }
            }
        }
        imax
    }

    /// Advances `old` (state at `t - h`) to `t`, writing into `new`.
    /// Returns the Newton iteration count.
    pub fn step(&mut self, old: &[f64], t: f64, new: &mut [f64]) -> Result<usize, SolverError> {
        let n = self.layout.nodes;
        let mut y: Vec<f64> = old[..n].to_vec();
        let mut converged = false;
        let mut iters = 0;
        for it in 0..NEWTON_MAX_ITER {
            iters = it + 1;
            let imax = self.assemble(&y, old, t);
            let fmax = self.f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if !fmax.is_finite() {
                return Err(SolverError::Newton { time: t, iterations: iters });
            }
            if fmax <= NEWTON_ABSTOL + NEWTON_RELTOL * imax {
                converged = true;
                break;
            }
            self.lu.factor()?;
            for i in 0..n {
                self.dy[i] = -self.f[i];
            }
            self.lu.solve(&mut self.dy);

            let mut alpha: f64 = 1.0;
            for e in &self.net.elements {
                if let Element::Diode { anode, cathode, junction } = *e {
                    let v_old = volt(&y, anode) - volt(&y, cathode);
                    let dv = volt(&self.dy, anode) - volt(&self.dy, cathode);
                    if dv != 0.0 {
                        let lim = junction.limit(v_old + dv, v_old);
                        if lim == v_old + dv {
                            continue;
                        }
                        let ratio = (lim - v_old) / dv;
                        if ratio.is_finite() && ratio > 0.0 {
                            alpha = alpha.min(ratio);
                        }
                    }
                }
            }
            let mut dmax: f64 = 0.0;
            let mut ymax: f64 = 0.0;
            for (yi, di) in y.iter_mut().zip(&self.dy).take(n) {
                *yi += alpha * di;
                dmax = dmax.max((alpha * di).abs());
                ymax = ymax.max(yi.abs());
            }
            // Roundoff floor: a step that no longer moves the solution.
            if dmax <= 4.0 * f64::EPSILON * (1.0 + ymax) {
                self.assemble(&y, old, t);
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SolverError::Newton { time: t, iterations: iters });
        }
        // The Jacobian must correspond to the accepted solution for the
        // sensitivity pass; `assemble` above left it in place.
        self.finish(old, &y, new);
        Ok(iters)
    }

    fn finish(&self, old: &[f64], y: &[f64], new: &mut [f64]) {
        let n = self.layout.nodes;
        let h = self.h;
        new[..n].copy_from_slice(y);
        for (k, e) in self.net.elements.iter().enumerate() {
            match *e {
                Element::Capacitor { a, b, farads } => {
                    let s = self.layout.slot[k].unwrap();
                    let v = volt(y, a) - volt(y, b);
                    let v0 = volt(old, a) - volt(old, b);
                    new[s] = 2.0 * farads / h * (v - v0) - old[s];
                }
                Element::Inductor { a, b, henries } => {
                    let s = self.layout.slot[k].unwrap();
                    let v = volt(y, a) - volt(y, b);
                    let v0 = volt(old, a) - volt(old, b);
                    new[s] = old[s] + h / (2.0 * henries) * (v + v0);
                }
                Element::Diode { anode, cathode, junction } => {
                    let s = self.layout.slot[k].unwrap();
                    let v = volt(y, anode) - volt(y, cathode);
                    let v0 = volt(old, anode) - volt(old, cathode);
                    new[s] = 2.0 / h * (junction.charge(v).0 - junction.charge(v0).0) - old[s];
                }
                _ => {}
            }
        }
    }

    /// Jacobian of the step map `d new / d old`, valid right after `step`.
    fn step_sensitivity(&mut self, old: &[f64], new: &[f64]) -> Result<DMatrix<f64>, SolverError> {
        let n = self.layout.nodes;
        let ns = self.layout.size;
        let h = self.h;
        // Rebuild the Jacobian at the accepted point and factor it.
        let y = new[..n].to_vec();
        self.assemble(&y, old, 0.0);
        self.lu.factor()?;

        // b = dF/d(old), column-major per state component.
        let mut b = DMatrix::<f64>::zeros(n, ns);
        let mut add = |row: usize, col: usize, v: f64| {
            if row != GROUND {
                b[(row - 1, col)] += v;
            }
        };
        let col_v = |node: usize| if node == GROUND { None } else { Some(node - 1) };
        for (k, e) in self.net.elements.iter().enumerate() {
            let (a, bn, g_hist, s) = match *e {
                Element::Capacitor { a, b, farads } => (a, b, -2.0 * farads / h, self.layout.slot[k].unwrap()),
                Element::Inductor { a, b, henries } => (a, b, h / (2.0 * henries), self.layout.slot[k].unwrap()),
                Element::Diode { anode, cathode, junction } => {
                    let v0 = volt(old, anode) - volt(old, cathode);
                    (anode, cathode, -2.0 * junction.charge(v0).1 / h, self.layout.slot[k].unwrap())
                }
                _ => continue,
            };
            let i_sign = if matches!(e, Element::Inductor { .. }) { 1.0 } else { -1.0 };
            for (node, sign) in [(a, 1.0), (bn, -1.0)] {
                if let Some(c) = col_v(a) {
                    add(node, c, sign * g_hist);
                }
                if let Some(c) = col_v(bn) {
                    add(node, c, -sign * g_hist);
                }
                add(node, s, sign * i_sign);
            }
        }

        // Node rows: x = -J^{-1} b.
        let mut t = DMatrix::<f64>::zeros(ns, ns);
        let mut col = vec![0.0; n];
        for j in 0..ns {
            for i in 0..n {
                col[i] = -b[(i, j)];
            }
            self.lu.solve(&mut col);
            for i in 0..n {
                t[(i, j)] = col[i];
            }
        }
        let dv = |t: &DMatrix<f64>, a: usize, bn: usize, j: usize| {
            let va = if a == GROUND { 0.0 } else { t[(a - 1, j)] };
            let vb = if bn == GROUND { 0.0 } else { t[(bn - 1, j)] };
            va - vb
        };
        let unit = |a: usize, bn: usize, j: usize| {
            let mut v = 0.0;
            if a != GROUND && a - 1 == j {
                v += 1.0;
            }
            if bn != GROUND && bn - 1 == j {
                v -= 1.0;
            }
            v
        };
        for (k, e) in self.net.elements.iter().enumerate() {
            match *e {
                Element::Capacitor { a, b: bn, farads } => {
                    let s = self.layout.slot[k].unwrap();
                    let gc = 2.0 * farads / h;
                    for j in 0..ns {
                        let mut v = gc * (dv(&t, a, bn, j) - unit(a, bn, j));
                        if j == s {
                            v -= 1.0;
                        }
                        t[(s, j)] = v;
                    }
                }
                Element::Diode { anode, cathode, junction } => {
                    let s = self.layout.slot[k].unwrap();
                    let v1 = volt(new, anode) - volt(new, cathode);
                    let v0 = volt(old, anode) - volt(old, cathode);
                    let c1 = 2.0 * junction.charge(v1).1 / h;
                    let c0 = 2.0 * junction.charge(v0).1 / h;
                    for j in 0..ns {
                        let mut v = c1 * dv(&t, anode, cathode, j) - c0 * unit(anode, cathode, j);
                        if j == s {
                            v -= 1.0;
                        }
                        t[(s, j)] = v;
                    }
                }
                Element::Inductor { a, b: bn, henries } => {
                    let s = self.layout.slot[k].unwrap();
                    let gl = h / (2.0 * henries);
                    for j in 0..ns {
                        let mut v = gl * (dv(&t, a, bn, j) + unit(a, bn, j));
                        if j == s {
                            v += 1.0;
                        }
                        t[(s, j)] = v;
                    }
                }
                _ => {}
            }
        }
        Ok(t)
    }
}

/// One integrated period.
#[derive(Debug, Clone)]
pub struct PeriodRun {
    /// `steps + 1` state vectors, first is the start state.
    pub states: Vec<Vec<f64>>,
    pub monodromy: Option<DMatrix<f64>>,
    pub newton_iterations: usize,
}

impl PeriodRun {
    pub fn end(&self) -> &[f64] {
        self.states.last().expect("period has samples")
    }
}

pub fn integrate_period(
    integ: &mut Integrator<'_>,
    start: &[f64],
    steps: usize,
    with_sensitivity: bool,
) -> Result<PeriodRun, SolverError> {
    let ns = integ.state_size();
    let h = integ.h;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(start.to_vec());
    let mut mono = with_sensitivity.then(|| DMatrix::<f64>::identity(ns, ns));
    let mut iters = 0;
    for k in 0..steps {
        let mut next = vec![0.0; ns];
        iters += integ.step(&states[k], h * (k + 1) as f64, &mut next)?;
        if let Some(m) = mono.as_mut() {
            let t = integ.step_sensitivity(&states[k], &next)?;
            *m = t * &*m;
        }
        states.push(next);
    }
    Ok(PeriodRun { states, monodromy: mono, newton_iterations: iters })
}

#[derive(Debug, Clone, Copy)]
pub struct PeriodicOptions {
    pub steps_per_period: usize,
    pub max_periods: usize,
    pub warmup_periods: usize,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        Self { steps_per_period: 256, max_periods: 200, warmup_periods: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct PeriodicSolution {
    /// Samples of the verified final period (`steps + 1` states).
    pub states: Vec<Vec<f64>>,
    pub time_step: f64,
    pub converged: bool,
    pub periods_used: usize,
    pub shooting_iterations: usize,
    /// `max |v(t) - v(t+T)| / max |v|` over the node voltages.
    pub periodicity_error: f64,
}

/// Smooth merit for the line search; Newton steps descend on it even where
/// the max norm stalls.
fn scaled_l2(r: &[f64], scale: &[f64]) -> f64 {
    r.iter().zip(scale).map(|(x, s)| (x / s).powi(2)).sum()
}

fn scaled_norm(r: &[f64], scale: &[f64]) -> f64 {
    r.iter().zip(scale).fold(0.0f64, |m, (x, s)| m.max(x.abs() / s))
}

/// Per-component weights for the shooting residual. Node voltages and
/// inductor currents count; trapezoidal capacitor-current slots are left
/// out because they alternate step to step and settle with the nodes.
fn state_scales(run: &PeriodRun, nodes: usize, inductor_slot: &[bool]) -> Vec<f64> {
    let mut vmax: f64 = 0.0;
    let mut imax: f64 = 0.0;
    for s in &run.states {
        for (i, x) in s.iter().enumerate() {
            if i < nodes {
                vmax = vmax.max(x.abs());
            } else if inductor_slot[i] {
                imax = imax.max(x.abs());
            }
        }
    }
    let vs = vmax.max(1e-12);
    let is = imax.max(1e-18);
    (0..run.states[0].len())
        .map(|i| {
            if i < nodes {
                vs
            } else if inductor_slot[i] {
                is
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// Pseudo-inverse solve of `(I - M) x = r`; drops directions whose singular
/// values vanish (e.g. trapezoidal ringing modes with unit multiplier).
fn shooting_update(m: &DMatrix<f64>, r: &[f64]) -> Vec<f64> {
    let n = r.len();
    let a = DMatrix::<f64>::identity(n, n) - m;
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-12;
    let b = nalgebra::DVector::from_column_slice(r);
    match svd.solve(&b, eps) {
        Ok(x) => x.iter().copied().collect(),
        Err(_) => vec![0.0; n],
    }
}

/// Outcome of one shooting attempt.
struct Shot {
    run: PeriodRun,
    converged: bool,
    iterations: usize,
    periods: usize,
}

/// Shooting Newton from `s0`. With `give_up_on_stall` it returns as soon as
/// a line search fails to reduce the merit, so the caller can fall back.
fn shoot(
    integ: &mut Integrator<'_>,
    mut s0: Vec<f64>,
    steps: usize,
    budget: usize,
    inductor_slot: &[bool],
    give_up_on_stall: bool,
) -> Result<Shot, SolverError> {
    let nodes = integ.node_count();
    let mut run = integrate_period(integ, &s0, steps, true)?;
    let mut periods = 1;
    let mut iterations = 0;
    loop {
        let scale = state_scales(&run, nodes, inductor_slot);
        let r: Vec<f64> = run.end().iter().zip(&s0).map(|(a, b)| a - b).collect();
        if scaled_norm(&r, &scale) <= SHOOTING_TOL {
            return Ok(Shot { run, converged: true, iterations, periods });
        }
        if periods >= budget {
            return Ok(Shot { run, converged: false, iterations, periods });
        }
        let merit = scaled_l2(&r, &scale);
        iterations += 1;
        let delta = shooting_update(run.monodromy.as_ref().expect("sensitivity requested"), &r);
        // Cap voltage moves at the largest swing seen so far.
        let vcap = scale[0].max(1e-6) * 2.0;
        let vmove = delta[..nodes].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut lambda = if vmove > vcap { vcap / vmove } else { 1.0 };
        loop {
            let trial: Vec<f64> = s0.iter().zip(&delta).map(|(s, d)| s + lambda * d).collect();
            let attempt = integrate_period(integ, &trial, steps, true);
            periods += 1;
            let last_chance = lambda < 1.0 / 64.0 || periods >= budget;
            match attempt {
                Ok(next) => {
                    let tr: Vec<f64> = next.end().iter().zip(&trial).map(|(a, b)| a - b).collect();
                    let better = scaled_l2(&tr, &scale) < merit;
                    if better || last_chance {
                        if !better && give_up_on_stall {
                            return Ok(Shot { run, converged: false, iterations, periods });
                        }
                        s0 = trial;
                        run = next;
                        break;
                    }
                }
                Err(e) if last_chance => {
                    if give_up_on_stall {
                        return Ok(Shot { run, converged: false, iterations, periods });
                    }
                    return Err(e);
                }
                Err(_) => {}
            }
            lambda *= 0.5;
        }
    }
}

fn with_amplitude_scale(net: &Netlist, k: f64) -> Netlist {
    let mut out = net.clone();
    for e in &mut out.elements {
        if let Element::Source { amplitude, .. } = e {
            *amplitude *= k;
        }
    }
    out
}

/// Walks the drive up from a small fraction to full amplitude, seeding each
/// shot with the previous periodic state. Used when Newton from a cold
/// start stalls on strongly nonlinear circuits.
fn shoot_with_continuation(
    net: &Netlist,
    h: f64,
    steps: usize,
    budget: usize,
    inductor_slot: &[bool],
) -> Result<Option<Shot>, SolverError> {
    let mut done = 0.0;
    let mut stride: f64 = 0.125;
    let mut s0 = vec![0.0; Integrator::new(net, h)?.state_size()];
    let mut periods = 0;
    let mut iterations = 0;
    loop {
        let target = (done + stride).min(1.0);
        let scaled = with_amplitude_scale(net, target);
        let mut integ = Integrator::new(&scaled, h)?;
        let shot = shoot(&mut integ, s0.clone(), steps, budget, inductor_slot, true);
        let (ok, used) = match &shot {
            Ok(s) => (s.converged, s.periods),
            Err(_) => (false, 1),
        };
        periods += used;
        if ok {
            let mut s = shot?;
            iterations += s.iterations;
            if target >= 1.0 {
                s.periods = periods;
                s.iterations = iterations;
                return Ok(Some(s));
            }
            s0 = s.run.end().to_vec();
            done = target;
            stride = (stride * 1.5).min(0.25);
        } else {
            stride *= 0.5;
            if stride < 1.0 / 256.0 || periods >= 8 * budget {
                return Ok(None);
            }
        }
    }
}

pub fn solve_periodic(net: &Netlist, opts: PeriodicOptions) -> Result<PeriodicSolution, SolverError> {
    if opts.steps_per_period < 64 {
        return Err(SolverError::TooFewSteps(opts.steps_per_period));
    }
    if opts.max_periods < 10 {
        return Err(SolverError::TooFewPeriods(opts.max_periods));
    }
    let steps = opts.steps_per_period;
    let h = net.period() / steps as f64;
    let mut integ = Integrator::new(net, h)?;
    let nodes = integ.node_count();
    let ns = integ.state_size();
    let mut inductor_slot = vec![false; ns];
    for (k, e) in net.elements.iter().enumerate() {
        if let (Element::Inductor { .. }, Some(s)) = (e, integ.slot_of(k)) {
            inductor_slot[s] = true;
        }
    }

    let mut s0 = vec![0.0; ns];
    for _ in 0..opts.warmup_periods {
        let run = integrate_period(&mut integ, &s0, steps, false)?;
        s0 = run.end().to_vec();
    }
    let budget = opts.max_periods.saturating_sub(opts.warmup_periods).max(1);
    let direct = shoot(&mut integ, s0.clone(), steps, budget, &inductor_slot, true);
    let mut shot = match direct {
        Ok(s) if s.converged => s,
        other => {
            let spent = other.as_ref().map_or(0, |s| s.periods);
            match shoot_with_continuation(net, h, steps, budget, &inductor_slot)? {
                Some(mut s) => {
                    s.periods += spent;
                    s
                }
                // Report the undamped attempt as it stands.
                None => shoot(&mut integ, s0, steps, budget, &inductor_slot, false)?,
            }
        }
    };
    shot.periods += opts.warmup_periods;

    // Verification period from the end state.
    let verify = integrate_period(&mut integ, shot.run.end(), steps, false)?;
    let mut diff: f64 = 0.0;
    let mut vmax: f64 = 0.0;
    for (a, b) in shot.run.states.iter().zip(&verify.states) {
        for i in 0..nodes {
            diff = diff.max((a[i] - b[i]).abs());
            vmax = vmax.max(a[i].abs());
        }
    }
    let periodicity_error = if vmax > 0.0 { diff / vmax } else { 0.0 };
    Ok(PeriodicSolution {
        states: verify.states,
        time_step: h,
        converged: shot.converged && periodicity_error <= 1e-6,
        periods_used: shot.periods + 1,
        shooting_iterations: shot.iterations,
        periodicity_error,
    })
}

/// Voltage of `node` in a state vector.
pub fn node_voltage(state: &[f64], node: usize) -> f64 {
    volt(state, node)
}
