//! Linear two-port engine for lumped ladders.
//!
//! Elements carry an optional quality factor. A finite Q adds a series loss
//! resistance `|X| / Q` evaluated at the frequency being analysed; the
//! reference frequency stored on the element is informational only.

use std::ops::Mul;

use num_complex::Complex64;

use crate::error::NetworkError;
use crate::units::{reflection_coefficient, ComplexImpedance, Frequency};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Capacitor,
    Inductor,
    Resistor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Placement {
    Series,
    Shunt,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumpedElement {
    pub kind: ElementKind,
    /// Farads, henries or ohms depending on `kind`.
    pub value: f64,
    /// `None` means an ideal, lossless component.
    pub q_factor: Option<f64>,
    pub q_ref_frequency: Option<Frequency>,
    pub placement: Placement,
}

impl LumpedElement {
    pub fn new(kind: ElementKind, value: f64, placement: Placement) -> Result<Self, NetworkError> {
        if !(value.is_finite() && value > 0.0) {
            return Err(NetworkError::InvalidValue(value));
        }
        Ok(Self { kind, value, q_factor: None, q_ref_frequency: None, placement })
    }

    pub fn capacitor(farads: f64, placement: Placement) -> Result<Self, NetworkError> {
        Self::new(ElementKind::Capacitor, farads, placement)
    }

    pub fn inductor(henries: f64, placement: Placement) -> Result<Self, NetworkError> {
        Self::new(ElementKind::Inductor, henries, placement)
    }

    pub fn resistor(ohms: f64, placement: Placement) -> Result<Self, NetworkError> {
        Self::new(ElementKind::Resistor, ohms, placement)
    }

    pub fn with_q(mut self, q: Option<f64>, reference: Option<Frequency>) -> Result<Self, NetworkError> {
        if let Some(q) = q {
            if !(q > 0.0) {
                return Err(NetworkError::InvalidQ(q));
            }
        }
        self.q_factor = q;
        self.q_ref_frequency = reference;
        Ok(self)
    }

    pub fn with_placement(mut self, placement: Placement) -> Self {
        self.placement = placement;
        self
    }

    /// Ideal reactance at `f` (zero for resistors).
    pub fn reactance(&self, f: Frequency) -> f64 {
        match self.kind {
            ElementKind::Capacitor => -1.0 / (f.omega() * self.value),
            ElementKind::Inductor => f.omega() * self.value,
            ElementKind::Resistor => 0.0,
        }
    }

    /// Series loss resistance implied by the Q factor at `f`.
    pub fn loss_resistance(&self, f: Frequency) -> f64 {
        match self.q_factor {
            Some(q) => self.reactance(f).abs() / q,
            None => 0.0,
        }
    }
}

pub fn element_impedance(e: &LumpedElement, f: Frequency) -> ComplexImpedance {
    match e.kind {
        ElementKind::Resistor => ComplexImpedance::resistive(e.value),
        _ => ComplexImpedance::new(e.loss_resistance(f), e.reactance(f)),
    }
}

/// Transmission matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abcd {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Abcd {
    pub const IDENTITY: Abcd = Abcd {
        a: Complex64::new(1.0, 0.0),
        b: Complex64::new(0.0, 0.0),
        c: Complex64::new(0.0, 0.0),
        d: Complex64::new(1.0, 0.0),
    };

    pub fn series(z: Complex64) -> Self {
        Abcd { b: z, ..Self::IDENTITY }
    }

    pub fn shunt(y: Complex64) -> Self {
        Abcd { c: y, ..Self::IDENTITY }
    }

    pub fn determinant(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    /// Impedance seen at port 1 with `z_load` on port 2. `None` for an
    /// infinite result (open circuit seen at the input).
    pub fn input_impedance(&self, z_load: ComplexImpedance) -> Result<Option<Complex64>, NetworkError> {
        let (num, den) = if z_load.is_finite() {
            let zl = z_load.as_complex();
            (self.a * zl + self.b, self.c * zl + self.d)
        } else {
            (self.a, self.c)
        };
        if den.norm() == 0.0 {
            if num.norm() == 0.0 {
                return Err(NetworkError::Indeterminate);
            }
            return Ok(None);
        }
        Ok(Some(num / den))
    }

    pub fn max_abs_diff(&self, other: &Abcd) -> f64 {
        [(self.a - other.a).norm(), (self.b - other.b).norm(), (self.c - other.c).norm(), (self.d - other.d).norm()]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

impl Mul for Abcd {
    type Output = Abcd;

    fn mul(self, r: Abcd) -> Abcd {
        Abcd {
            a: self.a * r.a + self.b * r.c,
            b: self.a * r.b + self.b * r.d,
            c: self.c * r.a + self.d * r.c,
            d: self.c * r.b + self.d * r.d,
        }
    }
}

/// Anything that yields a transmission matrix at a frequency.
pub trait TwoPort {
    fn abcd(&self, f: Frequency) -> Abcd;
}

impl TwoPort for Abcd {
    fn abcd(&self, _f: Frequency) -> Abcd {
        *self
    }
}

pub fn element_abcd(e: &LumpedElement, f: Frequency) -> Abcd {
    let z = element_impedance(e, f).as_complex();
    match e.placement {
        Placement::Series => Abcd::series(z),
        Placement::Shunt => Abcd::shunt(z.inv()),
    }
}

impl TwoPort for LumpedElement {
    fn abcd(&self, f: Frequency) -> Abcd {
        element_abcd(self, f)
    }
}

/// An ordered ladder of lumped elements, source side first.
#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    stages: Vec<LumpedElement>,
}

impl Cascade {
    pub fn stages(&self) -> &[LumpedElement] {
        &self.stages
    }

    /// Appends `other` after `self`.
    pub fn then(&self, other: &Cascade) -> Cascade {
        let mut stages = self.stages.clone();
        stages.extend_from_slice(&other.stages);
        Cascade { stages }
    }

    pub fn is_lossless(&self) -> bool {
        self.stages.iter().all(|e| e.kind != ElementKind::Resistor && e.q_factor.is_none())
    }
}

pub fn cascade(stages: &[LumpedElement]) -> Result<Cascade, NetworkError> {
    if stages.is_empty() {
        return Err(NetworkError::EmptyCascade);
    }
    Ok(Cascade { stages: stages.to_vec() })
}

impl TwoPort for Cascade {
    fn abcd(&self, f: Frequency) -> Abcd {
        self.stages.iter().fold(Abcd::IDENTITY, |acc, e| acc * element_abcd(e, f))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPortResponse {
    pub frequency_grid: Vec<Frequency>,
    pub s11: Vec<Complex64>,
    /// Infinite entries mark an open circuit at the input.
    pub input_impedance: Vec<ComplexImpedance>,
}

impl TwoPortResponse {
    pub fn s11_db(&self) -> Vec<f64> {
        self.s11.iter().map(|g| 20.0 * g.norm().log10()).collect()
    }

    /// Frequency and depth (dB) of the deepest |S11| point.
    pub fn minimum(&self) -> (Frequency, f64) {
        let (idx, g) = self
            .s11
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .expect("response grid is never empty");
        (self.frequency_grid[idx], 20.0 * g.norm().log10())
    }
}

pub fn validate_grid(grid: &[Frequency]) -> Result<(), NetworkError> {
    if grid.is_empty() {
        return Err(NetworkError::EmptyGrid);
    }
    for (i, w) in grid.windows(2).enumerate() {
        if w[1].hz() <= w[0].hz() {
            return Err(NetworkError::UnsortedGrid(i + 1));
        }
    }
    Ok(())
}

/// Evenly spaced grid including both end points.
pub fn linear_grid(start: Frequency, stop: Frequency, points: usize) -> Result<Vec<Frequency>, NetworkError> {
    if points == 0 {
        return Err(NetworkError::EmptyGrid);
    }
    if points == 1 {
        return Ok(vec![start]);
    }
    let step = (stop.hz() - start.hz()) / (points - 1) as f64;
    let grid = (0..points).map(|i| Frequency::from_hz(start.hz() + step * i as f64)).collect::<Result<Vec<_>, _>>()?;
    validate_grid(&grid)?;
    Ok(grid)
}

/// Emulates a network-analyzer S11 sweep of `net` terminated by `termination`.
pub fn s11_sweep<N, T>(
    net: &N,
    termination: T,
    grid: &[Frequency],
    z_ref: ComplexImpedance,
) -> Result<TwoPortResponse, NetworkError>
where
    N: TwoPort + ?Sized,
    T: Fn(Frequency) -> ComplexImpedance,
{
    validate_grid(grid)?;
    let mut s11 = Vec::with_capacity(grid.len());
    let mut input_impedance = Vec::with_capacity(grid.len());
    for &f in grid {
        let abcd = net.abcd(f);
        let zin = abcd.input_impedance(termination(f)).map_err(|_| NetworkError::Singular { frequency_hz: f.hz() })?;
        match zin {
            Some(z) => {
                let z = ComplexImpedance::from_complex(z);
                let gamma =
                    reflection_coefficient(z, z_ref).map_err(|_| NetworkError::Singular { frequency_hz: f.hz() })?;
                s11.push(gamma);
                input_impedance.push(z);
            }
            None => {
                s11.push(Complex64::new(1.0, 0.0));
                input_impedance.push(ComplexImpedance::new(f64::INFINITY, 0.0));
            }
        }
    }
    Ok(TwoPortResponse { frequency_grid: grid.to_vec(), s11, input_impedance })
}
