//! Physical quantities shared by every stage of the receive chain.
//!
//! Powers are carried in dBm because that is how sweeps are specified; the
//! solvers convert to watts on demand.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::UnitError;

/// Default reference impedance of the measurement setup.
pub const Z0_OHMS: f64 = 50.0;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Elementary charge (C).
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;

/// A power level in decibels referenced to one milliwatt.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PowerLevel {
    value_dbm: f64,
}

impl PowerLevel {
    pub fn from_dbm(value_dbm: f64) -> Result<Self, UnitError> {
        if !value_dbm.is_finite() {
            return Err(UnitError::NonFinite("power level"));
        }
        Ok(Self { value_dbm })
    }

    pub fn from_watts(watts: f64) -> Result<Self, UnitError> {
        watts_to_dbm(watts)
    }

    pub fn dbm(self) -> f64 {
        self.value_dbm
    }

    pub fn watts(self) -> f64 {
        1e-3 * 10f64.powf(self.value_dbm / 10.0)
    }
}

impl fmt::Display for PowerLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} dBm", self.value_dbm)
    }
}

pub fn dbm_to_watts(p: PowerLevel) -> f64 {
    p.watts()
}

pub fn watts_to_dbm(watts: f64) -> Result<PowerLevel, UnitError> {
    if !watts.is_finite() {
        return Err(UnitError::NonFinite("power"));
    }
    if watts <= 0.0 {
        return Err(UnitError::NonPositive("power", watts));
    }
    Ok(PowerLevel { value_dbm: 10.0 * (watts / 1e-3).log10() })
}

/// A strictly positive frequency.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Frequency(f64);

impl Frequency {
    pub fn from_hz(hertz: f64) -> Result<Self, UnitError> {
        if !hertz.is_finite() {
            return Err(UnitError::NonFinite("frequency"));
        }
        if hertz <= 0.0 {
            return Err(UnitError::NonPositive("frequency", hertz));
        }
        Ok(Self(hertz))
    }

    pub fn from_mhz(mhz: f64) -> Result<Self, UnitError> {
        Self::from_hz(mhz * 1e6)
    }

    pub fn hz(self) -> f64 {
        self.0
    }

    pub fn omega(self) -> f64 {
        2.0 * PI * self.0
    }

    pub fn period(self) -> f64 {
        1.0 / self.0
    }

    pub fn wavelength(self) -> f64 {
        SPEED_OF_LIGHT / self.0
    }
}

/// Series resistance and reactance of a one-port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexImpedance {
    pub resistance: f64,
    pub reactance: f64,
}

impl ComplexImpedance {
    pub const fn new(resistance: f64, reactance: f64) -> Self {
        Self { resistance, reactance }
    }

    pub const fn resistive(resistance: f64) -> Self {
        Self::new(resistance, 0.0)
    }

    pub fn as_complex(self) -> Complex64 {
        Complex64::new(self.resistance, self.reactance)
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self::new(z.re, z.im)
    }

    /// Parallel-equivalent resistance and susceptance, `(R_p, B)`.
    pub fn parallel_form(self) -> (f64, f64) {
        let y = self.as_complex().inv();
        (1.0 / y.re, y.im)
    }

    pub fn is_finite(self) -> bool {
        self.resistance.is_finite() && self.reactance.is_finite()
    }
}

impl Default for ComplexImpedance {
    fn default() -> Self {
        Self::resistive(Z0_OHMS)
    }
}

impl fmt::Display for ComplexImpedance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.reactance < 0.0 {
            write!(f, "{} - j{} Ω", self.resistance, -self.reactance)
        } else {
            write!(f, "{} + j{} Ω", self.resistance, self.reactance)
        }
    }
}

/// Power-wave reflection coefficient of `z_load` against `z_ref`.
///
/// For a real reference this is the familiar `(Z - Z0) / (Z + Z0)`.
pub fn reflection_coefficient(z_load: ComplexImpedance, z_ref: ComplexImpedance) -> Result<Complex64, UnitError> {
    if z_ref.resistance <= 0.0 {
        return Err(UnitError::NonPositive("reference resistance", z_ref.resistance));
    }
    let zl = z_load.as_complex();
    let zr = z_ref.as_complex();
    let den = zl + zr;
    if den.norm() == 0.0 || !den.norm().is_finite() {
        return Err(UnitError::SingularReflection);
    }
    Ok((zl - zr.conj()) / den)
}

/// Reflection coefficient of an open circuit (the `Z -> inf` limit).
pub const OPEN_CIRCUIT_GAMMA: Complex64 = Complex64::new(1.0, 0.0);

/// `20 log10 |gamma|`.
pub fn return_loss_db(gamma: Complex64) -> f64 {
    20.0 * gamma.norm().log10()
}
