use crate::error::SolverError;
use crate::units::{BOLTZMANN, ELECTRON_CHARGE};

/// Thermal voltage at 300 K.
pub const THERMAL_VOLTAGE_300K: f64 = BOLTZMANN * 300.0 / ELECTRON_CHARGE;

/// Exponent beyond which the junction law is continued linearly.
const MAX_EXPONENT: f64 = 80.0;

/// Conductance added across every junction for numerical stability.
pub const GMIN: f64 = 1e-12;

/// Forward-bias fraction of `junction_potential` where the depletion
/// capacitance switches to its linear continuation.
const DEPLETION_FC: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacitanceModel {
    /// Zero-bias value at every voltage.
    Constant,
    /// Depletion law `Cj0 / (1 - V/Vj)^m`.
    BiasDependent,
}

/// Shockley diode with ohmic series resistance and junction capacitance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiodeModel {
    pub saturation_current: f64,
    pub ideality_factor: f64,
    pub series_resistance: f64,
    pub junction_capacitance_zero_bias: f64,
    pub thermal_voltage: f64,
    pub junction_potential: f64,
    pub grading_coefficient: f64,
    pub capacitance_model: CapacitanceModel,
}

impl DiodeModel {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |what: &str| Err(SolverError::InvalidCircuit(format!("diode {what}")));
        if !(self.saturation_current > 0.0 && self.saturation_current.is_finite()) {
            return bad("saturation current must be positive");
        }
        if !(1.0..=2.0).contains(&self.ideality_factor) {
            return bad("ideality factor must lie in [1, 2]");
        }
        if !(self.series_resistance >= 0.0) {
            return bad("series resistance must be non-negative");
        }
        if !(self.junction_capacitance_zero_bias >= 0.0) {
            return bad("junction capacitance must be non-negative");
        }
        if !(self.thermal_voltage > 0.0) {
            return bad("thermal voltage must be positive");
        }
        if self.capacitance_model == CapacitanceModel::BiasDependent
            && !(self.junction_potential > 0.0 && (0.0..1.0).contains(&self.grading_coefficient))
        {
            return bad("depletion parameters out of range");
        }
        Ok(())
    }

    pub fn junction(&self) -> Junction {
        Junction {
            saturation_current: self.saturation_current,
            emission_voltage: self.ideality_factor * self.thermal_voltage,
            cj0: self.junction_capacitance_zero_bias,
            vj: self.junction_potential,
            m: self.grading_coefficient,
            model: self.capacitance_model,
        }
    }

    /// Returns a copy with `Is` and `Rs` multiplied by the given factors.
    pub fn scaled(&self, is_scale: f64, rs_scale: f64) -> Self {
        Self {
            saturation_current: self.saturation_current * is_scale,
            series_resistance: self.series_resistance * rs_scale,
            ..*self
        }
    }
}

/// The intrinsic junction of a diode: exponential current plus charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Junction {
    pub saturation_current: f64,
    /// `n * Vt`.
    pub emission_voltage: f64,
    pub cj0: f64,
    pub vj: f64,
    pub m: f64,
    pub model: CapacitanceModel,
}

impl Junction {
    /// Current and small-signal conductance at `v`, including GMIN.
    pub fn current(&self, v: f64) -> (f64, f64) {
        let x = v / self.emission_voltage;
        let (i, g) = if x > MAX_EXPONENT {
            let e = MAX_EXPONENT.exp();
            let g = self.saturation_current * e / self.emission_voltage;
            (self.saturation_current * (e * (1.0 + x - MAX_EXPONENT) - 1.0), g)
        } else {
            let e = x.exp();
            (self.saturation_current * (e - 1.0), self.saturation_current * e / self.emission_voltage)
        };
        (i + GMIN * v, g + GMIN)
    }

    /// Stored charge and incremental capacitance at `v`.
    pub fn charge(&self, v: f64) -> (f64, f64) {
        match self.model {
            CapacitanceModel::Constant => (self.cj0 * v, self.cj0),
            CapacitanceModel::BiasDependent => {
                let (cj0, vj, m) = (self.cj0, self.vj, self.m);
                let knee = DEPLETION_FC * vj;
                if v < knee {
                    let arg = 1.0 - v / vj;
                    let q = cj0 * vj / (1.0 - m) * (1.0 - arg.powf(1.0 - m));
                    (q, cj0 * arg.powf(-m))
                } else {
                    let f1 = vj / (1.0 - m) * (1.0 - (1.0 - DEPLETION_FC).powf(1.0 - m));
                    let f2 = (1.0 - DEPLETION_FC).powf(1.0 + m);
                    let f3 = 1.0 - DEPLETION_FC * (1.0 + m);
                    let q = cj0 * (f1 + (f3 * (v - knee) + m / (2.0 * vj) * (v * v - knee * knee)) / f2);
                    (q, cj0 / f2 * (f3 + m * v / vj))
                }
            }
        }
    }

    /// Critical voltage used by the step limiter.
    pub fn critical_voltage(&self) -> f64 {
        let nvt = self.emission_voltage;
        nvt * (nvt / (std::f64::consts::SQRT_2 * self.saturation_current)).ln()
    }

    /// Limits a Newton update of the junction voltage so the exponential
    /// does not run away.
    pub fn limit(&self, v_new: f64, v_old: f64) -> f64 {
        let nvt = self.emission_voltage;
        let vcrit = self.critical_voltage();
        if v_new > vcrit && (v_new - v_old).abs() > 2.0 * nvt {
            if v_old > 0.0 {
                let arg = 1.0 + (v_new - v_old) / nvt;
                if arg > 0.0 {
                    v_old + nvt * arg.ln()
                } else {
                    vcrit
                }
            } else {
                nvt * (v_new / nvt).ln()
            }
        } else {
            v_new
        }
    }
}
