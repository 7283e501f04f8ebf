//! Maximum-power-point search over the resistive load.

use rayon::prelude::*;

use crate::error::{MppError, SolverError};
use crate::rectifier::{solve_resolved, RectifierCircuit};
use crate::units::PowerLevel;

/// Load used in place of an open circuit.
pub const OPEN_CIRCUIT_LOAD_OHMS: f64 = 1e9;

const GOLDEN: f64 = 0.618_033_988_749_894_8;
/// Bracket width in `ln R` at which refinement stops.
const LOG_R_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadRange {
    pub min_ohms: f64,
    pub max_ohms: f64,
    pub coarse_points: usize,
}

impl Default for LoadRange {
    fn default() -> Self {
        Self { min_ohms: 100.0, max_ohms: 1e6, coarse_points: 25 }
    }
}

impl LoadRange {
    pub fn validate(&self) -> Result<(), MppError> {
        if !(self.min_ohms > 0.0 && self.min_ohms < self.max_ohms && self.max_ohms.is_finite()) {
            return Err(MppError::InvalidRange(self.min_ohms, self.max_ohms));
        }
        if self.coarse_points < 8 {
            return Err(MppError::TooFewPoints(self.coarse_points));
        }
        Ok(())
    }

    pub fn coarse_grid(&self) -> Vec<f64> {
        let (a, b) = (self.min_ohms.ln(), self.max_ohms.ln());
        let n = self.coarse_points - 1;
        (0..=n).map(|k| if k == n { self.max_ohms } else { (a + (b - a) * k as f64 / n as f64).exp() }).collect()
    }
}

/// Anything that produces a DC output voltage for a given resistive load.
pub trait LoadResponse {
    fn output_voltage(&self, load_ohms: f64) -> Result<f64, SolverError>;
}

impl LoadResponse for RectifierCircuit {
    fn output_voltage(&self, load_ohms: f64) -> Result<f64, SolverError> {
        Ok(solve_resolved(&self.with_load(load_ohms))?.dc_output_voltage)
    }
}

/// Linear source with series resistance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheveninSource {
    pub open_circuit_voltage: f64,
    pub resistance: f64,
}

impl LoadResponse for TheveninSource {
    fn output_voltage(&self, load_ohms: f64) -> Result<f64, SolverError> {
        Ok(self.open_circuit_voltage * load_ohms / (load_ohms + self.resistance))
    }
}

/// Source with `I(V) = Isc (1 - (V/Voc)^k)`. Its maximum power point sits
/// at `V/Voc = (k + 1)^(-1/k)`, which covers ratios between 1/e and 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawSource {
    pub open_circuit_voltage: f64,
    pub short_circuit_current: f64,
    pub exponent: f64,
}

impl PowerLawSource {
    pub fn mpp_ratio(&self) -> f64 {
        (self.exponent + 1.0).powf(-1.0 / self.exponent)
    }

    /// Exponent whose maximum power point lies at the given ratio.
    pub fn exponent_for_ratio(ratio: f64) -> f64 {
        // ratio grows monotonically with k; bisect in ln k.
        let (mut lo, mut hi) = (1e-3f64.ln(), 1e3f64.ln());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let k = mid.exp();
            if (k + 1.0).powf(-1.0 / k) < ratio {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).exp()
    }
}

impl LoadResponse for PowerLawSource {
    fn output_voltage(&self, load_ohms: f64) -> Result<f64, SolverError> {
        let f = |v: f64| {
            v / load_ohms - self.short_circuit_current * (1.0 - (v / self.open_circuit_voltage).powf(self.exponent))
        };
        let (mut lo, mut hi) = (0.0, self.open_circuit_voltage);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Frontend whose MPP ratio shifts linearly with input power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearShiftFrontend {
    pub reference_dbm: f64,
    pub ratio_at_reference: f64,
    /// Ratio change per dB of input power.
    pub slope_per_db: f64,
    /// Source resistance used to scale the curve.
    pub resistance: f64,
}

impl LinearShiftFrontend {
    pub fn at_power(&self, p: PowerLevel) -> PowerLawSource {
        let ratio = self.ratio_at_reference + self.slope_per_db * (p.dbm() - self.reference_dbm);
        let voc = (p.watts() * self.resistance).sqrt() * 2.0;
        PowerLawSource {
            open_circuit_voltage: voc,
            short_circuit_current: voc / self.resistance,
            exponent: PowerLawSource::exponent_for_ratio(ratio.clamp(0.37, 0.99)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MppResult {
    pub optimal_load_resistance: f64,
    pub mpp_voltage: f64,
    pub open_circuit_voltage: f64,
    pub mpp_ratio: f64,
    pub output_power_at_mpp: f64,
    /// Coarse sweep as (load, output power).
    pub load_sweep_trace: Vec<(f64, f64)>,
    /// False when the coarse sweep shows more than one local maximum.
    pub unimodal: bool,
}

fn count_local_maxima(p: &[f64]) -> usize {
    let peak = p.iter().cloned().fold(0.0f64, f64::max);
    let tol = 1e-9 * peak;
    let mut count = 0;
    let mut rising = true;
    for w in p.windows(2) {
        if w[1] > w[0] + tol {
            rising = true;
        } else if w[1] < w[0] - tol {
            if rising {
                count += 1;
            }
            rising = false;
        }
    }
    if rising {
        count += 1;
    }
    count
}

pub fn find_mpp_with<L: LoadResponse + ?Sized>(source: &L, range: LoadRange) -> Result<MppResult, MppError> {
    range.validate()?;
    let power = |r: f64| -> Result<(f64, f64), MppError> {
        let v = source.output_voltage(r)?;
        Ok((v, v * v / r))
    };

    let grid = range.coarse_grid();
    let mut trace = Vec::with_capacity(grid.len());
    let mut volts = Vec::with_capacity(grid.len());
    for &r in &grid {
        let (v, p) = power(r)?;
        trace.push((r, p));
        volts.push(v);
    }
    let powers: Vec<f64> = trace.iter().map(|t| t.1).collect();
    let unimodal = count_local_maxima(&powers) <= 1;
    let best = powers.iter().enumerate().fold(0, |b, (i, &p)| if p > powers[b] { i } else { b });

    let mut lo = grid[best.saturating_sub(1)].ln();
    let mut hi = grid[(best + 1).min(grid.len() - 1)].ln();
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = power(x1.exp())?;
    let mut f2 = power(x2.exp())?;
    while hi - lo > LOG_R_TOLERANCE {
        if f1.1 >= f2.1 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = power(x1.exp())?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = power(x2.exp())?;
        }
    }
    let (mut r_opt, (mut v_opt, mut p_opt)) = if f1.1 >= f2.1 { (x1.exp(), f1) } else { (x2.exp(), f2) };
    if powers[best] > p_opt {
        r_opt = grid[best];
        v_opt = volts[best];
        p_opt = powers[best];
    }

    let voc = source.output_voltage(OPEN_CIRCUIT_LOAD_OHMS)?;
    let ratio = if voc > 0.0 { v_opt / voc } else { 0.0 };
    Ok(MppResult {
        optimal_load_resistance: r_opt,
        mpp_voltage: v_opt,
        open_circuit_voltage: voc,
        mpp_ratio: ratio,
        output_power_at_mpp: p_opt,
        load_sweep_trace: trace,
        unimodal,
    })
}

pub fn find_mpp(c: &RectifierCircuit, range: LoadRange) -> Result<MppResult, MppError> {
    find_mpp_with(c, range)
}

/// Per-power outcomes of a sweep, in input order.
pub type PowerSweep<T> = Vec<(PowerLevel, Result<T, MppError>)>;

/// Runs [`find_mpp_with`] at every power, in parallel, keeping input order.
pub fn mpp_ratio_sweep_with<L, F>(
    make: F,
    input_powers: &[PowerLevel],
    range: LoadRange,
) -> Result<PowerSweep<MppResult>, MppError>
where
    L: LoadResponse,
    F: Fn(PowerLevel) -> L + Sync,
{
    if input_powers.is_empty() {
        return Err(MppError::EmptySweep);
    }
    range.validate()?;
    Ok(input_powers.par_iter().map(|&p| (p, find_mpp_with(&make(p), range))).collect())
}

pub fn mpp_ratio_sweep(
    c: &RectifierCircuit,
    input_powers: &[PowerLevel],
    range: LoadRange,
) -> Result<PowerSweep<MppResult>, MppError> {
    mpp_ratio_sweep_with(|p| c.with_input_power(p), input_powers, range)
}
