//! Fitting of the unpublished model parameters against measured targets.
//!
//! Three stages, each with its own knobs:
//! 1. zero-bias junction capacitance, so the matched S11 dip sits on the
//!    target frequency;
//! 2. boost efficiency and IC quiescent current, from the peak end-to-end
//!    efficiency and the energy-positive floor;
//! 3. storage capacitance, regulator quiescent current and rail inrush
//!    charge, from the cold-start milestone times.

use crate::error::CalibrationError;
use crate::mpp::{find_mpp, LoadRange, MppResult};
use crate::network::{linear_grid, s11_sweep};
use crate::pmic::{
    end_to_end_point, energy_positive_floor, harvester_for, simulate, BoostEfficiency, ColdStartOptions, Harvester,
    MilestoneKind, PmicConfig, SimulationTrace,
};
use crate::rectifier::{rectifier_input_impedance, solve_resolved, FrontEnd, RectifierCircuit};
use crate::units::{ComplexImpedance, Frequency, PowerLevel, Z0_OHMS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTargets {
    pub match_frequency: Frequency,
    /// Drive level of the S11 measurement.
    pub match_power: PowerLevel,
    pub peak_power: PowerLevel,
    pub peak_efficiency: f64,
    pub floor_power: PowerLevel,
    pub hold_voltage: f64,
    pub cold_start_power: PowerLevel,
    pub wake_time: f64,
    pub normal_time: f64,
    pub overcharge_time: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        let dbm = |x| PowerLevel::from_dbm(x).expect("finite");
        Self {
            match_frequency: Frequency::from_mhz(915.0).expect("positive"),
            match_power: dbm(0.0),
            peak_power: dbm(3.0),
            peak_efficiency: 0.57,
            floor_power: dbm(-16.0),
            hold_voltage: 3.5,
            cold_start_power: dbm(-15.0),
            wake_time: 35.0,
            normal_time: 56.0,
            overcharge_time: 93.0,
        }
    }
}

/// The S11 dip of the matching network loaded by the rectifier at its
/// maximum power point.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSignature {
    pub mpp: MppResult,
    /// Parallel equivalent of the rectifier input at the carrier.
    pub termination_resistance: f64,
    pub effective_capacitance: f64,
    pub minimum_frequency: Frequency,
    pub minimum_db: f64,
}

/// Sweep used when locating the S11 dip during calibration.
pub fn calibration_grid() -> Vec<Frequency> {
    let f = |mhz| Frequency::from_mhz(mhz).expect("positive");
    linear_grid(f(700.0), f(1130.0), 4301).expect("valid grid")
}

pub fn match_signature(
    c: &RectifierCircuit,
    power: PowerLevel,
    range: LoadRange,
    grid: &[Frequency],
) -> Result<MatchSignature, CalibrationError> {
    let FrontEnd::Matched(design) = c.front_end else {
        return Err(CalibrationError::NotMatched);
    };
    let driven = c.with_input_power(power);
    let mpp = find_mpp(&driven, range)?;
    let s = solve_resolved(&driven.with_load(mpp.optimal_load_resistance))?;
    let z = rectifier_input_impedance(&s)?;
    let (rp, b) = z.parallel_form();
    let cp = (b / c.source.frequency.omega()).max(0.0);
    let net = design.with_effective_capacitance(cp).network();
    let r = s11_sweep(&net, |_| ComplexImpedance::resistive(rp), grid, ComplexImpedance::resistive(Z0_OHMS))?;
    let (fmin, db) = r.minimum();
    Ok(MatchSignature {
        mpp,
        termination_resistance: rp,
        effective_capacitance: cp,
        minimum_frequency: fmin,
        minimum_db: db,
    })
}

/// Bisects the zero-bias junction capacitance until the S11 dip lands on
/// the target. More capacitance pulls the dip down.
pub fn fit_junction_capacitance(
    c: &RectifierCircuit,
    targets: &CalibrationTargets,
    range: LoadRange,
    bracket: (f64, f64),
) -> Result<(f64, MatchSignature), CalibrationError> {
    let grid = calibration_grid();
    let resolution = grid[1].hz() - grid[0].hz();
    let target = targets.match_frequency.hz();
    let eval = |cj: f64| {
        let mut d = c.diode;
        d.junction_capacitance_zero_bias = cj;
        match_signature(&c.with_diode(d), targets.match_power, range, &grid)
    };
    let (mut lo, mut hi) = bracket;
    let s_lo = eval(lo)?;
    let s_hi = eval(hi)?;
    if !(s_lo.minimum_frequency.hz() >= target && s_hi.minimum_frequency.hz() <= target) {
        return Err(CalibrationError::NoBracket { knob: "junction capacitance", lo, hi });
    }
    let mut best = if (s_lo.minimum_frequency.hz() - target).abs() <= (s_hi.minimum_frequency.hz() - target).abs() {
        (lo, s_lo)
    } else {
        (hi, s_hi)
    };
    for _ in 0..40 {
        if (best.1.minimum_frequency.hz() - target).abs() <= 0.5 * resolution || hi / lo - 1.0 < 1e-6 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let s = eval(mid)?;
        let f = s.minimum_frequency.hz();
        if (f - target).abs() < (best.1.minimum_frequency.hz() - target).abs() {
            best = (mid, s);
        }
        if f > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostFit {
    pub boost_efficiency: f64,
    pub ic_quiescent_current: f64,
}

/// Solves the two linear conditions `efficiency(peak) = target` and
/// `storage power(floor) = 0` for boost efficiency and quiescent current.
pub fn fit_boost(
    cfg: &PmicConfig,
    frontend: &RectifierCircuit,
    targets: &CalibrationTargets,
) -> Result<BoostFit, CalibrationError> {
    let lossless =
        PmicConfig { boost_efficiency: BoostEfficiency::Constant(1.0), ic_quiescent_current: 0.0, ..cfg.clone() };
    let harvested = |p: PowerLevel| -> Result<f64, CalibrationError> {
        let h = harvester_for(&lossless, frontend, p)?;
        Ok(end_to_end_point(&lossless, &h, p, targets.hold_voltage).storage_power)
    };
    let at_peak = harvested(targets.peak_power)? / targets.peak_power.watts();
    let at_floor = harvested(targets.floor_power)?;
    let denom = at_peak - at_floor / targets.peak_power.watts();
    let eta = targets.peak_efficiency / denom;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(CalibrationError::OutOfRange { knob: "boost efficiency", value: eta });
    }
    Ok(BoostFit { boost_efficiency: eta, ic_quiescent_current: eta * at_floor / targets.hold_voltage })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColdStartFit {
    pub storage_capacitance: f64,
    pub regulator_quiescent_current: f64,
    pub inrush_charge: f64,
}

/// Milestone times used by the cold-start targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColdStartTimes {
    pub wake: f64,
    pub normal: f64,
    pub overcharge: f64,
    pub lockouts: usize,
}

impl ColdStartTimes {
    pub fn from_trace(t: &SimulationTrace) -> Option<Self> {
        Some(Self {
            wake: t.first(MilestoneKind::WakeUp)?,
            normal: t.normal_reached()?,
            overcharge: t.first(MilestoneKind::OverchargeProtect)?,
            lockouts: t.count(MilestoneKind::UvloLockout),
        })
    }
}

fn run(cfg: &PmicConfig, h: &dyn Harvester, duration: f64) -> Result<Option<ColdStartTimes>, CalibrationError> {
    let opts = ColdStartOptions { duration, record_interval: duration, ..ColdStartOptions::default() };
    Ok(ColdStartTimes::from_trace(&simulate(cfg, h, opts)?))
}

/// Fits the storage and rail parameters to the three milestone times.
///
/// Wake time fixes the storage capacitance. For each regulator current the
/// inrush charge is bisected onto the normal-operation time; the regulator
/// current is then bisected onto the overcharge time.
pub fn fit_cold_start(
    cfg: &PmicConfig,
    harvester: &dyn Harvester,
    targets: &CalibrationTargets,
) -> Result<(ColdStartFit, ColdStartTimes), CalibrationError> {
    let duration = 2.5 * targets.overcharge_time;
    let v_op = cfg.mppt_fraction * harvester.open_circuit_voltage();
    let p = harvester.power_at(v_op);
    let charge_rate = p * cfg.boost_efficiency.at(p, v_op);
    if !(charge_rate > 0.0) {
        return Err(CalibrationError::OutOfRange { knob: "cold-start input power", value: p });
    }

    // Cold start runs without quiescent draw, so wake time scales exactly
    // with capacitance.
    let vw = cfg.wake_voltage();
    let mut cap = 2.0 * charge_rate * targets.wake_time / (vw * vw);
    let probe = |cap: f64| PmicConfig {
        storage_capacitance: cap,
        regulator_quiescent_current: 0.0,
        inrush_charge: 0.0,
        ..cfg.clone()
    };
    for _ in 0..3 {
        let t = simulate(
            &probe(cap),
            harvester,
            ColdStartOptions { duration, record_interval: duration, ..ColdStartOptions::default() },
        )?;
        let wake = t.first(MilestoneKind::WakeUp).ok_or(CalibrationError::NoBracket {
            knob: "storage capacitance",
            lo: cap,
            hi: cap,
        })?;
        cap *= targets.wake_time / wake;
    }

    let with = |i_reg: f64, q: f64| PmicConfig {
        storage_capacitance: cap,
        regulator_quiescent_current: i_reg,
        inrush_charge: q,
        ..cfg.clone()
    };
    // The whole store at wake-up bounds any useful inrush charge.
    let q_max = 0.5 * cap * vw;
    let fit_inrush = |i_reg: f64| -> Result<Option<(f64, ColdStartTimes)>, CalibrationError> {
        let (mut lo, mut hi) = (0.0, q_max);
        let mut best: Option<(f64, ColdStartTimes)> = None;
        for _ in 0..30 {
            let mid = 0.5 * (lo + hi);
            match run(&with(i_reg, mid), harvester, duration)? {
                Some(t) if t.lockouts >= 1 => {
                    let better = best.is_none_or(|(_, b)| {
                        (t.normal - targets.normal_time).abs() < (b.normal - targets.normal_time).abs()
                    });
                    if better {
                        best = Some((mid, t));
                    }
                    if t.normal < targets.normal_time {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Some(_) => lo = mid,
                None => hi = mid,
            }
        }
        Ok(best)
    };

    // Net charging must stay positive at the overcharge level.
    let i_max = charge_rate / cfg.v_overcharge - cfg.ic_quiescent_current;
    if !(i_max > 0.0) {
        return Err(CalibrationError::OutOfRange { knob: "IC quiescent current", value: cfg.ic_quiescent_current });
    }
    let (mut lo, mut hi) = (0.0, i_max);
    let mut best: Option<(f64, f64, ColdStartTimes)> = None;
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        match fit_inrush(mid)? {
            Some((q, t)) => {
                let score = |t: &ColdStartTimes| {
                    ((t.normal - targets.normal_time) / targets.normal_time).abs()
                        + ((t.overcharge - targets.overcharge_time) / targets.overcharge_time).abs()
                };
                if best.as_ref().is_none_or(|b| score(&t) < score(&b.2)) {
                    best = Some((mid, q, t));
                }
                if t.overcharge < targets.overcharge_time {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            None => hi = mid,
        }
    }
    let (i_reg, q, times) =
        best.ok_or(CalibrationError::NoBracket { knob: "regulator quiescent current", lo: 0.0, hi: i_max })?;
    Ok((ColdStartFit { storage_capacitance: cap, regulator_quiescent_current: i_reg, inrush_charge: q }, times))
}

/// Everything the full fit produces, including the figures it reaches.
#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub frontend: RectifierCircuit,
    pub pmic: PmicConfig,
    /// Saturation current and series resistance scale factors. The other
    /// knobs absorb the targets, so both stay at one.
    pub is_scale: f64,
    pub rs_scale: f64,
    pub junction_capacitance: f64,
    pub signature: MatchSignature,
    pub boost: BoostFit,
    pub cold_start: ColdStartFit,
    pub cold_start_times: ColdStartTimes,
    pub peak_efficiency: f64,
    pub efficiency_at_minus_10_dbm: f64,
    pub energy_positive_floor_dbm: Option<f64>,
}

pub fn calibrate(
    base: &RectifierCircuit,
    pmic: &PmicConfig,
    targets: &CalibrationTargets,
    range: LoadRange,
) -> Result<CalibrationReport, CalibrationError> {
    let (is_scale, rs_scale) = (1.0, 1.0);
    let base = base.with_diode(base.diode.scaled(is_scale, rs_scale));
    let (cj, signature) = fit_junction_capacitance(&base, targets, range, (0.1e-12, 1.0e-12))?;
    let mut diode = base.diode;
    diode.junction_capacitance_zero_bias = cj;
    let mut frontend = base.with_diode(diode);
    if let FrontEnd::Matched(d) = frontend.front_end {
        frontend.front_end = FrontEnd::Matched(d.with_effective_capacitance(signature.effective_capacitance));
    }

    let boost = fit_boost(pmic, &frontend, targets)?;
    let pmic = PmicConfig {
        boost_efficiency: BoostEfficiency::Constant(boost.boost_efficiency),
        ic_quiescent_current: boost.ic_quiescent_current,
        ..pmic.clone()
    };

    let h = harvester_for(&pmic, &frontend, targets.cold_start_power)?;
    let (cold_start, cold_start_times) = fit_cold_start(&pmic, &h, targets)?;
    let pmic = PmicConfig {
        storage_capacitance: cold_start.storage_capacitance,
        regulator_quiescent_current: cold_start.regulator_quiescent_current,
        inrush_charge: cold_start.inrush_charge,
        ..pmic
    };

    let eff = |p: PowerLevel| -> Result<f64, CalibrationError> {
        let h = harvester_for(&pmic, &frontend, p)?;
        Ok(end_to_end_point(&pmic, &h, p, targets.hold_voltage).efficiency)
    };
    let peak_efficiency = eff(targets.peak_power)?;
    let efficiency_at_minus_10_dbm = eff(PowerLevel::from_dbm(-10.0)?)?;
    let floor_dbm = targets.floor_power.dbm();
    let energy_positive_floor_dbm =
        energy_positive_floor(&pmic, &frontend, targets.hold_voltage, (floor_dbm - 8.0, floor_dbm + 8.0), 0.01)?;

    Ok(CalibrationReport {
        frontend,
        pmic,
        is_scale,
        rs_scale,
        junction_capacitance: cj,
        signature,
        boost,
        cold_start,
        cold_start_times,
        peak_efficiency,
        efficiency_at_minus_10_dbm,
        energy_positive_floor_dbm,
    })
}
