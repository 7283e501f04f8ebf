//! π-section matching between the antenna port and the rectifier.
//!
//! The ladder seen from the source is: series DC block, shunt capacitor,
//! series inductor, then a shunt capacitance at the rectifier input. For the
//! fabricated board that last shunt is not a part at all but the lumped
//! capacitance of the diode pair.

use crate::error::{MatchError, NetworkError};
use crate::network::{cascade, s11_sweep, Cascade, ElementKind, LumpedElement, Placement, TwoPort};
use crate::units::{reflection_coefficient, return_loss_db, ComplexImpedance, Frequency};

pub const REFERENCE_C1_F: f64 = 33e-12;
pub const REFERENCE_C2_F: f64 = 2.2e-12;
pub const REFERENCE_C3_F: f64 = 2.4e-12;
pub const REFERENCE_L1_H: f64 = 50e-9;
pub const TARGET_FREQUENCY_HZ: f64 = 915e6;

/// Depth a synthesized network must reach at its design frequency.
pub const SYNTHESIS_THRESHOLD_DB: f64 = -30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiMatchDesign {
    pub dc_block: LumpedElement,
    pub series_inductor: LumpedElement,
    pub shunt_capacitor: LumpedElement,
    /// Shunt capacitance at the rectifier side of the π (F). Zero drops it.
    pub effective_diode_capacitance: f64,
    pub target_frequency: Frequency,
}

/// Per-part Q factors; `None` is an ideal part.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QConfig {
    pub dc_block: Option<f64>,
    pub shunt_capacitor: Option<f64>,
    pub series_inductor: Option<f64>,
}

impl PiMatchDesign {
    pub fn new(
        dc_block_f: f64,
        shunt_f: f64,
        series_h: f64,
        effective_diode_capacitance: f64,
        target_frequency: Frequency,
        q: QConfig,
    ) -> Result<Self, NetworkError> {
        if !(effective_diode_capacitance >= 0.0 && effective_diode_capacitance.is_finite()) {
            return Err(NetworkError::InvalidValue(effective_diode_capacitance));
        }
        let reference = Some(target_frequency);
        Ok(Self {
            dc_block: LumpedElement::capacitor(dc_block_f, Placement::Series)?.with_q(q.dc_block, reference)?,
            series_inductor: LumpedElement::inductor(series_h, Placement::Series)?
                .with_q(q.series_inductor, reference)?,
            shunt_capacitor: LumpedElement::capacitor(shunt_f, Placement::Shunt)?
                .with_q(q.shunt_capacitor, reference)?,
            effective_diode_capacitance,
            target_frequency,
        })
    }

    pub fn q_config(&self) -> QConfig {
        QConfig {
            dc_block: self.dc_block.q_factor,
            shunt_capacitor: self.shunt_capacitor.q_factor,
            series_inductor: self.series_inductor.q_factor,
        }
    }

    pub fn with_effective_capacitance(mut self, farads: f64) -> Self {
        self.effective_diode_capacitance = farads.max(0.0);
        self
    }

    /// Ladder from the source port to the rectifier input.
    pub fn network(&self) -> Cascade {
        let mut stages = vec![self.dc_block, self.shunt_capacitor, self.series_inductor];
        if self.effective_diode_capacitance > 0.0 {
            stages.push(
                LumpedElement::capacitor(self.effective_diode_capacitance, Placement::Shunt)
                    .expect("positive capacitance"),
            );
        }
        cascade(&stages).expect("non-empty ladder")
    }

    /// |S11| in dB at one frequency with the given termination.
    pub fn s11_db_at(
        &self,
        f: Frequency,
        termination: ComplexImpedance,
        z_ref: ComplexImpedance,
    ) -> Result<f64, NetworkError> {
        let r = s11_sweep(&self.network(), |_| termination, &[f], z_ref)?;
        Ok(return_loss_db(r.s11[0]))
    }
}

/// The fabricated board: C1 = 33 pF, C2 = 2.2 pF, L1 = 50 nH at 915 MHz.
pub fn build_reference_network(q: QConfig) -> PiMatchDesign {
    PiMatchDesign::new(
        REFERENCE_C1_F,
        REFERENCE_C2_F,
        REFERENCE_L1_H,
        0.0,
        Frequency::from_hz(TARGET_FREQUENCY_HZ).expect("positive"),
        q,
    )
    .expect("table values are valid")
}

pub fn synthesize_pi(
    z_source: ComplexImpedance,
    z_load: ComplexImpedance,
    f: Frequency,
    loaded_q: f64,
) -> Result<PiMatchDesign, MatchError> {
    synthesize_pi_with_dc_block(z_source, z_load, f, loaded_q, REFERENCE_C1_F)
}

/// Minimum loaded Q a π can have between these two terminations once the
/// DC block is folded into the source.
pub fn minimum_loaded_q(
    z_source: ComplexImpedance,
    z_load: ComplexImpedance,
    f: Frequency,
    dc_block_f: f64,
) -> Result<f64, MatchError> {
    let (rs, _) = folded_source(z_source, f, dc_block_f).parallel_form();
    let (rl, _) = z_load.parallel_form();
    let (hi, lo) = if rs > rl { (rs, rl) } else { (rl, rs) };
    Ok((hi / lo - 1.0).sqrt())
}

fn folded_source(z_source: ComplexImpedance, f: Frequency, dc_block_f: f64) -> ComplexImpedance {
    ComplexImpedance::new(z_source.resistance, z_source.reactance - 1.0 / (f.omega() * dc_block_f))
}

/// Designs C_shunt (source side), L_series and C_shunt (load side) so the
/// ladder presents the conjugate of `z_source` at `f`. `loaded_q` is the Q of
/// the higher-resistance half-section.
pub fn synthesize_pi_with_dc_block(
    z_source: ComplexImpedance,
    z_load: ComplexImpedance,
    f: Frequency,
    loaded_q: f64,
    dc_block_f: f64,
) -> Result<PiMatchDesign, MatchError> {
    for z in [z_source, z_load] {
        if !(z.resistance > 0.0) {
            return Err(MatchError::PurelyReactive(z.to_string()));
        }
    }
    let gamma = reflection_coefficient(z_load, z_source).map_err(NetworkError::from)?;
    if return_loss_db(gamma) < SYNTHESIS_THRESHOLD_DB {
        return Err(MatchError::NoTransformationRequired);
    }

    let zs = folded_source(z_source, f, dc_block_f);
    let ys = zs.as_complex().inv();
    let yl = z_load.as_complex().inv();
    let (rs, rl) = (1.0 / ys.re, 1.0 / yl.re);
    let r_hi = rs.max(rl);
    let minimum = (r_hi / rs.min(rl) - 1.0).sqrt();
    if !(loaded_q >= minimum) {
        return Err(MatchError::InfeasibleQ { requested: loaded_q, minimum });
    }
    let r_virtual = r_hi / (1.0 + loaded_q * loaded_q);
    let q_source = (rs / r_virtual - 1.0).max(0.0).sqrt();
    let q_load = (rl / r_virtual - 1.0).max(0.0).sqrt();

    // Conjugate-match susceptances net of what each termination already has.
    let b_source = q_source / rs - ys.im;
    let b_load = q_load / rl - yl.im;
    let x_series = (q_source + q_load) * r_virtual;
    let w = f.omega();
    if b_source <= 0.0 {
        return Err(MatchError::NegativeShunt { side: "source" });
    }
    if b_load < -1e-15 {
        return Err(MatchError::NegativeShunt { side: "load" });
    }

    let design =
        PiMatchDesign::new(dc_block_f, b_source / w, x_series / w, (b_load / w).max(0.0), f, QConfig::default())?;
    let achieved = design.s11_db_at(f, z_load, z_source)?;
    if !(achieved < SYNTHESIS_THRESHOLD_DB) {
        return Err(MatchError::VerificationFailed { achieved_db: achieved });
    }
    Ok(design)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ESeries {
    E12,
    E24,
    E96,
}

const E12: [f64; 12] = [1.0, 1.2, 1.5, 1.8, 2.2, 2.7, 3.3, 3.9, 4.7, 5.6, 6.8, 8.2];
const E24: [f64; 24] = [
    1.0, 1.1, 1.2, 1.3, 1.5, 1.6, 1.8, 2.0, 2.2, 2.4, 2.7, 3.0, 3.3, 3.6, 3.9, 4.3, 4.7, 5.1, 5.6, 6.2, 6.8, 7.5, 8.2,
    9.1,
];
const E96: [f64; 96] = [
    1.00, 1.02, 1.05, 1.07, 1.10, 1.13, 1.15, 1.18, 1.21, 1.24, 1.27, 1.30, 1.33, 1.37, 1.40, 1.43, 1.47, 1.50, 1.54,
    1.58, 1.62, 1.65, 1.69, 1.74, 1.78, 1.82, 1.87, 1.91, 1.96, 2.00, 2.05, 2.10, 2.15, 2.21, 2.26, 2.32, 2.37, 2.43,
    2.49, 2.55, 2.61, 2.67, 2.74, 2.80, 2.87, 2.94, 3.01, 3.09, 3.16, 3.24, 3.32, 3.40, 3.48, 3.57, 3.65, 3.74, 3.83,
    3.92, 4.02, 4.12, 4.22, 4.32, 4.42, 4.53, 4.64, 4.75, 4.87, 4.99, 5.11, 5.23, 5.36, 5.49, 5.62, 5.76, 5.90, 6.04,
    6.19, 6.34, 6.49, 6.65, 6.81, 6.98, 7.15, 7.32, 7.50, 7.68, 7.87, 8.06, 8.25, 8.45, 8.66, 8.87, 9.09, 9.31, 9.53,
    9.76,
];

impl ESeries {
    fn mantissas(self) -> &'static [f64] {
        match self {
            ESeries::E12 => &E12,
            ESeries::E24 => &E24,
            ESeries::E96 => &E96,
        }
    }

    /// Nearest preferred value, measured in log distance.
    pub fn nearest(self, value: f64) -> f64 {
        assert!(value > 0.0 && value.is_finite());
        let exp = value.log10().floor() as i32;
        let mut best = (f64::INFINITY, value);
        for e in [exp - 1, exp, exp + 1] {
            for &m in self.mantissas() {
                let candidate = scale(m, e);
                let d = (candidate / value).ln().abs();
                if d < best.0 {
                    best = (d, candidate);
                }
            }
        }
        best.1
    }
}

fn scale(mantissa: f64, exp: i32) -> f64 {
    if exp >= 0 {
        mantissa * 10f64.powi(exp)
    } else {
        mantissa / 10f64.powi(-exp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnappedDesign {
    pub design: PiMatchDesign,
    pub s11_before_db: f64,
    pub s11_after_db: f64,
}

impl SnappedDesign {
    pub fn degradation_db(&self) -> f64 {
        self.s11_after_db - self.s11_before_db
    }
}

/// Rounds the three discrete parts to preferred values. The rectifier-side
/// shunt is a device property and is left alone.
pub fn snap_to_eseries(
    d: &PiMatchDesign,
    series: ESeries,
    termination: ComplexImpedance,
    z_ref: ComplexImpedance,
) -> Result<SnappedDesign, NetworkError> {
    let snap = |e: LumpedElement| -> LumpedElement {
        debug_assert!(e.kind != ElementKind::Resistor);
        LumpedElement { value: series.nearest(e.value), ..e }
    };
    let snapped = PiMatchDesign {
        dc_block: snap(d.dc_block),
        series_inductor: snap(d.series_inductor),
        shunt_capacitor: snap(d.shunt_capacitor),
        ..*d
    };
    Ok(SnappedDesign {
        design: snapped,
        s11_before_db: d.s11_db_at(d.target_frequency, termination, z_ref)?,
        s11_after_db: snapped.s11_db_at(d.target_frequency, termination, z_ref)?,
    })
}

/// Transmission matrix of the ladder at `f`, for callers that only need a
/// single point.
pub fn design_abcd(d: &PiMatchDesign, f: Frequency) -> crate::network::Abcd {
    d.network().abcd(f)
}
