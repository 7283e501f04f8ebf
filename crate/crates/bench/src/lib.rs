//! Fixtures shared by the benchmarks in `benches/`.

use rectenna_core::matching::{build_reference_network, QConfig, REFERENCE_C3_F};
use rectenna_core::rectifier::THERMAL_VOLTAGE_300K;
use rectenna_core::rectifier::{CapacitanceModel, DiodeModel, FrontEnd, RectifierCircuit, SourceSpec, Topology};
use rectenna_core::{ComplexImpedance, Frequency, LumpedElement, Placement, PowerLevel};

/// The matched voltage doubler at the calibrated operating point.
pub fn reference_circuit(input_dbm: f64, load_ohms: f64) -> RectifierCircuit {
    let q = QConfig { dc_block: Some(150.0), shunt_capacitor: Some(300.0), series_inductor: Some(50.0) };
    RectifierCircuit {
        front_end: FrontEnd::Matched(build_reference_network(q).with_effective_capacitance(0.65e-12)),
        diode: DiodeModel {
            saturation_current: 3.4e-7,
            ideality_factor: 1.1,
            series_resistance: 2.7,
            junction_capacitance_zero_bias: 0.337e-12,
            thermal_voltage: THERMAL_VOLTAGE_300K,
            junction_potential: 0.3,
            grading_coefficient: 0.5,
            capacitance_model: CapacitanceModel::Constant,
        },
        output_capacitor: LumpedElement::capacitor(REFERENCE_C3_F, Placement::Shunt).expect("positive"),
        load_resistance: load_ohms,
        source: SourceSpec::from_available_power(
            PowerLevel::from_dbm(input_dbm).expect("finite"),
            ComplexImpedance::resistive(50.0),
            Frequency::from_mhz(915.0).expect("positive"),
        ),
        topology: Topology::VoltageDoubler,
    }
}
