use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rectenna_core::matching::{build_reference_network, QConfig};
use rectenna_core::network::{cascade, element_impedance, linear_grid, s11_sweep, ElementKind, TwoPort};
use rectenna_core::{ComplexImpedance, Frequency, LumpedElement, Placement};

fn element() -> impl Strategy<Value = (u8, f64, bool, Option<f64>)> {
    (0u8..2, 0.0f64..1.0, any::<bool>(), prop::option::of(5.0f64..500.0))
}

fn build(parts: &[(u8, f64, bool, Option<f64>)], lossy: bool) -> Vec<LumpedElement> {
    parts
        .iter()
        .map(|&(kind, x, series, q)| {
            let placement = if series { Placement::Series } else { Placement::Shunt };
            // Log-uniform values that keep reactances within a few decades of 50 Ω.
            let e = if kind == 0 {
                LumpedElement::capacitor(10f64.powf(-13.0 + 2.5 * x), placement)
            } else {
                LumpedElement::inductor(10f64.powf(-9.5 + 2.5 * x), placement)
            }
            .unwrap();
            if lossy {
                e.with_q(q, None).unwrap()
            } else {
                e
            }
        })
        .collect()
}

/// Drives the ladder from a Norton source and solves the node equations
/// directly. Returns (input impedance, power into the termination) for a
/// 1 V open-circuit source behind `rs`.
fn nodal_oracle(parts: &[LumpedElement], f: Frequency, rs: f64, rl: f64) -> (Complex64, f64) {
    let mut series_after = Vec::new();
    let mut shunt_at: Vec<Vec<Complex64>> = vec![Vec::new()];
    for e in parts {
        let z = element_impedance(e, f).as_complex();
        match e.placement {
            Placement::Shunt => shunt_at.last_mut().unwrap().push(z.inv()),
            Placement::Series => {
                series_after.push(z.inv());
                shunt_at.push(Vec::new());
            }
        }
    }
    let n = shunt_at.len();
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for (i, ys) in shunt_at.iter().enumerate() {
        for &g in ys {
            y[(i, i)] += g;
        }
    }
    for (i, &g) in series_after.iter().enumerate() {
        y[(i, i)] += g;
        y[(i + 1, i + 1)] += g;
        y[(i, i + 1)] -= g;
        y[(i + 1, i)] -= g;
    }
    y[(0, 0)] += Complex64::new(1.0 / rs, 0.0);
    y[(n - 1, n - 1)] += Complex64::new(1.0 / rl, 0.0);
    let mut b = DVector::<Complex64>::zeros(n);
    b[0] = Complex64::new(1.0 / rs, 0.0);
    let v = y.lu().solve(&b).expect("non-singular nodal matrix");
    let i_in = (Complex64::new(1.0, 0.0) - v[0]) / rs;
    let p_load = v[n - 1].norm_sqr() / (2.0 * rl);
    (v[0] / i_in, p_load)
}

fn f_hz(hz: f64) -> Frequency {
    Frequency::from_hz(hz).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn lossy_ladders_are_passive_and_reciprocal(
        parts in prop::collection::vec(element(), 1..7),
        rl in 1.0f64..5000.0,
        xl in -500.0f64..500.0,
    ) {
        let net = cascade(&build(&parts, true)).unwrap();
        let grid = linear_grid(f_hz(100e6), f_hz(2e9), 97).unwrap();
        let r = s11_sweep(&net, |_| ComplexImpedance::new(rl, xl), &grid, ComplexImpedance::resistive(50.0)).unwrap();
        for g in &r.s11 {
            prop_assert!(g.norm() <= 1.0 + 1e-9);
        }
        for &f in &grid {
            // Relative to the products being cancelled, as large reactances
            // leave rounding well above 1e-9 in absolute terms.
            let m = net.abcd(f);
            let size = 1.0 + (m.a * m.d).norm() + (m.b * m.c).norm();
            let det = m.determinant();
            prop_assert!((det - Complex64::new(1.0, 0.0)).norm() < 1e-9 * size, "det {det}");
        }
    }

    #[test]
    fn lossless_ladders_conserve_power(
        parts in prop::collection::vec(element(), 1..7),
        rl in 1.0f64..5000.0,
        fhz in 100e6f64..2e9,
    ) {
        let elements = build(&parts, false);
        let net = cascade(&elements).unwrap();
        prop_assert!(net.is_lossless());
        let f = f_hz(fhz);
        let rs = 50.0;
        let r = s11_sweep(&net, |_| ComplexImpedance::resistive(rl), &[f], ComplexImpedance::resistive(rs)).unwrap();
        let (zin, p_load) = nodal_oracle(&elements, f, rs, rl);
        let p_avail = 1.0 / (8.0 * rs);
        let total = r.s11[0].norm_sqr() + p_load / p_avail;
        prop_assert!((total - 1.0).abs() < 1e-6, "sum {total}");
        let z = r.input_impedance[0].as_complex();
        prop_assert!((z - zin).norm() <= 1e-6 * zin.norm().max(1.0), "{z} vs {zin}");
    }
}

#[test]
fn lossy_ladder_matches_nodal_oracle() {
    let parts = [
        LumpedElement::capacitor(33e-12, Placement::Series).unwrap().with_q(Some(150.0), None).unwrap(),
        LumpedElement::capacitor(2.2e-12, Placement::Shunt).unwrap().with_q(Some(300.0), None).unwrap(),
        LumpedElement::inductor(50e-9, Placement::Series).unwrap().with_q(Some(50.0), None).unwrap(),
    ];
    let net = cascade(&parts).unwrap();
    for fhz in [600e6, 915e6, 1.4e9] {
        let f = f_hz(fhz);
        let r =
            s11_sweep(&net, |_| ComplexImpedance::resistive(1500.0), &[f], ComplexImpedance::resistive(50.0)).unwrap();
        let (zin, _) = nodal_oracle(&parts, f, 50.0, 1500.0);
        let z = r.input_impedance[0].as_complex();
        assert!((z - zin).norm() < 1e-9 * zin.norm(), "{z} vs {zin}");
    }
}

/// More shunt capacitance at the rectifier side lowers the matched dip when
/// the π is loaded by a rectifier-like high resistance.
#[test]
fn dip_moves_down_with_effective_capacitance() {
    let grid = linear_grid(f_hz(300e6), f_hz(2e9), 17001).unwrap();
    let z0 = ComplexImpedance::resistive(50.0);
    let load = ComplexImpedance::resistive(2000.0);
    let mut last = f64::INFINITY;
    for cj in [0.3e-12, 0.5e-12, 0.65e-12, 0.8e-12, 1.0e-12, 1.5e-12] {
        let d = build_reference_network(QConfig::default()).with_effective_capacitance(cj);
        let (f, _) = s11_sweep(&d.network(), |_| load, &grid, z0).unwrap().minimum();
        assert!(f.hz() < last, "{cj}: {} !< {last}", f.hz());
        last = f.hz();
    }
}

/// With a plain 50 Ω load the only dip is the DC-block and inductor series
/// resonance near 126 MHz, and it creeps up rather than down.
#[test]
fn fifty_ohm_dip_is_the_series_resonance() {
    let grid = linear_grid(f_hz(50e6), f_hz(400e6), 35001).unwrap();
    let z0 = ComplexImpedance::resistive(50.0);
    let dip = |cj: f64| {
        let d = build_reference_network(QConfig::default()).with_effective_capacitance(cj);
        s11_sweep(&d.network(), |_| z0, &grid, z0).unwrap().minimum().0.hz()
    };
    let (bare, loaded) = (dip(0.0), dip(2.0e-12));
    assert!((bare - 125.7e6).abs() < 0.5e6, "{bare}");
    assert!(loaded > bare);
}

#[test]
fn ideal_parts_have_no_loss() {
    let f = f_hz(915e6);
    for kind in [ElementKind::Capacitor, ElementKind::Inductor] {
        let e = LumpedElement::new(kind, 1e-9, Placement::Series).unwrap();
        assert_eq!(element_impedance(&e, f).resistance, 0.0);
    }
}
