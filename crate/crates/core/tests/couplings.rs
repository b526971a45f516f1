use dipsq_core::couplings::{
    coupling_scan, exchange_coupling, family_maxima, jz_coupling_factor_exact, AngularMomentumSpec, DipolarPrefactor, HalfInt, HyperfineQubit,
};

const A: f64 = 266e-9;

fn clock_qubit() -> HyperfineQubit {
    HyperfineQubit::new(HalfInt::from_twice(17), HalfInt::from_twice(1)).unwrap()
}

#[test]
fn erbium_clock_qubit_coupling() {
    let er = AngularMomentumSpec::erbium_167();
    assert_eq!(jz_coupling_factor_exact(&er, &clock_qubit()).unwrap().to_string(), "420/361");
    assert!((exchange_coupling(&er, &clock_qubit(), A).unwrap() - 1.087).abs() < 1e-3);
    assert!((DipolarPrefactor::new(er.lande_gj, A).unwrap().value_hz - 0.934).abs() < 1e-3);
}

#[test]
fn family_maxima_sit_at_half_projection() {
    let er = AngularMomentumSpec::erbium_167();
    let rows = coupling_scan(&er, A).unwrap();
    let max = family_maxima(&rows);
    assert_eq!(max.len(), 7);
    for m in &max {
        assert_eq!(m.qubit.m_f.twice().abs(), 1, "F = {}", m.qubit.f_lower);
        // ±1/2 are degenerate
        let mirror = rows.iter().find(|r| r.qubit.f_lower == m.qubit.f_lower && r.qubit.m_f == -m.qubit.m_f).unwrap();
        assert!((mirror.j_perp_hz - m.j_perp_hz).abs() < 1e-12);
    }
    let lo = max.iter().map(|r| r.j_perp_hz).fold(f64::INFINITY, f64::min);
    let hi = max.iter().map(|r| r.j_perp_hz).fold(0.0, f64::max);
    assert!((lo - 1.09).abs() < 0.05 && (hi - 3.7).abs() < 0.05, "[{lo}, {hi}]");
}
