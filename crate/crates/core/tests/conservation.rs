use dipsq_core::dtwa::{classical_energy, evolve_batch, max_length_drift, sample_initial, total_sz, EvolutionPlan, IntegratorConfig, SpinConfiguration};
use dipsq_core::lattice::{sample_cloud, CouplingMatrix, DipolarCouplings, FillingProfile, LatticeGeometry, Region};
use dipsq_core::pulses::PulseSchedule;
use dipsq_core::rng::{stream_rng, Stream};

fn dense_cloud() -> (CouplingMatrix, Vec<usize>) {
    let g = LatticeGeometry::new(266e-9, 12, 12).unwrap();
    let region = Region::Disk { cx: 5.5, cy: 5.5, radius: 5.0 };
    let profile = FillingProfile::region(&g, region, 0.8).unwrap();
    let cloud = sample_cloud(&g, &profile, &mut stream_rng(3, Stream::CloudSample(0)));
    let atoms = cloud.atoms();
    let m = DipolarCouplings::new(1.09, 0.86).unwrap().matrix_for_sites(&g, &atoms);
    (m, atoms)
}

fn tipped(atoms: &[usize], seed: u32) -> SpinConfiguration {
    let t = 1.1f64;
    sample_initial(atoms, [t.sin(), 0.0, t.cos()], &mut stream_rng(5, Stream::Trajectory { cloud: 0, index: seed })).unwrap()
}

fn evolve(m: &CouplingMatrix, initial: &[SpinConfiguration], duration: f64, dt: f64) -> Vec<SpinConfiguration> {
    let schedule = PulseSchedule::free(duration).unwrap();
    let plan = EvolutionPlan {
        schedule: &schedule,
        integrator: IntegratorConfig::new(dt).unwrap(),
        sample_times: &[],
    };
    evolve_batch(initial, m, &plan).unwrap().into_iter().map(|t| t.final_state).collect()
}

#[test]
fn interaction_only_evolution_conserves_sz_energy_and_length() {
    let (m, atoms) = dense_cloud();
    assert!(atoms.len() > 40);
    let initial: Vec<_> = (0..4).map(|k| tipped(&atoms, k)).collect();
    let finals = evolve(&m, &initial, 1.0, 1e-3);
    for (a, b) in initial.iter().zip(&finals) {
        let sz0 = total_sz(a);
        assert!((total_sz(b) - sz0).abs() <= 1e-8 * sz0.abs(), "sz {sz0} -> {}", total_sz(b));
        let e0 = classical_energy(a, &m);
        let e1 = classical_energy(b, &m);
        assert!((e1 - e0).abs() <= 1e-6 * e0.abs(), "energy {e0} -> {e1}");
        let d = max_length_drift(b, a);
        assert!(d < 1e-8, "length drift {d}");
    }
}

fn distance(a: &SpinConfiguration, b: &SpinConfiguration) -> f64 {
    a.spins()
        .iter()
        .zip(b.spins())
        .map(|(x, y)| (0..3).map(|k| (x[k] - y[k]).powi(2)).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

#[test]
fn rk4_error_falls_sixteenfold_per_halving() {
    let (m, atoms) = dense_cloud();
    let initial = vec![tipped(&atoms, 9)];
    let reference = &evolve(&m, &initial, 0.512, 2.5e-4)[0];
    let coarse = &evolve(&m, &initial, 0.512, 8e-3)[0];
    let fine = &evolve(&m, &initial, 0.512, 4e-3)[0];
    let ratio = distance(coarse, reference) / distance(fine, reference);
    assert!((ratio - 16.0).abs() <= 0.3 * 16.0, "ratio {ratio}");
}
