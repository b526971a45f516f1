use std::f64::consts::{PI, TAU};

use dipsq_core::dtwa::{evolve_batch, sample_initial, EvolutionPlan, IntegratorConfig, SpinConfiguration};
use dipsq_core::ed::{exact_ed_oracle, Axis, ProductState};
use dipsq_core::lattice::{sample_cloud, CouplingMatrix, DipolarCouplings, FillingProfile, LatticeGeometry, Region};
use dipsq_core::oat::{oat_dicke_oracle, OatModel};
use dipsq_core::observables::CollectiveMoments;
use dipsq_core::pulses::PulseSchedule;
use dipsq_core::rng::{stream_rng, Stream};

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// The four discrete phase-space points of a spin along `n`.
fn phase_points(n: [f64; 3]) -> [[f64; 3]; 4] {
    let n = unit(n);
    let helper = if n[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let e1 = unit(cross(helper, n));
    let e2 = cross(n, e1);
    let p = |a: f64, b: f64| [0.5 * n[0] + a * e1[0] + b * e2[0], 0.5 * n[1] + a * e1[1] + b * e2[1], 0.5 * n[2] + a * e1[2] + b * e2[2]];
    [p(0.5, 0.5), p(0.5, -0.5), p(-0.5, 0.5), p(-0.5, -0.5)]
}

/// Every configuration of the discrete Wigner distribution of a two-spin
/// product state, each with weight 1/16.
fn enumerated_pair(a: [f64; 3], b: [f64; 3]) -> Vec<SpinConfiguration> {
    let mut out = Vec::new();
    for pa in phase_points(a) {
        for pb in phase_points(b) {
            out.push(SpinConfiguration::new(vec![pa, pb], vec![0, 1]).unwrap());
        }
    }
    out
}

fn run(m: &CouplingMatrix, initial: &[SpinConfiguration], times: &[f64]) -> Vec<CollectiveMoments> {
    let duration = times.iter().copied().fold(0.0, f64::max);
    let schedule = PulseSchedule::free(duration).unwrap();
    let plan = EvolutionPlan {
        schedule: &schedule,
        integrator: IntegratorConfig::new(1e-3).unwrap(),
        sample_times: times,
    };
    let out = evolve_batch(initial, m, &plan).unwrap();
    (0..times.len())
        .map(|k| CollectiveMoments::from_configurations(out.iter().map(|t| &t.samples[k])).unwrap())
        .collect()
}

#[test]
fn pair_total_sz_matches_ed() {
    let m = CouplingMatrix::uniform(2, 1.0).unwrap();
    let (a, b) = ([1.0, 0.0, 0.0], unit([0.3, 0.5, 0.8]));
    let times = [0.0, 0.1, 0.25, 0.5, 1.0];
    let dtwa = run(&m, &enumerated_pair(a, b), &times);
    let ed = exact_ed_oracle(&m, &ProductState::per_spin(vec![a, b]), &PulseSchedule::free(1.0).unwrap(), &times).unwrap();
    for (d, e) in dtwa.iter().zip(&ed.samples) {
        assert!((d.mean[2] - e.total_sz()).abs() < 1e-3, "{} vs {}", d.mean[2], e.total_sz());
    }
}

#[test]
fn pair_first_order_moments_match_ed() {
    // spin 1 along +x, spin 2 along +z; early-time moments are first order in Jt
    let m = CouplingMatrix::uniform(2, 1.0).unwrap();
    let (a, b) = ([1.0, 0.0, 0.0], [0.0, 0.0, 1.0]);
    let dtwa = run(&m, &enumerated_pair(a, b), &[0.1]);
    let ed = exact_ed_oracle(&m, &ProductState::per_spin(vec![a, b]), &PulseSchedule::free(0.1).unwrap(), &[0.1]).unwrap();
    let e = ed.samples[0].collective_moments();
    for axis in [0, 2] {
        assert!((dtwa[0].mean[axis] - e.mean[axis]).abs() < 0.02, "axis {axis}: {} vs {}", dtwa[0].mean[axis], e.mean[axis]);
    }
}

#[test]
fn dicke_and_ed_agree_for_twelve_uniform_spins() {
    let n = 12;
    let j = 0.8;
    let couplings = CouplingMatrix::uniform(n, j).unwrap();
    let times = [0.0, 0.05, 0.13, 0.31, 0.6];
    let ed = exact_ed_oracle(&couplings, &ProductState::along([1.0, 0.0, 0.0]), &PulseSchedule::free(0.6).unwrap(), &times).unwrap();
    let model = OatModel::from_uniform_exchange(n, j).unwrap();
    for (&t, e) in times.iter().zip(&ed.samples) {
        let d = oat_dicke_oracle(&model, t, 0.0).unwrap().moments;
        let e = e.collective_moments();
        for a in 0..3 {
            assert!((d.mean[a] - e.mean[a]).abs() < 1e-10);
            for b in 0..3 {
                assert!((d.second[a][b] - e.second[a][b]).abs() < 1e-10, "t={t} <S{a}S{b}>");
            }
        }
    }
}

#[test]
fn uniform_twenty_spin_contrast_tracks_dicke() {
    let n = 20;
    let j = 0.5;
    let m = CouplingMatrix::uniform(n, j).unwrap();
    // 2π|χ|t up to 0.28
    let times: Vec<f64> = (0..=6).map(|k| 0.015 * k as f64).collect();
    assert!(TAU * j * times[6] <= 0.3);
    let sites: Vec<usize> = (0..n).collect();
    let initial: Vec<_> = (0..4000)
        .map(|k| sample_initial(&sites, [1.0, 0.0, 0.0], &mut stream_rng(11, Stream::Trajectory { cloud: 0, index: k })).unwrap())
        .collect();
    let dtwa = run(&m, &initial, &times);
    let model = OatModel::from_uniform_exchange(n, j).unwrap();
    for (&t, d) in times.iter().zip(&dtwa) {
        let c = oat_dicke_oracle(&model, t, 0.0).unwrap().contrast();
        assert!((d.contrast() - c).abs() < 0.02, "t={t}: {} vs {c}", d.contrast());
    }
}

fn random_cloud(n_target: usize) -> (CouplingMatrix, Vec<usize>) {
    let g = LatticeGeometry::new(266e-9, 6, 6).unwrap();
    let p = FillingProfile::region(&g, Region::Rect { x0: 0, y0: 0, width: 6, height: 6 }, 0.25).unwrap();
    let mut k = 0;
    loop {
        let atoms = sample_cloud(&g, &p, &mut stream_rng(8, Stream::CloudSample(k))).atoms();
        if atoms.len() == n_target {
            let mut m = DipolarCouplings::new(1.09, 0.86).unwrap().matrix_for_sites(&g, &atoms);
            m.set_field(atoms.iter().map(|&s| 0.01 * (s % 5) as f64).collect()).unwrap();
            return (m, atoms);
        }
        k += 1;
    }
}

#[test]
fn ed_eight_atom_cloud_regression() {
    let (m, atoms) = random_cloud(8);
    let times = [0.1, 0.3, 0.5];
    let ed = exact_ed_oracle(&m, &ProductState::along([0.0, -1.0, 0.0]), &PulseSchedule::free(0.5).unwrap(), &times).unwrap();
    assert_eq!(atoms, [4, 6, 8, 12, 14, 29, 32, 34]);
    // (<S_x>, <S_y>, min ξ², <s^x_0>)
    let frozen = [
        [0.06938757239758593, -3.6311011790296623, 0.5950178487997386, 0.01254026120312084],
        [0.1039296070359688, -1.5080941726100843, 0.3662633436655497, 0.03712469481791488],
        [0.0376794789526488, 0.0683890178600349, 0.7676110472042307, 0.06096483437182838],
    ];
    for (s, f) in ed.samples.iter().zip(frozen) {
        let c = s.collective_moments();
        let got = [c.mean[0], c.mean[1], c.min_xi2().unwrap(), s.expect_single(0, Axis::X)];
        for (g, f) in got.iter().zip(f) {
            assert!((g - f).abs() < 1e-9, "{g} vs frozen {f}");
        }
        assert!(c.mean[2].abs() < 1e-12);
    }
}

#[test]
fn shearing_slope_matches_mean_field_and_ed() {
    let (mut m, _) = random_cloud(8);
    m.set_field(vec![0.0; 8]).unwrap();
    let n = m.len();
    let k_total: f64 = (0..n).map(|i| m.row(i).iter().sum::<f64>()).sum();
    let t = 1e-4;
    for k in 0..=8 {
        let theta = PI * k as f64 / 8.0;
        let axis = [theta.sin(), 0.0, theta.cos()];
        let predicted = -PI * k_total * theta.sin() * theta.cos();
        let ed = exact_ed_oracle(&m, &ProductState::along(axis), &PulseSchedule::free(t).unwrap(), &[t]).unwrap();
        let slope = ed.samples[0].collective_moments().mean[1] / t;
        assert!((slope - predicted).abs() < 1e-3 * k_total, "theta {theta}: {slope} vs {predicted}");
    }
}
