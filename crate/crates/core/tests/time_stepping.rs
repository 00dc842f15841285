//! Properties of the Newmark scheme on assembled systems.

use kgwave::{
    build_mesh, discrete_energy, FemSystem, LinearSolve, NewmarkIntegrator, NewmarkParams, PotentialProfile,
    SolverState, SymTridiagonal, WavePacket,
};
use proptest::prelude::*;

fn packet_system(profile: PotentialProfile) -> (FemSystem, SolverState) {
    let mesh = build_mesh(20.0, 400).unwrap();
    let sys = FemSystem::new(mesh, 1.0, &profile).unwrap();
    let p = WavePacket::default();
    let state = SolverState::initial(sys.mesh.interpolate(|x| p.f(x)), sys.mesh.interpolate(|x| p.g(x))).unwrap();
    (sys, state)
}

fn advance(integrator: &mut NewmarkIntegrator, mut s: SolverState, n: usize) -> SolverState {
    for _ in 0..n {
        s = integrator.step(&s).unwrap();
    }
    s
}

#[test]
fn scheme_is_time_reversible() {
    let (sys, s0) = packet_system(PotentialProfile::step(0.0, 15.0).unwrap());
    let params = NewmarkParams::new(0.02, 200).unwrap();
    let mut fwd = NewmarkIntegrator::new(&sys.mass, &sys.bilinear, params, LinearSolve::Direct).unwrap();
    let s1 = advance(&mut fwd, s0.clone(), 200);
    let mut back = NewmarkIntegrator::new(&sys.mass, &sys.bilinear, params.reversed(), LinearSolve::Direct).unwrap();
    let s2 = advance(&mut back, s1, 200);
    let scale = s0.c.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for (a, b) in s2.c.iter().zip(&s0.c).chain(s2.d.iter().zip(&s0.d)) {
        assert!((a - b).abs() <= 1e-8 * scale, "{a} vs {b}");
    }
    assert!(s2.t.abs() < 1e-12);
}

#[test]
fn huge_steps_stay_bounded() {
    let (sys, s0) = packet_system(PotentialProfile::step(0.0, 150.0).unwrap());
    let e0 = discrete_energy(&sys.mass, &sys.bilinear, &s0.c, &s0.d);
    for dt in [1.0, 10.0, 100.0] {
        let params = NewmarkParams::new(dt, 200).unwrap();
        let mut it = NewmarkIntegrator::new(&sys.mass, &sys.bilinear, params, LinearSolve::Direct).unwrap();
        let mut s = s0.clone();
        for _ in 0..200 {
            s = it.step(&s).unwrap();
            let e = discrete_energy(&sys.mass, &sys.bilinear, &s.c, &s.d);
            assert!(((e - e0) / e0).abs() < 1e-9, "dt = {dt}: energy {e} vs {e0}");
        }
    }
}

#[test]
fn other_newmark_parameters_are_not_conservative() {
    // γ > 1/2 damps: a sanity check that the conservation above is a
    // property of (1/4, 1/2), not of the test.
    let (sys, s0) = packet_system(PotentialProfile::constant(1.0).unwrap());
    let e0 = discrete_energy(&sys.mass, &sys.bilinear, &s0.c, &s0.d);
    let params = NewmarkParams::with_coefficients(0.3025, 0.6, 0.05, 200).unwrap();
    let mut it = NewmarkIntegrator::new(&sys.mass, &sys.bilinear, params, LinearSolve::Direct).unwrap();
    let s = advance(&mut it, s0, 200);
    let e = discrete_energy(&sys.mass, &sys.bilinear, &s.c, &s.d);
    assert!(e < 0.99 * e0);
}

#[test]
fn scalar_oscillator_is_second_order() {
    // G = 1, A = ω²: exact solution cos(ωt).
    let omega: f64 = 2.0;
    let g = SymTridiagonal::new(vec![1.0], vec![]).unwrap();
    let a = SymTridiagonal::new(vec![omega * omega], vec![]).unwrap();
    let t_end: f64 = 3.0;
    let errors: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| {
            let n = (t_end / dt).round() as usize;
            let params = NewmarkParams::new(dt, n).unwrap();
            let mut it = NewmarkIntegrator::new(&g, &a, params, LinearSolve::Direct).unwrap();
            let s = advance(&mut it, SolverState::initial(vec![1.0], vec![0.0]).unwrap(), n);
            (s.c[0] - (omega * t_end).cos()).abs()
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.05, "order {order}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn energy_is_conserved_for_any_spd_pair(
        masses in proptest::collection::vec(0.5..2.0f64, 12),
        springs in proptest::collection::vec(0.0..10.0f64, 12),
        c in proptest::collection::vec(-1.0..1.0f64, 12),
        d in proptest::collection::vec(-1.0..1.0f64, 12),
        dt in 0.001..5.0f64,
    ) {
        // Diagonally dominant G, positive semidefinite A from a spring chain.
        let off_g: Vec<f64> = masses.windows(2).map(|w| 0.2 * w[0].min(w[1])).collect();
        let g = SymTridiagonal::new(masses.clone(), off_g).unwrap();
        let n = springs.len();
        let diag_a: Vec<f64> = (0..n).map(|i| springs[i] + if i + 1 < n { springs[i + 1] } else { 0.0 }).collect();
        let off_a: Vec<f64> = (1..n).map(|i| -springs[i]).collect();
        let a = SymTridiagonal::new(diag_a, off_a).unwrap();
        let params = NewmarkParams::new(dt, 50).unwrap();
        let mut it = NewmarkIntegrator::new(&g, &a, params, LinearSolve::Direct).unwrap();
        let s0 = SolverState::initial(c, d).unwrap();
        let e0 = discrete_energy(&g, &a, &s0.c, &s0.d);
        let s = advance(&mut it, s0, 50);
        let e = discrete_energy(&g, &a, &s.c, &s.d);
        prop_assert!((e - e0).abs() <= 1e-10 * e0.max(1e-12));
    }
}

#[test]
fn reversed_run_cannot_cross_the_origin() {
    let (sys, s0) = packet_system(PotentialProfile::constant(0.0).unwrap());
    let params = NewmarkParams::new(0.1, 1).unwrap().reversed();
    let mut it = NewmarkIntegrator::new(&sys.mass, &sys.bilinear, params, LinearSolve::Direct).unwrap();
    assert!(it.step(&s0).is_err());
}
