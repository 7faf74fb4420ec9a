use std::f64::consts::{FRAC_PI_2, PI, TAU};

use phasekit::dynamics::*;
use phasekit::fock::{build_canonical, random_density, random_unit_vector, FockVector, Operator, OscParams};
use phasekit::frame::{auto_grid, coherent_overlaps, FrameSpec};
use phasekit::linalg::{self, HermitianEigen};
use phasekit::PhaseError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit() -> OscParams {
    OscParams::default()
}

fn oscillator(dim: usize) -> Operator {
    build_canonical(unit(), dim).unwrap().h
}

fn coherent(q: f64, p: f64, dim: usize) -> Operator {
    coherent_overlaps(q, p, &unit(), dim).normalized().projector()
}

#[test]
fn stationary_and_periodic_states() {
    let h = oscillator(8);
    let w = Operator::number_projector(3, 8);
    for t in [0.0, 0.7, 5.0] {
        assert!(linalg::max_abs(&(evolve_state(&w, &h, t).unwrap().mat - &w.mat)) < 1e-12);
    }
    let mut v = FockVector::basis(0, 8);
    v.0[1] = linalg::c(1.0, 0.0);
    let w = v.normalized().projector();
    assert!(linalg::max_abs(&(evolve_state(&w, &h, TAU).unwrap().mat - &w.mat)) < 1e-10);
    assert!(linalg::max_abs(&(evolve_state(&w, &h, 0.0).unwrap().mat - &w.mat)) < 1e-15);
}

#[test]
fn spectrum_and_energy_are_conserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h =
        Operator::new(phasekit::fock::OperatorKind::Hermitian, phasekit::fock::random_hermitian(&mut rng, 6, 6).mat);
    let w = random_density(&mut rng, 6, 6);
    let before = HermitianEigen::new(&w.mat).values;
    let e0 = linalg::trace_product(&w.mat, &h.mat).re;
    for t in [0.3, 2.0, 11.0] {
        let wt = evolve_state(&w, &h, t).unwrap();
        let after = HermitianEigen::new(&wt.mat).values;
        assert!((before.clone() - after).amax() < 1e-10);
        assert!((linalg::trace_product(&wt.mat, &h.mat).re - e0).abs() < 1e-10);
    }
}

#[test]
fn classical_flow_examples() {
    let params = unit();
    let f = classical_flow(1.0, 0.0, FRAC_PI_2, &params);
    assert!(f.q.abs() < 1e-15 && (f.p + 1.0).abs() < 1e-15);
    let start = classical_flow(0.7, -1.3, 0.0, &params);
    assert_eq!((start.q, start.p), (0.7, -1.3));
    let other = OscParams::matched(2.0, 0.5).unwrap();
    let back = classical_flow(0.7, -1.3, TAU / other.omega, &other);
    assert!((back.q - 0.7).abs() < 1e-12 && (back.p + 1.3).abs() < 1e-12);
}

#[test]
fn evolved_densities() {
    let d = 12;
    let frame = FrameSpec::coherent(unit(), d).unwrap();
    let g = auto_grid(&frame, 0.05, d).unwrap();
    let ground = Operator::number_projector(0, d);
    let r0 = evolve_density(&ground, &frame, &g, 0.0).unwrap();
    let rt = evolve_density(&ground, &frame, &g, 1.3).unwrap();
    assert!(r0.max_abs_diff(&rt) < 1e-10);

    let w = coherent(2.0, 0.0, d);
    let peak = evolve_density(&w, &frame, &g, FRAC_PI_2).unwrap().argmax();
    assert!((peak.0 - 0.0).abs() <= g.dq && (peak.1 + 2.0).abs() <= g.dp);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let w = random_density(&mut rng, d, d);
    let rho = evolve_density(&w, &frame, &g, 0.9).unwrap();
    assert!((rho.integral() - 1.0).abs() < 1e-6);
}

#[test]
fn liouville_transport() {
    let d = 16;
    let frame = FrameSpec::coherent(unit(), d).unwrap();
    let coarse = auto_grid(&frame, 0.05, d).unwrap();
    let ground = Operator::number_projector(0, d);
    // quarter turns map grid nodes onto grid nodes, so interpolation is exact there
    for t in [FRAC_PI_2, PI] {
        assert!(liouville_match(&ground, &frame, &coarse, t).unwrap().max_error < 1e-8);
    }
    assert!(liouville_match(&ground, &frame, &coarse, 0.8).unwrap().max_error < 5e-4);

    let w = coherent(2.0, 0.0, d);
    let fine = auto_grid(&frame, 0.025, d).unwrap();
    for t in [0.3, 1.0] {
        let e1 = liouville_match(&w, &frame, &coarse, t).unwrap().max_error;
        let e2 = liouville_match(&w, &frame, &fine, t).unwrap().max_error;
        assert!(e1 < 5e-4, "{e1:e}");
        assert!(e1 / e2 >= 3.0, "{e1:e} -> {e2:e}");
    }
    assert!(liouville_match(&w, &frame, &coarse, PI).unwrap().max_error < 5e-4);

    let wide = FrameSpec::coherent(unit().with_sigma(1.0).unwrap(), d).unwrap();
    assert!(matches!(liouville_match(&w, &wide, &coarse, 0.3), Err(PhaseError::UnmatchedFrame { .. })));
}

#[test]
fn coherent_orbits() {
    let params = unit();
    let r = coherent_evolution_check(0.0, 0.0, 0.4, &params, 16).unwrap();
    assert!(r.defect < 1e-12);
    let r = coherent_evolution_check(2.0, 0.0, 1.0, &params, 48).unwrap();
    assert!(r.defect < 1e-8);
    let r = coherent_evolution_check(2.0, 0.0, TAU, &params, 32).unwrap();
    assert!(r.defect < 1e-8);
    assert!((r.expected_phase.abs() - PI).abs() < 1e-12);
    let unmatched = params.with_sigma(1.0).unwrap();
    assert!(coherent_evolution_check(1.0, 0.0, 1.0, &unmatched, 16).is_err());
}

#[test]
fn generator_with_and_without_correction() {
    let d = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let psi = random_unit_vector(&mut rng, d, 6).projector();
    for sigma in [unit().sigma, 1.0] {
        let frame = FrameSpec::coherent(unit().with_sigma(sigma).unwrap(), d).unwrap();
        let g = auto_grid(&frame, 0.05, d).unwrap();
        let r = generator_residual(&psi, &frame, &g).unwrap();
        assert!(r.residual < 1e-4, "sigma {sigma}: {:e}", r.residual);
        assert!(r.lhs_max > 1e-2);
    }
    let wide = unit().with_sigma(1.0).unwrap();
    assert!((correction_coefficient(&wide) - 0.75).abs() < 1e-15);
}

#[test]
fn stationary_generator_terms_vanish() {
    let d = 16;
    let frame = FrameSpec::coherent(unit(), d).unwrap();
    let g = auto_grid(&frame, 0.05, d).unwrap();
    for n in 0..3 {
        let r = generator_residual(&Operator::number_projector(n, d), &frame, &g).unwrap();
        assert!(r.lhs_max < 1e-6 && r.rhs_max < 1e-6, "n={n}: {:e} {:e}", r.lhs_max, r.rhs_max);
    }
}

#[test]
fn generator_rejects_mixed_states() {
    let frame = FrameSpec::coherent(unit(), 8).unwrap();
    let g = auto_grid(&frame, 0.05, 8).unwrap();
    let w = Operator::maximally_mixed(8);
    assert!(matches!(generator_residual(&w, &frame, &g), Err(PhaseError::MixedState)));
}
