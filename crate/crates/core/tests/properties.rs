use phasekit::classrep::husimi_at;
use phasekit::dequant::{dequantizer_for, Symbol};
use phasekit::displacement::{char_function, displacement_block};
use phasekit::dynamics::{classical_flow, evolve_state};
use phasekit::fock::{
    build_canonical, hermite_position_density, quantum_variance, random_density, random_hermitian, random_unit_vector,
    symmetric_axis, Operator, OperatorKind, OscParams,
};
use phasekit::frame::{
    bargmann_norm_sqr, bargmann_transform, gauge_transform, kernel_gram, phase_transform, FrameSpec, Gauge,
};
use phasekit::grid::PhaseGrid;
use phasekit::linalg::{self, c, from_hermitian_coords, hermitian_coords, CMat, HermitianEigen};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cheap() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cheap())]

    #[test]
    fn params_reject_non_positive(m in -2.0f64..0.0, w in 0.1f64..3.0) {
        prop_assert!(OscParams::new(m, w, 1.0).is_err());
        prop_assert!(OscParams::new(1.0, w, m).is_err());
        prop_assert!(OscParams::new(-m + 0.1, w, w).is_ok());
    }

    #[test]
    fn canonical_commutator_below_the_edge(m in 0.3f64..3.0, w in 0.3f64..3.0, d in 3usize..20) {
        let can = build_canonical(OscParams::matched(m, w).unwrap(), d).unwrap();
        let comm = &can.q.mat * &can.p.mat - &can.p.mat * &can.q.mat;
        let err = linalg::max_abs_block(&(comm - CMat::identity(d, d) * linalg::I), d - 1);
        prop_assert!(err < 1e-12);
        let ev = HermitianEigen::new(&can.h.mat);
        for (n, e) in ev.values.iter().enumerate() {
            prop_assert!((e - w * (n as f64 + 0.5)).abs() < 1e-10 * w * d as f64);
        }
    }

    #[test]
    fn quantum_variance_is_non_negative(seed in any::<u64>(), d in 2usize..12) {
        let mut r = rng(seed);
        let w = random_density(&mut r, d, d);
        let a = random_hermitian(&mut r, d, d);
        prop_assert!(quantum_variance(&w, &a).unwrap() >= -1e-10);
    }

    #[test]
    fn position_density_is_a_probability(seed in any::<u64>()) {
        let mut r = rng(seed);
        let w = random_density(&mut r, 12, 6);
        let xs = symmetric_axis(8.0, 0.02);
        let rho = hermite_position_density(&w, &OscParams::default(), &xs);
        prop_assert!(rho.values.iter().all(|&v| v >= -1e-10));
        prop_assert!((rho.integral() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn hermitian_coordinates_are_an_isometry(seed in any::<u64>(), d in 1usize..9) {
        let mut r = rng(seed);
        let a = random_hermitian(&mut r, d, d).mat;
        let b = random_hermitian(&mut r, d, d).mat;
        let (xa, xb) = (hermitian_coords(&a), hermitian_coords(&b));
        let dot: f64 = xa.iter().zip(&xb).map(|(u, v)| u * v).sum();
        prop_assert!((dot - linalg::trace_product(&a, &b).re).abs() < 1e-10);
        prop_assert!(linalg::max_abs(&(from_hermitian_coords(&xa, d) - a)) < 1e-14);
    }

    #[test]
    fn husimi_is_affine(seed in any::<u64>(), lambda in 0.0f64..1.0, q in -3.0f64..3.0, p in -3.0f64..3.0) {
        let mut r = rng(seed);
        let frame = FrameSpec::coherent(OscParams::default(), 10).unwrap();
        let w1 = random_density(&mut r, 10, 10);
        let w2 = random_density(&mut r, 10, 10);
        let mix = Operator::new(OperatorKind::Density, &w1.mat * c(lambda, 0.0) + &w2.mat * c(1.0 - lambda, 0.0));
        let lhs = husimi_at(&mix, &frame, q, p);
        let rhs = lambda * husimi_at(&w1, &frame, q, p) + (1.0 - lambda) * husimi_at(&w2, &frame, q, p);
        prop_assert!((lhs - rhs).abs() < 1e-15);
        prop_assert!((-1e-12..=1.0 / std::f64::consts::TAU + 1e-10).contains(&lhs));
    }

    #[test]
    fn kernel_gram_is_positive(points in prop::collection::vec((-4.0f64..4.0, -4.0f64..4.0), 1..12), sigma in 0.4f64..1.5) {
        let frame = FrameSpec::coherent(OscParams::default().with_sigma(sigma).unwrap(), 16).unwrap();
        let g = kernel_gram(&points, &frame).unwrap();
        prop_assert!(linalg::hermitian_defect(&g) < 1e-14);
        prop_assert!(HermitianEigen::new(&g).min() >= -1e-10);
    }

    #[test]
    fn char_of_density_is_bounded(seed in any::<u64>()) {
        let mut r = rng(seed);
        let w = random_density(&mut r, 8, 4);
        let g = PhaseGrid::symmetric(1.5, 1.5, 0.5).unwrap();
        let s = char_function(&w, &g, &OscParams::default(), "w").unwrap();
        let origin = (0..g.len()).find(|&k| g.point(k) == (0.0, 0.0)).unwrap();
        prop_assert!((s.values[origin] - c(1.0, 0.0)).norm() < 1e-10);
        prop_assert!(s.values.iter().all(|z| z.norm() <= 1.0 + 1e-10));
    }

    #[test]
    fn adjoint_char_identity(seed in any::<u64>(), q in -1.0f64..1.0, p in -1.0f64..1.0) {
        let mut r = rng(seed);
        let v = random_density(&mut r, 6, 6).mat * c(0.3, 0.9) + random_hermitian(&mut r, 6, 6).mat;
        let u = displacement_block(q, p, &OscParams::default(), 6, 6);
        let lhs = linalg::trace_product(&v, &u).conj();
        let rhs = linalg::trace_product(&v.adjoint(), &u.adjoint());
        prop_assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn gauges_preserve_modulus(seed in any::<u64>()) {
        let mut r = rng(seed);
        let psi = random_unit_vector(&mut r, 8, 4);
        let frame = FrameSpec::coherent(OscParams::default(), 8).unwrap();
        let g = PhaseGrid::symmetric(2.0, 2.0, 0.25).unwrap();
        let (field, _) = phase_transform(&psi, &frame, &g).unwrap();
        for gauge in [Gauge::Qp, Gauge::HalfQp] {
            let out = gauge_transform(&field, gauge);
            // multiplying by a unit phase moves |Ψ|² by at most a few ulps
            for (a, b) in out.values.iter().zip(&field.values) {
                prop_assert!((a.norm_sqr() - b.norm_sqr()).abs() <= 4.0 * f64::EPSILON * b.norm_sqr());
            }
        }
    }

    #[test]
    fn bargmann_norm_identity(seed in any::<u64>(), scale in 0.1f64..5.0) {
        let mut r = rng(seed);
        let mut psi = random_unit_vector(&mut r, 16, 16);
        psi.0 *= c(scale, 0.0);
        let frame = FrameSpec::coherent(OscParams::default(), 16).unwrap();
        let a = bargmann_transform(&psi, &frame).unwrap();
        prop_assert!((bargmann_norm_sqr(&a) - scale * scale).abs() < 1e-12 * scale * scale);
    }

    #[test]
    fn quadratic_dequantizer_constants(m in 0.3f64..3.0, w in 0.3f64..3.0, sigma in 0.2f64..2.0) {
        let params = OscParams::new(m, w, sigma).unwrap();
        let frame = FrameSpec::coherent(params, 8).unwrap();
        prop_assert!((dequantizer_for(Symbol::Q2, &frame).unwrap().constant + sigma * sigma).abs() < 1e-12);
        prop_assert!((dequantizer_for(Symbol::P2, &frame).unwrap().constant + 0.25 / (sigma * sigma)).abs() < 1e-12);
        let matched = FrameSpec::coherent(OscParams::matched(m, w).unwrap(), 8).unwrap();
        prop_assert!((dequantizer_for(Symbol::H, &matched).unwrap().constant + 0.5 * w).abs() < 1e-12);
    }

    #[test]
    fn classical_flow_is_symplectic(q in -5.0f64..5.0, p in -5.0f64..5.0, t in -10.0f64..10.0, m in 0.3f64..3.0, w in 0.3f64..3.0) {
        let params = OscParams::matched(m, w).unwrap();
        let f = classical_flow(q, p, t, &params);
        let e = params.classical_energy(q, p);
        prop_assert!((params.classical_energy(f.q, f.p) - e).abs() < 1e-12 * (1.0 + e));
        // the flow is linear, so unit displacements give the Jacobian columns
        let fq = classical_flow(q + 1.0, p, t, &params);
        let fp = classical_flow(q, p + 1.0, t, &params);
        let det = (fq.q - f.q) * (fp.p - f.p) - (fp.q - f.q) * (fq.p - f.p);
        prop_assert!((det - 1.0).abs() < 1e-10);
    }

    #[test]
    fn evolution_is_a_unitary_group(seed in any::<u64>(), t1 in -3.0f64..3.0, t2 in -3.0f64..3.0) {
        let mut r = rng(seed);
        let h = random_hermitian(&mut r, 6, 6);
        let w = random_density(&mut r, 6, 6);
        let two = evolve_state(&evolve_state(&w, &h, t1).unwrap(), &h, t2).unwrap();
        let one = evolve_state(&w, &h, t1 + t2).unwrap();
        prop_assert!(linalg::max_abs(&(two.mat - &one.mat)) < 1e-10);
        let before = HermitianEigen::new(&w.mat).values;
        let after = HermitianEigen::new(&one.mat).values;
        prop_assert!((before - after).amax() < 1e-10);
        let e0 = linalg::trace_product(&w.mat, &h.mat).re;
        prop_assert!((linalg::trace_product(&one.mat, &h.mat).re - e0).abs() < 1e-10);
    }
}
