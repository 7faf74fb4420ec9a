//! Property-check runner behind `phasekit check`.
//!
//! Suites run at capped truncations (see the `*_DIM` constants) so that
//! `--suite all` stays within a minute on one core whatever `--dim` says.

use std::f64::consts::TAU;
use std::str::FromStr;
use std::time::Instant;

use phasekit::classrep::{
    completeness_rank, confidence_functions, effect_of_region, fourier_criterion, generator_char, husimi,
    reconstruct_state, tiling_completeness, uncertainty_report,
};
use phasekit::dequant::{check_dequantizer_with, oscillator_density_field, Symbol};
use phasekit::dynamics::{
    coherent_evolution_check, correction_coefficient, evolve_state, generator_residual, liouville_match,
};
use phasekit::fock::{
    random_density, random_hermitian, random_unit_vector, FockVector, Operator, OperatorKind, OscParams,
};
use phasekit::frame::{
    auto_grid, bargmann_norm_sqr, bargmann_ops_check, bargmann_transform, cauchy_riemann_residual, coherent_overlaps,
    dq_orthogonality, kernel_gram, kernel_reproducing_check, pde_residual, phase_transform, resolution_check,
    BargmannOp, FrameSpec, PdeOperator,
};
use phasekit::grid::{FieldKind, PhaseGrid, RealField};
use phasekit::linalg::{self, c, HermitianEigen};
use phasekit::{PhaseError, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;

pub const FRAME_DIM: usize = 16;
pub const UNCERTAINTY_DIM: usize = 12;
pub const BARGMANN_DIM: usize = 12;
pub const LIOUVILLE_DIM: usize = 8;
pub const GENERATOR_DIM: usize = 12;
/// The stencil checks of the first-order operators run at this spacing.
pub const PDE_SPACING: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Frame,
    Uncertainty,
    Completeness,
    Bargmann,
    Dynamics,
    All,
}

impl FromStr for Suite {
    type Err = PhaseError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "frame" => Self::Frame,
            "uncertainty" => Self::Uncertainty,
            "completeness" => Self::Completeness,
            "bargmann" => Self::Bargmann,
            "dynamics" => Self::Dynamics,
            "all" => Self::All,
            other => return Err(PhaseError::Parse(format!("unknown suite '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: &'static str,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// Human-readable acceptance rule, e.g. `< 1e-8`.
    pub rule: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub suite: Suite,
    pub pass: bool,
    pub checks: Vec<CheckResult>,
    pub failing: Vec<String>,
    pub skipped: Vec<String>,
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    suite: &'static str,
    out: Vec<CheckResult>,
}

impl Runner<'_> {
    fn below(&mut self, name: &'static str, value: f64, tol: f64) {
        self.push(name, value < tol, Some(value), format!("< {tol:e}"));
    }

    fn above(&mut self, name: &'static str, value: f64, tol: f64) {
        self.push(name, value >= tol, Some(value), format!(">= {tol:e}"));
    }

    fn push(&mut self, name: &'static str, pass: bool, value: Option<f64>, rule: String) {
        let shown = value.map(|v| format!("{v:.3e}")).unwrap_or_default();
        eprintln!("  [{}] {}/{name} {shown} ({rule})", if pass { "PASS" } else { "FAIL" }, self.suite);
        self.out.push(CheckResult { suite: self.suite, name, pass, value, rule, skipped: None });
    }

    fn skip(&mut self, name: &'static str, reason: &str) {
        eprintln!("  [SKIP] {}/{name}: {reason}", self.suite);
        self.out.push(CheckResult {
            suite: self.suite,
            name,
            pass: true,
            value: None,
            rule: String::new(),
            skipped: Some(reason.to_string()),
        });
    }

    fn params(&self) -> Result<OscParams> {
        self.cfg.params()
    }

    fn coherent(&self, dim: usize) -> Result<FrameSpec> {
        FrameSpec::coherent(self.params()?, dim)
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        use rand::SeedableRng;
        ChaCha8Rng::seed_from_u64(self.cfg.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

const UNMATCHED: &str = "frame width differs from the ladder width; the identity holds only for matched frames";

pub fn run(cfg: &RunConfig, suite: Suite) -> Result<CheckReport> {
    let order = [Suite::Frame, Suite::Uncertainty, Suite::Completeness, Suite::Bargmann, Suite::Dynamics];
    let mut checks = Vec::new();
    for s in order {
        if suite != Suite::All && suite != s {
            continue;
        }
        let start = Instant::now();
        let name = match s {
            Suite::Frame => "frame",
            Suite::Uncertainty => "uncertainty",
            Suite::Completeness => "completeness",
            Suite::Bargmann => "bargmann",
            Suite::Dynamics => "dynamics",
            Suite::All => unreachable!(),
        };
        eprintln!("suite {name}");
        let mut r = Runner { cfg, suite: name, out: Vec::new() };
        match s {
            Suite::Frame => frame_suite(&mut r)?,
            Suite::Uncertainty => uncertainty_suite(&mut r)?,
            Suite::Completeness => completeness_suite(&mut r)?,
            Suite::Bargmann => bargmann_suite(&mut r)?,
            Suite::Dynamics => dynamics_suite(&mut r)?,
            Suite::All => unreachable!(),
        }
        eprintln!("suite {name} done in {:.1}s", start.elapsed().as_secs_f64());
        checks.extend(r.out);
    }
    let failing: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| format!("{}/{}", c.suite, c.name)).collect();
    let skipped: Vec<String> =
        checks.iter().filter(|c| c.skipped.is_some()).map(|c| format!("{}/{}", c.suite, c.name)).collect();
    Ok(CheckReport { suite, pass: failing.is_empty(), checks, failing, skipped })
}

fn frame_suite(r: &mut Runner) -> Result<()> {
    let d = r.cfg.dim.min(FRAME_DIM);
    let block = linalg::trusted_block(d);
    let frame = r.cfg.frame_at(d)?;
    let grid = auto_grid(&frame, r.cfg.spacing, block)?;
    let res = resolution_check(&frame, &grid)?;
    r.below("resolution_defect", res.defect, 1e-8);

    let coherent = r.coherent(d)?;
    let psi = random_unit_vector(&mut r.rng(1), d, block);
    let g = auto_grid(&coherent, r.cfg.spacing, block)?;
    let (field, _) = phase_transform(&psi, &coherent, &g)?;
    r.below("isometry", (field.norm_sqr() - 1.0).abs(), 1e-6);

    let probes = [(0.0, 0.0), (1.0, -0.5), (-2.0, 1.5)];
    r.below("kernel_reproducing", kernel_reproducing_check(&coherent, &g, &probes)?, 1e-8);

    let mut rng = r.rng(2);
    let points: Vec<(f64, f64)> = (0..20).map(|_| (rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0))).collect();
    let gram = kernel_gram(&points, &coherent)?;
    r.above("kernel_gram_min_eigenvalue", HermitianEigen::new(&gram).min(), -1e-10);

    let phi = random_unit_vector(&mut r.rng(3), d, block);
    r.below("dq_orthogonality", dq_orthogonality(&phi, &psi, &coherent, &g)?.norm(), 1e-6);

    let small = r.coherent(12)?;
    // V(Qψ) reaches one level above ψ
    let fine = auto_grid(&small, PDE_SPACING, 3)?;
    let mut qp: f64 = 0.0;
    for n in 0..2 {
        for op in [PdeOperator::Q, PdeOperator::P] {
            qp = qp.max(pde_residual(op, &FockVector::basis(n, 12), &small, &fine)?.residual);
        }
    }
    r.below("pde_position_momentum", qp, 1e-6);

    let coarse = auto_grid(&small, 0.05, 6)?;
    if small.params.is_matched() {
        let mut h: f64 = 0.0;
        for n in 0..4 {
            h = h.max(pde_residual(PdeOperator::HMatched, &FockVector::basis(n, 12), &small, &coarse)?.residual);
        }
        r.below("pde_energy_eigenfunctions", h, 1e-6);
    } else {
        r.skip("pde_energy_eigenfunctions", UNMATCHED);
    }
    // second derivatives lose about one digit at spacing 0.05
    let h = pde_residual(PdeOperator::HGeneral, &random_unit_vector(&mut r.rng(4), 12, 6), &small, &coarse)?.residual;
    r.below("pde_energy_general_width", h, 1e-5);
    Ok(())
}

fn uncertainty_suite(r: &mut Runner) -> Result<()> {
    let d = r.cfg.dim.min(UNCERTAINTY_DIM);
    let frame = r.cfg.frame_at(d)?;
    let grid = auto_grid(&frame, r.cfg.spacing, d / 2)?;
    let mut rng = r.rng(10);
    let (mut additivity, mut min_f, mut min_e): (f64, f64, f64) = (0.0, f64::INFINITY, f64::INFINITY);
    let mut states = vec![Operator::number_projector(0, d)];
    states.extend((0..20).map(|_| random_density(&mut rng, d, d / 2)));
    for w in &states {
        let u = uncertainty_report(w, &frame, &grid)?;
        additivity = additivity.max(u.additivity_defect_q).max(u.additivity_defect_p);
        min_f = min_f.min(u.product_f);
        min_e = min_e.min(u.product_e);
    }
    r.below("variance_additivity", additivity, 1e-6);
    r.above("product_ideal", min_e, 0.25 - 1e-9);
    r.above("product_joint", min_f, 1.0 - 1e-9);

    let (eq, ep) = confidence_functions(&frame);
    let eta = eq.variance * ep.variance;
    r.above("product_confidence", eta, 0.25 - 1e-9);
    if frame.is_coherent() {
        r.below("product_confidence_gaussian_equality", (eta - 0.25).abs(), 1e-9);
    } else {
        r.skip("product_confidence_gaussian_equality", "generator is not Gaussian");
    }

    let params = r.params()?;
    if frame.is_coherent() && params.is_matched() {
        let ground = uncertainty_report(&Operator::number_projector(0, d), &frame, &grid)?;
        r.below("coherent_joint_product_unity", (ground.product_f - 1.0).abs(), 1e-8);
        let (mut mean, mut var): (f64, f64) = (0.0, 0.0);
        for n in 0..4 {
            let rho = oscillator_density_field(n, &params, &grid);
            let target = params.omega * (n as f64 + 1.0);
            mean = mean.max(
                (phasekit::classrep::classical_expectation(&rho, |q, p| params.classical_energy(q, p)) - target).abs(),
            );
            var = var.max(
                (phasekit::classrep::classical_variance(&rho, |q, p| params.classical_energy(q, p))
                    - params.omega * target)
                    .abs(),
            );
        }
        r.below("oscillator_energy_mean", mean, 1e-8);
        r.below("oscillator_energy_variance", var, 1e-8);
    } else {
        r.skip("coherent_joint_product_unity", UNMATCHED);
        r.skip("oscillator_energy_mean", UNMATCHED);
        r.skip("oscillator_energy_variance", UNMATCHED);
    }

    let mut worst: f64 = 0.0;
    for w in states.iter().skip(1).take(5) {
        let rho = husimi(w, &frame, &grid)?;
        for s in Symbol::CLOSED_FORM {
            worst = worst.max(check_dequantizer_with(w, &rho, s, &frame)?.discrepancy);
        }
    }
    r.below("dequantizer_two_routes", worst, 1e-6);
    Ok(())
}

fn completeness_suite(r: &mut Runner) -> Result<()> {
    let mut deficit = 0usize;
    for d in [3, 4, 6] {
        let rep = tiling_completeness(&r.cfg.frame_at(d)?, r.cfg.spacing)?;
        deficit += rep.required - rep.rank;
    }
    r.push("tiling_rank_full", deficit == 0, Some(deficit as f64), "rank = D² for D in {3, 4, 6}".into());

    let d = 4;
    let frame = r.cfg.frame_at(d)?;
    let grid = auto_grid(&frame, r.cfg.spacing, d)?;
    let mut set = effect_of_region(&grid.tiling(6), &frame, &grid)?;
    for e in set.effects.iter_mut() {
        let diag: Vec<f64> = (0..d).map(|k| e.mat[(k, k)].re).collect();
        *e = Operator::diagonal(OperatorKind::Hermitian, &diag);
    }
    let rank = completeness_rank(&set)?.rank;
    r.push("commuting_family_rank", rank <= d, Some(rank as f64), format!("<= {d}"));

    let d = 6;
    let frame = r.cfg.frame_at(d)?;
    let grid = auto_grid(&frame, r.cfg.spacing, d)?;
    let w = random_density(&mut r.rng(20), d, d);
    let rho = husimi(&w, &frame, &grid)?;
    let rec = reconstruct_state(&rho, &frame, Some(&w), None)?;
    r.below("reconstruction_trace_distance", rec.trace_distance.unwrap_or(f64::INFINITY), 1e-6);

    let mut values = vec![0.0; grid.len()];
    values[grid.index(grid.nq / 2, grid.np / 2)] = 1.0 / grid.weight();
    let indicator = RealField::new(grid, values, FieldKind::Density);
    let rec = reconstruct_state(&indicator, &frame, None, None)?;
    r.above("indicator_residual", rec.residual_max, 1e-3);

    let f16 = r.cfg.frame_at(16)?;
    let scan = PhaseGrid::symmetric(2.0, 2.0, 0.1)?;
    let rep = fourier_criterion(&f16, &scan)?;
    r.push(
        "generator_transform_zero_free",
        rep.zero_squares.is_empty() && rep.min_modulus > 0.0,
        Some(rep.min_modulus),
        "no sign-change squares, min modulus > 0".into(),
    );
    let params = r.params()?;
    if f16.is_coherent() && params.is_matched() {
        let mut gap: f64 = 0.0;
        for (q, p) in scan.points() {
            if phasekit::displacement::in_trusted_region(q, p, &params, 16) {
                let z2 = params.ladder_z(q, p).norm_sqr();
                gap = gap.max((generator_char(&f16, q, p).norm() - (-0.5 * z2).exp()).abs());
            }
        }
        r.below("generator_transform_closed_form", gap, 1e-8);
    } else {
        r.skip("generator_transform_closed_form", UNMATCHED);
    }
    Ok(())
}

fn bargmann_suite(r: &mut Runner) -> Result<()> {
    let d = BARGMANN_DIM;
    let frame = r.coherent(d)?;
    if !frame.params.is_matched() {
        for name in ["coefficients_exact", "norm_identity", "cauchy_riemann", "operator_algebra"] {
            r.skip(name, UNMATCHED);
        }
        return Ok(());
    }
    let mut coeff: f64 = 0.0;
    let mut fact = 1.0;
    for n in 0..d {
        if n > 0 {
            fact *= n as f64;
        }
        let a = bargmann_transform(&FockVector::basis(n, d), &frame)?;
        for (k, x) in a.iter().enumerate() {
            let expected = if k == n { 1.0 / f64::sqrt(fact) } else { 0.0 };
            coeff = coeff.max((x - c(expected, 0.0)).norm());
        }
    }
    r.below("coefficients_exact", coeff, 1e-15);

    let mut rng = r.rng(30);
    let mut norm: f64 = 0.0;
    for _ in 0..5 {
        let v = random_unit_vector(&mut rng, d, d);
        norm = norm.max((bargmann_norm_sqr(&bargmann_transform(&v, &frame)?) - 1.0).abs());
    }
    r.below("norm_identity", norm, 1e-12);

    let mut cr: f64 = 0.0;
    for psi in [FockVector::basis(0, d), FockVector::basis(2, d), random_unit_vector(&mut rng, d, d / 2)] {
        cr = cr.max(cauchy_riemann_residual(&psi, &frame, 1.5, 0.02)?);
    }
    r.below("cauchy_riemann", cr, 1e-5);

    let psi = random_unit_vector(&mut rng, d, d - 2);
    let mut ops: f64 = 0.0;
    for op in [BargmannOp::A, BargmannOp::Adag, BargmannOp::H, BargmannOp::Q, BargmannOp::P] {
        ops = ops.max(bargmann_ops_check(op, &psi, &frame)?.residual);
    }
    r.below("operator_algebra", ops, 1e-12);
    Ok(())
}

fn dynamics_suite(r: &mut Runner) -> Result<()> {
    let params = r.params()?;
    let mut rng = r.rng(40);
    let h = random_hermitian(&mut rng, 6, 6);
    let w = random_density(&mut rng, 6, 6);
    let (t1, t2) = (0.7, -1.9);
    let two = evolve_state(&evolve_state(&w, &h, t1)?, &h, t2)?;
    let one = evolve_state(&w, &h, t1 + t2)?;
    r.below("group_law", linalg::max_abs(&(two.mat - &one.mat)), 1e-10);
    let before = HermitianEigen::new(&w.mat).values;
    let after = HermitianEigen::new(&one.mat).values;
    r.below("spectrum_preserved", (before - after).amax(), 1e-10);
    let e0 = linalg::trace_product(&w.mat, &h.mat).re;
    r.below("energy_conserved", (linalg::trace_product(&one.mat, &h.mat).re - e0).abs(), 1e-10);

    let kappa = correction_coefficient(&params);
    if params.is_matched() {
        let mut defect: f64 = 0.0;
        for t in [0.3, 1.0, TAU] {
            defect = defect.max(coherent_evolution_check(2.0, 0.0, t, &params, 32)?.defect);
        }
        r.below("coherent_orbit", defect, 1e-8);
        r.below("correction_vanishes", kappa.abs(), 1e-12);

        let d = LIOUVILLE_DIM;
        let frame = r.coherent(d)?;
        let w = coherent_overlaps(2.0, 0.0, &params, d).normalized().projector();
        let coarse = auto_grid(&frame, 0.05, d)?;
        let fine = auto_grid(&frame, 0.025, d)?;
        let e1 = liouville_match(&w, &frame, &coarse, 0.3)?.max_error;
        let e2 = liouville_match(&w, &frame, &fine, 0.3)?.max_error;
        r.below("liouville_transport", e1, 5e-4);
        r.above("liouville_halving_gain", e1 / e2, 3.0);
    } else {
        r.skip("coherent_orbit", UNMATCHED);
        r.skip("liouville_transport", UNMATCHED);
        r.skip("liouville_halving_gain", UNMATCHED);
        r.push("correction_coefficient", kappa.is_finite(), Some(kappa), "finite".into());
    }

    let d = GENERATOR_DIM;
    let frame = r.coherent(d)?;
    let grid = auto_grid(&frame, 0.05, d)?;
    let psi = random_unit_vector(&mut r.rng(41), d, 6).projector();
    r.below("generator_residual", generator_residual(&psi, &frame, &grid)?.residual, 1e-4);
    Ok(())
}
