//! Unitary evolution, the induced motion of Husimi densities, and the
//! oscillator's classical flow.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classrep::{husimi, husimi_window};
use crate::error::{PhaseError, Result};
use crate::fock::{build_canonical, require_density, Operator, OperatorKind, OscParams};
use crate::frame::{coherent_overlaps, stencil, FrameSpec};
use crate::grid::{FieldKind, PhaseField, PhaseGrid, RealField};
use crate::linalg::{self, HermitianEigen};

/// Hermiticity defect tolerated in a Hamiltonian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// `W_t = e^{−iHt}·W·e^{iHt}`.
pub fn evolve_state(w: &Operator, h: &Operator, t: f64) -> Result<Operator> {
    if w.dim() != h.dim() {
        return Err(PhaseError::DimensionMismatch { expected: h.dim(), got: w.dim() });
    }
    let defect = h.hermitian_defect();
    if defect > HERMITIAN_TOL {
        return Err(PhaseError::NotHermitian(defect));
    }
    require_density(w)?;
    let u = HermitianEigen::new(&h.mat).exp_i(-t);
    let wt = &u * &w.mat * u.adjoint();
    Ok(Operator::new(OperatorKind::Density, wt))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowPoint {
    pub q: f64,
    pub p: f64,
    pub t: f64,
}

/// Oscillator flow `Φ_t(q,p)`.
pub fn classical_flow(q: f64, p: f64, t: f64, params: &OscParams) -> FlowPoint {
    let (m, w) = (params.m, params.omega);
    let (s, c) = (w * t).sin_cos();
    FlowPoint { q: q * c + p / (m * w) * s, p: p * c - m * w * q * s, t }
}

/// Oscillator Hamiltonian truncated to the frame dimension.
fn oscillator_h(frame: &FrameSpec) -> Result<Operator> {
    Ok(build_canonical(frame.params, frame.dim)?.h)
}

/// Husimi density of `W` evolved under the oscillator Hamiltonian.
pub fn evolve_density(w: &Operator, frame: &FrameSpec, grid: &PhaseGrid, t: f64) -> Result<RealField> {
    evolve_density_with(w, &oscillator_h(frame)?, frame, grid, t)
}

pub fn evolve_density_with(
    w: &Operator,
    h: &Operator,
    frame: &FrameSpec,
    grid: &PhaseGrid,
    t: f64,
) -> Result<RealField> {
    husimi(&evolve_state(w, h, t)?, frame, grid)
}

/// Densities at several times, in input order.
pub fn density_series(w: &Operator, frame: &FrameSpec, grid: &PhaseGrid, times: &[f64]) -> Result<Vec<RealField>> {
    let h = oscillator_h(frame)?;
    times.par_iter().map(|&t| evolve_density_with(w, &h, frame, grid, t)).collect()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LiouvilleReport {
    pub t: f64,
    /// Max over the interior of `|ρ_t − ρ_0∘Φ_{−t}|`.
    pub max_error: f64,
    pub points: usize,
}

/// Compare the evolved density with the initial one transported along the
/// classical flow. `ρ_0∘Φ_{−t}` is read off a bilinear interpolation of `ρ_0`
/// sampled at the grid's spacing, which dominates the error.
pub fn liouville_match(w: &Operator, frame: &FrameSpec, grid: &PhaseGrid, t: f64) -> Result<LiouvilleReport> {
    frame.require_matched()?;
    let params = frame.params;
    let rho_t = evolve_density(w, frame, grid, t)?;
    // bounding box of the pulled-back grid, padded by two cells
    let corners = [
        (grid.q_min, grid.p_min),
        (grid.q_max(), grid.p_min),
        (grid.q_min, grid.p_max()),
        (grid.q_max(), grid.p_max()),
    ];
    let back: Vec<FlowPoint> = corners.iter().map(|&(q, p)| classical_flow(q, p, -t, &params)).collect();
    let fold = |f: fn(f64, f64) -> f64, init: f64, sel: fn(&FlowPoint) -> f64| back.iter().map(sel).fold(init, f);
    let pad_q = 2.0 * grid.dq;
    let pad_p = 2.0 * grid.dp;
    let box_grid = PhaseGrid::from_bounds(
        fold(f64::min, f64::INFINITY, |b| b.q) - pad_q,
        fold(f64::max, f64::NEG_INFINITY, |b| b.q) + pad_q,
        fold(f64::min, f64::INFINITY, |b| b.p) - pad_p,
        fold(f64::max, f64::NEG_INFINITY, |b| b.p) + pad_p,
        grid.dq.max(grid.dp),
    )?;
    let rho_0 = husimi_window(w, frame, &box_grid);
    let interior = stencil::interior(&rho_t, 2);
    let max_error = interior
        .par_iter()
        .map(|&(i, j)| {
            let b = classical_flow(grid.q(i), grid.p(j), -t, &params);
            let pulled = rho_0.interpolate(b.q, b.p).unwrap_or(0.0);
            (rho_t.at(i, j) - pulled).abs()
        })
        .reduce(|| 0.0, f64::max);
    Ok(LiouvilleReport { t, max_error, points: interior.len() })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoherentEvolution {
    /// `|1 − ⟨e^{−iHt}u_qp, e^{i(qp−q_tp_t−ωt)/2}u_{q_tp_t}⟩|`.
    pub defect: f64,
    /// Argument of `⟨u_{q_tp_t}, e^{−iHt}u_qp⟩`.
    pub phase: f64,
    /// `(qp − q_tp_t − ωt)/2` reduced to `(−π, π]`.
    pub expected_phase: f64,
}

fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(std::f64::consts::TAU);
    if r > std::f64::consts::PI {
        r - std::f64::consts::TAU
    } else {
        r
    }
}

/// Check that a coherent state follows the classical orbit with the stated phase.
pub fn coherent_evolution_check(q: f64, p: f64, t: f64, params: &OscParams, dim: usize) -> Result<CoherentEvolution> {
    params.validate()?;
    if !params.is_matched() {
        return Err(PhaseError::UnmatchedFrame { sigma: params.sigma, ladder: params.ladder_width() });
    }
    // |z| is constant along the orbit
    let z2 = params.ladder_z(q, p).norm_sqr();
    if z2 > dim as f64 / 4.0 {
        return Err(PhaseError::Truncation(format!(
            "orbit has |z|^2 = {z2:.3}, outside the trusted region |z|^2 <= {}",
            dim as f64 / 4.0
        )));
    }
    let w = params.omega;
    let u = coherent_overlaps(q, p, params, dim);
    let evolved: Vec<Complex64> =
        u.0.iter().enumerate().map(|(n, a)| a * linalg::cis(-w * (n as f64 + 0.5) * t)).collect();
    let ft = classical_flow(q, p, t, params);
    let target = coherent_overlaps(ft.q, ft.p, params, dim);
    let overlap: Complex64 = target.0.iter().zip(&evolved).map(|(a, b)| a.conj() * b).sum();
    let theta = 0.5 * (q * p - ft.q * ft.p - w * t);
    // ⟨e^{−iHt}u, e^{iθ}u_t⟩ = e^{iθ}·conj(overlap)
    let defect = (Complex64::new(1.0, 0.0) - linalg::cis(theta) * overlap.conj()).norm();
    Ok(CoherentEvolution { defect, phase: overlap.arg(), expected_phase: wrap_phase(theta) })
}

/// Coefficient of `∂²ρ/∂q∂p` in the corrected Liouville equation.
pub fn correction_coefficient(params: &OscParams) -> f64 {
    let (m, w, s) = (params.m, params.omega, params.sigma);
    -1.0 / (4.0 * m * s * s) + m * w * w * s * s
}

#[derive(Debug, Clone)]
pub struct GeneratorReport {
    pub coefficient: f64,
    /// Max over the interior of `|∂_tρ − L̂ρ|`.
    pub residual: f64,
    pub lhs_max: f64,
    pub rhs_max: f64,
    pub field: RealField,
}

/// Purity tolerance for [`generator_residual`].
pub const PURITY_TOL: f64 = 1e-10;

/// Compare `∂_tρ` at `t = 0` (symmetric difference with step `1e-4/ω`) with
/// `−(p/m)ρ_q + mω²qρ_p + κρ_qp` from fourth-order stencils.
pub fn generator_residual(w: &Operator, frame: &FrameSpec, grid: &PhaseGrid) -> Result<GeneratorReport> {
    if !frame.is_coherent() {
        return Err(PhaseError::InvalidParams("the correction term is derived for Gaussian frames".into()));
    }
    require_density(w)?;
    let purity = linalg::trace_product(&w.mat, &w.mat).re;
    if (purity - 1.0).abs() > PURITY_TOL {
        return Err(PhaseError::MixedState);
    }
    let block = linalg::trusted_block(w.dim());
    if w.weight_above(block) > crate::dequant::TRUSTED_WEIGHT_TOL {
        return Err(PhaseError::Truncation(format!("state has weight above the trusted block of {block} levels")));
    }
    let params = frame.params;
    let h = oscillator_h(frame)?;
    let delta = 1e-4 / params.omega;
    let plus = evolve_density_with(w, &h, frame, grid, delta)?;
    let minus = evolve_density_with(w, &h, frame, grid, -delta)?;
    let rho = husimi(w, frame, grid)?;
    let kappa = correction_coefficient(&params);
    let (m, om) = (params.m, params.omega);
    let mut values = vec![0.0; grid.len()];
    let mut lhs_max: f64 = 0.0;
    let mut rhs_max: f64 = 0.0;
    let mut residual: f64 = 0.0;
    for (i, j) in stencil::interior(&rho, 2) {
        let (q, p) = (grid.q(i), grid.p(j));
        let lhs = (plus.at(i, j) - minus.at(i, j)) / (2.0 * delta);
        let rhs = -(p / m) * stencil::d_q(&rho, i, j)
            + m * om * om * q * stencil::d_p(&rho, i, j)
            + kappa * stencil::d_qp(&rho, i, j);
        let r = lhs - rhs;
        values[grid.index(i, j)] = r;
        lhs_max = lhs_max.max(lhs.abs());
        rhs_max = rhs_max.max(rhs.abs());
        residual = residual.max(r.abs());
    }
    let field = PhaseField::new(*grid, values, FieldKind::Residual);
    Ok(GeneratorReport { coefficient: kappa, residual, lhs_max, rhs_max, field })
}
