//! Coherent-state frames: overlaps, the phase-space transform `V`, the
//! reproducing kernel, differential-operator forms, gauges and the Bargmann
//! representation.
//!
//! The frame state is a Gaussian `u(x)` of position width `σ`; its phase-space
//! translates are `u_qp(x) = e^{ipx}u(x − q) = U_qp u`. A frame may also be
//! generated by a mixed density operator `a`, in which case the translated
//! generator is `a_qp = U_qp a U_qp†`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::displacement::displacement_block;
use crate::error::{PhaseError, Result};
use crate::fock::{require_density, FockVector, Operator, OperatorKind, OscParams};
use crate::grid::{FieldKind, PhaseField, PhaseGrid, WaveField};
use crate::linalg::{self, c, cis, CMat, CVec, HermitianEigen, I};

pub(crate) const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Edge overlaps below this make a grid adequate.
pub const ADEQUACY_TOL: f64 = 1e-12;

/// Eigen-components with weight below this are dropped from mixed generators.
const COMPONENT_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub enum Generator {
    /// Pure Gaussian `|u^σ⟩⟨u^σ|` of the frame width.
    Coherent,
    /// Density operator in the number basis, with its spectral decomposition.
    Mixed { op: Operator, components: Vec<(f64, CVec)>, support: usize },
}

#[derive(Debug, Clone)]
pub struct FrameSpec {
    pub params: OscParams,
    pub dim: usize,
    pub generator: Generator,
}

impl FrameSpec {
    pub fn coherent(params: OscParams, dim: usize) -> Result<Self> {
        params.validate()?;
        if dim < 2 {
            return Err(PhaseError::TruncationTooSmall(dim));
        }
        Ok(Self { params, dim, generator: Generator::Coherent })
    }

    /// Frame generated by a density operator `a` given in the number basis.
    pub fn mixed(params: OscParams, a: Operator) -> Result<Self> {
        params.validate()?;
        if a.dim() < 2 {
            return Err(PhaseError::TruncationTooSmall(a.dim()));
        }
        require_density(&a)?;
        let eig = HermitianEigen::new(&a.mat);
        let mut components = Vec::new();
        let mut support = 1;
        for k in (0..a.dim()).rev() {
            let lambda = eig.values[k];
            if lambda > COMPONENT_TOL {
                let v: CVec = eig.vectors.column(k).into_owned();
                if let Some(last) = (0..v.len()).rev().find(|&n| v[n].norm() > 1e-15) {
                    support = support.max(last + 1);
                }
                components.push((lambda, v));
            }
        }
        let dim = a.dim();
        for (_, v) in components.iter_mut() {
            *v = v.rows(0, support).into_owned();
        }
        Ok(Self { params, dim, generator: Generator::Mixed { op: a, components, support } })
    }

    /// Mixture `Σ w_n |φ_n⟩⟨φ_n|` of number states as generator.
    pub fn fock_mixture(params: OscParams, dim: usize, weights: &[f64]) -> Result<Self> {
        if weights.len() > dim || weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(PhaseError::InvalidParams("mixture weights must be non-negative and fit in D".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(PhaseError::InvalidParams("mixture weights sum to zero".into()));
        }
        let mut diag = vec![0.0; dim];
        for (d, w) in diag.iter_mut().zip(weights) {
            *d = w / total;
        }
        Self::mixed(params, Operator::diagonal(OperatorKind::Density, &diag))
    }

    pub fn is_pure(&self) -> bool {
        match &self.generator {
            Generator::Coherent => true,
            Generator::Mixed { components, .. } => components.len() == 1,
        }
    }

    pub fn is_coherent(&self) -> bool {
        matches!(self.generator, Generator::Coherent)
    }

    pub fn require_matched(&self) -> Result<()> {
        if self.is_coherent() && self.params.is_matched() {
            Ok(())
        } else {
            Err(PhaseError::UnmatchedFrame { sigma: self.params.sigma, ladder: self.params.ladder_width() })
        }
    }

    /// The generator as a `D × D` operator (the Gaussian is truncated for coherent frames).
    pub fn generator_operator(&self) -> Operator {
        match &self.generator {
            Generator::Coherent => coherent_overlaps(0.0, 0.0, &self.params, self.dim).projector(),
            Generator::Mixed { op, .. } => op.clone(),
        }
    }

    /// Weighted translated generator components `(λ_k, U_qp v_k)` with `rows` entries.
    pub fn frame_vectors(&self, q: f64, p: f64, rows: usize) -> Vec<(f64, CVec)> {
        match &self.generator {
            Generator::Coherent => vec![(1.0, coherent_overlaps(q, p, &self.params, rows).0)],
            Generator::Mixed { components, support, .. } => {
                let u = displacement_block(q, p, &self.params, rows, *support);
                components.iter().map(|(l, v)| (*l, &u * v)).collect()
            }
        }
    }

    /// `a_qp = U_qp a U_qp†` restricted to the first `rows` levels.
    pub fn translated_generator(&self, q: f64, p: f64, rows: usize) -> CMat {
        let mut out = CMat::zeros(rows, rows);
        for (l, v) in self.frame_vectors(q, p, rows) {
            out += &v * v.adjoint() * c(l, 0.0);
        }
        out
    }

    fn pure_vector(&self, q: f64, p: f64, rows: usize) -> Result<CVec> {
        if !self.is_pure() {
            return Err(PhaseError::InvalidParams("operation needs a pure frame generator".into()));
        }
        Ok(self.frame_vectors(q, p, rows).pop().expect("pure frame has one component").1)
    }
}

/// `⟨φ_n|u^σ_qp⟩` for `n < dim`, `σ = params.sigma`.
///
/// Matched frames use the closed form `e^{iqp/2}e^{−|z|²/2}z̄ⁿ/√n!`. Otherwise
/// the overlaps follow from `b·u_qp = w̄·u_qp` for the width-σ lowering operator
/// `b = μa + νa†`, which gives a three-term recurrence in `n`.
pub fn coherent_overlaps(q: f64, p: f64, params: &OscParams, dim: usize) -> FockVector {
    let mut out = CVec::zeros(dim);
    if dim == 0 {
        return FockVector(out);
    }
    if params.is_matched() {
        let z = params.ladder_z(q, p);
        let zb = z.conj();
        out[0] = cis(0.5 * q * p) * (-0.5 * z.norm_sqr()).exp();
        for n in 1..dim {
            out[n] = out[n - 1] * zb / (n as f64).sqrt();
        }
        return FockVector(out);
    }
    log::debug!("frame width {} differs from ladder width; using the general recurrence", params.sigma);
    let s = params.sigma;
    let sg = params.ladder_width();
    let mu = 0.5 * (sg / s + s / sg);
    let nu = 0.5 * (sg / s - s / sg);
    let wb = OscParams::z_at_width(s, q, p).conj();
    let a = 0.25 / (sg * sg) + 0.25 / (s * s);
    let b = c(0.5 * q / (s * s), p);
    let pref = (TWO_PI * sg * s).powf(-0.5) * (std::f64::consts::PI / a).sqrt();
    out[0] = (b * b / (4.0 * a) - q * q / (4.0 * s * s)).exp() * pref;
    if dim > 1 {
        out[1] = wb * out[0] / mu;
    }
    for n in 1..dim - 1 {
        let nf = n as f64;
        out[n + 1] = (wb * out[n] - out[n - 1] * (nu * nf.sqrt())) / (mu * (nf + 1.0).sqrt());
    }
    FockVector(out)
}

/// Result of the boundary-decay test of a grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Adequacy {
    /// Largest `|⟨φ_n|a_qp component⟩|`, `n < levels`, over the four edge midpoints.
    pub max_edge_overlap: f64,
    pub levels: usize,
    pub adequate: bool,
}

fn max_overlap_at(frame: &FrameSpec, q: f64, p: f64, levels: usize) -> f64 {
    frame
        .frame_vectors(q, p, levels)
        .iter()
        .flat_map(|(_, v)| v.iter().map(|z| z.norm()).collect::<Vec<_>>())
        .fold(0.0, f64::max)
}

/// The grid is adequate for the first `levels` basis states when every frame
/// overlap at the four boundary mid-edges is below `1e-12`.
pub fn grid_adequacy(frame: &FrameSpec, grid: &PhaseGrid, levels: usize) -> Adequacy {
    let levels = levels.clamp(1, frame.dim.max(1));
    let max_edge_overlap =
        grid.edge_midpoints().iter().map(|&(q, p)| max_overlap_at(frame, q, p, levels)).fold(0.0, f64::max);
    Adequacy { max_edge_overlap, levels, adequate: max_edge_overlap < ADEQUACY_TOL }
}

pub fn require_adequate(frame: &FrameSpec, grid: &PhaseGrid, levels: usize) -> Result<Adequacy> {
    grid.validate()?;
    let a = grid_adequacy(frame, grid, levels);
    if a.adequate {
        Ok(a)
    } else {
        Err(PhaseError::InadequateGrid(format!(
            "frame overlap {:.2e} at the grid boundary exceeds {ADEQUACY_TOL:.0e} for the first {} levels",
            a.max_edge_overlap, a.levels
        )))
    }
}

fn half_width_along(frame: &FrameSpec, levels: usize, spacing: f64, dir: (f64, f64)) -> f64 {
    let fails = |h: f64| max_overlap_at(frame, h * dir.0, h * dir.1, levels) >= ADEQUACY_TOL;
    let mut hi = 1.0;
    while fails(hi) || fails(-hi) {
        hi *= 2.0;
        if hi > 1e6 {
            break;
        }
    }
    let mut lo = 0.0;
    while hi - lo > 0.25 * spacing {
        let mid = 0.5 * (lo + hi);
        if fails(mid) || fails(-mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (hi / spacing).ceil() * spacing
}

/// Smallest symmetric grid at the given spacing that is adequate for `levels` levels.
pub fn auto_grid(frame: &FrameSpec, spacing: f64, levels: usize) -> Result<PhaseGrid> {
    let levels = levels.clamp(1, frame.dim);
    let hq = half_width_along(frame, levels, spacing, (1.0, 0.0));
    let hp = half_width_along(frame, levels, spacing, (0.0, 1.0));
    PhaseGrid::symmetric(hq, hp, spacing)
}

/// `Ψ(q,p) = (2π)^{-1/2}⟨u_qp|ψ⟩` at one point.
pub fn wave_at(psi: &FockVector, frame: &FrameSpec, q: f64, p: f64) -> Result<Complex64> {
    let u = frame.pure_vector(q, p, psi.dim())?;
    Ok(u.dotc(&psi.0) / TWO_PI.sqrt())
}

/// The phase-space wave function `Ψ = Vψ` sampled on a grid.
pub fn phase_transform(psi: &FockVector, frame: &FrameSpec, grid: &PhaseGrid) -> Result<(WaveField, Adequacy)> {
    grid.validate()?;
    frame.pure_vector(0.0, 0.0, 1)?;
    let dim = psi.dim();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (q, p) = grid.point(k);
            let u = frame.frame_vectors(q, p, dim).pop().expect("pure").1;
            u.dotc(&psi.0) / TWO_PI.sqrt()
        })
        .collect();
    let levels = FockVector::support_levels(psi);
    let adequacy = grid_adequacy(frame, grid, levels);
    if !adequacy.adequate {
        log::warn!("phase transform grid is not adequate (edge overlap {:.2e})", adequacy.max_edge_overlap);
    }
    Ok((PhaseField::new(*grid, values, FieldKind::WaveFunction), adequacy))
}

impl FockVector {
    /// One past the highest level with a non-zero coefficient.
    pub fn support_levels(&self) -> usize {
        (0..self.dim()).rev().find(|&n| self.0[n].norm() > 0.0).map_or(1, |n| n + 1)
    }
}

/// Closed-form oscillator eigenfunction in phase space (matched frame):
/// `Φ_n = (2πn!)^{-1/2}·zⁿ·e^{−H/(2ω) − iqp/2}` with `z = (√(mω)q − ip/√(mω))/√2`.
pub fn oscillator_wave(n: usize, q: f64, p: f64, params: &OscParams) -> Complex64 {
    let rm = (params.m * params.omega).sqrt();
    let z = c(rm * q, -p / rm) / std::f64::consts::SQRT_2;
    let mut zn = c(1.0 / TWO_PI.sqrt(), 0.0);
    for k in 1..=n {
        zn = zn * z / (k as f64).sqrt();
    }
    let e = params.classical_energy(q, p) / params.omega;
    zn * (-0.5 * e).exp() * cis(-0.5 * q * p)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResolutionReport {
    /// Max-norm of `(1/2π)Σ a_qp·dq·dp − I` on the trusted block.
    pub defect: f64,
    pub block: usize,
    pub adequacy: Adequacy,
}

/// Quadrature of the resolution of the identity, compared with `I` on the trusted block.
pub fn resolution_check(frame: &FrameSpec, grid: &PhaseGrid) -> Result<ResolutionReport> {
    grid.validate()?;
    let block = linalg::trusted_block(frame.dim);
    let rows: Vec<CMat> = (0..grid.np)
        .into_par_iter()
        .map(|j| {
            let mut acc = CMat::zeros(block, block);
            for i in 0..grid.nq {
                for (l, v) in frame.frame_vectors(grid.q(i), grid.p(j), block) {
                    acc.ger(c(l, 0.0), &v, &v.conjugate(), c(1.0, 0.0));
                }
            }
            acc
        })
        .collect();
    let mut total = CMat::zeros(block, block);
    for r in rows {
        total += r;
    }
    total *= c(grid.weight() / TWO_PI, 0.0);
    let defect = linalg::max_abs(&(total - CMat::identity(block, block)));
    Ok(ResolutionReport { defect, block, adequacy: grid_adequacy(frame, grid, block) })
}

/// `K(x, y) = (1/2π)⟨u_x|u_y⟩` for a pure frame.
///
/// Gaussian frames use the exact coherent-state overlap; other pure generators
/// use their number-basis coefficients.
pub fn kernel(x: (f64, f64), y: (f64, f64), frame: &FrameSpec) -> Result<Complex64> {
    match frame.generator {
        Generator::Coherent => {
            let s = frame.params.sigma;
            let w1 = OscParams::z_at_width(s, x.0, x.1);
            let w2 = OscParams::z_at_width(s, y.0, y.1);
            let phase = cis(0.5 * (y.0 * y.1 - x.0 * x.1));
            let arg = -0.5 * w1.norm_sqr() - 0.5 * w2.norm_sqr() + w1 * w2.conj();
            Ok(phase * arg.exp() / TWO_PI)
        }
        Generator::Mixed { .. } => {
            let ux = frame.pure_vector(x.0, x.1, frame.dim)?;
            let uy = frame.pure_vector(y.0, y.1, frame.dim)?;
            Ok(ux.dotc(&uy) / TWO_PI)
        }
    }
}

/// Max over probe pairs of `|K(x,y) − Σ_z K(x,z)K(z,y)·dq·dp|`.
pub fn kernel_reproducing_check(frame: &FrameSpec, grid: &PhaseGrid, probes: &[(f64, f64)]) -> Result<f64> {
    grid.validate()?;
    let mut worst: f64 = 0.0;
    for &x in probes {
        let kx: Vec<Complex64> =
            (0..grid.len()).into_par_iter().map(|k| kernel(x, grid.point(k), frame)).collect::<Result<_>>()?;
        for &y in probes {
            let ky: Vec<Complex64> =
                (0..grid.len()).into_par_iter().map(|k| kernel(grid.point(k), y, frame)).collect::<Result<_>>()?;
            let quad: Complex64 = kx.iter().zip(&ky).map(|(a, b)| a * b).sum::<Complex64>() * grid.weight();
            worst = worst.max((kernel(x, y, frame)? - quad).norm());
        }
    }
    Ok(worst)
}

/// Operator whose phase-space action is checked by [`pde_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeOperator {
    /// `VQV⁻¹ = i∂_p`.
    Q,
    /// `VPV⁻¹ = p − i∂_q`.
    P,
    /// Gaussian-frame form `q + 2σ²∂_q`.
    QCoherent,
    /// Gaussian-frame form `p + iq/(2σ²) + ∂_p/(2σ²)`.
    PCoherent,
    /// `−∂_q²/2m − (mω²/2)∂_p² − i(p/m)∂_q + p²/2m`.
    HGeneral,
    /// Matched frame: `(ωq − ip/m)∂_q + p²/2m + mω²q²/2 + ω/2`.
    HMatched,
}

impl std::str::FromStr for PdeOperator {
    type Err = PhaseError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "q" => Ok(Self::Q),
            "p" => Ok(Self::P),
            "q_coherent" => Ok(Self::QCoherent),
            "p_coherent" => Ok(Self::PCoherent),
            "h_general" => Ok(Self::HGeneral),
            "h_matched" => Ok(Self::HMatched),
            other => Err(PhaseError::Parse(format!("unknown operator '{other}'"))),
        }
    }
}

/// Fourth-order central differences on a sampled field.
pub(crate) mod stencil {
    use crate::grid::PhaseField;
    use std::ops::{Add, Mul, Sub};

    pub trait Sample: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}
    impl<T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>> Sample for T {}

    pub fn d_q<T: Sample>(f: &PhaseField<T>, i: usize, j: usize) -> T {
        let h = f.grid.dq;
        ((f.at(i - 2, j) - f.at(i + 2, j)) + (f.at(i + 1, j) - f.at(i - 1, j)) * 8.0) * (1.0 / (12.0 * h))
    }

    pub fn d_p<T: Sample>(f: &PhaseField<T>, i: usize, j: usize) -> T {
        let h = f.grid.dp;
        ((f.at(i, j - 2) - f.at(i, j + 2)) + (f.at(i, j + 1) - f.at(i, j - 1)) * 8.0) * (1.0 / (12.0 * h))
    }

    pub fn d_qq<T: Sample>(f: &PhaseField<T>, i: usize, j: usize) -> T {
        let h = f.grid.dq;
        ((f.at(i + 1, j) + f.at(i - 1, j)) * 16.0 - (f.at(i + 2, j) + f.at(i - 2, j)) - f.at(i, j) * 30.0)
            * (1.0 / (12.0 * h * h))
    }

    pub fn d_pp<T: Sample>(f: &PhaseField<T>, i: usize, j: usize) -> T {
        let h = f.grid.dp;
        ((f.at(i, j + 1) + f.at(i, j - 1)) * 16.0 - (f.at(i, j + 2) + f.at(i, j - 2)) - f.at(i, j) * 30.0)
            * (1.0 / (12.0 * h * h))
    }

    /// Mixed derivative as the q-stencil applied to p-stencils.
    pub fn d_qp<T: Sample>(f: &PhaseField<T>, i: usize, j: usize) -> T {
        let h = f.grid.dq;
        let dp = |ii: usize| d_p(f, ii, j);
        ((dp(i - 2) - dp(i + 2)) + (dp(i + 1) - dp(i - 1)) * 8.0) * (1.0 / (12.0 * h))
    }

    /// Interior indices at least `margin` points from every edge, p-major.
    pub fn interior(f: &PhaseField<impl Copy>, margin: usize) -> Vec<(usize, usize)> {
        let g = &f.grid;
        let mut out = Vec::new();
        if g.nq <= 2 * margin || g.np <= 2 * margin {
            return out;
        }
        for j in margin..g.np - margin {
            for i in margin..g.nq - margin {
                out.push((i, j));
            }
        }
        out
    }
}

/// Spacing above which fourth-order stencils are flagged as too coarse.
pub const STENCIL_MAX_SPACING: f64 = 0.05;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PdeReport {
    /// Max-norm over the interior of `V(Aψ) − D_A(Vψ)`.
    pub residual: f64,
    pub coarse: bool,
}

/// Apply the differential expression of `op` to a sampled `Ψ` at interior point `(i, j)`.
fn apply_pde(op: PdeOperator, psi: &WaveField, i: usize, j: usize, params: &OscParams) -> Complex64 {
    use stencil::*;
    let (q, p) = (psi.grid.q(i), psi.grid.p(j));
    let v = psi.at(i, j);
    let s2 = params.sigma * params.sigma;
    let (m, w) = (params.m, params.omega);
    match op {
        PdeOperator::Q => I * d_p(psi, i, j),
        PdeOperator::P => v * p - I * d_q(psi, i, j),
        PdeOperator::QCoherent => v * q + d_q(psi, i, j) * (2.0 * s2),
        PdeOperator::PCoherent => v * c(p, q / (2.0 * s2)) + d_p(psi, i, j) * (1.0 / (2.0 * s2)),
        PdeOperator::HGeneral => {
            d_qq(psi, i, j) * (-0.5 / m) - d_pp(psi, i, j) * (0.5 * m * w * w) - I * d_q(psi, i, j) * (p / m)
                + v * (p * p / (2.0 * m))
        }
        PdeOperator::HMatched => d_q(psi, i, j) * c(w * q, -p / m) + v * (params.classical_energy(q, p) + 0.5 * w),
    }
}

/// Compare `V(Aψ)` computed in the number basis with the differential
/// expression applied to `Vψ`, over grid points two cells from the boundary.
pub fn pde_residual(op: PdeOperator, psi: &FockVector, frame: &FrameSpec, grid: &PhaseGrid) -> Result<PdeReport> {
    if !frame.is_coherent() {
        return Err(PhaseError::InvalidParams("differential forms are implemented for Gaussian frames".into()));
    }
    if op == PdeOperator::HMatched {
        frame.require_matched()?;
    }
    let dim = psi.dim();
    let can = crate::fock::build_canonical(frame.params, dim)?;
    let a = match op {
        PdeOperator::Q | PdeOperator::QCoherent => can.q.clone(),
        PdeOperator::P | PdeOperator::PCoherent => can.p.clone(),
        PdeOperator::HGeneral | PdeOperator::HMatched => can.h.clone(),
    };
    if psi.0[dim - 1].norm() > 0.0 {
        log::warn!("state reaches the top basis level; the operator route is truncated");
    }
    let a_psi = a.apply(psi);
    let (lhs, _) = phase_transform(&a_psi, frame, grid)?;
    let (field, _) = phase_transform(psi, frame, grid)?;
    let residual = stencil::interior(&field, 2)
        .into_iter()
        .map(|(i, j)| (apply_pde(op, &field, i, j, &frame.params) - lhs.at(i, j)).norm())
        .fold(0.0, f64::max);
    let coarse = grid.dq.max(grid.dp) > STENCIL_MAX_SPACING;
    if coarse {
        log::warn!("grid spacing {} is coarse for fourth-order stencils", grid.dq.max(grid.dp));
    }
    Ok(PdeReport { residual, coarse })
}

/// `V(Aψ)` on the grid via the number basis.
pub fn transform_of_action(a: &Operator, psi: &FockVector, frame: &FrameSpec, grid: &PhaseGrid) -> Result<WaveField> {
    Ok(phase_transform(&a.apply(psi), frame, grid)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    None,
    Qp,
    HalfQp,
}

impl Gauge {
    pub fn theta(self, q: f64, p: f64) -> f64 {
        match self {
            Gauge::None => 0.0,
            Gauge::Qp => q * p,
            Gauge::HalfQp => 0.5 * q * p,
        }
    }
}

/// Pointwise multiplication by `e^{iΘ(q,p)}`.
pub fn gauge_transform(psi: &WaveField, gauge: Gauge) -> WaveField {
    if gauge == Gauge::None {
        return psi.clone();
    }
    let values = psi
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let (q, p) = psi.grid.point(k);
            v * cis(gauge.theta(q, p))
        })
        .collect();
    PhaseField::new(psi.grid, values, psi.kind)
}

/// Bargmann coefficients `a_n = ψ_n/√n!` of `f(z) = Σ a_n zⁿ`.
pub fn bargmann_transform(psi: &FockVector, frame: &FrameSpec) -> Result<Vec<Complex64>> {
    frame.require_matched()?;
    let mut inv_sqrt_fact = 1.0;
    Ok(psi
        .0
        .iter()
        .enumerate()
        .map(|(n, &v)| {
            if n > 0 {
                inv_sqrt_fact /= (n as f64).sqrt();
            }
            v * inv_sqrt_fact
        })
        .collect())
}

/// Inverse of [`bargmann_transform`].
pub fn bargmann_inverse(coeffs: &[Complex64]) -> FockVector {
    let mut sqrt_fact = 1.0;
    FockVector::from_coeffs(
        coeffs
            .iter()
            .enumerate()
            .map(|(n, &a)| {
                if n > 0 {
                    sqrt_fact *= (n as f64).sqrt();
                }
                a * sqrt_fact
            })
            .collect(),
    )
}

/// `Σ |a_n|²·n!`.
pub fn bargmann_norm_sqr(coeffs: &[Complex64]) -> f64 {
    let mut fact = 1.0;
    let mut acc = 0.0;
    for (n, a) in coeffs.iter().enumerate() {
        if n > 0 {
            fact *= n as f64;
        }
        acc += a.norm_sqr() * fact;
    }
    acc
}

/// Horner evaluation of `f(z) = Σ a_n zⁿ`.
pub fn bargmann_evaluate(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(c(0.0, 0.0), |acc, &a| acc * z + a)
}

/// `f` at the point `z(q, p)` computed from the phase-space wave function:
/// `f = √(2π)·e^{|z|²/2}·e^{iqp/2}·Ψ(q,p)`.
pub fn bargmann_from_wave(psi: &FockVector, frame: &FrameSpec, q: f64, p: f64) -> Result<Complex64> {
    frame.require_matched()?;
    let z = frame.params.ladder_z(q, p);
    Ok(wave_at(psi, frame, q, p)? * TWO_PI.sqrt() * (0.5 * z.norm_sqr()).exp() * cis(0.5 * q * p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BargmannOp {
    Q,
    P,
    A,
    Adag,
    H,
}

impl std::str::FromStr for BargmannOp {
    type Err = PhaseError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "q" => Ok(Self::Q),
            "p" => Ok(Self::P),
            "a" => Ok(Self::A),
            "adag" => Ok(Self::Adag),
            "h" => Ok(Self::H),
            other => Err(PhaseError::Parse(format!("unknown operator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BargmannOpsReport {
    pub residual: f64,
    /// The raising part reached past the last basis level.
    pub truncated: bool,
}

fn derivative(a: &[Complex64]) -> Vec<Complex64> {
    let d = a.len();
    (0..d).map(|n| if n + 1 < d { a[n + 1] * (n + 1) as f64 } else { c(0.0, 0.0) }).collect()
}

fn times_z(a: &[Complex64]) -> Vec<Complex64> {
    let d = a.len();
    (0..d).map(|n| if n > 0 { a[n - 1] } else { c(0.0, 0.0) }).collect()
}

/// Compare `a ↦ d/dz`, `a† ↦ z`, `H ↦ ω(z d/dz + ½)` (and the induced `Q`, `P`)
/// on Bargmann coefficients with the number-basis action.
pub fn bargmann_ops_check(op: BargmannOp, psi: &FockVector, frame: &FrameSpec) -> Result<BargmannOpsReport> {
    frame.require_matched()?;
    let dim = psi.dim();
    let can = crate::fock::build_canonical(frame.params, dim)?;
    let sg = frame.params.ladder_width();
    let w = frame.params.omega;
    let coeffs = bargmann_transform(psi, frame)?;
    let (matrix, expected): (&Operator, Vec<Complex64>) = match op {
        BargmannOp::A => (&can.a, derivative(&coeffs)),
        BargmannOp::Adag => (&can.adag, times_z(&coeffs)),
        BargmannOp::H => {
            let e = coeffs.iter().enumerate().map(|(n, &a)| a * (n as f64 + 0.5) * w).collect();
            (&can.h, e)
        }
        BargmannOp::Q => {
            let (d, z) = (derivative(&coeffs), times_z(&coeffs));
            (&can.q, d.iter().zip(&z).map(|(x, y)| (x + y) * sg).collect())
        }
        BargmannOp::P => {
            let (d, z) = (derivative(&coeffs), times_z(&coeffs));
            (&can.p, d.iter().zip(&z).map(|(x, y)| (x - y) / c(0.0, 2.0 * sg)).collect())
        }
    };
    let via_fock = bargmann_transform(&matrix.apply(psi), frame)?;
    let residual = via_fock.iter().zip(&expected).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let raises = matches!(op, BargmannOp::Adag | BargmannOp::Q | BargmannOp::P);
    let truncated = raises && psi.0[dim - 1].norm() > 0.0;
    if truncated {
        log::warn!("raising operator pushes weight past level {}", dim - 1);
    }
    Ok(BargmannOpsReport { residual, truncated })
}

/// Max over the interior of `|∂f/∂η − i·∂f/∂ξ|` for
/// `f(ξ,η) = √(2π)e^{(ξ²+η²)/2 − iξη}Ψ(2σξ, −η/σ)` on the square `|ξ|,|η| ≤ half`.
pub fn cauchy_riemann_residual(psi: &FockVector, frame: &FrameSpec, half: f64, spacing: f64) -> Result<f64> {
    frame.require_matched()?;
    let s = frame.params.sigma;
    let g = PhaseGrid::symmetric(half, half, spacing)?;
    let values: Vec<Complex64> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let (xi, eta) = g.point(k);
            let psi_v = wave_at(psi, frame, 2.0 * s * xi, -eta / s)?;
            Ok(psi_v * TWO_PI.sqrt() * (0.5 * (xi * xi + eta * eta)).exp() * cis(-xi * eta))
        })
        .collect::<Result<_>>()?;
    let f = PhaseField::new(g, values, FieldKind::Function);
    Ok(stencil::interior(&f, 2)
        .into_iter()
        .map(|(i, j)| (stencil::d_p(&f, i, j) - I * stencil::d_q(&f, i, j)).norm())
        .fold(0.0, f64::max))
}

/// Quadrature `⟨Φ, ∂Ψ/∂q⟩` over the grid interior, which vanishes for Gaussian frames.
pub fn dq_orthogonality(phi: &FockVector, psi: &FockVector, frame: &FrameSpec, grid: &PhaseGrid) -> Result<Complex64> {
    let (f, _) = phase_transform(phi, frame, grid)?;
    let (g, _) = phase_transform(psi, frame, grid)?;
    let sum: Complex64 =
        stencil::interior(&g, 2).into_iter().map(|(i, j)| f.at(i, j).conj() * stencil::d_q(&g, i, j)).sum();
    Ok(sum * grid.weight())
}

/// Gram matrix `[K(x_i, x_j)]` over a point set.
pub fn kernel_gram(points: &[(f64, f64)], frame: &FrameSpec) -> Result<CMat> {
    let n = points.len();
    let mut g = CMat::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            g[(a, b)] = kernel(points[a], points[b], frame)?;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> OscParams {
        OscParams::default()
    }

    #[test]
    fn origin_overlaps_are_the_ground_state() {
        let c0 = coherent_overlaps(0.0, 0.0, &unit(), 6);
        assert!((c0.0[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(c0.0.iter().skip(1).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn overlaps_at_q2() {
        let v = coherent_overlaps(2.0, 0.0, &unit(), 32);
        let e = (-1.0f64).exp();
        assert!((v.0[0].re - e).abs() < 1e-15);
        assert!((v.0[1].re - 2f64.sqrt() * e).abs() < 1e-15);
        assert!((v.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn general_recurrence_reduces_to_closed_form() {
        // σ a hair away from σ_g routes through the recurrence
        let near = unit().with_sigma(std::f64::consts::FRAC_1_SQRT_2 * (1.0 + 1e-11)).unwrap();
        let a = coherent_overlaps(1.2, -0.7, &near, 20);
        let b = coherent_overlaps(1.2, -0.7, &unit(), 20);
        assert!((&a.0 - &b.0).norm() < 1e-9);
    }

    #[test]
    fn kernel_diagonal_and_example() {
        let f = FrameSpec::coherent(unit(), 16).unwrap();
        let k = kernel((0.3, -1.1), (0.3, -1.1), &f).unwrap();
        assert!((k - c(1.0 / TWO_PI, 0.0)).norm() < 1e-15);
        let k = kernel((0.0, 0.0), (1.0, 0.0), &f).unwrap();
        assert!((k.norm() - (-0.25f64).exp() / TWO_PI).abs() < 1e-14);
    }

    #[test]
    fn gauge_none_is_identity() {
        let g = PhaseGrid::symmetric(1.0, 1.0, 0.5).unwrap();
        let f = WaveField::from_fn(g, FieldKind::WaveFunction, c);
        assert_eq!(gauge_transform(&f, Gauge::None), f);
    }

    #[test]
    fn bargmann_of_number_state() {
        let f = FrameSpec::coherent(unit(), 8).unwrap();
        let a = bargmann_transform(&FockVector::basis(3, 8), &f).unwrap();
        assert!((a[3].re - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((bargmann_norm_sqr(&a) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn matched_only_operations_reject_other_widths() {
        let f = FrameSpec::coherent(unit().with_sigma(1.0).unwrap(), 8).unwrap();
        assert!(matches!(bargmann_transform(&FockVector::basis(0, 8), &f), Err(PhaseError::UnmatchedFrame { .. })));
    }

    #[test]
    fn mixed_frame_rejects_non_density() {
        let bad = Operator::diagonal(OperatorKind::Hermitian, &[1.5, -0.5]);
        assert!(FrameSpec::mixed(unit(), bad).is_err());
    }
}
