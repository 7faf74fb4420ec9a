//! The Husimi map `W ↦ ρ`, its marginals and moments, effects of phase-space
//! regions, statistical completeness and state reconstruction.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::displacement::in_trusted_region;
use crate::error::{PhaseError, Result};
use crate::fock::{
    build_canonical, hermite_momentum_density, hermite_position_density, quantum_variance, require_density,
    symmetric_axis, AxisDensity, Operator, OperatorKind, OscParams,
};
use crate::frame::{
    coherent_overlaps, grid_adequacy, kernel, require_adequate, Adequacy, FrameSpec, Generator, TWO_PI,
};
use crate::grid::{Cell, FieldKind, PhaseField, PhaseGrid, RealField};
use crate::linalg::{self, c, from_hermitian_coords, hermitian_coords, psd_project, CMat};

/// Index one past the last level a density operator populates.
fn support_of(w: &Operator) -> usize {
    w.support_dim(1e-14).max(1)
}

fn check_dim(w: &Operator, frame: &FrameSpec) -> Result<()> {
    if w.dim() != frame.dim {
        return Err(PhaseError::DimensionMismatch { expected: frame.dim, got: w.dim() });
    }
    Ok(())
}

/// `(1/2π)·tr(W·a_qp)` at one point.
pub fn husimi_at(w: &Operator, frame: &FrameSpec, q: f64, p: f64) -> f64 {
    let s = support_of(w);
    let ws = w.mat.view((0, 0), (s, s));
    let mut acc = 0.0;
    for (l, v) in frame.frame_vectors(q, p, s) {
        let wv = ws * &v;
        acc += l * v.dotc(&wv).re;
    }
    acc / TWO_PI
}

/// Husimi density `ρ(q,p) = (1/2π)·tr(W·a_qp)` on an adequate grid.
pub fn husimi(w: &Operator, frame: &FrameSpec, grid: &PhaseGrid) -> Result<RealField> {
    check_dim(w, frame)?;
    require_density(w)?;
    require_adequate(frame, grid, support_of(w))?;
    Ok(husimi_window(w, frame, grid))
}

/// Husimi density on an arbitrary window of phase space, without the
/// boundary-decay check; for local views where normalization is not needed.
pub fn husimi_window(w: &Operator, frame: &FrameSpec, grid: &PhaseGrid) -> RealField {
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (q, p) = grid.point(k);
            husimi_at(w, frame, q, p)
        })
        .collect();
    PhaseField::new(*grid, values, FieldKind::Density)
}

/// Position and momentum marginals by summing the other axis.
pub fn marginals(rho: &RealField) -> (AxisDensity, AxisDensity) {
    let g = &rho.grid;
    let mut qd = vec![0.0; g.nq];
    let mut pd = vec![0.0; g.np];
    for (j, pj) in pd.iter_mut().enumerate() {
        for (i, qi) in qd.iter_mut().enumerate() {
            let v = rho.at(i, j);
            *qi += v * g.dp;
            *pj += v * g.dq;
        }
    }
    (
        AxisDensity { x: g.q_axis(), values: qd, truncation_warning: false },
        AxisDensity { x: g.p_axis(), values: pd, truncation_warning: false },
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfidenceFunction {
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
}

impl ConfidenceFunction {
    fn from_axis(d: AxisDensity) -> Self {
        let (mean, variance) = (d.mean(), d.variance());
        Self { x: d.x, values: d.values, mean, variance }
    }
}

/// Axis spacing for confidence functions.
pub const CONFIDENCE_SPACING: f64 = 0.01;

/// `η^Q(x) = ⟨−x|a|−x⟩` and `η^P(k) = ⟨−k|a|−k⟩` from the generator's Hermite expansion.
pub fn confidence_functions(frame: &FrameSpec) -> (ConfidenceFunction, ConfidenceFunction) {
    let a = match frame.generator {
        Generator::Coherent => converged_gaussian(&frame.params),
        Generator::Mixed { .. } => frame.generator_operator(),
    };
    let s = support_of(&a) as f64;
    let sg = frame.params.ladder_width();
    let spread = (2.0 * s + 1.0).sqrt();
    let xs = symmetric_axis(10.0 * sg * spread, CONFIDENCE_SPACING);
    let ks = symmetric_axis(10.0 * spread / (2.0 * sg), CONFIDENCE_SPACING);
    let reflect = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|x| -x).collect() };
    let mut eq = hermite_position_density(&a, &frame.params, &reflect(xs.clone()));
    eq.x = xs;
    let mut ep = hermite_momentum_density(&a, &frame.params, &reflect(ks.clone()));
    ep.x = ks;
    (ConfidenceFunction::from_axis(eq), ConfidenceFunction::from_axis(ep))
}

/// The frame Gaussian expanded in enough number states to hold all but `1e-15` of its norm.
fn converged_gaussian(params: &OscParams) -> Operator {
    let mut levels = 8;
    loop {
        let v = coherent_overlaps(0.0, 0.0, params, levels);
        if 1.0 - v.norm().powi(2) < 1e-15 || levels >= 512 {
            return v.projector();
        }
        levels *= 2;
    }
}

/// Exact moments `(⟨η^Q⟩, var η^Q, ⟨η^P⟩, var η^P)` of the confidence functions.
///
/// Gaussian frames have mean zero and variances `σ²`, `1/(4σ²)`; mixed
/// generators use `−tr(aQ)` and `tr(aQ²) − tr(aQ)²`, and likewise for `P`.
pub fn confidence_moments(frame: &FrameSpec) -> Result<(f64, f64, f64, f64)> {
    match &frame.generator {
        Generator::Coherent => {
            let s2 = frame.params.sigma * frame.params.sigma;
            Ok((0.0, s2, 0.0, 0.25 / s2))
        }
        Generator::Mixed { op, support, .. } => {
            if *support + 1 >= frame.dim {
                return Err(PhaseError::Truncation(
                    "generator reaches the top basis level; its second moments are truncated".into(),
                ));
            }
            let can = build_canonical(frame.params, frame.dim)?;
            let mq = linalg::trace_product(&op.mat, &can.q.mat).re;
            let mp = linalg::trace_product(&op.mat, &can.p.mat).re;
            Ok((-mq, quantum_variance(op, &can.q)?, -mp, quantum_variance(op, &can.p)?))
        }
    }
}

/// `∫ρf`.
pub fn classical_expectation<F: Fn(f64, f64) -> f64>(rho: &RealField, f: F) -> f64 {
    rho.integrate_with(f)
}

/// `∫ρf² − (∫ρf)²`.
pub fn classical_variance<F: Fn(f64, f64) -> f64>(rho: &RealField, f: F) -> f64 {
    let mean = rho.integrate_with(&f);
    rho.integrate_with(|q, p| f(q, p).powi(2)) - mean * mean
}

/// Mass of `ρ` in a rectangle.
pub fn probability_of(rho: &RealField, cell: &Cell) -> f64 {
    rho.grid.points_in(cell).iter().map(|&k| rho.values[k]).sum::<f64>() * rho.grid.weight()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub var_e_q: f64,
    pub var_e_p: f64,
    pub var_eta_q: f64,
    pub var_eta_p: f64,
    pub var_f_q: f64,
    pub var_f_p: f64,
    pub product_e: f64,
    pub product_eta: f64,
    pub product_f: f64,
    /// `|var F − var E − var η|` for each axis.
    pub additivity_defect_q: f64,
    pub additivity_defect_p: f64,
    pub pass: bool,
}

pub const ADDITIVITY_TOL: f64 = 1e-6;
pub const PRODUCT_TOL: f64 = 1e-9;

/// Variances of the ideal (`E`), smearing (`η`) and joint-marginal (`F`)
/// observables on both axes. `var F` comes from the Husimi marginals on the
/// grid, `var E` from the operators and `var η` from the confidence functions.
pub fn uncertainty_report(w: &Operator, frame: &FrameSpec, grid: &PhaseGrid) -> Result<UncertaintyReport> {
    let s = support_of(w);
    if s + 1 >= w.dim() {
        return Err(PhaseError::Truncation("state reaches the top basis level; Q² and P² are truncated".into()));
    }
    let can = build_canonical(frame.params, w.dim())?;
    let var_e_q = quantum_variance(w, &can.q)?;
    let var_e_p = quantum_variance(w, &can.p)?;
    let (eq, ep) = confidence_functions(frame);
    let rho = husimi(w, frame, grid)?;
    let var_f_q = classical_variance(&rho, |q, _| q);
    let var_f_p = classical_variance(&rho, |_, p| p);
    let additivity_defect_q = (var_f_q - var_e_q - eq.variance).abs();
    let additivity_defect_p = (var_f_p - var_e_p - ep.variance).abs();
    let product_e = var_e_q * var_e_p;
    let product_eta = eq.variance * ep.variance;
    let product_f = var_f_q * var_f_p;
    let pass = additivity_defect_q < ADDITIVITY_TOL
        && additivity_defect_p < ADDITIVITY_TOL
        && product_e >= 0.25 - PRODUCT_TOL
        && product_eta >= 0.25 - PRODUCT_TOL
        && product_f >= 1.0 - PRODUCT_TOL;
    Ok(UncertaintyReport {
        var_e_q,
        var_e_p,
        var_eta_q: eq.variance,
        var_eta_p: ep.variance,
        var_f_q,
        var_f_p,
        product_e,
        product_eta,
        product_f,
        additivity_defect_q,
        additivity_defect_p,
        pass,
    })
}

/// Effects `F(B) = (1/2π)∫_B a_qp dq dp` of a family of rectangles.
#[derive(Debug, Clone)]
pub struct EffectSet {
    pub cells: Vec<Cell>,
    pub effects: Vec<Operator>,
}

impl EffectSet {
    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn sum(&self) -> CMat {
        let d = self.effects.first().map_or(0, |e| e.dim());
        self.effects.iter().fold(CMat::zeros(d, d), |acc, e| acc + &e.mat)
    }
}

/// Quadrature of `F(B)` over the grid points inside each cell.
pub fn effect_of_region(cells: &[Cell], frame: &FrameSpec, grid: &PhaseGrid) -> Result<EffectSet> {
    grid.validate()?;
    let extent = grid.extent();
    if cells.iter().any(|cell| !cell.within(&extent)) {
        return Err(PhaseError::CellOutsideGrid);
    }
    let dim = frame.dim;
    let scale = c(grid.weight() / TWO_PI, 0.0);
    let effects = cells
        .par_iter()
        .map(|cell| {
            let mut acc = CMat::zeros(dim, dim);
            for k in grid.points_in(cell) {
                let (q, p) = grid.point(k);
                for (l, v) in frame.frame_vectors(q, p, dim) {
                    acc.ger(c(l, 0.0), &v, &v.conjugate(), c(1.0, 0.0));
                }
            }
            Operator::new(OperatorKind::Hermitian, acc * scale)
        })
        .collect();
    Ok(EffectSet { cells: cells.to_vec(), effects })
}

/// Tiles per axis used for completeness partitions: `⌈√(D²)⌉ + 2`.
pub fn completeness_tiles(dim: usize) -> usize {
    dim + 2
}

/// Relative singular-value threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub rank: usize,
    pub required: usize,
    pub complete: bool,
    pub sigma_max: f64,
    pub sigma_min_kept: f64,
}

fn numerical_rank(singular: &DVector<f64>) -> (usize, f64, f64) {
    let smax = singular.iter().copied().fold(0.0, f64::max);
    let thresh = RANK_TOL * smax;
    let kept: Vec<f64> = singular.iter().copied().filter(|&s| s > thresh).collect();
    let smin = kept.iter().copied().fold(f64::INFINITY, f64::min);
    (kept.len(), smax, if kept.is_empty() { 0.0 } else { smin })
}

/// Numerical rank of the effects stacked as real `D²`-vectors.
pub fn completeness_rank(effects: &EffectSet) -> Result<CompletenessReport> {
    let dim = effects.effects.first().map_or(0, |e| e.dim());
    let required = dim * dim;
    if effects.len() < required || required == 0 {
        return Err(PhaseError::TooFewCells { got: effects.len(), required: required.max(1) });
    }
    let mut m = DMatrix::<f64>::zeros(effects.len(), required);
    for (r, e) in effects.effects.iter().enumerate() {
        for (k, x) in hermitian_coords(&e.mat).into_iter().enumerate() {
            m[(r, k)] = x;
        }
    }
    let sv = m.singular_values();
    let (rank, sigma_max, sigma_min_kept) = numerical_rank(&sv);
    Ok(CompletenessReport { rank, required, complete: rank == required, sigma_max, sigma_min_kept })
}

/// Half-widths `(q, p)` of the square whose mid-edges sit at `|z|² = D`, where
/// the frame states of the first `D` levels carry their weight.
pub fn core_half_widths(frame: &FrameSpec) -> (f64, f64) {
    let sg = frame.params.ladder_width();
    let r = (frame.dim as f64).sqrt();
    (2.0 * sg * r, r / sg)
}

/// Rank of the effects of the `(D+2) × (D+2)` tiling of the core square,
/// integrated on a grid of the given spacing.
pub fn tiling_completeness(frame: &FrameSpec, spacing: f64) -> Result<CompletenessReport> {
    let (hq, hp) = core_half_widths(frame);
    let grid = PhaseGrid::symmetric(hq, hp, spacing)?;
    let cells = grid.tiling(completeness_tiles(frame.dim));
    completeness_rank(&effect_of_region(&cells, frame, &grid)?)
}

/// `tr(a·U_qp)`.
pub fn generator_char(frame: &FrameSpec, q: f64, p: f64) -> Complex64 {
    match &frame.generator {
        Generator::Coherent => kernel((0.0, 0.0), (q, p), frame).expect("coherent kernel") * TWO_PI,
        Generator::Mixed { components, support, .. } => {
            frame.frame_vectors(q, p, *support).iter().zip(components).map(|((l, uv), (_, v))| v.dotc(uv) * *l).sum()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourierReport {
    /// Minimum of `|tr(a·U_qp)|` over grid points with `|z|² ≤ D/4`.
    pub min_modulus: f64,
    pub location: (f64, f64),
    /// Grid squares (lower-left corners) where both the real and imaginary
    /// part of `e^{−iqp/2}tr(a·U_qp)` take the value 0.
    pub zero_squares: Vec<(f64, f64)>,
    pub trusted_points: usize,
}

/// Scan `tr(a·U_qp)` for zeros; the criterion for completeness is that it
/// vanishes nowhere (up to a null set).
pub fn fourier_criterion(frame: &FrameSpec, grid: &PhaseGrid) -> Result<FourierReport> {
    grid.validate()?;
    let vals: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (q, p) = grid.point(k);
            generator_char(frame, q, p) * linalg::cis(-0.5 * q * p)
        })
        .collect();
    let trusted = |k: usize| {
        let (q, p) = grid.point(k);
        in_trusted_region(q, p, &frame.params, frame.dim)
    };
    let mut min_modulus = f64::INFINITY;
    let mut location = (0.0, 0.0);
    let mut trusted_points = 0;
    for (k, v) in vals.iter().enumerate() {
        if trusted(k) {
            trusted_points += 1;
            if v.norm() < min_modulus {
                min_modulus = v.norm();
                location = grid.point(k);
            }
        }
    }
    let mut zero_squares = Vec::new();
    for j in 0..grid.np.saturating_sub(1) {
        for i in 0..grid.nq.saturating_sub(1) {
            let ks = [grid.index(i, j), grid.index(i + 1, j), grid.index(i, j + 1), grid.index(i + 1, j + 1)];
            if !ks.iter().all(|&k| trusted(k)) {
                continue;
            }
            let straddles = |f: &dyn Fn(Complex64) -> f64| {
                let lo = ks.iter().map(|&k| f(vals[k])).fold(f64::INFINITY, f64::min);
                let hi = ks.iter().map(|&k| f(vals[k])).fold(f64::NEG_INFINITY, f64::max);
                lo <= 0.0 && hi >= 0.0
            };
            if straddles(&|z| z.re) && straddles(&|z| z.im) {
                zero_squares.push(grid.point(ks[0]));
            }
        }
    }
    Ok(FourierReport { min_modulus, location, zero_squares, trusted_points })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructionReport {
    /// Least-squares fit before projection (hermitian, unit trace).
    #[serde(skip)]
    pub raw: Option<Operator>,
    #[serde(skip)]
    pub state: Option<Operator>,
    pub rank: usize,
    pub required: usize,
    pub samples: usize,
    pub residual_max_raw: f64,
    pub residual_l2_raw: f64,
    pub residual_max: f64,
    pub residual_l2: f64,
    pub min_eigenvalue_raw: f64,
    pub psd_engaged: bool,
    pub trace_distance: Option<f64>,
}

impl ReconstructionReport {
    pub fn state(&self) -> &Operator {
        self.state.as_ref().expect("reconstruction holds a state")
    }
}

/// Relative ridge added to the normal equations.
pub const RIDGE: f64 = 1e-10;

/// Features `f_k` with `(1/2π)tr(W·a_k) = f_k·x(W)` in hermitian coordinates.
fn features(frame: &FrameSpec, q: f64, p: f64) -> Vec<f64> {
    let a = frame.translated_generator(q, p, frame.dim);
    let mut f = hermitian_coords(&a);
    // tr(WA) = x(W)·x(A) for the orthonormal coordinates
    for v in f.iter_mut() {
        *v /= TWO_PI;
    }
    f
}

fn residuals(rho: &RealField, frame: &FrameSpec, w: &CMat) -> (f64, f64) {
    let x = DVector::from_vec(hermitian_coords(w));
    let res: Vec<f64> = (0..rho.grid.len())
        .into_par_iter()
        .map(|k| {
            let (q, p) = rho.grid.point(k);
            let f = DVector::from_vec(features(frame, q, p));
            rho.values[k] - f.dot(&x)
        })
        .collect();
    let max = res.iter().map(|r| r.abs()).fold(0.0, f64::max);
    let l2 = (res.iter().map(|r| r * r).sum::<f64>() * rho.grid.weight()).sqrt();
    (max, l2)
}

/// Least-squares inversion of the Husimi map from grid samples, with unit
/// trace enforced through a Lagrange multiplier, followed by projection onto
/// the density operators.
pub fn reconstruct_state(
    rho: &RealField,
    frame: &FrameSpec,
    truth: Option<&Operator>,
    max_residual: Option<f64>,
) -> Result<ReconstructionReport> {
    let d = frame.dim;
    let n = d * d;
    let g = &rho.grid;
    if g.len() < n {
        return Err(PhaseError::RankDeficient { rank: g.len(), required: n });
    }
    let partial: Vec<(DMatrix<f64>, DVector<f64>)> = (0..g.np)
        .into_par_iter()
        .map(|j| {
            let mut gram = DMatrix::<f64>::zeros(n, n);
            let mut rhs = DVector::<f64>::zeros(n);
            for i in 0..g.nq {
                let f = DVector::from_vec(features(frame, g.q(i), g.p(j)));
                gram.ger(1.0, &f, &f, 1.0);
                rhs.axpy(rho.at(i, j), &f, 1.0);
            }
            (gram, rhs)
        })
        .collect();
    let mut gram = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for (gj, bj) in partial {
        gram += gj;
        rhs += bj;
    }
    let eig = gram.clone().symmetric_eigen();
    // singular values of the sample matrix are square roots of the Gram spectrum
    let sv = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let (rank, _, _) = numerical_rank(&sv);
    if rank < n {
        return Err(PhaseError::RankDeficient { rank, required: n });
    }
    let ridge = RIDGE * (0..n).map(|k| gram[(k, k)]).fold(0.0, f64::max);
    let mut kkt = DMatrix::<f64>::zeros(n + 1, n + 1);
    kkt.view_mut((0, 0), (n, n)).copy_from(&gram);
    for k in 0..n {
        kkt[(k, k)] += ridge;
    }
    for k in 0..d {
        kkt[(k, n)] = 1.0;
        kkt[(n, k)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n + 1);
    b.rows_mut(0, n).copy_from(&rhs);
    b[n] = 1.0;
    let sol = kkt.lu().solve(&b).ok_or(PhaseError::RankDeficient { rank, required: n })?;
    let raw = from_hermitian_coords(&sol.as_slice()[..n], d);
    let min_eigenvalue_raw = linalg::HermitianEigen::new(&raw).min();
    let (projected, engaged) = psd_project(&raw);
    let psd_engaged = engaged && min_eigenvalue_raw < 0.0;
    let (residual_max_raw, residual_l2_raw) = residuals(rho, frame, &raw);
    let (residual_max, residual_l2) = residuals(rho, frame, &projected);
    let trace_distance = truth.map(|t| linalg::trace_distance(&t.mat, &projected));
    if let Some(th) = max_residual {
        if residual_max_raw > th {
            return Err(PhaseError::ResidualTooLarge { residual: residual_max_raw, threshold: th });
        }
    }
    Ok(ReconstructionReport {
        raw: Some(Operator::new(OperatorKind::Hermitian, raw)),
        state: Some(Operator::new(OperatorKind::Density, projected)),
        rank,
        required: n,
        samples: g.len(),
        residual_max_raw,
        residual_l2_raw,
        residual_max,
        residual_l2,
        min_eigenvalue_raw,
        psd_engaged,
        trace_distance,
    })
}

/// Sample the Husimi density of `w` and report whether the grid suits it.
pub fn husimi_with_adequacy(w: &Operator, frame: &FrameSpec, grid: &PhaseGrid) -> Result<(RealField, Adequacy)> {
    check_dim(w, frame)?;
    require_density(w)?;
    grid.validate()?;
    Ok((husimi_window(w, frame, grid), grid_adequacy(frame, grid, support_of(w))))
}
