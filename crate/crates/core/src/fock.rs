//! Truncated Fock-basis core: oscillator parameters, vectors, operators,
//! canonical operators and Hermite-function densities.
//!
//! Units have ħ = 1. The number basis `φ_n` is the eigenbasis of the
//! oscillator with mass `m` and frequency `ω`; its ground state is a Gaussian
//! of position width `σ_g = 1/√(2mω)` (the *ladder width*). The frame width
//! `σ` of a coherent phase-space frame is an independent parameter.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PhaseError, Result};
use crate::linalg::{self, c, CMat, CVec, HermitianEigen};

/// Tolerance for deciding that the frame width equals the ladder width.
pub const MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscParams {
    pub m: f64,
    pub omega: f64,
    pub sigma: f64,
}

impl Default for OscParams {
    fn default() -> Self {
        Self { m: 1.0, omega: 1.0, sigma: std::f64::consts::FRAC_1_SQRT_2 }
    }
}

impl OscParams {
    pub fn new(m: f64, omega: f64, sigma: f64) -> Result<Self> {
        for (name, v) in [("m", m), ("omega", omega), ("sigma", sigma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(PhaseError::InvalidParams(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self { m, omega, sigma })
    }

    /// Oscillator parameters whose frame width equals the ladder width.
    pub fn matched(m: f64, omega: f64) -> Result<Self> {
        Self::new(m, omega, 1.0 / (2.0 * m * omega).sqrt())
    }

    pub fn with_sigma(self, sigma: f64) -> Result<Self> {
        Self::new(self.m, self.omega, sigma)
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.m, self.omega, self.sigma).map(|_| ())
    }

    /// Position width of the oscillator ground state, `1/√(2mω)`.
    pub fn ladder_width(&self) -> f64 {
        1.0 / (2.0 * self.m * self.omega).sqrt()
    }

    pub fn is_matched(&self) -> bool {
        (self.sigma - self.ladder_width()).abs() <= MATCH_TOL
    }

    /// Classical oscillator Hamiltonian `p²/2m + mω²q²/2`.
    pub fn classical_energy(&self, q: f64, p: f64) -> f64 {
        p * p / (2.0 * self.m) + 0.5 * self.m * self.omega * self.omega * q * q
    }

    /// Complex coordinate `z = ½(q/s − 2i·s·p)` at width `s`.
    pub fn z_at_width(width: f64, q: f64, p: f64) -> Complex64 {
        c(0.5 * q / width, -width * p)
    }

    /// `z` in ladder width; `|z|²` measures how far a displacement reaches into the basis.
    pub fn ladder_z(&self, q: f64, p: f64) -> Complex64 {
        Self::z_at_width(self.ladder_width(), q, p)
    }
}

/// Coefficients of a vector in the number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector(pub CVec);

impl FockVector {
    pub fn zeros(dim: usize) -> Self {
        Self(CVec::zeros(dim))
    }

    pub fn basis(n: usize, dim: usize) -> Self {
        let mut v = CVec::zeros(dim);
        v[n] = c(1.0, 0.0);
        Self(v)
    }

    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        Self(CVec::from_vec(coeffs))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            self.clone()
        } else {
            Self(&self.0 / c(n, 0.0))
        }
    }

    pub fn inner(&self, other: &FockVector) -> Complex64 {
        self.0.dotc(&other.0)
    }

    pub fn projector(&self) -> Operator {
        Operator::new(OperatorKind::Density, &self.0 * self.0.adjoint())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    General,
    Hermitian,
    Density,
    Unitary,
}

/// A `D × D` complex matrix in the number basis. The kind tag is advisory.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    pub kind: OperatorKind,
    pub mat: CMat,
}

impl Operator {
    pub fn new(kind: OperatorKind, mat: CMat) -> Self {
        assert_eq!(mat.nrows(), mat.ncols(), "operators are square");
        Self { kind, mat }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(OperatorKind::Hermitian, CMat::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(OperatorKind::Hermitian, CMat::identity(dim, dim))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::new(OperatorKind::Density, CMat::identity(dim, dim) / c(dim as f64, 0.0))
    }

    pub fn number_projector(n: usize, dim: usize) -> Self {
        FockVector::basis(n, dim).projector()
    }

    pub fn diagonal(kind: OperatorKind, diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| c(x, 0.0)));
        Self::new(kind, CMat::from_diagonal(&d))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn dagger(&self) -> Self {
        Self::new(self.kind, self.mat.adjoint())
    }

    pub fn trace(&self) -> Complex64 {
        linalg::trace(&self.mat)
    }

    pub fn hermitian_defect(&self) -> f64 {
        linalg::hermitian_defect(&self.mat)
    }

    pub fn apply(&self, v: &FockVector) -> FockVector {
        FockVector(&self.mat * &v.0)
    }

    pub fn matmul(&self, other: &Operator) -> Operator {
        Operator::new(OperatorKind::General, &self.mat * &other.mat)
    }

    /// Index one past the last row/column holding an entry above `tol`.
    pub fn support_dim(&self, tol: f64) -> usize {
        let d = self.dim();
        (0..d)
            .rev()
            .find(|&k| (0..d).any(|j| self.mat[(k, j)].norm() > tol || self.mat[(j, k)].norm() > tol))
            .map_or(0, |k| k + 1)
    }

    /// Population above the trusted block.
    pub fn weight_above(&self, block: usize) -> f64 {
        (block..self.dim()).map(|n| self.mat[(n, n)].re).sum()
    }

    /// Embed into a larger (or equal) truncation, padding with zeros.
    pub fn embed(&self, dim: usize) -> Result<Self> {
        if dim < self.dim() {
            return Err(PhaseError::DimensionMismatch { expected: self.dim(), got: dim });
        }
        let mut m = CMat::zeros(dim, dim);
        m.view_mut((0, 0), (self.dim(), self.dim())).copy_from(&self.mat);
        Ok(Self::new(self.kind, m))
    }
}

/// The canonical operators of a truncated oscillator.
#[derive(Debug, Clone)]
pub struct Canonical {
    pub params: OscParams,
    pub q: Operator,
    pub p: Operator,
    pub a: Operator,
    pub adag: Operator,
    pub h: Operator,
}

impl Canonical {
    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// `Q²` as the square of the truncated `Q`; exact away from the last basis level.
    pub fn q2(&self) -> Operator {
        Operator::new(OperatorKind::Hermitian, &self.q.mat * &self.q.mat)
    }

    pub fn p2(&self) -> Operator {
        Operator::new(OperatorKind::Hermitian, &self.p.mat * &self.p.mat)
    }
}

/// Lowering/raising operators, `Q = σ_g(a + a†)`, `P = (a − a†)/(2iσ_g)` and
/// `H = ω(a†a + ½)` in the first `dim` number states.
pub fn build_canonical(params: OscParams, dim: usize) -> Result<Canonical> {
    params.validate()?;
    if dim < 2 {
        return Err(PhaseError::TruncationTooSmall(dim));
    }
    let sg = params.ladder_width();
    let mut a = CMat::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    let adag = a.adjoint();
    let q = (&a + &adag) * c(sg, 0.0);
    let p = (&a - &adag) / c(0.0, 2.0 * sg);
    let h: Vec<f64> = (0..dim).map(|n| params.omega * (n as f64 + 0.5)).collect();
    Ok(Canonical {
        params,
        q: Operator::new(OperatorKind::Hermitian, q),
        p: Operator::new(OperatorKind::Hermitian, p),
        a: Operator::new(OperatorKind::General, a),
        adag: Operator::new(OperatorKind::General, adag),
        h: Operator::diagonal(OperatorKind::Hermitian, &h),
    })
}

/// Hermite functions `φ_0(x) … φ_{count−1}(x)` of an oscillator with
/// ground-state width `width`, by the normalized three-term recurrence.
pub fn hermite_functions(x: f64, width: f64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    if count == 0 {
        return out;
    }
    let scale = std::f64::consts::SQRT_2 * width;
    let y = x / scale;
    out[0] = std::f64::consts::PI.powf(-0.25) * (-0.5 * y * y).exp() / scale.sqrt();
    if count > 1 {
        out[1] = std::f64::consts::SQRT_2 * y * out[0];
    }
    for n in 1..count.saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * y * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
    out
}

/// Sampled 1-D probability density on a uniform axis.
#[derive(Debug, Clone)]
pub struct AxisDensity {
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    /// Population in the top quarter of the basis exceeded `1e-6`.
    pub truncation_warning: bool,
}

impl AxisDensity {
    pub fn spacing(&self) -> f64 {
        if self.x.len() > 1 {
            self.x[1] - self.x[0]
        } else {
            0.0
        }
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing()
    }

    pub fn mean(&self) -> f64 {
        self.x.iter().zip(&self.values).map(|(x, v)| x * v).sum::<f64>() * self.spacing()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.x.iter().zip(&self.values).map(|(x, v)| (x - mu).powi(2) * v).sum::<f64>() * self.spacing()
    }
}

fn top_quarter_weight(w: &Operator) -> f64 {
    let d = w.dim();
    w.weight_above(d - d / 4)
}

fn hermite_density(w: &Operator, width: f64, xs: &[f64], momentum: bool) -> AxisDensity {
    let d = w.dim();
    let values = xs
        .iter()
        .map(|&x| {
            let phi = hermite_functions(x, width, d);
            let mut acc = 0.0;
            for m in 0..d {
                for n in 0..d {
                    let mut wmn = w.mat[(m, n)];
                    if momentum {
                        // F φ_n = (−i)^n φ̂_n, so ⟨k|W|k⟩ picks up (−i)^{m−n}
                        wmn *= match (m + 4 - n % 4) % 4 {
                            0 => c(1.0, 0.0),
                            1 => c(0.0, -1.0),
                            2 => c(-1.0, 0.0),
                            _ => c(0.0, 1.0),
                        };
                    }
                    acc += (wmn * phi[m] * phi[n]).re;
                }
            }
            acc
        })
        .collect();
    let warn = top_quarter_weight(w) > 1e-6;
    if warn {
        log::warn!("density has more than 1e-6 population in the top quarter of the basis");
    }
    AxisDensity { x: xs.to_vec(), values, truncation_warning: warn }
}

/// Position density `⟨x|W|x⟩` of a number-basis operator.
pub fn hermite_position_density(w: &Operator, params: &OscParams, xs: &[f64]) -> AxisDensity {
    hermite_density(w, params.ladder_width(), xs, false)
}

/// Momentum density `⟨k|W|k⟩`, using that Hermite functions are Fourier
/// eigenfunctions with eigenvalue `(−i)^n` and momentum width `1/(2σ_g)`.
pub fn hermite_momentum_density(w: &Operator, params: &OscParams, ks: &[f64]) -> AxisDensity {
    hermite_density(w, 0.5 / params.ladder_width(), ks, true)
}

/// Uniform symmetric axis `[-half, half]` with the given spacing (origin included).
pub fn symmetric_axis(half: f64, spacing: f64) -> Vec<f64> {
    let n = (half / spacing).round() as i64;
    (-n..=n).map(|i| i as f64 * spacing).collect()
}

fn check_dims(w: &Operator, a: &Operator) -> Result<()> {
    if w.dim() != a.dim() {
        return Err(PhaseError::DimensionMismatch { expected: w.dim(), got: a.dim() });
    }
    Ok(())
}

/// `tr(W·A)`.
pub fn quantum_expectation(w: &Operator, a: &Operator) -> Result<f64> {
    check_dims(w, a)?;
    Ok(linalg::trace_product(&w.mat, &a.mat).re)
}

/// `tr(W·A²) − tr(W·A)²`.
pub fn quantum_variance(w: &Operator, a: &Operator) -> Result<f64> {
    check_dims(w, a)?;
    let mean = linalg::trace_product(&w.mat, &a.mat).re;
    let a2 = &a.mat * &a.mat;
    Ok(linalg::trace_product(&w.mat, &a2).re - mean * mean)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DensityDiagnostics {
    pub hermiticity_defect: f64,
    pub trace_defect: f64,
    pub min_eigenvalue: f64,
    pub pass: bool,
}

/// Hermiticity, trace and positivity diagnostics for a candidate density operator.
pub fn validate_density(w: &Operator, tol: f64) -> DensityDiagnostics {
    let hermiticity_defect = w.hermitian_defect();
    let tr = w.trace();
    let trace_defect = ((tr.re - 1.0).powi(2) + tr.im.powi(2)).sqrt();
    let min_eigenvalue = HermitianEigen::new(&w.mat).min();
    let pass = hermiticity_defect <= tol && trace_defect <= tol && min_eigenvalue >= -tol;
    DensityDiagnostics { hermiticity_defect, trace_defect, min_eigenvalue, pass }
}

/// Standard tolerance used when an operator must be a density operator.
pub const DENSITY_TOL: f64 = 1e-10;

pub fn require_density(w: &Operator) -> Result<()> {
    let diag = validate_density(w, DENSITY_TOL);
    if diag.pass {
        Ok(())
    } else {
        Err(PhaseError::InvalidDensity(format!(
            "hermiticity defect {:.2e}, trace defect {:.2e}, min eigenvalue {:.2e}",
            diag.hermiticity_defect, diag.trace_defect, diag.min_eigenvalue
        )))
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im)
}

/// Random unit vector supported on the first `support` levels.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize, support: usize) -> FockVector {
    let mut v = CVec::zeros(dim);
    for k in 0..support.min(dim) {
        v[k] = complex_normal(rng);
    }
    FockVector(v).normalized()
}

/// Random full-rank density operator (Ginibre ensemble) on the first `support` levels.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize, support: usize) -> Operator {
    let s = support.min(dim);
    let g = CMat::from_fn(s, s, |_, _| complex_normal(rng));
    let mut w = &g * g.adjoint();
    let tr = linalg::trace(&w).re;
    w /= c(tr, 0.0);
    Operator::new(OperatorKind::Density, w).embed(dim).expect("support fits")
}

/// Random hermitian operator on the first `support` levels with entries of order one.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize, support: usize) -> Operator {
    let s = support.min(dim);
    let g = CMat::from_fn(s, s, |_, _| complex_normal(rng));
    let h = (&g + g.adjoint()) * c(0.5, 0.0);
    Operator::new(OperatorKind::Hermitian, h).embed(dim).expect("support fits")
}
