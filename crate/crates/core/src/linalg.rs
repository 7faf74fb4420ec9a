//! Dense complex linear-algebra helpers built on `nalgebra`.
//!
//! The hermitian eigendecomposition is the single primitive used for matrix
//! functions: exponentials, PSD projection and spectra all go through it.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Eigenvalue clipping tolerance for PSD checks and projections.
pub const EIG_CLIP_TOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

/// Eigendecomposition `H = V diag(λ) V†` of a hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(h: &CMat) -> Self {
        // symmetrize first so the solver sees an exactly hermitian input
        let sym = (h + h.adjoint()) * c(0.5, 0.0);
        let eig = sym.symmetric_eigen();
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
        let mut vectors = CMat::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Self { values, vectors }
    }

    /// `f(H)` for a complex-valued scalar function of the eigenvalues.
    pub fn apply<F: Fn(f64) -> Complex64>(&self, f: F) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fj = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    /// `exp(i·t·H)`.
    pub fn exp_i(&self, t: f64) -> CMat {
        self.apply(|lambda| cis(t * lambda))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `tr(A·B)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Max-norm of `m` restricted to the top-left `block × block` sub-matrix.
pub fn max_abs_block(m: &CMat, block: usize) -> f64 {
    let b = block.min(m.nrows()).min(m.ncols());
    let mut worst: f64 = 0.0;
    for i in 0..b {
        for j in 0..b {
            worst = worst.max(m[(i, j)].norm());
        }
    }
    worst
}

/// Trace distance `½‖A − B‖₁` between two hermitian matrices.
pub fn trace_distance(a: &CMat, b: &CMat) -> f64 {
    let eig = HermitianEigen::new(&(a - b));
    0.5 * eig.values.iter().map(|v| v.abs()).sum::<f64>()
}

/// Clip negative eigenvalues to zero and renormalize to unit trace.
/// Returns the projected matrix and whether any clipping happened.
pub fn psd_project(m: &CMat) -> (CMat, bool) {
    let eig = HermitianEigen::new(m);
    let engaged = eig.values.iter().any(|&v| v < 0.0);
    let total: f64 = eig.values.iter().map(|&v| v.max(0.0)).sum();
    let scale = if total > 0.0 { 1.0 / total } else { 0.0 };
    let projected = eig.apply(|v| c(v.max(0.0) * scale, 0.0));
    (projected, engaged)
}

/// Top-left `ceil(d/2)` block; the sub-space on which truncated identities are asserted.
pub fn trusted_block(dim: usize) -> usize {
    dim.div_ceil(2)
}

/// Real coordinates of a hermitian matrix in an orthonormal basis for the
/// Hilbert-Schmidt product: diagonal, then `√2·Re` and `√2·Im` of the strict
/// upper triangle, row by row.
pub fn hermitian_coords(m: &CMat) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(d * d);
    for n in 0..d {
        out.push(m[(n, n)].re);
    }
    let s = std::f64::consts::SQRT_2;
    for a in 0..d {
        for b in a + 1..d {
            out.push(s * m[(a, b)].re);
            out.push(s * m[(a, b)].im);
        }
    }
    out
}

/// Inverse of [`hermitian_coords`].
pub fn from_hermitian_coords(x: &[f64], d: usize) -> CMat {
    assert_eq!(x.len(), d * d, "need D² coordinates");
    let mut m = CMat::zeros(d, d);
    for n in 0..d {
        m[(n, n)] = c(x[n], 0.0);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut k = d;
    for a in 0..d {
        for b in a + 1..d {
            let z = c(s * x[k], s * x[k + 1]);
            m[(a, b)] = z;
            m[(b, a)] = z.conj();
            k += 2;
        }
    }
    m
}
