//! Displacement and Weyl unitaries, characteristic functions and operator
//! reconstruction from them.
//!
//! Two routes to `U_qp = e^{ipQ}e^{−iqP}` are provided. [`displacement_op`]
//! exponentiates the truncated `Q` and `P`; it is unitary on the truncated
//! space but only agrees with the true operator for small `|z|²`.
//! [`displacement_block`] returns matrix elements of the untruncated operator,
//! which are what grid integrals need far from the origin.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PhaseError, Result};
use crate::fock::{build_canonical, Operator, OperatorKind, OscParams};
use crate::grid::PhaseGrid;
use crate::linalg::{c, cis, CMat, CVec, HermitianEigen};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// `|z|²` of a displacement in ladder width.
pub fn ladder_z_sqr(q: f64, p: f64, params: &OscParams) -> f64 {
    params.ladder_z(q, p).norm_sqr()
}

/// Whether `(q, p)` lies in the region `|z|² ≤ D/4` where truncated identities are quoted.
pub fn in_trusted_region(q: f64, p: f64, params: &OscParams, dim: usize) -> bool {
    ladder_z_sqr(q, p, params) <= dim as f64 / 4.0
}

/// Reusable eigendecompositions of the truncated `Q` and `P`.
#[derive(Debug, Clone)]
pub struct Displacer {
    params: OscParams,
    dim: usize,
    q_eig: HermitianEigen,
    p_eig: HermitianEigen,
}

impl Displacer {
    pub fn new(params: OscParams, dim: usize) -> Result<Self> {
        let can = build_canonical(params, dim)?;
        Ok(Self { params, dim, q_eig: HermitianEigen::new(&can.q.mat), p_eig: HermitianEigen::new(&can.p.mat) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `e^{ipQ}·e^{−iqP}` from the truncated operators.
    pub fn displacement(&self, q: f64, p: f64) -> Operator {
        if !in_trusted_region(q, p, &self.params, self.dim) {
            log::warn!(
                "displacement ({q}, {p}) has |z|^2 = {:.3} > D/4 = {:.2}; truncation dominates",
                ladder_z_sqr(q, p, &self.params),
                self.dim as f64 / 4.0
            );
        }
        let eq = self.q_eig.exp_i(p);
        let ep = self.p_eig.exp_i(-q);
        Operator::new(OperatorKind::Unitary, eq * ep)
    }

    /// `U^W_qp = e^{iqp/2}·U_{−q,p}`.
    pub fn weyl(&self, q: f64, p: f64) -> Operator {
        let u = self.displacement(-q, p);
        Operator::new(OperatorKind::Unitary, u.mat * cis(0.5 * q * p))
    }
}

pub fn displacement_op(q: f64, p: f64, params: &OscParams, dim: usize) -> Result<Operator> {
    check_finite(q, p)?;
    Ok(Displacer::new(*params, dim)?.displacement(q, p))
}

pub fn weyl_op(q: f64, p: f64, params: &OscParams, dim: usize) -> Result<Operator> {
    check_finite(q, p)?;
    Ok(Displacer::new(*params, dim)?.weyl(q, p))
}

fn check_finite(q: f64, p: f64) -> Result<()> {
    if q.is_finite() && p.is_finite() {
        Ok(())
    } else {
        Err(PhaseError::InvalidParams(format!("displacement must be finite, got ({q}, {p})")))
    }
}

/// Number-basis coefficients of the coherent state `D(α)|0⟩`, first `rows` entries.
pub fn coherent_state(alpha: Complex64, rows: usize) -> CVec {
    let mut v = CVec::zeros(rows);
    if rows == 0 {
        return v;
    }
    v[0] = c((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 1..rows {
        v[n] = v[n - 1] * alpha / (n as f64).sqrt();
    }
    v
}

/// Matrix elements `⟨φ_m|U_qp|φ_n⟩` of the untruncated displacement for
/// `m < rows`, `n < cols`.
///
/// Uses `U_qp = e^{iqp/2}D(z̄)` and the column recurrence
/// `D|n+1⟩ = (a† − z)D|n⟩/√(n+1)`, which only couples row `m` to rows `≤ m`.
pub fn displacement_block(q: f64, p: f64, params: &OscParams, rows: usize, cols: usize) -> CMat {
    let z = params.ladder_z(q, p);
    let alpha = z.conj();
    let mut out = CMat::zeros(rows, cols);
    if cols == 0 || rows == 0 {
        return out;
    }
    let mut col = coherent_state(alpha, rows);
    let phase = cis(0.5 * q * p);
    out.set_column(0, &(&col * phase));
    for n in 1..cols {
        let inv = 1.0 / (n as f64).sqrt();
        let mut next = CVec::zeros(rows);
        for m in 0..rows {
            let up = if m > 0 { col[m - 1] * (m as f64).sqrt() } else { c(0.0, 0.0) };
            next[m] = (up - z * col[m]) * inv;
        }
        out.set_column(n, &(&next * phase));
        col = next;
    }
    out
}

/// Samples of the characteristic function `(q,p) ↦ tr(V·U_qp)`.
#[derive(Debug, Clone)]
pub struct CharSamples {
    pub grid: PhaseGrid,
    pub values: Vec<Complex64>,
    pub source: String,
    pub params: OscParams,
    pub dim: usize,
}

impl CharSamples {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "# D={} m={} omega={} source={}", self.dim, self.params.m, self.params.omega, self.source)?;
        writeln!(w, "q,p,re,im")?;
        for (k, v) in self.values.iter().enumerate() {
            let (q, p) = self.grid.point(k);
            writeln!(w, "{q},{p},{:e},{:e}", v.re, v.im)?;
        }
        Ok(())
    }

    /// Largest modulus on the outermost grid rows and columns.
    pub fn boundary_max(&self) -> f64 {
        let g = &self.grid;
        let mut worst: f64 = 0.0;
        for j in 0..g.np {
            for i in 0..g.nq {
                if i == 0 || j == 0 || i + 1 == g.nq || j + 1 == g.np {
                    worst = worst.max(self.values[g.index(i, j)].norm());
                }
            }
        }
        worst
    }
}

/// Grid quality report for the characteristic-function integrals.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CharDiagnostics {
    pub boundary_max: f64,
    pub adequate: bool,
}

/// Samples below this modulus on the boundary leave the integrals converged.
pub const CHAR_BOUNDARY_TOL: f64 = 1e-10;

fn char_diag(s: &CharSamples) -> CharDiagnostics {
    let boundary_max = s.boundary_max();
    if boundary_max >= CHAR_BOUNDARY_TOL {
        log::warn!("characteristic function is {boundary_max:.2e} on the grid boundary; enlarge the grid");
    }
    CharDiagnostics { boundary_max, adequate: boundary_max < CHAR_BOUNDARY_TOL }
}

pub fn char_function(v: &Operator, grid: &PhaseGrid, params: &OscParams, source: &str) -> Result<CharSamples> {
    grid.validate()?;
    params.validate()?;
    let dim = v.dim();
    let s = v.support_dim(0.0).max(1);
    let vs = v.mat.view((0, 0), (s, s)).into_owned();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (q, p) = grid.point(k);
            let u = displacement_block(q, p, params, s, s);
            // tr(V U) = Σ V_nm U_mn
            let mut acc = c(0.0, 0.0);
            for n in 0..s {
                for m in 0..s {
                    acc += vs[(n, m)] * u[(m, n)];
                }
            }
            acc
        })
        .collect();
    Ok(CharSamples { grid: *grid, values, source: source.to_string(), params: *params, dim })
}

/// Quadrature of `V = (1/2π)∫ tr(V U_qp)·U†_qp dq dp`.
pub fn reconstruct_from_char(samples: &CharSamples, dim: usize) -> Result<(Operator, CharDiagnostics)> {
    if dim < 1 {
        return Err(PhaseError::TruncationTooSmall(dim));
    }
    let g = samples.grid;
    let params = samples.params;
    let rows: Vec<CMat> = (0..g.np)
        .into_par_iter()
        .map(|j| {
            let mut acc = CMat::zeros(dim, dim);
            for i in 0..g.nq {
                let chi = samples.values[g.index(i, j)];
                if chi == c(0.0, 0.0) {
                    continue;
                }
                let u = displacement_block(g.q(i), g.p(j), &params, dim, dim);
                // (U†)_{mn} = conj(U_{nm})
                for n in 0..dim {
                    for m in 0..dim {
                        acc[(m, n)] += chi * u[(n, m)].conj();
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = CMat::zeros(dim, dim);
    for r in rows {
        total += r;
    }
    total *= c(g.weight() / TWO_PI, 0.0);
    Ok((Operator::new(OperatorKind::General, total), char_diag(samples)))
}

/// `(1/2π)∫ conj(tr V₁U_qp)·tr V₂U_qp dq dp`, approximating `tr(V₁†V₂)`.
pub fn hs_inner_via_char(
    v1: &Operator,
    v2: &Operator,
    grid: &PhaseGrid,
    params: &OscParams,
) -> Result<(Complex64, CharDiagnostics)> {
    if v1.dim() != v2.dim() {
        return Err(PhaseError::DimensionMismatch { expected: v1.dim(), got: v2.dim() });
    }
    let s1 = char_function(v1, grid, params, "v1")?;
    let s2 = char_function(v2, grid, params, "v2")?;
    let sum: Complex64 = s1.values.iter().zip(&s2.values).map(|(a, b)| a.conj() * b).sum();
    let d1 = char_diag(&s1);
    let d2 = char_diag(&s2);
    let diag =
        CharDiagnostics { boundary_max: d1.boundary_max.max(d2.boundary_max), adequate: d1.adequate && d2.adequate };
    Ok((sum * (grid.weight() / TWO_PI), diag))
}
