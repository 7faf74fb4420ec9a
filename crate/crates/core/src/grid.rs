//! Uniform phase-space grids and sampled fields.
//!
//! Grid point `(i, j)` sits at `(q_min + i·dq, p_min + j·dp)` and stands for a
//! cell of area `dq·dp` (midpoint rule). Flattened storage is p-major: index
//! `j·nq + i`.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PhaseError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub q_min: f64,
    pub p_min: f64,
    pub dq: f64,
    pub dp: f64,
    pub nq: usize,
    pub np: usize,
}

impl PhaseGrid {
    pub fn new(q_min: f64, p_min: f64, dq: f64, dp: f64, nq: usize, np: usize) -> Result<Self> {
        let g = Self { q_min, p_min, dq, dp, nq, np };
        g.validate()?;
        Ok(g)
    }

    /// Grid spanning `[-half_q, half_q] × [-half_p, half_p]`, origin included.
    pub fn symmetric(half_q: f64, half_p: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || !(half_q >= 0.0) || !(half_p >= 0.0) {
            return Err(PhaseError::InvalidParams(format!(
                "grid needs positive spacing and non-negative extent (spacing {spacing}, half-widths {half_q}, {half_p})"
            )));
        }
        let kq = (half_q / spacing).round() as usize;
        let kp = (half_p / spacing).round() as usize;
        Self::new(-(kq as f64) * spacing, -(kp as f64) * spacing, spacing, spacing, 2 * kq + 1, 2 * kp + 1)
    }

    /// Grid covering `[q_lo, q_hi] × [p_lo, p_hi]` with the given spacing.
    pub fn from_bounds(q_lo: f64, q_hi: f64, p_lo: f64, p_hi: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || !(q_hi >= q_lo) || !(p_hi >= p_lo) {
            return Err(PhaseError::InvalidParams("grid bounds must be ordered and spacing positive".into()));
        }
        let nq = ((q_hi - q_lo) / spacing).round() as usize + 1;
        let np = ((p_hi - p_lo) / spacing).round() as usize + 1;
        Self::new(q_lo, p_lo, spacing, spacing, nq, np)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nq * self.np < 4 {
            return Err(PhaseError::InadequateGrid(format!("empty grid ({} x {} points)", self.nq, self.np)));
        }
        if !(self.dq > 0.0 && self.dp > 0.0) || !self.q_min.is_finite() || !self.p_min.is_finite() {
            return Err(PhaseError::InvalidParams("grid spacing must be positive and origin finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nq * self.np
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weight(&self) -> f64 {
        self.dq * self.dp
    }

    pub fn q(&self, i: usize) -> f64 {
        self.q_min + i as f64 * self.dq
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + j as f64 * self.dp
    }

    pub fn q_max(&self) -> f64 {
        self.q(self.nq - 1)
    }

    pub fn p_max(&self) -> f64 {
        self.p(self.np - 1)
    }

    pub fn q_axis(&self) -> Vec<f64> {
        (0..self.nq).map(|i| self.q(i)).collect()
    }

    pub fn p_axis(&self) -> Vec<f64> {
        (0..self.np).map(|j| self.p(j)).collect()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nq + i
    }

    /// `(q, p)` of flattened index `k`.
    pub fn point(&self, k: usize) -> (f64, f64) {
        (self.q(k % self.nq), self.p(k / self.nq))
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }

    /// Midpoints of the four boundary edges.
    pub fn edge_midpoints(&self) -> [(f64, f64); 4] {
        let qc = 0.5 * (self.q_min + self.q_max());
        let pc = 0.5 * (self.p_min + self.p_max());
        [(self.q_min, pc), (self.q_max(), pc), (qc, self.p_min), (qc, self.p_max())]
    }

    /// Indices of grid points whose cells lie inside the rectangle.
    pub fn points_in(&self, cell: &Cell) -> Vec<usize> {
        let mut out = Vec::new();
        for j in 0..self.np {
            let p = self.p(j);
            if p < cell.p_lo || p >= cell.p_hi {
                continue;
            }
            for i in 0..self.nq {
                let q = self.q(i);
                if q >= cell.q_lo && q < cell.q_hi {
                    out.push(self.index(i, j));
                }
            }
        }
        out
    }

    /// Rectangle covered by the cells of all grid points.
    pub fn extent(&self) -> Cell {
        Cell {
            q_lo: self.q_min - 0.5 * self.dq,
            q_hi: self.q_max() + 0.5 * self.dq,
            p_lo: self.p_min - 0.5 * self.dp,
            p_hi: self.p_max() + 0.5 * self.dp,
        }
    }

    /// Uniform `n × n` tiling of the grid extent.
    pub fn tiling(&self, n: usize) -> Vec<Cell> {
        let e = self.extent();
        let wq = (e.q_hi - e.q_lo) / n as f64;
        let wp = (e.p_hi - e.p_lo) / n as f64;
        let mut cells = Vec::with_capacity(n * n);
        for b in 0..n {
            for a in 0..n {
                cells.push(Cell {
                    q_lo: e.q_lo + a as f64 * wq,
                    q_hi: if a + 1 == n { e.q_hi + 1e-9 } else { e.q_lo + (a + 1) as f64 * wq },
                    p_lo: e.p_lo + b as f64 * wp,
                    p_hi: if b + 1 == n { e.p_hi + 1e-9 } else { e.p_lo + (b + 1) as f64 * wp },
                });
            }
        }
        cells
    }

    /// Same spacing-halved grid over the same rectangle.
    pub fn refined(&self) -> Self {
        Self {
            q_min: self.q_min,
            p_min: self.p_min,
            dq: 0.5 * self.dq,
            dp: 0.5 * self.dp,
            nq: 2 * self.nq - 1,
            np: 2 * self.np - 1,
        }
    }
}

/// Half-open phase-space rectangle `[q_lo, q_hi) × [p_lo, p_hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub q_lo: f64,
    pub q_hi: f64,
    pub p_lo: f64,
    pub p_hi: f64,
}

impl Cell {
    pub fn new(q_lo: f64, q_hi: f64, p_lo: f64, p_hi: f64) -> Self {
        Self { q_lo, q_hi, p_lo, p_hi }
    }

    pub fn shifted(&self, dq: f64, dp: f64) -> Self {
        Self { q_lo: self.q_lo + dq, q_hi: self.q_hi + dq, p_lo: self.p_lo + dp, p_hi: self.p_hi + dp }
    }

    pub fn is_empty(&self) -> bool {
        self.q_hi <= self.q_lo || self.p_hi <= self.p_lo
    }

    pub fn contains(&self, q: f64, p: f64) -> bool {
        q >= self.q_lo && q < self.q_hi && p >= self.p_lo && p < self.p_hi
    }

    pub fn within(&self, outer: &Cell) -> bool {
        self.is_empty()
            || (self.q_lo >= outer.q_lo - 1e-9
                && self.q_hi <= outer.q_hi + 1e-9
                && self.p_lo >= outer.p_lo - 1e-9
                && self.p_hi <= outer.p_hi + 1e-9)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    WaveFunction,
    Density,
    Function,
    Residual,
}

/// Samples on a phase grid, p-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField<T> {
    pub grid: PhaseGrid,
    pub values: Vec<T>,
    pub kind: FieldKind,
}

pub type WaveField = PhaseField<Complex64>;
pub type RealField = PhaseField<f64>;

impl<T: Copy> PhaseField<T> {
    pub fn new(grid: PhaseGrid, values: Vec<T>, kind: FieldKind) -> Self {
        assert_eq!(values.len(), grid.len(), "field size must match grid");
        Self { grid, values, kind }
    }

    pub fn from_fn<F: Fn(f64, f64) -> T>(grid: PhaseGrid, kind: FieldKind, f: F) -> Self {
        let values = grid.points().map(|(q, p)| f(q, p)).collect();
        Self { grid, values, kind }
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[self.grid.index(i, j)]
    }
}

impl RealField {
    /// Midpoint quadrature `Σ v·dq·dp`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.weight()
    }

    /// Quadrature of `f(q,p)·v`.
    pub fn integrate_with<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        self.grid.points().zip(&self.values).map(|((q, p), v)| f(q, p) * v).sum::<f64>() * self.grid.weight()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn argmax(&self) -> (f64, f64) {
        let k = self.values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).unwrap_or(0);
        self.grid.point(k)
    }

    /// Bilinear interpolation; `None` outside the sampled rectangle.
    pub fn interpolate(&self, q: f64, p: f64) -> Option<f64> {
        let g = &self.grid;
        let x = (q - g.q_min) / g.dq;
        let y = (p - g.p_min) / g.dp;
        if x < 0.0 || y < 0.0 || x > (g.nq - 1) as f64 || y > (g.np - 1) as f64 {
            return None;
        }
        let i = (x.floor() as usize).min(g.nq - 2);
        let j = (y.floor() as usize).min(g.np - 2);
        let fx = x - i as f64;
        let fy = y - j as f64;
        let v00 = self.at(i, j);
        let v10 = self.at(i + 1, j);
        let v01 = self.at(i, j + 1);
        let v11 = self.at(i + 1, j + 1);
        Some((1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11))
    }

    pub fn max_abs_diff(&self, other: &RealField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// CSV with columns `q,p,<column>`, p-major.
    pub fn write_csv<W: Write>(&self, w: &mut W, column: &str) -> std::io::Result<()> {
        writeln!(w, "q,p,{column}")?;
        for (k, v) in self.values.iter().enumerate() {
            let (q, p) = self.grid.point(k);
            writeln!(w, "{q},{p},{v:e}")?;
        }
        Ok(())
    }

    /// Read a `q,p,value` CSV written by [`RealField::write_csv`], recovering the grid.
    pub fn read_csv<R: BufRead>(r: R, kind: FieldKind) -> Result<Self> {
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (rows.is_empty() && line.starts_with('q')) {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(PhaseError::Parse(format!("line {}: expected 3 columns", lineno + 1)));
            }
            let parse =
                |s: &str| s.trim().parse::<f64>().map_err(|e| PhaseError::Parse(format!("line {}: {e}", lineno + 1)));
            rows.push((parse(cols[0])?, parse(cols[1])?, parse(cols[2])?));
        }
        let grid = infer_grid(rows.iter().map(|r| (r.0, r.1)))?;
        let mut values = vec![f64::NAN; grid.len()];
        for (q, p, v) in rows {
            let i = ((q - grid.q_min) / grid.dq).round() as usize;
            let j = ((p - grid.p_min) / grid.dp).round() as usize;
            values[grid.index(i, j)] = v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(PhaseError::Parse("samples do not fill a rectangular grid".into()));
        }
        Ok(Self::new(grid, values, kind))
    }
}

fn infer_grid<I: Iterator<Item = (f64, f64)>>(points: I) -> Result<PhaseGrid> {
    let pts: Vec<(f64, f64)> = points.collect();
    if pts.len() < 4 {
        return Err(PhaseError::Parse(format!("need at least 4 samples, got {}", pts.len())));
    }
    let axis = |mut v: Vec<f64>| -> Result<(f64, f64, usize)> {
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        if v.len() < 2 {
            return Err(PhaseError::Parse("grid axis has a single value".into()));
        }
        let d = (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64;
        if v.windows(2).any(|w| ((w[1] - w[0]) - d).abs() > 1e-6 * d.max(1.0)) {
            return Err(PhaseError::Parse("grid axis is not uniform".into()));
        }
        Ok((v[0], d, v.len()))
    };
    let (q_min, dq, nq) = axis(pts.iter().map(|p| p.0).collect())?;
    let (p_min, dp, np) = axis(pts.iter().map(|p| p.1).collect())?;
    if nq * np != pts.len() {
        return Err(PhaseError::Parse(format!("{} samples do not form a {nq} x {np} grid", pts.len())));
    }
    PhaseGrid::new(q_min, p_min, dq, dp, nq, np)
}

impl WaveField {
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.weight()
    }

    /// Quadrature inner product `Σ conj(self)·other·dq·dp`.
    pub fn inner(&self, other: &WaveField) -> Complex64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum::<Complex64>() * self.grid.weight()
    }

    pub fn modulus_sqr(&self) -> RealField {
        PhaseField::new(self.grid, self.values.iter().map(|z| z.norm_sqr()).collect(), FieldKind::Density)
    }

    pub fn max_abs_diff(&self, other: &WaveField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "q,p,re,im")?;
        for (k, v) in self.values.iter().enumerate() {
            let (q, p) = self.grid.point(k);
            writeln!(w, "{q},{p},{:e},{:e}", v.re, v.im)?;
        }
        Ok(())
    }
}
