//! Dequantizers: phase-space functions `f_A` with `tr(W·A) = ∫ρ_W·f_A`.
//!
//! Closed forms exist for `Q`, `P`, `Q²`, `P²` and `H`. They only involve the
//! first two moments of the confidence functions, so they hold for any frame
//! generator. Arbitrary hermitian operators are handled by a least-squares fit
//! of grid values.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classrep::{confidence_moments, husimi, RANK_TOL};
use crate::error::{PhaseError, Result};
use crate::fock::{build_canonical, random_density, Operator, OperatorKind, OscParams};
use crate::frame::{FrameSpec, TWO_PI};
use crate::grid::{FieldKind, PhaseField, PhaseGrid, RealField};
use crate::linalg::{self, hermitian_coords};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    Q,
    P,
    Q2,
    P2,
    H,
    Custom,
}

impl Symbol {
    pub const CLOSED_FORM: [Symbol; 5] = [Symbol::Q, Symbol::P, Symbol::Q2, Symbol::P2, Symbol::H];

    pub fn name(self) -> &'static str {
        match self {
            Symbol::Q => "Q",
            Symbol::P => "P",
            Symbol::Q2 => "Q2",
            Symbol::P2 => "P2",
            Symbol::H => "H",
            Symbol::Custom => "custom",
        }
    }

    /// Whether the operator couples a level to two levels above it.
    fn is_quadratic(self) -> bool {
        matches!(self, Symbol::Q2 | Symbol::P2 | Symbol::H)
    }
}

impl std::str::FromStr for Symbol {
    type Err = PhaseError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "Q" => Ok(Symbol::Q),
            "P" => Ok(Symbol::P),
            "Q2" | "Q^2" => Ok(Symbol::Q2),
            "P2" | "P^2" => Ok(Symbol::P2),
            "H" => Ok(Symbol::H),
            other => Err(PhaseError::Parse(format!("unknown symbol '{other}' (expected Q, P, Q2, P2 or H)"))),
        }
    }
}

/// One term `coef·qᵃ·pᵇ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub q_power: u32,
    pub p_power: u32,
    pub coef: f64,
}

/// A polynomial phase-space function plus constant, tagged with the operator it dequantizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dequantizer {
    pub symbol: Symbol,
    pub coefficients: Vec<Monomial>,
    pub constant: f64,
    pub params: OscParams,
}

impl Dequantizer {
    pub fn eval(&self, q: f64, p: f64) -> f64 {
        self.constant
            + self
                .coefficients
                .iter()
                .map(|m| m.coef * q.powi(m.q_power as i32) * p.powi(m.p_power as i32))
                .sum::<f64>()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn mono(q_power: u32, p_power: u32, coef: f64) -> Monomial {
    Monomial { q_power, p_power, coef }
}

/// `f_Q = q − ⟨η^Q⟩`, `f_{Q²} = (q − ⟨η^Q⟩)² − var η^Q`, the same for `P`, and
/// `f_H = f_{P²}/2m + mω²f_{Q²}/2`.
pub fn dequantizer_for(symbol: Symbol, frame: &FrameSpec) -> Result<Dequantizer> {
    let (mq, vq, mp, vp) = confidence_moments(frame)?;
    let params = frame.params;
    let (coefficients, constant) = match symbol {
        Symbol::Q => (vec![mono(1, 0, 1.0)], -mq),
        Symbol::P => (vec![mono(0, 1, 1.0)], -mp),
        Symbol::Q2 => (vec![mono(2, 0, 1.0), mono(1, 0, -2.0 * mq)], mq * mq - vq),
        Symbol::P2 => (vec![mono(0, 2, 1.0), mono(0, 1, -2.0 * mp)], mp * mp - vp),
        Symbol::H => {
            let (m, w) = (params.m, params.omega);
            let kq = 0.5 * m * w * w;
            let kp = 0.5 / m;
            (
                vec![mono(2, 0, kq), mono(1, 0, -2.0 * mq * kq), mono(0, 2, kp), mono(0, 1, -2.0 * mp * kp)],
                kq * (mq * mq - vq) + kp * (mp * mp - vp),
            )
        }
        Symbol::Custom => {
            return Err(PhaseError::InvalidParams("custom symbols have no closed-form dequantizer".into()))
        }
    };
    let coefficients = coefficients.into_iter().filter(|m| m.coef != 0.0).collect();
    Ok(Dequantizer { symbol, coefficients, constant, params })
}

/// Number-basis operator paired with a symbol. `Q²` and `P²` are squares of
/// the truncated operators; `H` is the exact diagonal.
pub fn quantum_operator(symbol: Symbol, params: &OscParams, dim: usize) -> Result<Operator> {
    let can = build_canonical(*params, dim)?;
    Ok(match symbol {
        Symbol::Q => can.q,
        Symbol::P => can.p,
        Symbol::Q2 => can.q2(),
        Symbol::P2 => can.p2(),
        Symbol::H => can.h,
        Symbol::Custom => return Err(PhaseError::InvalidParams("custom symbols have no operator".into())),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DequantCheck {
    pub symbol: String,
    pub quantum: f64,
    pub classical: f64,
    pub discrepancy: f64,
}

/// Population allowed above the trusted block for quadratic symbols.
pub const TRUSTED_WEIGHT_TOL: f64 = 1e-8;

/// Two-route comparison of `tr(W·A)` with `∫ρ_W·f_A` for a density already sampled.
pub fn check_dequantizer_with(
    w: &Operator,
    rho: &RealField,
    symbol: Symbol,
    frame: &FrameSpec,
) -> Result<DequantCheck> {
    let block = linalg::trusted_block(w.dim());
    if symbol.is_quadratic() && w.weight_above(block) > TRUSTED_WEIGHT_TOL {
        return Err(PhaseError::Truncation(format!(
            "state has weight {:.2e} above the trusted block of {block} levels",
            w.weight_above(block)
        )));
    }
    let a = quantum_operator(symbol, &frame.params, w.dim())?;
    let f = dequantizer_for(symbol, frame)?;
    let quantum = linalg::trace_product(&w.mat, &a.mat).re;
    let classical = rho.integrate_with(|q, p| f.eval(q, p));
    Ok(DequantCheck { symbol: symbol.name().to_string(), quantum, classical, discrepancy: (quantum - classical).abs() })
}

pub fn check_dequantizer(w: &Operator, symbol: Symbol, frame: &FrameSpec, grid: &PhaseGrid) -> Result<DequantCheck> {
    let rho = husimi(w, frame, grid)?;
    check_dequantizer_with(w, &rho, symbol, frame)
}

/// Classical energy of the oscillator in units of `ω`, `H(q,p)/ω`.
fn energy_ratio(q: f64, p: f64, params: &OscParams) -> f64 {
    params.classical_energy(q, p) / params.omega
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Closed-form Husimi density of `|φ_n⟩⟨φ_n|` in the matched frame:
/// `(1/(2π n!))·(H/ω)ⁿ·e^{−H/ω}`.
pub fn oscillator_density(n: usize, q: f64, p: f64, params: &OscParams) -> f64 {
    let x = energy_ratio(q, p, params);
    if x == 0.0 {
        return if n == 0 { 1.0 / TWO_PI } else { 0.0 };
    }
    (n as f64 * x.ln() - x - ln_factorial(n)).exp() / TWO_PI
}

pub fn oscillator_density_field(n: usize, params: &OscParams, grid: &PhaseGrid) -> RealField {
    PhaseField::from_fn(*grid, FieldKind::Density, |q, p| oscillator_density(n, q, p, params))
}

/// Energy density `Eⁿe^{−E/ω}/(n!·ω^{n+1})` of `ρ_n` pushed forward by `H`.
pub fn energy_density(n: usize, e: f64, params: &OscParams) -> f64 {
    if e < 0.0 {
        return 0.0;
    }
    let w = params.omega;
    if e == 0.0 {
        return if n == 0 { 1.0 / w } else { 0.0 };
    }
    (n as f64 * (e / w).ln() - e / w - ln_factorial(n)).exp() / w
}

/// Default energy cutoff `ω(D + 10√D)`.
pub fn default_e_max(params: &OscParams, dim: usize) -> f64 {
    params.omega * (dim as f64 + 10.0 * (dim as f64).sqrt())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyBins {
    pub width: f64,
    pub e_max: f64,
}

impl EnergyBins {
    pub fn default_for(params: &OscParams, dim: usize) -> Self {
        Self { width: 0.05 * params.omega, e_max: default_e_max(params, dim) }
    }

    pub fn count(&self) -> usize {
        (self.e_max / self.width).ceil() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.e_max.is_finite() && self.e_max >= self.width) {
            return Err(PhaseError::Bins(format!(
                "need 0 < width <= e_max (width {}, e_max {})",
                self.width, self.e_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyHistogram {
    /// Left bin edges.
    pub edges: Vec<f64>,
    pub width: f64,
    /// Normalized density per bin.
    pub density: Vec<f64>,
    /// Mass at energies beyond `e_max`, before normalization.
    pub overflow: f64,
}

impl EnergyHistogram {
    pub fn mean(&self) -> f64 {
        self.edges.iter().zip(&self.density).map(|(e, d)| (e + 0.5 * self.width) * d * self.width).sum()
    }
}

/// Sample points per grid cell and axis used by [`energy_histogram`].
pub const HISTOGRAM_SUBSAMPLES: usize = 8;

/// Histogram of `H(q,p)` weighted by `ρ·dq·dp`, normalized to unit mass.
///
/// Each cell's mass is spread evenly over an `8×8` lattice of sub-points, since
/// energy bins near the origin are thinner than a grid cell.
pub fn energy_histogram(rho: &RealField, params: &OscParams, bins: EnergyBins) -> Result<EnergyHistogram> {
    bins.validate()?;
    let nb = bins.count();
    let mut mass = vec![0.0; nb];
    let mut overflow = 0.0;
    let g = &rho.grid;
    let s = HISTOGRAM_SUBSAMPLES;
    let w = g.weight() / (s * s) as f64;
    let offsets: Vec<f64> = (0..s).map(|a| (a as f64 + 0.5) / s as f64 - 0.5).collect();
    for (k, v) in rho.values.iter().enumerate() {
        let (q, p) = g.point(k);
        for oq in &offsets {
            for op in &offsets {
                let e = params.classical_energy(q + oq * g.dq, p + op * g.dp);
                let b = (e / bins.width).floor() as usize;
                if b < nb {
                    mass[b] += v * w;
                } else {
                    overflow += v * w;
                }
            }
        }
    }
    let total: f64 = mass.iter().sum();
    if total <= 0.0 {
        return Err(PhaseError::Bins("no mass inside the energy range".into()));
    }
    let density = mass.iter().map(|m| m / (total * bins.width)).collect();
    let edges = (0..nb).map(|b| b as f64 * bins.width).collect();
    Ok(EnergyHistogram { edges, width: bins.width, density, overflow })
}

#[derive(Debug, Clone)]
pub struct EffectDequantization {
    pub f: RealField,
    /// `‖(1/2π)Σ f_k a_k·dq·dp − A‖_F`.
    pub residual: f64,
    /// `max |tr(W·A) − ∫ρ_W·f|` over the probe states.
    pub probe_discrepancy: f64,
    pub rank: usize,
    pub required: usize,
}

/// Probe states drawn for [`dequantize_effect`].
pub const PROBE_COUNT: usize = 10;

/// Least-squares dequantization of a hermitian operator on the grid.
///
/// Among all `f` minimizing `‖(1/2π)Σ_k f_k a_k·dq·dp − A‖_F` the solution of
/// least `Σ_k tr(a_k)·f_k²` is returned, so that the identity maps to `f ≡ 1`.
/// Directions with singular values below `1e-8·σ_max` are dropped.
pub fn dequantize_effect(a: &Operator, frame: &FrameSpec, grid: &PhaseGrid, seed: u64) -> Result<EffectDequantization> {
    grid.validate()?;
    let d = frame.dim;
    if a.dim() != d {
        return Err(PhaseError::DimensionMismatch { expected: d, got: a.dim() });
    }
    let defect = a.hermitian_defect();
    if defect > 1e-12 {
        return Err(PhaseError::NotHermitian(defect));
    }
    let n = d * d;
    let scale = grid.weight() / TWO_PI;
    // normalized generator coordinates ĝ_k and weights tr(a_k)
    let unit_coords = |k: usize| -> (Vec<f64>, f64) {
        let (q, p) = grid.point(k);
        let ak = frame.translated_generator(q, p, d);
        let tr = linalg::trace(&ak).re;
        if tr <= 0.0 {
            return (vec![0.0; n], 0.0);
        }
        (hermitian_coords(&(ak / num_complex::Complex64::new(tr, 0.0))), tr)
    };
    let partial: Vec<DMatrix<f64>> = (0..grid.np)
        .into_par_iter()
        .map(|j| {
            let mut g = DMatrix::<f64>::zeros(n, n);
            for i in 0..grid.nq {
                let (x, tr) = unit_coords(grid.index(i, j));
                if tr > 0.0 {
                    let x = DVector::from_vec(x);
                    g.ger(tr, &x, &x, 1.0);
                }
            }
            g
        })
        .collect();
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for g in partial {
        gram += g;
    }
    gram *= scale * scale;
    let eig = gram.symmetric_eigen();
    let smax = eig.eigenvalues.iter().copied().fold(0.0, f64::max).max(0.0).sqrt();
    let target = DVector::from_vec(hermitian_coords(&a.mat));
    let mut y = DVector::<f64>::zeros(n);
    let mut rank = 0;
    for k in 0..n {
        let lambda = eig.eigenvalues[k];
        if lambda.max(0.0).sqrt() > RANK_TOL * smax {
            rank += 1;
            let v = eig.eigenvectors.column(k);
            y += v * (v.dot(&target) / lambda);
        }
    }
    if rank < n {
        return Err(PhaseError::RankDeficient { rank, required: n });
    }
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (x, tr) = unit_coords(k);
            if tr > 0.0 {
                scale * DVector::from_vec(x).dot(&y)
            } else {
                0.0
            }
        })
        .collect();
    // residual of the fitted operator
    let fitted: DVector<f64> = (0..grid.np)
        .into_par_iter()
        .map(|j| {
            let mut acc = DVector::<f64>::zeros(n);
            for i in 0..grid.nq {
                let k = grid.index(i, j);
                let (x, tr) = unit_coords(k);
                acc.axpy(values[k] * tr * scale, &DVector::from_vec(x), 1.0);
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(DVector::<f64>::zeros(n), |acc, v| acc + v);
    let residual = (&fitted - &target).norm();
    let f = PhaseField::new(*grid, values, FieldKind::Function);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = linalg::trusted_block(d);
    let mut probe_discrepancy: f64 = 0.0;
    for _ in 0..PROBE_COUNT {
        let w = random_density(&mut rng, d, block);
        let rho = husimi(&w, frame, grid)?;
        let classical = rho.values.iter().zip(&f.values).map(|(r, v)| r * v).sum::<f64>() * grid.weight();
        let quantum = linalg::trace_product(&w.mat, &a.mat).re;
        probe_discrepancy = probe_discrepancy.max((quantum - classical).abs());
    }
    Ok(EffectDequantization { f, residual, probe_discrepancy, rank, required: n })
}

/// Spectral projector of the truncated `Q` onto eigenvalues in `[lo, hi]`.
pub fn position_band_projector(params: &OscParams, dim: usize, lo: f64, hi: f64) -> Result<Operator> {
    let can = build_canonical(*params, dim)?;
    let eig = linalg::HermitianEigen::new(&can.q.mat);
    let m = eig.apply(|x| num_complex::Complex64::new(if x >= lo && x <= hi { 1.0 } else { 0.0 }, 0.0));
    Ok(Operator::new(OperatorKind::Hermitian, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> OscParams {
        OscParams::default()
    }

    #[test]
    fn q2_constant_for_gaussian_frame() {
        let f = FrameSpec::coherent(unit(), 8).unwrap();
        let d = dequantizer_for(Symbol::Q2, &f).unwrap();
        assert!((d.constant + 0.5).abs() < 1e-15);
        assert!((d.eval(2.0, 7.0) - 3.5).abs() < 1e-14);
    }

    #[test]
    fn matched_energy_constant() {
        let params = OscParams::matched(1.7, 0.6).unwrap();
        let f = FrameSpec::coherent(params, 8).unwrap();
        let d = dequantizer_for(Symbol::H, &f).unwrap();
        assert!((d.constant + 0.3).abs() < 1e-12);
        let (q, p) = (0.4, -1.1);
        assert!((d.eval(q, p) - params.classical_energy(q, p) + 0.3).abs() < 1e-12);
    }

    #[test]
    fn centered_frame_gives_identity_position_symbol() {
        let f = FrameSpec::coherent(unit().with_sigma(0.9).unwrap(), 8).unwrap();
        let d = dequantizer_for(Symbol::Q, &f).unwrap();
        assert_eq!(d.eval(1.25, 3.0), 1.25);
    }

    #[test]
    fn unknown_symbol() {
        assert!("R".parse::<Symbol>().is_err());
        assert_eq!("q2".parse::<Symbol>().unwrap(), Symbol::Q2);
    }

    #[test]
    fn descriptor_json_roundtrip() {
        let f = FrameSpec::coherent(unit(), 8).unwrap();
        let d = dequantizer_for(Symbol::H, &f).unwrap();
        assert_eq!(Dequantizer::from_json(&d.to_json().unwrap()).unwrap(), d);
    }

    #[test]
    fn closed_form_densities() {
        assert!((oscillator_density(0, 0.0, 0.0, &unit()) - 1.0 / TWO_PI).abs() < 1e-15);
        assert!((energy_density(1, 1.0, &unit()) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn bad_bins() {
        let g = PhaseGrid::symmetric(1.0, 1.0, 0.5).unwrap();
        let rho = oscillator_density_field(0, &unit(), &g);
        assert!(matches!(
            energy_histogram(&rho, &unit(), EnergyBins { width: 0.0, e_max: 1.0 }),
            Err(PhaseError::Bins(_))
        ));
        assert!(matches!(
            energy_histogram(&rho, &unit(), EnergyBins { width: 2.0, e_max: 1.0 }),
            Err(PhaseError::Bins(_))
        ));
    }

    #[test]
    fn origin_mass_lands_in_lowest_bin() {
        let g = PhaseGrid::symmetric(1.0, 1.0, 0.1).unwrap();
        let mut rho = RealField::from_fn(g, FieldKind::Density, |_, _| 0.0);
        let k = g.index(10, 10);
        rho.values[k] = 1.0 / g.weight();
        let h = energy_histogram(&rho, &unit(), EnergyBins { width: 0.05, e_max: 5.0 }).unwrap();
        assert!((h.density[0] * 0.05 - 1.0).abs() < 1e-12);
    }
}
