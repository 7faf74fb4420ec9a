//! Data-producing commands. Each writes into its own run directory.

use std::io::Write;
use std::path::{Path, PathBuf};

use phasekit::classrep::{
    completeness_rank, confidence_functions, effect_of_region, husimi, marginals, probability_of, reconstruct_state,
};
use phasekit::dequant::{check_dequantizer_with, DequantCheck, Symbol};
use phasekit::dynamics::{density_series, liouville_match, LiouvilleReport};
use phasekit::fock::AxisDensity;
use phasekit::frame::{
    bargmann_norm_sqr, bargmann_ops_check, bargmann_transform, cauchy_riemann_residual, grid_adequacy, BargmannOp,
};
use phasekit::grid::{FieldKind, RealField};
use phasekit::io::OperatorDoc;
use phasekit::linalg::{self, CMat};
use phasekit::{PhaseError, Result};
use serde::Serialize;
use serde_json::json;

use crate::config::{levels_of, parse_state, RunConfig};
use crate::output::RunDir;

/// Tolerance reported as `pass` in the expectation table.
pub const EXPECT_TOL: f64 = 1e-6;

#[derive(Serialize)]
struct FieldSummary {
    integral: f64,
    min: f64,
    max: f64,
    argmax: (f64, f64),
}

impl FieldSummary {
    fn of(rho: &RealField) -> Self {
        Self { integral: rho.integral(), min: rho.min(), max: rho.max(), argmax: rho.argmax() }
    }
}

pub fn density(cfg: &RunConfig, state_spec: &str) -> Result<PathBuf> {
    let state = parse_state(state_spec, cfg)?;
    let frame = cfg.frame()?;
    let grid = cfg.grid_for(&frame, levels_of(&state))?;
    let rho = husimi(&state.operator(), &frame, &grid)?;
    let adequacy = grid_adequacy(&frame, &grid, levels_of(&state));
    let mut run = RunDir::create(cfg, "density", json!({ "state": state_spec }))?;
    run.write_with("density.csv", |w| rho.write_csv(w, "rho"))?;
    run.write_json(
        "density.json",
        &json!({
            "state": state_spec,
            "dim": cfg.dim,
            "params": cfg.params()?,
            "grid": grid,
            "adequacy": adequacy,
            "summary": FieldSummary::of(&rho),
        }),
    )?;
    eprintln!("density of {state_spec}: integral {:.9}, max {:.6}", rho.integral(), rho.max());
    run.finish()
}

fn write_axis(w: &mut dyn Write, name: &str, d: &AxisDensity) -> std::io::Result<()> {
    writeln!(w, "{name},density")?;
    for (x, v) in d.x.iter().zip(&d.values) {
        writeln!(w, "{x},{v:e}")?;
    }
    Ok(())
}

pub fn marginals_cmd(cfg: &RunConfig, state_spec: &str) -> Result<PathBuf> {
    let state = parse_state(state_spec, cfg)?;
    let frame = cfg.frame()?;
    let grid = cfg.grid_for(&frame, levels_of(&state))?;
    let rho = husimi(&state.operator(), &frame, &grid)?;
    let (mq, mp) = marginals(&rho);
    let (eq, ep) = confidence_functions(&frame);
    let mut run = RunDir::create(cfg, "marginals", json!({ "state": state_spec }))?;
    run.write_with("marginal_q.csv", |w| write_axis(w, "q", &mq))?;
    run.write_with("marginal_p.csv", |w| write_axis(w, "p", &mp))?;
    run.write_json(
        "marginals.json",
        &json!({
            "state": state_spec,
            "q": { "integral": mq.integral(), "mean": mq.mean(), "variance": mq.variance() },
            "p": { "integral": mp.integral(), "mean": mp.mean(), "variance": mp.variance() },
            "confidence": { "var_eta_q": eq.variance, "var_eta_p": ep.variance },
        }),
    )?;
    run.finish()
}

pub fn expect(cfg: &RunConfig, state_spec: &str, symbols: &str) -> Result<PathBuf> {
    let symbols: Vec<Symbol> = symbols.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?;
    let state = parse_state(state_spec, cfg)?;
    let w = state.operator();
    let frame = cfg.frame()?;
    let grid = cfg.grid_for(&frame, levels_of(&state))?;
    let rho = husimi(&w, &frame, &grid)?;
    let rows: Vec<DequantCheck> =
        symbols.iter().map(|&s| check_dequantizer_with(&w, &rho, s, &frame)).collect::<Result<_>>()?;
    let worst = rows.iter().map(|r| r.discrepancy).fold(0.0, f64::max);
    for r in &rows {
        eprintln!("{:>3}: quantum {:.10} classical {:.10} gap {:.2e}", r.symbol, r.quantum, r.classical, r.discrepancy);
    }
    let names: Vec<&str> = symbols.iter().map(|s| s.name()).collect();
    let mut run = RunDir::create(cfg, "expect", json!({ "state": state_spec, "symbols": names }))?;
    run.write_json(
        "expect.json",
        &json!({ "state": state_spec, "rows": rows, "max_discrepancy": worst, "tolerance": EXPECT_TOL, "pass": worst < EXPECT_TOL }),
    )?;
    run.finish()
}

#[derive(Serialize)]
struct EffectEntry {
    cell: phasekit::grid::Cell,
    effect: OperatorDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    probability_quantum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    probability_classical: Option<f64>,
}

pub fn effects(cfg: &RunConfig, tiles: usize, state_spec: Option<&str>) -> Result<PathBuf> {
    if tiles == 0 {
        return Err(PhaseError::InvalidParams("need at least one tile per side".into()));
    }
    let frame = cfg.frame()?;
    let block = linalg::trusted_block(cfg.dim);
    let grid = cfg.grid_for(&frame, block)?;
    let cells = grid.tiling(tiles);
    let set = effect_of_region(&cells, &frame, &grid)?;
    // a rank test needs at least D² effects; smaller tilings are reported without one
    let rank = if set.len() >= cfg.dim * cfg.dim { Some(completeness_rank(&set)?) } else { None };
    let sum_defect = linalg::max_abs_block(&(set.sum() - CMat::identity(cfg.dim, cfg.dim)), block);
    let state = state_spec.map(|s| parse_state(s, cfg)).transpose()?;
    let rho = match &state {
        Some(s) => Some(husimi(&s.operator(), &frame, &grid)?),
        None => None,
    };
    let entries: Vec<EffectEntry> = cells
        .iter()
        .zip(&set.effects)
        .map(|(cell, e)| EffectEntry {
            cell: *cell,
            effect: OperatorDoc::from_operator(e, None),
            probability_quantum: state.as_ref().map(|s| linalg::trace_product(&s.operator().mat, &e.mat).re),
            probability_classical: rho.as_ref().map(|r| probability_of(r, cell)),
        })
        .collect();
    match &rank {
        Some(r) => {
            eprintln!("{} effects, rank {} of {}, sum defect {sum_defect:.2e}", entries.len(), r.rank, r.required)
        }
        None => eprintln!(
            "{} effects (fewer than D² = {}, no rank test), sum defect {sum_defect:.2e}",
            entries.len(),
            cfg.dim * cfg.dim
        ),
    }
    let mut run = RunDir::create(cfg, "effects", json!({ "tiles": tiles, "state": state_spec }))?;
    run.write_json(
        "effects.json",
        &json!({ "grid": grid, "completeness": rank, "sum_defect_trusted_block": sum_defect, "effects": entries }),
    )?;
    run.finish()
}

pub fn reconstruct(cfg: &RunConfig, input: &Path, truth_spec: Option<&str>, threshold: Option<f64>) -> Result<PathBuf> {
    let file = std::fs::File::open(input)?;
    let rho = RealField::read_csv(std::io::BufReader::new(file), FieldKind::Density)?;
    let frame = cfg.frame()?;
    let truth = truth_spec.map(|s| parse_state(s, cfg).map(|st| st.operator())).transpose()?;
    let report = reconstruct_state(&rho, &frame, truth.as_ref(), threshold)?;
    eprintln!(
        "rank {} of {}, residual {:.2e}{}",
        report.rank,
        report.required,
        report.residual_max,
        report.trace_distance.map(|t| format!(", trace distance {t:.2e}")).unwrap_or_default()
    );
    let input_name = input.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let digest = {
        use sha2::{Digest, Sha256};
        let bytes = std::fs::read(input)?;
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect::<String>()
    };
    let mut run = RunDir::create(
        cfg,
        "reconstruct",
        json!({ "input": input_name, "input_sha256": digest, "truth": truth_spec, "threshold": threshold }),
    )?;
    run.write_json("state.json", &OperatorDoc::from_operator(report.state(), Some(cfg.params()?)))?;
    run.write_json("reconstruct.json", &report)?;
    run.finish()
}

pub fn evolve(cfg: &RunConfig, state_spec: &str, times: &[f64], liouville: bool) -> Result<PathBuf> {
    let state = parse_state(state_spec, cfg)?;
    let w = state.operator();
    let frame = cfg.frame()?;
    // H is diagonal in the number basis, so the support (and the grid) is time independent
    let grid = cfg.grid_for(&frame, levels_of(&state))?;
    phasekit::frame::require_adequate(&frame, &grid, levels_of(&state))?;
    let series = density_series(&w, &frame, &grid, times)?;
    let transport: Vec<LiouvilleReport> = if liouville {
        times.iter().map(|&t| liouville_match(&w, &frame, &grid, t)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut run =
        RunDir::create(cfg, "evolve", json!({ "state": state_spec, "times": times, "liouville": liouville }))?;
    run.write_with("evolve.csv", |out| {
        writeln!(out, "t,q,p,rho")?;
        for (t, rho) in times.iter().zip(&series) {
            for (k, v) in rho.values.iter().enumerate() {
                let (q, p) = grid.point(k);
                writeln!(out, "{t},{q},{p},{v:e}")?;
            }
        }
        Ok(())
    })?;
    let summaries: Vec<_> =
        times.iter().zip(&series).map(|(t, rho)| json!({ "t": t, "summary": FieldSummary::of(rho) })).collect();
    run.write_json(
        "evolve.json",
        &json!({ "state": state_spec, "grid": grid, "series": summaries, "liouville": transport }),
    )?;
    run.finish()
}

pub fn bargmann(cfg: &RunConfig, state_spec: &str) -> Result<PathBuf> {
    let state = parse_state(state_spec, cfg)?;
    let psi = state.vector()?;
    let frame = cfg.frame()?;
    let coeffs = bargmann_transform(psi, &frame)?;
    let norm = bargmann_norm_sqr(&coeffs);
    let cr = cauchy_riemann_residual(psi, &frame, 1.5, 0.02)?;
    let ops: Vec<_> = ["a", "adag", "h", "q", "p"]
        .iter()
        .map(|name| {
            let op: BargmannOp = name.parse()?;
            let r = bargmann_ops_check(op, psi, &frame)?;
            Ok(json!({ "op": name, "residual": r.residual, "truncated": r.truncated }))
        })
        .collect::<Result<_>>()?;
    let mut run = RunDir::create(cfg, "bargmann", json!({ "state": state_spec }))?;
    run.write_with("bargmann.csv", |w| {
        writeln!(w, "n,re,im")?;
        for (n, a) in coeffs.iter().enumerate() {
            writeln!(w, "{n},{:e},{:e}", a.re, a.im)?;
        }
        Ok(())
    })?;
    run.write_json(
        "bargmann.json",
        &json!({
            "state": state_spec,
            "norm_sqr": norm,
            "state_norm_sqr": psi.norm().powi(2),
            "cauchy_riemann": { "half": 1.5, "spacing": 0.02, "residual": cr },
            "operators": ops,
        }),
    )?;
    run.finish()
}
