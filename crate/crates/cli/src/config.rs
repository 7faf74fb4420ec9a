//! Run configuration: TOML file values overridden by command-line flags.

use std::path::{Path, PathBuf};

use phasekit::fock::{random_density, random_unit_vector, FockVector, Operator, OscParams};
use phasekit::frame::{auto_grid, coherent_overlaps, FrameSpec};
use phasekit::grid::PhaseGrid;
use phasekit::io::read_operator;
use phasekit::linalg::trusted_block;
use phasekit::{PhaseError, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_DIM: usize = 32;
pub const DEFAULT_SPACING: f64 = 0.05;
pub const DEFAULT_SEED: u64 = 0;

/// Keys accepted in a config file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub m: Option<f64>,
    pub omega: Option<f64>,
    pub sigma: Option<f64>,
    pub dim: Option<usize>,
    pub spacing: Option<f64>,
    pub grid: Option<String>,
    pub generator: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| PhaseError::Parse(format!("{}: {e}", path.display())))
    }
}

/// Flag values; `None` leaves the file (or default) value in place.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub m: Option<f64>,
    pub omega: Option<f64>,
    pub sigma: Option<f64>,
    pub dim: Option<usize>,
    pub spacing: Option<f64>,
    pub grid: Option<String>,
    pub generator: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GridSpec {
    Auto,
    Off,
    Half { half: f64 },
    Bounds { q_min: f64, q_max: f64, p_min: f64, p_max: f64 },
}

impl std::str::FromStr for GridSpec {
    type Err = PhaseError;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "auto" => return Ok(Self::Auto),
            "off" => return Ok(Self::Off),
            _ => {}
        }
        let nums: Vec<f64> = s
            .split(':')
            .map(|t| t.trim().parse::<f64>().map_err(|_| PhaseError::Parse(format!("bad grid spec '{s}'"))))
            .collect::<Result<_>>()?;
        match nums[..] {
            [h] if h > 0.0 && h.is_finite() => Ok(Self::Half { half: h }),
            [q_min, q_max, p_min, p_max] if q_min < q_max && p_min < p_max => {
                Ok(Self::Bounds { q_min, q_max, p_min, p_max })
            }
            _ => Err(PhaseError::Parse(format!("bad grid spec '{s}' (auto, off, H or qmin:qmax:pmin:pmax)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Coherent,
    FockMixture { weights: Vec<f64> },
    MatrixFile { path: PathBuf },
}

impl std::str::FromStr for GeneratorSpec {
    type Err = PhaseError;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "coherent" {
            return Ok(Self::Coherent);
        }
        if let Some(rest) = s.strip_prefix("fock_mixture:") {
            let weights = parse_list(rest)?;
            return Ok(Self::FockMixture { weights });
        }
        if let Some(rest) = s.strip_prefix("matrix_file:") {
            return Ok(Self::MatrixFile { path: PathBuf::from(rest) });
        }
        Err(PhaseError::Parse(format!("bad generator '{s}' (coherent, fock_mixture:w0,w1,.. or matrix_file:PATH)")))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| PhaseError::Parse(format!("bad number '{t}'")))).collect()
}

/// Fully resolved configuration. Serialized into the manifest and hashed.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub m: f64,
    pub omega: f64,
    pub sigma: f64,
    pub dim: usize,
    pub spacing: f64,
    pub grid: GridSpec,
    pub generator: GeneratorSpec,
    #[serde(skip)]
    pub out: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    pub fn resolve(file: FileConfig, flags: Overrides) -> Result<Self> {
        let m = flags.m.or(file.m).unwrap_or(1.0);
        let omega = flags.omega.or(file.omega).unwrap_or(1.0);
        let matched = OscParams::matched(m, omega)?;
        let sigma = flags.sigma.or(file.sigma).unwrap_or(matched.sigma);
        let dim = flags.dim.or(file.dim).unwrap_or(DEFAULT_DIM);
        if dim < 2 {
            return Err(PhaseError::TruncationTooSmall(dim));
        }
        let spacing = flags.spacing.or(file.spacing).unwrap_or(DEFAULT_SPACING);
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(PhaseError::InvalidParams(format!("spacing must be positive, got {spacing}")));
        }
        let grid = match flags.grid.or(file.grid) {
            Some(s) => s.parse()?,
            None => GridSpec::Auto,
        };
        let generator = match flags.generator.or(file.generator) {
            Some(s) => s.parse()?,
            None => GeneratorSpec::Coherent,
        };
        let cfg = Self {
            m,
            omega,
            sigma,
            dim,
            spacing,
            grid,
            generator,
            out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from("phasekit-out")),
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        };
        cfg.params()?;
        Ok(cfg)
    }

    pub fn params(&self) -> Result<OscParams> {
        OscParams::new(self.m, self.omega, self.sigma)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Frame at the configured truncation.
    pub fn frame(&self) -> Result<FrameSpec> {
        self.frame_at(self.dim)
    }

    pub fn frame_at(&self, dim: usize) -> Result<FrameSpec> {
        let params = self.params()?;
        match &self.generator {
            GeneratorSpec::Coherent => FrameSpec::coherent(params, dim),
            GeneratorSpec::FockMixture { weights } => FrameSpec::fock_mixture(params, dim, weights),
            GeneratorSpec::MatrixFile { path } => FrameSpec::mixed(params, read_operator(path)?.embed(dim)?),
        }
    }

    /// Sampling grid for a state occupying the first `levels` basis levels.
    ///
    /// `off` disables the boundary-decay sizing and leaves only the cell at
    /// the origin, which no state passes; it exists to exercise the
    /// inadequate-grid path.
    pub fn grid_for(&self, frame: &FrameSpec, levels: usize) -> Result<PhaseGrid> {
        match self.grid {
            GridSpec::Auto => auto_grid(frame, self.spacing, levels),
            GridSpec::Off => PhaseGrid::symmetric(self.spacing, self.spacing, self.spacing),
            GridSpec::Half { half } => PhaseGrid::symmetric(half, half, self.spacing),
            GridSpec::Bounds { q_min, q_max, p_min, p_max } => {
                PhaseGrid::from_bounds(q_min, q_max, p_min, p_max, self.spacing)
            }
        }
    }
}

/// A state named on the command line.
#[derive(Debug, Clone)]
pub enum State {
    Pure(FockVector),
    Mixed(Operator),
}

impl State {
    pub fn operator(&self) -> Operator {
        match self {
            State::Pure(v) => v.projector(),
            State::Mixed(w) => w.clone(),
        }
    }

    pub fn vector(&self) -> Result<&FockVector> {
        match self {
            State::Pure(v) => Ok(v),
            State::Mixed(_) => Err(PhaseError::MixedState),
        }
    }
}

/// `fock:n`, `coherent:q,p`, `random`, `random_pure` or `file:PATH` / `matrix_file:PATH`
/// (an operator JSON document).
///
/// Random states live on the trusted block and draw from the configured seed.
pub fn parse_state(spec: &str, cfg: &RunConfig) -> Result<State> {
    let d = cfg.dim;
    let spec = spec.trim();
    if let Some(n) = spec.strip_prefix("fock:") {
        let n: usize = n.parse().map_err(|_| PhaseError::Parse(format!("bad level in '{spec}'")))?;
        if n >= d {
            return Err(PhaseError::InvalidParams(format!("level {n} does not fit in D = {d}")));
        }
        return Ok(State::Pure(FockVector::basis(n, d)));
    }
    if let Some(rest) = spec.strip_prefix("coherent:") {
        let v = parse_list(rest)?;
        let [q, p] = v[..] else {
            return Err(PhaseError::Parse(format!("coherent state needs q,p: '{spec}'")));
        };
        let params = OscParams::matched(cfg.m, cfg.omega)?;
        if !phasekit::displacement::in_trusted_region(q, p, &params, d) {
            return Err(PhaseError::Truncation(format!("|z|² at ({q}, {p}) exceeds D/4")));
        }
        return Ok(State::Pure(coherent_overlaps(q, p, &params, d).normalized()));
    }
    if spec == "random" {
        return Ok(State::Mixed(random_density(&mut cfg.rng(), d, trusted_block(d))));
    }
    if spec == "random_pure" {
        return Ok(State::Pure(random_unit_vector(&mut cfg.rng(), d, trusted_block(d))));
    }
    if let Some(path) = spec.strip_prefix("file:").or_else(|| spec.strip_prefix("matrix_file:")) {
        let w = read_operator(Path::new(path))?.embed(d)?;
        phasekit::fock::require_density(&w)?;
        return Ok(State::Mixed(w));
    }
    Err(PhaseError::Parse(format!("bad state '{spec}' (fock:n, coherent:q,p, random, random_pure or file:PATH)")))
}

/// One past the highest occupied level of a state.
pub fn levels_of(state: &State) -> usize {
    match state {
        State::Pure(v) => v.support_levels(),
        State::Mixed(w) => w.support_dim(0.0).max(1),
    }
}
