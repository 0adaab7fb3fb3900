//! Flat `key = value` run configuration and deterministic initial data.
//!
//! ```text
//! # reference run
//! params.chi = 1.0
//! grid.nx = 64
//! solver.t_end = 50
//! init.kind = cosine_bump
//! ```
//!
//! Keys are namespaced by a dot, `#` starts a comment, unknown keys are
//! rejected and anything missing takes the default listed in [`KEYS`].

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::model::{steady_state, Params};
use crate::solver::{SolverConfig, State};

/// Every accepted key with its default.
pub const KEYS: &[(&str, &str)] = &[
    ("params.chi", "1"),
    ("params.xi", "2"),
    ("params.alpha", "1"),
    ("params.beta", "1"),
    ("params.gamma", "2"),
    ("params.delta", "1.2"),
    ("params.D1", "1"),
    ("params.D2", "1.5"),
    ("grid.nx", "64"),
    ("grid.ny", "64"),
    ("grid.Lx", "2"),
    ("grid.Ly", "2"),
    ("solver.t_end", "10"),
    ("solver.record_every", "0.1"),
    ("solver.dt_max", "record_every / 4"),
    ("solver.cfl_safety", "0.9"),
    ("solver.lin_tol", "1e-10"),
    ("solver.lin_maxiter", "2000"),
    ("init.kind", "cosine_bump"),
    ("init.ubar", "1"),
    ("init.amplitude", "0.5"),
    ("init.mode_m", "1"),
    ("init.mode_n", "0"),
    ("init.width", "0.25"),
    ("init.seed", "42"),
    ("init.lo", "0.5"),
    ("init.hi", "1.5"),
    ("init.v0", "steady value"),
    ("init.w0", "steady value"),
    ("output.dir", "none"),
    ("output.snapshot_every", "none"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Steady,
    CosineBump,
    GaussianBump,
    Random,
}

impl InitKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            InitKind::Steady => "steady",
            InitKind::CosineBump => "cosine_bump",
            InitKind::GaussianBump => "gaussian_bump",
            InitKind::Random => "random",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "steady" => InitKind::Steady,
            "cosine_bump" => InitKind::CosineBump,
            "gaussian_bump" => InitKind::GaussianBump,
            "random" => InitKind::Random,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitSpec {
    pub kind: InitKind,
    /// Mean density for the analytic profiles.
    pub ubar: f64,
    pub amplitude: f64,
    pub mode_m: usize,
    pub mode_n: usize,
    /// Gaussian standard deviation.
    pub width: f64,
    pub seed: u64,
    /// Range of the random profile.
    pub lo: f64,
    pub hi: f64,
    /// Constant chemical data replacing the steady values.
    pub v0: Option<f64>,
    pub w0: Option<f64>,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec {
            kind: InitKind::CosineBump,
            ubar: 1.0,
            amplitude: 0.5,
            mode_m: 1,
            mode_n: 0,
            width: 0.25,
            seed: 42,
            lo: 0.5,
            hi: 1.5,
            v0: None,
            w0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub snapshot_every: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: Params,
    pub grid: Grid,
    pub solver: SolverConfig,
    pub init: InitSpec,
    pub output: OutputSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: Params::default(),
            grid: Grid::square(64, 2.0).expect("default grid"),
            solver: SolverConfig::new(10.0, 0.1),
            init: InitSpec::default(),
            output: OutputSpec::default(),
        }
    }
}

/// Raw values collected before validation; grid and dt depend on several keys.
#[derive(Debug, Default)]
struct Pending {
    nx: Option<usize>,
    ny: Option<usize>,
    lx: Option<f64>,
    ly: Option<f64>,
    dt_max: Option<f64>,
}

fn parse_f64(key: &str, value: &str) -> std::result::Result<f64, String> {
    let v: f64 = value.parse().map_err(|_| format!("{key}: '{value}' is not a number"))?;
    if !v.is_finite() {
        return Err(format!("{key}: '{value}' is not finite"));
    }
    Ok(v)
}

fn parse_positive(key: &str, value: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(key, value)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{key} = {value} must be strictly positive"))
    }
}

fn parse_usize(key: &str, value: &str) -> std::result::Result<usize, String> {
    value
        .parse()
        .map_err(|_| format!("{key}: '{value}' is not a nonnegative integer"))
}

impl RunConfig {
    /// Parses configuration text; keys not present keep their defaults.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut pending = Pending::default();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(line_no, format!("expected 'key = value', got '{line}'")));
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(Error::config(line_no, format!("expected 'key = value', got '{line}'")));
            }
            if let Some(first) = seen.insert(key.to_string(), line_no) {
                return Err(Error::config(
                    line_no,
                    format!("duplicate key {key} (first set on line {first})"),
                ));
            }
            cfg.apply(key, value, &mut pending)
                .map_err(|m| Error::config(line_no, m))?;
        }
        let grid_line = ["grid.nx", "grid.ny", "grid.Lx", "grid.Ly"]
            .iter()
            .filter_map(|k| seen.get(*k).copied())
            .max()
            .unwrap_or(0);
        cfg.finish(pending).map_err(|m| Error::config(grid_line, m))?;
        Ok(cfg)
    }

    /// Overrides one key, as in a sweep.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut pending = Pending {
            nx: Some(self.grid.nx()),
            ny: Some(self.grid.ny()),
            lx: Some(self.grid.lx()),
            ly: Some(self.grid.ly()),
            dt_max: Some(self.solver.dt_max),
        };
        let dt_was_default = self.solver.dt_max == self.solver.record_every / 4.0;
        self.apply(key, value, &mut pending).map_err(|m| Error::config(0, m))?;
        if key == "solver.record_every" && dt_was_default {
            pending.dt_max = None;
        }
        self.finish(pending).map_err(|m| Error::config(0, m))
    }

    fn apply(&mut self, key: &str, value: &str, pending: &mut Pending) -> std::result::Result<(), String> {
        let p = &mut self.params;
        let s = &mut self.solver;
        let i = &mut self.init;
        match key {
            "params.chi" => p.chi = parse_positive(key, value)?,
            "params.xi" => p.xi = parse_positive(key, value)?,
            "params.alpha" => p.alpha = parse_positive(key, value)?,
            "params.beta" => p.beta = parse_positive(key, value)?,
            "params.gamma" => p.gamma = parse_positive(key, value)?,
            "params.delta" => p.delta = parse_positive(key, value)?,
            "params.D1" => p.d1 = parse_positive(key, value)?,
            "params.D2" => p.d2 = parse_positive(key, value)?,
            "grid.nx" => pending.nx = Some(parse_usize(key, value)?),
            "grid.ny" => pending.ny = Some(parse_usize(key, value)?),
            "grid.Lx" => pending.lx = Some(parse_positive(key, value)?),
            "grid.Ly" => pending.ly = Some(parse_positive(key, value)?),
            "solver.t_end" => {
                let v = parse_f64(key, value)?;
                if v < 0.0 {
                    return Err(format!("{key} = {value} must be nonnegative"));
                }
                s.t_end = v;
            }
            "solver.record_every" => s.record_every = parse_positive(key, value)?,
            "solver.dt_max" => pending.dt_max = Some(parse_positive(key, value)?),
            "solver.cfl_safety" => {
                let v = parse_positive(key, value)?;
                if v > 1.0 {
                    return Err(format!("{key} = {value} must lie in (0, 1]"));
                }
                s.cfl_safety = v;
            }
            "solver.lin_tol" => {
                let v = parse_positive(key, value)?;
                if v > 1e-8 {
                    return Err(format!("{key} = {value} must not exceed 1e-8"));
                }
                s.lin_tol = v;
            }
            "solver.lin_maxiter" => {
                let v = parse_usize(key, value)?;
                if v == 0 {
                    return Err(format!("{key} must be at least 1"));
                }
                s.lin_maxiter = v;
            }
            "init.kind" => {
                i.kind = InitKind::parse(value).ok_or_else(|| {
                    format!("{key}: '{value}' is not one of steady, cosine_bump, gaussian_bump, random")
                })?
            }
            "init.ubar" => i.ubar = parse_positive(key, value)?,
            "init.amplitude" => i.amplitude = parse_f64(key, value)?,
            "init.mode_m" => i.mode_m = parse_usize(key, value)?,
            "init.mode_n" => i.mode_n = parse_usize(key, value)?,
            "init.width" => i.width = parse_positive(key, value)?,
            "init.seed" => {
                i.seed = value
                    .parse()
                    .map_err(|_| format!("{key}: '{value}' is not an unsigned integer"))?
            }
            "init.lo" => {
                let v = parse_f64(key, value)?;
                if v < 0.0 {
                    return Err(format!("{key} = {value} must be nonnegative"));
                }
                i.lo = v;
            }
            "init.hi" => i.hi = parse_positive(key, value)?,
            "init.v0" | "init.w0" => {
                let v = parse_f64(key, value)?;
                if v < 0.0 {
                    return Err(format!("{key} = {value} must be nonnegative"));
                }
                if key == "init.v0" {
                    i.v0 = Some(v);
                } else {
                    i.w0 = Some(v);
                }
            }
            "output.dir" => self.output.dir = Some(PathBuf::from(value)),
            "output.snapshot_every" => self.output.snapshot_every = Some(parse_positive(key, value)?),
            _ => return Err(format!("unknown key {key}")),
        }
        Ok(())
    }

    fn finish(&mut self, pending: Pending) -> std::result::Result<(), String> {
        self.grid = Grid::new(
            pending.nx.unwrap_or(self.grid.nx()),
            pending.ny.unwrap_or(self.grid.ny()),
            pending.lx.unwrap_or(self.grid.lx()),
            pending.ly.unwrap_or(self.grid.ly()),
        )
        .map_err(|e| e.to_string())?;
        self.solver.dt_max = pending.dt_max.unwrap_or(self.solver.record_every / 4.0);
        if self.init.hi < self.init.lo {
            return Err(format!(
                "init.hi = {} is below init.lo = {}",
                self.init.hi, self.init.lo
            ));
        }
        Ok(())
    }

    /// Serialises every key; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let s = &self.solver;
        let i = &self.init;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("params.chi", p.chi.to_string());
        kv("params.xi", p.xi.to_string());
        kv("params.alpha", p.alpha.to_string());
        kv("params.beta", p.beta.to_string());
        kv("params.gamma", p.gamma.to_string());
        kv("params.delta", p.delta.to_string());
        kv("params.D1", p.d1.to_string());
        kv("params.D2", p.d2.to_string());
        kv("grid.nx", self.grid.nx().to_string());
        kv("grid.ny", self.grid.ny().to_string());
        kv("grid.Lx", self.grid.lx().to_string());
        kv("grid.Ly", self.grid.ly().to_string());
        kv("solver.t_end", s.t_end.to_string());
        kv("solver.record_every", s.record_every.to_string());
        kv("solver.dt_max", s.dt_max.to_string());
        kv("solver.cfl_safety", s.cfl_safety.to_string());
        kv("solver.lin_tol", s.lin_tol.to_string());
        kv("solver.lin_maxiter", s.lin_maxiter.to_string());
        kv("init.kind", i.kind.as_str().to_string());
        kv("init.ubar", i.ubar.to_string());
        kv("init.amplitude", i.amplitude.to_string());
        kv("init.mode_m", i.mode_m.to_string());
        kv("init.mode_n", i.mode_n.to_string());
        kv("init.width", i.width.to_string());
        kv("init.seed", i.seed.to_string());
        kv("init.lo", i.lo.to_string());
        kv("init.hi", i.hi.to_string());
        if let Some(v) = i.v0 {
            kv("init.v0", v.to_string());
        }
        if let Some(w) = i.w0 {
            kv("init.w0", w.to_string());
        }
        if let Some(d) = &self.output.dir {
            kv("output.dir", d.display().to_string());
        }
        if let Some(e) = self.output.snapshot_every {
            kv("output.snapshot_every", e.to_string());
        }
        out
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    RunConfig::parse(text)
}

/// Uniform deviates in `[0, 1)` from the top 53 bits of a SplitMix64 stream.
pub struct UniformStream(SplitMix64);

impl UniformStream {
    pub fn new(seed: u64) -> Self {
        UniformStream(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Builds the initial state described by `cfg.init` on `cfg.grid`.
pub fn make_init(cfg: &RunConfig) -> Result<State> {
    let g = cfg.grid;
    let i = &cfg.init;
    let (lx, ly) = (g.lx(), g.ly());
    let pi = std::f64::consts::PI;
    let u = match i.kind {
        InitKind::Steady => ScalarField::constant(g, i.ubar),
        InitKind::CosineBump => {
            if !(i.amplitude.abs() < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "init.amplitude",
                    value: i.amplitude,
                    rule: "|amplitude| must be below 1 for a nonnegative cosine bump",
                });
            }
            let (m, n) = (i.mode_m as f64, i.mode_n as f64);
            ScalarField::from_fn(g, |x, y| {
                i.ubar * (1.0 + i.amplitude * (m * pi * x / lx).cos() * (n * pi * y / ly).cos())
            })
        }
        InitKind::GaussianBump => {
            if !(i.amplitude > -1.0) {
                return Err(Error::InvalidParameter {
                    name: "init.amplitude",
                    value: i.amplitude,
                    rule: "amplitude must exceed -1 for a nonnegative gaussian bump",
                });
            }
            let two_w2 = 2.0 * i.width * i.width;
            ScalarField::from_fn(g, |x, y| {
                let r2 = (x - 0.5 * lx).powi(2) + (y - 0.5 * ly).powi(2);
                i.ubar * (1.0 + i.amplitude * (-r2 / two_w2).exp())
            })
        }
        InitKind::Random => {
            let mut rng = UniformStream::new(i.seed);
            let span = i.hi - i.lo;
            ScalarField::from_fn(g, |_, _| i.lo + span * rng.next_f64())
        }
    };
    let mass = crate::grid::integrate(&u);
    if !(mass > 0.0) {
        return Err(Error::ZeroMass);
    }
    let (_, vs, ws) = steady_state(&cfg.params, mass, g.area());
    Ok(State {
        v: ScalarField::constant(g, i.v0.unwrap_or(vs)),
        w: ScalarField::constant(g, i.w0.unwrap_or(ws)),
        u,
        t: 0.0,
    })
}
