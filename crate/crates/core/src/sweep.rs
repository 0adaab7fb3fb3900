//! Runs that write to an output directory, and parameter sweeps over them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{make_init, RunConfig};
use crate::error::{Error, Result};
use crate::output::{fmt_f64, save_snapshot, CsvSink};
use crate::solver::{Simulation, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Normal,
    Blowup,
    Error,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Normal => "normal",
            RunStatus::Blowup => "blowup",
            RunStatus::Error => "error",
        }
    }
}

impl From<Termination> for RunStatus {
    fn from(t: Termination) -> Self {
        match t {
            Termination::Normal => RunStatus::Normal,
            Termination::Blowup => RunStatus::Blowup,
        }
    }
}

/// End-of-run report, also written as `summary.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub status: RunStatus,
    pub t_final: f64,
    pub steps: u64,
    pub rejected_steps: u64,
    pub records: usize,
    pub mass_initial: f64,
    pub mass_final: f64,
    pub linf_u: f64,
    pub linf_v: f64,
    pub linf_w: f64,
    pub message: String,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "status = {}", self.status.as_str());
        let _ = writeln!(s, "t_final = {}", fmt_f64(self.t_final));
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "rejected_steps = {}", self.rejected_steps);
        let _ = writeln!(s, "records = {}", self.records);
        let _ = writeln!(s, "mass_initial = {}", fmt_f64(self.mass_initial));
        let _ = writeln!(s, "mass_final = {}", fmt_f64(self.mass_final));
        let _ = writeln!(s, "linf_u = {}", fmt_f64(self.linf_u));
        let _ = writeln!(s, "linf_v = {}", fmt_f64(self.linf_v));
        let _ = writeln!(s, "linf_w = {}", fmt_f64(self.linf_w));
        if !self.message.is_empty() {
            let _ = writeln!(s, "message = {}", self.message);
        }
        s
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs `cfg` writing `diagnostics.csv`, optional `snapshot_NNNNN.txt`,
/// `final.txt`, `config.txt` and `summary.txt` into `dir`.
///
/// Solver failures still produce a summary with status `error`; they are
/// returned as `Ok` so the caller can map them to an exit code.
pub fn run_to_dir(cfg: &RunConfig, dir: &Path) -> Result<RunSummary> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("config.txt"), &cfg.to_text())?;
    let init = make_init(cfg)?;
    let mass_initial = init.mass();
    let mut sim = Simulation::new(init, cfg.params, cfg.solver)?;
    let mut csv = CsvSink::create(dir.join("diagnostics.csv"))?;

    let t_end = cfg.solver.t_end;
    let mut snap_index = 0u64;
    let outcome: Result<Termination>;
    if let Some(every) = cfg.output.snapshot_every {
        save_snapshot(dir.join(format!("snapshot_{snap_index:05}.txt")), sim.state())?;
        snap_index += 1;
        loop {
            let target = (snap_index as f64 * every).min(t_end);
            match sim.advance_to(target, &mut csv) {
                Ok(status) => {
                    save_snapshot(dir.join(format!("snapshot_{snap_index:05}.txt")), sim.state())?;
                    snap_index += 1;
                    if let Some(st) = status {
                        outcome = Ok(st);
                        break;
                    }
                }
                Err(e) => {
                    outcome = Err(e);
                    break;
                }
            }
        }
    } else {
        outcome = sim
            .advance_to(t_end, &mut csv)
            .map(|s| s.unwrap_or(Termination::Normal));
    }
    let records = csv.rows();
    csv.finish()?;
    save_snapshot(dir.join("final.txt"), sim.state())?;

    let (ubar, vs, ws) = sim.steady();
    let s = sim.state();
    let (status, message) = match outcome {
        Ok(t) => (RunStatus::from(t), String::new()),
        Err(e) => (RunStatus::Error, e.to_string()),
    };
    let summary = RunSummary {
        status,
        t_final: s.t,
        steps: sim.steps(),
        rejected_steps: sim.rejected_steps(),
        records,
        mass_initial,
        mass_final: s.mass(),
        linf_u: s.u.linf_distance(ubar),
        linf_v: s.v.linf_distance(vs),
        linf_w: s.w.linf_distance(ws),
        message,
    };
    write_file(&dir.join("summary.txt"), &summary.to_text())?;
    Ok(summary)
}

/// `key=start:end:count`, `count` evenly spaced values including both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Vary {
    pub key: String,
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl Vary {
    pub fn parse(spec: &str) -> Result<Vary> {
        let bad = || Error::Config {
            line: 0,
            message: format!("--vary '{spec}': expected key=start:end:count"),
        };
        let (key, range) = spec.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 || key.trim().is_empty() {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let end: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if count == 0 || (count == 1 && start != end) || !start.is_finite() || !end.is_finite() {
            return Err(bad());
        }
        Ok(Vary {
            key: key.trim().to_string(),
            start,
            end,
            count,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let n = (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                if k + 1 == self.count {
                    self.end
                } else {
                    self.start + (self.end - self.start) * (k as f64 / n)
                }
            })
            .collect()
    }
}

/// One grid point of a sweep; the last `Vary` changes fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub overrides: Vec<(String, f64)>,
}

pub fn sweep_points(varies: &[Vary]) -> Vec<SweepPoint> {
    let mut points = vec![Vec::new()];
    for v in varies {
        let vals = v.values();
        points = points
            .into_iter()
            .flat_map(|p: Vec<(String, f64)>| {
                vals.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push((v.key.clone(), x));
                    q
                })
            })
            .collect();
    }
    points
        .into_iter()
        .enumerate()
        .map(|(index, overrides)| SweepPoint { index, overrides })
        .collect()
}

pub fn point_config(base: &RunConfig, point: &SweepPoint) -> Result<RunConfig> {
    let mut cfg = base.clone();
    for (k, x) in &point.overrides {
        let integral = matches!(
            k.as_str(),
            "grid.nx" | "grid.ny" | "solver.lin_maxiter" | "init.mode_m" | "init.mode_n" | "init.seed"
        );
        let text = if integral && x.fract() == 0.0 && *x >= 0.0 {
            format!("{}", *x as u64)
        } else {
            format!("{x:?}")
        };
        cfg.set(k, &text)?;
    }
    cfg.output.dir = None;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub point: SweepPoint,
    pub summary: RunSummary,
}

pub fn point_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("point_{index:04}"))
}

fn run_point(base: &RunConfig, point: &SweepPoint, out: &Path) -> PointSummary {
    let dir = point_dir(out, point.index);
    let summary = point_config(base, point).and_then(|cfg| run_to_dir(&cfg, &dir));
    let summary = summary.unwrap_or_else(|e| RunSummary {
        status: RunStatus::Error,
        t_final: f64::NAN,
        steps: 0,
        rejected_steps: 0,
        records: 0,
        mass_initial: f64::NAN,
        mass_final: f64::NAN,
        linf_u: f64::NAN,
        linf_v: f64::NAN,
        linf_w: f64::NAN,
        message: e.to_string(),
    });
    PointSummary {
        point: point.clone(),
        summary,
    }
}

/// Runs `points` on `jobs` worker threads, each owning its point directory,
/// and writes `summary.csv` ordered by point index.
pub fn run_sweep(
    base: &RunConfig,
    varies: &[Vary],
    points: &[SweepPoint],
    out: &Path,
    jobs: usize,
) -> Result<Vec<PointSummary>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config {
            line: 0,
            message: format!("cannot build worker pool: {e}"),
        })?;
    let mut results: Vec<PointSummary> = pool.install(|| points.par_iter().map(|p| run_point(base, p, out)).collect());
    results.sort_by_key(|r| r.point.index);
    write_file(&out.join("summary.csv"), &summary_csv(varies, &results))?;
    Ok(results)
}

pub fn summary_csv(varies: &[Vary], results: &[PointSummary]) -> String {
    let mut s = String::from("index");
    for v in varies {
        s.push(',');
        s.push_str(&v.key);
    }
    s.push_str(",status,t_final,steps,rejected_steps,mass_drift,linf_u,linf_v,linf_w\n");
    for r in results {
        let _ = write!(s, "{}", r.point.index);
        for (_, x) in &r.point.overrides {
            let _ = write!(s, ",{}", fmt_f64(*x));
        }
        let m = &r.summary;
        let drift = (m.mass_final - m.mass_initial).abs() / m.mass_initial;
        let _ = writeln!(
            s,
            ",{},{},{},{},{},{},{},{}",
            m.status.as_str(),
            fmt_f64(m.t_final),
            m.steps,
            m.rejected_steps,
            fmt_f64(drift),
            fmt_f64(m.linf_u),
            fmt_f64(m.linf_v),
            fmt_f64(m.linf_w)
        );
    }
    s
}
