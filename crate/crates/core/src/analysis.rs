//! Post-processing: exponential rate fits, linearised mode rates about the
//! constant steady state, and time-step refinement of the energy residual.

use nalgebra::Matrix3;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::functionals::DiagnosticsRow;
use crate::model::Params;
use crate::solver::run;

/// Samples at or below `FIT_FLOOR * values[0]` are dropped before fitting.
pub const FIT_FLOOR: f64 = 1e-14;
pub const FIT_MIN_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// `value ~ amplitude * exp(-rate * t)`
    pub rate: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Least-squares line through `(t, ln value)` over the trailing
/// `window_fraction` of the samples that survive the floor.
pub fn fit_decay(times: &[f64], values: &[f64], window_fraction: f64) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::Fit(format!("{} times but {} values", times.len(), values.len())));
    }
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::Fit(format!("window fraction {window_fraction} not in (0, 1]")));
    }
    let Some(&first) = values.first() else {
        return Err(Error::InsufficientSamples {
            needed: FIT_MIN_SAMPLES,
            got: 0,
        });
    };
    if !(first > 0.0 && first.is_finite()) {
        return Err(Error::Fit(format!("initial value {first} is not positive")));
    }
    let floor = FIT_FLOOR * first;
    let kept: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, &v)| !(v <= floor))
        .map(|(&t, &v)| (t, v))
        .collect();
    let n = ((kept.len() as f64) * window_fraction).ceil() as usize;
    let window = &kept[kept.len() - n.min(kept.len())..];
    if window.len() < FIT_MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: FIT_MIN_SAMPLES,
            got: window.len(),
        });
    }
    if let Some(&(t, v)) = window.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Fit(format!("value {v} at t = {t} is not positive")));
    }

    let m = window.len() as f64;
    let t_mean = window.iter().map(|(t, _)| t).sum::<f64>() / m;
    let y_mean = window.iter().map(|(_, v)| v.ln()).sum::<f64>() / m;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, v) in window {
        let (dt, dy) = (t - t_mean, v.ln() - y_mean);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if !(stt > 0.0) {
        return Err(Error::Fit("all samples share one time".into()));
    }
    let slope = sty / stt;
    let intercept = y_mean - slope * t_mean;
    let r_squared = if syy > 0.0 {
        (sty * sty / (stt * syy)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(DecayFit {
        rate: -slope,
        amplitude: intercept.exp(),
        r_squared,
        window: (window[0].0, window[window.len() - 1].0),
        samples: window.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeRates {
    pub k2: f64,
    /// Real parts, descending.
    pub eigen_real_parts: [f64; 3],
    /// Matching imaginary parts.
    pub eigen_imag_parts: [f64; 3],
}

impl ModeRates {
    /// Decay rate of the least-damped branch.
    pub fn slowest_rate(&self) -> f64 {
        -self.eigen_real_parts[0]
    }

    /// Relative gap between the two slowest branches.
    pub fn separation(&self) -> f64 {
        let (a, b) = (self.eigen_real_parts[0], self.eigen_real_parts[1]);
        (a - b).abs() / a.abs().max(f64::MIN_POSITIVE)
    }

    pub fn slowest_is_real(&self) -> bool {
        self.eigen_imag_parts[0] == 0.0
    }
}

/// Jacobian of the system about `(ubar, alpha ubar / beta, gamma ubar / delta)`
/// on a Laplacian mode with eigenvalue `-k2`.
pub fn linearized_matrix(p: &Params, ubar: f64, k2: f64) -> Matrix3<f64> {
    Matrix3::new(
        -k2,
        p.chi * ubar * k2,
        -p.xi * ubar * k2,
        p.alpha,
        -p.d1 * k2 - p.beta,
        0.0,
        p.gamma,
        0.0,
        -p.d2 * k2 - p.delta,
    )
}

pub fn linearized_rates(p: &Params, ubar: f64, k2: f64) -> ModeRates {
    let mut eig: Vec<(f64, f64)> = if k2 == 0.0 {
        vec![(0.0, 0.0), (-p.beta, 0.0), (-p.delta, 0.0)]
    } else {
        let m = linearized_matrix(p, ubar, k2);
        m.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
    };
    // conjugate pairs of a real matrix: snap tiny imaginary parts of real roots
    let scale = eig.iter().map(|(r, i)| r.hypot(*i)).fold(0.0, f64::max);
    for e in &mut eig {
        if e.1.abs() <= 1e-14 * scale {
            e.1 = 0.0;
        }
    }
    eig.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    ModeRates {
        k2,
        eigen_real_parts: [eig[0].0, eig[1].0, eig[2].0],
        eigen_imag_parts: [eig[0].1, eig[1].1, eig[2].1],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementLevel {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub dt: f64,
    pub record_every: f64,
    pub max_residual: f64,
    /// `log2(previous / current)`; absent on the first level.
    pub observed_order: Option<f64>,
}

pub fn max_residual(rows: &[DiagnosticsRow]) -> f64 {
    rows.iter().skip(1).map(|r| r.residual).fold(0.0, f64::max)
}

/// Reruns `base` with `dt_max` and `record_every` halved at each level (and
/// the grid doubled when `refine_space`), reporting the largest energy
/// residual per level.
pub fn refinement_study(base: &RunConfig, levels: usize, refine_space: bool) -> Result<Vec<RefinementLevel>> {
    if levels < 2 {
        return Err(Error::InvalidParameter {
            name: "levels",
            value: levels as f64,
            rule: "at least 2 levels are needed",
        });
    }
    let mut out: Vec<RefinementLevel> = Vec::with_capacity(levels);
    for level in 0..levels {
        let scale = (1u64 << level) as f64;
        let mut cfg = base.clone();
        cfg.solver.dt_max = base.solver.dt_max / scale;
        cfg.solver.record_every = base.solver.record_every / scale;
        if refine_space {
            cfg.grid = crate::grid::Grid::new(
                base.grid.nx() << level,
                base.grid.ny() << level,
                base.grid.lx(),
                base.grid.ly(),
            )?;
        }
        let init = crate::config::make_init(&cfg)?;
        let mut rows = Vec::new();
        run(init, &cfg.params, &cfg.solver, &mut rows)?;
        let res = max_residual(&rows);
        let observed_order = out.last().map(|prev| (prev.max_residual / res).log2());
        out.push(RefinementLevel {
            nx: cfg.grid.nx(),
            ny: cfg.grid.ny(),
            h: cfg.grid.hx().max(cfg.grid.hy()),
            dt: cfg.solver.dt_max,
            record_every: cfg.solver.record_every,
            max_residual: res,
            observed_order,
        });
    }
    Ok(out)
}
