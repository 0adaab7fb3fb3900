//! IMEX time stepping.
//!
//! Each step updates the chemicals first with backward Euler, then moves `u`
//! with explicit upwind transport in the fresh chemical gradients followed by
//! an implicit diffusion solve. Transport is a convex combination under the
//! outflow limit and the implicit operators are M-matrices, so all three
//! fields stay nonnegative without clipping.

use crate::error::{Error, Result};
use crate::functionals::{envelope_update, DiagnosticsRow, Recorder};
use crate::grid::{chemotactic_div, integrate, Grid, ScalarField};
use crate::linsolve::{solve, ShiftedLaplacian};
use crate::model::{steady_state, Params};

/// Negative values below `-NEGATIVITY_TOL * max` abort the run.
pub const NEGATIVITY_TOL: f64 = 1e-13;
/// Growth of `max u` over its initial value treated as blow-up.
pub const BLOWUP_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: ScalarField,
    pub v: ScalarField,
    pub w: ScalarField,
    pub t: f64,
}

impl State {
    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn mass(&self) -> f64 {
        integrate(&self.u)
    }

    /// Constant steady state with mean density `ubar`.
    pub fn steady(grid: Grid, p: &Params, ubar: f64) -> State {
        let (u, v, w) = steady_state(p, ubar, 1.0);
        State {
            u: ScalarField::constant(grid, u),
            v: ScalarField::constant(grid, v),
            w: ScalarField::constant(grid, w),
            t: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt_max: f64,
    pub cfl_safety: f64,
    pub lin_tol: f64,
    pub lin_maxiter: usize,
    pub t_end: f64,
    pub record_every: f64,
}

impl SolverConfig {
    /// Defaults with `dt_max = record_every / 4`.
    pub fn new(t_end: f64, record_every: f64) -> Self {
        SolverConfig {
            dt_max: record_every / 4.0,
            cfl_safety: 0.9,
            lin_tol: 1e-10,
            lin_maxiter: 2000,
            t_end,
            record_every,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    value,
                    rule: "must be finite and strictly positive",
                })
            }
        };
        positive("dt_max", self.dt_max)?;
        positive("cfl_safety", self.cfl_safety)?;
        positive("lin_tol", self.lin_tol)?;
        positive("record_every", self.record_every)?;
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                value: self.t_end,
                rule: "must be finite and nonnegative",
            });
        }
        if self.cfl_safety > 1.0 {
            return Err(Error::InvalidParameter {
                name: "cfl_safety",
                value: self.cfl_safety,
                rule: "must not exceed 1",
            });
        }
        if self.lin_tol > 1e-8 {
            return Err(Error::InvalidParameter {
                name: "lin_tol",
                value: self.lin_tol,
                rule: "must not exceed 1e-8",
            });
        }
        if self.lin_maxiter == 0 {
            return Err(Error::InvalidParameter {
                name: "lin_maxiter",
                value: 0.0,
                rule: "must be at least 1",
            });
        }
        Ok(())
    }
}

/// Largest per-cell outflow rate `sum over outgoing faces |velocity| / h` of the
/// split transport, attraction velocity `chi grad v` and repulsion velocity
/// `-xi grad w` counted separately.
pub fn transport_outflow_rate(v: &ScalarField, w: &ScalarField, p: &Params) -> f64 {
    let g = *v.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let (hx, hy) = (g.hx(), g.hy());
    let (vv, wv) = (v.values(), w.values());
    let mut out = vec![0.0f64; g.len()];
    let mut add = |lo: usize, hi: usize, h: f64| {
        for vel in [p.chi * (vv[hi] - vv[lo]) / h, -p.xi * (wv[hi] - wv[lo]) / h] {
            if vel > 0.0 {
                out[lo] += vel / h;
            } else if vel < 0.0 {
                out[hi] -= vel / h;
            }
        }
    };
    for j in 0..ny {
        for i in 1..nx {
            add(j * nx + i - 1, j * nx + i, hx);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            add((j - 1) * nx + i, j * nx + i, hy);
        }
    }
    out.into_iter().fold(0.0, f64::max)
}

/// Transport-limited step `min(cfl_safety / rate, dt_max)`.
pub fn cfl_dt(s: &State, p: &Params, cfg: &SolverConfig) -> f64 {
    let rate = transport_outflow_rate(&s.v, &s.w, p);
    if rate > 0.0 {
        (cfg.cfl_safety / rate).min(cfg.dt_max)
    } else {
        cfg.dt_max
    }
}

fn check_sign(field: &ScalarField, name: &'static str) -> Result<()> {
    if !field.is_finite() {
        return Err(Error::NonFinite(name));
    }
    let (min, max) = (field.min(), field.max());
    if min < -NEGATIVITY_TOL * max.abs() {
        return Err(Error::Positivity { field: name, min, max });
    }
    Ok(())
}

/// Advances `s` by `dt`. Fails with [`Error::CflViolation`] when `dt` exceeds
/// the positivity limit of the transport in the updated chemical fields.
pub fn step(s: &State, p: &Params, dt: f64, cfg: &SolverConfig) -> Result<State> {
    let g = *s.grid();
    let (tol, maxit) = (cfg.lin_tol, cfg.lin_maxiter);

    let rhs_v = s.v.lincomb(1.0, &s.u, dt * p.alpha);
    let op_v = ShiftedLaplacian::new(g, 1.0 + dt * p.beta, dt * p.d1);
    let (v_new, _) = solve(&op_v, rhs_v.values(), s.v.values(), tol, maxit, "v")?;
    let v_new = ScalarField::from_values(g, v_new)?;

    let rhs_w = s.w.lincomb(1.0, &s.u, dt * p.gamma);
    let op_w = ShiftedLaplacian::new(g, 1.0 + dt * p.delta, dt * p.d2);
    let (w_new, _) = solve(&op_w, rhs_w.values(), s.w.values(), tol, maxit, "w")?;
    let w_new = ScalarField::from_values(g, w_new)?;

    let rate = transport_outflow_rate(&v_new, &w_new, p);
    if dt * rate > 1.0 {
        return Err(Error::CflViolation { dt, limit: 1.0 / rate });
    }

    let attract = chemotactic_div(&s.u, &v_new, p.chi);
    let repel = chemotactic_div(&s.u, &w_new, -p.xi);
    let transport = attract.lincomb(1.0, &repel, 1.0);
    let u_explicit = s.u.lincomb(1.0, &transport, -dt);
    let op_u = ShiftedLaplacian::new(g, 1.0, dt);
    let (u_new, _) = solve(&op_u, u_explicit.values(), s.u.values(), tol, maxit, "u")?;
    let u_new = ScalarField::from_values(g, u_new)?;

    check_sign(&u_new, "u")?;
    check_sign(&v_new, "v")?;
    check_sign(&w_new, "w")?;
    Ok(State {
        u: u_new,
        v: v_new,
        w: w_new,
        t: s.t + dt,
    })
}

/// Consumer of diagnostics rows; receives the state each row was computed from.
pub trait DiagnosticsSink {
    fn record(&mut self, row: &DiagnosticsRow, state: &State) -> Result<()>;
}

impl DiagnosticsSink for Vec<DiagnosticsRow> {
    fn record(&mut self, row: &DiagnosticsRow, _: &State) -> Result<()> {
        self.push(row.clone());
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl DiagnosticsSink for NullSink {
    fn record(&mut self, _: &DiagnosticsRow, _: &State) -> Result<()> {
        Ok(())
    }
}

/// Wraps a closure as a sink.
pub struct FnSink<F>(pub F);

impl<F: FnMut(&DiagnosticsRow, &State) -> Result<()>> DiagnosticsSink for FnSink<F> {
    fn record(&mut self, row: &DiagnosticsRow, state: &State) -> Result<()> {
        (self.0)(row, state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Normal,
    Blowup,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Normal => "normal",
            Termination::Blowup => "blowup",
        }
    }
}

/// A trajectory in progress: state, comparison envelopes and record schedule.
#[derive(Debug, Clone)]
pub struct Simulation {
    params: Params,
    cfg: SolverConfig,
    state: State,
    recorder: Recorder,
    phi_star_v: f64,
    phi_star_w: f64,
    initial_max_u: f64,
    t_start: f64,
    next_record: u64,
    steps: u64,
    rejected: u64,
    status: Option<Termination>,
}

impl Simulation {
    pub fn new(init: State, params: Params, cfg: SolverConfig) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        for (f, name) in [(&init.u, "u"), (&init.v, "v"), (&init.w, "w")] {
            if f.grid() != init.grid() {
                return Err(Error::GridMismatch);
            }
            if !f.is_finite() {
                return Err(Error::NonFinite(name));
            }
            if f.min() < 0.0 {
                return Err(Error::Positivity {
                    field: name,
                    min: f.min(),
                    max: f.max(),
                });
            }
        }
        let area = init.grid().area();
        let mass = init.mass();
        if !(mass > 0.0) {
            return Err(Error::ZeroMass);
        }
        let steady = steady_state(&params, mass, area);
        Ok(Simulation {
            phi_star_v: init.v.linf_distance(steady.1),
            phi_star_w: init.w.linf_distance(steady.2),
            initial_max_u: init.u.max(),
            t_start: init.t,
            recorder: Recorder::new(params, steady),
            params,
            cfg,
            state: init,
            next_record: 0,
            steps: 0,
            rejected: 0,
            status: None,
        })
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Steps retried with a smaller `dt` after a transport limit violation.
    pub fn rejected_steps(&self) -> u64 {
        self.rejected
    }

    /// `(ubar0, alpha ubar0 / beta, gamma ubar0 / delta)`
    pub fn steady(&self) -> (f64, f64, f64) {
        self.recorder.steady()
    }

    pub fn envelopes(&self) -> (f64, f64) {
        (self.phi_star_v, self.phi_star_w)
    }

    pub fn status(&self) -> Option<Termination> {
        self.status
    }

    fn record_time(&self, k: u64) -> f64 {
        self.t_start + k as f64 * self.cfg.record_every
    }

    /// Computes a row for the current state without touching the residual history.
    pub fn snapshot_row(&self) -> Result<DiagnosticsRow> {
        self.recorder
            .clone()
            .record(&self.state, self.phi_star_v, self.phi_star_w)
    }

    fn emit(&mut self, sink: &mut dyn DiagnosticsSink) -> Result<()> {
        let row = self.recorder.record(&self.state, self.phi_star_v, self.phi_star_w)?;
        sink.record(&row, &self.state)
    }

    fn take_step(&mut self, mut dt: f64, stop: f64, mut exact: bool) -> Result<()> {
        let mut attempts = 0;
        loop {
            match step(&self.state, &self.params, dt, &self.cfg) {
                Ok(mut next) => {
                    if exact {
                        next.t = stop;
                    }
                    let (ubar0, _, _) = self.recorder.steady();
                    let drive = self.state.u.linf_distance(ubar0);
                    let p = &self.params;
                    self.phi_star_v = envelope_update(self.phi_star_v, dt, drive, p.beta, p.alpha);
                    self.phi_star_w = envelope_update(self.phi_star_w, dt, drive, p.delta, p.gamma);
                    self.state = next;
                    self.steps += 1;
                    return Ok(());
                }
                Err(Error::CflViolation { limit, .. }) if attempts < 60 => {
                    attempts += 1;
                    self.rejected += 1;
                    dt = (0.5 * dt).min(self.cfg.cfl_safety * limit);
                    exact = false;
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Advances to `target` (clamped to `t_end`), emitting rows at every
    /// multiple of `record_every`. Returns the termination status once the run
    /// has finished, `None` while more time remains.
    pub fn advance_to(&mut self, target: f64, sink: &mut dyn DiagnosticsSink) -> Result<Option<Termination>> {
        if let Some(st) = self.status {
            return Ok(Some(st));
        }
        let t_end = self.t_start + self.cfg.t_end;
        let target = target.min(t_end);
        if self.next_record == 0 {
            self.emit(sink)?;
            self.next_record = 1;
        }
        while self.state.t < target {
            let record_at = self.record_time(self.next_record).min(t_end);
            let stop = record_at.min(target);
            let remaining = stop - self.state.t;
            let dt_cap = cfl_dt(&self.state, &self.params, &self.cfg);
            let n = (remaining / dt_cap * (1.0 - 1e-12)).ceil().max(1.0);
            let dt = remaining / n;
            let before = self.steps;
            self.take_step(dt, stop, n == 1.0)?;
            debug_assert_eq!(self.steps, before + 1);
            if self.state.t >= record_at {
                self.state.t = record_at;
                self.emit(sink)?;
                self.next_record += 1;
            }
            if self.state.u.max() > BLOWUP_FACTOR * self.initial_max_u {
                if self.state.t < record_at {
                    self.emit(sink)?;
                }
                self.status = Some(Termination::Blowup);
                return Ok(self.status);
            }
        }
        if self.state.t >= t_end {
            self.status = Some(Termination::Normal);
        }
        Ok(self.status)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: State,
    pub status: Termination,
    pub steps: u64,
    pub rejected_steps: u64,
}

/// Integrates from `init` to `t_end`, feeding every recorded row to `sink`.
pub fn run(init: State, p: &Params, cfg: &SolverConfig, sink: &mut dyn DiagnosticsSink) -> Result<RunOutcome> {
    let mut sim = Simulation::new(init, *p, *cfg)?;
    let t_end = sim.t_start + cfg.t_end;
    let status = sim.advance_to(t_end, sink)?.unwrap_or(Termination::Normal);
    Ok(RunOutcome {
        steps: sim.steps,
        rejected_steps: sim.rejected,
        state: sim.state,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cosine_state(g: Grid, p: &Params, a: f64) -> State {
        let mut s = State::steady(g, p, 1.0);
        s.u = ScalarField::from_fn(g, |x, _| 1.0 + a * (PI * x / g.lx()).cos());
        s
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::new(1.0, 0.1);
        assert!((c.dt_max - 0.025).abs() < 1e-15);
        assert!(c.validate().is_ok());
        c.lin_tol = 1e-6;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::new(1.0, 0.1);
        c.cfl_safety = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn cfl_homogeneous_is_dt_max() {
        let g = Grid::square(8, 1.0).unwrap();
        let p = Params::default();
        let cfg = SolverConfig::new(1.0, 0.1);
        assert_eq!(cfl_dt(&State::steady(g, &p, 1.0), &p, &cfg), cfg.dt_max);
    }

    #[test]
    fn cfl_formula_for_unidirectional_flow() {
        // linear v: every interior x-face carries chi * slope = 2, one outflow face per cell
        let g = Grid::new(100, 4, 1.0, 1.0).unwrap();
        let p = Params {
            chi: 1.0,
            ..Params::default()
        };
        let mut s = State::steady(g, &p, 1.0);
        s.v = ScalarField::from_fn(g, |x, _| 5.0 + 2.0 * x);
        let mut cfg = SolverConfig::new(1.0, 100.0);
        cfg.cfl_safety = 0.9;
        let dt = cfl_dt(&s, &p, &cfg);
        assert!((dt - 0.0045).abs() < 1e-15, "{dt}");

        let p2 = Params { chi: 2.0, ..p };
        assert!(cfl_dt(&s, &p2, &cfg) <= dt);
    }

    #[test]
    fn steady_state_is_fixed_point() {
        let g = Grid::square(16, 2.0).unwrap();
        let p = Params::default();
        let cfg = SolverConfig::new(1.0, 0.1);
        let s0 = State::steady(g, &p, 1.0);
        let s1 = step(&s0, &p, 0.05, &cfg).unwrap();
        for (a, b) in [(&s0.u, &s1.u), (&s0.v, &s1.v), (&s0.w, &s1.w)] {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() <= cfg.lin_tol * x.abs());
            }
        }
    }

    #[test]
    fn homogeneous_chemical_relaxation_is_scalar_backward_euler() {
        let g = Grid::square(8, 1.0).unwrap();
        let p = Params::default();
        let cfg = SolverConfig::new(1.0, 0.1);
        let mut s = State::steady(g, &p, 1.0);
        let vstar = p.alpha / p.beta;
        s.v = ScalarField::constant(g, 3.0);
        let dt = 0.01;
        let mut dev = 3.0 - vstar;
        for _ in 0..10 {
            s = step(&s, &p, dt, &cfg).unwrap();
            dev /= 1.0 + p.beta * dt;
            for &x in s.v.values() {
                assert!((x - vstar - dev).abs() <= 1e-13, "{} vs {dev}", x - vstar);
            }
        }
    }

    #[test]
    fn step_conserves_mass_and_sign() {
        let g = Grid::square(24, 1.0).unwrap();
        let p = Params::default();
        let cfg = SolverConfig::new(1.0, 0.1);
        let mut s = cosine_state(g, &p, 0.9);
        let m0 = s.mass();
        for _ in 0..20 {
            let dt = cfl_dt(&s, &p, &cfg);
            s = step(&s, &p, dt, &cfg).unwrap();
            assert!((s.mass() - m0).abs() <= 10.0 * cfg.lin_tol * m0);
            assert!(s.u.min() >= 0.0);
        }
    }

    #[test]
    fn step_rejects_oversized_transport_step() {
        let g = Grid::square(32, 1.0).unwrap();
        let p = Params {
            chi: 50.0,
            alpha: 20.0,
            ..Params::default()
        };
        let mut s = State::steady(g, &p, 1.0);
        s.v = ScalarField::from_fn(g, |x, y| 1.0 + 5.0 * (PI * x).cos() * (PI * y).cos());
        let cfg = SolverConfig::new(1.0, 1.0);
        assert!(matches!(step(&s, &p, 0.2, &cfg), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn run_zero_length() {
        let g = Grid::square(8, 1.0).unwrap();
        let p = Params::default();
        let cfg = SolverConfig::new(0.0, 0.1);
        let init = cosine_state(g, &p, 0.3);
        let mut rows = Vec::new();
        let out = run(init.clone(), &p, &cfg, &mut rows).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(out.state, init);
        assert_eq!(out.status, Termination::Normal);
    }

    #[test]
    fn run_records_on_schedule() {
        let g = Grid::square(8, 1.0).unwrap();
        let p = Params::default();
        let cfg = SolverConfig::new(0.35, 0.1);
        let mut rows = Vec::new();
        run(cosine_state(g, &p, 0.3), &p, &cfg, &mut rows).unwrap();
        let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
        assert_eq!(ts.len(), 5);
        for (t, e) in ts.iter().zip([0.0, 0.1, 0.2, 0.30000000000000004, 0.35]) {
            assert!((t - e).abs() < 1e-15, "{ts:?}");
        }
    }

    #[test]
    fn run_rejects_empty_density() {
        let g = Grid::square(8, 1.0).unwrap();
        let p = Params::default();
        let mut s = State::steady(g, &p, 1.0);
        s.u = ScalarField::zeros(g);
        assert!(matches!(
            run(s, &p, &SolverConfig::new(1.0, 0.1), &mut NullSink),
            Err(Error::ZeroMass)
        ));
    }

    #[test]
    fn perturbation_decays_in_regime() {
        let g = Grid::square(16, 2.0).unwrap();
        let p = Params::default();
        let init = cosine_state(g, &p, 0.5);
        let d0 = init.u.linf_distance(1.0);
        let out = run(init, &p, &SolverConfig::new(2.0, 0.1), &mut NullSink).unwrap();
        assert!(out.state.u.linf_distance(1.0) < 1e-2 * d0);
    }

    #[test]
    fn mirror_symmetry_is_preserved() {
        let g = Grid::new(20, 12, 1.0, 1.0).unwrap();
        let p = Params::default();
        let mut s = State::steady(g, &p, 1.0);
        s.u = ScalarField::from_fn(g, |x, y| 1.0 + 0.6 * (2.0 * PI * x).cos() * (PI * y).cos());
        let out = run(s, &p, &SolverConfig::new(0.5, 0.1), &mut NullSink).unwrap();
        for f in [&out.state.u, &out.state.v, &out.state.w] {
            for j in 0..g.ny() {
                for i in 0..g.nx() {
                    assert!((f.at(i, j) - f.at(g.nx() - 1 - i, j)).abs() <= 1e-10);
                }
            }
        }
    }
}
