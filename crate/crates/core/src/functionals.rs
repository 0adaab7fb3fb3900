//! Relative entropy, the Lyapunov energy `E`, its dissipation `F`, the
//! entropy sandwich bounds, comparison envelopes and the diagnostics row
//! recorded along trajectories.
//!
//! Gradients live on faces and every face is weighted by the cell area, so
//! `integral |grad f|^2 = -integral f lap_h f` holds exactly. Under the
//! parameter condition each of `E` and `F` is a sum of nonnegative pieces in
//! the discrete setting too.

use crate::error::{Error, Result};
use crate::grid::{cell_dot, face_dot, gradient, laplacian, ScalarField};
use crate::model::{derived, matrix_a1, Params};
use crate::solver::State;

#[inline]
fn xlogx_ratio(u: f64, ubar: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u * (u / ubar).ln()
    }
}

fn positive_mean(u: &ScalarField) -> Result<f64> {
    let m = u.mean();
    if m > 0.0 {
        Ok(m)
    } else {
        Err(Error::ZeroMass)
    }
}

/// `(1 + d) ln(1 + d) - d`, free of cancellation near `d = 0`.
fn relative_entropy_density(d: f64) -> f64 {
    if d.abs() < 0.1 {
        // sum over n >= 2 of (-d)^n / (n (n - 1)); 0.1^18 is below one ulp
        let mut term = d * d;
        let mut acc = 0.0;
        for n in 2..20 {
            acc += term / (n * (n - 1)) as f64;
            term *= -d;
        }
        acc
    } else if d <= -1.0 {
        1.0
    } else {
        (1.0 + d) * d.ln_1p() - d
    }
}

/// `integral u ln(u / ubar)` with `0 ln 0 = 0`.
///
/// Evaluated as `integral ubar [(u/ubar) ln(u/ubar) - u/ubar + 1]`, which is
/// the same quantity (the linear part integrates to zero) but has a
/// nonnegative integrand, so it stays accurate as `u` approaches `ubar`.
pub fn entropy(u: &ScalarField) -> Result<f64> {
    let ubar = positive_mean(u)?;
    let s: f64 = u
        .values()
        .iter()
        .map(|&x| relative_entropy_density((x - ubar) / ubar))
        .sum();
    Ok(s * ubar * u.grid().cell_area())
}

/// Individual contributions to `E`; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTerms {
    pub entropy: f64,
    pub grad_v: f64,
    pub grad_w: f64,
    pub cross: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.entropy + self.grad_v + self.grad_w + self.cross
    }

    pub fn scale(&self) -> f64 {
        self.entropy.abs() + self.grad_v.abs() + self.grad_w.abs() + self.cross.abs()
    }
}

pub fn energy_terms(s: &State, p: &Params) -> Result<EnergyTerms> {
    let th = derived(p);
    let gv = gradient(&s.v);
    let gw = gradient(&s.w);
    Ok(EnergyTerms {
        entropy: th.theta1 / (2.0 * p.xi * p.chi) * entropy(&s.u)?,
        grad_v: th.theta2 / (4.0 * p.xi * p.alpha) * face_dot(&gv, &gv),
        grad_w: th.theta2 / (4.0 * p.gamma * p.chi) * face_dot(&gw, &gw),
        cross: -face_dot(&gw, &gv),
    })
}

pub fn energy_e(s: &State, p: &Params) -> Result<f64> {
    Ok(energy_terms(s, p)?.total())
}

/// `E` evaluated as entropy plus the face-wise quadratic form of `A1`.
pub fn energy_e_quadratic(s: &State, p: &Params) -> Result<f64> {
    let th = derived(p);
    let a1 = matrix_a1(p);
    let gv = gradient(&s.v);
    let gw = gradient(&s.w);
    let faces: f64 = gv
        .x()
        .iter()
        .zip(gw.x())
        .chain(gv.y().iter().zip(gw.y()))
        .map(|(&a, &b)| a1.form(a, b))
        .sum();
    Ok(th.theta1 / (2.0 * p.xi * p.chi) * entropy(&s.u)? + faces * s.u.grid().cell_area())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationTerms {
    /// Weighted Fisher information; `+inf` when `u` vanishes on a face with nonzero gradient.
    pub fisher: f64,
    pub lap_v: f64,
    pub lap_w: f64,
    pub grad_v: f64,
    pub grad_w: f64,
    pub lap_cross: f64,
    pub grad_cross: f64,
}

impl DissipationTerms {
    pub fn total(&self) -> f64 {
        self.fisher + self.lap_v + self.lap_w + self.grad_v + self.grad_w + self.lap_cross + self.grad_cross
    }

    pub fn scale(&self) -> f64 {
        [
            self.fisher,
            self.lap_v,
            self.lap_w,
            self.grad_v,
            self.grad_w,
            self.lap_cross,
            self.grad_cross,
        ]
        .iter()
        .map(|t| t.abs())
        .sum()
    }

    pub fn saturated(&self) -> bool {
        self.fisher.is_infinite()
    }
}

/// `integral |grad u|^2 / u` with the face value of `u` taken as the harmonic
/// mean of the adjacent cells.
pub fn fisher_information(u: &ScalarField) -> f64 {
    let g = *u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let (hx, hy) = (g.hx(), g.hy());
    let v = u.values();
    let face = |a: f64, b: f64, h: f64| -> f64 {
        let d = (b - a) / h;
        if d == 0.0 {
            return 0.0;
        }
        let hm = if a + b > 0.0 { 2.0 * a * b / (a + b) } else { 0.0 };
        if hm > 0.0 {
            d * d / hm
        } else {
            f64::INFINITY
        }
    };
    let mut s = 0.0;
    for j in 0..ny {
        for i in 1..nx {
            s += face(v[j * nx + i - 1], v[j * nx + i], hx);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            s += face(v[(j - 1) * nx + i], v[j * nx + i], hy);
        }
    }
    s * g.cell_area()
}

pub fn dissipation_terms(s: &State, p: &Params) -> Result<DissipationTerms> {
    positive_mean(&s.u)?;
    let th = derived(p);
    let gv = gradient(&s.v);
    let gw = gradient(&s.w);
    let lv = laplacian(&s.v);
    let lw = laplacian(&s.w);
    let (ka, kg) = (p.xi * p.alpha, p.gamma * p.chi);
    Ok(DissipationTerms {
        fisher: th.theta1 / (2.0 * p.xi * p.chi) * fisher_information(&s.u),
        lap_v: th.theta2 * p.d1 / (2.0 * ka) * cell_dot(&lv, &lv),
        lap_w: th.theta2 * p.d2 / (2.0 * kg) * cell_dot(&lw, &lw),
        grad_v: th.theta2 * p.beta / (2.0 * ka) * face_dot(&gv, &gv),
        grad_w: th.theta2 * p.delta / (2.0 * kg) * face_dot(&gw, &gw),
        lap_cross: -(p.d1 + p.d2) * cell_dot(&lw, &lv),
        grad_cross: -(p.beta + p.delta) * face_dot(&gw, &gv),
    })
}

pub fn dissipation_f(s: &State, p: &Params) -> Result<f64> {
    Ok(dissipation_terms(s, p)?.total())
}

/// Entropy sandwich `(lower, upper)`: `||u - ubar||_1^2 / (2 ubar |Omega|)`
/// and `||u - ubar||_2^2 / ubar`.
pub fn ckp_bounds(u: &ScalarField) -> Result<(f64, f64)> {
    let ubar = positive_mean(u)?;
    let l1 = u.l1_distance(ubar);
    let l2 = u.l2_distance_squared(ubar);
    Ok((l1 * l1 / (2.0 * ubar * u.grid().area()), l2 / ubar))
}

/// One backward-Euler step of `phi' + decay phi = source_coeff drive`.
pub fn envelope_update(phi: f64, dt: f64, drive: f64, decay: f64, source_coeff: f64) -> f64 {
    (phi + dt * source_coeff * drive) / (1.0 + dt * decay)
}

/// Entropy for the equal-diffusion case, `integral u ln u + integral |grad s|^2 / (2 theta1)`
/// with `s = xi w - chi v`. `None` unless `D1 == D2` and `theta1 > 0`.
pub fn legacy_energy_s(s: &State, p: &Params) -> Option<f64> {
    let th1 = derived(p).theta1;
    let equal = (p.d1 - p.d2).abs() <= 1e-12 * p.d1.abs().max(p.d2.abs());
    if !equal || th1 <= 0.0 {
        return None;
    }
    let sf = s.w.lincomb(p.xi, &s.v, -p.chi);
    let gs = gradient(&sf);
    let ulnu: f64 = s.u.values().iter().map(|&x| xlogx_ratio(x, 1.0)).sum::<f64>() * s.u.grid().cell_area();
    Some(ulnu + face_dot(&gs, &gs) / (2.0 * th1))
}

/// One time sample of every recorded functional.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub entropy: f64,
    pub e: f64,
    pub f: f64,
    pub residual: f64,
    pub ckp_lower: f64,
    pub ckp_upper: f64,
    pub l1_u: f64,
    pub linf_u: f64,
    pub linf_v: f64,
    pub linf_w: f64,
    pub phi_star_v: f64,
    pub phi_star_w: f64,
    pub e_legacy: Option<f64>,
    /// Term scales for sign checks (not serialised).
    pub e_scale: f64,
    pub f_scale: f64,
}

/// Builds rows and the residual `|(E_k - E_{k-1}) / dt_k + (F_k + F_{k-1}) / 2|`.
#[derive(Debug, Clone)]
pub struct Recorder {
    params: Params,
    steady: (f64, f64, f64),
    previous: Option<(f64, f64, f64)>,
}

impl Recorder {
    pub fn new(params: Params, steady: (f64, f64, f64)) -> Self {
        Recorder {
            params,
            steady,
            previous: None,
        }
    }

    pub fn steady(&self) -> (f64, f64, f64) {
        self.steady
    }

    pub fn record(&mut self, s: &State, phi_star_v: f64, phi_star_w: f64) -> Result<DiagnosticsRow> {
        let p = &self.params;
        let (ubar0, vs, ws) = self.steady;
        let et = energy_terms(s, p)?;
        let ft = dissipation_terms(s, p)?;
        let (e, f) = (et.total(), ft.total());
        let residual = match self.previous {
            Some((t0, e0, f0)) if s.t > t0 => ((e - e0) / (s.t - t0) + 0.5 * (f + f0)).abs(),
            _ => 0.0,
        };
        self.previous = Some((s.t, e, f));
        let (ckp_lower, ckp_upper) = ckp_bounds(&s.u)?;
        Ok(DiagnosticsRow {
            t: s.t,
            mass: crate::grid::integrate(&s.u),
            min_u: s.u.min(),
            max_u: s.u.max(),
            entropy: entropy(&s.u)?,
            e,
            f,
            residual,
            ckp_lower,
            ckp_upper,
            l1_u: s.u.l1_distance(ubar0),
            linf_u: s.u.linf_distance(ubar0),
            linf_v: s.v.linf_distance(vs),
            linf_w: s.w.linf_distance(ws),
            phi_star_v,
            phi_star_w,
            e_legacy: legacy_energy_s(s, p),
            e_scale: et.scale(),
            f_scale: ft.scale(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    fn state(u: ScalarField, v: ScalarField, w: ScalarField) -> State {
        State { u, v, w, t: 0.0 }
    }

    fn steady(g: Grid, p: &Params, ubar: f64) -> State {
        let (a, b, c) = crate::model::steady_state(p, ubar, 1.0);
        state(
            ScalarField::constant(g, a),
            ScalarField::constant(g, b),
            ScalarField::constant(g, c),
        )
    }

    fn bumpy(g: Grid, seed: u64) -> ScalarField {
        let mut s = seed;
        ScalarField::from_fn(g, |_, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            0.2 + (s % 1000) as f64 / 500.0
        })
    }

    #[test]
    fn entropy_of_constant_is_zero() {
        let g = Grid::square(8, 1.0).unwrap();
        assert_eq!(entropy(&ScalarField::constant(g, 2.5)).unwrap(), 0.0);
        assert!(matches!(entropy(&ScalarField::zeros(g)), Err(Error::ZeroMass)));
    }

    #[test]
    fn entropy_two_level_field() {
        // Half the cells at 2, half at 0: mean 1, each occupied cell contributes 2 ln 2.
        let g = Grid::square(4, 1.0).unwrap();
        let u = ScalarField::from_fn(g, |x, _| if x < 0.5 { 2.0 } else { 0.0 });
        let expect = 8.0 * g.cell_area() * 2.0 * 2f64.ln();
        assert!((entropy(&u).unwrap() - expect).abs() < 1e-15);
        assert!((expect / 8.0 - g.cell_area() * 1.386_294_361_119_890_6).abs() < 1e-15);
    }

    #[test]
    fn ckp_sandwich_on_cosine() {
        let g = Grid::new(64, 4, 2.0, 1.0).unwrap();
        let u = ScalarField::from_fn(g, |x, _| 1.0 + 0.1 * (2.0 * PI * x / 2.0).cos());
        let h = entropy(&u).unwrap();
        let (lo, hi) = ckp_bounds(&u).unwrap();
        // direct quadrature of the three quantities
        let ubar = u.mean();
        let l1: f64 = u.values().iter().map(|x| (x - ubar).abs()).sum::<f64>() * g.cell_area();
        let l2: f64 = u.values().iter().map(|x| (x - ubar).powi(2)).sum::<f64>() * g.cell_area();
        assert!((lo - l1 * l1 / (2.0 * ubar * 2.0)).abs() < 1e-15);
        assert!((hi - l2 / ubar).abs() < 1e-15);
        assert!(lo <= h && h <= hi, "{lo} {h} {hi}");
        assert_eq!(ckp_bounds(&ScalarField::constant(g, 3.0)).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn entropy_density_series_matches_closed_form() {
        for d in [0.0999999, -0.0999999, 0.05, -0.03] {
            let closed = (1.0 + d) * f64::ln_1p(d) - d;
            assert!((relative_entropy_density(d) - closed).abs() <= 1e-15, "{d}");
        }
        // leading term d^2 / 2 with relative accuracy where the closed form has none
        let d = 1e-9;
        assert!((relative_entropy_density(d) / (0.5 * d * d) - 1.0).abs() < 1e-8);
        assert_eq!(relative_entropy_density(-1.0), 1.0);
    }

    #[test]
    fn energy_vanishes_at_steady_state() {
        let g = Grid::square(8, 1.0).unwrap();
        let p = Params::default();
        let s = steady(g, &p, 1.3);
        // the mean of 64 equal cells may be off by one ulp
        assert!(energy_e(&s, &p).unwrap().abs() <= 1e-12);
        assert!(dissipation_f(&s, &p).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn energy_single_gradient_term() {
        let g = Grid::square(16, 1.0).unwrap();
        let p = Params::default();
        let v = ScalarField::from_fn(g, |x, y| 1.0 + 0.1 * (PI * x).cos() * (PI * y).cos());
        let s = state(ScalarField::constant(g, 1.0), v, ScalarField::constant(g, 1.0));
        let gv = gradient(&s.v);
        let th2 = derived(&p).theta2;
        let expect = th2 / (4.0 * p.xi * p.alpha) * face_dot(&gv, &gv);
        assert!(expect > 0.0);
        assert!((energy_e(&s, &p).unwrap() - expect).abs() <= 1e-15 * expect);
    }

    #[test]
    fn energy_paths_agree() {
        let g = Grid::new(12, 10, 1.0, 1.7).unwrap();
        for (k, p) in [
            Params::default(),
            Params {
                chi: 3.0,
                d2: 0.2,
                ..Params::default()
            },
        ]
        .iter()
        .enumerate()
        {
            let s = state(bumpy(g, 1 + k as u64), bumpy(g, 7 + k as u64), bumpy(g, 13 + k as u64));
            let a = energy_e(&s, p).unwrap();
            let b = energy_e_quadratic(&s, p).unwrap();
            let scale = energy_terms(&s, p).unwrap().scale();
            assert!((a - b).abs() <= 1e-12 * scale, "{a} {b}");
        }
    }

    #[test]
    fn dissipation_on_single_cosine_mode() {
        let g = Grid::new(40, 6, 1.5, 1.0).unwrap();
        let p = Params::default();
        let eps = 1e-2;
        let (_, vs, ws) = crate::model::steady_state(&p, 1.0, 1.0);
        let v = ScalarField::from_fn(g, |x, _| vs + eps * (PI * x / g.lx()).cos());
        let s = state(ScalarField::constant(g, 1.0), v, ScalarField::constant(g, ws));
        let th2 = derived(&p).theta2;
        let k = g.mode_eigenvalue(1, 0);
        let half_area = g.area() / 2.0;
        let expect = eps
            * eps
            * (th2 * p.d1 / (2.0 * p.xi * p.alpha) * k * k + th2 * p.beta / (2.0 * p.xi * p.alpha) * k)
            * half_area;
        let f = dissipation_f(&s, &p).unwrap();
        assert!((f - expect).abs() <= 1e-10 * expect, "{f} vs {expect}");
        // continuous limit
        let kc = (PI / g.lx()).powi(2);
        let cont = eps
            * eps
            * (th2 * p.d1 / (2.0 * p.xi * p.alpha) * kc * kc + th2 * p.beta / (2.0 * p.xi * p.alpha) * kc)
            * half_area;
        assert!((f - cont).abs() <= 1e-2 * cont);
    }

    #[test]
    fn sign_under_condition() {
        let g = Grid::square(10, 1.0).unwrap();
        let p = Params::default();
        assert!(crate::model::classify(&p, None).unwrap().cond_main);
        for seed in 0..20u64 {
            let s = state(bumpy(g, 3 * seed + 1), bumpy(g, 3 * seed + 2), bumpy(g, 3 * seed + 3));
            let et = energy_terms(&s, &p).unwrap();
            let ft = dissipation_terms(&s, &p).unwrap();
            assert!(et.total() >= -1e-12 * et.scale());
            assert!(ft.total() >= -1e-10 * ft.scale());
        }
    }

    #[test]
    fn fisher_saturates_on_vacuum_face() {
        let g = Grid::square(4, 1.0).unwrap();
        let u = ScalarField::from_fn(g, |x, _| if x < 0.5 { 1.0 } else { 0.0 });
        let s = state(u, ScalarField::constant(g, 1.0), ScalarField::constant(g, 1.0));
        let ft = dissipation_terms(&s, &Params::default()).unwrap();
        assert!(ft.saturated());
        assert_eq!(fisher_information(&ScalarField::constant(g, 1.0)), 0.0);
    }

    #[test]
    fn envelope_examples() {
        assert_eq!(envelope_update(2.0, 1.0, 0.0, 1.0, 5.0), 1.0);
        assert_eq!(envelope_update(0.0, 0.3, 0.0, 2.0, 1.0), 0.0);
        // fixed point of the recursion: phi = (phi + dt c d) / (1 + dt k) => phi = c d / k
        let (d, k, c) = (0.7, 1.3, 2.0);
        let mut phi = 5.0;
        for _ in 0..2000 {
            phi = envelope_update(phi, 0.05, d, k, c);
        }
        assert!((phi - c * d / k).abs() < 1e-12);
    }

    #[test]
    fn legacy_energy_cases() {
        let g = Grid::square(8, 1.0).unwrap();
        let p = Params {
            d2: 1.0,
            ..Params::default()
        };
        let v = bumpy(g, 5);
        let w = v.map(|x| x * p.chi / p.xi);
        let u = bumpy(g, 9);
        let ulnu: f64 = u.values().iter().map(|x| x * x.ln()).sum::<f64>() * g.cell_area();
        let s = state(u, v, w);
        assert!((legacy_energy_s(&s, &p).unwrap() - ulnu).abs() < 1e-12 * ulnu.abs().max(1.0));

        let ss = steady(g, &p, 1.7);
        let expect = g.area() * 1.7 * 1.7f64.ln();
        assert!((legacy_energy_s(&ss, &p).unwrap() - expect).abs() < 1e-12);

        assert!(legacy_energy_s(&ss, &Params::default()).is_none());
        let attractive = Params {
            d2: 1.0,
            xi: 0.1,
            ..Params::default()
        };
        assert!(legacy_energy_s(&ss, &attractive).is_none());
    }
}
