//! Model constants and the algebraic regime classifier.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Relative headroom applied on top of `max{mu1, mu2, mu3}`.
pub const MU_HEADROOM: f64 = 0.01;

/// The eight positive constants of the attraction-repulsion system
///
/// ```text
/// u_t = lap u - div(chi u grad v) + div(xi u grad w)
/// v_t = D1 lap v + alpha u - beta v
/// w_t = D2 lap w + gamma u - delta w
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub chi: f64,
    pub xi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Params {
    pub const NAMES: [&'static str; 8] = ["chi", "xi", "alpha", "beta", "gamma", "delta", "D1", "D2"];

    pub fn values(&self) -> [f64; 8] {
        [
            self.chi, self.xi, self.alpha, self.beta, self.gamma, self.delta, self.d1, self.d2,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in Self::NAMES.iter().zip(self.values()) {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    rule: "must be finite and strictly positive",
                });
            }
        }
        Ok(())
    }

    /// Repulsion-to-attraction ratio `xi gamma / (chi alpha)`.
    pub fn ratio(&self) -> f64 {
        (self.xi * self.gamma) / (self.chi * self.alpha)
    }
}

impl Default for Params {
    /// Reference parameter set: repulsion-dominated with `D1 != D2` and `beta != delta`.
    fn default() -> Self {
        Params {
            chi: 1.0,
            xi: 2.0,
            alpha: 1.0,
            beta: 1.0,
            gamma: 2.0,
            delta: 1.2,
            d1: 1.0,
            d2: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// `xi gamma - chi alpha`
    pub theta1: f64,
    /// `xi gamma + chi alpha`
    pub theta2: f64,
}

pub fn derived(p: &Params) -> DerivedConstants {
    let rep = p.xi * p.gamma;
    let att = p.chi * p.alpha;
    DerivedConstants {
        theta1: rep - att,
        theta2: rep + att,
    }
}

/// Constant steady state `(u0, alpha u0 / beta, gamma u0 / delta)` for a given mass.
pub fn steady_state(p: &Params, mass: f64, area: f64) -> (f64, f64, f64) {
    let u0 = mass / area;
    (u0, p.alpha * u0 / p.beta, p.gamma * u0 / p.delta)
}

/// Symmetric 2x2 matrix `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Sym2 {
    pub fn det(&self) -> f64 {
        self.a * self.c - self.b * self.b
    }

    pub fn trace(&self) -> f64 {
        self.a + self.c
    }

    pub fn max_eigenvalue(&self) -> f64 {
        let m = 0.5 * (self.a + self.c);
        let r = (0.5 * (self.a - self.c)).hypot(self.b);
        m + r
    }

    /// Smaller eigenvalue, computed as `det / lambda_max` when that is the
    /// better-conditioned route.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = 0.5 * (self.a + self.c);
        let r = (0.5 * (self.a - self.c)).hypot(self.b);
        if m > 0.0 {
            self.det() / (m + r)
        } else {
            m - r
        }
    }

    /// `[x, y] A [x, y]^T`
    #[inline]
    pub fn form(&self, x: f64, y: f64) -> f64 {
        self.a * x * x + 2.0 * self.b * x * y + self.c * y * y
    }
}

/// Matrix of the gradient quadratic form in the energy.
pub fn matrix_a1(p: &Params) -> Sym2 {
    let th2 = derived(p).theta2;
    Sym2 {
        a: th2 / (4.0 * p.xi * p.alpha),
        b: -0.5,
        c: th2 / (4.0 * p.gamma * p.chi),
    }
}

/// Matrix of the Laplacian quadratic form in the dissipation.
pub fn matrix_a2(p: &Params) -> Sym2 {
    let th2 = derived(p).theta2;
    Sym2 {
        a: th2 * p.d1 / (2.0 * p.xi * p.alpha),
        b: -0.5 * (p.d1 + p.d2),
        c: th2 * p.d2 / (2.0 * p.gamma * p.chi),
    }
}

/// Matrix of the gradient quadratic form in the dissipation.
pub fn matrix_a3(p: &Params) -> Sym2 {
    let th2 = derived(p).theta2;
    Sym2 {
        a: th2 * p.beta / (2.0 * p.xi * p.alpha),
        b: -0.5 * (p.beta + p.delta),
        c: th2 * p.delta / (2.0 * p.gamma * p.chi),
    }
}

/// Matrix of `mu F - E` restricted to the chemical gradients.
pub fn matrix_a4(p: &Params, mu: f64) -> Sym2 {
    let th2 = derived(p).theta2;
    Sym2 {
        a: th2 / (2.0 * p.xi * p.alpha) * (p.beta * mu - 0.5),
        b: 0.5 * (1.0 - mu * (p.beta + p.delta)),
        c: th2 / (2.0 * p.gamma * p.chi) * (p.delta * mu - 0.5),
    }
}

/// `[4 th2^2 beta delta - (th2^2 - th1^2)(beta + delta)^2] mu^2 - 2 (beta + delta) th1^2 mu + th1^2`
pub fn a4_quadratic(p: &Params, mu: f64) -> f64 {
    let DerivedConstants { theta1, theta2 } = derived(p);
    let (t1s, t2s) = (theta1 * theta1, theta2 * theta2);
    let s = p.beta + p.delta;
    (4.0 * t2s * p.beta * p.delta - (t2s - t1s) * s * s) * mu * mu - 2.0 * s * t1s * mu + t1s
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub theta1: f64,
    pub theta2: f64,
    pub ratio: f64,
    /// `xi gamma / (chi alpha) >= max{D1/D2, D2/D1, beta/delta, delta/beta}`
    pub cond_main: bool,
    /// `xi gamma / (chi alpha) > max{beta/delta, delta/beta}`
    pub cond_strict: bool,
    /// `th2^2 (D1 - D2)^2 <= (D1 + D2)^2 th1^2`
    pub lc5_diffusion: bool,
    /// `th2^2 (beta - delta)^2 <= (beta + delta)^2 th1^2`
    pub lc5_decay: bool,
    pub min_eig_a1: f64,
    pub min_eig_a2: f64,
    pub min_eig_a3: f64,
    pub mu2: f64,
    pub mu3: Option<f64>,
    /// Earlier small-mass condition; `None` when `beta == delta` or no mass given.
    pub lin2018: Option<bool>,
    pub ubar: Option<f64>,
    pub steady_state: Option<(f64, f64, f64)>,
}

impl RegimeReport {
    pub const MU2_NOTE: &'static str = "mu2 = max{1/(2 beta), 1/(2 delta)}";

    /// Stable `key=value` lines, one per field.
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), fmt_num);
        let optb = |v: Option<bool>| v.map_or_else(|| "n/a".to_string(), |b| b.to_string());
        let (ss_u, ss_v, ss_w) = match self.steady_state {
            Some((a, b, c)) => (fmt_num(a), fmt_num(b), fmt_num(c)),
            None => ("none".into(), "none".into(), "none".into()),
        };
        vec![
            ("theta1", fmt_num(self.theta1)),
            ("theta2", fmt_num(self.theta2)),
            ("ratio", fmt_num(self.ratio)),
            ("cond_main", self.cond_main.to_string()),
            ("cond_strict", self.cond_strict.to_string()),
            ("lc5_diffusion", self.lc5_diffusion.to_string()),
            ("lc5_decay", self.lc5_decay.to_string()),
            ("min_eig_a1", fmt_num(self.min_eig_a1)),
            ("min_eig_a2", fmt_num(self.min_eig_a2)),
            ("min_eig_a3", fmt_num(self.min_eig_a3)),
            ("mu2", fmt_num(self.mu2)),
            ("mu3", opt(self.mu3)),
            ("lin2018", optb(self.lin2018)),
            ("ubar", opt(self.ubar)),
            ("steady_u", ss_u),
            ("steady_v", ss_v),
            ("steady_w", ss_w),
        ]
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:.17e}")
}

impl fmt::Display for RegimeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let yn = |b: bool| if b { "yes" } else { "no" };
        writeln!(f, "theta1 = xi*gamma - chi*alpha      {:>14.6}", self.theta1)?;
        writeln!(f, "theta2 = xi*gamma + chi*alpha      {:>14.6}", self.theta2)?;
        writeln!(f, "xi*gamma / (chi*alpha)             {:>14.6}", self.ratio)?;
        writeln!(f, "global regime (ratio >= max ratios) {:>13}", yn(self.cond_main))?;
        writeln!(f, "exponential decay (strict)         {:>14}", yn(self.cond_strict))?;
        writeln!(f, "diffusion line                     {:>14}", yn(self.lc5_diffusion))?;
        writeln!(f, "decay line                         {:>14}", yn(self.lc5_decay))?;
        writeln!(f, "min eig A1                         {:>14.6e}", self.min_eig_a1)?;
        writeln!(f, "min eig A2                         {:>14.6e}", self.min_eig_a2)?;
        writeln!(f, "min eig A3                         {:>14.6e}", self.min_eig_a3)?;
        writeln!(
            f,
            "mu2                                {:>14.6}  ({})",
            self.mu2,
            Self::MU2_NOTE
        )?;
        match self.mu3 {
            Some(m) => writeln!(f, "mu3                                {m:>14.6}")?,
            None => writeln!(f, "mu3                                {:>14}", "undefined")?,
        }
        match self.lin2018 {
            Some(b) => writeln!(f, "small-mass condition               {:>14}", yn(b))?,
            None => writeln!(f, "small-mass condition               {:>14}", "n/a")?,
        }
        if let Some((u, v, w)) = self.steady_state {
            writeln!(f, "steady state (u, v, w)             ({u:.6}, {v:.6}, {w:.6})")?;
        }
        Ok(())
    }
}

/// Evaluates every algebraic condition for `p`; `ubar` enables the mass-dependent ones.
pub fn classify(p: &Params, ubar: Option<f64>) -> Result<RegimeReport> {
    p.validate()?;
    if let Some(u) = ubar {
        if !(u.is_finite() && u > 0.0) {
            return Err(Error::InvalidParameter {
                name: "ubar",
                value: u,
                rule: "must be finite and strictly positive",
            });
        }
    }
    let DerivedConstants { theta1, theta2 } = derived(p);
    let ratio = p.ratio();
    let max_d = (p.d1 / p.d2).max(p.d2 / p.d1);
    let max_k = (p.beta / p.delta).max(p.delta / p.beta);
    let cond_main = ratio >= max_d.max(max_k);
    let cond_strict = ratio > max_k;

    let (t1s, t2s) = (theta1 * theta1, theta2 * theta2);
    let dd = p.d1 - p.d2;
    let ds = p.d1 + p.d2;
    let kd = p.beta - p.delta;
    let ks = p.beta + p.delta;
    let lc5_diffusion = t2s * dd * dd <= ds * ds * t1s;
    let lc5_decay = t2s * kd * kd <= ks * ks * t1s;

    let mu2 = (1.0 / (2.0 * p.beta)).max(1.0 / (2.0 * p.delta));
    let mu3 = if cond_strict { Some(mu3(p)) } else { None };

    let lin2018 = match ubar {
        Some(u) if p.beta != p.delta => Some(small_mass_condition(p, u)),
        _ => None,
    };
    let steady = ubar.map(|u| steady_state(p, u, 1.0));

    Ok(RegimeReport {
        theta1,
        theta2,
        ratio,
        cond_main,
        cond_strict,
        lc5_diffusion,
        lc5_decay,
        min_eig_a1: matrix_a1(p).min_eigenvalue(),
        min_eig_a2: matrix_a2(p).min_eigenvalue(),
        min_eig_a3: matrix_a3(p).min_eigenvalue(),
        mu2,
        mu3,
        lin2018,
        ubar,
        steady_state: steady,
    })
}

fn mu3(p: &Params) -> f64 {
    let theta1 = derived(p).theta1;
    let rep = p.xi * p.gamma;
    let att = p.chi * p.alpha;
    let a = rep * p.delta - att * p.beta;
    let b = rep * p.beta - att * p.delta;
    (theta1 / (2.0 * a)).max(theta1 / (2.0 * b))
}

/// `ubar < 4 beta delta / (chi alpha (beta - delta)^2)` and
/// `xi gamma > 4 beta delta (chi alpha ubar + 1) / ([4 beta delta - (beta - delta)^2 chi alpha ubar] ubar)`.
fn small_mass_condition(p: &Params, ubar: f64) -> bool {
    let att = p.chi * p.alpha;
    let bd4 = 4.0 * p.beta * p.delta;
    let kd2 = (p.beta - p.delta).powi(2);
    if ubar >= bd4 / (att * kd2) {
        return false;
    }
    let denom = (bd4 - kd2 * att * ubar) * ubar;
    p.xi * p.gamma > bd4 * (att * ubar + 1.0) / denom
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuBounds {
    /// Poincare-based bound `sup_u / (ubar lambda1)`.
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    /// `(1 + MU_HEADROOM) max{mu1, mu2, mu3}`
    pub mu: f64,
    /// Guaranteed L1 rate `1 / (2 mu)`.
    pub rate_l1: f64,
}

pub fn mu_bounds(p: &Params, sup_u: f64, ubar: f64, grid: &Grid) -> Result<MuBounds> {
    p.validate()?;
    let rep = p.xi * p.gamma;
    let att = p.chi * p.alpha;
    if !(rep * p.delta - att * p.beta > 0.0 && rep * p.beta - att * p.delta > 0.0) {
        return Err(Error::NotStrict(format!(
            "xi*gamma/(chi*alpha) = {} is not above max{{beta/delta, delta/beta}}",
            p.ratio()
        )));
    }
    if !(sup_u > 0.0 && ubar > 0.0) {
        return Err(Error::InvalidParameter {
            name: "sup_u",
            value: sup_u.min(ubar),
            rule: "sup_u and ubar must be positive",
        });
    }
    let mu1 = sup_u / (ubar * grid.poincare_eigenvalue());
    let mu2 = (1.0 / (2.0 * p.beta)).max(1.0 / (2.0 * p.delta));
    let mu3 = mu3(p);
    let mu = (1.0 + MU_HEADROOM) * mu1.max(mu2).max(mu3);
    debug_assert!(matrix_a4(p, mu).min_eigenvalue() >= -1e-12 * matrix_a4(p, mu).trace().abs());
    Ok(MuBounds {
        mu1,
        mu2,
        mu3,
        mu,
        rate_l1: 1.0 / (2.0 * mu),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[allow(clippy::too_many_arguments)]
    fn p(chi: f64, xi: f64, alpha: f64, beta: f64, gamma: f64, delta: f64, d1: f64, d2: f64) -> Params {
        Params {
            chi,
            xi,
            alpha,
            beta,
            gamma,
            delta,
            d1,
            d2,
        }
    }

    #[test]
    fn derived_examples() {
        let d = derived(&p(1.0, 2.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0));
        assert_eq!((d.theta1, d.theta2), (3.0, 5.0));
        let d = derived(&p(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0));
        assert_eq!((d.theta1, d.theta2), (0.0, 2.0));
    }

    #[test]
    fn steady_state_examples() {
        let unit = p(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        assert_eq!(steady_state(&unit, 1.0, 1.0), (1.0, 1.0, 1.0));
        let q = p(1.0, 1.0, 2.0, 1.0, 3.0, 2.0, 1.0, 1.0);
        assert_eq!(steady_state(&q, 1.0, 1.0), (1.0, 2.0, 1.5));
        assert_eq!(steady_state(&q, 0.5, 2.0).0, 0.25);
    }

    #[test]
    fn classify_reference_set() {
        let r = classify(&Params::default(), Some(1.0)).unwrap();
        assert_eq!(r.ratio, 4.0);
        assert!(r.cond_main && r.cond_strict && r.lc5_diffusion && r.lc5_decay);
        assert!(r.min_eig_a2 >= 0.0 && r.min_eig_a3 >= 0.0 && r.min_eig_a1 > 0.0);
    }

    #[test]
    fn classify_balanced_attraction_repulsion() {
        let r = classify(&p(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0), None).unwrap();
        assert_eq!(r.theta1, 0.0);
        assert!(!r.lc5_diffusion);
        assert!(!r.cond_main);
        assert!(r.lin2018.is_none());
    }

    #[test]
    fn degenerate_point_satisfies_ratio_condition_with_zero_theta1() {
        // D1 = D2, beta = delta, ratio 1: the ratio test holds with theta1 = 0.
        let r = classify(&p(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0), None).unwrap();
        assert!(r.cond_main && r.lc5_diffusion && r.lc5_decay);
        assert_eq!(r.theta1, 0.0);
        assert!(!r.cond_strict);
    }

    #[test]
    fn classify_rejects_nonpositive() {
        let q = Params {
            delta: 0.0,
            ..Params::default()
        };
        match classify(&q, None) {
            Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, "delta"),
            other => panic!("{other:?}"),
        }
        assert!(classify(&Params::default(), Some(-1.0)).is_err());
    }

    #[test]
    fn small_mass_condition_cases() {
        // beta = delta -> not applicable
        let q = p(1.0, 2.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0);
        assert_eq!(classify(&q, Some(1.0)).unwrap().lin2018, None);
        // reference set: 4*1*1.2/(1*0.04) = 120 so ubar = 1 passes the first part;
        // second part: 4.8*2/((4.8-0.04)*1) = 2.0168 < 4.
        let r = classify(&Params::default(), Some(1.0)).unwrap();
        assert_eq!(r.lin2018, Some(true));
        // large mass violates the first inequality
        let r = classify(&Params::default(), Some(200.0)).unwrap();
        assert_eq!(r.lin2018, Some(false));
    }

    #[test]
    fn mu_examples() {
        let q = p(1.0, 2.0, 1.0, 1.0, 2.0, 1.2, 1.0, 1.5);
        let g = Grid::square(16, 1.0).unwrap();
        let m = mu_bounds(&q, 1.0, 1.0, &g).unwrap();
        // theta1 = 3, 4*1.2 - 1 = 3.8, 4*1 - 1.2 = 2.8
        let oracle = (3.0f64 / 7.6).max(3.0 / 5.6);
        assert!((m.mu3 - oracle).abs() < 1e-15);
        assert!((m.mu3 - 0.535_714_285_714_285_7).abs() < 1e-15);
        assert!((m.mu1 - 1.0 / (std::f64::consts::PI * std::f64::consts::PI)).abs() < 1e-15);
        assert!((m.mu2 - 0.5).abs() < 1e-15);
        assert!((m.mu - 1.01 * oracle).abs() < 1e-14);
        assert!((m.rate_l1 - 1.0 / (2.0 * m.mu)).abs() < 1e-15);

        let unit_decay = p(1.0, 2.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0);
        assert_eq!(mu_bounds(&unit_decay, 1.0, 1.0, &g).unwrap().mu2, 0.5);
    }

    #[test]
    fn mu_rejects_non_strict() {
        let q = p(1.0, 1.0, 1.0, 1.0, 1.2, 1.0, 1.0, 1.0);
        // ratio 1.2 < beta/delta max 1.5
        let q = Params { delta: 1.5, ..q };
        assert!(matches!(
            mu_bounds(&q, 1.0, 1.0, &Grid::square(8, 1.0).unwrap()),
            Err(Error::NotStrict(_))
        ));
    }

    #[test]
    fn a4_quadratic_factorises() {
        let q = Params::default();
        let rep = q.xi * q.gamma;
        let att = q.chi * q.alpha;
        let th1 = derived(&q).theta1;
        for mu in [0.1, 0.4, 0.53, 0.9, 2.0] {
            let f =
                (2.0 * (rep * q.delta - att * q.beta) * mu - th1) * (2.0 * (rep * q.beta - att * q.delta) * mu - th1);
            assert!((a4_quadratic(&q, mu) - f).abs() < 1e-12 * f.abs().max(1.0));
        }
    }

    #[test]
    fn sym2_eigenvalues() {
        let m = Sym2 { a: 2.0, b: 1.0, c: 2.0 };
        assert!((m.min_eigenvalue() - 1.0).abs() < 1e-15);
        assert!((m.max_eigenvalue() - 3.0).abs() < 1e-15);
        let n = Sym2 {
            a: -1.0,
            b: 0.0,
            c: -3.0,
        };
        assert_eq!(n.min_eigenvalue(), -3.0);
    }
}
