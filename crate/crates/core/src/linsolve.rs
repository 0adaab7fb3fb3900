//! Jacobi-preconditioned conjugate gradients for `(c0 I - c1 lap_h) x = b`.
//!
//! The mirrored Laplacian maps constants to zero and zero-mean fields to
//! zero-mean fields, so the solve splits exactly into a scalar equation for
//! the mean and an SPD system for the fluctuation. Only the fluctuation goes
//! through CG, with the tolerance taken relative to its own right-hand side.

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy)]
pub struct ShiftedLaplacian {
    grid: Grid,
    c0: f64,
    c1: f64,
}

impl ShiftedLaplacian {
    /// `c0 > 0`, `c1 >= 0`.
    pub fn new(grid: Grid, c0: f64, c1: f64) -> Self {
        debug_assert!(c0 > 0.0 && c1 >= 0.0);
        ShiftedLaplacian { grid, c0, c1 }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let cx = self.c1 / (g.hx() * g.hx());
        let cy = self.c1 / (g.hy() * g.hy());
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let c = x[k];
                let mut lap = 0.0;
                if i > 0 {
                    lap += cx * (x[k - 1] - c);
                }
                if i + 1 < nx {
                    lap += cx * (x[k + 1] - c);
                }
                if j > 0 {
                    lap += cy * (x[k - nx] - c);
                }
                if j + 1 < ny {
                    lap += cy * (x[k + nx] - c);
                }
                out[k] = self.c0 * c - lap;
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let g = &self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let cx = self.c1 / (g.hx() * g.hx());
        let cy = self.c1 / (g.hy() * g.hy());
        let mut d = Vec::with_capacity(g.len());
        for j in 0..ny {
            for i in 0..nx {
                let links_x = (i > 0) as u8 + (i + 1 < nx) as u8;
                let links_y = (j > 0) as u8 + (j + 1 < ny) as u8;
                d.push(self.c0 + cx * links_x as f64 + cy * links_y as f64);
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mean(a: &[f64]) -> f64 {
    a.iter().sum::<f64>() / a.len() as f64
}

/// Solves `op x = rhs` starting from `guess`.
pub fn solve(
    op: &ShiftedLaplacian,
    rhs: &[f64],
    guess: &[f64],
    tol: f64,
    max_iter: usize,
    label: &'static str,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = rhs.len();
    let b_mean = mean(rhs);
    let x_mean = b_mean / op.c0;
    let b: Vec<f64> = rhs.iter().map(|v| v - b_mean).collect();
    let b_norm = dot(&b, &b).sqrt();

    let mut x = vec![0.0; n];
    let mut stats = SolveStats {
        iterations: 0,
        relative_residual: 0.0,
    };
    if b_norm > 0.0 {
        let g_mean = mean(guess);
        for (xi, gi) in x.iter_mut().zip(guess) {
            *xi = gi - g_mean;
        }
        let diag = op.diagonal();
        let mut ap = vec![0.0; n];
        op.apply(&x, &mut ap);
        let mut r: Vec<f64> = b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let target = tol * b_norm;
        let mut res = dot(&r, &r).sqrt();
        while res > target {
            if stats.iterations >= max_iter {
                return Err(Error::LinearSolver {
                    solve: label,
                    iterations: stats.iterations,
                    residual: res / b_norm,
                });
            }
            op.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::LinearSolver {
                    solve: label,
                    iterations: stats.iterations,
                    residual: res / b_norm,
                });
            }
            let step = rz / pap;
            for k in 0..n {
                x[k] += step * p[k];
                r[k] -= step * ap[k];
            }
            for k in 0..n {
                z[k] = r[k] / diag[k];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
            res = dot(&r, &r).sqrt();
            stats.iterations += 1;
        }
        stats.relative_residual = res / b_norm;
        let drift = mean(&x);
        for xi in &mut x {
            *xi -= drift;
        }
    }
    for xi in &mut x {
        *xi += x_mean;
    }
    Ok((x, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_against_residual() {
        let g = Grid::new(12, 9, 1.0, 0.75).unwrap();
        let op = ShiftedLaplacian::new(g, 1.3, 0.02);
        let rhs: Vec<f64> = (0..g.len()).map(|k| ((k * 37 % 11) as f64).sin() + 2.0).collect();
        let (x, stats) = solve(&op, &rhs, &vec![0.0; g.len()], 1e-12, 500, "test").unwrap();
        let mut ax = vec![0.0; g.len()];
        op.apply(&x, &mut ax);
        let err: f64 = ax.iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(err <= 1e-11 * norm, "{err}");
        assert!(stats.iterations > 0);
    }

    #[test]
    fn constant_rhs_is_scalar_solve() {
        let g = Grid::square(8, 1.0).unwrap();
        let op = ShiftedLaplacian::new(g, 1.5, 0.7);
        let (x, stats) = solve(&op, &vec![3.0; g.len()], &vec![1.0; g.len()], 1e-10, 10, "test").unwrap();
        assert_eq!(stats.iterations, 0);
        assert!(x.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn preserves_sum_for_unit_shift() {
        let g = Grid::square(10, 1.0).unwrap();
        let op = ShiftedLaplacian::new(g, 1.0, 0.05);
        let rhs: Vec<f64> = (0..g.len()).map(|k| 1.0 + 0.5 * ((k as f64) * 0.37).cos()).collect();
        let (x, _) = solve(&op, &rhs, &rhs, 1e-10, 200, "test").unwrap();
        let (sx, sb): (f64, f64) = (x.iter().sum(), rhs.iter().sum());
        assert!((sx - sb).abs() <= 1e-13 * sb);
    }

    #[test]
    fn reports_non_convergence() {
        let g = Grid::square(16, 1.0).unwrap();
        let op = ShiftedLaplacian::new(g, 1.0, 10.0);
        let rhs: Vec<f64> = (0..g.len()).map(|k| (k % 7) as f64).collect();
        match solve(&op, &rhs, &vec![0.0; g.len()], 1e-14, 2, "probe") {
            Err(Error::LinearSolver { solve, iterations, .. }) => {
                assert_eq!(solve, "probe");
                assert_eq!(iterations, 2);
            }
            other => panic!("{other:?}"),
        }
    }
}
