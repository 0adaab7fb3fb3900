//! Cell-centred grids on axis-aligned rectangles and the discrete operators
//! used by the solver and the functionals.
//!
//! Cell `(i, j)` sits at `((i + 1/2) hx, (j + 1/2) hy)` and values are stored
//! row-major (`j * nx + i`). Homogeneous Neumann conditions are realised by
//! even reflection into ghost cells, which is the same as setting the normal
//! flux through every boundary face to zero.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl Grid {
    pub const MIN_CELLS: usize = 4;

    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < Self::MIN_CELLS || ny < Self::MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "need at least {} cells per direction, got {nx}x{ny}",
                Self::MIN_CELLS
            )));
        }
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "side lengths must be positive, got {lx} x {ly}"
            )));
        }
        Ok(Grid { nx, ny, lx, ly })
    }

    /// Square of side `side` with `n x n` cells.
    pub fn square(n: usize, side: f64) -> Result<Self> {
        Grid::new(n, n, side, side)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Cell-centre coordinates of cell `(i, j)`.
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    /// Eigenvalue of `-laplacian` for the mirrored stencil on the mode
    /// `cos(m pi x / Lx) cos(n pi y / Ly)`.
    pub fn mode_eigenvalue(&self, m: usize, n: usize) -> f64 {
        let hx = self.hx();
        let hy = self.hy();
        let kx = 2.0 / (hx * hx) * (1.0 - (m as f64 * std::f64::consts::PI * hx / self.lx).cos());
        let ky = 2.0 / (hy * hy) * (1.0 - (n as f64 * std::f64::consts::PI * hy / self.ly).cos());
        kx + ky
    }

    /// First nonzero eigenvalue of the continuous Neumann Laplacian on the rectangle.
    pub fn poincare_eigenvalue(&self) -> f64 {
        let l = self.lx.max(self.ly);
        std::f64::consts::PI * std::f64::consts::PI / (l * l)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        ScalarField {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every cell centre.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.center(i, j);
                values.push(f(x, y));
            }
        }
        ScalarField { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a * self + b * other`
    pub fn lincomb(&self, a: f64, other: &ScalarField, b: f64) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    /// `max |f - c|`
    pub fn linf_distance(&self, c: f64) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max((v - c).abs()))
    }

    /// `integral |f - c|`
    pub fn l1_distance(&self, c: f64) -> f64 {
        self.values.iter().map(|&v| (v - c).abs()).sum::<f64>() * self.grid.cell_area()
    }

    /// `integral (f - c)^2`
    pub fn l2_distance_squared(&self, c: f64) -> f64 {
        self.values.iter().map(|&v| (v - c) * (v - c)).sum::<f64>() * self.grid.cell_area()
    }
}

/// Face-centred vector field. `x` lives on the `(nx + 1) * ny` faces normal to
/// x (face `i` separates cells `i - 1` and `i`), `y` on the `nx * (ny + 1)`
/// faces normal to y. Boundary faces carry zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl VectorField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// x-component on the face at `x = i * hx`, row `j`.
    #[inline]
    pub fn x_at(&self, i: usize, j: usize) -> f64 {
        self.x[j * (self.grid.nx + 1) + i]
    }

    /// y-component on the face at `y = j * hy`, column `i`.
    #[inline]
    pub fn y_at(&self, i: usize, j: usize) -> f64 {
        self.y[j * self.grid.nx + i]
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let (nx, ny) = (g.nx, g.ny);
    let cx = 1.0 / (g.hx() * g.hx());
    let cy = 1.0 / (g.hy() * g.hy());
    let v = &f.values;
    let mut out = vec![0.0; g.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let c = v[k];
            let mut acc = 0.0;
            if i > 0 {
                acc += cx * (v[k - 1] - c);
            }
            if i + 1 < nx {
                acc += cx * (v[k + 1] - c);
            }
            if j > 0 {
                acc += cy * (v[k - nx] - c);
            }
            if j + 1 < ny {
                acc += cy * (v[k + nx] - c);
            }
            out[k] = acc;
        }
    }
    ScalarField { grid: g, values: out }
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let g = f.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    let v = &f.values;
    let mut x = vec![0.0; (nx + 1) * ny];
    for j in 0..ny {
        for i in 1..nx {
            x[j * (nx + 1) + i] = (v[j * nx + i] - v[j * nx + i - 1]) / hx;
        }
    }
    let mut y = vec![0.0; nx * (ny + 1)];
    for j in 1..ny {
        for i in 0..nx {
            y[j * nx + i] = (v[j * nx + i] - v[(j - 1) * nx + i]) / hy;
        }
    }
    VectorField { grid: g, x, y }
}

/// Discrete `div(coeff * u * grad(phi))` in conservative flux form with the
/// face value of `u` taken upwind of the face velocity `coeff * d(phi)/dn`.
pub fn chemotactic_div(u: &ScalarField, phi: &ScalarField, coeff: f64) -> ScalarField {
    let g = u.grid;
    debug_assert_eq!(g, phi.grid);
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    let uv = &u.values;
    let pv = &phi.values;
    let mut out = vec![0.0; g.len()];
    for j in 0..ny {
        for i in 1..nx {
            let (l, r) = (j * nx + i - 1, j * nx + i);
            let vel = coeff * (pv[r] - pv[l]) / hx;
            let up = if vel >= 0.0 { uv[l] } else { uv[r] };
            let flux = vel * up / hx;
            out[l] += flux;
            out[r] -= flux;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let (b, t) = ((j - 1) * nx + i, j * nx + i);
            let vel = coeff * (pv[t] - pv[b]) / hy;
            let up = if vel >= 0.0 { uv[b] } else { uv[t] };
            let flux = vel * up / hy;
            out[b] += flux;
            out[t] -= flux;
        }
    }
    ScalarField { grid: g, values: out }
}

/// Midpoint quadrature.
pub fn integrate(f: &ScalarField) -> f64 {
    f.sum() * f.grid.cell_area()
}

/// `integral a . b` over faces, each face weighted by the cell area.
pub fn face_dot(a: &VectorField, b: &VectorField) -> f64 {
    debug_assert_eq!(a.grid, b.grid);
    let sx: f64 = a.x.iter().zip(&b.x).map(|(p, q)| p * q).sum();
    let sy: f64 = a.y.iter().zip(&b.y).map(|(p, q)| p * q).sum();
    (sx + sy) * a.grid.cell_area()
}

/// `integral f * g` with midpoint quadrature.
pub fn cell_dot(f: &ScalarField, g: &ScalarField) -> f64 {
    debug_assert_eq!(f.grid, g.grid);
    f.values.iter().zip(&g.values).map(|(p, q)| p * q).sum::<f64>() * f.grid.cell_area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pseudo_random(grid: Grid, seed: u64) -> ScalarField {
        let mut s = seed;
        ScalarField::from_fn(grid, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64)
        })
    }

    #[test]
    fn grid_rejects_tiny_or_degenerate() {
        assert!(Grid::new(3, 8, 1.0, 1.0).is_err());
        assert!(Grid::new(8, 8, 0.0, 1.0).is_err());
        assert!(Grid::new(8, 8, 1.0, f64::NAN).is_err());
        let g = Grid::new(4, 5, 2.0, 1.0).unwrap();
        assert_eq!(g.center(0, 0), (0.25, 0.1));
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = Grid::new(9, 7, 1.3, 0.7).unwrap();
        let l = laplacian(&ScalarField::constant(g, 7.0));
        assert!(l.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cosine_is_discrete_eigenfield() {
        let g = Grid::new(32, 6, 2.0, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |x, _| (PI * x / g.lx()).cos());
        let hx = g.hx();
        let lambda = -(2.0 / (hx * hx)) * (1.0 - (PI * hx / g.lx()).cos());
        let l = laplacian(&f);
        for (a, b) in l.values().iter().zip(f.values()) {
            assert!((a - lambda * b).abs() < 1e-11, "{a} vs {}", lambda * b);
        }
        assert!((g.mode_eigenvalue(1, 0) + lambda).abs() < 1e-12);
    }

    #[test]
    fn laplacian_sum_telescopes() {
        let g = Grid::new(17, 11, 1.0, 2.0).unwrap();
        let l = laplacian(&pseudo_random(g, 3));
        let abs: f64 = l.values().iter().map(|v| v.abs()).sum();
        assert!(l.sum().abs() <= 1e-12 * abs);
    }

    #[test]
    fn laplacian_second_order_for_neumann_compatible_field() {
        // cos(pi x) cos(2 pi y) on the unit square has zero normal derivative.
        let err = |n: usize| {
            let g = Grid::square(n, 1.0).unwrap();
            let f = ScalarField::from_fn(g, |x, y| (PI * x).cos() * (2.0 * PI * y).cos());
            let l = laplacian(&f);
            l.values()
                .iter()
                .zip(f.values())
                .map(|(a, b)| (a + 5.0 * PI * PI * b).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(16), err(32));
        let ratio = e1 / e2;
        assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn gradient_constant_and_boundary_faces() {
        let g = Grid::new(6, 5, 1.0, 1.0).unwrap();
        let z = gradient(&ScalarField::constant(g, 3.0));
        assert!(z.x().iter().chain(z.y()).all(|&v| v == 0.0));

        let r = gradient(&pseudo_random(g, 9));
        for j in 0..g.ny() {
            assert_eq!(r.x_at(0, j), 0.0);
            assert_eq!(r.x_at(g.nx(), j), 0.0);
        }
        for i in 0..g.nx() {
            assert_eq!(r.y_at(i, 0), 0.0);
            assert_eq!(r.y_at(i, g.ny()), 0.0);
        }
    }

    #[test]
    fn gradient_of_cosine_is_second_order_at_faces() {
        let err = |n: usize| {
            let g = Grid::new(n, 4, 1.0, 1.0).unwrap();
            let f = ScalarField::from_fn(g, |x, _| (PI * x).cos());
            let grad = gradient(&f);
            let mut e: f64 = 0.0;
            for i in 1..n {
                let x = i as f64 * g.hx();
                e = e.max((grad.x_at(i, 0) + PI * (PI * x).sin()).abs());
            }
            e
        };
        let ratio = err(32) / err(64);
        assert!((3.8..4.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn chemotactic_div_reduces_for_constant_density() {
        let g = Grid::new(10, 8, 1.0, 1.5).unwrap();
        let phi = pseudo_random(g, 5);
        let c = 2.5;
        let d = chemotactic_div(&ScalarField::constant(g, c), &phi, -1.7);
        let expect = laplacian(&phi);
        let scale = expect.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in d.values().iter().zip(expect.values()) {
            assert!((a - c * -1.7 * b).abs() <= 1e-12 * scale * c * 1.7);
        }
    }

    #[test]
    fn chemotactic_div_zero_for_constant_potential() {
        let g = Grid::new(6, 6, 1.0, 1.0).unwrap();
        let d = chemotactic_div(&pseudo_random(g, 1), &ScalarField::constant(g, 4.0), 3.0);
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn chemotactic_div_conserves() {
        let g = Grid::new(13, 9, 1.0, 1.0).unwrap();
        let d = chemotactic_div(&pseudo_random(g, 11), &pseudo_random(g, 12), 1.3);
        let abs: f64 = d.values().iter().map(|v| v.abs()).sum();
        assert!(integrate(&d).abs() <= 1e-12 * abs * g.cell_area());
    }

    #[test]
    fn integrate_examples() {
        let g = Grid::square(64, 1.0).unwrap();
        assert_eq!(integrate(&ScalarField::constant(g, 1.0)), 1.0);
        let g2 = Grid::new(16, 8, 2.0, 1.0).unwrap();
        assert_eq!(integrate(&ScalarField::constant(g2, 3.0)), 6.0);
        let f = ScalarField::from_fn(g2, |x, _| (2.0 * PI * x / 2.0).cos());
        assert!(integrate(&f).abs() <= 1e-12);
    }

    #[test]
    fn summation_by_parts() {
        let g = Grid::new(7, 9, 1.0, 0.8).unwrap();
        let f = pseudo_random(g, 21);
        let h = pseudo_random(g, 22);
        let lhs = face_dot(&gradient(&f), &gradient(&h));
        let rhs = -cell_dot(&f, &laplacian(&h));
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }
}
