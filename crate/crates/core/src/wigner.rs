//! Wigner functions of single-mode density matrices via displaced parity.
//!
//! Quadratures are `x = (a + a') / sqrt 2`, `p = (a - a') / (i sqrt 2)`, so
//! `W(x, p) = Tr[rho D(beta) P D(beta)'] / pi` with `beta = (x + i p) / sqrt 2`
//! integrates to one over `dx dp` and the vacuum peaks at `1 / pi`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::C64;

/// Grid extent and resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nx: usize,
    pub np: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { x_min: -4.5, x_max: 4.5, p_min: -4.5, p_max: 4.5, nx: 101, np: 101 }
    }
}

impl GridSpec {
    pub fn xs(&self) -> Vec<f64> {
        crate::eigen::linspace(self.x_min, self.x_max, self.nx)
    }

    pub fn ps(&self) -> Vec<f64> {
        crate::eigen::linspace(self.p_min, self.p_max, self.np)
    }
}

/// Wigner values on a grid, `values[ix * np + ip]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WignerGrid {
    pub spec: GridSpec,
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    pub values: Vec<f64>,
}

/// Acceptable range of the grid integral.
pub const INTEGRAL_BOUNDS: (f64, f64) = (0.98, 1.02);

impl WignerGrid {
    pub fn at(&self, ix: usize, ip: usize) -> f64 {
        self.values[ix * self.ps.len() + ip]
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        let (nx, np) = (self.xs.len(), self.ps.len());
        if nx < 2 || np < 2 {
            return 0.0;
        }
        let dx = (self.spec.x_max - self.spec.x_min) / (nx - 1) as f64;
        let dp = (self.spec.p_max - self.spec.p_min) / (np - 1) as f64;
        let mut acc = 0.0;
        for ix in 0..nx {
            let wx = if ix == 0 || ix == nx - 1 { 0.5 } else { 1.0 };
            for ip in 0..np {
                let wp = if ip == 0 || ip == np - 1 { 0.5 } else { 1.0 };
                acc += wx * wp * self.at(ix, ip);
            }
        }
        acc * dx * dp
    }

    pub fn covers_support(&self) -> bool {
        let i = self.integral();
        i >= INTEGRAL_BOUNDS.0 && i <= INTEGRAL_BOUNDS.1
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n + 1];
    for k in 1..=n {
        v[k] = v[k - 1] + (k as f64).ln();
    }
    v
}

/// Generalized Laguerre polynomials `L_j^{(k)}(x)` for `j = 0..=n`.
fn laguerre(n: usize, k: f64, x: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(n + 1);
    v.push(1.0);
    if n >= 1 {
        v.push(1.0 + k - x);
    }
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + k - x) * v[j] - (jf + k) * v[j - 1]) / (jf + 1.0);
        v.push(next);
    }
    v
}

/// Matrix elements `<m| D(gamma) |n>` for `m, n < dim`.
pub fn displacement_elements(gamma: C64, dim: usize) -> DMatrix<C64> {
    let lf = ln_factorials(dim);
    let x = gamma.norm_sqr();
    let r = gamma.norm();
    let phase = if r > 0.0 { gamma / r } else { C64::new(1.0, 0.0) };
    let mut out = DMatrix::zeros(dim, dim);
    for d in 0..dim {
        // d = |m - n|; lower index runs over 0..dim - d
        let lag = laguerre(dim - 1 - d, d as f64, x);
        for low in 0..dim - d {
            let high = low + d;
            let log_mag = 0.5 * (lf[low] - lf[high]) - 0.5 * x + if d > 0 { d as f64 * r.ln() } else { 0.0 };
            let mag = if d > 0 && r == 0.0 { 0.0 } else { log_mag.exp() } * lag[low];
            // m >= n: gamma^{d}; m < n: (-gamma*)^{d}
            let below = phase.powi(d as i32) * mag;
            let above = (-phase.conj()).powi(d as i32) * mag;
            out[(high, low)] = below;
            if d > 0 {
                out[(low, high)] = above;
            }
        }
    }
    out
}

/// `W(x, p)` at one phase-space point.
pub fn wigner_point(rho: &DMatrix<C64>, x: f64, p: f64) -> f64 {
    let n = rho.nrows();
    let beta = C64::new(x, p) / std::f64::consts::SQRT_2;
    let d = displacement_elements(beta * 2.0, n);
    let mut acc = C64::new(0.0, 0.0);
    for row in 0..n {
        let sign = if row % 2 == 0 { 1.0 } else { -1.0 };
        for col in 0..n {
            // rho_{row,col} <col| D |row> (-1)^row
            acc += rho[(row, col)] * d[(col, row)] * sign;
        }
    }
    acc.re / std::f64::consts::PI
}

/// Wigner function of `rho` on `spec`, rows evaluated in parallel.
pub fn wigner(rho: &DMatrix<C64>, spec: &GridSpec) -> WignerGrid {
    let xs = spec.xs();
    let ps = spec.ps();
    let values: Vec<f64> = xs
        .par_iter()
        .flat_map_iter(|&x| ps.iter().map(move |&p| wigner_point(rho, x, p)).collect::<Vec<_>>())
        .collect();
    WignerGrid { spec: *spec, xs, ps, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{cat_state, coherent_state, projector};
    use std::f64::consts::PI;

    fn vacuum(n: usize) -> DMatrix<C64> {
        let mut r = DMatrix::zeros(n, n);
        r[(0, 0)] = C64::new(1.0, 0.0);
        r
    }

    /// `Tr[rho D(beta) P D(beta)'] / pi` by explicit matrix exponentials on a padded space.
    fn brute_force(rho: &DMatrix<C64>, x: f64, p: f64) -> f64 {
        let pad = 70;
        let n = rho.nrows();
        let a = DMatrix::from_fn(pad, pad, |i, j| if j == i + 1 { C64::new((j as f64).sqrt(), 0.0) } else { C64::new(0.0, 0.0) });
        let beta = C64::new(x, p) / 2f64.sqrt();
        let d = (a.adjoint() * beta - &a * beta.conj()).exp();
        let parity = DMatrix::from_fn(pad, pad, |i, j| {
            if i == j {
                C64::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let op = &d * parity * d.adjoint();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += rho[(i, j)] * op[(j, i)];
            }
        }
        acc.re / PI
    }

    #[test]
    fn vacuum_is_centered_gaussian() {
        let r = vacuum(6);
        assert!((wigner_point(&r, 0.0, 0.0) - 1.0 / PI).abs() < 1e-15);
        for (x, p) in [(1.0f64, 0.0f64), (0.3, -1.2), (-2.0, 2.0)] {
            let expected = (-(x * x + p * p) as f64).exp() / PI;
            assert!((wigner_point(&r, x, p) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn coherent_state_is_displaced_vacuum() {
        let alpha = C64::new(1.0, 0.5);
        let rho = projector(&coherent_state(alpha, 14).unwrap());
        let (x0, p0) = (2f64.sqrt() * alpha.re, 2f64.sqrt() * alpha.im);
        for (x, p) in [(x0, p0), (x0 + 0.5, p0), (0.0, 0.0), (x0 - 1.0, p0 + 0.7)] {
            let expected = (-((x - x0).powi(2) + (p - p0).powi(2))).exp() / PI;
            assert!((wigner_point(&rho, x, p) - expected).abs() < 1e-5, "({x}, {p})");
        }
    }

    #[test]
    fn cat_matches_brute_force_and_is_negative_somewhere() {
        let rho = projector(&cat_state(C64::new(1.0, 0.0), 12).unwrap());
        for (x, p) in [(0.0, 0.0), (1.4, 0.0), (0.0, 1.1), (-0.7, 2.0), (2.5, -1.5)] {
            let fast = wigner_point(&rho, x, p);
            let slow = brute_force(&rho, x, p);
            assert!((fast - slow).abs() < 1e-9, "({x}, {p}): {fast} vs {slow}");
        }
        let grid = wigner(&rho, &GridSpec::default());
        assert!(grid.min() < -0.01, "min {}", grid.min());
        // interference peak at the origin exceeds the two-Gaussian background
        let alpha: f64 = 1.0;
        let n2 = crate::states::cat_normalization(C64::new(alpha, 0.0)).powi(2);
        let background = n2 * 2.0 * (-(2.0 * alpha * alpha)).exp() / PI;
        assert!(wigner_point(&rho, 0.0, 0.0) > background);
    }

    #[test]
    fn displacement_is_unitary_on_low_levels() {
        let d = displacement_elements(C64::new(0.4, -0.3), 40);
        let prod = d.adjoint() * &d;
        for i in 0..10 {
            for j in 0..10 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - C64::new(expected, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn default_grids_integrate_to_one() {
        for rho in [
            vacuum(10),
            projector(&coherent_state(C64::new(1.0, 0.0), 10).unwrap()),
            projector(&cat_state(C64::new(1.0, 0.0), 10).unwrap()),
        ] {
            let g = wigner(&rho, &GridSpec::default());
            assert_eq!(g.values.len(), 101 * 101);
            assert!(g.covers_support(), "integral {}", g.integral());
        }
    }

    #[test]
    fn narrow_grid_fails_coverage() {
        let spec = GridSpec { x_min: -0.5, x_max: 0.5, p_min: -0.5, p_max: 0.5, nx: 21, np: 21 };
        let g = wigner(&vacuum(4), &spec);
        assert!(!g.covers_support());
    }
}
