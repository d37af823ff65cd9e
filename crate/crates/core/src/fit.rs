//! Least-squares fit of `F = A exp(-t / t_half) + A0`.
//!
//! Times are divided by the span of the data before fitting, so the problem
//! is well scaled whatever the unit, and rescaling the input times rescales
//! `t_half` by the same factor.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};

/// Gradient threshold on `J' r`, in data units.
pub const GRADIENT_TOL: f64 = 1e-10;
/// Gauss-Newton predicted decrease, relative to the cost, below which the fit has converged.
pub const DECREASE_TOL: f64 = 1e-13;
pub const MAX_ITERATIONS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub amplitude: f64,
    pub t_half: f64,
    pub offset: f64,
    /// Euclidean norm of the residuals.
    pub residual_norm: f64,
    /// Covariance of `(A, t_half, A0)` from the Gauss-Newton Hessian and the residual variance.
    pub covariance: [[f64; 3]; 3],
    pub iterations: usize,
    pub warning: Option<String>,
}

impl DecayFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (-t / self.t_half).exp() + self.offset
    }

    /// One-sigma uncertainty of `t_half`.
    pub fn t_half_sigma(&self) -> f64 {
        self.covariance[1][1].max(0.0).sqrt()
    }
}

/// Model and Jacobian in normalized time `u`, parameters `(A, ln theta, A0)`.
fn model(p: &Vector3<f64>, u: f64) -> (f64, Vector3<f64>) {
    let theta = p[1].exp();
    let e = (-u / theta).exp();
    (p[0] * e + p[2], Vector3::new(e, p[0] * e * u / theta, 1.0))
}

fn normal_equations(p: &Vector3<f64>, u: &[f64], y: &[f64]) -> (f64, Matrix3<f64>, Vector3<f64>) {
    let mut cost = 0.0;
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    for (&ui, &yi) in u.iter().zip(y) {
        let (f, j) = model(p, ui);
        let r = f - yi;
        cost += r * r;
        jtj += j * j.transpose();
        jtr += j * r;
    }
    (cost, jtj, jtr)
}

/// `g' (J'J)^-1 g`, the cost reduction of a full Gauss-Newton step.
fn predicted_decrease(jtj: &Matrix3<f64>, jtr: &Vector3<f64>) -> f64 {
    jtj.cholesky().map_or(f64::INFINITY, |ch| jtr.dot(&ch.solve(jtr)))
}

fn cost(p: &Vector3<f64>, u: &[f64], y: &[f64]) -> f64 {
    u.iter().zip(y).map(|(&ui, &yi)| (model(p, ui).0 - yi).powi(2)).sum()
}

/// Levenberg-Marquardt fit, initialized at `A0 = min`, `A = max - min`, `t_half = span / 3`.
pub fn fit_exponential(t: &[f64], f: &[f64]) -> Result<DecayFit> {
    if t.len() != f.len() {
        return Err(Error::invalid("fit", format!("{} times but {} values", t.len(), f.len())));
    }
    if t.len() < 4 {
        return Err(Error::invalid("fit", format!("needs at least 4 points, got {}", t.len())));
    }
    if t.iter().chain(f).any(|x| !x.is_finite()) {
        return Err(Error::invalid("fit", "non-finite input"));
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("fit", "times must be strictly increasing"));
    }
    let span = t[t.len() - 1] - t[0];
    let (lo, hi) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let m = t.len() as f64;

    if hi - lo <= 1e-14 * hi.abs().max(lo.abs()).max(1e-300) {
        let mean = f.iter().sum::<f64>() / m;
        let residual_norm = f.iter().map(|x| (x - mean).powi(2)).sum::<f64>().sqrt();
        let mut covariance = [[0.0; 3]; 3];
        covariance[2][2] = residual_norm * residual_norm / (m * (m - 1.0));
        return Ok(DecayFit {
            amplitude: 0.0,
            t_half: span / 3.0,
            offset: mean,
            residual_norm,
            covariance,
            iterations: 0,
            warning: Some("constant data: decay amplitude set to zero, t_half undetermined".into()),
        });
    }

    let u: Vec<f64> = t.iter().map(|x| x / span).collect();
    let mut p = Vector3::new(hi - lo, (1.0f64 / 3.0).ln(), lo);
    let mut lambda = 1e-3;
    let (mut c, mut jtj, mut jtr) = normal_equations(&p, &u, f);
    let mut iterations = 0;
    while jtr.amax() >= GRADIENT_TOL && predicted_decrease(&jtj, &jtr) > DECREASE_TOL * c {
        if iterations == MAX_ITERATIONS {
            return Err(Error::FitConvergence { iterations, amplitude: p[0], t_half: p[1].exp() * span, offset: p[2] });
        }
        iterations += 1;
        loop {
            let mut a = jtj;
            let floor = 1e-10 * jtj.diagonal().max();
            for k in 0..3 {
                a[(k, k)] += lambda * jtj[(k, k)].max(floor);
            }
            let step = a.cholesky().map(|ch| ch.solve(&(-jtr)));
            if let Some(step) = step {
                let trial = p + step;
                if cost(&trial, &u, f) <= c {
                    p = trial;
                    lambda = (lambda / 3.0).max(1e-15);
                    break;
                }
            }
            lambda *= 4.0;
            if lambda > 1e15 {
                // no descent left at working precision: accept if the gradient is at rounding level
                let scale = f.iter().map(|x| x.abs()).fold(0.0, f64::max) * m;
                if jtr.amax() < 1e3 * f64::EPSILON * scale {
                    return Ok(finish(p, span, &u, f, iterations));
                }
                return Err(Error::FitConvergence { iterations, amplitude: p[0], t_half: p[1].exp() * span, offset: p[2] });
            }
        }
        (c, jtj, jtr) = normal_equations(&p, &u, f);
    }
    Ok(finish(p, span, &u, f, iterations))
}

fn finish(p: Vector3<f64>, span: f64, u: &[f64], f: &[f64], iterations: usize) -> DecayFit {
    let (c, jtj, _) = normal_equations(&p, u, f);
    let dof = (u.len() - 3) as f64;
    let mut covariance = [[f64::NAN; 3]; 3];
    if let Some(inv) = jtj.try_inverse() {
        let s2 = c / dof;
        let scale = [1.0, p[1].exp() * span, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                covariance[i][j] = inv[(i, j)] * s2 * scale[i] * scale[j];
            }
        }
    }
    DecayFit { amplitude: p[0], t_half: p[1].exp() * span, offset: p[2], residual_norm: c.sqrt(), covariance, iterations, warning: None }
}
