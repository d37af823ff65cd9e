//! Single-mode input states and the amplitude fidelity.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Largest tolerated norm lost to truncation before a state is rejected.
pub const DEFAULT_TRUNCATION_LIMIT: f64 = 1e-4;

/// Input states of the cavity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StateSpec {
    Fock { n: usize },
    Coherent { alpha_re: f64, alpha_im: f64 },
    Cat { alpha_re: f64, alpha_im: f64 },
    Squeezed { r: f64 },
}

impl StateSpec {
    pub fn coherent(alpha: f64) -> Self {
        StateSpec::Coherent { alpha_re: alpha, alpha_im: 0.0 }
    }

    pub fn cat(alpha: f64) -> Self {
        StateSpec::Cat { alpha_re: alpha, alpha_im: 0.0 }
    }

    pub fn squeezed(r: f64) -> Self {
        StateSpec::Squeezed { r }
    }

    /// Normalized amplitudes on `cutoff` levels.
    pub fn amplitudes(&self, cutoff: usize, limit: f64) -> Result<Vec<C64>> {
        match *self {
            StateSpec::Fock { n } => {
                if n >= cutoff {
                    return Err(Error::Truncation(format!("Fock level {n} needs more than {cutoff} levels")));
                }
                let mut v = vec![C64::new(0.0, 0.0); cutoff];
                v[n] = C64::new(1.0, 0.0);
                Ok(v)
            }
            StateSpec::Coherent { alpha_re, alpha_im } => {
                coherent_state_with_limit(C64::new(alpha_re, alpha_im), cutoff, limit)
            }
            StateSpec::Cat { alpha_re, alpha_im } => cat_state_with_limit(C64::new(alpha_re, alpha_im), cutoff, limit),
            StateSpec::Squeezed { r } => squeezed_vacuum_with_limit(r, cutoff, limit),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            StateSpec::Fock { n } => format!("fock({n})"),
            StateSpec::Coherent { alpha_re, alpha_im } => format!("coherent({alpha_re}{alpha_im:+}i)"),
            StateSpec::Cat { alpha_re, alpha_im } => format!("cat({alpha_re}{alpha_im:+}i)"),
            StateSpec::Squeezed { r } => format!("squeezed({r})"),
        }
    }
}

/// Renormalize `v`, failing if more than `limit` of the norm was cut off.
fn renormalize(mut v: Vec<C64>, kept: f64, what: &str, limit: f64) -> Result<Vec<C64>> {
    let lost = 1.0 - kept;
    if lost > limit {
        return Err(Error::Truncation(format!(
            "{what} loses {lost:.3e} of its norm on {} levels (limit {limit:e})",
            v.len()
        )));
    }
    let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in &mut v {
        *c /= norm;
    }
    Ok(v)
}

/// Untruncated coherent amplitudes `e^{-|a|^2/2} a^n / sqrt(n!)` for `n < cutoff`.
fn coherent_raw(alpha: C64, cutoff: usize) -> Vec<C64> {
    let mut v = Vec::with_capacity(cutoff);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..cutoff {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        v.push(c);
    }
    v
}

pub fn coherent_state(alpha: C64, cutoff: usize) -> Result<Vec<C64>> {
    coherent_state_with_limit(alpha, cutoff, DEFAULT_TRUNCATION_LIMIT)
}

pub fn coherent_state_with_limit(alpha: C64, cutoff: usize, limit: f64) -> Result<Vec<C64>> {
    let v = coherent_raw(alpha, cutoff);
    let kept: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    renormalize(v, kept, "coherent state", limit)
}

/// Even cat state `N (|a> + |-a>)`.
pub fn cat_state(alpha: C64, cutoff: usize) -> Result<Vec<C64>> {
    cat_state_with_limit(alpha, cutoff, DEFAULT_TRUNCATION_LIMIT)
}

pub fn cat_state_with_limit(alpha: C64, cutoff: usize, limit: f64) -> Result<Vec<C64>> {
    if alpha.norm() == 0.0 {
        return StateSpec::Fock { n: 0 }.amplitudes(cutoff, limit);
    }
    let n2 = cat_normalization(alpha).powi(2);
    let v: Vec<C64> = coherent_raw(alpha, cutoff)
        .into_iter()
        .enumerate()
        .map(|(n, c)| if n % 2 == 0 { c * (2.0 * n2.sqrt()) } else { C64::new(0.0, 0.0) })
        .collect();
    let kept: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    renormalize(v, kept, "cat state", limit)
}

/// `N = [2 (1 + e^{-2|a|^2})]^{-1/2}`.
pub fn cat_normalization(alpha: C64) -> f64 {
    (2.0 * (1.0 + (-2.0 * alpha.norm_sqr()).exp())).powf(-0.5)
}

/// Squeezed vacuum `exp((r a'^2 - r a^2) / 2)|0>`.
pub fn squeezed_vacuum(r: f64, cutoff: usize) -> Result<Vec<C64>> {
    squeezed_vacuum_with_limit(r, cutoff, DEFAULT_TRUNCATION_LIMIT)
}

pub fn squeezed_vacuum_with_limit(r: f64, cutoff: usize, limit: f64) -> Result<Vec<C64>> {
    if !r.is_finite() {
        return Err(Error::invalid("r", "must be finite"));
    }
    let t = r.tanh();
    let mut v = vec![C64::new(0.0, 0.0); cutoff];
    let mut c = 1.0 / r.cosh().sqrt();
    for n in (0..cutoff).step_by(2) {
        if n > 0 {
            c *= t * (((n - 1) as f64) / n as f64).sqrt();
        }
        v[n] = C64::new(c, 0.0);
    }
    let kept: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    renormalize(v, kept, "squeezed vacuum", limit)
}

/// Mean photon number of amplitudes.
pub fn mean_number(psi: &[C64]) -> f64 {
    psi.iter().enumerate().map(|(n, c)| n as f64 * c.norm_sqr()).sum()
}

/// Amplitude fidelity `sqrt(<psi| rho |psi>)`, clamped to `[0, 1]`.
///
/// The square root is part of the definition used throughout: a state that
/// overlaps the reference with probability `p` has fidelity `sqrt(p)`.
pub fn fidelity(rho: &DMatrix<C64>, psi: &[C64]) -> f64 {
    assert_eq!(rho.nrows(), psi.len(), "reference and density matrix dimensions differ");
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..psi.len() {
        if psi[i] == C64::new(0.0, 0.0) {
            continue;
        }
        let mut row = C64::new(0.0, 0.0);
        for j in 0..psi.len() {
            row += rho[(i, j)] * psi[j];
        }
        acc += psi[i].conj() * row;
    }
    acc.re.clamp(0.0, 1.0).sqrt()
}

/// Projector `|psi><psi|` as a dense matrix.
pub fn projector(psi: &[C64]) -> DMatrix<C64> {
    DMatrix::from_fn(psi.len(), psi.len(), |i, j| psi[i] * psi[j].conj())
}
