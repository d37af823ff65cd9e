//! Protocol Hamiltonian, its single-excitation block, and the mean-field
//! calibration that links a microwave drive to the magnon-phonon coupling.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockSpace, Mode, Operator};
use crate::pulses::PulseSchedule;
use crate::units::{PhysicalParams, GYROMAGNETIC_RATIO, YIG_SPIN_DENSITY};
use crate::C64;

/// 3x3 matrix in the basis (phonon, magnon, cavity) of single excitations.
pub type ThreeLevelMatrix = Matrix3<C64>;

/// Drive Rabi frequency `(sqrt 5 / 4) gamma sqrt(rho V) B0` in rad/s.
pub fn drive_rabi_frequency(b0: f64, volume: f64) -> Result<f64> {
    if !(volume > 0.0) || !volume.is_finite() {
        return Err(Error::Domain(format!("sample volume must be positive, got {volume}")));
    }
    if !(b0 >= 0.0) || !b0.is_finite() {
        return Err(Error::Domain(format!("drive field must be non-negative, got {b0}")));
    }
    Ok(5f64.sqrt() / 4.0 * GYROMAGNETIC_RATIO * (YIG_SPIN_DENSITY * volume).sqrt() * b0)
}

/// Steady-state classical amplitudes of the driven system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFields {
    pub alpha: C64,
    pub beta: C64,
    pub eta: C64,
    pub g_mb_eff: C64,
    pub delta_m_eff: f64,
    pub iterations: usize,
}

const MEAN_FIELD_TOL: f64 = 1e-12;
const MEAN_FIELD_MAX_ITER: usize = 10_000;

fn magnon_amplitude(p: &PhysicalParams, delta_a: f64, delta_m_eff: f64, eps_p: f64) -> C64 {
    let i = C64::i();
    let cav = i * delta_a + p.kappa_a;
    let mag = i * delta_m_eff + p.kappa_m;
    eps_p * cav / (p.g_ma * p.g_ma + mag * cav)
}

fn phonon_amplitude(p: &PhysicalParams, eta: C64) -> C64 {
    let i = C64::i();
    -i * p.g_mb * eta.norm_sqr() / (i * p.omega_b + p.kappa_b)
}

/// Self-consistent `(eta, beta)` for detunings `delta_a`, `delta_m` and drive `eps_p`.
///
/// All rates in the same units (usually rad/s). Iterates on `beta` with
/// adaptive under-relaxation until successive iterates agree to `1e-12`
/// relative.
pub fn steady_mean_fields(p: &PhysicalParams, delta_a: f64, delta_m: f64, eps_p: f64) -> Result<MeanFields> {
    let i = C64::i();
    let mut beta = C64::new(0.0, 0.0);
    let mut relax = 1.0;
    let mut last_residual = f64::INFINITY;
    for it in 1..=MEAN_FIELD_MAX_ITER {
        let delta_m_eff = delta_m + 2.0 * p.g_mb * beta.re;
        let eta = magnon_amplitude(p, delta_a, delta_m_eff, eps_p);
        let target = phonon_amplitude(p, eta);
        let residual = (target - beta).norm();
        let scale = target.norm().max(beta.norm()).max(f64::MIN_POSITIVE);
        if residual <= MEAN_FIELD_TOL * scale || residual == 0.0 {
            let beta = target;
            let delta_m_eff = delta_m + p.g_mb * (beta + beta.conj()).re;
            let eta = magnon_amplitude(p, delta_a, delta_m_eff, eps_p);
            let alpha = -i * p.g_ma * eta / (i * delta_a + p.kappa_a);
            return Ok(MeanFields {
                alpha,
                beta,
                eta,
                g_mb_eff: eta * p.g_mb,
                delta_m_eff,
                iterations: it,
            });
        }
        if residual > last_residual {
            relax = (relax * 0.5f64).max(1e-3);
        }
        last_residual = residual;
        beta += relax * (target - beta);
    }
    Err(Error::Convergence { iterations: MEAN_FIELD_MAX_ITER, residual: last_residual })
}

/// Coefficients of the protocol Hamiltonian at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficients {
    pub delta_a: f64,
    pub delta_m: f64,
    /// Magnon-phonon coupling `G = Omega_p / 2`.
    pub g_mb: f64,
    /// Cavity-magnon coupling `g = Omega_s / 2`.
    pub g_ma: f64,
}

pub fn coefficients(t: f64, s: &PulseSchedule) -> Coefficients {
    let (delta_a, delta_m) = s.detunings(t);
    Coefficients { delta_a, delta_m, g_mb: s.g_mb(t), g_ma: s.g_ma }
}

/// Phase `e^{2 i t}` multiplying `m^dagger b^dagger`; its conjugate multiplies `m b`.
pub fn counter_rotating_phase(t: f64) -> C64 {
    C64::from_polar(1.0, 2.0 * t)
}

/// Full three-mode Hamiltonian at time `t`.
///
/// `H = delta_a a'a + delta_m m'm + G (m'b + b'm) + g (m'a + a'm)`, plus
/// `G (e^{-2it} m b + e^{2it} m'b')` unless `rwa` is set.
pub fn build_hamiltonian(t: f64, space: &FockSpace, s: &PulseSchedule, rwa: bool) -> Operator {
    let c = coefficients(t, s);
    let phase = counter_rotating_phase(t);
    let (sa, sm, sb) = (space.stride(Mode::Cavity), space.stride(Mode::Magnon), space.stride(Mode::Phonon));
    let [_, nm_max, nb_max] = space.cutoffs;
    let mut triplets = Vec::new();
    let re = |x: f64| C64::new(x, 0.0);
    for i in 0..space.dim() {
        let [na, nm, nb] = space.levels(i);
        let diag = c.delta_a * na as f64 + c.delta_m * nm as f64;
        if diag != 0.0 {
            triplets.push((i, i, re(diag)));
        }
        // m^dagger b and its adjoint
        if nb > 0 && nm + 1 < nm_max {
            let v = re(c.g_mb * ((nm + 1) as f64 * nb as f64).sqrt());
            let j = i + sm - sb;
            triplets.push((j, i, v));
            triplets.push((i, j, v));
        }
        // m^dagger a and its adjoint
        if na > 0 && nm + 1 < nm_max {
            let v = re(c.g_ma * ((nm + 1) as f64 * na as f64).sqrt());
            let j = i + sm - sa;
            triplets.push((j, i, v));
            triplets.push((i, j, v));
        }
        // m^dagger b^dagger and its adjoint m b
        if !rwa && nm + 1 < nm_max && nb + 1 < nb_max {
            let amp = c.g_mb * ((nm + 1) as f64 * (nb + 1) as f64).sqrt();
            let j = i + sm + sb;
            triplets.push((j, i, phase * amp));
            triplets.push((i, j, phase.conj() * amp));
        }
    }
    Operator::from_triplets(space.dim(), triplets, true)
}

/// Single-excitation block in the basis (phonon, magnon, cavity).
pub fn single_excitation_matrix(t: f64, s: &PulseSchedule) -> ThreeLevelMatrix {
    let c = coefficients(t, s);
    three_level(c.g_mb, c.delta_m, c.delta_a, c.g_ma)
}

/// The same block with the pump off.
pub fn stokes_matrix(t: f64, s: &PulseSchedule) -> ThreeLevelMatrix {
    let c = coefficients(t, s);
    three_level(0.0, c.delta_m, c.delta_a, c.g_ma)
}

/// `[[0, Op/2, 0], [Op/2, dm, Os/2], [0, Os/2, da]]` given `Op/2` and `Os/2`.
pub fn three_level(half_pump: f64, delta_m: f64, delta_a: f64, half_stokes: f64) -> ThreeLevelMatrix {
    let z = C64::new(0.0, 0.0);
    let re = |x: f64| C64::new(x, 0.0);
    Matrix3::new(
        z,
        re(half_pump),
        z,
        re(half_pump),
        re(delta_m),
        re(half_stokes),
        z,
        re(half_stokes),
        re(delta_a),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{mode_operator, OpKind};
    use nalgebra::DMatrix;
    use std::f64::consts::TAU;

    fn fig1() -> PulseSchedule {
        PulseSchedule::new(0.1 / TAU, 108.7, -612.2, 612.2, 1101.6, 164.9, 14.05, 13.94)
    }

    fn sample_times() -> Vec<f64> {
        (0..100).map(|k| -2000.0 + 41.3 * k as f64).collect()
    }

    #[test]
    fn rabi_frequency_matches_formula() {
        assert_eq!(drive_rabi_frequency(0.0, 1e-12).unwrap(), 0.0);
        let v = drive_rabi_frequency(1e-4, 1e-12).unwrap();
        let expected = 5f64.sqrt() / 4.0 * (TAU * 28e9) * (4.22e15f64).sqrt() * 1e-4;
        assert!((v - expected).abs() <= 1e-12 * expected);
        assert!((v - 6.388_797_692_926_67e14).abs() < 1e2, "{v:e}");
        let v2 = drive_rabi_frequency(1e-4, 2e-12).unwrap();
        assert!((v2 / v - 2f64.sqrt()).abs() < 1e-12);
        assert!(matches!(drive_rabi_frequency(1e-4, 0.0), Err(Error::Domain(_))));
    }

    fn calib_params(g_mb: f64) -> PhysicalParams {
        PhysicalParams {
            omega_a: TAU * 10e9,
            omega_m: TAU * 10e9,
            omega_b: TAU * 10e6,
            g_ma: TAU * 1e6,
            g_mb,
            kappa_a: TAU * 1e6,
            kappa_m: TAU * 1e6,
            kappa_b: 100.0,
            t_bath: 0.0,
        }
    }

    #[test]
    fn undriven_fields_vanish() {
        let m = steady_mean_fields(&calib_params(TAU * 0.1), 0.0, TAU * 10e6, 0.0).unwrap();
        assert_eq!(m.eta, C64::new(0.0, 0.0));
        assert_eq!(m.beta, C64::new(0.0, 0.0));
        assert_eq!(m.g_mb_eff, C64::new(0.0, 0.0));
    }

    #[test]
    fn decoupled_mechanics_is_closed_form() {
        let p = calib_params(0.0);
        let (da, dm, eps) = (TAU * 0.3e6, TAU * 10e6, 1e14);
        let m = steady_mean_fields(&p, da, dm, eps).unwrap();
        let i = C64::i();
        let cav = i * da + p.kappa_a;
        let expected = eps * cav / (p.g_ma * p.g_ma + (i * dm + p.kappa_m) * cav);
        assert!((m.eta - expected).norm() <= 1e-14 * expected.norm());
        assert_eq!(m.beta, C64::new(0.0, 0.0));
        assert_eq!(m.delta_m_eff, dm);
    }

    #[test]
    fn weak_magnetostriction_matches_one_shot() {
        let p = calib_params(TAU * 1e-3);
        let (da, dm, eps) = (0.0, TAU * 10e6, 3e13);
        let m = steady_mean_fields(&p, da, dm, eps).unwrap();
        let one_shot = magnon_amplitude(&p, da, dm, eps);
        assert!(((m.eta - one_shot) / one_shot).norm() < 1e-6);
        assert!(m.beta.norm() > 0.0);
    }

    #[test]
    fn fixed_point_is_self_consistent() {
        let p = calib_params(TAU * 0.5);
        let (da, dm, eps) = (0.0, TAU * 10e6, 5e14);
        let m = steady_mean_fields(&p, da, dm, eps).unwrap();
        assert!((m.delta_m_eff - dm - p.g_mb * (m.beta + m.beta.conj()).re).abs() < 1e-9 * dm);
        assert_eq!(m.g_mb_eff, m.eta * p.g_mb);
        let again = phonon_amplitude(&p, magnon_amplitude(&p, da, m.delta_m_eff, eps));
        assert!((again - m.beta).norm() <= 1e-10 * m.beta.norm());
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let space = FockSpace::new(3, 3, 3).unwrap();
        let s = fig1();
        for t in sample_times() {
            for rwa in [true, false] {
                let h = build_hamiltonian(t, &space, &s, rwa);
                assert!(h.hermiticity_error() < 1e-15);
            }
        }
    }

    #[test]
    fn rwa_conserves_excitations() {
        let space = FockSpace::new(3, 3, 4).unwrap();
        let s = fig1();
        let n = Mode::ALL
            .iter()
            .map(|&m| mode_operator(&space, m, OpKind::Number))
            .reduce(|a, b| a.add(&b))
            .unwrap();
        for k in 0..20 {
            let t = -1500.0 + 150.0 * k as f64;
            let h = build_hamiltonian(t, &space, &s, true);
            assert!(h.commutator(&n).max_abs() < 1e-14);
            let full = build_hamiltonian(t, &space, &s, false);
            if s.pump(t) > 1e-6 {
                assert!(full.commutator(&n).max_abs() > 1e-8);
            }
        }
    }

    #[test]
    fn operator_algebra_reproduces_hamiltonian() {
        let space = FockSpace::new(3, 3, 3).unwrap();
        let s = fig1();
        let t = -650.0;
        let c = coefficients(t, &s);
        let op = |m, k| mode_operator(&space, m, k);
        let (a, ad) = (op(Mode::Cavity, OpKind::Lower), op(Mode::Cavity, OpKind::Raise));
        let (m, md) = (op(Mode::Magnon, OpKind::Lower), op(Mode::Magnon, OpKind::Raise));
        let (b, bd) = (op(Mode::Phonon, OpKind::Lower), op(Mode::Phonon, OpKind::Raise));
        let re = |x: f64| C64::new(x, 0.0);
        let ph = counter_rotating_phase(t);
        let h = op(Mode::Cavity, OpKind::Number)
            .scale(re(c.delta_a))
            .add(&op(Mode::Magnon, OpKind::Number).scale(re(c.delta_m)))
            .add(&md.matmul(&b).add(&bd.matmul(&m)).scale(re(c.g_mb)))
            .add(&m.matmul(&b).scale(ph.conj() * c.g_mb))
            .add(&md.matmul(&bd).scale(ph * c.g_mb))
            .add(&md.matmul(&a).add(&ad.matmul(&m)).scale(re(c.g_ma)));
        let built = build_hamiltonian(t, &space, &s, false);
        assert!(built.sub(&h).max_abs() < 1e-15);
    }

    #[test]
    fn counter_rotating_phase_period() {
        for k in 0..20 {
            let t = 13.7 * k as f64;
            let p = counter_rotating_phase(t);
            assert!((counter_rotating_phase(t + std::f64::consts::PI) - p).norm() < 1e-12);
            assert!((counter_rotating_phase(t + std::f64::consts::FRAC_PI_2) + p).norm() < 1e-12);
        }
    }

    #[test]
    fn far_tails_decouple_mechanics() {
        let space = FockSpace::new(2, 2, 2).unwrap();
        let h = build_hamiltonian(-1e5, &space, &fig1(), false);
        let sb = space.stride(Mode::Phonon);
        for (r, c, v) in h.iter() {
            let (lr, lc) = (space.levels(r), space.levels(c));
            if lr[2] != lc[2] {
                assert!(v.norm() == 0.0, "phonon coupling {v} between {r} and {c} ({sb})");
            }
        }
    }

    fn real_eigenvalues(m: DMatrix<C64>) -> Vec<f64> {
        let mut e: Vec<f64> = m.symmetric_eigenvalues().iter().cloned().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }

    #[test]
    fn three_level_block_equals_restriction() {
        let space = FockSpace::new(2, 2, 2).unwrap();
        let s = fig1();
        for k in 0..25 {
            let t = -1800.0 + 150.0 * k as f64;
            let h = build_hamiltonian(t, &space, &s, true).to_dense();
            let basis = [space.index([0, 0, 1]), space.index([0, 1, 0]), space.index([1, 0, 0])];
            let block = DMatrix::from_fn(3, 3, |i, j| h[(basis[i], basis[j])]);
            let m3 = single_excitation_matrix(t, &s);
            let dense3 = DMatrix::from_fn(3, 3, |i, j| m3[(i, j)]);
            assert!((&block - &dense3).norm() < 1e-15);
            let a = real_eigenvalues(block);
            let b = real_eigenvalues(dense3);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_detuning_eigenvalues() {
        let s = fig1();
        let m = single_excitation_matrix(0.0, &s);
        let e = real_eigenvalues(DMatrix::from_fn(3, 3, |i, j| m[(i, j)]));
        let op = s.pump(0.0);
        let r = (op * op + s.omega0 * s.omega0).sqrt() / 2.0;
        assert!((e[0] + r).abs() < 1e-15 && e[1].abs() < 1e-15 && (e[2] - r).abs() < 1e-15);
    }

    #[test]
    fn stokes_matrix_drops_pump() {
        let s = fig1();
        let st = stokes_matrix(s.t_c1, &s);
        assert_eq!(st[(0, 1)], C64::new(0.0, 0.0));
        assert_eq!(st[(1, 2)], C64::new(s.omega0 / 2.0, 0.0));
    }
}
