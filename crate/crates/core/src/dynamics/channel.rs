//! Phase-insensitive Gaussian channel on a single mode.
//!
//! Under the rotating-wave dynamics with thermal baths, and with magnon and
//! phonon starting in vacuum, the cavity output is `a -> u a + noise` for
//! any cavity input. Such a channel is fixed by the complex gain `u` and the
//! added quanta `nu`, and factors as pure loss, then a quantum-limited
//! amplifier, then a phase rotation:
//!
//! ```text
//! tau = |u|^2 / (1 + nu),   G = 1 + nu,   phi = arg u
//! ```
//!
//! Loss only moves population down and amplification only moves it up, so
//! the output restricted to the input's levels is exact.

use nalgebra::DMatrix;

use crate::C64;

/// `sqrt(binomial(n, k))` for `n < size`.
fn sqrt_binomials(size: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(size);
    for n in 0..size {
        let mut row = vec![1.0; n + 1];
        for k in 1..n {
            let prev = &rows[n - 1];
            row[k] = prev[k - 1] + prev[k];
        }
        rows.push(row);
    }
    rows.into_iter().map(|r| r.into_iter().map(f64::sqrt).collect()).collect()
}

/// Apply the channel with gain `u` and added quanta `nu` to `rho`.
pub fn phase_insensitive_channel(rho: &DMatrix<C64>, u: C64, nu: f64) -> DMatrix<C64> {
    let n = rho.nrows();
    let nu = nu.max(0.0);
    let g = 1.0 + nu;
    let tau = (u.norm_sqr() / g).min(1.0);
    let x = nu / g;
    let sb = sqrt_binomials(2 * n);

    // loss: rho'[p, q] = sum_k l[p+k][k] l[q+k][k] rho[p+k, q+k]
    let (st, sl) = (tau.sqrt(), (1.0 - tau).sqrt());
    let l = |m: usize, k: usize| sb[m][k] * st.powi((m - k) as i32) * sl.powi(k as i32);
    let mut mid = DMatrix::<C64>::zeros(n, n);
    for p in 0..n {
        for q in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n - p.max(q) {
                acc += rho[(p + k, q + k)] * (l(p + k, k) * l(q + k, k));
            }
            mid[(p, q)] = acc;
        }
    }

    // amplifier: out[p+k, q+k] += a[p][k] a[q][k] mid[p, q]
    let (sx, sg) = (x.sqrt(), g.sqrt().recip());
    let a = |m: usize, k: usize| sb[m + k][k] * sx.powi(k as i32) * sg.powi(m as i32 + 1);
    let mut out = DMatrix::<C64>::zeros(n, n);
    for p in 0..n {
        for q in 0..n {
            let v = mid[(p, q)];
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..n - p.max(q) {
                out[(p + k, q + k)] += v * (a(p, k) * a(q, k));
            }
        }
    }

    let phi = u.arg();
    for p in 0..n {
        for q in 0..n {
            out[(p, q)] *= C64::from_polar(1.0, phi * (p as f64 - q as f64));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{solve, OdeSystem, Options, Tolerances};
    use crate::states::{coherent_state, projector, squeezed_vacuum};

    /// `d rho/ds = (N + 1) D[a] rho + N D[a'] rho` on `n` levels.
    struct ThermalLoss {
        n: usize,
        nbar: f64,
    }

    impl OdeSystem for ThermalLoss {
        fn dim(&self) -> usize {
            self.n * self.n
        }
        fn rhs(&mut self, _t: f64, y: &[C64], dy: &mut [C64]) {
            let n = self.n;
            let r = DMatrix::from_fn(n, n, |i, k| y[i * n + k]);
            let a = DMatrix::from_fn(n, n, |i, k| if k == i + 1 { C64::new((k as f64).sqrt(), 0.0) } else { C64::new(0.0, 0.0) });
            let ad = a.adjoint();
            let d = |l: &DMatrix<C64>, ld: &DMatrix<C64>| l * &r * ld - (ld * l * &r + &r * ld * l) * C64::new(0.5, 0.0);
            let out = d(&a, &ad) * C64::new(self.nbar + 1.0, 0.0) + d(&ad, &a) * C64::new(self.nbar, 0.0);
            for i in 0..n {
                for k in 0..n {
                    dy[i * n + k] = out[(i, k)];
                }
            }
        }
    }

    /// Oracle: thermal-loss master equation on a roomy space, then rotation.
    fn oracle(rho: &DMatrix<C64>, u: C64, nu: f64, room: usize) -> DMatrix<C64> {
        let n = rho.nrows();
        let big = n + room;
        let eta = u.norm_sqr();
        let s = -eta.ln();
        let nbar = if eta < 1.0 { nu / (1.0 - eta) } else { 0.0 };
        let mut y = vec![C64::new(0.0, 0.0); big * big];
        for i in 0..n {
            for k in 0..n {
                y[i * big + k] = rho[(i, k)];
            }
        }
        let mut sys = ThermalLoss { n: big, nbar };
        let opts = Options { tol: Tolerances { rtol: 1e-12, atol: 1e-14 }, ..Options::default() };
        let (y, _) = solve(&mut sys, 0.0, &y, s, opts).unwrap();
        DMatrix::from_fn(n, n, |i, k| y[i * big + k] * C64::from_polar(1.0, u.arg() * (i as f64 - k as f64)))
    }

    #[test]
    fn matches_thermal_loss_master_equation() {
        let inputs = [projector(&coherent_state(C64::new(0.7, 0.2), 12).unwrap()), projector(&squeezed_vacuum(0.5, 12).unwrap())];
        for rho in &inputs {
            for (u, nu) in [(C64::from_polar(0.95, 0.4), 0.02), (C64::from_polar(0.6, -1.3), 0.3), (C64::new(0.8, 0.0), 0.0)] {
                let fast = phase_insensitive_channel(rho, u, nu);
                let slow = oracle(rho, u, nu, 14);
                assert!((&fast - &slow).norm() < 1e-9, "u {u} nu {nu}: {}", (&fast - &slow).norm());
            }
        }
    }

    #[test]
    fn identity_and_moments() {
        let psi = coherent_state(C64::new(0.5, 0.0), 10).unwrap();
        let rho = projector(&psi);
        assert!((phase_insensitive_channel(&rho, C64::new(1.0, 0.0), 0.0) - &rho).norm() < 1e-14);
        // vacuum goes to a thermal state with nu quanta
        let mut vac = DMatrix::<C64>::zeros(30, 30);
        vac[(0, 0)] = C64::new(1.0, 0.0);
        let out = phase_insensitive_channel(&vac, C64::from_polar(0.7, 1.0), 0.1);
        let n: f64 = (0..30).map(|k| k as f64 * out[(k, k)].re).sum();
        assert!((n - 0.1).abs() < 1e-12);
        for k in 0..30 {
            assert!((out[(k, k)].re - 0.1f64.powi(k as i32) / 1.1f64.powi(k as i32 + 1)).abs() < 1e-15);
        }
    }
}
