//! Pump pulses and detuning ramps of the transfer protocol.
//!
//! Everything here is in internal units (rates in `omega_b`, times in
//! `1 / omega_b`) and is evaluated analytically at arbitrary `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pulse and ramp parameters, including the retrieval delay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    /// Peak pump amplitude `Omega_0`.
    pub omega0: f64,
    /// Gaussian width `T`.
    pub width: f64,
    pub t_c1: f64,
    pub t_c2: f64,
    /// Ramp center `tau`.
    pub tau: f64,
    /// Ramp width `tau_ch`.
    pub tau_ch: f64,
    pub kappa_delta: f64,
    pub h_delta: f64,
    /// Extra delay of the retrieval pulse and of the late ramp.
    pub delta_t: f64,
    /// Constant cavity-magnon coupling, `Omega_s / 2`.
    pub g_ma: f64,
}

impl PulseSchedule {
    /// Schedule with `g_ma = omega0 / 2` and no retrieval delay.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        omega0: f64,
        width: f64,
        t_c1: f64,
        t_c2: f64,
        tau: f64,
        tau_ch: f64,
        kappa_delta: f64,
        h_delta: f64,
    ) -> Self {
        PulseSchedule {
            omega0,
            width,
            t_c1,
            t_c2,
            tau,
            tau_ch,
            kappa_delta,
            h_delta,
            delta_t: 0.0,
            g_ma: 0.5 * omega0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("omega0", self.omega0),
            ("width", self.width),
            ("t_c1", self.t_c1),
            ("t_c2", self.t_c2),
            ("tau", self.tau),
            ("tau_ch", self.tau_ch),
            ("kappa_delta", self.kappa_delta),
            ("h_delta", self.h_delta),
            ("delta_t", self.delta_t),
            ("g_ma", self.g_ma),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return Err(Error::invalid(key, "must be finite"));
            }
        }
        if self.omega0 < 0.0 {
            return Err(Error::invalid("omega0", "must be non-negative"));
        }
        if self.width <= 0.0 {
            return Err(Error::invalid("width", "must be positive"));
        }
        if self.tau_ch <= 0.0 {
            return Err(Error::invalid("tau_ch", "must be positive"));
        }
        if self.t_c1 >= self.t_c2 {
            return Err(Error::invalid("t_c1", "must be earlier than t_c2"));
        }
        if self.delta_t < 0.0 {
            return Err(Error::invalid("delta_t", "must be non-negative"));
        }
        if self.g_ma < 0.0 {
            return Err(Error::invalid("g_ma", "must be non-negative"));
        }
        Ok(())
    }

    pub fn with_delay(mut self, delta_t: f64) -> Self {
        self.delta_t = delta_t;
        self
    }

    /// Divide every time parameter by `m` (pulse compression).
    pub fn compressed(mut self, m: f64) -> Self {
        self.width /= m;
        self.t_c1 /= m;
        self.t_c2 /= m;
        self.tau /= m;
        self.tau_ch /= m;
        self.delta_t /= m;
        self
    }

    /// Center of the retrieval pulse.
    pub fn retrieval_center(&self) -> f64 {
        self.t_c2 + self.delta_t
    }

    /// Storage time `t_c2 + delta_t - t_c1`.
    pub fn storage_time(&self) -> f64 {
        self.retrieval_center() - self.t_c1
    }

    /// Default simulation window: both ramps plus `pad` ramp widths on each side.
    pub fn default_window(&self, pad: f64) -> (f64, f64) {
        let lo = (-self.tau - pad * self.tau_ch).min(self.t_c1 - 6.0 * self.width);
        let hi = (self.tau + self.delta_t + pad * self.tau_ch)
            .max(self.retrieval_center() + 6.0 * self.width);
        (lo, hi)
    }

    /// `Omega_p(t)`.
    pub fn pump(&self, t: f64) -> f64 {
        let u1 = (t - self.t_c1) / self.width;
        let u2 = (t - self.retrieval_center()) / self.width;
        self.omega0 * (-u1 * u1).exp() + self.omega0 * (-u2 * u2).exp()
    }

    /// Linearized magnon-phonon coupling `G(t) = Omega_p(t) / 2`.
    pub fn g_mb(&self, t: f64) -> f64 {
        0.5 * self.pump(t)
    }

    fn late_center(&self) -> f64 {
        self.tau + self.delta_t
    }

    /// Ramp shape `tanh((t - tau - delta_t)/tau_ch) + tanh((t + tau)/tau_ch)`.
    pub fn ramp(&self, t: f64) -> f64 {
        ((t - self.late_center()) / self.tau_ch).tanh() + ((t + self.tau) / self.tau_ch).tanh()
    }

    /// Prefactor of the ramp in `delta_s = delta_m - delta_a`.
    fn ramp_scale(&self) -> f64 {
        -self.h_delta * 0.5 * self.omega0
    }

    /// `(delta_a, delta_m)` at time `t`.
    pub fn detunings(&self, t: f64) -> (f64, f64) {
        let r = self.ramp_scale() * self.ramp(t);
        ((self.kappa_delta - 1.0) * r, self.kappa_delta * r)
    }

    /// `delta_s = delta_m - delta_a`.
    pub fn delta_s(&self, t: f64) -> f64 {
        self.ramp_scale() * self.ramp(t)
    }

    /// Antiderivative of the ramp shape, up to a constant.
    fn ramp_antiderivative(&self, t: f64) -> f64 {
        let w = self.tau_ch;
        w * (ln_cosh((t - self.late_center()) / w) + ln_cosh((t + self.tau) / w))
    }

    /// Accumulated phases `(theta_a, theta_m) = integral of (delta_a, delta_m)` from `t0` to `t`.
    pub fn detuning_phases(&self, t0: f64, t: f64) -> (f64, f64) {
        let r = self.ramp_scale() * (self.ramp_antiderivative(t) - self.ramp_antiderivative(t0));
        ((self.kappa_delta - 1.0) * r, self.kappa_delta * r)
    }
}

/// `ln cosh x` without overflow.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

pub fn pump_coupling(t: f64, s: &PulseSchedule) -> f64 {
    s.pump(t)
}

pub fn detunings(t: f64, s: &PulseSchedule) -> (f64, f64) {
    s.detunings(t)
}
