//! Physical constants, SI <-> internal unit conversion and thermal baths.
//!
//! The internal unit of angular frequency is the mechanical frequency
//! `omega_b`; time is measured in `1 / omega_b`. Only this module knows about
//! SI values.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant (J s), CODATA 2018.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J / K), exact SI value.
pub const K_B: f64 = 1.380_649e-23;
/// Electron gyromagnetic ratio of YIG, `gamma / 2pi = 28 GHz / T`, in rad / (s T).
pub const GYROMAGNETIC_RATIO: f64 = TAU * 28e9;
/// Spin density of YIG (1 / m^3).
pub const YIG_SPIN_DENSITY: f64 = 4.22e27;

/// Mode frequencies, couplings, losses and bath temperature in SI units.
///
/// Frequencies and rates are angular (rad/s); `t_bath` is in kelvin.
/// The `kappa_*` rates multiply the Lindblad dissipators directly, so
/// `kappa_x` is the energy (occupation) relaxation rate of mode `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub omega_a: f64,
    pub omega_m: f64,
    pub omega_b: f64,
    pub g_ma: f64,
    pub g_mb: f64,
    pub kappa_a: f64,
    pub kappa_m: f64,
    pub kappa_b: f64,
    pub t_bath: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega_a", self.omega_a),
            ("omega_m", self.omega_m),
            ("omega_b", self.omega_b),
            ("g_ma", self.g_ma),
            ("g_mb", self.g_mb),
            ("kappa_a", self.kappa_a),
            ("kappa_m", self.kappa_m),
            ("kappa_b", self.kappa_b),
            ("t_bath", self.t_bath),
        ];
        for (key, value) in fields {
            if !value.is_finite() {
                return Err(Error::invalid(key, "must be finite"));
            }
            if value < 0.0 {
                return Err(Error::invalid(key, format!("must be non-negative, got {value}")));
            }
        }
        if self.omega_b <= 0.0 {
            return Err(Error::invalid("omega_b", "must be strictly positive"));
        }
        Ok(())
    }

    pub fn bath_occupations(&self) -> Result<BathOccupations> {
        Ok(BathOccupations {
            n_a: thermal_occupation(self.omega_a, self.t_bath)?,
            n_m: thermal_occupation(self.omega_m, self.t_bath)?,
            n_b: thermal_occupation(self.omega_b, self.t_bath)?,
        })
    }
}

/// The same parameter set expressed in units of `omega_b`.
///
/// `omega_b_si` keeps the unit itself so the set can be mapped back to SI and
/// so thermal occupations can still be evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InternalParams {
    pub omega_a: f64,
    pub omega_m: f64,
    pub g_ma: f64,
    pub g_mb: f64,
    pub kappa_a: f64,
    pub kappa_m: f64,
    pub kappa_b: f64,
    pub t_bath: f64,
    pub omega_b_si: f64,
}

impl InternalParams {
    /// Mechanical frequency in internal units; 1 by construction.
    pub fn omega_b(&self) -> f64 {
        1.0
    }

    pub fn bath_occupations(&self) -> Result<BathOccupations> {
        from_internal_units(self).bath_occupations()
    }

    /// Convert an internal time to seconds.
    pub fn time_to_si(&self, t: f64) -> f64 {
        t / self.omega_b_si
    }

    /// Convert seconds to internal time.
    pub fn time_from_si(&self, seconds: f64) -> f64 {
        seconds * self.omega_b_si
    }
}

/// Mean thermal quanta of the three bath-coupled modes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathOccupations {
    pub n_a: f64,
    pub n_m: f64,
    pub n_b: f64,
}

impl BathOccupations {
    pub const ZERO: BathOccupations = BathOccupations { n_a: 0.0, n_m: 0.0, n_b: 0.0 };

    pub fn as_array(&self) -> [f64; 3] {
        [self.n_a, self.n_m, self.n_b]
    }
}

/// Bose-Einstein occupation `1 / (exp(hbar omega / k_B T) - 1)`.
///
/// `omega` is angular (rad/s). Exactly zero at `T = 0`.
pub fn thermal_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::Domain(format!("thermal occupation needs omega > 0, got {omega}")));
    }
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(Error::Domain(format!("temperature must be >= 0, got {temperature}")));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let x = HBAR * omega / (K_B * temperature);
    Ok(1.0 / x.exp_m1())
}

pub fn to_internal_units(p: &PhysicalParams) -> Result<InternalParams> {
    if p.omega_b == 0.0 {
        return Err(Error::Domain("omega_b = 0 cannot serve as the unit of frequency".into()));
    }
    p.validate()?;
    let w = p.omega_b;
    Ok(InternalParams {
        omega_a: p.omega_a / w,
        omega_m: p.omega_m / w,
        g_ma: p.g_ma / w,
        g_mb: p.g_mb / w,
        kappa_a: p.kappa_a / w,
        kappa_m: p.kappa_m / w,
        kappa_b: p.kappa_b / w,
        t_bath: p.t_bath,
        omega_b_si: w,
    })
}

pub fn from_internal_units(p: &InternalParams) -> PhysicalParams {
    let w = p.omega_b_si;
    PhysicalParams {
        omega_a: p.omega_a * w,
        omega_m: p.omega_m * w,
        omega_b: w,
        g_ma: p.g_ma * w,
        g_mb: p.g_mb * w,
        kappa_a: p.kappa_a * w,
        kappa_m: p.kappa_m * w,
        kappa_b: p.kappa_b * w,
        t_bath: p.t_bath,
    }
}

/// Convert a time quoted in mechanical oscillation periods (`f_b t`) into
/// internal time (`omega_b t`).
pub fn periods(x: f64) -> f64 {
    x * TAU
}

/// Convert a rate quoted as `2 pi rate / omega_b` into internal units.
pub fn per_cycle_rate(x: f64) -> f64 {
    x / TAU
}
