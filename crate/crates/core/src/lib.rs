//! Storage and retrieval of bosonic quantum states in a cavity-magnon-phonon
//! system.
//!
//! A microwave cavity mode `a` couples to a magnon mode `m` at a constant
//! rate, while a driven magnetostrictive interaction couples the magnon to a
//! phonon mode `b`. Gaussian pump pulses on the magnon-phonon coupling and
//! tanh-shaped detuning ramps move a cavity state into the phonon and back.
//!
//! Internally every rate is measured in units of the mechanical angular
//! frequency `omega_b` and every time in units of `1 / omega_b`.

pub mod analysis;
pub mod eigen;
pub mod error;
pub mod fit;
pub mod fock;
pub mod hamiltonian;
pub mod io;
pub mod ode;
pub mod presets;
pub mod pulses;
pub mod scenario;
pub mod states;
pub mod units;
pub mod wigner;
pub mod dynamics;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
