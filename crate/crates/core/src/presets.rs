//! Built-in scenarios, one per reproduced figure.
//!
//! The TOML sources live in the repository's `scenarios/` directory and are
//! embedded at compile time, so presets and files cannot drift apart.

use crate::error::{Error, Result};
use crate::scenario::{parse_scenario, Scenario};

/// Preset names accepted by [`preset`] and the `figure` command.
pub const FIGURES: [&str; 6] = ["fig1b", "fig2", "fig3", "fig4", "fig5", "fig6"];

pub const FIG1B_TOML: &str = include_str!("../../../scenarios/fig1b.toml");
pub const FIG3_TOML: &str = include_str!("../../../scenarios/fig3.toml");
pub const FIG4_TOML: &str = include_str!("../../../scenarios/fig4.toml");
pub const FIG5_TOML: &str = include_str!("../../../scenarios/fig5.toml");
pub const FIG6_TOML: &str = include_str!("../../../scenarios/fig6.toml");

/// Delays of the storage ladder, in multiples of `t_c2`.
pub const STORAGE_LADDER: [f64; 10] = [2.0, 6.0, 14.0, 30.0, 66.0, 100.0, 135.0, 165.0, 200.0, 250.0];

/// Input amplitudes (or squeezing parameters) shown side by side.
pub const AMPLITUDES: [f64; 3] = [0.5, 0.75, 1.0];

/// TOML source of a preset.
pub fn preset_source(name: &str) -> Result<&'static str> {
    Ok(match name {
        "fig1b" | "fig2" => FIG1B_TOML,
        "fig3" => FIG3_TOML,
        "fig4" => FIG4_TOML,
        "fig5" => FIG5_TOML,
        "fig6" => FIG6_TOML,
        other => return Err(Error::invalid("preset", format!("unknown preset `{other}`; expected one of {}", FIGURES.join(", ")))),
    })
}

/// Parsed preset scenario.
pub fn preset(name: &str) -> Result<Scenario> {
    parse_scenario(preset_source(name)?, name)
}
