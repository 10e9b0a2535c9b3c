//! The built-in scenario suite, embedded so it can be exported anywhere.

use std::fs;
use std::path::Path;

use crate::scenario::Scenario;
use crate::HarnessError;

pub const BUILTIN: [(&str, &str); 6] = [
    (
        "antiperiodic_1d.toml",
        include_str!("../scenarios/builtin/antiperiodic_1d.toml"),
    ),
    (
        "mean_value_1d.toml",
        include_str!("../scenarios/builtin/mean_value_1d.toml"),
    ),
    (
        "mean_value_2d.toml",
        include_str!("../scenarios/builtin/mean_value_2d.toml"),
    ),
    (
        "multipoint_1d.toml",
        include_str!("../scenarios/builtin/multipoint_1d.toml"),
    ),
    (
        "nonlinear_integral_1d.toml",
        include_str!("../scenarios/builtin/nonlinear_integral_1d.toml"),
    ),
    (
        "periodic_1d.toml",
        include_str!("../scenarios/builtin/periodic_1d.toml"),
    ),
];

/// Σ|alpha_i| = 1.2; fails the m0 certificate. Not part of the suite.
pub const MULTIPOINT_BAD: &str = include_str!("../scenarios/extra/multipoint_bad.toml");

pub fn builtin(name: &str) -> Option<Result<Scenario, HarnessError>> {
    BUILTIN
        .iter()
        .find(|(file, _)| file.trim_end_matches(".toml") == name)
        .map(|(file, text)| Scenario::from_toml(text, file))
}

/// Writes the built-in scenario files into `dir`.
pub fn export(dir: &Path) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    for (file, text) in BUILTIN {
        fs::write(dir.join(file), text).map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_loads() {
        for (file, text) in BUILTIN {
            let s = Scenario::from_toml(text, file).unwrap();
            assert_eq!(format!("{}.toml", s.name), file);
        }
        assert!(Scenario::from_toml(MULTIPOINT_BAD, "multipoint_bad.toml").is_ok());
        assert!(builtin("mean_value_1d").is_some());
        assert!(builtin("nope").is_none());
    }
}
