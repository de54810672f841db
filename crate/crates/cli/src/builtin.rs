//! Scenarios shipped with the binary.

use crate::error::CliError;
use crate::scenario::Scenario;

const SOURCES: [(&str, &str); 5] = [
    ("corner-eikonal", include_str!("../scenarios/corner-eikonal.toml")),
    (
        "anisotropic-corner",
        include_str!("../scenarios/anisotropic-corner.toml"),
    ),
    ("triple-junction", include_str!("../scenarios/triple-junction.toml")),
    ("mechanical-valley", include_str!("../scenarios/mechanical-valley.toml")),
    ("drift-quadratic", include_str!("../scenarios/drift-quadratic.toml")),
];

pub fn names() -> Vec<&'static str> {
    SOURCES.iter().map(|(n, _)| *n).collect()
}

pub fn source(name: &str) -> Option<&'static str> {
    SOURCES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Result<Scenario, CliError> {
    let src = source(name)
        .ok_or_else(|| CliError::Usage(format!("unknown scenario `{name}`; known: {}", names().join(", "))))?;
    Scenario::parse(src, name)
}

/// A bundled name or a path to a scenario file.
pub fn resolve(arg: &str) -> Result<Scenario, CliError> {
    if source(arg).is_some() {
        load(arg)
    } else if arg.ends_with(".toml") || std::path::Path::new(arg).exists() {
        Scenario::load(std::path::Path::new(arg))
    } else {
        load(arg)
    }
}
