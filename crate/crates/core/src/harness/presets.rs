use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;

const SOURCES: [(&str, &str); 6] = [
    ("gaussian-linf", include_str!("../../presets/gaussian-linf.toml")),
    ("srht-linf", include_str!("../../presets/srht-linf.toml")),
    (
        "cs-counterexample",
        include_str!("../../presets/cs-counterexample.toml"),
    ),
    (
        "lev-counterexample",
        include_str!("../../presets/lev-counterexample.toml"),
    ),
    ("lower-bound-l2", include_str!("../../presets/lower-bound-l2.toml")),
    ("diagnostics", include_str!("../../presets/diagnostics.toml")),
];

#[derive(Debug, Clone, PartialEq)]
pub struct PresetRun {
    pub name: String,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: String,
    pub description: String,
    pub runs: Vec<PresetRun>,
}

pub fn preset_names() -> Vec<&'static str> {
    SOURCES.iter().map(|(n, _)| *n).collect()
}

/// Parses preset text: a `description` and one `[[run]]` table per
/// experiment, each with a `name` plus [`ExperimentConfig`] fields.
pub fn parse_preset(name: &str, text: &str) -> Result<Preset> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    let description = match table.remove("description") {
        Some(toml::Value::String(s)) => s,
        _ => String::new(),
    };
    let runs = match table.remove("run") {
        Some(toml::Value::Array(runs)) if !runs.is_empty() => runs,
        _ => return Err(Error::Parse(format!("preset {name} has no [[run]] entries"))),
    };
    if let Some(key) = table.keys().next() {
        return Err(Error::Parse(format!("preset {name}: unknown key '{key}'")));
    }
    let runs = runs
        .into_iter()
        .map(|v| {
            let mut t = match v {
                toml::Value::Table(t) => t,
                _ => return Err(Error::Parse(format!("preset {name}: run is not a table"))),
            };
            let run_name = match t.remove("name") {
                Some(toml::Value::String(s)) => s,
                _ => return Err(Error::Parse(format!("preset {name}: run without a name"))),
            };
            let config: ExperimentConfig = toml::Value::Table(t)
                .try_into()
                .map_err(|e: toml::de::Error| Error::Parse(format!("preset {name}/{run_name}: {e}")))?;
            Ok(PresetRun { name: run_name, config })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Preset {
        name: name.to_string(),
        description,
        runs,
    })
}

pub fn preset(name: &str) -> Result<Preset> {
    let (_, text) = SOURCES.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        Error::config(
            "preset",
            format!("unknown preset '{name}'; known: {}", preset_names().join(", ")),
        )
    })?;
    parse_preset(name, text)
}
