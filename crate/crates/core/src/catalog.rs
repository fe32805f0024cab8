//! Bundled scenarios.
//!
//! Scenario references resolve in this order: a file `<name>.json` in the
//! directory named by `WEAKVAL_CATALOG_DIR`, the built-in catalog, then a path
//! on disk.

use std::path::Path;

use num_complex::Complex64 as C64;

use crate::error::{Result, WeakError};
use crate::scenario::{load_scenario, Scenario};

/// Environment variable naming a directory that overrides the built-in catalog.
pub const CATALOG_DIR_ENV: &str = "WEAKVAL_CATALOG_DIR";

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        const BUILTIN: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../catalog/", $name, ".json")))),*
        ];
    };
}

bundled!(
    "aav_qubit",
    "aav_amplified",
    "aav_imaginary",
    "joint_pair",
    "joint_pair_entangled",
    "joint_noncommuting",
    "joint_triple",
    "aav_qubit_spinptr",
    "joint_pair_spinptr",
    "strong_eigen",
    "strong_product",
    "strong_entangled",
);

/// Scenarios with no post-selection, used for the strong-measurement check.
pub const STRONG_SCENARIOS: &[&str] = &["strong_eigen", "strong_product", "strong_entangled"];

pub fn names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _)| *n).collect()
}

/// Source text of a built-in scenario.
pub fn builtin_text(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Closed-form weak value for the scenarios that have one.
pub fn expected_weak_value(name: &str) -> Option<C64> {
    let z = |re: f64, im: f64| Some(C64::new(re, im));
    match name {
        "aav_qubit" | "aav_qubit_spinptr" => z(1.0 - 2f64.sqrt(), 0.0),
        "aav_amplified" => z(1.0 / 0.005f64.tan(), 0.0),
        "aav_imaginary" => z(0.0, -1.0),
        "joint_pair_entangled" | "joint_pair_spinptr" => z(-1.0, 0.0),
        "joint_noncommuting" => z(0.0, 0.0),
        "strong_eigen" | "strong_product" => z(1.0, 0.0),
        "strong_entangled" => z(-1.0, 0.0),
        _ => None,
    }
}

fn load_file(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| WeakError::from(e).context(path.display().to_string()))?;
    let mut s = load_scenario(&text).map_err(|e| e.context(path.display().to_string()))?;
    if s.name.is_empty() {
        s.name = path
            .file_stem()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(s)
}

/// Loads and validates a scenario by catalog name or file path.
pub fn resolve(reference: &str) -> Result<Scenario> {
    if let Some(dir) = std::env::var_os(CATALOG_DIR_ENV) {
        let candidate = Path::new(&dir).join(format!("{reference}.json"));
        if candidate.is_file() {
            return load_file(&candidate);
        }
    }
    if let Some(text) = builtin_text(reference) {
        return load_scenario(text)
            .map_err(|e| e.context(format!("catalog scenario '{reference}'")));
    }
    let path = Path::new(reference);
    if path.is_file() {
        return load_file(path);
    }
    Err(WeakError::UnknownScenario(reference.to_string()))
}

/// Names available for listing: built-ins plus any `*.json` in the override directory.
pub fn list() -> Vec<String> {
    let mut out: Vec<String> = names().into_iter().map(String::from).collect();
    if let Some(dir) = std::env::var_os(CATALOG_DIR_ENV) {
        if let Ok(entries) = std::fs::read_dir(dir) {
            let mut extra: Vec<String> = entries
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
                .filter(|n| !out.contains(n))
                .collect();
            extra.sort();
            out.extend(extra);
        }
    }
    out
}
