//! Replays the checked-in fuzz seeds through the same checks the fuzz
//! targets apply, so the corpus stays meaningful on a stable toolchain.

use std::fs;
use std::path::PathBuf;

use weakval::harness::{check_grid, parse_grid, run_scenario, RunOptions};
use weakval::scenario::{load_scenario, parse_scenario, scenario_to_json};

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, String)> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn scenario_parse_seeds() {
    let mut parsed = 0;
    for (name, text) in seeds("scenario_parse") {
        if let Ok(s) = parse_scenario(&text) {
            let _ = s.violations();
            assert_eq!(parse_scenario(&scenario_to_json(&s)).unwrap(), s, "{name}");
            parsed += 1;
        }
    }
    assert!(parsed >= weakval::catalog::names().len());
}

#[test]
fn scenario_run_seeds() {
    for (name, text) in seeds("scenario_run") {
        let s = load_scenario(&text).unwrap();
        let r = run_scenario(&s, &RunOptions::default()).unwrap();
        assert!(
            r.prob_success > 0.0 && r.prob_success <= 1.0 + 1e-9,
            "{name}"
        );
    }
}

#[test]
fn sweep_grid_seeds() {
    let mut accepted = 0;
    for (_, text) in seeds("sweep_grid") {
        if let Ok(g) = parse_grid(&text).and_then(|g| check_grid(&g)) {
            assert!(g.windows(2).all(|w| w[0] > w[1]));
            accepted += 1;
        }
    }
    assert_eq!(accepted, 2);
}
