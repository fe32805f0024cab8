//! Valid scenarios small enough to simulate quickly are pushed through the
//! whole pipeline; every failure must surface as an error value.
#![no_main]

use libfuzzer_sys::fuzz_target;
use weakval::harness::{run_scenario, RunOptions};
use weakval::scenario::load_scenario;

const MAX_COMPOSITE_DIM: usize = 512;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(s) = load_scenario(text) else {
        return;
    };
    if s.observables.len() > 4 || s.composite_layout().map_or(true, |l| l.total() > MAX_COMPOSITE_DIM) {
        return;
    }
    if let Ok(r) = run_scenario(&s, &RunOptions::default()) {
        assert!(r.prob_success >= 0.0 && r.prob_success <= 1.0 + 1e-9);
    }
});
