//! The `--grid` argument of the sweep command.
#![no_main]

use libfuzzer_sys::fuzz_target;
use weakval::harness::{check_grid, parse_grid, SWEEP_MAX_LAMBDA, SWEEP_MIN_POINTS};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(grid) = parse_grid(text) else {
        return;
    };
    if let Ok(g) = check_grid(&grid) {
        assert!(g.len() >= SWEEP_MIN_POINTS);
        assert!(g.windows(2).all(|w| w[0] > w[1]));
        assert!(g.iter().all(|&l| l > 0.0 && l <= SWEEP_MAX_LAMBDA));
    }
});
