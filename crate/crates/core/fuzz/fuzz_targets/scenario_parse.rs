//! Scenario documents: parsing must not panic, validation must return a
//! verdict, and anything that parses must survive a serialize/parse cycle.
#![no_main]

use libfuzzer_sys::fuzz_target;
use weakval::scenario::{parse_scenario, scenario_to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(s) = parse_scenario(text) else {
        return;
    };
    let _ = s.violations();
    let again = parse_scenario(&scenario_to_json(&s)).expect("serialized scenario reparses");
    assert_eq!(again, s);
});
