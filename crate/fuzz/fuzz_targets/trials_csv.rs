#![no_main]

use active_knn_harness::results::{parse_trials_csv, rows_to_csv};
use libfuzzer_sys::fuzz_target;

// The trials parser must never panic, and anything it accepts must
// survive a serialize/parse round trip unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = parse_trials_csv(text) {
        let rewritten = rows_to_csv(&rows);
        let again = parse_trials_csv(&rewritten).expect("round trip must parse");
        assert_eq!(rows, again);
    }
});
