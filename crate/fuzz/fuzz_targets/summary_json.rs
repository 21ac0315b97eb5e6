#![no_main]

use active_knn_harness::results::parse_summary_json;
use libfuzzer_sys::fuzz_target;

// The summary loader must reject arbitrary JSON without panicking.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_summary_json(text);
});
