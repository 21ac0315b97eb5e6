#![no_main]

use libfuzzer_sys::fuzz_target;

// The config parser must reject arbitrary input with an error, never a
// panic, and accepted configs must be internally consistent.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = active_knn_harness::parse_config_str(text) {
        assert!(!config.schedule.is_empty());
        assert!(!config.suites.is_empty());
        // A parsed config always carries a buildable distribution.
        config.distribution.build().expect("validated at parse time");
    }
});
