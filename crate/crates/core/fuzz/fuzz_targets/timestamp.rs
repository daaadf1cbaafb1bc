#![no_main]
use gridsync::analysis::parse_seconds_of_day;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Some(s) = parse_seconds_of_day(text) {
            assert!((0.0..86_400.0).contains(&s) || s == 86_400.0);
        }
    }
});
