#![no_main]
use gridsync::analysis::{detect_periodic_deviation, read_frequency_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(profile) = read_frequency_csv(data, 900) {
        let _ = detect_periodic_deviation(&profile, 3600);
    }
});
