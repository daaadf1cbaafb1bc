#![no_main]
use gridsync::analysis::TimeOfDayProfile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(profile) = TimeOfDayProfile::read_csv(data) {
        let mut out = Vec::new();
        profile.write_csv(&mut out).unwrap();
        TimeOfDayProfile::read_csv(out.as_slice()).expect("written profile re-parses");
    }
});
