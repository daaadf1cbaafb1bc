#![no_main]
use gridsync::analysis::StabilityReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(report) = StabilityReport::read_csv(data) {
        let mut out = Vec::new();
        report.write_csv(&mut out).unwrap();
        StabilityReport::read_csv(out.as_slice()).expect("written report re-parses");
    }
});
