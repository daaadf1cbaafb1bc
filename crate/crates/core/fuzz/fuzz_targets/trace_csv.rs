#![no_main]
use gridsync::SimTrace;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(trace) = SimTrace::read_csv(data) {
        let text = trace.to_csv_string();
        let back = SimTrace::read_csv(text.as_bytes()).expect("written trace re-parses");
        assert_eq!(back.to_csv_string(), text);
    }
});
