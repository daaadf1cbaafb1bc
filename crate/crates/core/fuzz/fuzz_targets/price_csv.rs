#![no_main]
use gridsync::market::{load_price_series, write_price_series};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(series) = load_price_series(data, 60) {
        let mut out = Vec::new();
        write_price_series(&series, &mut out).unwrap();
        let back = load_price_series(out.as_slice(), 60).expect("written series re-parses");
        assert_eq!(back.n_periods(), series.n_periods());
    }
});
