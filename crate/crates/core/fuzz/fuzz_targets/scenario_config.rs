#![no_main]
use gridsync::engine::{run, ScenarioConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = ScenarioConfig::from_toml_str(text) else { return };
    // keep accepted scenarios cheap enough to run to completion
    if config.run.n_ticks <= 500 && config.agents.count <= 64 && config.market.as_ref().is_none_or(|m| m.price_file.is_none()) {
        let _ = run(&config);
    }
});
