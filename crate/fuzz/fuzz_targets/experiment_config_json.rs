#![no_main]

use dirmax::experiments::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_json(text) {
        cfg.validate().expect("parsed configs are valid");
        let back = ExperimentConfig::from_json(&cfg.to_json()).expect("round trip");
        assert_eq!(back, cfg);
    }
});
