#![no_main]

use dirmax::directions::DirectionSet;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ds) = DirectionSet::from_json(text) {
        // accepted sets are nonempty, unit and survive a round trip
        assert!(!ds.is_empty());
        for v in ds.vectors() {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            assert!((n - 1.0).abs() < 1e-9);
        }
        let back = DirectionSet::from_json(&ds.to_json()).expect("round trip");
        assert_eq!(back.vectors(), ds.vectors());
    }
});
