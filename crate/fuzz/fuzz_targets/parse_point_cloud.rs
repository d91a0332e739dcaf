#![no_main]

use libfuzzer_sys::fuzz_target;
use relflex_core::parse_point_cloud;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // Accepted clouds must be rectangular and finite.
    if let Ok(cloud) = parse_point_cloud(text) {
        assert!(cloud.len() > 0);
        assert!(cloud.coords().iter().all(|v| v.is_finite()));
    }
});
