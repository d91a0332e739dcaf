#![no_main]

use libfuzzer_sys::fuzz_target;
use relflex_cli::parse_run_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // Anything that parses has already passed validation.
    if let Ok(cfg) = parse_run_config(text) {
        assert!(cfg.validate().is_ok());
    }
});
