//! Fuzz the TOML run-configuration parser: arbitrary input must produce
//! either a parsed config or a config error, never a panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = etalon_forge::config::RunConfig::from_str(text) {
            // exercise the derived accessors too; errors are fine, panics are not
            let _ = cfg.reflectors();
            let _ = cfg.base_config();
            let _ = cfg.make_grid();
            let _ = cfg.ranking_key();
            let _ = cfg.inventory();
        }
    }
});
