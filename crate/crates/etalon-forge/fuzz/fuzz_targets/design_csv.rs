//! Fuzz the ranked-candidates CSV top-row parser used by the verify command.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = etalon_forge::pipeline::design_x_from_text(text);
    }
});
