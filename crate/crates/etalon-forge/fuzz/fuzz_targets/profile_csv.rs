//! Fuzz the transmission-profile CSV reader: malformed rows, bad floats, and
//! non-monotone grids must surface as errors, never as panics.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = etalon_forge::spectral::read_profile_csv(data);
});
