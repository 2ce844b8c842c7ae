#![no_main]
use libfuzzer_sys::fuzz_target;
use thermoqc_core::young_measure::{decode_eym_csv, encode_eym_csv};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(nu) = decode_eym_csv(&text) {
        let again = decode_eym_csv(&encode_eym_csv(&nu)).expect("re-encoded measure must decode");
        assert_eq!(nu.atoms.len(), again.atoms.len());
    }
});
