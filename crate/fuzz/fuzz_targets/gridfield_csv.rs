#![no_main]
use libfuzzer_sys::fuzz_target;
use thermoqc_core::fields::{decode_csv, encode_csv};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(u) = decode_csv(&text) {
        let again = decode_csv(&encode_csv(&u)).expect("re-encoded field must decode");
        assert_eq!(u.grid(), again.grid());
        assert_eq!(u.data().len(), again.data().len());
    }
});
