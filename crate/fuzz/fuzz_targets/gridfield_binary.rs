#![no_main]
use libfuzzer_sys::fuzz_target;
use thermoqc_core::fields::{decode_binary, encode_binary};

fuzz_target!(|data: &[u8]| {
    if let Ok(u) = decode_binary(data) {
        let again = decode_binary(&encode_binary(&u)).expect("re-encoded field must decode");
        assert_eq!(u.grid(), again.grid());
        assert_eq!(u.rank(), again.rank());
        assert!(u.data().iter().zip(again.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
});
