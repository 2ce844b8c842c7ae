#![no_main]
use libfuzzer_sys::fuzz_target;
use thermoqc_core::witness::{parse_manifest, Witness};

// Manifest text, a NUL byte, then the bytes served for every referenced file.
fuzz_target!(|data: &[u8]| {
    let split = data.iter().position(|&b| b == 0).unwrap_or(data.len());
    let text = String::from_utf8_lossy(&data[..split]);
    let blob = data.get(split + 1..).unwrap_or(&[]).to_vec();
    if let Ok(man) = parse_manifest(&text) {
        let _ = Witness::from_manifest(&man, |_| Ok(blob.clone()));
    }
});
