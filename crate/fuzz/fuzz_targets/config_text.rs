#![no_main]
use libfuzzer_sys::fuzz_target;
use thermoqc_cli::config::{parse_config_text, Command, ExperimentConfig};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let Ok(pairs) = parse_config_text(&text) else { return };
    let name = pairs.iter().find(|(k, _)| k == "command").map(|(_, v)| v.as_str()).unwrap_or("audit-model");
    if let Some(cmd) = Command::parse(name) {
        if let Ok(cfg) = ExperimentConfig::from_pairs(cmd, &pairs, None) {
            let _ = cfg.resolved();
        }
    }
});
