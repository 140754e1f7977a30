#![no_main]

use gdalab_cli::run::config_echo;
use gdalab_cli::{load_config, validate_config, ExperimentKind};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let fallback = data.first().map(|b| ExperimentKind::ALL[*b as usize % ExperimentKind::ALL.len()]);
    let Ok(cfg) = load_config(text, fallback) else {
        return;
    };
    assert!(validate_config(&cfg).is_empty());
    // the echoed config must load back to the same thing
    let echo = config_echo(&cfg).to_string();
    let again = load_config(&echo, None).expect("echo reloads");
    assert_eq!(config_echo(&again).to_string(), echo);
});
