#![no_main]

use libfuzzer_sys::fuzz_target;
use viscoduct_cli::config::Settings;
use viscoduct_cli::RunConfig;

fuzz_target!(|text: &str| {
    if let Ok(settings) = Settings::parse(text) {
        let _ = RunConfig::from_settings(settings);
    }
});
