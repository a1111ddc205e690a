#![no_main]

use libfuzzer_sys::fuzz_target;
use revcause::cli::RunManifest;

fuzz_target!(|text: &str| {
    if let Ok(manifest) = RunManifest::parse(text) {
        let again = RunManifest::parse(&manifest.to_text()).expect("serialized manifest must reparse");
        assert_eq!(again.entries(), manifest.entries());
        assert_eq!(again.command(), manifest.command());
    }
});
