#![no_main]

use libfuzzer_sys::fuzz_target;
use revcause::cli::grid;

fuzz_target!(|text: &str| {
    if let Ok(taus) = grid::parse_taus(text) {
        assert!(!taus.is_empty() && taus.iter().all(|t| t.is_finite()));
    }
    if let Ok(sizes) = grid::parse_sizes(text) {
        assert!(sizes.iter().all(|&n| n >= 8));
    }
    let _ = grid::parse_rhos(text);
    let _ = grid::parse_kappas(text);
    let _ = grid::parse_reals(text, "--q-grid", Some(0.0));
    let _ = grid::parse_list::<i64>(text, "--list");
});
