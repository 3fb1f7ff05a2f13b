#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = covloc_cli::ExperimentConfig::parse(text) {
        if let Ok(r) = cfg.resolve() {
            assert!(r.n_blocks >= 3 && r.n_samples >= 2 && r.step_size > 0.0);
        }
    }
});
