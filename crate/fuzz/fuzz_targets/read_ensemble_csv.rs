#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = covloc::io::read_ensemble_csv(data, 0.0) {
        assert_eq!(s.values.len(), s.n_samples * s.n_blocks * s.block_dim);
        assert!(s.values.iter().all(|v| v.is_finite()));
    }
});
