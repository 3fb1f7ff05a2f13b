#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = covloc::io::decode_snapshot(data) {
        assert_eq!(s.values.len(), s.n_samples * s.n_blocks * s.block_dim);
        assert_eq!(covloc::io::encode_snapshot(&s), data);
    }
    let _ = covloc::io::decode_ensemble(data);
    let _ = covloc::io::decode_covariance(data);
});
