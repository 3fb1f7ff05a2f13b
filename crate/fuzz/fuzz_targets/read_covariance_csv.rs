#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&q, rest)) = data.split_first() else {
        return;
    };
    let block_dim = usize::from(q % 4);
    if let Ok(c) = covloc::io::read_covariance_csv(rest, block_dim) {
        assert_eq!(c.data(), &c.data().transpose());
    }
    let _ = covloc::io::read_matrix_csv(rest);
});
