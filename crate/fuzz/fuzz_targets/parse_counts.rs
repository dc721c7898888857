#![no_main]

use libfuzzer_sys::fuzz_target;
use mmclust::io::{parse_counts, write_sparse_counts};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(parsed) = parse_counts(text) {
        // Anything accepted must survive a write/read cycle unchanged.
        let again = parse_counts(&write_sparse_counts(&parsed)).expect("re-parse");
        assert_eq!(again.rows(), parsed.rows());
    }
});
