#![no_main]

use libfuzzer_sys::fuzz_target;
use mmclust::eval::BenchmarkGrid;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(grid) = BenchmarkGrid::from_json(text) {
        let _ = grid.validate();
    }
});
