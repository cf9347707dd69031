#![no_main]

use armsearch::data::parse_matrix_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    for labeled in [false, true] {
        if let Ok(t) = parse_matrix_csv(data, labeled) {
            assert!(t.features.rows() > 0);
            assert!(t.features.as_slice().iter().all(|v| v.is_finite()));
            if let Some(l) = &t.labels {
                assert_eq!(l.len(), t.features.rows());
            }
        }
    }
});
