#![no_main]

use armsearch::kmedoids::MedoidReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(r) = MedoidReport::from_json(s) {
        assert_eq!(MedoidReport::from_json(&r.to_json().unwrap()).unwrap(), r);
    }
});
