#![no_main]

use armsearch::forest::Forest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(f) = Forest::from_json(s) {
        let again = Forest::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(again.to_json().unwrap(), f.to_json().unwrap());
        if f.n_features <= 4096 {
            let _ = f.predict(&vec![0.0; f.n_features]).unwrap();
        }
    }
});
