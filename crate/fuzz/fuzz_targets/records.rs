#![no_main]

use armsearch::bench::{read_records, write_records, Format};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    for format in [Format::Csv, Format::Json] {
        if let Ok(recs) = read_records(format, data) {
            let mut buf = Vec::new();
            write_records(&recs, format, &mut buf).unwrap();
            let _ = read_records(format, buf.as_slice()).unwrap();
        }
    }
});
