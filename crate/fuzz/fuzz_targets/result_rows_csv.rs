#![no_main]

use dirmax::experiments::{read_rows, rows_to_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_rows(data) {
        let again = read_rows(rows_to_csv(&rows).as_bytes()).expect("written rows parse");
        assert_eq!(again, rows);
    }
});
