#![no_main]
use libfuzzer_sys::fuzz_target;
use m2fusion::imaging::parse_inertial_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = parse_inertial_csv(text) {
            assert_eq!(m.rows(), 6);
        }
    }
});
