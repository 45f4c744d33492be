#![no_main]
use libfuzzer_sys::fuzz_target;
use m2fusion::numerics::Matrix;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = Matrix::from_bytes(data) {
        // a decoded matrix must re-encode to the same bytes
        assert_eq!(m.to_bytes(), data);
    }
});
