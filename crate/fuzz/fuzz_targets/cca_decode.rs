#![no_main]
use libfuzzer_sys::fuzz_target;
use m2fusion::ccf::CcaTransform;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = CcaTransform::from_bytes(data) {
        assert_eq!(t.to_bytes(), data);
    }
});
