#![no_main]
use libfuzzer_sys::fuzz_target;
use m2fusion::classify::{predict_scores, SvmModel};

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = SvmModel::from_bytes(data) {
        let _ = predict_scores(&m, &vec![0.0; m.dim()]);
    }
});
