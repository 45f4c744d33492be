#![no_main]
use libfuzzer_sys::fuzz_target;
use m2fusion::pipeline::RunReport;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(r) = RunReport::from_json(text) {
            let _ = r.confusion_csv();
        }
    }
});
