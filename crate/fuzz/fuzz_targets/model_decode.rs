#![no_main]
use libfuzzer_sys::fuzz_target;
use m2fusion::cnn::CnnModel;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = CnnModel::from_bytes(data) {
        let again = CnnModel::from_bytes(&model.to_bytes()).expect("re-encoded model decodes");
        assert_eq!(again.layer_shapes(), model.layer_shapes());
    }
});
