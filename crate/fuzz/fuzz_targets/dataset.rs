#![no_main]

use libfuzzer_sys::fuzz_target;
use lggan::GraphDataset;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(ds) = GraphDataset::parse(text) {
        assert!(ds.validate().is_ok());
        let again = GraphDataset::parse(&ds.to_text()).expect("written dataset parses");
        assert_eq!(again, ds);
    }
});
