#![no_main]

use libfuzzer_sys::fuzz_target;
use lggan_cli::config::{parse_file, parse_flags};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(entries) = parse_file(text, "fuzz") {
        let rendered: String = entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        assert_eq!(parse_file(&rendered, "fuzz").expect("rendered config parses"), entries);
    }
    let args: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    if let Ok(pairs) = parse_flags(&args) {
        assert!(pairs.len() <= args.len());
    }
});
