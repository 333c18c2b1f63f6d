#![no_main]

use libfuzzer_sys::fuzz_target;
use lggan::checkpoint::{self, Checkpoint};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(ck) = Checkpoint::parse(text) else {
        return;
    };
    let again = Checkpoint::parse(&ck.to_text()).expect("written checkpoint parses");
    assert_eq!(again, ck);
    // decoding must reject bad metadata and shapes without panicking
    match ck.kind() {
        Ok("lggan") => {
            if let Ok(state) = checkpoint::to_train_state(&ck) {
                let text = checkpoint::from_train_state(&state).to_text();
                let back = Checkpoint::parse(&text).expect("written state parses");
                assert_eq!(checkpoint::to_train_state(&back).as_ref(), Ok(&state));
            }
        }
        Ok("er") => drop(checkpoint::to_er(&ck)),
        Ok("ba") => drop(checkpoint::to_ba(&ck)),
        Ok("mmsb") => drop(checkpoint::to_mmsb(&ck)),
        _ => {}
    }
});
