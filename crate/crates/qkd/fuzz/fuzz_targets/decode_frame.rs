//! Fuzzes the single-frame decoder: must never panic or overallocate on
//! arbitrary bytes, and anything it accepts must re-encode to the exact
//! consumed prefix.

#![no_main]

use libfuzzer_sys::fuzz_target;
use qkd::wire::ClassicalMessage;

fuzz_target!(|data: &[u8]| {
    if let Ok((msg, consumed)) = ClassicalMessage::decode_frame(data) {
        assert!(consumed <= data.len());
        let reencoded = msg.encode_frame();
        assert_eq!(&data[..consumed], reencoded.as_slice());
    }
});
