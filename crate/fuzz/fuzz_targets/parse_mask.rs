#![no_main]

use libfuzzer_sys::fuzz_target;
use msvm::data::io::{format_mask, parse_mask};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mask) = parse_mask(text) {
        assert_eq!(parse_mask(&format_mask(&mask)).expect("formatted mask parses"), mask);
    }
});
