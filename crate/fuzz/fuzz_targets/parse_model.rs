#![no_main]

use libfuzzer_sys::fuzz_target;
use msvm::data::io::{format_model, parse_model};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(clf) = parse_model(text) {
        let again = parse_model(&format_model(&clf)).expect("formatted model parses");
        assert_eq!(again, clf);
    }
});
