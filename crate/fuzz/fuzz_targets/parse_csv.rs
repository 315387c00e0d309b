#![no_main]

use libfuzzer_sys::fuzz_target;
use msvm::data::io::{parse_csv, LabelColumn};

fuzz_target!(|data: &[u8]| {
    for label in [LabelColumn::Auto, LabelColumn::None, LabelColumn::Index(1)] {
        if let Ok(table) = parse_csv(data, &label) {
            let _ = table.into_dataset(None);
        }
    }
});
