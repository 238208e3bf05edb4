//! Fuzz target: two-column sample CSV parser.
//!
//! The parser must never panic; when it accepts input, the downstream table
//! construction and plug-in statistics must hold their invariants.

#![no_main]
use libfuzzer_sys::fuzz_target;

use catdcov::estimators::{delta_hat, delta_tilde};
use catdcov::table::{ContingencyTable, PairedSample};

fuzz_target!(|data: &[u8]| {
    if data.len() > 64 * 1024 {
        return;
    }
    let Ok(sample) = PairedSample::from_csv_reader(data) else {
        return;
    };
    let table = ContingencyTable::from_sample(&sample);
    assert_eq!(table.total() as usize, sample.len());
    assert_eq!(table.row_margins().iter().sum::<u64>(), table.total());
    if let Ok(dh) = delta_hat(&table) {
        assert!(dh.is_finite() && dh >= 0.0);
    }
    if table.total() >= 4 {
        let dt = delta_tilde(&table).unwrap();
        assert!(dt.is_finite());
    }
});
