//! Fuzz target: simulation spec JSON config parser.
//!
//! Deserialized specs must validate without panicking, and validated
//! dependent-cell pmfs must construct cleanly.

#![no_main]
use libfuzzer_sys::fuzz_target;

use catdcov::simlab::{gen_relevant_pmf, SimulationSpec};
use catdcov::stream::substream;

fuzz_target!(|data: &[u8]| {
    if data.len() > 64 * 1024 {
        return;
    }
    let Ok(spec) = serde_json::from_slice::<SimulationSpec>(data) else {
        return;
    };
    if spec.validate().is_err() {
        return;
    }
    if spec.feature_cats * spec.response_cats <= 4096 {
        // construction either succeeds with a valid pmf or reports the
        // documented mass error
        if let Ok(pmf) = gen_relevant_pmf(&spec, &mut substream(spec.seed, &[0])) {
            let mass: f64 = pmf.row_margins().iter().sum();
            assert!((mass - 1.0).abs() <= 1e-9);
        }
    }
});
