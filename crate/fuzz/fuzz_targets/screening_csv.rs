//! Fuzz target: response-plus-features CSV parser.
//!
//! Accepted panels must screen without panicking: statistics finite,
//! selection consistent with its threshold, selector failures reported as
//! errors.

#![no_main]
use libfuzzer_sys::fuzz_target;

use catdcov::screening::{
    changepoint_threshold, feature_stats, max_ratio_threshold, select, FeatureMatrix,
    ScreeningStat,
};

fuzz_target!(|data: &[u8]| {
    if data.len() > 64 * 1024 {
        return;
    }
    let Ok(panel) = FeatureMatrix::from_csv_reader(data) else {
        return;
    };
    if panel.n() > 512 || panel.num_features() > 256 {
        return;
    }
    let Ok(stats) = feature_stats(&panel, ScreeningStat::Dcov) else {
        return;
    };
    assert!(stats.values.iter().all(|v| v.is_finite() && *v >= 0.0));
    if let Ok(c) = max_ratio_threshold(&stats.values) {
        assert!(c > 0.0);
        for k in select(&stats.values, c) {
            assert!(stats.values[k] >= c);
        }
    }
    if let Ok((c, rank)) = changepoint_threshold(&stats.values) {
        assert!(c.is_finite());
        assert!(rank >= 2 && rank <= stats.values.len() - 2);
    }
});
