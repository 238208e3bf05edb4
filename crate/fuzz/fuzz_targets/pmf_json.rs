//! Fuzz target: pmf JSON parser.
//!
//! Accepted pmfs must satisfy the mass and margin invariants, and the
//! population functionals and influence sweep must stay finite or report
//! their documented errors instead of panicking.

#![no_main]
use libfuzzer_sys::fuzz_target;

use catdcov::estimators::{delta_pop, eta_pop};
use catdcov::influence::{gross_error_sensitivity, Functional};
use catdcov::table::JointPMF;

fuzz_target!(|data: &[u8]| {
    if data.len() > 64 * 1024 {
        return;
    }
    let Ok(pmf) = JointPMF::from_json_reader(data) else {
        return;
    };
    let row_mass: f64 = pmf.row_margins().iter().sum();
    assert!((row_mass - 1.0).abs() <= 1e-9);

    let d = delta_pop(&pmf);
    assert!(d.is_finite() && d >= 0.0);
    let e = eta_pop(&pmf);
    assert!(e.is_finite() && e >= 0.0);

    if pmf.rows() * pmf.cols() <= 1024 {
        let surface = gross_error_sensitivity(Functional::Dcov, &pmf);
        assert!(surface.gamma < 11.0);
        // chi-squared surface may be infinite, but never NaN
        let surface = gross_error_sensitivity(Functional::ChiSq, &pmf);
        assert!(!surface.gamma.is_nan());
        for row in &surface.values {
            for v in row {
                assert!(!v.is_nan());
            }
        }
    }
});
