use silentwatch::analysis::calibrate_steps;
use silentwatch::config::{default_params, CALIBRATED_TC_STEP, CALIBRATED_TH_STEP, DEFAULT_SEED};

/// The frozen load-step onsets are what the 50 s grid search selects.
#[test]
fn frozen_steps_reproduce() {
    let report = calibrate_steps(&default_params(), 50.0, DEFAULT_SEED).unwrap();
    let best = report.best.expect("an admissible candidate");
    assert_eq!(report.evaluated, 37 * 37);
    assert_eq!(
        (best.tc_step, best.th_step),
        (CALIBRATED_TC_STEP, CALIBRATED_TH_STEP)
    );
    assert!(best.admissible(&default_params()));
}
