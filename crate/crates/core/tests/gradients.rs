mod support;

use support::gradcheck::{op_and_loss_cases, whole_model_case};

#[test]
fn every_op_and_loss_matches_finite_differences() {
    let mut cases = op_and_loss_cases();
    cases.push(whole_model_case());
    for c in &cases {
        println!("{:<24} {:.3e} (< {:.0e})", c.name, c.error, c.tolerance);
    }
    let failed: Vec<&str> = cases.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}
