mod common;

use common::*;

#[test]
fn viterbi_matches_brute_force() {
    assert_eq!(viterbi_suite(1000, 11), 0);
}

#[test]
fn constrained_decoder_matches_exhaustive_search() {
    let (mismatches, failures) = decoder_suite(500, 12);
    assert_eq!(mismatches, 0);
    // the peak-free instances fail in both
    assert!(failures >= 50);
}

#[test]
fn hinge_loss_matches_enumeration() {
    let (mismatches, positive) = hinge_suite(200, 13);
    assert_eq!(mismatches, 0);
    assert!(positive > 100);
}

#[test]
fn m_method_matches_rule_oracle_on_noiseless_profiles() {
    let (agree, solved, total) = m_method_suite(500, 0xacce);
    assert_eq!(agree, total);
    assert!(
        solved as f64 >= 0.95 * total as f64,
        "solved {solved} of {total}"
    );
}
