mod common;

use ctpanel_core::affect::{evaluate_rules, AuSet, RuleSet};
use ctpanel_core::panel::FaceFrame;

fn frame(au: AuSet) -> FaceFrame {
    FaceFrame {
        timestamp: 0.0,
        au,
        confidence: 1.0,
        pitch: 0.0,
        yaw: 0.0,
        roll: 0.0,
    }
}

#[test]
fn default_rules_match_truth_table() {
    let rules = RuleSet::default();
    for bits in 0u16..(1 << 12) {
        let au = AuSet::from_bits(bits);
        let got = evaluate_rules(&frame(au), &rules);
        assert_eq!(got, common::affect_oracle(au), "AUs {au:?}");
    }
}

#[test]
fn shipped_rule_file_matches_truth_table() {
    let rules = RuleSet::from_toml_str(ctpanel_core::affect::DEFAULT_RULES_TOML).unwrap();
    for bits in 0u16..(1 << 12) {
        let au = AuSet::from_bits(bits);
        assert_eq!(evaluate_rules(&frame(au), &rules), common::affect_oracle(au));
    }
}

#[test]
fn documented_examples() {
    let rules = RuleSet::default();
    let on = |codes: &[u8]| frame(AuSet::from_codes(codes.iter().copied()).unwrap());
    assert_eq!(evaluate_rules(&on(&[6, 12]), &rules), vec!["joy"]);
    assert!(evaluate_rules(&on(&[]), &rules).is_empty());
    assert_eq!(evaluate_rules(&on(&[6, 7, 12, 25, 26]), &rules), vec!["joy", "delight"]);
}
