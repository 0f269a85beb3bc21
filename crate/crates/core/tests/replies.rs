mod common;

use common::golden;
use proptest::prelude::*;
use unite_core::model::StrategyKind;
use unite_core::translate::parse_output;

#[test]
fn list_of_objects() {
    golden::list_of_objects().unwrap();
}

#[test]
fn descriptions() {
    golden::descriptions().unwrap();
}

#[test]
fn relational_mapping() {
    golden::relational().unwrap();
}

#[test]
fn inconsistency_detection() {
    golden::inconsistency().unwrap();
}

#[test]
fn scene_graph() {
    golden::scene_graph().unwrap();
}

#[test]
fn every_prefix_is_handled() {
    for k in StrategyKind::ALL {
        for n in [1, 2] {
            let raw = common::reply_fixture(k, n);
            for (cut, _) in raw.char_indices() {
                let _ = parse_output(k, &raw[..cut]);
            }
        }
    }
}

proptest! {
    #[test]
    fn arbitrary_text_never_panics(raw in ".{0,400}", k in 0usize..6) {
        let _ = parse_output(StrategyKind::ALL[k], &raw);
    }
}
