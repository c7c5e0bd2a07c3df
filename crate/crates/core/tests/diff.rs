use attributor_core::diff::{diff_words, word_diff, EditOp};
use proptest::prelude::*;

fn words() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop::sample::select(vec!["a", "b", "c", "d", "dry", "weather", "the"]).prop_map(str::to_string),
        0..15,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn applying_the_diff_reproduces_the_edit(a in words(), b in words()) {
        let script = diff_words(&a, &b);
        prop_assert_eq!(script.apply(&a).unwrap(), b.clone());
        let spans = script.changed_spans();
        prop_assert!(spans.original.iter().all(|&i| i < a.len()));
        prop_assert!(spans.edited.iter().all(|&i| i < b.len()));
        prop_assert_eq!(script.is_identity(), a == b);
    }
}

#[test]
fn replacing_a_phrase_yields_two_replacements() {
    let script = word_diff(
        "the wildfires in maui were caused by dry weather and strong winds",
        "the wildfires in maui were caused by directed-energy weapons and strong winds",
    );
    let replaces: Vec<&EditOp> = script.ops.iter().filter(|op| matches!(op, EditOp::Replace { .. })).collect();
    assert_eq!(
        replaces,
        vec![
            &EditOp::Replace { index: 7, word: "directed-energy".into() },
            &EditOp::Replace { index: 8, word: "weapons".into() },
        ]
    );
    assert_eq!(script.ops.len(), 12);
    let spans = script.changed_spans();
    assert_eq!(spans.original, vec![7, 8]);
    assert_eq!(spans.edited, vec![7, 8]);
}

#[test]
fn identical_texts_keep_everything() {
    let script = word_diff("an ipo is", "an ipo is");
    assert!(script.is_identity());
    assert!(script.changed_spans().edited.is_empty());
}

#[test]
fn ops_serialize_with_tag() {
    let json = serde_json::to_string(&EditOp::Insert { position: 2, word: "x".into() }).unwrap();
    assert_eq!(json, r#"{"op":"insert","position":2,"word":"x"}"#);
}
