use envmap::trace::{
    filter_accessibility_tree, serialize_snapshot, DomSnapshot, FilterLimits, InterfaceElement,
};
use envmap_testkit::adversarial_tree;
use envmap_testkit::laws::a11y_failures;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn adversarial_trees_respect_caps() {
    let limits = FilterLimits::default();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for round in 0..20 {
        let tree = adversarial_tree(&mut rng, 50_000);
        assert!(tree.chars().count() >= 50_000);
        let out = filter_accessibility_tree(&tree, limits);
        let failures = a11y_failures(&out, limits);
        assert!(failures.is_empty(), "round {round}: {failures:?}");
    }
}

#[test]
fn small_limits_are_honored() {
    let limits = FilterLimits {
        sibling_limit: 3,
        text_limit: 20,
        char_cap: 600,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tree = adversarial_tree(&mut rng, 50_000);
    let out = filter_accessibility_tree(&tree, limits);
    assert!(
        out.ends_with("[...](output truncated at 600 characters)"),
        "{} chars:\n{out}",
        out.chars().count()
    );
    assert_eq!(a11y_failures(&out, limits), Vec::<String>::new());
}

#[test]
fn serialized_snapshot_round_trips_through_filter() {
    let el = |id: &str, role: &str, text: &str, children: &[&str]| InterfaceElement {
        element_id: id.into(),
        role: role.into(),
        text: text.into(),
        interactable: role != "main",
        children: children.iter().map(|c| c.to_string()).collect(),
    };
    let snap = DomSnapshot {
        snapshot_id: "s".into(),
        url: "http://h/".into(),
        capture_index: 0,
        elements: vec![
            el("root", "main", "", &["a", "b"]),
            el("a", "link", "Say \"hi\"", &[]),
            el("b", "list", "", &["c"]),
            el("c", "listitem", "One", &[]),
        ],
    };
    let tree = serialize_snapshot(&snap);
    assert_eq!(
        tree,
        "main \"\" [root]\n  link \"Say \\\"hi\\\"\" [a]\n  list \"\" [b]\n    listitem \"One\" [c]\n"
    );
    assert_eq!(
        filter_accessibility_tree(&tree, FilterLimits::default()),
        tree.trim_end()
    );
}
