use envmap::pipeline::{NormalizeError, Normalizer};
use proptest::prelude::*;

#[test]
fn numeric_user_ids_collapse() {
    let n = Normalizer::default();
    assert_eq!(n.normalize("/users/123").unwrap(), "/users/{id}");
    assert_eq!(
        n.normalize("http://localhost:8023/users/123?tab=1#x")
            .unwrap(),
        "/users/{id}"
    );
    assert_eq!(n.normalize("/").unwrap(), "/");
    assert_eq!(
        n.normalize("/projects/42/issues/7").unwrap(),
        "/projects/{id}/issues/{id}"
    );
    assert_eq!(
        n.normalize("/s/550e8400-e29b-41d4-a716-446655440000")
            .unwrap(),
        "/s/{uuid}"
    );
    assert_eq!(n.normalize("/commit/deadbeef1").unwrap(), "/commit/{hash}");
}

#[test]
fn rejects_unparseable() {
    let n = Normalizer::default();
    assert!(matches!(
        n.normalize("not a url"),
        Err(NormalizeError::UnparseableUrl(_))
    ));
}

#[test]
fn custom_rules() {
    let n = Normalizer::from_rules_text("# slugs\n10\t[a-z]+(-[a-z]+)+\t{slug}\n").unwrap();
    assert_eq!(
        n.normalize("/blog/hello-big-world").unwrap(),
        "/blog/{slug}"
    );
    assert!(Normalizer::from_rules_text("bad line").is_err());
}

#[test]
fn fixture_urls_are_stable() {
    let n = Normalizer::default();
    for t in envmap_testkit::fixture_trajectories() {
        for e in t.action_events() {
            let once = n.normalize(&e.url).unwrap();
            assert_eq!(n.normalize(&once).unwrap(), once, "{}", e.url);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn idempotent_on_random_paths(
        segs in prop::collection::vec(
            prop_oneof![
                "[a-z]{1,8}",
                "[0-9]{1,6}",
                "[0-9a-f]{6,12}",
                "[A-Za-z0-9._~-]{1,10}",
                Just("{id}".to_string()),
            ],
            0..6,
        ),
        query in proptest::option::of("[a-z]{1,4}=[a-z0-9]{0,4}"),
    ) {
        let n = Normalizer::default();
        let mut url = format!("/{}", segs.join("/"));
        if let Some(q) = query {
            url.push('?');
            url.push_str(&q);
        }
        let once = n.normalize(&url).unwrap();
        prop_assert_eq!(n.normalize(&once).unwrap(), once);
    }
}
