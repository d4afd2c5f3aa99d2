use proptest::prelude::*;
use scimcp_services::events::{EventService, TopicConfig};
use scimcp_services::fixture::CollectionFixture;
use scimcp_services::search::SearchIndexState;
use scimcp_services::transfer::{Endpoint, TransferService, TransferStatus};
use scimcp_services::SimClock;
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

fn file_tree() -> impl Strategy<Value = BTreeMap<String, Vec<u8>>> {
    let segment = "[a-c]{1,2}";
    let path = prop::collection::vec(segment, 1..4).prop_map(|s| format!("/src/{}", s.join("/")));
    prop::collection::btree_map(path, prop::collection::vec(any::<u8>(), 0..64), 1..12).prop_map(|m| {
        // A path cannot be both a file and a directory.
        let keys: Vec<String> = m.keys().cloned().collect();
        m.into_iter()
            .filter(|(p, _)| !keys.iter().any(|k| k.starts_with(&format!("{p}/"))))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn succeeded_transfers_are_byte_equal_to_source_snapshot(tree in file_tree(), mutate in any::<bool>()) {
        let clock = Arc::new(SimClock::manual());
        let svc = TransferService::from_fixture(
            &[
                CollectionFixture { collection_id: "a".into(), display_name: String::new(), files: BTreeMap::new(), dirs: vec![] },
                CollectionFixture { collection_id: "b".into(), display_name: String::new(), files: BTreeMap::new(), dirs: vec![] },
            ],
            clock.clone(),
        ).unwrap();
        for (p, bytes) in &tree {
            svc.write_file("a", p, bytes.clone()).unwrap();
        }
        let before = svc.snapshot("a", "/src").unwrap();
        let task = svc.submit(
            Endpoint { collection_id: "a".into(), path: "/src".into() },
            Endpoint { collection_id: "b".into(), path: "/dst".into() },
        ).unwrap();
        if mutate {
            for p in tree.keys() {
                svc.write_file("a", p, b"mutated".to_vec()).unwrap();
            }
        }
        clock.advance(task.completes_at - task.submitted_at);
        let done = svc.status(&task.task_id).unwrap();
        prop_assert_eq!(done.status, TransferStatus::Succeeded);
        let after = svc.snapshot("b", "/dst").unwrap();
        let strip = |v: Vec<(String, scimcp_services::vfs::FileEntry)>| {
            v.into_iter().map(|(p, f)| (p, f.content)).collect::<Vec<_>>()
        };
        prop_assert_eq!(done.bytes, before.iter().map(|(_, f)| f.content.len() as u64).sum::<u64>());
        prop_assert_eq!(strip(after), strip(before));
    }

    #[test]
    fn each_consumer_reads_every_event_exactly_once(
        ops in prop::collection::vec((0u8..3, 1u64..6), 1..200),
    ) {
        let svc = EventService::new(Arc::new(SimClock::manual()));
        svc.create_topic("t", TopicConfig::default()).unwrap();
        let mut published = Vec::new();
        let mut seen: BTreeMap<u8, Vec<(u64, String)>> = BTreeMap::new();
        for (i, (who, n)) in ops.iter().enumerate() {
            if *who == 0 {
                let payload = format!("p{i}");
                let off = svc.publish("t", payload.clone()).unwrap();
                prop_assert_eq!(off, published.len() as u64);
                published.push(payload);
            } else {
                let r = svc.consume("t", &format!("c{who}"), *n).unwrap();
                seen.entry(*who).or_default().extend(r.events.into_iter().map(|e| (e.offset, e.payload)));
            }
        }
        for who in 1u8..3 {
            let r = svc.consume("t", &format!("c{who}"), u64::MAX).unwrap();
            let got = seen.entry(who).or_default();
            got.extend(r.events.into_iter().map(|e| (e.offset, e.payload)));
            let expected: Vec<(u64, String)> = published.iter().cloned().enumerate().map(|(o, p)| (o as u64, p)).collect();
            prop_assert_eq!(&*got, &expected);
        }
    }

    #[test]
    fn incremental_index_equals_rebuild(
        ops in prop::collection::vec((any::<bool>(), 0u8..6, prop::collection::vec("[a-e]{1,2}", 0..5)), 1..60),
    ) {
        let mut idx = SearchIndexState::new("i");
        for (ingest, subject, words) in &ops {
            let subject = format!("s{subject}");
            if *ingest {
                idx.ingest(&[json!({"subject": subject, "text": words.join(" ")})]).unwrap();
            } else {
                idx.delete(&[subject]);
            }
            let fresh = idx.rebuilt();
            prop_assert_eq!(&idx, &fresh);
            let vocab: BTreeSet<&String> = words.iter().collect();
            for w in vocab {
                prop_assert_eq!(idx.query(w, 10), fresh.query(w, 10));
            }
        }
    }
}
