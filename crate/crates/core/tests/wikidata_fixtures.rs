use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use ea_refine::http::{CountingTransport, HttpTransport, OfflineTransport};
use ea_refine::wikidata::{EntityCache, FixtureTransport, WikidataClient, WikidataError};
use ea_refine::{Locale, Qid};

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/wikidata")
}

fn fixture_qids() -> Vec<Qid> {
    let mut qids: Vec<Qid> = std::fs::read_dir(fixture_dir())
        .unwrap()
        .filter_map(|e| e.unwrap().path().file_stem()?.to_str()?.parse().ok())
        .collect();
    qids.sort();
    qids
}

fn all_locales() -> Vec<Locale> {
    Locale::TARGETS.to_vec()
}

fn client(transport: Arc<dyn HttpTransport>) -> WikidataClient {
    WikidataClient::new("fixture://wikidata", transport).with_rate_limit(None)
}

#[test]
fn every_fixture_parses() {
    let qids = fixture_qids();
    assert!(qids.len() >= 10);
    let c = client(Arc::new(FixtureTransport::new(fixture_dir())));
    for qid in &qids {
        let record = c.fetch_entity(qid, &all_locales()).unwrap();
        assert_eq!(&record.qid, qid);
        assert!(
            record.label(Locale::En).is_some(),
            "{qid} lacks an English label"
        );
    }
}

#[test]
fn gatsby_has_labels_descriptions_aliases_in_three_locales() {
    let c = client(Arc::new(FixtureTransport::new(fixture_dir())));
    let r = c.fetch_by_id("Q214371", &all_locales()).unwrap();
    assert_eq!(r.label(Locale::Ko), Some("위대한 개츠비"));
    assert_eq!(r.labels.len(), 11);
    assert!(r.descriptions.len() >= 3);
    let aliased: BTreeSet<_> = r.aliases.keys().collect();
    assert!(aliased.len() >= 3, "{aliased:?}");
}

#[test]
fn sandbox_item_has_no_korean_label() {
    let c = client(Arc::new(FixtureTransport::new(fixture_dir())));
    let r = c.fetch_by_id("Q4115189", &[Locale::Ko]).unwrap();
    assert_eq!(r.label(Locale::Ko), None);
    assert_eq!(c.fetch_log()[0].missing_labels, vec![Locale::Ko]);
}

#[test]
fn unknown_item_is_not_found() {
    let c = client(Arc::new(FixtureTransport::new(fixture_dir())));
    assert!(matches!(
        c.fetch_by_id("Q999999999", &[Locale::Ko]),
        Err(WikidataError::EntityNotFound(_))
    ));
}

#[test]
fn cache_prevents_second_network_call() {
    let transport = Arc::new(CountingTransport::new(FixtureTransport::new(fixture_dir())));
    let c = client(transport.clone());
    let dir = tempfile::tempdir().unwrap();
    let (cache, _) = EntityCache::open(dir.path()).unwrap();
    let qid: Qid = "Q90".parse().unwrap();
    assert!(
        !cache
            .get_or_fetch(&c, &qid, &all_locales())
            .unwrap()
            .from_cache
    );
    assert!(
        cache
            .get_or_fetch(&c, &qid, &all_locales())
            .unwrap()
            .from_cache
    );
    assert_eq!(transport.calls(), 1);

    let (reopened, warnings) = EntityCache::open(dir.path()).unwrap();
    assert!(warnings.is_empty());
    assert!(
        reopened
            .get_or_fetch(&c, &qid, &all_locales())
            .unwrap()
            .from_cache
    );
    assert_eq!(transport.calls(), 1);
}

#[test]
fn concurrent_misses_fetch_once() {
    let transport = Arc::new(CountingTransport::new(FixtureTransport::new(fixture_dir())));
    let c = client(transport.clone());
    let cache = EntityCache::in_memory();
    let qids = fixture_qids();
    std::thread::scope(|s| {
        for _ in 0..4 {
            s.spawn(|| {
                for q in &qids {
                    cache.get_or_fetch(&c, q, &all_locales()).unwrap();
                }
            });
        }
    });
    assert_eq!(transport.calls(), qids.len());
}

#[test]
fn offline_never_touches_network() {
    let transport = Arc::new(CountingTransport::new(OfflineTransport));
    let c = client(transport.clone()).offline(true);
    let cache = EntityCache::in_memory();
    for q in fixture_qids() {
        assert!(matches!(
            cache.get_or_fetch(&c, &q, &all_locales()),
            Err(WikidataError::Offline(_))
        ));
    }
    assert_eq!(transport.calls(), 0);
}
