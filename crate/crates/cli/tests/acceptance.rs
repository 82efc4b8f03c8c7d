//! One PASS/FAIL line per acceptance criterion.

mod support;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use ea_refine::corpus::{LanguagePair, ReferenceTranslation, Split, TaskInstance};
use ea_refine::eval::{
    analyze_label_similarity, edit_distance, evaluate, harmonic_mean, levenshtein_ratio,
    meta_match, point_biserial_r, spearman_rho, EntityMap, PredictionLine,
};
use ea_refine::feedback::{parse_feedback, Feedback};
use ea_refine::http::CountingTransport;
use ea_refine::llm::{Gateway, MockBackend, PromptFamily, ScriptStep};
use ea_refine::prompt::{FewShotStore, PromptKit};
use ea_refine::refine::{RefineConfig, RefineEngine, StopReason};
use ea_refine::retry::RetryPolicy;
use ea_refine::wikidata::{
    EntityCache, EntityRecord, FixtureTransport, WikidataClient, WikidataError,
};
use ea_refine::{Corpus, Locale, Qid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);
type Scenario = (&'static [(u8, u8)], u32, StopReason);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

// (C, M) per method from the detailed per-metric table, and the combined
// score per method from the headline table.
const LANGS: [&str; 10] = ["AR", "DE", "ES", "FR", "IT", "JA", "KO", "TH", "TR", "ZH"];
const METHODS: [&str; 3] = ["GPT-4o", "+RAG", "+Refine"];
const PER_METRIC: [[(f64, f64); 3]; 10] = [
    [(88.80, 41.48), (93.34, 92.17), (94.23, 91.86)],
    [(88.25, 43.04), (92.71, 85.46), (94.08, 85.23)],
    [(88.86, 48.00), (93.80, 90.61), (95.00, 89.88)],
    [(86.40, 40.88), (92.28, 90.61), (93.54, 89.95)],
    [(87.28, 44.02), (94.46, 92.64), (95.65, 92.43)],
    [(82.57, 42.54), (94.67, 89.53), (95.61, 90.86)],
    [(85.20, 34.67), (94.22, 89.77), (95.21, 90.85)],
    [(72.25, 21.76), (92.40, 91.06), (94.26, 91.53)],
    [(84.31, 43.03), (94.50, 82.83), (95.63, 84.86)],
    [(81.92, 34.85), (92.55, 78.06), (93.86, 77.77)],
];
const COMBINED: [[f64; 10]; 3] = [
    [
        56.54, 57.86, 62.32, 55.49, 58.52, 56.15, 49.28, 33.44, 56.98, 48.89,
    ],
    [
        92.75, 88.94, 92.18, 91.44, 93.54, 92.02, 91.94, 91.72, 88.27, 84.68,
    ],
    [
        93.03, 89.43, 92.37, 91.71, 94.01, 93.17, 92.98, 92.87, 89.93, 85.06,
    ],
];

fn harmonic_combiner() -> Check {
    let started = Instant::now();
    let mut cells = 0;
    for (l, lang) in LANGS.iter().enumerate() {
        for (m, method) in METHODS.iter().enumerate() {
            let (c, meta) = PER_METRIC[l][m];
            let got = harmonic_mean(c, meta);
            let want = COMBINED[m][l];
            ensure!(
                (got - want).abs() <= 0.02,
                "{lang} {method}: HM({c}, {meta}) = {got:.4}, table {want}"
            );
            cells += 1;
        }
    }
    ensure!(cells == 30, "{cells} cells");
    ensure!(
        started.elapsed() < Duration::from_secs(1),
        "took {:?}",
        started.elapsed()
    );
    Ok(())
}

/// Full-table Wagner-Fischer over chars.
fn dp_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn random_word(rng: &mut ChaCha8Rng, alphabet: &[char], max_len: usize) -> String {
    let len = rng.random_range(0..=max_len);
    (0..len)
        .map(|_| alphabet[rng.random_range(0..alphabet.len())])
        .collect()
}

fn levenshtein_oracle() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let alphabet = ['a', 'b', 'c', 'd'];
    for _ in 0..1000 {
        let a = random_word(&mut rng, &alphabet, 8);
        let b = random_word(&mut rng, &alphabet, 8);
        let want = dp_distance(&a, &b);
        ensure!(
            edit_distance(&a, &b) == want,
            "distance({a:?}, {b:?}) != {want}"
        );
        let denom = a.chars().count().max(b.chars().count());
        let want_ratio = if denom == 0 {
            0.0
        } else {
            want as f64 / denom as f64
        };
        ensure!(
            levenshtein_ratio(&a, &b) == want_ratio,
            "ratio({a:?}, {b:?})"
        );
        ensure!(
            levenshtein_ratio(&b, &a) == levenshtein_ratio(&a, &b),
            "asymmetric on {a:?}, {b:?}"
        );
        ensure!(levenshtein_ratio(&a, &a) == 0.0, "identity on {a:?}");
    }
    ensure!(
        started.elapsed() < Duration::from_secs(5),
        "took {:?}",
        started.elapsed()
    );
    Ok(())
}

fn oracle_pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Rank = number of smaller values + half the tie block, 1-based.
fn oracle_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            let less = xs.iter().filter(|y| *y < x).count() as f64;
            let equal = xs.iter().filter(|y| *y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn correlation_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for case in 0..200 {
        let n = rng.random_range(2..=50);
        let xs: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..8) as f64 / 4.0)
            .collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        let flags: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let coded: Vec<f64> = flags.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();

        let rho_oracle = oracle_pearson(&oracle_ranks(&xs), &oracle_ranks(&ys));
        match (spearman_rho(&xs, &ys), rho_oracle) {
            (Ok(got), Some(want)) => ensure!(close(got, want), "case {case}: rho {got} vs {want}"),
            (Err(_), None) => {}
            (got, want) => return Err(format!("case {case}: rho {got:?} vs oracle {want:?}")),
        }
        let r_oracle = oracle_pearson(&xs, &coded);
        match (point_biserial_r(&xs, &flags), r_oracle) {
            (Ok(got), Some(want)) => ensure!(close(got, want), "case {case}: r {got} vs {want}"),
            (Err(_), None) => {}
            (got, want) => return Err(format!("case {case}: r {got:?} vs oracle {want:?}")),
        }

        let (scale, shift) = (rng.random_range(0.5..4.0), rng.random_range(-10.0..10.0));
        let moved: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
        if let (Ok(a), Ok(b)) = (spearman_rho(&xs, &ys), spearman_rho(&moved, &ys)) {
            ensure!(
                close(a, b),
                "case {case}: rho not affine invariant ({a} vs {b})"
            );
        }
        if let (Ok(a), Ok(b)) = (
            point_biserial_r(&xs, &flags),
            point_biserial_r(&moved, &flags),
        ) {
            ensure!(
                close(a, b),
                "case {case}: r not affine invariant ({a} vs {b})"
            );
        }
    }
    Ok(())
}

fn gatsby() -> EntityRecord {
    let mut r = EntityRecord::new(
        Qid::new("Q214371").unwrap(),
        Utc.timestamp_opt(0, 0).unwrap(),
    );
    r.labels.insert(Locale::En, "The Great Gatsby".into());
    r.labels.insert(Locale::Ko, "위대한 개츠비".into());
    r
}

fn ko_instance(id: &str, mention: &str) -> TaskInstance {
    TaskInstance {
        id: id.into(),
        language_pair: LanguagePair::english_to(Locale::Ko).unwrap(),
        source_text: "Who wrote The Great Gatsby?".into(),
        wikidata_qid: Qid::new("Q214371").unwrap(),
        references: vec![ReferenceTranslation {
            translation_text: format!("{mention}은 누가 썼나요?"),
            entity_mention: Some(mention.into()),
        }],
    }
}

fn fb(e: u8, q: u8) -> String {
    Feedback::new(e, q, format!("entity {e}, quality {q}"))
        .unwrap()
        .to_text()
}

struct LoopRun {
    stop: StopReason,
    calls: u32,
    transcript: String,
    transcript_len: usize,
    totals: Vec<u8>,
    final_total: Option<u8>,
    feedback_calls: usize,
    final_translation: String,
}

fn run_loop(steps: Vec<ScriptStep>) -> Result<LoopRun, String> {
    let gw = Gateway::new(
        Arc::new(MockBackend::fifo(steps)),
        RetryPolicy::immediate(5),
        3,
    );
    let kit = PromptKit::builtin();
    let engine = RefineEngine::new(&gw, &kit, RefineConfig::default());
    let r = engine
        .run_loop(&gatsby(), &ko_instance("ko-1", "위대한 개츠비"))
        .map_err(|e| e.to_string())?;
    let entries = gw.transcript().entries();
    Ok(LoopRun {
        stop: r.stop_reason,
        calls: r.llm_calls,
        transcript: gw.transcript().to_jsonl(&["ko-1".into()]),
        transcript_len: entries.len(),
        totals: r.feedbacks.iter().map(|f| f.total).collect(),
        final_total: r.final_feedback().map(|f| f.total),
        feedback_calls: entries
            .iter()
            .filter(|e| e.tag.family == PromptFamily::Feedback)
            .count(),
        final_translation: r.final_translation,
    })
}

fn refine_call_law() -> Check {
    let scenarios: [Scenario; 5] = [
        (&[(5, 5)], 0, StopReason::PerfectScore),
        (&[(3, 5), (5, 5)], 1, StopReason::PerfectScore),
        (&[(2, 5), (4, 4), (5, 5)], 2, StopReason::PerfectScore),
        (&[(2, 5), (4, 5), (3, 3)], 2, StopReason::MaxRefinements),
        (&[(4, 5), (1, 1), (2, 2)], 2, StopReason::MaxRefinements),
    ];
    for (scores, r, stop) in scenarios {
        let steps = || {
            let mut steps = Vec::new();
            for (i, (e, q)) in scores.iter().enumerate() {
                steps.push(ScriptStep::reply(format!("후보 {i}")));
                steps.push(ScriptStep::reply(fb(*e, *q)));
            }
            // never requested after an early stop
            steps.push(ScriptStep::reply("unused"));
            steps
        };
        let a = run_loop(steps())?;
        ensure!(
            a.calls == 2 + 2 * r,
            "{scores:?}: {} calls, expected {}",
            a.calls,
            2 + 2 * r
        );
        ensure!(
            a.transcript_len as u32 == 2 + 2 * r,
            "{scores:?}: transcript has {} entries",
            a.transcript_len
        );
        ensure!(a.stop == stop, "{scores:?}: stopped with {:?}", a.stop);
        ensure!(
            a.totals[..a.totals.len() - 1].iter().all(|&t| t < 10),
            "{scores:?}: continued past a perfect score"
        );
        let best = *a.totals.iter().max().unwrap();
        ensure!(
            a.final_total == Some(best),
            "{scores:?}: final {:?} below best {best}",
            a.final_total
        );
        let b = run_loop(steps())?;
        ensure!(a.transcript == b.transcript, "{scores:?}: replay differs");
    }
    Ok(())
}

fn feedback_grammar() -> Check {
    let store = FewShotStore::builtin();
    let mut n = 0;
    for (pair, ex) in store.all_examples() {
        let parsed = parse_feedback(&ex.feedback_text).map_err(|e| format!("{pair}: {e}"))?;
        ensure!(
            (parsed.entity_score, parsed.quality_score) == (ex.entity_score, ex.quality_score),
            "{pair}: declared scores disagree"
        );
        let again =
            parse_feedback(&parsed.to_text()).map_err(|e| format!("{pair} re-parse: {e}"))?;
        ensure!(again == parsed, "{pair}: round trip changed the feedback");
        n += 1;
    }
    ensure!(n >= 10, "only {n} shipped examples");

    let malformed = [
        "Entity Accuracy: 4/5\nComments: the quality line is missing",
        "Entity Accuracy: 6/5\nTranslation Quality: 5/5\nComments: out of range",
        "I think this translation deserves 9 out of 10.",
    ];
    for bad in malformed {
        ensure!(parse_feedback(bad).is_err(), "{bad:?} parsed");
        let out = run_loop(vec![
            ScriptStep::reply("후보"),
            ScriptStep::reply(bad),
            ScriptStep::reply(bad),
        ])?;
        ensure!(
            out.feedback_calls == 2,
            "{bad:?}: {} feedback calls",
            out.feedback_calls
        );
        ensure!(
            out.stop == StopReason::FeedbackFailure,
            "{bad:?}: stopped with {:?}",
            out.stop
        );
        ensure!(
            out.final_translation == "후보",
            "{bad:?}: initial candidate not kept"
        );
    }
    Ok(())
}

fn meta_fixture() -> Check {
    let mut instances = Vec::new();
    let mut predictions = Vec::new();
    for i in 0..20 {
        let mention = format!("작품{i}");
        instances.push(ko_instance(&format!("ko-{i}"), &mention));
        let miss = i % 3 == 2 || i == 19;
        let prediction = if miss {
            format!("작품 {i}은 누가 썼나요?")
        } else {
            format!("{mention}은 누가 썼나요?")
        };
        predictions.push(PredictionLine {
            id: format!("ko-{i}"),
            prediction,
        });
    }
    let planted = predictions
        .iter()
        .filter(|p| !p.prediction.contains("작품 "))
        .count();
    ensure!(planted == 13, "fixture plants {planted}");
    let corpus = Corpus::new(Split::Test, instances);
    let evaluation = evaluate(&corpus, &predictions, &EntityMap::new(), None, "fixture");
    let meta = evaluation.report.languages[&Locale::Ko].meta_accuracy;
    ensure!(meta == Some(65.0), "M-ETA {meta:?}");

    let surfaces = vec!["박물관이 살아있다".to_string()];
    let pos = meta_match(
        "pos",
        "박물관이 살아있다는 언제 개봉했나요?",
        &surfaces,
        Locale::Ko,
    )
    .map_err(|e| e.to_string())?;
    let neg = meta_match(
        "neg",
        "박물관에서의 밤은 언제 개봉했나요?",
        &surfaces,
        Locale::Ko,
    )
    .map_err(|e| e.to_string())?;
    ensure!(pos.correct, "transcreated title not accepted");
    ensure!(!neg.correct, "literal title accepted");
    Ok(())
}

fn wikidata_dir() -> PathBuf {
    support::wikidata_fixtures()
}

fn wikidata_client() -> Check {
    let locales = Locale::TARGETS.to_vec();
    let transport = Arc::new(CountingTransport::new(
        FixtureTransport::new(wikidata_dir()),
    ));
    let client = WikidataClient::new("fixture://wikidata", transport.clone()).with_rate_limit(None);
    let cache = EntityCache::in_memory();
    let mut qids: Vec<Qid> = std::fs::read_dir(wikidata_dir())
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok()?.path().file_stem()?.to_str()?.parse().ok())
        .collect();
    qids.sort();
    ensure!(qids.len() >= 10, "{} fixtures", qids.len());
    for qid in &qids {
        let lookup = cache
            .get_or_fetch(&client, qid, &locales)
            .map_err(|e| format!("{qid}: {e}"))?;
        ensure!(!lookup.from_cache, "{qid} served from an empty cache");
        ensure!(
            lookup.record.label(Locale::En).is_some(),
            "{qid} has no English label"
        );
    }
    let gatsby = cache
        .get(&Qid::new("Q214371").unwrap())
        .ok_or("Q214371 missing")?;
    ensure!(
        gatsby.labels.len() >= 3,
        "labels in {} locales",
        gatsby.labels.len()
    );
    ensure!(
        gatsby.descriptions.len() >= 3,
        "descriptions in {} locales",
        gatsby.descriptions.len()
    );
    ensure!(
        gatsby.aliases.len() >= 3,
        "aliases in {} locales",
        gatsby.aliases.len()
    );

    let fetched = transport.calls();
    ensure!(
        fetched == qids.len(),
        "{fetched} network calls for {} items",
        qids.len()
    );
    for qid in &qids {
        let lookup = cache
            .get_or_fetch(&client, qid, &locales)
            .map_err(|e| e.to_string())?;
        ensure!(lookup.from_cache, "{qid} refetched");
    }
    ensure!(
        transport.calls() == fetched,
        "cache hit reached the network"
    );

    let offline_transport = Arc::new(CountingTransport::new(
        FixtureTransport::new(wikidata_dir()),
    ));
    let offline =
        WikidataClient::new("fixture://wikidata", offline_transport.clone()).offline(true);
    let cold = EntityCache::in_memory();
    for qid in &qids {
        ensure!(
            matches!(
                cold.get_or_fetch(&offline, qid, &locales),
                Err(WikidataError::Offline(_))
            ),
            "{qid}: offline miss did not fail"
        );
        ensure!(
            cache.get_or_fetch(&offline, qid, &locales).is_ok(),
            "{qid}: offline hit failed"
        );
    }
    ensure!(
        offline_transport.calls() == 0,
        "offline mode made {} calls",
        offline_transport.calls()
    );
    Ok(())
}

fn end_to_end() -> Check {
    use support::*;
    let ws = e2e_workspace();
    let config = ws.path().join("run.toml");
    let started = Instant::now();
    let t = run(&[
        "--config",
        p(&config),
        "--offline",
        "translate",
        "--output-dir",
        p(&ws.path().join("t")),
    ]);
    ensure!(
        code(&t) == 0,
        "translate exited {}: {}",
        code(&t),
        stderr(&t)
    );
    let preds = ws.path().join("t/predictions.jsonl");
    let e = run(&[
        "--config",
        p(&config),
        "--offline",
        "evaluate",
        "--predictions",
        p(&preds),
        "--output-dir",
        p(&ws.path().join("e")),
    ]);
    ensure!(
        code(&e) == 0,
        "evaluate exited {}: {}",
        code(&e),
        stderr(&e)
    );
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");

    let lines = read(&preds).lines().count();
    ensure!(lines == 10, "{lines} prediction lines");
    let report = read_json(&ws.path().join("e/report.json"));
    let (mut correct, mut scored) = (0.0, 0.0);
    for scores in report["languages"]
        .as_object()
        .ok_or("no languages")?
        .values()
    {
        let n = scores["counts"]["scored"].as_f64().unwrap_or(0.0);
        correct += scores["meta_accuracy"].as_f64().unwrap_or(0.0) / 100.0 * n;
        scored += n;
    }
    let meta = 100.0 * correct / scored;
    ensure!((meta - 70.0).abs() < 1e-9, "M-ETA {meta}, planted 70.0");
    Ok(())
}

fn correlation_sanity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let letters: Vec<char> = ('a'..='z').collect();
    let mut entities = EntityMap::new();
    let mut instances = Vec::new();
    let mut outcomes = Vec::new();
    for i in 0..1000 {
        let qid = Qid::new(&format!("Q{}", 500_000 + i)).unwrap();
        let mut record = EntityRecord::new(qid.clone(), Utc.timestamp_opt(0, 0).unwrap());
        let en = random_word(&mut rng, &letters, 12) + "x";
        let de = random_word(&mut rng, &letters, 12) + "x";
        record.labels.insert(Locale::En, en.clone());
        record.labels.insert(Locale::De, de.clone());
        entities.insert(qid.clone(), Arc::new(record));
        let id = format!("de-{i}");
        instances.push(TaskInstance {
            id: id.clone(),
            language_pair: LanguagePair::english_to(Locale::De).unwrap(),
            source_text: format!("What is {en}?"),
            wikidata_qid: qid,
            references: vec![ReferenceTranslation {
                translation_text: format!("Was ist {de}?"),
                entity_mention: Some(de.clone()),
            }],
        });
        outcomes.push(if rng.random_bool(0.5) {
            ea_refine::eval::MetaOutcome::matched(id, de)
        } else {
            ea_refine::eval::MetaOutcome::unmatched(id)
        });
    }
    let corpus = Corpus::new(Split::Test, instances);
    let report = analyze_label_similarity(&corpus, &entities, &outcomes);
    let de = report.languages.get(&Locale::De).ok_or("no German entry")?;
    ensure!(de.n == 1000, "n = {}", de.n);
    let rho = de.spearman_rho.ok_or("rho undefined")?;
    let r = de.point_biserial_r.ok_or("r undefined")?;
    ensure!(rho.abs() < 0.1 && r.abs() < 0.1, "rho {rho:.4}, r {r:.4}");
    Ok(())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("harmonic-combiner oracle (30 cells)", harmonic_combiner),
        ("levenshtein oracle equivalence", levenshtein_oracle),
        (
            "correlation oracles and affine invariance",
            correlation_oracles,
        ),
        ("refine-loop call law", refine_call_law),
        ("feedback grammar", feedback_grammar),
        ("M-ETA fixture", meta_fixture),
        ("wikidata client fixtures, cache, offline", wikidata_client),
        ("end-to-end desk run", end_to_end),
        ("correlation pipeline sanity", correlation_sanity),
    ];
    let mut failed = BTreeMap::new();
    for (name, check) in criteria {
        let outcome = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(result) => result,
            Err(_) => Err("panicked".into()),
        };
        match outcome {
            Ok(()) => println!("PASS {name}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                failed.insert(name, why);
            }
        }
    }
    println!(
        "acceptance: {} passed, {} failed",
        9 - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
