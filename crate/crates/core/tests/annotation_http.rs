use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use relkit::annotation::service::{serve, AnnotationService, Progress, ServiceConfig, SubmitSummary};
use relkit::annotation::store::{Annotator, JudgmentLog, SystemClock};
use relkit::annotation::{assign_hits, Hit, HitItem, RelationDescriptions, SpanRef};
use relkit::model::Lang;
use reqwest::StatusCode;
use serde_json::{json, Value};

fn items(n: usize) -> Vec<HitItem> {
    (0..n)
        .map(|i| HitItem {
            triplet_id: format!("en-t{i:03}"),
            doc_id: format!("en:{i}"),
            lang: Lang::En,
            text: "Ann lives in Oslo".into(),
            subject: SpanRef {
                start: 0,
                end: 3,
                surface: "Ann".into(),
            },
            object: SpanRef {
                start: 13,
                end: 17,
                surface: "Oslo".into(),
            },
            pid: "P19".into(),
            relation: "place of birth".into(),
        })
        .collect()
}

fn annotators() -> BTreeMap<String, Annotator> {
    [("a", true), ("b", true), ("c", true), ("e", true), ("d", false)]
        .into_iter()
        .map(|(id, q)| {
            (
                id.to_string(),
                Annotator {
                    annotator_id: id.into(),
                    qualified: q,
                },
            )
        })
        .collect()
}

fn service(hits: Vec<Hit>, log: &Path) -> Arc<AnnotationService> {
    Arc::new(
        AnnotationService::new(
            hits,
            annotators(),
            JudgmentLog::open(log).unwrap(),
            RelationDescriptions::builtin(),
            ServiceConfig::default(),
            Arc::new(SystemClock),
        )
        .unwrap(),
    )
}

async fn start(svc: Arc<AnnotationService>) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve(listener, svc));
    format!("http://{addr}")
}

fn body_for(hit: &Value, annotator: &str, verdict: impl Fn(usize) -> bool) -> String {
    hit["items"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, it)| {
            json!({"triplet_id": it["triplet_id"], "annotator_id": annotator, "verdict": verdict(i)}).to_string() + "\n"
        })
        .collect()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn annotation_round_trip_over_http() {
    let tmp = tempfile::tempdir().unwrap();
    let log = tmp.path().join("judgments.jsonl");
    let plan = assign_hits(&items(20), 10, false).unwrap();
    let base = start(service(plan.hits.clone(), &log)).await;
    let http = reqwest::Client::new();
    let next = |who: &str| http.get(format!("{base}/hits/next?lang=en&annotator={who}")).send();

    assert_eq!(
        http.get(format!("{base}/health"))
            .send()
            .await
            .unwrap()
            .text()
            .await
            .unwrap(),
        "ok"
    );
    assert_eq!(next("d").await.unwrap().status(), StatusCode::FORBIDDEN);
    assert_eq!(next("zed").await.unwrap().status(), StatusCode::NOT_FOUND);
    let bad = http
        .get(format!("{base}/hits/next?lang=xx&annotator=a"))
        .send()
        .await
        .unwrap();
    assert_eq!(bad.status(), StatusCode::BAD_REQUEST);

    // Three slots on the first HIT, then the fourth annotator moves on.
    let h_a: Value = next("a").await.unwrap().json().await.unwrap();
    assert_eq!(h_a["hit_id"], "en-00000");
    let again: Value = next("a").await.unwrap().json().await.unwrap();
    assert_eq!(again["hit_id"], "en-00000");
    for who in ["b", "c"] {
        let h: Value = next(who).await.unwrap().json().await.unwrap();
        assert_eq!(h["hit_id"], "en-00000");
    }
    let h_e: Value = next("e").await.unwrap().json().await.unwrap();
    assert_eq!(h_e["hit_id"], "en-00001");

    let post = |body: String| http.post(format!("{base}/judgments")).body(body).send();
    let s: SubmitSummary = post(body_for(&h_a, "a", |_| true)).await.unwrap().json().await.unwrap();
    assert_eq!((s.accepted, s.duplicate), (10, 0));
    let before: Progress = http
        .get(format!("{base}/progress?lang=en"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();

    // Resubmitting is idempotent.
    let s: SubmitSummary = post(body_for(&h_a, "a", |_| false))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!((s.accepted, s.duplicate), (0, 10));
    let after: Progress = http
        .get(format!("{base}/progress?lang=en"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(before, after);
    assert_eq!(after.judgments, 10);

    // Finished annotators are never handed the same HIT again.
    let h: Value = next("a").await.unwrap().json().await.unwrap();
    assert_eq!(h["hit_id"], "en-00001");

    let mixed = format!(
        "{}\nnot json\n{}",
        json!({"triplet_id": "en-t000", "annotator_id": "b", "verdict": false}),
        json!({"triplet_id": "nope", "annotator_id": "b", "verdict": true})
    );
    let s: SubmitSummary = post(mixed).await.unwrap().json().await.unwrap();
    assert_eq!(s.accepted, 1);
    assert_eq!(s.rejected.iter().map(|r| r.line).collect::<Vec<_>>(), vec![2, 3]);

    post(body_for(&h_a, "b", |i| i % 2 == 0)).await.unwrap();
    post(body_for(&h_a, "c", |i| i < 5)).await.unwrap();
    let report: Value = http
        .get(format!("{base}/report?lang=en"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    // b judged t000 false first; majority true where two of three agree.
    assert_eq!(
        report["gold_true"].as_u64().unwrap() + report["gold_false"].as_u64().unwrap(),
        10
    );
    assert_eq!(report["pending"], 10);
    assert!(report["alpha"].is_number());

    let rels: Value = http
        .get(format!("{base}/relations?lang=en"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(rels[0]["pid"], "P19");
    assert!(rels[0]["description"].is_string());

    // A restarted service replays the log.
    let progress_now: Progress = http
        .get(format!("{base}/progress?lang=en"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let base2 = start(service(plan.hits, &log)).await;
    let replayed: Progress = http
        .get(format!("{base2}/progress?lang=en"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(replayed.judgments, progress_now.judgments);
    assert_eq!(replayed.complete_items, progress_now.complete_items);
}
