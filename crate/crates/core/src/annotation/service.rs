//! HTTP annotation service.
//!
//! | method | path | body / query | response |
//! |---|---|---|---|
//! | GET | `/hits/next` | `lang`, `annotator` | [`Hit`], or 204 when nothing is left |
//! | POST | `/judgments` | JSONL of [`JudgmentInput`] | [`SubmitSummary`] |
//! | GET | `/progress` | `lang` | [`Progress`] |
//! | GET | `/report` | `lang` | [`AgreementReport`] |
//! | GET | `/relations` | `lang` | list of [`RelationInfo`] |
//!
//! Errors come back as `{"error": "..."}` with a 4xx/5xx status.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::{Arc, Mutex};

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Duration;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::store::{Annotator, Appended, Clock, JudgmentLog, LeaseBook};
use super::{aggregate, agreement_report, AgreementReport, Hit, Judgment, RelationDescriptions, Verdict};
use crate::error::Error;
use crate::model::Lang;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub required: usize,
    pub quorum: usize,
    pub lease_ttl: Duration,
}

impl ServiceConfig {
    pub fn new(required: usize, quorum: usize, lease_ttl: std::time::Duration) -> crate::Result<Self> {
        let lease_ttl = Duration::from_std(lease_ttl).map_err(|e| Error::Config(format!("lease ttl: {e}")))?;
        Ok(ServiceConfig {
            required,
            quorum,
            lease_ttl,
        })
    }
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            required: super::DEFAULT_REQUIRED,
            quorum: super::DEFAULT_QUORUM,
            lease_ttl: Duration::minutes(30),
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown annotator {0}")]
    UnknownAnnotator(String),
    #[error("annotator {0} is not qualified")]
    NotQualified(String),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Storage(#[from] Error),
}

impl ServiceError {
    fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownAnnotator(_) => StatusCode::NOT_FOUND,
            ServiceError::NotQualified(_) => StatusCode::FORBIDDEN,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}

/// One line of a `POST /judgments` body. The server stamps the time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentInput {
    pub triplet_id: String,
    pub annotator_id: String,
    pub verdict: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based line in the request body.
    pub line: usize,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitSummary {
    pub accepted: usize,
    pub duplicate: usize,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub lang: Lang,
    pub hits: usize,
    pub items: usize,
    pub judgments: usize,
    pub annotators: usize,
    /// Items with the required number of judgments.
    pub complete_items: usize,
    pub pending_items: usize,
    pub leased_hits: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationInfo {
    pub pid: String,
    pub name: String,
    pub description: Option<String>,
}

struct Inner {
    log: JudgmentLog,
    leases: LeaseBook,
    /// hit index -> annotators with at least one judgment in it
    started: HashMap<usize, HashSet<String>>,
}

pub struct AnnotationService {
    hits: Vec<Hit>,
    /// triplet_id -> (lang, hit index)
    items: HashMap<String, (Lang, usize)>,
    annotators: BTreeMap<String, Annotator>,
    descriptions: RelationDescriptions,
    cfg: ServiceConfig,
    clock: Arc<dyn Clock>,
    inner: Mutex<Inner>,
}

impl AnnotationService {
    pub fn new(
        hits: Vec<Hit>,
        annotators: BTreeMap<String, Annotator>,
        log: JudgmentLog,
        descriptions: RelationDescriptions,
        cfg: ServiceConfig,
        clock: Arc<dyn Clock>,
    ) -> crate::Result<Self> {
        if cfg.required == 0 || cfg.quorum == 0 || cfg.quorum > cfg.required {
            return Err(Error::Config(format!(
                "need 0 < quorum <= required, got {} / {}",
                cfg.quorum, cfg.required
            )));
        }
        let mut items = HashMap::new();
        for (hi, h) in hits.iter().enumerate() {
            for it in &h.items {
                if it.lang != h.lang {
                    return Err(Error::Config(format!(
                        "{}: item {} has language {}",
                        h.hit_id, it.triplet_id, it.lang
                    )));
                }
                if items.insert(it.triplet_id.clone(), (h.lang, hi)).is_some() {
                    return Err(Error::Config(format!("triplet {} appears in two HITs", it.triplet_id)));
                }
            }
        }
        let mut started: HashMap<usize, HashSet<String>> = HashMap::new();
        for j in log.judgments() {
            if let Some((_, hi)) = items.get(&j.triplet_id) {
                started.entry(*hi).or_default().insert(j.annotator_id.clone());
            }
        }
        Ok(AnnotationService {
            hits,
            items,
            annotators,
            descriptions,
            cfg,
            clock,
            inner: Mutex::new(Inner {
                log,
                leases: LeaseBook::default(),
                started,
            }),
        })
    }

    fn check_annotator(&self, id: &str) -> Result<(), ServiceError> {
        match self.annotators.get(id) {
            None => Err(ServiceError::UnknownAnnotator(id.to_string())),
            Some(a) if !a.qualified => Err(ServiceError::NotQualified(id.to_string())),
            Some(_) => Ok(()),
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn finished(&self, inner: &Inner, hi: usize, annotator: &str) -> bool {
        self.hits[hi]
            .items
            .iter()
            .all(|it| inner.log.has(&it.triplet_id, annotator))
    }

    /// Leases the first HIT in `lang` that still has a free slot and that
    /// `annotator` has not worked on. Asking again while holding a live lease
    /// returns the same HIT.
    pub fn next_hit(&self, lang: Lang, annotator: &str) -> Result<Option<Hit>, ServiceError> {
        self.check_annotator(annotator)?;
        let now = self.clock.now();
        let mut inner = self.lock();
        inner.leases.prune(now);
        for (hi, h) in self.hits.iter().enumerate().filter(|(_, h)| h.lang == lang) {
            if inner.leases.holds(&h.hit_id, annotator, now) && !self.finished(&inner, hi, annotator) {
                return Ok(Some(h.clone()));
            }
        }
        for (hi, h) in self.hits.iter().enumerate().filter(|(_, h)| h.lang == lang) {
            let started = inner.started.get(&hi);
            if started.is_some_and(|s| s.contains(annotator)) {
                continue;
            }
            let mut takers: BTreeSet<&str> = started.into_iter().flatten().map(String::as_str).collect();
            takers.extend(inner.leases.live(&h.hit_id, now).map(|l| l.annotator_id.as_str()));
            if takers.len() < self.cfg.required {
                let expires = now + self.cfg.lease_ttl;
                inner.leases.grant(&h.hit_id, annotator, expires);
                return Ok(Some(h.clone()));
            }
        }
        Ok(None)
    }

    /// Records judgments line by line. Unknown triplets or annotators are
    /// rejected per line; repeats of an existing (triplet, annotator) pair are
    /// counted as duplicates and change nothing.
    pub fn submit(&self, inputs: Vec<Result<JudgmentInput, String>>) -> Result<SubmitSummary, ServiceError> {
        let now = self.clock.now();
        let mut summary = SubmitSummary::default();
        let mut inner = self.lock();
        for (i, input) in inputs.into_iter().enumerate() {
            let reject = |error: String| Rejection { line: i + 1, error };
            let input = match input {
                Ok(x) => x,
                Err(e) => {
                    summary.rejected.push(reject(e));
                    continue;
                }
            };
            if let Err(e) = self.check_annotator(&input.annotator_id) {
                summary.rejected.push(reject(e.to_string()));
                continue;
            }
            let Some(&(_, hi)) = self.items.get(&input.triplet_id) else {
                summary
                    .rejected
                    .push(reject(format!("unknown triplet {}", input.triplet_id)));
                continue;
            };
            let j = Judgment {
                triplet_id: input.triplet_id,
                annotator_id: input.annotator_id,
                verdict: input.verdict,
                submitted_at: now,
            };
            let who = j.annotator_id.clone();
            match inner.log.append(j)? {
                Appended::Accepted => {
                    summary.accepted += 1;
                    inner.started.entry(hi).or_default().insert(who.clone());
                    if self.finished(&inner, hi, &who) {
                        let hit_id = self.hits[hi].hit_id.clone();
                        inner.leases.release(&hit_id, &who);
                    }
                }
                Appended::Duplicate => summary.duplicate += 1,
            }
        }
        Ok(summary)
    }

    fn outcome(&self, inner: &Inner, lang: Lang) -> Result<super::AggregateOutcome, ServiceError> {
        let sampled: BTreeMap<String, Lang> = self
            .items
            .iter()
            .filter(|(_, (l, _))| *l == lang)
            .map(|(id, (l, _))| (id.clone(), *l))
            .collect();
        let judgments: Vec<Judgment> = inner
            .log
            .judgments()
            .iter()
            .filter(|j| sampled.contains_key(&j.triplet_id))
            .cloned()
            .collect();
        Ok(aggregate(&sampled, &judgments, self.cfg.required, self.cfg.quorum)?)
    }

    pub fn progress(&self, lang: Lang) -> Result<Progress, ServiceError> {
        let now = self.clock.now();
        let inner = self.lock();
        let out = self.outcome(&inner, lang)?;
        let hits: Vec<&Hit> = self.hits.iter().filter(|h| h.lang == lang).collect();
        let judgments: Vec<&Judgment> = inner
            .log
            .judgments()
            .iter()
            .filter(|j| self.items.get(&j.triplet_id).is_some_and(|(l, _)| *l == lang))
            .collect();
        let annotators: BTreeSet<&str> = judgments.iter().map(|j| j.annotator_id.as_str()).collect();
        Ok(Progress {
            lang,
            hits: hits.len(),
            items: out.triplets.len(),
            judgments: judgments.len(),
            annotators: annotators.len(),
            complete_items: out.triplets.len() - out.count(Some(lang), Verdict::Pending),
            pending_items: out.count(Some(lang), Verdict::Pending),
            leased_hits: hits
                .iter()
                .filter(|h| inner.leases.live(&h.hit_id, now).next().is_some())
                .count(),
        })
    }

    pub fn report(&self, lang: Lang) -> Result<AgreementReport, ServiceError> {
        let inner = self.lock();
        Ok(agreement_report(lang, &self.outcome(&inner, lang)?))
    }

    /// Every relation used in HITs, with its description in `lang` (English
    /// fallback).
    pub fn relations(&self, lang: Lang) -> Vec<RelationInfo> {
        let mut names: BTreeMap<&str, &str> = BTreeMap::new();
        for it in self.hits.iter().flat_map(|h| h.items.iter()) {
            names.insert(&it.pid, &it.relation);
        }
        names
            .into_iter()
            .map(|(pid, name)| RelationInfo {
                pid: pid.to_string(),
                name: name.to_string(),
                description: self.descriptions.get(pid, lang).map(str::to_string),
            })
            .collect()
    }

    /// All judgments so far, in log order.
    pub fn judgments(&self) -> Vec<Judgment> {
        self.lock().log.judgments().to_vec()
    }
}

#[derive(Deserialize)]
struct NextQuery {
    lang: Lang,
    annotator: String,
}

#[derive(Deserialize)]
struct LangQuery {
    lang: Lang,
}

async fn next_hit(
    State(svc): State<Arc<AnnotationService>>,
    Query(q): Query<NextQuery>,
) -> Result<Response, ServiceError> {
    Ok(match svc.next_hit(q.lang, &q.annotator)? {
        Some(h) => Json(h).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn post_judgments(
    State(svc): State<Arc<AnnotationService>>,
    body: String,
) -> Result<Json<SubmitSummary>, ServiceError> {
    let inputs: Vec<Result<JudgmentInput, String>> = body
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect();
    if inputs.is_empty() {
        return Err(ServiceError::BadRequest("empty body".into()));
    }
    Ok(Json(svc.submit(inputs)?))
}

async fn progress(
    State(svc): State<Arc<AnnotationService>>,
    Query(q): Query<LangQuery>,
) -> Result<Json<Progress>, ServiceError> {
    Ok(Json(svc.progress(q.lang)?))
}

async fn report(
    State(svc): State<Arc<AnnotationService>>,
    Query(q): Query<LangQuery>,
) -> Result<Json<AgreementReport>, ServiceError> {
    Ok(Json(svc.report(q.lang)?))
}

async fn relations(State(svc): State<Arc<AnnotationService>>, Query(q): Query<LangQuery>) -> Json<Vec<RelationInfo>> {
    Json(svc.relations(q.lang))
}

pub fn router(svc: Arc<AnnotationService>) -> Router {
    Router::new()
        .route("/hits/next", get(next_hit))
        .route("/judgments", post(post_judgments))
        .route("/progress", get(progress))
        .route("/report", get(report))
        .route("/relations", get(relations))
        .route("/health", get(|| async { "ok" }))
        .with_state(svc)
}

pub async fn serve(listener: tokio::net::TcpListener, svc: Arc<AnnotationService>) -> std::io::Result<()> {
    axum::serve(listener, router(svc)).await
}
