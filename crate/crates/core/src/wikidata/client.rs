use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use chrono::Utc;
use serde::Deserialize;

use super::record::EntityRecord;
use crate::http::{HttpRequest, HttpResponse, HttpTransport, TransportError};
use crate::locale::Locale;
use crate::qid::{InvalidQid, Qid};
use crate::rate_limit::TokenBucket;
use crate::retry::{Backoff, RetryPolicy};

pub const DEFAULT_BASE_URL: &str = "https://www.wikidata.org/w/rest.php/wikibase/v1";
pub const DEFAULT_RATE_PER_SEC: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WikidataError {
    #[error(transparent)]
    InvalidId(#[from] InvalidQid),
    #[error("entity {0} not found")]
    EntityNotFound(Qid),
    #[error("transient failure fetching {qid} after {attempts} attempts: {cause}")]
    TransientFailure {
        qid: Qid,
        attempts: u32,
        cause: String,
    },
    #[error("rate limited fetching {qid} after {attempts} attempts")]
    RateLimited { qid: Qid, attempts: u32 },
    #[error("request for {qid} failed with HTTP {status}: {body}")]
    Http { qid: Qid, status: u16, body: String },
    #[error("malformed response for {qid}: {cause}")]
    MalformedResponse { qid: Qid, cause: String },
    #[error("offline: {0} is not cached and network access is disabled")]
    Offline(Qid),
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct FetchLogEntry {
    pub qid: Qid,
    pub attempts: u32,
    /// Requested target locales the item has no label for.
    pub missing_labels: Vec<Locale>,
}

/// Item body as returned with `_fields=labels,descriptions,aliases`.
#[derive(Debug, Deserialize)]
struct ItemFields {
    #[serde(default)]
    labels: HashMap<String, String>,
    #[serde(default)]
    descriptions: HashMap<String, String>,
    #[serde(default)]
    aliases: HashMap<String, Vec<String>>,
}

pub struct WikidataClient {
    base_url: String,
    transport: Arc<dyn HttpTransport>,
    backoff: Backoff,
    limiter: Option<TokenBucket>,
    offline: bool,
    log: Mutex<Vec<FetchLogEntry>>,
}

impl WikidataClient {
    pub fn new(base_url: impl Into<String>, transport: Arc<dyn HttpTransport>) -> Self {
        WikidataClient {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            transport,
            backoff: Backoff::new(RetryPolicy::default(), 0),
            limiter: Some(TokenBucket::new(DEFAULT_RATE_PER_SEC)),
            offline: false,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn with_retry(mut self, policy: RetryPolicy, seed: u64) -> Self {
        self.backoff = Backoff::new(policy, seed);
        self
    }

    /// `None` disables client-side throttling.
    pub fn with_rate_limit(mut self, requests_per_sec: Option<f64>) -> Self {
        self.limiter = requests_per_sec.map(TokenBucket::new);
        self
    }

    pub fn offline(mut self, offline: bool) -> Self {
        self.offline = offline;
        self
    }

    pub fn is_offline(&self) -> bool {
        self.offline
    }

    pub fn fetch_log(&self) -> Vec<FetchLogEntry> {
        self.log.lock().expect("fetch log lock").clone()
    }

    fn item_url(&self, qid: &Qid) -> String {
        format!(
            "{}/entities/items/{}?_fields=labels,descriptions,aliases",
            self.base_url, qid
        )
    }

    /// Validates a raw id before any network activity.
    pub fn fetch_by_id(
        &self,
        raw: &str,
        locales: &[Locale],
    ) -> Result<EntityRecord, WikidataError> {
        let qid = Qid::new(raw)?;
        self.fetch_entity(&qid, locales)
    }

    /// Fetches one item in a single request and keeps English plus `locales`.
    pub fn fetch_entity(
        &self,
        qid: &Qid,
        locales: &[Locale],
    ) -> Result<EntityRecord, WikidataError> {
        if self.offline {
            return Err(WikidataError::Offline(qid.clone()));
        }
        let request = HttpRequest::get(self.item_url(qid)).header("Accept", "application/json");
        let max_attempts = self.backoff.policy().max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            let (retry_hint, failure) = match self.transport.execute(&request) {
                Ok(resp) if resp.is_success() => {
                    let record = self.parse_item(qid, locales, &resp)?;
                    self.log_fetch(qid, attempt, locales, &record);
                    return Ok(record);
                }
                Ok(resp) if resp.status == 404 => {
                    return Err(WikidataError::EntityNotFound(qid.clone()));
                }
                Ok(resp) if resp.status == 429 => (
                    resp.retry_after(),
                    WikidataError::RateLimited {
                        qid: qid.clone(),
                        attempts: attempt,
                    },
                ),
                Ok(resp) if resp.status >= 500 => (
                    None,
                    WikidataError::TransientFailure {
                        qid: qid.clone(),
                        attempts: attempt,
                        cause: format!("HTTP {}", resp.status),
                    },
                ),
                Ok(resp) => {
                    return Err(WikidataError::Http {
                        qid: qid.clone(),
                        status: resp.status,
                        body: resp.body,
                    });
                }
                Err(TransportError::Offline) => return Err(WikidataError::Offline(qid.clone())),
                Err(e) => (
                    None,
                    WikidataError::TransientFailure {
                        qid: qid.clone(),
                        attempts: attempt,
                        cause: e.to_string(),
                    },
                ),
            };
            if attempt >= max_attempts {
                return Err(failure);
            }
            let waited = self.backoff.sleep(attempt, retry_hint);
            log::debug!("retrying {qid} after {waited:?} ({failure})");
        }
    }

    fn parse_item(
        &self,
        qid: &Qid,
        locales: &[Locale],
        resp: &HttpResponse,
    ) -> Result<EntityRecord, WikidataError> {
        let fields: ItemFields =
            serde_json::from_str(&resp.body).map_err(|e| WikidataError::MalformedResponse {
                qid: qid.clone(),
                cause: e.to_string(),
            })?;
        let wanted: BTreeSet<Locale> = locales
            .iter()
            .copied()
            .chain(std::iter::once(Locale::En))
            .collect();

        let mut record = EntityRecord::new(qid.clone(), Utc::now());
        for locale in wanted {
            let code = locale.code();
            if let Some(label) = fields.labels.get(code).filter(|s| !s.is_empty()) {
                record.labels.insert(locale, label.clone());
            }
            if let Some(desc) = fields.descriptions.get(code).filter(|s| !s.is_empty()) {
                record.descriptions.insert(locale, desc.clone());
            }
            if let Some(aliases) = fields.aliases.get(code) {
                let aliases: Vec<String> =
                    aliases.iter().filter(|a| !a.is_empty()).cloned().collect();
                if !aliases.is_empty() {
                    record.aliases.insert(locale, aliases);
                }
            }
        }
        Ok(record)
    }

    fn log_fetch(&self, qid: &Qid, attempts: u32, locales: &[Locale], record: &EntityRecord) {
        let missing_labels: Vec<Locale> = locales
            .iter()
            .copied()
            .filter(|l| l.is_target() && !record.labels.contains_key(l))
            .collect();
        if !missing_labels.is_empty() {
            log::warn!("{qid}: missing_label for {missing_labels:?}");
        }
        self.log
            .lock()
            .expect("fetch log lock")
            .push(FetchLogEntry {
                qid: qid.clone(),
                attempts,
                missing_labels,
            });
    }
}

impl std::fmt::Debug for WikidataClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WikidataClient")
            .field("base_url", &self.base_url)
            .field("offline", &self.offline)
            .finish_non_exhaustive()
    }
}
