//! HTTP scorer gateway with retries, a request-digest cache and bounded
//! parallelism.
//!
//! Each kind has one POST endpoint under its base URL:
//! `/score/entailment`, `/score/qg` and `/score/rc`. Request and response
//! bodies are single-line JSON records with the same fields as the score
//! files. Question generation answers with zero or more records, one per line.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{
    EntailRequest, EntailmentScore, EntailmentScores, QaPair, QaPairs, QgRequest, RcAnswer,
    RcAnswers, RcRequest, ScoreError, ScoreKind, ScoreSource,
};
use crate::corpus::PairKey;
use crate::util::bounded_map;

pub const ENTAIL_URL_VAR: &str = "FAITHEVAL_ENTAIL_URL";
pub const QG_URL_VAR: &str = "FAITHEVAL_QG_URL";
pub const RC_URL_VAR: &str = "FAITHEVAL_RC_URL";
pub const TOKEN_VAR: &str = "FAITHEVAL_TOKEN";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// Worth retrying: connection failures, timeouts, 5xx and 429.
    Retryable(String),
    Fatal(String),
}

/// Sends one POST and returns the response body.
pub trait Transport: Send + Sync {
    fn post(&self, url: &str, body: &str) -> Result<String, TransportError>;
}

/// Blocking HTTP transport.
pub struct HttpTransport {
    agent: ureq::Agent,
    token: Option<String>,
}

impl HttpTransport {
    pub fn new(timeout: Duration, token: Option<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        HttpTransport {
            agent: ureq::Agent::new_with_config(config),
            token,
        }
    }
}

impl Transport for HttpTransport {
    fn post(&self, url: &str, body: &str) -> Result<String, TransportError> {
        let mut req = self
            .agent
            .post(url)
            .header("Content-Type", "application/json");
        if let Some(token) = &self.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req
            .send(body)
            .map_err(|e| TransportError::Retryable(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Retryable(e.to_string()))?;
        match status {
            200..=299 => Ok(text),
            429 | 500..=599 => Err(TransportError::Retryable(format!("HTTP {status}: {text}"))),
            _ => Err(TransportError::Fatal(format!("HTTP {status}: {text}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatewayConfig {
    pub entail_url: Option<String>,
    pub qg_url: Option<String>,
    pub rc_url: Option<String>,
    pub token: Option<String>,
    pub timeout: Duration,
    /// Extra attempts after the first failure.
    pub retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff: Duration,
    pub parallelism: usize,
    pub cache: bool,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            entail_url: None,
            qg_url: None,
            rc_url: None,
            token: None,
            timeout: Duration::from_secs(60),
            retries: 3,
            backoff: Duration::from_millis(200),
            parallelism: 8,
            cache: true,
        }
    }
}

impl GatewayConfig {
    /// Base URLs and bearer token from the environment; other fields default.
    pub fn from_env() -> Self {
        let var = |name| std::env::var(name).ok().filter(|v: &String| !v.is_empty());
        GatewayConfig {
            entail_url: var(ENTAIL_URL_VAR),
            qg_url: var(QG_URL_VAR),
            rc_url: var(RC_URL_VAR),
            token: var(TOKEN_VAR),
            ..Default::default()
        }
    }

    fn endpoint(&self, kind: ScoreKind) -> Result<String, ScoreError> {
        let (base, path) = match kind {
            ScoreKind::Entailment => (&self.entail_url, "/score/entailment"),
            ScoreKind::QaPairs => (&self.qg_url, "/score/qg"),
            ScoreKind::RcAnswers => (&self.rc_url, "/score/rc"),
            ScoreKind::Similarity => (&None, ""),
        };
        let base = base.as_deref().ok_or(ScoreError::NotConfigured(kind))?;
        Ok(format!("{}{path}", base.trim_end_matches('/')))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: usize,
}

pub struct Gateway<T: Transport = HttpTransport> {
    config: GatewayConfig,
    transport: T,
    cache: Mutex<HashMap<String, String>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl Gateway<HttpTransport> {
    pub fn http(config: GatewayConfig) -> Self {
        let transport = HttpTransport::new(config.timeout, config.token.clone());
        Gateway::new(config, transport)
    }
}

fn invalid(kind: ScoreKind, message: impl Into<String>) -> ScoreError {
    ScoreError::InvalidResponse {
        kind,
        message: message.into(),
    }
}

fn check_key(kind: ScoreKind, want: (&str, &str), got: (&str, &str)) -> Result<(), ScoreError> {
    if want != got {
        return Err(invalid(
            kind,
            format!("response for {}/{} answers {}/{}", want.0, want.1, got.0, got.1),
        ));
    }
    Ok(())
}

impl<T: Transport> Gateway<T> {
    pub fn new(config: GatewayConfig, transport: T) -> Self {
        Gateway {
            config,
            transport,
            cache: Mutex::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn cache_stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.cache.lock().expect("cache lock").len(),
        }
    }

    /// Drops cached responses; hit and miss counters keep counting.
    pub fn clear_cache(&self) {
        self.cache.lock().expect("cache lock").clear();
    }

    fn send_with_retries(&self, kind: ScoreKind, url: &str, body: &str) -> Result<String, ScoreError> {
        let attempts = self.config.retries + 1;
        let mut delay = self.config.backoff;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.transport.post(url, body) {
                Ok(text) => return Ok(text),
                Err(TransportError::Fatal(m)) => return Err(invalid(kind, m)),
                Err(TransportError::Retryable(m)) => last = m,
            }
            if attempt < attempts {
                std::thread::sleep(delay);
                delay = delay.saturating_mul(2);
            }
        }
        Err(ScoreError::EndpointUnavailable {
            kind,
            attempts,
            message: last,
        })
    }

    /// Sends `request`, validating the response with `parse` before it is
    /// cached or returned.
    fn call<R: Serialize, V>(
        &self,
        kind: ScoreKind,
        request: &R,
        parse: impl Fn(&str) -> Result<V, ScoreError>,
    ) -> Result<V, ScoreError> {
        let url = self.config.endpoint(kind)?;
        let body = serde_json::to_string(request).expect("request serializes");
        let digest = hex::encode(Sha256::digest(format!("{url}\n{body}").as_bytes()));
        if self.config.cache {
            let cached = self.cache.lock().expect("cache lock").get(&digest).cloned();
            if let Some(text) = cached {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return parse(&text);
            }
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let text = self.send_with_retries(kind, &url, &body)?;
        let value = parse(&text)?;
        if self.config.cache {
            self.cache.lock().expect("cache lock").insert(digest, text);
        }
        Ok(value)
    }

    pub fn request_entailment(&self, req: &EntailRequest) -> Result<EntailmentScore, ScoreError> {
        let kind = ScoreKind::Entailment;
        self.call(kind, req, |text| {
            let score: EntailmentScore =
                serde_json::from_str(text.trim()).map_err(|e| invalid(kind, e.to_string()))?;
            check_key(kind, (&req.doc_id, &req.system_id), (&score.doc_id, &score.system_id))?;
            score.validated().map_err(|e| invalid(kind, e.to_string()))
        })
    }

    pub fn request_questions(&self, req: &QgRequest) -> Result<Vec<QaPair>, ScoreError> {
        let kind = ScoreKind::QaPairs;
        self.call(kind, req, |text| {
            let mut pairs = Vec::new();
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let qa: QaPair =
                    serde_json::from_str(line).map_err(|e| invalid(kind, e.to_string()))?;
                check_key(kind, (&req.doc_id, &req.system_id), (&qa.doc_id, &qa.system_id))?;
                if qa.question.trim().is_empty() || qa.answer.trim().is_empty() {
                    return Err(invalid(kind, format!("empty question or answer at index {}", qa.q_index)));
                }
                pairs.push(qa);
            }
            pairs.sort_by_key(|q| q.q_index);
            if pairs.windows(2).any(|w| w[0].q_index == w[1].q_index) {
                return Err(invalid(kind, "duplicate q_index"));
            }
            Ok(pairs)
        })
    }

    pub fn request_answer(&self, req: &RcRequest) -> Result<RcAnswer, ScoreError> {
        let kind = ScoreKind::RcAnswers;
        self.call(kind, req, |text| {
            let mut a: RcAnswer =
                serde_json::from_str(text.trim()).map_err(|e| invalid(kind, e.to_string()))?;
            check_key(kind, (&req.doc_id, &req.system_id), (&a.doc_id, &a.system_id))?;
            if a.q_index != req.q_index {
                return Err(invalid(kind, format!("answer for q_index {} to question {}", a.q_index, req.q_index)));
            }
            a.rc_answer = a.rc_answer.trim().to_string();
            Ok(a)
        })
    }

    /// Issues all requests with at most `parallelism` in flight; the first
    /// error in input order wins.
    pub fn request_many<Q: Sync, V: Send>(
        &self,
        requests: &[Q],
        f: impl Fn(&Self, &Q) -> Result<V, ScoreError> + Sync,
    ) -> Result<Vec<V>, ScoreError>
    where
        T: Sync,
    {
        bounded_map(requests, self.config.parallelism, |r| f(self, r))
            .into_iter()
            .collect()
    }
}

impl<T: Transport> ScoreSource for Gateway<T> {
    fn entailment(&self, requests: &[EntailRequest]) -> Result<EntailmentScores, ScoreError> {
        let scores = self.request_many(requests, Self::request_entailment)?;
        Ok(scores.into_iter().map(|s| (s.key(), s)).collect())
    }

    fn questions(&self, requests: &[QgRequest]) -> Result<QaPairs, ScoreError> {
        let qs = self.request_many(requests, Self::request_questions)?;
        Ok(requests
            .iter()
            .zip(qs)
            .map(|(r, q)| (PairKey::new(&r.doc_id, &r.system_id), q))
            .collect())
    }

    fn answers(&self, requests: &[RcRequest]) -> Result<RcAnswers, ScoreError> {
        let answers = self.request_many(requests, Self::request_answer)?;
        Ok(answers
            .into_iter()
            .map(|a| ((PairKey::new(&a.doc_id, &a.system_id), a.q_index), a))
            .collect())
    }
}
