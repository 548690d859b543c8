//! Client for the `POST /v1/embeddings` wire protocol.

use std::collections::HashMap;
use std::time::Duration;

use base64::Engine;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::provider::{EmbeddingProvider, ProviderBatch, ProviderConfig};
use super::{EmbedRequest, EmbeddingError, Payload, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingItem {
    Text { id: String, text: String },
    Image { id: String, image_b64: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingsRequest {
    pub model: String,
    pub items: Vec<EmbeddingItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseEmbedding {
    pub id: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingsResponse {
    pub model: String,
    pub dim: usize,
    pub embeddings: Vec<ResponseEmbedding>,
}

/// Exponential backoff with multiplicative jitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base: Duration,
    pub factor: f64,
    /// Relative jitter; 0.2 draws each delay from ±20% of the nominal value.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base: Duration::from_millis(500),
            factor: 2.0,
            jitter: 0.2,
        }
    }
}

impl RetryPolicy {
    /// Nominal delay before retry number `attempt` (0-based), without jitter.
    pub fn nominal_delay(&self, attempt: u32) -> Duration {
        self.base.mul_f64(self.factor.powi(attempt as i32))
    }

    pub fn delay(&self, attempt: u32, rng: &mut impl Rng) -> Duration {
        let scale = if self.jitter > 0.0 {
            rng.gen_range(1.0 - self.jitter..=1.0 + self.jitter)
        } else {
            1.0
        };
        self.nominal_delay(attempt).mul_f64(scale)
    }

    /// 429 and 5xx are transient; every other status is final.
    pub fn is_retryable(status: u16) -> bool {
        status == 429 || (500..600).contains(&status)
    }
}

pub struct HttpProvider {
    client: reqwest::blocking::Client,
    url: String,
    token: Option<String>,
    retry: RetryPolicy,
}

impl HttpProvider {
    pub fn new(endpoint: &str, token: Option<String>, retry: RetryPolicy) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| EmbeddingError::InvalidConfig(e.to_string()))?;
        Ok(Self {
            client,
            url: format!("{}/v1/embeddings", endpoint.trim_end_matches('/')),
            token,
            retry,
        })
    }

    pub fn from_config(cfg: &ProviderConfig) -> Result<Self> {
        let endpoint = cfg
            .endpoint
            .as_deref()
            .ok_or_else(|| EmbeddingError::InvalidConfig("http backend requires an endpoint".into()))?;
        Self::new(
            endpoint,
            cfg.bearer_token.clone(),
            RetryPolicy {
                max_retries: cfg.max_retries,
                ..RetryPolicy::default()
            },
        )
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn body(model_id: &str, batch: &[EmbedRequest]) -> Result<EmbeddingsRequest> {
        let items = batch
            .iter()
            .map(|r| {
                let id = r.content_id.clone();
                Ok(match &r.payload {
                    Payload::Text(text) => EmbeddingItem::Text {
                        id,
                        text: text.clone(),
                    },
                    Payload::ImageBytes(_) | Payload::ImageFile(_) => EmbeddingItem::Image {
                        id,
                        image_b64: base64::engine::general_purpose::STANDARD
                            .encode(r.payload_bytes()?),
                    },
                })
            })
            .collect::<Result<_>>()?;
        Ok(EmbeddingsRequest {
            model: model_id.to_owned(),
            items,
        })
    }

    /// One POST with retries. Transport failures count as retryable.
    fn post(&self, body: &EmbeddingsRequest) -> Result<EmbeddingsResponse> {
        let mut rng = rand::thread_rng();
        let mut attempt = 0;
        loop {
            let mut req = self.client.post(&self.url).json(body);
            if let Some(token) = &self.token {
                req = req.bearer_auth(token);
            }
            let failure = match req.send() {
                Ok(resp) if resp.status().is_success() => {
                    return resp.json().map_err(|e| EmbeddingError::Provider {
                        status: Some(200),
                        body: format!("malformed response: {e}"),
                    });
                }
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.text().unwrap_or_default();
                    let error = EmbeddingError::Provider {
                        status: Some(status),
                        body: text,
                    };
                    if !RetryPolicy::is_retryable(status) {
                        return Err(error);
                    }
                    error
                }
                Err(e) => EmbeddingError::Provider {
                    status: None,
                    body: e.to_string(),
                },
            };
            if attempt >= self.retry.max_retries {
                return Err(failure);
            }
            let delay = self.retry.delay(attempt, &mut rng);
            log::warn!("{failure}; retrying in {delay:?}");
            std::thread::sleep(delay);
            attempt += 1;
        }
    }
}

impl EmbeddingProvider for HttpProvider {
    fn embed_batch(&self, model_id: &str, batch: &[EmbedRequest]) -> Result<ProviderBatch> {
        let response = self.post(&Self::body(model_id, batch)?)?;
        let malformed = |body: String| EmbeddingError::Provider {
            status: Some(200),
            body,
        };
        if response.model != model_id {
            return Err(malformed(format!(
                "service answered for model `{}`, requested `{model_id}`",
                response.model
            )));
        }
        let mut by_id: HashMap<String, Vec<f64>> = response
            .embeddings
            .into_iter()
            .map(|e| (e.id, e.vector))
            .collect();
        let vectors = batch
            .iter()
            .map(|r| {
                by_id
                    .remove(&r.content_id)
                    .ok_or_else(|| malformed(format!("response lacks item {}", r.content_id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProviderBatch {
            dim: response.dim,
            vectors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn wire_format_matches_protocol() {
        let req = EmbeddingsRequest {
            model: "clip".into(),
            items: vec![
                EmbeddingItem::Text {
                    id: "sha256:1".into(),
                    text: "he".into(),
                },
                EmbeddingItem::Image {
                    id: "sha256:2".into(),
                    image_b64: "AAE=".into(),
                },
            ],
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"model":"clip","items":[{"kind":"text","id":"sha256:1","text":"he"},{"kind":"image","id":"sha256:2","image_b64":"AAE="}]}"#
        );
        let resp: EmbeddingsResponse = serde_json::from_str(
            r#"{"model":"clip","dim":2,"embeddings":[{"id":"sha256:1","vector":[0.5,-0.25]}]}"#,
        )
        .unwrap();
        assert_eq!(resp.embeddings[0].vector, vec![0.5, -0.25]);
    }

    #[test]
    fn image_payloads_are_base64() {
        let r = EmbedRequest::image_bytes(vec![0, 1, 255], "x/0000.png").unwrap();
        let body = HttpProvider::body("m", &[r]).unwrap();
        match &body.items[0] {
            EmbeddingItem::Image { image_b64, .. } => assert_eq!(image_b64, "AAH/"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn backoff_schedule() {
        let p = RetryPolicy::default();
        assert_eq!(p.nominal_delay(0), Duration::from_millis(500));
        assert_eq!(p.nominal_delay(1), Duration::from_millis(1000));
        assert_eq!(p.nominal_delay(3), Duration::from_millis(4000));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for attempt in 0..4 {
            let nominal = p.nominal_delay(attempt).as_secs_f64();
            for _ in 0..50 {
                let d = p.delay(attempt, &mut rng).as_secs_f64();
                assert!(d >= nominal * 0.8 - 1e-9 && d <= nominal * 1.2 + 1e-9);
            }
        }
    }

    #[test]
    fn retryable_statuses() {
        for s in [429, 500, 502, 503] {
            assert!(RetryPolicy::is_retryable(s));
        }
        for s in [400, 401, 404, 413] {
            assert!(!RetryPolicy::is_retryable(s));
        }
    }
}
