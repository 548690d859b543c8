use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::http::HttpProvider;
use super::{EmbedRequest, EmbeddingError, EmbeddingStore, Result, StoreRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Embeddings must already be in the store; nothing is fetched.
    FileStore,
    Http,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderConfig {
    pub backend: Backend,
    pub endpoint: Option<String>,
    pub model_id: String,
    pub batch_size: usize,
    pub max_retries: u32,
    pub concurrency_limit: usize,
    pub bearer_token: Option<String>,
}

impl ProviderConfig {
    pub fn file_store(model_id: impl Into<String>) -> Self {
        Self {
            backend: Backend::FileStore,
            endpoint: None,
            model_id: model_id.into(),
            batch_size: 32,
            max_retries: 3,
            concurrency_limit: 4,
            bearer_token: None,
        }
    }

    pub fn http(endpoint: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            backend: Backend::Http,
            endpoint: Some(endpoint.into()),
            ..Self::file_store(model_id)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: &str| Err(EmbeddingError::InvalidConfig(m.to_owned()));
        match (self.backend, &self.endpoint) {
            (Backend::Http, None) => return invalid("http backend requires an endpoint"),
            (Backend::FileStore, Some(_)) => return invalid("file_store backend takes no endpoint"),
            _ => {}
        }
        if self.model_id.trim().is_empty() {
            return invalid("model_id must not be empty");
        }
        if self.batch_size == 0 {
            return invalid("batch_size must be positive");
        }
        if self.concurrency_limit == 0 {
            return invalid("concurrency_limit must be positive");
        }
        Ok(())
    }
}

/// Vectors for one batch, aligned with the request order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderBatch {
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

pub trait EmbeddingProvider: Sync {
    fn embed_batch(&self, model_id: &str, batch: &[EmbedRequest]) -> Result<ProviderBatch>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmbedSummary {
    pub requested: usize,
    pub fetched: usize,
    pub cached: usize,
}

/// Ensures the store holds a record for every request under `cfg.model_id`.
pub fn embed_all(
    requests: &[EmbedRequest],
    cfg: &ProviderConfig,
    store: &mut EmbeddingStore,
) -> Result<EmbedSummary> {
    cfg.validate()?;
    match cfg.backend {
        Backend::FileStore => {
            let missing: Vec<String> = unique(requests)
                .filter(|r| !store.contains(&r.content_id, &cfg.model_id))
                .map(|r| r.content_id.clone())
                .collect();
            if !missing.is_empty() {
                return Err(EmbeddingError::MissingEmbedding {
                    content_ids: missing,
                });
            }
            let n = unique(requests).count();
            Ok(EmbedSummary {
                requested: n,
                fetched: 0,
                cached: n,
            })
        }
        Backend::Http => {
            let provider = HttpProvider::from_config(cfg)?;
            embed_with_provider(requests, cfg, store, &provider)
        }
    }
}

fn unique(requests: &[EmbedRequest]) -> impl Iterator<Item = &EmbedRequest> {
    let mut seen = HashSet::new();
    requests
        .iter()
        .filter(move |r| seen.insert(r.content_id.as_str()))
}

/// Fetches every request missing from the store through `provider`.
///
/// Batches run on up to `concurrency_limit` threads. Results are written by
/// this thread in request order once all batches finish, so the store's
/// contents do not depend on scheduling. Successful batches are kept even when
/// another batch fails; the error reported is the one from the earliest
/// failing batch.
pub fn embed_with_provider(
    requests: &[EmbedRequest],
    cfg: &ProviderConfig,
    store: &mut EmbeddingStore,
    provider: &dyn EmbeddingProvider,
) -> Result<EmbedSummary> {
    cfg.validate()?;
    let todo: Vec<&EmbedRequest> = unique(requests)
        .filter(|r| !store.contains(&r.content_id, &cfg.model_id))
        .collect();
    let requested = unique(requests).count();
    let cached = requested - todo.len();
    if todo.is_empty() {
        return Ok(EmbedSummary {
            requested,
            fetched: 0,
            cached,
        });
    }

    let batches: Vec<Vec<EmbedRequest>> = todo
        .chunks(cfg.batch_size)
        .map(|c| c.iter().map(|r| (*r).clone()).collect())
        .collect();
    let results: Mutex<Vec<Option<Result<ProviderBatch>>>> =
        Mutex::new((0..batches.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = cfg.concurrency_limit.min(batches.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(batch) = batches.get(i) else { break };
                let outcome = provider
                    .embed_batch(&cfg.model_id, batch)
                    .and_then(|b| check_batch(batch, b));
                results.lock().expect("results lock")[i] = Some(outcome);
            });
        }
    });

    let mut expected_dim = store.dim_for(&cfg.model_id);
    let mut first_error = None;
    let mut fetched = 0;
    let results = results.into_inner().expect("results lock");
    for (batch, outcome) in batches.iter().zip(results) {
        let outcome = outcome.expect("every batch ran");
        let response = match outcome {
            Ok(r) => r,
            Err(e) => {
                first_error.get_or_insert(e);
                continue;
            }
        };
        let dim = *expected_dim.get_or_insert(response.dim);
        if response.dim != dim {
            first_error.get_or_insert(EmbeddingError::DimInconsistency {
                expected: dim,
                found: response.dim,
            });
            continue;
        }
        for (request, vector) in batch.iter().zip(response.vectors) {
            store.insert(StoreRecord {
                content_id: request.content_id.clone(),
                kind: request.modality(),
                model_id: cfg.model_id.clone(),
                dim,
                vector,
                source_id: request.source_id.clone(),
            })?;
            fetched += 1;
        }
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(EmbedSummary {
            requested,
            fetched,
            cached,
        }),
    }
}

fn check_batch(batch: &[EmbedRequest], response: ProviderBatch) -> Result<ProviderBatch> {
    let malformed = |body: String| EmbeddingError::Provider { status: None, body };
    if response.vectors.len() != batch.len() {
        return Err(malformed(format!(
            "expected {} vectors, got {}",
            batch.len(),
            response.vectors.len()
        )));
    }
    if response.dim == 0 {
        return Err(malformed("dimension must be positive".into()));
    }
    for (request, v) in batch.iter().zip(&response.vectors) {
        if v.len() != response.dim {
            return Err(EmbeddingError::DimInconsistency {
                expected: response.dim,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(malformed(format!("non-finite value for {request}")));
        }
    }
    Ok(response)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::Modality;

    /// Deterministic fake: vector depends only on the content id.
    struct Fake {
        calls: AtomicUsize,
        items: AtomicUsize,
        dims: Vec<usize>,
    }

    impl Fake {
        fn new(dims: Vec<usize>) -> Self {
            Self {
                calls: AtomicUsize::new(0),
                items: AtomicUsize::new(0),
                dims,
            }
        }
    }

    impl EmbeddingProvider for Fake {
        fn embed_batch(&self, _model: &str, batch: &[EmbedRequest]) -> Result<ProviderBatch> {
            let call = self.calls.fetch_add(1, Ordering::SeqCst);
            self.items.fetch_add(batch.len(), Ordering::SeqCst);
            let dim = self.dims[call.min(self.dims.len() - 1)];
            let vectors = batch
                .iter()
                .map(|r| {
                    let seed = r.content_id.bytes().map(f64::from).sum::<f64>();
                    (0..dim).map(|i| (seed + i as f64).sin()).collect()
                })
                .collect();
            Ok(ProviderBatch { dim, vectors })
        }
    }

    fn texts(words: &[&str]) -> Vec<EmbedRequest> {
        words.iter().map(|w| EmbedRequest::text(*w).unwrap()).collect()
    }

    #[test]
    fn empty_request_list_leaves_store_unchanged() {
        let mut store = EmbeddingStore::in_memory();
        let fake = Fake::new(vec![4]);
        let s = embed_with_provider(&[], &ProviderConfig::file_store("m"), &mut store, &fake).unwrap();
        assert_eq!(s, EmbedSummary::default());
        assert!(store.is_empty());
        assert_eq!(fake.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn cached_items_are_not_fetched() {
        let requests = texts(&["he", "she", "nurse"]);
        let mut store = EmbeddingStore::in_memory();
        let cfg = ProviderConfig::file_store("m");
        embed_with_provider(&requests[..2], &cfg, &mut store, &Fake::new(vec![4])).unwrap();

        let fake = Fake::new(vec![4]);
        let s = embed_with_provider(&requests, &cfg, &mut store, &fake).unwrap();
        assert_eq!(fake.calls.load(Ordering::SeqCst), 1);
        assert_eq!(fake.items.load(Ordering::SeqCst), 1);
        assert_eq!((s.fetched, s.cached), (1, 2));

        let again = Fake::new(vec![4]);
        let s = embed_with_provider(&requests, &cfg, &mut store, &again).unwrap();
        assert_eq!(again.calls.load(Ordering::SeqCst), 0);
        assert_eq!((s.fetched, s.cached), (0, 3));
    }

    #[test]
    fn mixed_dims_are_rejected() {
        let requests = texts(&["a", "b"]);
        let mut cfg = ProviderConfig::file_store("m");
        cfg.batch_size = 1;
        cfg.concurrency_limit = 1;
        let mut store = EmbeddingStore::in_memory();
        let err = embed_with_provider(&requests, &cfg, &mut store, &Fake::new(vec![512, 768]))
            .unwrap_err();
        assert!(matches!(
            err,
            EmbeddingError::DimInconsistency {
                expected: 512,
                found: 768
            }
        ));
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn dim_must_match_existing_records() {
        let mut store = EmbeddingStore::in_memory();
        let cfg = ProviderConfig::file_store("m");
        embed_with_provider(&texts(&["a"]), &cfg, &mut store, &Fake::new(vec![3])).unwrap();
        let err = embed_with_provider(&texts(&["b"]), &cfg, &mut store, &Fake::new(vec![5]))
            .unwrap_err();
        assert!(matches!(err, EmbeddingError::DimInconsistency { expected: 3, found: 5 }));
    }

    #[test]
    fn result_is_independent_of_concurrency() {
        let words: Vec<String> = (0..57).map(|i| format!("word {i}")).collect();
        let requests: Vec<EmbedRequest> =
            words.iter().map(|w| EmbedRequest::text(w.clone()).unwrap()).collect();
        let mut outputs = Vec::new();
        for (concurrency, batch) in [(1, 1), (4, 5), (16, 3)] {
            let mut cfg = ProviderConfig::file_store("m");
            cfg.concurrency_limit = concurrency;
            cfg.batch_size = batch;
            let mut store = EmbeddingStore::in_memory();
            embed_with_provider(&requests, &cfg, &mut store, &Fake::new(vec![8])).unwrap();
            let lines: Vec<String> = store.records().map(|r| r.to_json_line()).collect();
            outputs.push(lines);
        }
        assert_eq!(outputs[0], outputs[1]);
        assert_eq!(outputs[0], outputs[2]);
        assert_eq!(outputs[0].len(), 57);
    }

    #[test]
    fn duplicates_are_fetched_once() {
        let requests = texts(&["a", "a", "b"]);
        let fake = Fake::new(vec![2]);
        let mut store = EmbeddingStore::in_memory();
        let s = embed_with_provider(&requests, &ProviderConfig::file_store("m"), &mut store, &fake)
            .unwrap();
        assert_eq!(s.requested, 2);
        assert_eq!(fake.items.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn file_store_backend_requires_every_record() {
        let requests = texts(&["a", "b"]);
        let cfg = ProviderConfig::file_store("m");
        let mut store = EmbeddingStore::in_memory();
        match embed_all(&requests, &cfg, &mut store).unwrap_err() {
            EmbeddingError::MissingEmbedding { content_ids } => assert_eq!(content_ids.len(), 2),
            other => panic!("unexpected {other}"),
        }
        for r in &requests {
            store
                .insert(StoreRecord {
                    content_id: r.content_id.clone(),
                    kind: Modality::Text,
                    model_id: "m".into(),
                    dim: 1,
                    vector: vec![1.0],
                    source_id: r.source_id.clone(),
                })
                .unwrap();
        }
        let s = embed_all(&requests, &cfg, &mut store).unwrap();
        assert_eq!((s.fetched, s.cached), (0, 2));
    }

    #[test]
    fn config_validation() {
        let mut cfg = ProviderConfig::file_store("m");
        cfg.backend = Backend::Http;
        assert!(cfg.validate().is_err());
        assert!(ProviderConfig::http("http://x", "m").validate().is_ok());
        let mut cfg = ProviderConfig::http("http://x", "m");
        cfg.backend = Backend::FileStore;
        assert!(cfg.validate().is_err());
        let mut cfg = ProviderConfig::file_store("m");
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ProviderConfig::file_store("m");
        cfg.concurrency_limit = 0;
        assert!(cfg.validate().is_err());
        assert!(ProviderConfig::file_store(" ").validate().is_err());
    }
}
