//! Obtaining embeddings for manifest items: content addressing, the
//! persistent store, and the providers that fill it.

mod http;
mod provider;
mod store;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::manifest::{route_embedding_requests, ImageRef, Manifest, RoutedItem, RoutedPayload};
use crate::scores::{Modality, ScoreError};

pub use http::{EmbeddingItem, EmbeddingsRequest, EmbeddingsResponse, HttpProvider, RetryPolicy, ResponseEmbedding};
pub use provider::{
    embed_all, embed_with_provider, Backend, EmbedSummary, EmbeddingProvider, ProviderBatch,
    ProviderConfig,
};
pub use store::{EmbeddingStore, StoreRecord};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("{0} payload is empty")]
    EmptyPayload(Modality),
    #[error("{} embedding(s) missing from the store, first: {}", .content_ids.len(), .content_ids.first().map(String::as_str).unwrap_or("-"))]
    MissingEmbedding { content_ids: Vec<String> },
    #[error("provider failed{}: {body}", .status.map(|s| format!(" with status {s}")).unwrap_or_default())]
    Provider { status: Option<u16>, body: String },
    #[error("provider returned dimension {found}, expected {expected}")]
    DimInconsistency { expected: usize, found: usize },
    #[error("no embedding for {content_id} under model `{model_id}`")]
    NotFound { content_id: String, model_id: String },
    #[error("store has no embeddings for model `{requested}` (models present: {})", if .available.is_empty() { "none".to_owned() } else { .available.join(", ") })]
    ModelMismatch {
        requested: String,
        available: Vec<String>,
    },
    #[error("invalid provider configuration: {0}")]
    InvalidConfig(String),
    #[error("image file for {owner_id}/{index:04} not found under the images root")]
    MissingImageFile { owner_id: String, index: u32 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: invalid store record: {message}")]
    InvalidRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Score(#[from] ScoreError),
}

pub type Result<T, E = EmbeddingError> = std::result::Result<T, E>;

/// `sha256:` followed by the lowercase hex digest of the payload bytes. Text
/// is hashed as UTF-8.
pub fn content_id(kind: Modality, payload: &[u8]) -> Result<String> {
    if payload.is_empty() {
        return Err(EmbeddingError::EmptyPayload(kind));
    }
    Ok(format!("sha256:{}", hex::encode(Sha256::digest(payload))))
}

pub fn text_content_id(text: &str) -> Result<String> {
    content_id(Modality::Text, text.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Text(String),
    ImageFile(PathBuf),
    ImageBytes(Vec<u8>),
}

impl Payload {
    pub fn modality(&self) -> Modality {
        match self {
            Payload::Text(_) => Modality::Text,
            Payload::ImageFile(_) | Payload::ImageBytes(_) => Modality::Image,
        }
    }
}

/// One item to embed, keyed by the hash of its payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbedRequest {
    pub content_id: String,
    pub payload: Payload,
    /// Human-readable origin: the text itself or the image's relative path.
    pub source_id: String,
}

impl EmbedRequest {
    pub fn text(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        Ok(Self {
            content_id: text_content_id(&text)?,
            source_id: text.clone(),
            payload: Payload::Text(text),
        })
    }

    pub fn image_bytes(bytes: Vec<u8>, source_id: impl Into<String>) -> Result<Self> {
        Ok(Self {
            content_id: content_id(Modality::Image, &bytes)?,
            payload: Payload::ImageBytes(bytes),
            source_id: source_id.into(),
        })
    }

    pub fn image_file(path: &Path, source_id: impl Into<String>) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|source| EmbeddingError::Io {
            path: path.to_owned(),
            source,
        })?;
        Ok(Self {
            content_id: content_id(Modality::Image, &bytes)?,
            payload: Payload::ImageFile(path.to_owned()),
            source_id: source_id.into(),
        })
    }

    pub fn modality(&self) -> Modality {
        self.payload.modality()
    }

    /// Raw bytes sent to the provider.
    pub fn payload_bytes(&self) -> Result<std::borrow::Cow<'_, [u8]>> {
        Ok(match &self.payload {
            Payload::Text(t) => t.as_bytes().into(),
            Payload::ImageBytes(b) => b.as_slice().into(),
            Payload::ImageFile(path) => std::fs::read(path)
                .map_err(|source| EmbeddingError::Io {
                    path: path.clone(),
                    source,
                })?
                .into(),
        })
    }
}

impl fmt::Display for EmbedRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.content_id, self.source_id)
    }
}

/// Maps manifest images to the content ids of their bytes. Text items need no
/// entry: their id follows from the text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContentIndex {
    images: BTreeMap<(String, u32), String>,
}

impl ContentIndex {
    pub fn insert_image(&mut self, owner_id: impl Into<String>, index: u32, content_id: String) {
        self.images.insert((owner_id.into(), index), content_id);
    }

    pub fn image(&self, owner_id: &str, index: u32) -> Option<&str> {
        self.images
            .get(&(owner_id.to_owned(), index))
            .map(String::as_str)
    }

    pub fn content_id(&self, payload: &RoutedPayload) -> Result<String> {
        match payload {
            RoutedPayload::Text { text } => text_content_id(text),
            RoutedPayload::Image { owner_id, index } => self
                .image(owner_id, *index)
                .map(str::to_owned)
                .ok_or_else(|| EmbeddingError::MissingImageFile {
                    owner_id: owner_id.clone(),
                    index: *index,
                }),
        }
    }

    /// Hashes every image the manifest declares, reading files from
    /// `images_root` as listed.
    pub fn build(m: &Manifest, images_root: &Path, listing: &[ImageRef]) -> Result<Self> {
        Ok(resolve_requests(&route_embedding_requests(m), images_root, listing)?.1)
    }
}

/// Turns routed items into hashed requests, deduplicated by content id.
///
/// Image files are located through `listing`; when an index exists under
/// several extensions, the first path in sorted order wins.
pub fn resolve_requests(
    items: &[RoutedItem],
    images_root: &Path,
    listing: &[ImageRef],
) -> Result<(Vec<EmbedRequest>, ContentIndex)> {
    let mut files: HashMap<(&str, u32), &str> = HashMap::new();
    let mut sorted: Vec<&ImageRef> = listing.iter().collect();
    sorted.sort();
    for r in sorted {
        files.entry((r.owner_id.as_str(), r.index)).or_insert(&r.path);
    }

    let mut index = ContentIndex::default();
    let mut requests = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for item in items {
        let request = match &item.payload {
            RoutedPayload::Text { text } => EmbedRequest::text(text.clone())?,
            RoutedPayload::Image { owner_id, index: i } => {
                let rel = files.get(&(owner_id.as_str(), *i)).ok_or_else(|| {
                    EmbeddingError::MissingImageFile {
                        owner_id: owner_id.clone(),
                        index: *i,
                    }
                })?;
                let request = EmbedRequest::image_file(&images_root.join(rel), *rel)?;
                index.insert_image(owner_id.clone(), *i, request.content_id.clone());
                request
            }
        };
        if seen.insert(request.content_id.clone()) {
            requests.push(request);
        }
    }
    Ok((requests, index))
}
