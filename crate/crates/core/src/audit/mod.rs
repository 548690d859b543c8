//! Scoring a whole manifest and aggregating per-category statistics.

mod render;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{ContentIndex, EmbeddingError, EmbeddingStore};
use crate::manifest::{route_embedding_requests, Category, Manifest, RoutedPayload};
use crate::scores::{
    compute_component, mean_and_stddev, AttributeEmbeddings, ComponentKind, Components,
    EmbeddingVector, Modality, ScoreError, Side, TargetEmbeddings, TargetScore,
};

pub use render::{emit_chart_data, render, render_category_table, ReportFormat};

#[derive(Debug, Error)]
pub enum AuditError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("manifest has no targets")]
    NoTargets,
    #[error("target `{0}` declares no images; image components cannot be scored")]
    TargetWithoutImages(String),
    #[error("target `{target_id}`: {source}")]
    Target {
        target_id: String,
        #[source]
        source: ScoreError,
    },
}

pub type Result<T, E = AuditError> = std::result::Result<T, E>;

/// Per-target scores plus the manifest tags used to partition them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetResult {
    #[serde(flatten)]
    pub score: TargetScore,
    pub category: Category,
    pub expected: Side,
}

/// Mean, sample standard deviation and count of one partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub avg_bias: f64,
    pub stddev: f64,
    pub n: usize,
}

impl Stat {
    /// `None` for an empty list.
    pub fn of(xs: &[f64]) -> Option<Self> {
        let (avg_bias, stddev) = mean_and_stddev(xs).ok()?;
        Some(Self {
            avg_bias,
            stddev,
            n: xs.len(),
        })
    }
}

/// MCAS statistics split by expected association. Side A carries the male
/// attributes in the built-in catalogue, hence the field names.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub male_expected: Option<Stat>,
    pub female_expected: Option<Stat>,
    pub all_terms: Option<Stat>,
}

impl CategoryStats {
    pub fn from_targets<'a>(targets: impl IntoIterator<Item = &'a TargetResult>) -> Self {
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut all = Vec::new();
        for t in targets {
            match t.expected {
                Side::SideA => a.push(t.score.mcas),
                Side::SideB => b.push(t.score.mcas),
            }
            all.push(t.score.mcas);
        }
        Self {
            male_expected: Stat::of(&a),
            female_expected: Stat::of(&b),
            all_terms: Stat::of(&all),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    pub model_id: String,
    pub manifest_digest: String,
    pub per_target: Vec<TargetResult>,
    pub per_category: BTreeMap<Category, CategoryStats>,
    /// Pooled over every target, not a mean of category means.
    pub overall: CategoryStats,
    /// Diagnostics: per-component statistics over all terms, keyed by
    /// category name and `all`.
    pub component_stats: BTreeMap<String, BTreeMap<ComponentKind, Stat>>,
}

impl AuditResult {
    /// Aggregates already-scored targets, in the given order.
    pub fn from_targets(
        model_id: impl Into<String>,
        manifest_digest: impl Into<String>,
        per_target: Vec<TargetResult>,
    ) -> Self {
        let mut per_category = BTreeMap::new();
        let mut component_stats = BTreeMap::new();
        let categories: std::collections::BTreeSet<Category> =
            per_target.iter().map(|t| t.category).collect();
        for c in categories {
            let members: Vec<&TargetResult> =
                per_target.iter().filter(|t| t.category == c).collect();
            per_category.insert(c, CategoryStats::from_targets(members.iter().copied()));
            component_stats.insert(c.as_str().to_owned(), component_stats_of(&members));
        }
        let all: Vec<&TargetResult> = per_target.iter().collect();
        component_stats.insert("all".to_owned(), component_stats_of(&all));
        Self {
            model_id: model_id.into(),
            manifest_digest: manifest_digest.into(),
            overall: CategoryStats::from_targets(&per_target),
            per_target,
            per_category,
            component_stats,
        }
    }

    pub fn to_json(&self) -> String {
        String::from_utf8(render(self, ReportFormat::Json)).expect("json is utf-8")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

fn component_stats_of(targets: &[&TargetResult]) -> BTreeMap<ComponentKind, Stat> {
    ComponentKind::ALL
        .into_iter()
        .filter_map(|k| {
            let xs: Vec<f64> = targets.iter().map(|t| t.score.components.get(k)).collect();
            Stat::of(&xs).map(|s| (k, s))
        })
        .collect()
}

struct Lookup<'a> {
    index: &'a ContentIndex,
    store: &'a EmbeddingStore,
    model_id: &'a str,
}

impl Lookup<'_> {
    fn vector(&self, payload: &RoutedPayload) -> Result<EmbeddingVector> {
        let id = self.index.content_id(payload)?;
        Ok(self.store.lookup(&id, self.model_id)?)
    }

    fn text(&self, text: &str) -> Result<EmbeddingVector> {
        self.vector(&RoutedPayload::Text {
            text: text.to_owned(),
        })
    }

    fn image(&self, owner_id: &str, index: u32) -> Result<EmbeddingVector> {
        self.vector(&RoutedPayload::Image {
            owner_id: owner_id.to_owned(),
            index,
        })
    }

    fn images(&self, owner_id: &str, count: u32) -> Result<Vec<EmbeddingVector>> {
        (0..count).map(|i| self.image(owner_id, i)).collect()
    }
}

/// Every content id the manifest needs that the store lacks under `model_id`,
/// in routing order.
pub fn missing_embeddings(
    m: &Manifest,
    index: &ContentIndex,
    store: &EmbeddingStore,
    model_id: &str,
) -> Result<Vec<String>> {
    let mut missing = Vec::new();
    for item in route_embedding_requests(m) {
        let id = index.content_id(&item.payload)?;
        if !store.contains(&id, model_id) && !missing.contains(&id) {
            missing.push(id);
        }
    }
    Ok(missing)
}

/// Scores every target of `m` and aggregates the results.
///
/// Per target: `II` and `ITA` average over the target's images, `ITP` and
/// `TT` use its prompt alone. Side A of the manifest is the first attribute
/// set, so positive scores lean towards side A.
pub fn run_audit(
    m: &Manifest,
    index: &ContentIndex,
    store: &EmbeddingStore,
    model_id: &str,
) -> Result<AuditResult> {
    if m.targets.is_empty() {
        return Err(AuditError::NoTargets);
    }
    if !store.has_model(model_id) {
        return Err(EmbeddingError::ModelMismatch {
            requested: model_id.to_owned(),
            available: store.models().into_iter().map(str::to_owned).collect(),
        }
        .into());
    }
    if let Some(t) = m.targets.iter().find(|t| t.image_count == 0) {
        return Err(AuditError::TargetWithoutImages(t.id.clone()));
    }
    let missing = missing_embeddings(m, index, store, model_id)?;
    if !missing.is_empty() {
        return Err(EmbeddingError::MissingEmbedding {
            content_ids: missing,
        }
        .into());
    }

    let lookup = Lookup {
        index,
        store,
        model_id,
    };
    let attrs = &m.attributes;
    let text_side = |side: Side| -> Result<Vec<EmbeddingVector>> {
        attrs.text(side).iter().map(|w| lookup.text(w)).collect()
    };
    let image_side = |side: Side| -> Result<Vec<EmbeddingVector>> {
        let mut out = Vec::new();
        for p in attrs.image_prompts(side) {
            out.extend(lookup.images(&p.prompt, p.image_count)?);
        }
        Ok(out)
    };
    let text_attrs = AttributeEmbeddings::new(
        text_side(Side::SideA)?,
        text_side(Side::SideB)?,
        Modality::Text,
    )?;
    let image_attrs = AttributeEmbeddings::new(
        image_side(Side::SideA)?,
        image_side(Side::SideB)?,
        Modality::Image,
    )?;

    let mut per_target = Vec::with_capacity(m.targets.len());
    for t in &m.targets {
        let in_target = |source: ScoreError| AuditError::Target {
            target_id: t.id.clone(),
            source,
        };
        let prompt = TargetEmbeddings::new(vec![lookup.text(&t.prompt)?], Modality::Text)
            .map_err(in_target)?;
        let images = TargetEmbeddings::new(lookup.images(&t.id, t.image_count)?, Modality::Image)
            .map_err(in_target)?;
        let component = |kind: ComponentKind| {
            let (targets, attrs) = match kind {
                ComponentKind::ImageImage => (&images, &image_attrs),
                ComponentKind::ImageTextPrompt => (&prompt, &image_attrs),
                ComponentKind::ImageTextAttributes => (&images, &text_attrs),
                ComponentKind::TextText => (&prompt, &text_attrs),
            };
            compute_component(kind, targets, attrs).map_err(in_target)
        };
        let components = Components {
            image_image: component(ComponentKind::ImageImage)?,
            image_text_prompt: component(ComponentKind::ImageTextPrompt)?,
            image_text_attributes: component(ComponentKind::ImageTextAttributes)?,
            text_text: component(ComponentKind::TextText)?,
        };
        per_target.push(TargetResult {
            score: TargetScore::new(t.id.clone(), components),
            category: t.category,
            expected: t.expected,
        });
    }
    Ok(AuditResult::from_targets(model_id, m.digest(), per_target))
}
