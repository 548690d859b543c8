//! Cosine similarity, WEAT-style association scores and the four MCAS
//! components.
//!
//! Every score here is a pure function over validated embedding sets. All
//! means are accumulated in `f64` in list order so that a given input always
//! produces the same bits.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which encoder produced an embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Text,
    Image,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modality::Text => f.write_str("text"),
            Modality::Image => f.write_str("image"),
        }
    }
}

/// The attribute pole an association leans towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    SideA,
    SideB,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::SideA => "side_a",
            Side::SideB => "side_b",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding `{source_id}` has zero norm")]
    ZeroNormVector { source_id: String },
    #[error("embedding `{source_id}` contains a non-finite value at index {index}")]
    NonFiniteValue { source_id: String, index: usize },
    #[error("embedding `{source_id}` is empty")]
    EmptyVector { source_id: String },
    #[error("attribute {0} is empty")]
    EmptyAttributeSide(Side),
    #[error("target set is empty")]
    EmptyTargetSet,
    #[error("embedding `{source_id}` has modality {found}, set declares {declared}")]
    ModalityMismatch {
        source_id: String,
        declared: Modality,
        found: Modality,
    },
    #[error("{kind} expects {expected_targets} targets and {expected_attrs} attributes, got {targets} and {attrs}")]
    ModalityRoutingViolation {
        kind: ComponentKind,
        expected_targets: Modality,
        expected_attrs: Modality,
        targets: Modality,
        attrs: Modality,
    },
    #[error("component {0} is missing")]
    MissingComponent(ComponentKind),
    #[error("component {0} appears more than once")]
    DuplicateComponent(ComponentKind),
    #[error("statistics requested over an empty list")]
    EmptyInput,
}

pub type Result<T, E = ScoreError> = std::result::Result<T, E>;

/// One point in the joint text/image embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    norm: f64,
    modality: Modality,
    source_id: String,
}

impl EmbeddingVector {
    /// Validates that the vector is nonempty, finite and has a nonzero norm.
    pub fn new(
        values: Vec<f64>,
        modality: Modality,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        let source_id = source_id.into();
        if values.is_empty() {
            return Err(ScoreError::EmptyVector { source_id });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ScoreError::NonFiniteValue { source_id, index });
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        // Squares of tiny components can underflow even when the vector is nonzero.
        if norm == 0.0 || !norm.is_finite() {
            return Err(ScoreError::ZeroNormVector { source_id });
        }
        Ok(Self {
            values,
            norm,
            modality,
            source_id,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }
}

fn check_members(members: &[EmbeddingVector], modality: Modality, dim: usize) -> Result<()> {
    for v in members {
        if v.modality != modality {
            return Err(ScoreError::ModalityMismatch {
                source_id: v.source_id.clone(),
                declared: modality,
                found: v.modality,
            });
        }
        if v.dim() != dim {
            return Err(ScoreError::DimensionMismatch {
                expected: dim,
                found: v.dim(),
            });
        }
    }
    Ok(())
}

/// The two attribute sets A and B in one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeEmbeddings {
    side_a: Vec<EmbeddingVector>,
    side_b: Vec<EmbeddingVector>,
    modality: Modality,
}

impl AttributeEmbeddings {
    pub fn new(
        side_a: Vec<EmbeddingVector>,
        side_b: Vec<EmbeddingVector>,
        modality: Modality,
    ) -> Result<Self> {
        let first = side_a
            .first()
            .ok_or(ScoreError::EmptyAttributeSide(Side::SideA))?;
        if side_b.is_empty() {
            return Err(ScoreError::EmptyAttributeSide(Side::SideB));
        }
        let dim = first.dim();
        check_members(&side_a, modality, dim)?;
        check_members(&side_b, modality, dim)?;
        Ok(Self {
            side_a,
            side_b,
            modality,
        })
    }

    pub fn side_a(&self) -> &[EmbeddingVector] {
        &self.side_a
    }

    pub fn side_b(&self) -> &[EmbeddingVector] {
        &self.side_b
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn dim(&self) -> usize {
        self.side_a[0].dim()
    }

    /// The same sets with A and B exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            side_a: self.side_b.clone(),
            side_b: self.side_a.clone(),
            modality: self.modality,
        }
    }
}

/// A set W of target embeddings in one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetEmbeddings {
    members: Vec<EmbeddingVector>,
    modality: Modality,
}

impl TargetEmbeddings {
    pub fn new(members: Vec<EmbeddingVector>, modality: Modality) -> Result<Self> {
        let first = members.first().ok_or(ScoreError::EmptyTargetSet)?;
        check_members(&members, modality, first.dim())?;
        Ok(Self { members, modality })
    }

    pub fn members(&self) -> &[EmbeddingVector] {
        &self.members
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(ScoreError::DimensionMismatch {
            expected: u.dim(),
            found: v.dim(),
        });
    }
    let dot: f64 = u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
    Ok((dot / (u.norm * v.norm)).clamp(-1.0, 1.0))
}

fn mean_cosine(w: &EmbeddingVector, set: &[EmbeddingVector]) -> Result<f64> {
    let mut sum = 0.0;
    for a in set {
        sum += cosine(w, a)?;
    }
    Ok(sum / set.len() as f64)
}

/// `s(w, A, B)`: mean cosine to A minus mean cosine to B.
///
/// Positive values mean `w` sits closer to side A. Targets and attributes may
/// come from different encoders as long as both live in one joint space.
pub fn assoc_score(w: &EmbeddingVector, attrs: &AttributeEmbeddings) -> Result<f64> {
    if w.dim() != attrs.dim() {
        return Err(ScoreError::DimensionMismatch {
            expected: attrs.dim(),
            found: w.dim(),
        });
    }
    Ok(mean_cosine(w, &attrs.side_a)? - mean_cosine(w, &attrs.side_b)?)
}

/// Mean of [`assoc_score`] over every target, in list order.
pub fn set_assoc_score(targets: &TargetEmbeddings, attrs: &AttributeEmbeddings) -> Result<f64> {
    let mut sum = 0.0;
    for w in &targets.members {
        sum += assoc_score(w, attrs)?;
    }
    Ok(sum / targets.members.len() as f64)
}

/// The four modality pairings that make up MCAS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComponentKind {
    /// Generated images against image attributes.
    #[serde(rename = "II")]
    ImageImage,
    /// Text prompts against image attributes.
    #[serde(rename = "ITP")]
    ImageTextPrompt,
    /// Generated images against text attributes.
    #[serde(rename = "ITA")]
    ImageTextAttributes,
    /// Text prompts against text attributes.
    #[serde(rename = "TT")]
    TextText,
}

impl ComponentKind {
    /// Summation order for MCAS.
    pub const ALL: [ComponentKind; 4] = [
        ComponentKind::ImageImage,
        ComponentKind::ImageTextPrompt,
        ComponentKind::ImageTextAttributes,
        ComponentKind::TextText,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            ComponentKind::ImageImage => "II",
            ComponentKind::ImageTextPrompt => "ITP",
            ComponentKind::ImageTextAttributes => "ITA",
            ComponentKind::TextText => "TT",
        }
    }

    pub fn target_modality(self) -> Modality {
        match self {
            ComponentKind::ImageImage | ComponentKind::ImageTextAttributes => Modality::Image,
            ComponentKind::ImageTextPrompt | ComponentKind::TextText => Modality::Text,
        }
    }

    pub fn attribute_modality(self) -> Modality {
        match self {
            ComponentKind::ImageImage | ComponentKind::ImageTextPrompt => Modality::Image,
            ComponentKind::ImageTextAttributes | ComponentKind::TextText => Modality::Text,
        }
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// [`set_assoc_score`] after checking the sets match the component's modalities.
pub fn compute_component(
    kind: ComponentKind,
    targets: &TargetEmbeddings,
    attrs: &AttributeEmbeddings,
) -> Result<f64> {
    if targets.modality != kind.target_modality() || attrs.modality != kind.attribute_modality() {
        return Err(ScoreError::ModalityRoutingViolation {
            kind,
            expected_targets: kind.target_modality(),
            expected_attrs: kind.attribute_modality(),
            targets: targets.modality,
            attrs: attrs.modality,
        });
    }
    set_assoc_score(targets, attrs)
}

/// One value per component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    #[serde(rename = "II")]
    pub image_image: f64,
    #[serde(rename = "ITP")]
    pub image_text_prompt: f64,
    #[serde(rename = "ITA")]
    pub image_text_attributes: f64,
    #[serde(rename = "TT")]
    pub text_text: f64,
}

impl Components {
    pub fn get(&self, kind: ComponentKind) -> f64 {
        match kind {
            ComponentKind::ImageImage => self.image_image,
            ComponentKind::ImageTextPrompt => self.image_text_prompt,
            ComponentKind::ImageTextAttributes => self.image_text_attributes,
            ComponentKind::TextText => self.text_text,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ComponentKind, f64)> + '_ {
        ComponentKind::ALL.into_iter().map(|k| (k, self.get(k)))
    }

    /// Collects exactly one value per kind.
    pub fn from_pairs(pairs: &[(ComponentKind, f64)]) -> Result<Self> {
        let mut slots = [None; 4];
        for &(kind, value) in pairs {
            let slot = &mut slots[kind as usize];
            if slot.is_some() {
                return Err(ScoreError::DuplicateComponent(kind));
            }
            *slot = Some(value);
        }
        let mut values = [0.0; 4];
        for (i, kind) in ComponentKind::ALL.into_iter().enumerate() {
            values[i] = slots[i].ok_or(ScoreError::MissingComponent(kind))?;
        }
        Ok(Self {
            image_image: values[0],
            image_text_prompt: values[1],
            image_text_attributes: values[2],
            text_text: values[3],
        })
    }

    /// Sum in the fixed order II, ITP, ITA, TT.
    pub fn mcas(&self) -> f64 {
        self.image_image + self.image_text_prompt + self.image_text_attributes + self.text_text
    }
}

/// MCAS from a list of `(kind, value)` pairs; each kind must appear once.
pub fn compute_mcas(components: &[(ComponentKind, f64)]) -> Result<f64> {
    Components::from_pairs(components).map(|c| c.mcas())
}

/// Component scores and MCAS for one target concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScore {
    pub target_id: String,
    pub components: Components,
    pub mcas: f64,
}

impl TargetScore {
    pub fn new(target_id: impl Into<String>, components: Components) -> Self {
        Self {
            target_id: target_id.into(),
            mcas: components.mcas(),
            components,
        }
    }
}

/// Arithmetic mean and sample standard deviation (`n - 1` divisor).
///
/// A single value has standard deviation zero.
pub fn mean_and_stddev(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(ScoreError::EmptyInput);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}
