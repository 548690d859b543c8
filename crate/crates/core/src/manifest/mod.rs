//! Audit dataset description: attribute sets, target concepts and the image
//! layout they map onto.

mod catalogue;
mod layout;
mod routing;
mod schema;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scores::Side;

pub use catalogue::{builtin_catalogue, builtin_catalogue_for, builtin_by_name, PromptVariant};
pub use layout::{
    scan_images, validate_manifest, ImageRef, Problem, ProblemKind, Severity, ValidationReport,
    IMAGE_EXTENSIONS,
};
pub use routing::{route_embedding_requests, Consumer, RoutedItem, RoutedPayload};
pub use schema::{load_manifest, FieldError};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest is not valid JSON at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("manifest violates the schema:\n{}", format_field_errors(.0))]
    SchemaViolation(Vec<FieldError>),
    #[error("unknown built-in catalogue `{0}`")]
    UnknownBuiltin(String),
}

fn format_field_errors(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| format!("  {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Objects,
    Occupations,
    Scenes,
    Sports,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Objects,
        Category::Occupations,
        Category::Scenes,
        Category::Sports,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Objects => "objects",
            Category::Occupations => "occupations",
            Category::Scenes => "scenes",
            Category::Sports => "sports",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImagePrompt {
    pub prompt: String,
    pub image_count: u32,
}

impl ImagePrompt {
    pub fn new(prompt: impl Into<String>, image_count: u32) -> Self {
        Self {
            prompt: prompt.into(),
            image_count,
        }
    }
}

/// Attribute poles in both modalities. Side A is the first set, so positive
/// scores mean "closer to side A".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub text_a: Vec<String>,
    pub text_b: Vec<String>,
    pub image_prompts_a: Vec<ImagePrompt>,
    pub image_prompts_b: Vec<ImagePrompt>,
}

impl AttributeSpec {
    pub fn text(&self, side: Side) -> &[String] {
        match side {
            Side::SideA => &self.text_a,
            Side::SideB => &self.text_b,
        }
    }

    pub fn image_prompts(&self, side: Side) -> &[ImagePrompt] {
        match side {
            Side::SideA => &self.image_prompts_a,
            Side::SideB => &self.image_prompts_b,
        }
    }

    /// Exchanges side A and side B in both modalities.
    pub fn swapped(&self) -> Self {
        Self {
            text_a: self.text_b.clone(),
            text_b: self.text_a.clone(),
            image_prompts_a: self.image_prompts_b.clone(),
            image_prompts_b: self.image_prompts_a.clone(),
        }
    }

    pub fn total_images(&self) -> u64 {
        self.image_prompts_a
            .iter()
            .chain(&self.image_prompts_b)
            .map(|p| u64::from(p.image_count))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetConcept {
    pub id: String,
    pub category: Category,
    pub prompt: String,
    pub expected: Side,
    pub image_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_hint: Option<String>,
    pub attributes: AttributeSpec,
    pub targets: Vec<TargetConcept>,
    pub images_root: String,
}

impl Manifest {
    pub fn target(&self, id: &str) -> Option<&TargetConcept> {
        self.targets.iter().find(|t| t.id == id)
    }

    pub fn total_target_images(&self) -> u64 {
        self.targets.iter().map(|t| u64::from(t.image_count)).sum()
    }

    pub fn total_images(&self) -> u64 {
        self.attributes.total_images() + self.total_target_images()
    }

    /// Every image owner with its declared count: attribute prompts first,
    /// then targets, in manifest order.
    pub fn image_owners(&self) -> impl Iterator<Item = (&str, u32)> {
        self.attributes
            .image_prompts_a
            .iter()
            .chain(&self.attributes.image_prompts_b)
            .map(|p| (p.prompt.as_str(), p.image_count))
            .chain(self.targets.iter().map(|t| (t.id.as_str(), t.image_count)))
    }

    /// The manifest with attribute sides exchanged. Expected tags stay put, so
    /// per-category partitions keep their members.
    pub fn with_swapped_attributes(&self) -> Self {
        Self {
            attributes: self.attributes.swapped(),
            ..self.clone()
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// `sha256:` digest of the compact JSON serialization.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serializes");
        format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
    }
}
