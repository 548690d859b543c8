//! Which texts and images must be embedded to score every component.

use std::collections::HashMap;

use serde::Serialize;

use super::Manifest;
use crate::scores::{Modality, Side};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RoutedPayload {
    Text { text: String },
    /// Image `index` of `owner_id`; the file is resolved against the images root later.
    Image { owner_id: String, index: u32 },
}

/// Who reads an embedded item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum Consumer {
    AttributeText { side: Side },
    AttributeImage { side: Side },
    TargetPrompt { target_id: String },
    TargetImage { target_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoutedItem {
    pub payload: RoutedPayload,
    pub consumers: Vec<Consumer>,
}

impl RoutedItem {
    pub fn modality(&self) -> Modality {
        match self.payload {
            RoutedPayload::Text { .. } => Modality::Text,
            RoutedPayload::Image { .. } => Modality::Image,
        }
    }
}

#[derive(Default)]
struct Router {
    items: Vec<RoutedItem>,
    by_payload: HashMap<RoutedPayload, usize>,
}

impl Router {
    fn add(&mut self, payload: RoutedPayload, consumer: Consumer) {
        match self.by_payload.get(&payload) {
            Some(&i) => self.items[i].consumers.push(consumer),
            None => {
                self.by_payload.insert(payload.clone(), self.items.len());
                self.items.push(RoutedItem {
                    payload,
                    consumers: vec![consumer],
                });
            }
        }
    }
}

/// Every distinct item the four components consume, in the order: attribute
/// words, attribute images, then each target's prompt followed by its images.
///
/// Identical texts collapse into one item with several consumers.
pub fn route_embedding_requests(m: &Manifest) -> Vec<RoutedItem> {
    let mut router = Router::default();
    for side in [Side::SideA, Side::SideB] {
        for word in m.attributes.text(side) {
            router.add(
                RoutedPayload::Text { text: word.clone() },
                Consumer::AttributeText { side },
            );
        }
    }
    for side in [Side::SideA, Side::SideB] {
        for p in m.attributes.image_prompts(side) {
            for index in 0..p.image_count {
                router.add(
                    RoutedPayload::Image {
                        owner_id: p.prompt.clone(),
                        index,
                    },
                    Consumer::AttributeImage { side },
                );
            }
        }
    }
    for t in &m.targets {
        router.add(
            RoutedPayload::Text {
                text: t.prompt.clone(),
            },
            Consumer::TargetPrompt {
                target_id: t.id.clone(),
            },
        );
        for index in 0..t.image_count {
            router.add(
                RoutedPayload::Image {
                    owner_id: t.id.clone(),
                    index,
                },
                Consumer::TargetImage {
                    target_id: t.id.clone(),
                },
            );
        }
    }
    router.items
}
