//! Generated datasets with known structure, for property checks, fixtures
//! and dry runs of the pipeline without real embeddings.
//!
//! Images are virtual: each has a short deterministic byte string whose hash
//! is its content id, so a dataset can also be written out as a real file
//! tree that the CLI will hash back to the same ids.

use std::path::Path;

use rand::Rng;

use crate::embedding::{content_id, text_content_id, ContentIndex, EmbeddingStore, StoreRecord};
use crate::manifest::{AttributeSpec, Category, ImagePrompt, Manifest, TargetConcept};
use crate::scores::{Modality, Side};

pub const SYNTHETIC_MODEL: &str = "synthetic";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticShape {
    pub dim: usize,
    /// Words per text attribute side.
    pub text_words: usize,
    /// Image prompts per attribute side.
    pub image_prompts: usize,
    pub images_per_prompt: u32,
    pub targets: usize,
    pub images_per_target: u32,
}

impl SyntheticShape {
    /// Sizes drawn uniformly: dim 2..=64, attribute sides of 1..=10 vectors,
    /// 1..=20 targets.
    pub fn random(rng: &mut impl Rng) -> Self {
        let image_prompts = rng.gen_range(1..=3);
        Self {
            dim: rng.gen_range(2..=64),
            text_words: rng.gen_range(1..=10),
            image_prompts,
            images_per_prompt: rng.gen_range(1..=(10 / image_prompts) as u32),
            targets: rng.gen_range(1..=20),
            images_per_target: rng.gen_range(1..=5),
        }
    }
}

/// Where target vectors are placed relative to the attribute sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Independent uniform vectors in `[-1, 1]^dim`.
    Random,
    /// Side A vectors live in the first half of the coordinates, side B in
    /// the second half, all with positive entries. Targets sit in the given
    /// side's half, so they are orthogonal to the other side.
    Planted(Side),
}

#[derive(Debug)]
pub struct SyntheticDataset {
    pub manifest: Manifest,
    pub index: ContentIndex,
    pub store: EmbeddingStore,
    pub model_id: String,
}

fn image_bytes(owner_id: &str, index: u32) -> Vec<u8> {
    format!("synthetic image {owner_id}/{index:04}").into_bytes()
}

struct Sampler<'a, R> {
    rng: &'a mut R,
    dim: usize,
    placement: Placement,
}

impl<R: Rng> Sampler<'_, R> {
    fn uniform(&mut self) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..self.dim).map(|_| self.rng.gen_range(-1.0..=1.0)).collect();
            if v.iter().any(|x| x.abs() > 1e-3) {
                return v;
            }
        }
    }

    fn in_half(&mut self, side: Side) -> Vec<f64> {
        let half = self.dim / 2;
        let range = match side {
            Side::SideA => 0..half,
            Side::SideB => half..self.dim,
        };
        (0..self.dim)
            .map(|i| {
                if range.contains(&i) {
                    self.rng.gen_range(0.1..=1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn attribute(&mut self, side: Side) -> Vec<f64> {
        match self.placement {
            Placement::Random => self.uniform(),
            Placement::Planted(_) => self.in_half(side),
        }
    }

    fn target(&mut self) -> Vec<f64> {
        match self.placement {
            Placement::Random => self.uniform(),
            Placement::Planted(side) => self.in_half(side),
        }
    }
}

impl SyntheticDataset {
    /// Builds a dataset of the given shape. Planted placements need `dim >= 2`.
    pub fn generate(shape: SyntheticShape, placement: Placement, rng: &mut impl Rng) -> Self {
        assert!(shape.dim >= 2, "synthetic datasets need at least two dimensions");
        let attributes = AttributeSpec {
            text_a: (0..shape.text_words).map(|i| format!("word a{i}")).collect(),
            text_b: (0..shape.text_words).map(|i| format!("word b{i}")).collect(),
            image_prompts_a: (0..shape.image_prompts)
                .map(|i| ImagePrompt::new(format!("image of a{i}"), shape.images_per_prompt))
                .collect(),
            image_prompts_b: (0..shape.image_prompts)
                .map(|i| ImagePrompt::new(format!("image of b{i}"), shape.images_per_prompt))
                .collect(),
        };
        let targets = (0..shape.targets)
            .map(|i| TargetConcept {
                id: format!("target {i:02}"),
                category: Category::ALL[i % Category::ALL.len()],
                prompt: format!("an image of target {i:02}"),
                expected: if (i / Category::ALL.len()).is_multiple_of(2) {
                    Side::SideA
                } else {
                    Side::SideB
                },
                image_count: shape.images_per_target,
            })
            .collect();
        let manifest = Manifest {
            version: crate::manifest::MANIFEST_VERSION,
            model_hint: Some(SYNTHETIC_MODEL.to_owned()),
            attributes,
            targets,
            images_root: "images".to_owned(),
        };

        let mut sampler = Sampler {
            rng,
            dim: shape.dim,
            placement,
        };
        let mut store = EmbeddingStore::in_memory();
        let mut index = ContentIndex::default();
        let put = |store: &mut EmbeddingStore, id: String, kind, vector, source: String| {
            store
                .insert(StoreRecord {
                    content_id: id,
                    kind,
                    model_id: SYNTHETIC_MODEL.to_owned(),
                    dim: shape.dim,
                    vector,
                    source_id: source,
                })
                .expect("synthetic record is valid");
        };

        for side in [Side::SideA, Side::SideB] {
            for w in manifest.attributes.text(side) {
                let v = sampler.attribute(side);
                put(&mut store, text_content_id(w).expect("nonempty"), Modality::Text, v, w.clone());
            }
            for p in manifest.attributes.image_prompts(side) {
                for i in 0..p.image_count {
                    let id = content_id(Modality::Image, &image_bytes(&p.prompt, i)).expect("nonempty");
                    index.insert_image(p.prompt.clone(), i, id.clone());
                    let v = sampler.attribute(side);
                    put(&mut store, id, Modality::Image, v, format!("{}/{i:04}.png", p.prompt));
                }
            }
        }
        for t in &manifest.targets {
            let v = sampler.target();
            put(
                &mut store,
                text_content_id(&t.prompt).expect("nonempty"),
                Modality::Text,
                v,
                t.prompt.clone(),
            );
            for i in 0..t.image_count {
                let id = content_id(Modality::Image, &image_bytes(&t.id, i)).expect("nonempty");
                index.insert_image(t.id.clone(), i, id.clone());
                let v = sampler.target();
                put(&mut store, id, Modality::Image, v, format!("{}/{i:04}.png", t.id));
            }
        }

        Self {
            manifest,
            index,
            store,
            model_id: SYNTHETIC_MODEL.to_owned(),
        }
    }

    /// A copy with every stored vector multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Self {
        let mut store = EmbeddingStore::in_memory();
        for r in self.store.records() {
            let mut r = r.clone();
            r.vector.iter_mut().for_each(|x| *x *= factor);
            store.insert(r).expect("scaled record is valid");
        }
        Self {
            manifest: self.manifest.clone(),
            index: self.index.clone(),
            store,
            model_id: self.model_id.clone(),
        }
    }

    /// Writes `manifest.json`, the image tree under `images/` and
    /// `store.jsonl` into `dir`.
    pub fn write_fixture(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::write(dir.join("manifest.json"), self.manifest.to_json_pretty())?;
        let root = dir.join(&self.manifest.images_root);
        for (owner, count) in self.manifest.image_owners() {
            std::fs::create_dir_all(root.join(owner))?;
            for i in 0..count {
                std::fs::write(root.join(owner).join(format!("{i:04}.png")), image_bytes(owner, i))?;
            }
        }
        self.store
            .write_to(&dir.join("store.jsonl"))
            .map_err(std::io::Error::other)
    }
}
