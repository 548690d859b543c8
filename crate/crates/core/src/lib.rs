//! Multimodal Composite Association Score (MCAS).
//!
//! MCAS sums four WEAT-style association scores that compare target concepts
//! against two attribute poles across text and image embeddings from one
//! joint embedding space:
//!
//! * `II`: generated images against image attributes
//! * `ITP`: text prompts against image attributes
//! * `ITA`: generated images against text attributes
//! * `TT`: text prompts against text attributes
//!
//! The crate is organised as [`scores`] (pure numerics), [`manifest`]
//! (dataset description and the built-in catalogue), [`embedding`] (content
//! addressed store and providers), [`audit`] (scoring a manifest and rendering
//! reports) and [`synthetic`] (generated datasets with known structure).

pub mod audit;
pub mod embedding;
pub mod manifest;
pub mod scores;
pub mod synthetic;
