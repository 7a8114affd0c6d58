//! Layered PSD designs to absolute-positioned JSX + SCSS.
//!
//! The pipeline runs parse → filter/normalize → classify → asset alignment →
//! prompt construction → generation → validation → rendering → evaluation.
//! Every stage is a plain function over immutable values, so samples can be
//! processed concurrently.

pub mod assets;
pub mod design;
pub mod geometry;
pub mod layers;
pub mod psd;
pub mod prompt;
pub mod codecheck;
pub mod llm;
pub mod raster;
pub mod metrics;
pub mod pipeline;
pub mod fixtures;
