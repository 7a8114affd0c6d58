//! Raw layer tree → design document.
//!
//! Stages run in order: [`filter_layers`], [`normalize_coordinates`], then
//! [`build_document`], which classifies groups (fold or keep), text layers
//! (image or text) and pixel layers (image), bounds the tree depth and
//! assigns ids. [`consistency_check`] audits the result.

mod build;
mod classify;
mod filter;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use build::{build_document, consistency_check, BuildError, Finding, Severity};
pub use classify::{classify_group, classify_text, compute_group_stats, group_frame, GroupDecision, GroupStats, TextDecision};
pub use filter::{filter_layers, normalize_coordinates, Filtered, Removal, RemovalReason};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub min_opacity: f64,
    pub min_area: i64,
    pub min_side: i64,
    /// Case-insensitive regexes for editor-default layer names.
    pub default_name_patterns: Vec<String>,
    pub fold_coverage: f64,
    pub fold_coverage_strict: f64,
    pub max_pixel_candidates: usize,
    pub background_keywords: Vec<String>,
    pub structural_keywords: Vec<String>,
    pub container_keywords: Vec<String>,
    pub max_depth: usize,
    /// Text that may be looked up in the preset library when at most 10 chars long.
    pub special_text_pattern: String,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let strings = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        Self {
            min_opacity: 0.05,
            min_area: 16,
            min_side: 2,
            default_name_patterns: strings(&[r"^Layer \d+$", r"^Group \d+$", r"^图层 \d+$", r"^组 \d+$", r"copy$"]),
            fold_coverage: 0.85,
            fold_coverage_strict: 0.95,
            max_pixel_candidates: 2,
            background_keywords: strings(&["bg", "background", "背景", "底"]),
            structural_keywords: strings(&["mask", "overlay", "蒙版", "遮罩"]),
            container_keywords: strings(&["group", "container", "list", "模块", "栏"]),
            max_depth: 6,
            special_text_pattern: r"^[\p{Nd}\p{P}\s]+$".to_string(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0 < self.fold_coverage && self.fold_coverage <= self.fold_coverage_strict && self.fold_coverage_strict <= 1.0) {
            return Err("need 0 < fold_coverage <= fold_coverage_strict <= 1".into());
        }
        if self.max_depth == 0 {
            return Err("max_depth must be at least 1".into());
        }
        for p in self.default_name_patterns.iter().chain(std::iter::once(&self.special_text_pattern)) {
            regex::Regex::new(p).map_err(|e| format!("bad pattern {p:?}: {e}"))?;
        }
        Ok(())
    }
}

/// User-supplied text → asset filename mapping for short or specially
/// formatted text layers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PresetLibrary(pub BTreeMap<String, String>);

impl PresetLibrary {
    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn get(&self, text: &str) -> Option<&str> {
        self.0.get(text).map(String::as_str)
    }

    pub fn insert(&mut self, text: impl Into<String>, asset: impl Into<String>) {
        self.0.insert(text.into(), asset.into());
    }
}

pub(crate) fn contains_keyword(name: &str, keywords: &[String]) -> bool {
    let lower = name.to_lowercase();
    keywords.iter().any(|k| !k.is_empty() && lower.contains(&k.to_lowercase()))
}
