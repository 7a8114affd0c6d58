use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{contains_keyword, FilterConfig, PresetLibrary};
use crate::assets::AssetRecord;
use crate::geometry::Rect;
use crate::psd::{LayerKind, LayerNode};

/// Slack for comparing area ratios against thresholds.
const COVERAGE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub pixel_count: usize,
    pub text_count: usize,
    pub group_count: usize,
    /// Bounding box of the direct pixel children.
    pub union_bbox: Rect,
    /// `area(union_bbox ∩ frame) / area(frame)`.
    pub coverage: f64,
    /// Index into `children` of the largest pixel child (first on ties).
    pub best_candidate: Option<usize>,
    /// The group's own rectangle, see [`group_frame`].
    pub frame: Rect,
}

/// The rectangle a group occupies: its record bounds, or the union of all
/// descendant leaves when the record carries none (folder records usually don't).
pub fn group_frame(group: &LayerNode) -> Rect {
    if !group.bounds.is_empty() {
        return group.bounds;
    }
    fn leaves(node: &LayerNode, acc: &mut Rect) {
        for c in &node.children {
            if c.is_group() {
                leaves(c, acc);
            } else {
                *acc = acc.union(&c.bounds);
            }
        }
    }
    let mut acc = Rect::default();
    leaves(group, &mut acc);
    acc
}

pub fn compute_group_stats(group: &LayerNode) -> GroupStats {
    let frame = group_frame(group);
    let mut stats = GroupStats {
        pixel_count: 0,
        text_count: 0,
        group_count: 0,
        union_bbox: Rect::default(),
        coverage: 0.0,
        best_candidate: None,
        frame,
    };
    let mut best_area = -1i64;
    for (i, child) in group.children.iter().enumerate() {
        match child.kind {
            LayerKind::Pixel => {
                stats.pixel_count += 1;
                stats.union_bbox = stats.union_bbox.union(&child.bounds);
                if child.bounds.area() > best_area {
                    best_area = child.bounds.area();
                    stats.best_candidate = Some(i);
                }
            }
            LayerKind::Text => stats.text_count += 1,
            LayerKind::Group => stats.group_count += 1,
        }
    }
    if stats.pixel_count > 0 && frame.area() > 0 {
        let covered = stats.union_bbox.intersect(&frame).map(|r| r.area()).unwrap_or(0);
        stats.coverage = covered as f64 / frame.area() as f64;
    }
    stats
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupDecision {
    /// Collapse the group into one image element with the candidate's rectangle.
    FoldToImage { adopting: Rect, candidate: usize },
    KeepContainer,
}

/// Decides whether a group is visually a single image.
///
/// Folding requires all of:
/// - at least one pixel child, with coverage at or above `fold_coverage`;
/// - no text children;
/// - no structural keyword (mask, overlay, ...) in the name;
/// - at most `max_pixel_candidates` pixel children, or strict coverage;
/// - for container-named groups or groups holding subgroups, strict coverage
///   *and* a background keyword in the name.
pub fn classify_group(group: &LayerNode, stats: &GroupStats, cfg: &FilterConfig) -> GroupDecision {
    let meets = |threshold: f64| stats.coverage + COVERAGE_EPS >= threshold;
    let strict = meets(cfg.fold_coverage_strict);

    let filled = stats.pixel_count >= 1 && meets(cfg.fold_coverage);
    let no_text = stats.text_count == 0;
    let not_structural = !contains_keyword(&group.name, &cfg.structural_keywords);
    let few_candidates = stats.pixel_count <= cfg.max_pixel_candidates || strict;
    let container_like = contains_keyword(&group.name, &cfg.container_keywords) || stats.group_count >= 1;
    let container_ok = !container_like || (strict && contains_keyword(&group.name, &cfg.background_keywords));

    match stats.best_candidate {
        Some(candidate) if filled && no_text && not_structural && few_candidates && container_ok => {
            GroupDecision::FoldToImage { adopting: group.children[candidate].bounds, candidate }
        }
        _ => GroupDecision::KeepContainer,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextDecision {
    AsImage(String),
    AsText,
}

/// Decides whether a text layer is really rendered from an image asset.
///
/// An asset whose stem equals the layer name wins. Otherwise short text
/// (≤ 3 chars) or specially formatted text (≤ 10 chars) is looked up in the
/// preset library.
pub fn classify_text(layer: &LayerNode, assets: &[AssetRecord], preset: &PresetLibrary, cfg: &FilterConfig) -> TextDecision {
    let special = Regex::new(&cfg.special_text_pattern).ok();
    classify_text_with(layer, assets, preset, special.as_ref())
}

pub(crate) fn classify_text_with(layer: &LayerNode, assets: &[AssetRecord], preset: &PresetLibrary, special: Option<&Regex>) -> TextDecision {
    if let Some(asset) = assets.iter().find(|a| a.stem() == layer.name) {
        return TextDecision::AsImage(asset.file.clone());
    }
    let text = layer.text_content.as_deref().unwrap_or("");
    let len = text.chars().count();
    let short = len > 0 && len <= 3;
    let formatted = len > 0 && len <= 10 && special.is_some_and(|re| re.is_match(text));
    if short || formatted {
        if let Some(file) = preset.get(text) {
            return TextDecision::AsImage(file.to_string());
        }
    }
    TextDecision::AsText
}
