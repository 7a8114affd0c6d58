use std::fmt;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use super::FilterConfig;
use crate::geometry::Rect;
use crate::psd::{LayerNode, RawDesignInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemovalReason {
    Hidden,
    NearTransparent,
    TooSmall,
    SystemDefaultName,
    FullyOutOfBounds,
    EmptyGroup,
}

impl fmt::Display for RemovalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RemovalReason::Hidden => "hidden",
            RemovalReason::NearTransparent => "near-transparent",
            RemovalReason::TooSmall => "too small",
            RemovalReason::SystemDefaultName => "system-default name",
            RemovalReason::FullyOutOfBounds => "fully out of bounds",
            RemovalReason::EmptyGroup => "empty group",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    /// Slash-joined names from the root, e.g. `header/logo`.
    pub path: String,
    pub reason: RemovalReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub input: RawDesignInput,
    pub removed: Vec<Removal>,
}

fn child_path(parent: &str, name: &str) -> String {
    if parent.is_empty() {
        name.to_string()
    } else {
        format!("{parent}/{name}")
    }
}

fn compile_patterns(cfg: &FilterConfig) -> Vec<Regex> {
    cfg.default_name_patterns
        .iter()
        .filter_map(|p| match RegexBuilder::new(p).case_insensitive(true).build() {
            Ok(re) => Some(re),
            Err(e) => {
                log::warn!("ignoring invalid name pattern {p:?}: {e}");
                None
            }
        })
        .collect()
}

/// Drops layers that cannot contribute to the page (see [`RemovalReason`]).
///
/// Groups with an editor-default name are dissolved: their surviving
/// children move up into the parent. Groups left without children are
/// removed.
pub fn filter_layers(input: &RawDesignInput, cfg: &FilterConfig) -> Filtered {
    let patterns = compile_patterns(cfg);
    let mut removed = Vec::new();
    let roots = filter_list(&input.roots, "", cfg, &patterns, &mut removed);
    Filtered { input: RawDesignInput { roots, ..input.clone() }, removed }
}

fn filter_list(nodes: &[LayerNode], parent: &str, cfg: &FilterConfig, patterns: &[Regex], removed: &mut Vec<Removal>) -> Vec<LayerNode> {
    let mut out = Vec::new();
    for node in nodes {
        let path = child_path(parent, &node.name);
        let default_name = patterns.iter().any(|re| re.is_match(&node.name));
        let reason = if !node.visible {
            Some(RemovalReason::Hidden)
        } else if node.opacity < cfg.min_opacity {
            Some(RemovalReason::NearTransparent)
        } else if !node.is_group() && (node.bounds.area() < cfg.min_area || node.bounds.width() < cfg.min_side || node.bounds.height() < cfg.min_side) {
            Some(RemovalReason::TooSmall)
        } else if !node.is_group() && default_name {
            Some(RemovalReason::SystemDefaultName)
        } else {
            None
        };
        if let Some(reason) = reason {
            removed.push(Removal { path, reason });
            continue;
        }
        if !node.is_group() {
            out.push(node.clone());
            continue;
        }
        let children = filter_list(&node.children, &path, cfg, patterns, removed);
        if children.is_empty() {
            removed.push(Removal { path, reason: RemovalReason::EmptyGroup });
        } else if default_name {
            removed.push(Removal { path, reason: RemovalReason::SystemDefaultName });
            out.extend(children);
        } else {
            out.push(LayerNode { children, ..node.clone() });
        }
    }
    out
}

/// Clips every rectangle to the page. Leaves that end up with zero area are
/// removed, and so are groups left empty.
pub fn normalize_coordinates(input: &RawDesignInput) -> Filtered {
    let page = Rect::new(0, 0, input.header.height as i32, input.header.width as i32);
    let mut removed = Vec::new();
    let roots = clip_list(&input.roots, "", &page, &mut removed);
    Filtered { input: RawDesignInput { roots, ..input.clone() }, removed }
}

fn clip_list(nodes: &[LayerNode], parent: &str, page: &Rect, removed: &mut Vec<Removal>) -> Vec<LayerNode> {
    let mut out = Vec::new();
    for node in nodes {
        let path = child_path(parent, &node.name);
        let clipped = node.bounds.intersect(page);
        if node.is_group() {
            let children = clip_list(&node.children, &path, page, removed);
            if children.is_empty() {
                removed.push(Removal { path, reason: RemovalReason::EmptyGroup });
            } else {
                out.push(LayerNode { bounds: clipped.unwrap_or_default(), children, ..node.clone() });
            }
        } else {
            match clipped {
                Some(bounds) => out.push(LayerNode { bounds, ..node.clone() }),
                None => removed.push(Removal { path, reason: RemovalReason::FullyOutOfBounds }),
            }
        }
    }
    out
}
