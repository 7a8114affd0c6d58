use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::classify::classify_text_with;
use super::{classify_group, compute_group_stats, FilterConfig, GroupDecision, PresetLibrary, TextDecision};
use crate::assets::AssetRecord;
use crate::design::{DesignDocument, Dimensions, ElementNode, ElementType, Position, Size};
use crate::geometry::{PixelBox, Rect};
use crate::psd::{LayerKind, LayerNode, RawDesignInput};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BuildError {
    #[error("no elements survived filtering and classification")]
    DegenerateDocument,
}

/// Classifies the (filtered, normalized) layer tree into a design document.
///
/// Ids are `e1`, `e2`, ... in pre-order and `z_hint` is the pre-order index.
/// Containers deeper than `max_depth` are dissolved into their leaves, which
/// keep their absolute positions. Container boxes are the union of their
/// children.
pub fn build_document(
    input: &RawDesignInput,
    cfg: &FilterConfig,
    assets: &[AssetRecord],
    preset: &PresetLibrary,
) -> Result<DesignDocument, BuildError> {
    let special = Regex::new(&cfg.special_text_pattern).ok();
    let ctx = Ctx { cfg, assets, preset, special: special.as_ref() };
    let elements: Vec<ElementNode> = input.roots.iter().filter_map(|n| ctx.convert(n)).collect();
    let mut elements = limit_depth(elements, 1, cfg.max_depth.max(1));
    if elements.is_empty() {
        return Err(BuildError::DegenerateDocument);
    }
    for e in &mut elements {
        refit_containers(e);
    }
    let mut doc = DesignDocument {
        dimensions: Dimensions { width: input.header.width as i64, height: input.header.height as i64 },
        elements,
        assets: Vec::new(),
    };
    let mut n = 0i64;
    doc.for_each_mut(|e| {
        n += 1;
        e.id = format!("e{n}");
        e.z_hint = n - 1;
    });
    Ok(doc)
}

struct Ctx<'a> {
    cfg: &'a FilterConfig,
    assets: &'a [AssetRecord],
    preset: &'a PresetLibrary,
    special: Option<&'a Regex>,
}

impl Ctx<'_> {
    fn convert(&self, node: &LayerNode) -> Option<ElementNode> {
        match node.kind {
            LayerKind::Group => {
                let stats = compute_group_stats(node);
                match classify_group(node, &stats, self.cfg) {
                    GroupDecision::FoldToImage { adopting, candidate } => {
                        let opacity = node.opacity * node.children[candidate].opacity;
                        Some(leaf(&node.name, adopting, ElementType::Image, opacity))
                    }
                    GroupDecision::KeepContainer => {
                        let children: Vec<ElementNode> = node.children.iter().filter_map(|c| self.convert(c)).collect();
                        if children.is_empty() {
                            return None;
                        }
                        let mut e = leaf(&node.name, Rect::default(), ElementType::Container, node.opacity);
                        e.children = children;
                        Some(e)
                    }
                }
            }
            LayerKind::Text => match classify_text_with(node, self.assets, self.preset, self.special) {
                TextDecision::AsImage(file) => {
                    let mut e = leaf(&node.name, node.bounds, ElementType::Image, node.opacity);
                    e.asset_ref = Some(file);
                    Some(e)
                }
                TextDecision::AsText => {
                    let mut e = leaf(&node.name, node.bounds, ElementType::Text, node.opacity);
                    e.text_content = Some(node.text_content.clone().unwrap_or_default());
                    Some(e)
                }
            },
            LayerKind::Pixel => Some(leaf(&node.name, node.bounds, ElementType::Image, node.opacity)),
        }
    }
}

fn leaf(name: &str, r: Rect, kind: ElementType, opacity: f64) -> ElementNode {
    ElementNode {
        id: String::new(),
        name: name.to_string(),
        position: Position { x: r.left as i64, y: r.top as i64 },
        size: Size { width: r.width(), height: r.height() },
        kind,
        text_content: None,
        asset_ref: None,
        opacity,
        z_hint: 0,
        children: Vec::new(),
    }
}

fn limit_depth(nodes: Vec<ElementNode>, depth: usize, max_depth: usize) -> Vec<ElementNode> {
    let mut out = Vec::new();
    for mut node in nodes {
        if node.kind != ElementType::Container {
            out.push(node);
        } else if depth >= max_depth {
            collect_leaves(node, &mut out);
        } else {
            node.children = limit_depth(std::mem::take(&mut node.children), depth + 1, max_depth);
            if !node.children.is_empty() {
                out.push(node);
            }
        }
    }
    out
}

fn collect_leaves(node: ElementNode, out: &mut Vec<ElementNode>) {
    if node.kind == ElementType::Container {
        for c in node.children {
            collect_leaves(c, out);
        }
    } else {
        out.push(node);
    }
}

fn refit_containers(e: &mut ElementNode) -> PixelBox {
    if e.kind == ElementType::Container && !e.children.is_empty() {
        let mut boxes = e.children.iter_mut().map(refit_containers);
        let first = boxes.next().expect("non-empty");
        let b = boxes.fold(first, |acc, b| acc.union(&b));
        e.position = Position { x: b.x, y: b.y };
        e.size = Size { width: b.width, height: b.height };
    }
    e.bbox()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub code: String,
    pub severity: Severity,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element: Option<String>,
}

/// Reports empty containers, out-of-page elements and heavily overlapping
/// sibling leaves (IoU > 0.5).
pub fn consistency_check(doc: &DesignDocument) -> Vec<Finding> {
    let mut findings = Vec::new();
    check_siblings(&doc.elements, doc.dimensions, &mut findings);
    findings
}

fn check_siblings(nodes: &[ElementNode], page: Dimensions, findings: &mut Vec<Finding>) {
    for e in nodes {
        if e.kind == ElementType::Container && e.children.is_empty() {
            findings.push(Finding {
                code: "empty-container".into(),
                severity: Severity::Error,
                message: format!("container '{}' has no children", e.name),
                element: Some(e.id.clone()),
            });
        }
        if !e.bbox().within(page.width, page.height) {
            findings.push(Finding {
                code: "out-of-bound".into(),
                severity: Severity::Error,
                message: format!("element '{}' at {:?} leaves the {}x{} page", e.name, e.bbox(), page.width, page.height),
                element: Some(e.id.clone()),
            });
        }
    }
    let leaves: Vec<&ElementNode> = nodes.iter().filter(|e| e.is_leaf()).collect();
    for (i, a) in leaves.iter().enumerate() {
        for b in &leaves[i + 1..] {
            let iou = a.bbox().iou(&b.bbox());
            if iou > 0.5 {
                findings.push(Finding {
                    code: "overlap".into(),
                    severity: Severity::Warning,
                    message: format!("'{}' and '{}' overlap (IoU {:.3})", a.id, b.id, iou),
                    element: Some(b.id.clone()),
                });
            }
        }
    }
    for e in nodes {
        check_siblings(&e.children, page, findings);
    }
}
