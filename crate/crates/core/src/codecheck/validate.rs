//! Full check of a generated response against its design document.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::layout::{BoxKind, ComputedBox, ComputedLayout};
use super::{compute_layout, extract_blocks, parse_jsx, parse_scss, violation, GeneratedCode, Severity, Violation};
use crate::design::{DesignDocument, ElementNode, ElementType};

/// Overlap ratio above which siblings are reported.
pub const OVERLAP_IOU: f64 = 0.5;

/// Distance between a document leaf and the generated box matched to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionDeviation {
    pub element: String,
    pub class: String,
    pub dx: i64,
    pub dy: i64,
    /// |dx| + |dy|.
    pub l1: i64,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub syntax_ok: bool,
    pub violations: Vec<Violation>,
    /// Present exactly when `syntax_ok`.
    pub layout: Option<ComputedLayout>,
    pub deviations: Vec<PositionDeviation>,
    /// Document leaves with no generated box of the same kind.
    pub missing: Vec<String>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.severity == Severity::Error)
    }

    pub fn error_count(&self) -> usize {
        self.errors().count()
    }

    pub fn is_clean(&self) -> bool {
        self.syntax_ok && self.error_count() == 0
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    fn failed(violations: Vec<Violation>) -> Self {
        Self { syntax_ok: false, violations, layout: None, deviations: Vec::new(), missing: Vec::new() }
    }
}

/// Extracts the blocks from a raw response, then validates them.
pub fn validate_response(response: &str, doc: &DesignDocument) -> ValidationReport {
    match extract_blocks(response) {
        Ok(code) => validate(&code, doc),
        Err(e) => ValidationReport::failed(vec![violation("protocol", Severity::Error, e.to_string(), None)]),
    }
}

fn normalize_text(t: &str) -> String {
    t.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn validate(code: &GeneratedCode, doc: &DesignDocument) -> ValidationReport {
    let mut violations = code.protocol_violations.clone();
    let tree = match parse_jsx(&code.jsx) {
        Ok(t) => t,
        Err(e) => {
            violations.push(violation("jsx-syntax", Severity::Error, e.to_string(), None));
            return ValidationReport::failed(violations);
        }
    };
    for r in &tree.renamed_classes {
        violations.push(violation("class-normalized", Severity::Warning, format!("class {r}"), None));
    }
    let sheet = match parse_scss(&code.scss) {
        Ok(s) => s,
        Err(e) => {
            violations.push(violation("scss-syntax", Severity::Error, e.to_string(), None));
            return ValidationReport::failed(violations);
        }
    };
    violations.extend(sheet.violations.iter().cloned());
    let layout = match compute_layout(&tree, &sheet, doc.dimensions) {
        Ok(l) => l,
        Err(e) => {
            violations.push(violation("missing-rule", Severity::Error, e.to_string(), None));
            return ValidationReport::failed(violations);
        }
    };

    let doc_texts: BTreeSet<String> = doc
        .iter()
        .into_iter()
        .filter(|e| e.kind == ElementType::Text)
        .filter_map(|e| e.text_content.as_deref().map(normalize_text))
        .collect();

    for b in &layout.boxes {
        let who = Some(b.class.clone());
        if b.kind == BoxKind::Image {
            match b.asset.as_deref() {
                Some(file) => match doc.asset(file) {
                    None => violations.push(violation("unknown-asset", Severity::Error, format!("unknown asset '{file}' on .{}", b.class), who.clone())),
                    Some(a) => {
                        if b.rect.width != i64::from(a.width) || b.rect.height != i64::from(a.height) {
                            violations.push(violation(
                                "size-drift",
                                Severity::Error,
                                format!("size drift on .{}: box {}x{} but {} is {}x{}", b.class, b.rect.width, b.rect.height, file, a.width, a.height),
                                who.clone(),
                            ));
                        }
                    }
                },
                // A source-less placeholder is not a broken reference.
                None => violations.push(violation("unbound-image", Severity::Warning, format!("image .{} has no source", b.class), who.clone())),
            }
        }
        if !b.in_page {
            violations.push(violation(
                "out-of-bound",
                Severity::Error,
                format!("out of bound: .{} at ({}, {}) size {}x{}", b.class, b.rect.x, b.rect.y, b.rect.width, b.rect.height),
                who.clone(),
            ));
        }
        if let Some(t) = &b.text {
            if !doc_texts.contains(t) {
                violations.push(violation("hallucinated-text", Severity::Error, format!("hallucinated text in .{}: \"{t}\"", b.class), who));
            }
        }
    }

    overlap_checks(&layout, &mut violations);
    let (deviations, missing) = position_deviations(&layout, doc);
    ValidationReport { syntax_ok: true, violations, layout: Some(layout), deviations, missing }
}

fn overlap_checks(layout: &ComputedLayout, violations: &mut Vec<Violation>) {
    let mut parents: Vec<Option<usize>> = layout.boxes.iter().map(|b| b.parent).collect();
    parents.sort();
    parents.dedup();
    for p in parents {
        let siblings: Vec<&ComputedBox> = layout.children_of(p).collect();
        for (i, a) in siblings.iter().enumerate() {
            for b in &siblings[i + 1..] {
                let iou = a.rect.iou(&b.rect);
                if iou > OVERLAP_IOU {
                    let severity = if a.z == b.z { Severity::Error } else { Severity::Warning };
                    violations.push(violation(
                        "overlap",
                        severity,
                        format!("siblings .{} and .{} overlap (IoU {iou:.2}, z {} / {})", a.class, b.class, a.z, b.z),
                        Some(a.class.clone()),
                    ));
                }
            }
        }
    }
}

fn kind_of(e: &ElementNode) -> BoxKind {
    match e.kind {
        ElementType::Image => BoxKind::Image,
        ElementType::Text => BoxKind::Text,
        ElementType::Container => BoxKind::Container,
    }
}

/// Greedy matching of document leaves to generated leaves of the same kind,
/// highest IoU first; ties go to the earlier document element, then the
/// earlier box. Pairs with zero IoU are not matched.
fn position_deviations(layout: &ComputedLayout, doc: &DesignDocument) -> (Vec<PositionDeviation>, Vec<String>) {
    let leaves = doc.leaves();
    let boxes = layout.leaves();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, e) in leaves.iter().enumerate() {
        for (j, b) in boxes.iter().enumerate() {
            if kind_of(e) == b.kind {
                let iou = e.bbox().iou(&b.rect);
                if iou > 0.0 {
                    pairs.push((iou, i, j));
                }
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_e = vec![false; leaves.len()];
    let mut used_b = vec![false; boxes.len()];
    let mut matched: Vec<(usize, PositionDeviation)> = Vec::new();
    for (iou, i, j) in pairs {
        if used_e[i] || used_b[j] {
            continue;
        }
        used_e[i] = true;
        used_b[j] = true;
        let (e, b) = (leaves[i], boxes[j]);
        let dx = b.rect.x - e.position.x;
        let dy = b.rect.y - e.position.y;
        matched.push((i, PositionDeviation { element: e.id.clone(), class: b.class.clone(), dx, dy, l1: dx.abs() + dy.abs(), iou }));
    }
    matched.sort_by_key(|(i, _)| *i);
    let missing = leaves.iter().zip(&used_e).filter(|(_, u)| !**u).map(|(e, _)| e.id.clone()).collect();
    (matched.into_iter().map(|(_, d)| d).collect(), missing)
}
