//! Absolute layout of a parsed JSX tree under a stylesheet. Every element is
//! positioned relative to its parent's box; there is no flow, no margins.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::jsx::{JsxNode, JsxTree, TEXT_TAGS};
use super::scss::{StyleSheet, StyleValue};
use crate::design::Dimensions;
use crate::geometry::PixelBox;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("class '{0}' has no style rule")]
    MissingRule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxKind {
    Image,
    Text,
    Container,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputedBox {
    /// First class of the element, or the tag name when it has none.
    pub class: String,
    pub classes: Vec<String>,
    pub rect: PixelBox,
    pub z: i64,
    /// Pre-order index, the tie-break for equal z.
    pub order: usize,
    pub kind: BoxKind,
    /// Asset file name (last path component of the url or `src`).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub asset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub text: Option<String>,
    /// Product of the element's and its ancestors' opacity.
    pub opacity: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub background_color: Option<[u8; 4]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub color: Option<[u8; 4]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub font_size: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub parent: Option<usize>,
    pub in_page: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputedLayout {
    pub page: Dimensions,
    /// Pre-order; `boxes[i].order == i`.
    pub boxes: Vec<ComputedBox>,
}

impl ComputedLayout {
    /// Boxes sorted bottom to top.
    pub fn painting_order(&self) -> Vec<&ComputedBox> {
        let mut v: Vec<&ComputedBox> = self.boxes.iter().collect();
        v.sort_by_key(|b| (b.z, b.order));
        v
    }

    /// Image and text boxes in pre-order.
    pub fn leaves(&self) -> Vec<&ComputedBox> {
        self.boxes.iter().filter(|b| b.kind != BoxKind::Container).collect()
    }

    pub fn children_of(&self, parent: Option<usize>) -> impl Iterator<Item = &ComputedBox> {
        self.boxes.iter().filter(move |b| b.parent == parent)
    }
}

/// Last path component of a url, without query or fragment.
pub(crate) fn asset_name(url: &str) -> String {
    let url = url.split(['?', '#']).next().unwrap_or(url);
    url.rsplit(['/', '\\']).next().unwrap_or(url).to_string()
}

pub fn compute_layout(tree: &JsxTree, styles: &StyleSheet, page: Dimensions) -> Result<ComputedLayout, LayoutError> {
    let mut layout = ComputedLayout { page, boxes: Vec::new() };
    let page_box = PixelBox::new(0, 0, page.width, page.height);
    let mut ancestry: Vec<&[String]> = Vec::new();
    place(&tree.root, styles, page_box, 0, 1.0, None, &mut ancestry, &mut layout)?;
    Ok(layout)
}

/// Does `selector` match an element with `classes` under `ancestry`
/// (outermost first)? The last class must be on the element; the others
/// must appear on ancestors in order.
pub(crate) fn matches(selector: &[String], classes: &[String], ancestry: &[&[String]]) -> bool {
    let Some((last, rest)) = selector.split_last() else { return false };
    if !classes.contains(last) {
        return false;
    }
    let mut remaining = rest.iter().rev().peekable();
    for anc in ancestry.iter().rev() {
        match remaining.peek() {
            Some(c) if anc.contains(c) => {
                remaining.next();
            }
            Some(_) => {}
            None => break,
        }
    }
    remaining.peek().is_none()
}

/// Cascaded declarations: specificity (selector length) first, then source order.
fn cascade(node: &JsxNode, styles: &StyleSheet, ancestry: &[&[String]]) -> Result<BTreeMap<String, StyleValue>, LayoutError> {
    let mut hits: Vec<(usize, usize)> = Vec::new();
    for (i, rule) in styles.rules.iter().enumerate() {
        if matches(&rule.selector, &node.classes, ancestry) {
            hits.push((rule.selector.len(), i));
        }
    }
    for class in &node.classes {
        let covered = hits.iter().any(|&(_, i)| styles.rules[i].selector.last() == Some(class));
        if !covered {
            return Err(LayoutError::MissingRule(class.clone()));
        }
    }
    hits.sort();
    let mut out = BTreeMap::new();
    for (_, i) in hits {
        for d in &styles.rules[i].declarations {
            out.insert(d.property.clone(), d.value.clone());
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn place<'t>(
    node: &'t JsxNode,
    styles: &StyleSheet,
    parent_box: PixelBox,
    parent_z: i64,
    parent_opacity: f64,
    parent: Option<usize>,
    ancestry: &mut Vec<&'t [String]>,
    layout: &mut ComputedLayout,
) -> Result<(), LayoutError> {
    let decl = cascade(node, styles, ancestry)?;
    let px = |name: &str| match decl.get(name) {
        Some(StyleValue::Px(v)) | Some(StyleValue::Int(v)) => Some(*v),
        _ => None,
    };
    let rect = PixelBox::new(
        parent_box.x + px("left").unwrap_or(0),
        parent_box.y + px("top").unwrap_or(0),
        px("width").unwrap_or(parent_box.width),
        px("height").unwrap_or(parent_box.height),
    );
    let z = match decl.get("z-index") {
        Some(StyleValue::Int(z)) => *z,
        _ => parent_z,
    };
    let own_opacity = match decl.get("opacity") {
        Some(StyleValue::Number(o)) => *o,
        _ => 1.0,
    };
    let color_of = |name: &str| match decl.get(name) {
        Some(StyleValue::Color(c)) => Some(*c),
        _ => None,
    };

    let background = match decl.get("background-image") {
        Some(StyleValue::Url(u)) => Some(asset_name(u)),
        _ => None,
    };
    let text = node.text().map(|t| t.split_whitespace().collect::<Vec<_>>().join(" ")).filter(|t| !t.is_empty());
    let (kind, asset) = if let Some(a) = background {
        (BoxKind::Image, Some(a))
    } else if node.tag == "img" {
        (BoxKind::Image, node.attribute("src").map(asset_name))
    } else if node.element_children().next().is_none() && (text.is_some() || TEXT_TAGS.contains(&node.tag.as_str())) {
        (BoxKind::Text, None)
    } else {
        (BoxKind::Container, None)
    };

    let page = layout.page;
    let order = layout.boxes.len();
    let opacity = parent_opacity * own_opacity;
    layout.boxes.push(ComputedBox {
        class: node.classes.first().cloned().unwrap_or_else(|| node.tag.clone()),
        classes: node.classes.clone(),
        rect,
        z,
        order,
        kind,
        asset,
        text: if kind == BoxKind::Text { text } else { None },
        opacity,
        background_color: color_of("background-color"),
        color: color_of("color"),
        font_size: px("font-size"),
        parent,
        in_page: rect.within(page.width, page.height),
    });

    ancestry.push(&node.classes);
    for child in node.element_children() {
        place(child, styles, rect, z, opacity, Some(order), ancestry, layout)?;
    }
    ancestry.pop();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codecheck::{parse_jsx, parse_scss};

    fn run(jsx: &str, scss: &str) -> Result<ComputedLayout, LayoutError> {
        compute_layout(&parse_jsx(jsx).unwrap(), &parse_scss(scss).unwrap(), Dimensions { width: 375, height: 667 })
    }

    #[test]
    fn offset_arithmetic() {
        let l = run(
            r#"<div className="page"><div className="hero"/></div>"#,
            ".page { position: absolute; left: 0px; top: 0px; } .hero { position: absolute; top: 10px; left: 20px; width: 120px; height: 40px; }",
        )
        .unwrap();
        let hero = &l.boxes[1];
        assert_eq!((hero.rect.x, hero.rect.y, hero.rect.right(), hero.rect.bottom()), (20, 10, 140, 50));
        assert_eq!(l.boxes[0].rect, PixelBox::new(0, 0, 375, 667));
    }

    #[test]
    fn nested_offsets_compose() {
        let l = run(
            r#"<div className="page"><div className="a"><div className="b"><span className="t">hi</span></div></div></div>"#,
            ".page{left:0} .a{left:10px;top:5px;width:200px;height:200px} .b{left:7px;top:3px;width:50px;height:50px} .t{left:1px;top:2px;width:10px;height:10px}",
        )
        .unwrap();
        assert_eq!(l.boxes[3].rect, PixelBox::new(18, 10, 10, 10));
        assert_eq!(l.boxes[3].kind, BoxKind::Text);
        assert_eq!(l.boxes[3].text.as_deref(), Some("hi"));
    }

    #[test]
    fn missing_rule() {
        let err = run(r#"<div className="page"><div className="ghost"/></div>"#, ".page{left:0}").unwrap_err();
        assert_eq!(err, LayoutError::MissingRule("ghost".into()));
    }

    #[test]
    fn nested_and_flat_equivalent() {
        let jsx = r#"<div className="page"><div className="hero"/></div>"#;
        let nested = run(jsx, ".page { left: 0px; .hero { top: 4px; left: 6px; width: 10px; height: 12px; } }").unwrap();
        let flat = run(jsx, ".page { left: 0px; }\n.page .hero { top: 4px; left: 6px; width: 10px; height: 12px; }").unwrap();
        assert_eq!(nested, flat);
    }

    #[test]
    fn descendant_selector_needs_ancestor() {
        let jsx = r#"<div className="page"><div className="card"><div className="x"/></div><div className="x"/></div>"#;
        let l = run(jsx, ".page{left:0} .card{left:100px;width:10px;height:10px} .x{width:1px;height:1px} .card .x{top:5px}").unwrap();
        assert_eq!(l.boxes[2].rect.y, 5);
        assert_eq!(l.boxes[3].rect.y, 0);
    }

    #[test]
    fn specificity_beats_order() {
        let jsx = r#"<div className="page"><div className="x"/></div>"#;
        let l = run(jsx, ".page{left:0} .page .x{top:5px} .x{top:9px}").unwrap();
        assert_eq!(l.boxes[1].rect.y, 5);
    }

    #[test]
    fn kinds_z_and_opacity() {
        let jsx = r#"<div className="page"><div className="bg"/><img className="logo" src="assets/logo.png" alt=""/></div>"#;
        let l = run(jsx, ".page{opacity:0.5; z-index: 2} .bg{background-image:url(\"img/bg.jpg\"); opacity: 0.5} .logo{z-index:7}").unwrap();
        assert_eq!(l.boxes[1].kind, BoxKind::Image);
        assert_eq!(l.boxes[1].asset.as_deref(), Some("bg.jpg"));
        assert_eq!(l.boxes[1].z, 2);
        assert!((l.boxes[1].opacity - 0.25).abs() < 1e-12);
        assert_eq!(l.boxes[2].asset.as_deref(), Some("logo.png"));
        assert_eq!(l.painting_order().iter().map(|b| b.order).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn out_of_page_flagged() {
        let l = run(r#"<div className="page"><div className="x"/></div>"#, ".page{left:0} .x{left:370px;width:10px;height:1px}").unwrap();
        assert!(!l.boxes[1].in_page);
    }
}
