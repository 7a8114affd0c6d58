//! The design.json intermediate representation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assets::{AssetRecord, ImageFormat};
use crate::geometry::PixelBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementType {
    Container,
    Text,
    Image,
}

impl ElementType {
    pub fn as_str(&self) -> &'static str {
        match self {
            ElementType::Container => "container",
            ElementType::Text => "text",
            ElementType::Image => "image",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: i64,
    pub y: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Size {
    pub width: i64,
    pub height: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dimensions {
    pub width: i64,
    pub height: i64,
}

/// One element of the design tree. Positions are absolute page coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementNode {
    pub id: String,
    pub name: String,
    pub position: Position,
    pub size: Size,
    pub kind: ElementType,
    pub text_content: Option<String>,
    pub asset_ref: Option<String>,
    pub opacity: f64,
    /// Pre-order index in painting order (bottom-most first).
    pub z_hint: i64,
    pub children: Vec<ElementNode>,
}

impl ElementNode {
    pub fn bbox(&self) -> PixelBox {
        PixelBox::new(self.position.x, self.position.y, self.size.width, self.size.height)
    }

    pub fn is_leaf(&self) -> bool {
        self.kind != ElementType::Container
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(ElementNode::depth).max().unwrap_or(0)
    }

    /// Pre-order walk over this subtree.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a ElementNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    pub fn walk_mut(&mut self, f: &mut impl FnMut(&mut ElementNode)) {
        f(self);
        for c in &mut self.children {
            c.walk_mut(f);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignDocument {
    pub dimensions: Dimensions,
    pub elements: Vec<ElementNode>,
    pub assets: Vec<AssetRecord>,
}

impl DesignDocument {
    /// All elements in pre-order.
    pub fn iter(&self) -> Vec<&ElementNode> {
        let mut out = Vec::new();
        for e in &self.elements {
            e.walk(&mut |n| out.push(n));
        }
        out
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut ElementNode)) {
        for e in &mut self.elements {
            e.walk_mut(&mut f);
        }
    }

    /// Image and text elements in pre-order.
    pub fn leaves(&self) -> Vec<&ElementNode> {
        self.iter().into_iter().filter(|e| e.is_leaf()).collect()
    }

    pub fn depth(&self) -> usize {
        self.elements.iter().map(ElementNode::depth).max().unwrap_or(0)
    }

    pub fn find(&self, id: &str) -> Option<&ElementNode> {
        self.iter().into_iter().find(|e| e.id == id)
    }

    pub fn asset(&self, file: &str) -> Option<&AssetRecord> {
        self.assets.iter().find(|a| a.file == file)
    }

    /// Reassigns `z_hint` as the pre-order index.
    pub fn renumber_z(&mut self) {
        let mut z = 0;
        self.for_each_mut(|e| {
            e.z_hint = z;
            z += 1;
        });
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&DocumentJson::from(self)).expect("design serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        let wire: DocumentJson = serde_json::from_str(text)?;
        Ok(wire.into())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

// Wire format. Field names are fixed; optional fields are omitted when absent
// and filled with defaults on read.

#[derive(Serialize, Deserialize)]
struct DocumentJson {
    dimensions: Dimensions,
    #[serde(default)]
    elements: Vec<ElementJson>,
    #[serde(default)]
    assets: Vec<AssetJson>,
}

#[derive(Serialize, Deserialize)]
struct ElementJson {
    #[serde(default)]
    id: String,
    #[serde(default)]
    name: String,
    #[serde(default)]
    position: Position,
    #[serde(default)]
    size: Size,
    #[serde(rename = "type")]
    kind: ElementType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    asset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    opacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    children: Option<Vec<ElementJson>>,
}

#[derive(Serialize, Deserialize)]
struct AssetJson {
    file: String,
    width: u32,
    height: u32,
}

impl From<&DesignDocument> for DocumentJson {
    fn from(doc: &DesignDocument) -> Self {
        fn element(e: &ElementNode) -> ElementJson {
            ElementJson {
                id: e.id.clone(),
                name: e.name.clone(),
                position: e.position,
                size: e.size,
                kind: e.kind,
                text: e.text_content.clone(),
                asset: e.asset_ref.clone(),
                opacity: if e.opacity == 1.0 { None } else { Some(e.opacity) },
                children: if e.kind == ElementType::Container { Some(e.children.iter().map(element).collect()) } else { None },
            }
        }
        DocumentJson {
            dimensions: doc.dimensions,
            elements: doc.elements.iter().map(element).collect(),
            assets: doc
                .assets
                .iter()
                .map(|a| AssetJson { file: a.file.clone(), width: a.width, height: a.height })
                .collect(),
        }
    }
}

impl From<DocumentJson> for DesignDocument {
    fn from(wire: DocumentJson) -> Self {
        fn element(e: ElementJson) -> ElementNode {
            ElementNode {
                id: e.id,
                name: e.name,
                position: e.position,
                size: e.size,
                kind: e.kind,
                text_content: e.text,
                asset_ref: e.asset,
                opacity: e.opacity.unwrap_or(1.0),
                z_hint: 0,
                children: e.children.unwrap_or_default().into_iter().map(element).collect(),
            }
        }
        let mut doc = DesignDocument {
            dimensions: wire.dimensions,
            elements: wire.elements.into_iter().map(element).collect(),
            assets: wire
                .assets
                .into_iter()
                .map(|a| AssetRecord {
                    format: ImageFormat::from_file_name(&a.file).unwrap_or(ImageFormat::Png),
                    path: a.file.clone().into(),
                    file: a.file,
                    width: a.width,
                    height: a.height,
                })
                .collect(),
        };
        doc.renumber_z();
        doc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_fields() {
        let doc = DesignDocument::from_json(
            r#"{"dimensions":{"width":100,"height":50},"elements":[{"id":"e1","type":"image"}]}"#,
        )
        .unwrap();
        let e = &doc.elements[0];
        assert_eq!(e.position, Position::default());
        assert_eq!(e.size, Size::default());
        assert_eq!(e.opacity, 1.0);
        assert!(doc.assets.is_empty());
    }

    #[test]
    fn optional_fields_omitted() {
        let doc = DesignDocument {
            dimensions: Dimensions { width: 10, height: 10 },
            elements: vec![ElementNode {
                id: "e1".into(),
                name: "a".into(),
                position: Position { x: 1, y: 2 },
                size: Size { width: 3, height: 4 },
                kind: ElementType::Image,
                text_content: None,
                asset_ref: None,
                opacity: 1.0,
                z_hint: 0,
                children: vec![],
            }],
            assets: vec![],
        };
        let json = doc.to_json();
        assert!(!json.contains("opacity"));
        assert!(!json.contains("children"));
        assert!(!json.contains("\"text\""));
        assert_eq!(DesignDocument::from_json(&json).unwrap(), doc);
    }
}
