//! Layer-tree extraction from PSD files and the equivalent plain-text layer dump.
//!
//! Only the layer records are read: bounds, opacity, the hidden flag, names,
//! folder dividers and type-tool markers. Channel pixel data, masks and
//! blending ranges are skipped.

mod dump;
mod reader;
mod writer;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Rect;

pub use dump::{parse_layer_dump, read_layer_dump, render_layer_dump, write_layer_dump};
pub use reader::{parse_psd, read_psd};
pub use writer::{encode_psd, write_synthetic_psd};

/// RGB color mode code in the PSD header.
pub const COLOR_MODE_RGB: u16 = 3;

/// Largest width or height a version-1 PSD may declare.
pub const MAX_DIMENSION: u32 = 30_000;

#[derive(Debug, Error)]
pub enum PsdError {
    #[error("not a PSD file (bad signature)")]
    BadSignature,
    #[error("unsupported PSD version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported color mode {color_mode} / depth {depth} (only 8-bit RGB)")]
    UnsupportedMode { color_mode: u16, depth: u16 },
    #[error("invalid page dimensions {width}x{height}")]
    InvalidDimensions { width: u32, height: u32 },
    #[error("truncated input at byte {offset} while reading {context}")]
    Truncated { offset: usize, context: &'static str },
    #[error("malformed layer record {index}: {reason}")]
    MalformedRecord { index: usize, reason: String },
    #[error("unbalanced folder dividers: {0}")]
    MalformedDividers(String),
    #[error("layer dump parse error at {line}:{column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PsdError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsdHeader {
    pub width: u32,
    pub height: u32,
    pub channels: u16,
    pub bit_depth: u16,
    pub color_mode: u16,
}

impl PsdHeader {
    /// 8-bit RGB header with three channels.
    pub fn rgb(width: u32, height: u32) -> Self {
        Self { width, height, channels: 3, bit_depth: 8, color_mode: COLOR_MODE_RGB }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Pixel,
    Text,
    Group,
}

impl LayerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LayerKind::Pixel => "pixel",
            LayerKind::Text => "text",
            LayerKind::Group => "group",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNode {
    pub name: String,
    pub bounds: Rect,
    /// Raw opacity byte divided by 255.
    pub opacity: f64,
    pub visible: bool,
    pub kind: LayerKind,
    /// Present iff `kind == Text`.
    pub text_content: Option<String>,
    /// Bottom-most first; non-empty only for groups.
    pub children: Vec<LayerNode>,
}

impl LayerNode {
    pub fn pixel(name: impl Into<String>, bounds: Rect) -> Self {
        Self {
            name: name.into(),
            bounds,
            opacity: 1.0,
            visible: true,
            kind: LayerKind::Pixel,
            text_content: None,
            children: Vec::new(),
        }
    }

    pub fn text(name: impl Into<String>, bounds: Rect, content: impl Into<String>) -> Self {
        Self {
            kind: LayerKind::Text,
            text_content: Some(content.into()),
            ..Self::pixel(name, bounds)
        }
    }

    pub fn group(name: impl Into<String>, bounds: Rect, children: Vec<LayerNode>) -> Self {
        Self {
            kind: LayerKind::Group,
            children,
            ..Self::pixel(name, bounds)
        }
    }

    pub fn with_opacity(mut self, opacity: f64) -> Self {
        self.opacity = opacity;
        self
    }

    pub fn hidden(mut self) -> Self {
        self.visible = false;
        self
    }

    pub fn is_group(&self) -> bool {
        self.kind == LayerKind::Group
    }

    /// Number of nodes in this subtree, including `self`.
    pub fn count(&self) -> usize {
        1 + self.children.iter().map(LayerNode::count).sum::<usize>()
    }

    /// Depth of this subtree with `self` at depth 1.
    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(LayerNode::depth).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    PsdBinary,
    LayerDump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDesignInput {
    pub header: PsdHeader,
    /// Document z-order, bottom-most first.
    pub roots: Vec<LayerNode>,
    pub source_path: PathBuf,
    pub source_kind: SourceKind,
    /// Notes about skipped blocks and other recoverable oddities.
    #[serde(default)]
    pub parse_log: Vec<String>,
}

impl RawDesignInput {
    pub fn new(header: PsdHeader, roots: Vec<LayerNode>) -> Self {
        Self {
            header,
            roots,
            source_path: PathBuf::new(),
            source_kind: SourceKind::LayerDump,
            parse_log: Vec::new(),
        }
    }

    /// Header and layer tree equality, ignoring provenance and the parse log.
    pub fn same_tree(&self, other: &RawDesignInput) -> bool {
        self.header == other.header && self.roots == other.roots
    }

    pub fn layer_count(&self) -> usize {
        self.roots.iter().map(LayerNode::count).sum()
    }

    pub fn depth(&self) -> usize {
        self.roots.iter().map(LayerNode::depth).max().unwrap_or(0)
    }
}

/// Reads either format, choosing by extension (`.psd` is binary, anything else a dump).
pub fn read_design(path: impl AsRef<std::path::Path>) -> Result<RawDesignInput> {
    let path = path.as_ref();
    let is_psd = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.eq_ignore_ascii_case("psd"))
        .unwrap_or(false);
    if is_psd {
        read_psd(path)
    } else {
        read_layer_dump(path)
    }
}

/// Opacity as stored on disk: one byte, 0..=255.
pub fn opacity_to_byte(opacity: f64) -> u8 {
    (opacity.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn byte_to_opacity(byte: u8) -> f64 {
    byte as f64 / 255.0
}
