//! Three-message prompt construction: system rules, one worked example, and
//! the user message carrying the structural prior, the asset list and the
//! hard constraints.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::design::{DesignDocument, Dimensions, ElementNode, ElementType};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("document has no elements")]
    EmptyDocument,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("constraints.json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Ablation switches. Each removes one fragment from the prompt.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    /// Drop the structural prior (element tree and coordinate reminders).
    pub no_structural: bool,
    /// Drop image attachments.
    pub no_attachments: bool,
    /// Drop the worked example and the engineering/hard-constraint rules.
    pub simple_prompt: bool,
}

impl Ablation {
    pub fn from_name(name: &str) -> Option<Self> {
        let mut a = Ablation::default();
        match name {
            "none" | "full" => {}
            "no_structural" | "no-structural" => a.no_structural = true,
            "no_attachments" | "no-attachments" => a.no_attachments = true,
            "simple_prompt" | "simple-prompt" => a.simple_prompt = true,
            _ => return None,
        }
        Some(a)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptOptions {
    pub ablation: Ablation,
    /// Reference screenshot attached to the user message.
    pub screenshot: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub path: PathBuf,
    pub media_type: String,
    /// Hex SHA-256 of the file contents.
    pub sha256: String,
}

impl Attachment {
    pub fn from_file(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        let media_type = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("jpg") | Some("jpeg") => "image/jpeg",
            _ => "image/png",
        };
        Ok(Self { path: path.to_path_buf(), media_type: media_type.into(), sha256: hex_digest(&bytes) })
    }
}

/// One element of the machine-readable constraint copy. Coordinates are absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoElement {
    pub id: String,
    pub parent: Option<String>,
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ElementType,
    pub x: i64,
    pub y: i64,
    pub width: i64,
    pub height: i64,
    pub z: i64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub asset: Option<String>,
    pub opacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoAsset {
    pub file: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintEcho {
    pub page: Dimensions,
    /// Pre-order.
    pub elements: Vec<EchoElement>,
    pub assets: Vec<EchoAsset>,
}

impl ConstraintEcho {
    pub fn from_document(doc: &DesignDocument) -> Self {
        fn walk(e: &ElementNode, parent: Option<&str>, out: &mut Vec<EchoElement>) {
            out.push(EchoElement {
                id: e.id.clone(),
                parent: parent.map(str::to_string),
                name: e.name.clone(),
                kind: e.kind,
                x: e.position.x,
                y: e.position.y,
                width: e.size.width,
                height: e.size.height,
                z: e.z_hint,
                text: e.text_content.clone(),
                asset: e.asset_ref.clone(),
                opacity: e.opacity,
            });
            for c in &e.children {
                walk(c, Some(&e.id), out);
            }
        }
        let mut elements = Vec::new();
        for e in &doc.elements {
            walk(e, None, &mut elements);
        }
        let assets = doc.assets.iter().map(|a| EchoAsset { file: a.file.clone(), width: a.width, height: a.height }).collect();
        Self { page: doc.dimensions, elements, assets }
    }

    pub fn element(&self, id: &str) -> Option<&EchoElement> {
        self.elements.iter().find(|e| e.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub example: String,
    pub user: String,
    pub attachments: Vec<Attachment>,
    pub constraint_echo: ConstraintEcho,
}

/// Section headings inside the user message.
pub const STRUCTURE_HEADING: &str = "## Structural prior";
pub const ASSET_HEADING: &str = "## Asset alignment";
pub const CONSTRAINT_HEADING: &str = "## Hard constraints";
pub const REMINDER_HEADING: &str = "## Coordinate reminders";

const SYSTEM_RULES: &str = "\
You convert a parsed design into production React (JSX) and SCSS.

Output format:
- Reply with exactly two fenced code blocks: first ```jsx, then ```scss.
- Do not write any explanatory text before, between or after the blocks.

Engineering rules:
- The jsx block is plain markup with a single root element: no imports, no component wrapper, no expressions in braces.
- Allowed tags: div, span, img, p, h1-h6. Allowed attributes: className, src, alt. No event handlers, no inline style.
- Class names are kebab-case. Every className has a rule in the scss block.
- Every element is `position: absolute`; `top`/`left` are relative to the parent element's box.
- All lengths are integer pixels (`12px`); never use percentages, rem, or fractions.
- Give every element an explicit `z-index`; later elements in the design stack get higher values.
- Images are drawn with `background-image: url(\"assets/<file>\")` on a div; width and height equal the asset's true size.
- Text appears only inside elements whose type is text, with the exact text given.
- Nothing may be placed outside the page, and boxes must not overlap unless the design stacks them.
";

const SIMPLE_SYSTEM: &str = "Convert the design into React JSX and SCSS. Reply with one ```jsx block and one ```scss block.\n";

const EXAMPLE_DESIGN: &str = "\
page 375x200
- e1 container \"card\" at (0, 0) size 375x200
  - e2 image \"card_bg\" at (0, 0) asset card_bg.png
  - e3 text \"title\" at (24, 16) size 200x32 text \"Hello\"
assets:
- card_bg.png 375x200";

/// Reference output for [`EXAMPLE_DESIGN`]; kept valid under the code checker.
pub const EXAMPLE_JSX: &str = "\
<div className=\"page\">
  <div className=\"e1-card\">
    <div className=\"e2-card-bg\" />
    <span className=\"e3-title\">Hello</span>
  </div>
</div>";

pub const EXAMPLE_SCSS: &str = "\
.page { position: absolute; left: 0px; top: 0px; width: 375px; height: 200px; }
.e1-card {
  position: absolute; left: 0px; top: 0px; width: 375px; height: 200px; z-index: 1;
  .e2-card-bg { position: absolute; left: 0px; top: 0px; width: 375px; height: 200px; z-index: 2; background-image: url(\"assets/card_bg.png\"); }
  .e3-title { position: absolute; left: 24px; top: 16px; width: 200px; height: 32px; z-index: 3; font-size: 16px; color: #222222; }
}";

/// Asset list of the worked example, for checking it with the validator.
pub const EXAMPLE_ASSETS: &[(&str, u32, u32)] = &[("card_bg.png", 375, 200)];

fn example_text() -> String {
    format!("Design:\n{EXAMPLE_DESIGN}\n\nExpected answer:\n```jsx\n{EXAMPLE_JSX}\n```\n```scss\n{EXAMPLE_SCSS}\n```\n")
}

pub fn build_prompt(doc: &DesignDocument, options: &PromptOptions) -> Result<PromptBundle, PromptError> {
    if doc.elements.is_empty() {
        return Err(PromptError::EmptyDocument);
    }
    let ab = options.ablation;
    let mut user = String::new();
    let _ = writeln!(user, "Page size: {}x{} px.", doc.dimensions.width, doc.dimensions.height);

    if !ab.no_structural {
        let _ = writeln!(user, "\n{STRUCTURE_HEADING}");
        for e in &doc.elements {
            structure_lines(e, 0, &mut user);
        }
    }

    let _ = writeln!(user, "\n{ASSET_HEADING}");
    if doc.assets.is_empty() {
        let _ = writeln!(user, "(no image assets)");
    }
    for a in &doc.assets {
        let _ = writeln!(user, "- {} {}x{}", a.file, a.width, a.height);
    }

    if !ab.simple_prompt {
        let _ = writeln!(user, "\n{CONSTRAINT_HEADING}");
        for (i, rule) in HARD_CONSTRAINTS.iter().enumerate() {
            let _ = writeln!(user, "{}. [HARD] {rule}", i + 1);
        }
    }

    if !ab.no_structural {
        let reminders = coordinate_reminders(doc);
        if !reminders.is_empty() {
            let _ = writeln!(user, "\n{REMINDER_HEADING}");
            for r in reminders {
                let _ = writeln!(user, "{r}");
            }
        }
    }

    let attachments = match (&options.screenshot, ab.no_attachments) {
        (Some(path), false) => vec![Attachment::from_file(path).map_err(|source| PromptError::Io { path: path.clone(), source })?],
        _ => Vec::new(),
    };

    Ok(PromptBundle {
        system: if ab.simple_prompt { SIMPLE_SYSTEM.to_string() } else { SYSTEM_RULES.to_string() },
        example: if ab.simple_prompt { String::new() } else { example_text() },
        user,
        attachments,
        constraint_echo: ConstraintEcho::from_document(doc),
    })
}

const HARD_CONSTRAINTS: &[&str] = &[
    "Positions come only from the structural prior above; do not estimate them from the screenshot.",
    "Image sizes come only from the asset list (true asset dimensions), never from the design.",
    "Images are referenced via background-image with the listed filename.",
    "Text is generated only for elements with type=text, using the given string verbatim.",
    "All top/left coordinates are integers in px, relative to the parent element.",
    "Assign separate z-index values following the design order (later = higher).",
    "Out-of-bound placement is prohibited; do not overlap elements the design does not stack.",
];

/// `  - e3 text "title" at (24, 16) size 200x32 text "Hello"`.
///
/// Bound images carry their asset instead of a size; opacity and other style
/// fields are left out.
fn structure_lines(e: &ElementNode, level: usize, out: &mut String) {
    let _ = write!(out, "{}- {} {} {:?} at ({}, {})", "  ".repeat(level), e.id, e.kind.as_str(), e.name, e.position.x, e.position.y);
    match (&e.kind, &e.asset_ref) {
        (ElementType::Image, Some(asset)) => {
            let _ = write!(out, " asset {asset}");
        }
        _ => {
            let _ = write!(out, " size {}x{}", e.size.width, e.size.height);
        }
    }
    if let Some(t) = &e.text_content {
        let _ = write!(out, " text {t:?}");
    }
    out.push('\n');
    for c in &e.children {
        structure_lines(c, level + 1, out);
    }
}

/// Per-element reminders for list/grid items: runs of three or more siblings
/// sharing type and size. Coordinates are given as CSS offsets from the parent.
fn coordinate_reminders(doc: &DesignDocument) -> Vec<String> {
    let mut out = Vec::new();
    fn visit(siblings: &[ElementNode], parent: Option<&ElementNode>, out: &mut Vec<String>) {
        let mut groups: BTreeMap<(ElementType, i64, i64), Vec<&ElementNode>> = BTreeMap::new();
        for e in siblings {
            groups.entry((e.kind, e.size.width, e.size.height)).or_default().push(e);
        }
        let (px, py) = parent.map(|p| (p.position.x, p.position.y)).unwrap_or((0, 0));
        for e in siblings {
            let key = (e.kind, e.size.width, e.size.height);
            if groups[&key].len() >= 3 {
                out.push(format!("- {} ({}): left: {}px; top: {}px;", e.id, e.name, e.position.x - px, e.position.y - py));
            }
        }
        for e in siblings {
            visit(&e.children, Some(e), out);
        }
    }
    visit(&doc.elements, None, &mut out);
    out
}

/// Stable content digest of a bundle (system, example, user, attachment hashes).
pub fn hash_prompt(bundle: &PromptBundle) -> String {
    let mut h = Sha256::new();
    for (tag, part) in [("system", &bundle.system), ("example", &bundle.example), ("user", &bundle.user)] {
        h.update(tag.as_bytes());
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    for a in &bundle.attachments {
        h.update(b"attachment");
        h.update(a.sha256.as_bytes());
    }
    hex(&h.finalize())
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl PromptBundle {
    /// Writes `system.txt`, `example.txt`, `user.txt`, `constraints.json` and
    /// `attachments.json` into `dir`.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<(), PromptError> {
        let dir = dir.as_ref();
        let io = |path: PathBuf| move |source| PromptError::Io { path, source };
        std::fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
        let files = [
            ("system.txt", self.system.clone()),
            ("example.txt", self.example.clone()),
            ("user.txt", self.user.clone()),
            ("constraints.json", serde_json::to_string_pretty(&self.constraint_echo)? + "\n"),
            ("attachments.json", serde_json::to_string_pretty(&self.attachments)? + "\n"),
        ];
        for (name, content) in files {
            let path = dir.join(name);
            std::fs::write(&path, content).map_err(io(path.clone()))?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|source| PromptError::Io { path, source })
        };
        let attachments = match read("attachments.json") {
            Ok(s) => serde_json::from_str(&s)?,
            Err(_) => Vec::new(),
        };
        Ok(Self {
            system: read("system.txt")?,
            example: read("example.txt")?,
            user: read("user.txt")?,
            attachments,
            constraint_echo: serde_json::from_str(&read("constraints.json")?)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::{AssetRecord, ImageFormat};
    use crate::design::{Position, Size};

    fn image(id: &str, name: &str, x: i64, y: i64, w: i64, h: i64, asset: Option<&str>) -> ElementNode {
        ElementNode {
            id: id.into(),
            name: name.into(),
            position: Position { x, y },
            size: Size { width: w, height: h },
            kind: ElementType::Image,
            text_content: None,
            asset_ref: asset.map(str::to_string),
            opacity: 1.0,
            z_hint: 0,
            children: vec![],
        }
    }

    fn one_image_doc() -> DesignDocument {
        DesignDocument {
            dimensions: Dimensions { width: 780, height: 1760 },
            elements: vec![image("e1", "hero", 10, 20, 120, 40, Some("hero.png"))],
            assets: vec![AssetRecord { file: "hero.png".into(), path: "hero.png".into(), width: 120, height: 40, format: ImageFormat::Png }],
        }
    }

    fn section<'a>(user: &'a str, heading: &str) -> &'a str {
        let start = user.find(heading).map(|i| i + heading.len()).unwrap_or(user.len());
        let rest = &user[start..];
        let end = rest.find("\n## ").unwrap_or(rest.len());
        &rest[..end]
    }

    #[test]
    fn one_image_structure() {
        let b = build_prompt(&one_image_doc(), &PromptOptions::default()).unwrap();
        let structure = section(&b.user, STRUCTURE_HEADING);
        assert_eq!(structure.lines().filter(|l| l.trim_start().starts_with("- ")).count(), 1);
        assert!(structure.contains("at (10, 20) asset hero.png"));
        assert!(!structure.contains("120x40"), "bound image must not carry a size");
        let assets = section(&b.user, ASSET_HEADING);
        assert_eq!(assets.lines().filter(|l| l.starts_with("- ")).count(), 1);
        assert!(b.system.contains("exactly two fenced code blocks"));
    }

    #[test]
    fn reminders_for_list_items() {
        let mut doc = one_image_doc();
        doc.elements = (0..4).map(|i| image(&format!("e{}", i + 1), "item", 0, i * 50, 100, 40, None)).collect();
        let b = build_prompt(&doc, &PromptOptions::default()).unwrap();
        let reminders = section(&b.user, REMINDER_HEADING);
        assert_eq!(reminders.lines().filter(|l| l.starts_with("- ")).count(), 4);
    }

    #[test]
    fn empty_document() {
        let mut doc = one_image_doc();
        doc.elements.clear();
        assert!(matches!(build_prompt(&doc, &PromptOptions::default()), Err(PromptError::EmptyDocument)));
    }

    #[test]
    fn digest_tracks_content() {
        let doc = one_image_doc();
        let a = build_prompt(&doc, &PromptOptions::default()).unwrap();
        let b = build_prompt(&doc, &PromptOptions::default()).unwrap();
        assert_eq!(hash_prompt(&a), hash_prompt(&b));
        let mut moved = doc.clone();
        moved.elements[0].position.x += 1;
        let c = build_prompt(&moved, &PromptOptions::default()).unwrap();
        assert_ne!(hash_prompt(&a), hash_prompt(&c));
    }

    #[test]
    fn ablation_names() {
        assert!(Ablation::from_name("no_structural").unwrap().no_structural);
        assert!(Ablation::from_name("simple-prompt").unwrap().simple_prompt);
        assert_eq!(Ablation::from_name("none"), Some(Ablation::default()));
        assert_eq!(Ablation::from_name("bogus"), None);
    }
}
