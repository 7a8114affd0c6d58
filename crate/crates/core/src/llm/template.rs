//! Deterministic generator: absolute-positioned markup straight from the
//! constraint echo, one class per element. Its output is valid by
//! construction and reproduces the document's boxes exactly.

use std::fmt::Write as _;

use crate::codecheck::normalize_class;
use crate::codecheck::jsx::escape_text;
use crate::design::ElementType;
use crate::prompt::{ConstraintEcho, EchoElement};

/// Root class of every template page.
pub const PAGE_CLASS: &str = "page";

/// `e3` + `Hero Banner` → `e3-hero-banner`.
pub fn class_for(id: &str, name: &str) -> String {
    let mut slug = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            slug.push(c.to_ascii_lowercase());
        } else if !slug.ends_with('-') {
            slug.push('-');
        }
        if slug.len() >= 24 {
            break;
        }
    }
    let slug = slug.trim_matches('-');
    let raw = if slug.is_empty() { id.to_string() } else { format!("{id}-{slug}") };
    normalize_class(&raw)
}

/// Full two-block response.
pub fn render_response(echo: &ConstraintEcho) -> String {
    let (jsx, scss) = render_code(echo);
    format!("```jsx\n{jsx}```\n\n```scss\n{scss}```\n")
}

pub fn render_code(echo: &ConstraintEcho) -> (String, String) {
    let mut jsx = String::from("import './index.scss';\n\nexport default function Page() {\n  return (\n");
    jsx.push_str(&format!("    <div className=\"{PAGE_CLASS}\">\n"));
    let roots: Vec<&EchoElement> = echo.elements.iter().filter(|e| e.parent.is_none()).collect();
    for e in &roots {
        write_element(echo, e, 3, &mut jsx);
    }
    jsx.push_str("    </div>\n  );\n}\n");

    let mut scss = String::new();
    let _ = writeln!(
        scss,
        ".{PAGE_CLASS} {{\n  position: relative;\n  left: 0px;\n  top: 0px;\n  width: {}px;\n  height: {}px;\n  overflow: hidden;\n}}",
        echo.page.width, echo.page.height
    );
    for e in &echo.elements {
        let (px, py) = match e.parent.as_deref().and_then(|p| echo.element(p)) {
            Some(p) => (p.x, p.y),
            None => (0, 0),
        };
        let _ = write!(
            scss,
            "\n.{} {{\n  position: absolute;\n  left: {}px;\n  top: {}px;\n  width: {}px;\n  height: {}px;\n  z-index: {};\n",
            class_for(&e.id, &e.name),
            e.x - px,
            e.y - py,
            e.width,
            e.height,
            e.z
        );
        if e.opacity < 1.0 {
            let _ = writeln!(scss, "  opacity: {};", e.opacity);
        }
        if e.kind == ElementType::Image {
            if let Some(asset) = &e.asset {
                let _ = writeln!(scss, "  background-image: url(\"assets/{asset}\");\n  background-size: 100% 100%;");
            }
        }
        if e.kind == ElementType::Text {
            // Largest glyph height that fits the box, in whole pixels.
            let _ = writeln!(scss, "  font-size: {}px;\n  color: #222222;\n  white-space: nowrap;", e.height.clamp(1, 64));
        }
        scss.push_str("}\n");
    }
    (jsx, scss)
}

fn write_element(echo: &ConstraintEcho, e: &EchoElement, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    let class = class_for(&e.id, &e.name);
    match e.kind {
        ElementType::Container => {
            let children: Vec<&EchoElement> = echo.elements.iter().filter(|c| c.parent.as_deref() == Some(e.id.as_str())).collect();
            if children.is_empty() {
                let _ = writeln!(out, "{pad}<div className=\"{class}\" />");
                return;
            }
            let _ = writeln!(out, "{pad}<div className=\"{class}\">");
            for c in children {
                write_element(echo, c, indent + 1, out);
            }
            let _ = writeln!(out, "{pad}</div>");
        }
        ElementType::Text => {
            let text = e.text.as_deref().unwrap_or("").split_whitespace().collect::<Vec<_>>().join(" ");
            let _ = writeln!(out, "{pad}<p className=\"{class}\">{}</p>", escape_text(&text));
        }
        ElementType::Image => match &e.asset {
            Some(_) => {
                let _ = writeln!(out, "{pad}<div className=\"{class}\" />");
            }
            // Placeholder; the validator reports it as an unbound image.
            None => {
                let _ = writeln!(out, "{pad}<img className=\"{class}\" alt=\"{}\" />", escape_text(&e.name));
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_names() {
        assert_eq!(class_for("e3", "Hero Banner"), "e3-hero-banner");
        assert_eq!(class_for("e4", "图层 1"), "e4-1");
        assert_eq!(class_for("e5", "!!!"), "e5");
        assert_eq!(class_for("e6", "a very very long layer name indeed"), "e6-a-very-very-long-layer-n");
    }
}
