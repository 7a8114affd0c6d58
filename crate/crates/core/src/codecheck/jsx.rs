//! Parser for the closed JSX dialect: a single root element built from
//! `div`, `span`, `img`, `p` and `h1`-`h6`, with string-valued `className`,
//! `src` and `alt` attributes and brace-free text.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{normalize_class, SourcePos};

pub const ALLOWED_TAGS: &[&str] = &["div", "span", "img", "p", "h1", "h2", "h3", "h4", "h5", "h6"];
pub const ALLOWED_ATTRIBUTES: &[&str] = &["className", "src", "alt"];

/// Tags whose element-free contents count as text.
pub(crate) const TEXT_TAGS: &[&str] = &["span", "p", "h1", "h2", "h3", "h4", "h5", "h6"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JsxError {
    #[error("jsx syntax error at {pos}: {message}")]
    Syntax { pos: SourcePos, message: String },
    #[error("disallowed attribute '{name}' at {pos}")]
    DisallowedAttribute { name: String, pos: SourcePos },
    #[error("disallowed tag <{name}> at {pos}")]
    DisallowedTag { name: String, pos: SourcePos },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum JsxChild {
    Element(JsxNode),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsxNode {
    pub tag: String,
    /// Kebab-normalized classes, in source order.
    pub classes: Vec<String>,
    /// `src` / `alt` values.
    pub attributes: Vec<(String, String)>,
    pub children: Vec<JsxChild>,
}

impl JsxNode {
    pub fn attribute(&self, name: &str) -> Option<&str> {
        self.attributes.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
    }

    pub fn element_children(&self) -> impl Iterator<Item = &JsxNode> {
        self.children.iter().filter_map(|c| match c {
            JsxChild::Element(e) => Some(e),
            JsxChild::Text(_) => None,
        })
    }

    /// Concatenated direct text children, `None` if there are none.
    pub fn text(&self) -> Option<String> {
        let parts: Vec<&str> = self
            .children
            .iter()
            .filter_map(|c| match c {
                JsxChild::Text(t) => Some(t.as_str()),
                JsxChild::Element(_) => None,
            })
            .collect();
        if parts.is_empty() {
            None
        } else {
            Some(parts.join(" "))
        }
    }

    pub fn count(&self) -> usize {
        1 + self.element_children().map(JsxNode::count).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsxTree {
    pub root: JsxNode,
    /// Class names that were not already kebab-case, as `original -> normalized`.
    pub renamed_classes: Vec<String>,
}

/// Accepts `import '...';` lines and a bare `export default function X() { return ( ... ); }`
/// around the markup; anything else outside the root element is rejected.
fn unwrap_component(src: &str) -> (usize, usize) {
    static WRAPPER: OnceLock<Regex> = OnceLock::new();
    let re = WRAPPER.get_or_init(|| {
        Regex::new(
            r#"(?s)^\s*(?:import\s+['"][^'"\n]+['"]\s*;\s*)*(?:export\s+default\s+)?function\s+[A-Za-z_]\w*\s*\(\s*\)\s*\{\s*return\s*\((?P<body>.*)\)\s*;?\s*\}\s*;?\s*$"#,
        )
        .expect("valid regex")
    });
    match re.captures(src).and_then(|c| c.name("body")) {
        Some(m) => (m.start(), m.end()),
        None => (0, src.len()),
    }
}

pub fn parse_jsx(src: &str) -> Result<JsxTree, JsxError> {
    let (start, end) = unwrap_component(src);
    let mut p = Parser { src, pos: start, end, renamed: Vec::new() };
    p.skip_ws();
    if p.pos >= p.end || p.peek() != Some('<') {
        return Err(p.syntax("expected a root element"));
    }
    let root = p.element()?;
    p.skip_ws();
    if p.pos < p.end {
        return Err(p.syntax("unexpected content after the root element"));
    }
    Ok(JsxTree { root, renamed_classes: p.renamed })
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    end: usize,
    renamed: Vec<String>,
}

impl Parser<'_> {
    fn rest(&self) -> &str {
        &self.src[self.pos..self.end]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn here(&self) -> SourcePos {
        SourcePos::locate(self.src, self.pos)
    }

    fn syntax(&self, message: impl Into<String>) -> JsxError {
        JsxError::Syntax { pos: self.here(), message: message.into() }
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == ':' || c == '.') {
            self.bump();
        }
        self.src[start..self.pos].to_string()
    }

    fn element(&mut self) -> Result<JsxNode, JsxError> {
        let open_pos = self.here();
        if !self.eat("<") {
            return Err(self.syntax("expected '<'"));
        }
        let tag = self.ident();
        if tag.is_empty() {
            return Err(self.syntax("expected a tag name (fragments are not allowed)"));
        }
        if !ALLOWED_TAGS.contains(&tag.as_str()) {
            return Err(JsxError::DisallowedTag { name: tag, pos: open_pos });
        }
        let mut node = JsxNode { tag, classes: Vec::new(), attributes: Vec::new(), children: Vec::new() };

        loop {
            self.skip_ws();
            if self.eat("/>") {
                return Ok(node);
            }
            if self.eat(">") {
                break;
            }
            if self.peek().is_none() {
                return Err(self.syntax(format!("unclosed <{}> tag", node.tag)));
            }
            self.attribute(&mut node)?;
        }

        loop {
            if self.rest().starts_with("</") {
                self.pos += 2;
                let close = self.ident();
                if close != node.tag {
                    return Err(self.syntax(format!("expected </{}>, found </{}>", node.tag, close)));
                }
                self.skip_ws();
                if !self.eat(">") {
                    return Err(self.syntax("expected '>' in closing tag"));
                }
                return Ok(node);
            }
            match self.peek() {
                None => return Err(self.syntax(format!("<{}> is never closed", node.tag))),
                Some('<') => {
                    let child = self.element()?;
                    node.children.push(JsxChild::Element(child));
                }
                Some(_) => {
                    if let Some(text) = self.text()? {
                        node.children.push(JsxChild::Text(text));
                    }
                }
            }
        }
    }

    fn attribute(&mut self, node: &mut JsxNode) -> Result<(), JsxError> {
        let pos = self.here();
        let name = self.ident();
        if name.is_empty() {
            return Err(self.syntax(format!("unexpected character {:?} in tag", self.peek().unwrap_or(' '))));
        }
        if !ALLOWED_ATTRIBUTES.contains(&name.as_str()) {
            return Err(JsxError::DisallowedAttribute { name, pos });
        }
        self.skip_ws();
        let value = if self.eat("=") {
            self.skip_ws();
            match self.peek() {
                Some(q @ ('"' | '\'')) => {
                    self.bump();
                    let start = self.pos;
                    while self.peek().is_some_and(|c| c != q) {
                        self.bump();
                    }
                    if self.peek().is_none() {
                        return Err(self.syntax("unterminated attribute value"));
                    }
                    let v = decode_entities(&self.src[start..self.pos]);
                    self.bump();
                    v
                }
                Some('{') => return Err(self.syntax(format!("script expression in attribute '{name}'"))),
                _ => return Err(self.syntax(format!("expected a quoted value for '{name}'"))),
            }
        } else {
            String::new()
        };
        if name == "className" {
            for class in value.split_whitespace() {
                let norm = normalize_class(class);
                if norm != class {
                    self.renamed.push(format!("{class} -> {norm}"));
                }
                node.classes.push(norm);
            }
        } else {
            node.attributes.push((name, value));
        }
        Ok(())
    }

    fn text(&mut self) -> Result<Option<String>, JsxError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            match c {
                '<' => break,
                '{' | '}' => return Err(self.syntax("script expressions are not allowed in text")),
                '>' => return Err(self.syntax("unescaped '>' in text")),
                _ => {
                    self.bump();
                }
            }
        }
        let raw = decode_entities(&self.src[start..self.pos]);
        let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
        Ok(if collapsed.is_empty() { None } else { Some(collapsed) })
    }
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        rest = &rest[i..];
        let decoded = rest.find(';').filter(|&j| j <= 10).and_then(|j| {
            let ent = &rest[1..j];
            let c = match ent {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" => Some('\''),
                "nbsp" => Some('\u{a0}'),
                _ if ent.starts_with("#x") || ent.starts_with("#X") => u32::from_str_radix(&ent[2..], 16).ok().and_then(char::from_u32),
                _ if ent.starts_with('#') => ent[1..].parse().ok().and_then(char::from_u32),
                _ => None,
            };
            c.map(|c| (c, j))
        });
        match decoded {
            Some((c, j)) => {
                out.push(c);
                rest = &rest[j + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Escapes text for use inside the dialect (no braces, no angle brackets).
pub(crate) fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '{' => out.push_str("&#123;"),
            '}' => out.push_str("&#125;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}
