//! A small SCSS subset: class rules, one level of nesting (`.a { .b { } }`
//! means `.a .b`), `$variables`, and comments. At-rules and non-class
//! selectors are skipped with a warning.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{normalize_class, violation, Severity, SourcePos, Violation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScssError {
    #[error("scss syntax error at {pos}: {message}")]
    Syntax { pos: SourcePos, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleValue {
    Px(i64),
    Int(i64),
    Number(f64),
    Color([u8; 4]),
    Url(String),
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Declaration {
    pub property: String,
    pub value: StyleValue,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleRule {
    /// Class path; `["page", "hero"]` is `.page .hero`.
    pub selector: Vec<String>,
    pub declarations: Vec<Declaration>,
}

impl StyleRule {
    pub fn selector_text(&self) -> String {
        self.selector.iter().map(|c| format!(".{c}")).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StyleSheet {
    /// Source order.
    pub rules: Vec<StyleRule>,
    pub violations: Vec<Violation>,
}

impl StyleSheet {
    /// Flat view: selector text → property → value, later rules winning.
    pub fn flattened(&self) -> BTreeMap<String, BTreeMap<String, StyleValue>> {
        let mut out: BTreeMap<String, BTreeMap<String, StyleValue>> = BTreeMap::new();
        for r in &self.rules {
            let entry = out.entry(r.selector_text()).or_default();
            for d in &r.declarations {
                entry.insert(d.property.clone(), d.value.clone());
            }
        }
        out
    }
}

const LENGTH_PROPERTIES: &[&str] = &["top", "left", "width", "height", "font-size"];
const KNOWN_PROPERTIES: &[&str] = &[
    "position",
    "top",
    "left",
    "width",
    "height",
    "z-index",
    "background-image",
    "background-color",
    "font-size",
    "color",
    "opacity",
];
/// Accepted without effect on layout.
const IGNORED_PROPERTIES: &[&str] = &["background-size", "background-repeat", "background-position", "line-height", "font-weight", "font-family", "white-space", "overflow", "box-sizing", "text-align"];

pub fn parse_scss(src: &str) -> Result<StyleSheet, ScssError> {
    let mut p = Parser { src, pos: 0, vars: BTreeMap::new(), sheet: StyleSheet::default() };
    p.items(&[], 0)?;
    Ok(p.sheet)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    vars: BTreeMap<String, String>,
    sheet: StyleSheet,
}

enum Item {
    Declaration(String, usize),
    Block(String, usize),
    End,
    Eof,
}

impl Parser<'_> {
    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn syntax(&self, at: usize, message: impl Into<String>) -> ScssError {
        ScssError::Syntax { pos: SourcePos::locate(self.src, at), message: message.into() }
    }

    fn line_at(&self, at: usize) -> usize {
        SourcePos::locate(self.src, at).line
    }

    fn skip_trivia(&mut self) -> Result<(), ScssError> {
        loop {
            let trimmed = self.rest().trim_start();
            self.pos = self.src.len() - trimmed.len();
            if self.rest().starts_with("//") {
                self.pos += self.rest().find('\n').unwrap_or(self.rest().len());
            } else if self.rest().starts_with("/*") {
                let end = self.rest().find("*/").ok_or_else(|| self.syntax(self.pos, "unterminated comment"))?;
                self.pos += end + 2;
            } else {
                return Ok(());
            }
        }
    }

    /// Reads up to the next `;`, `{` or `}` outside quotes and parentheses.
    fn next_item(&mut self) -> Result<Item, ScssError> {
        self.skip_trivia()?;
        let start = self.pos;
        if self.rest().is_empty() {
            return Ok(Item::Eof);
        }
        if self.rest().starts_with('}') {
            self.pos += 1;
            return Ok(Item::End);
        }
        let mut quote: Option<char> = None;
        let mut parens = 0usize;
        for (i, c) in self.rest().char_indices() {
            match (quote, c) {
                (Some(q), c) if c == q => quote = None,
                (Some(_), _) => {}
                (None, '"' | '\'') => quote = Some(c),
                (None, '(') => parens += 1,
                (None, ')') => parens = parens.saturating_sub(1),
                (None, ';') if parens == 0 => {
                    let text = self.rest()[..i].trim().to_string();
                    self.pos += i + 1;
                    return Ok(Item::Declaration(text, start));
                }
                (None, '{') if parens == 0 => {
                    let text = self.rest()[..i].trim().to_string();
                    self.pos += i + 1;
                    return Ok(Item::Block(text, start));
                }
                (None, '}') if parens == 0 => {
                    // Last declaration without a trailing semicolon.
                    let text = self.rest()[..i].trim().to_string();
                    self.pos += i;
                    return Ok(Item::Declaration(text, start));
                }
                _ => {}
            }
        }
        if quote.is_some() {
            return Err(self.syntax(start, "unterminated string"));
        }
        Err(self.syntax(start, "expected ';', '{' or '}'"))
    }

    /// Parses items until the enclosing block ends. `path` is the selector
    /// path of the enclosing rule (empty at top level).
    fn items(&mut self, path: &[String], depth: usize) -> Result<Vec<Declaration>, ScssError> {
        let mut decls = Vec::new();
        loop {
            match self.next_item()? {
                Item::Eof if depth == 0 => return Ok(decls),
                Item::Eof => return Err(self.syntax(self.pos, "unexpected end of input: missing '}'")),
                Item::End if depth == 0 => return Err(self.syntax(self.pos - 1, "unmatched '}'")),
                Item::End => return Ok(decls),
                Item::Declaration(text, at) if text.is_empty() => {
                    let _ = at;
                }
                Item::Declaration(text, at) => {
                    if let Some(rest) = text.strip_prefix('$') {
                        let (name, value) = rest.split_once(':').ok_or_else(|| self.syntax(at, "expected '$name: value'"))?;
                        let value = self.substitute(value.trim());
                        self.vars.insert(name.trim().to_string(), value);
                    } else if text.starts_with('@') {
                        self.sheet.violations.push(violation("unsupported-at-rule", Severity::Warning, format!("skipped '{text}'"), None));
                    } else if depth == 0 {
                        return Err(self.syntax(at, format!("declaration outside a rule: '{text}'")));
                    } else if let Some(d) = self.declaration(&text, at)? {
                        decls.push(d);
                    }
                }
                Item::Block(selector, at) => {
                    if selector.starts_with('@') {
                        self.sheet.violations.push(violation("unsupported-at-rule", Severity::Warning, format!("skipped block '{selector}'"), None));
                        self.skip_block(at)?;
                        continue;
                    }
                    if depth >= 2 {
                        return Err(self.syntax(at, "rules may nest only one level deep"));
                    }
                    let Some(classes) = self.class_path(&selector, at)? else {
                        self.skip_block(at)?;
                        continue;
                    };
                    let mut full: Vec<String> = path.to_vec();
                    full.extend(classes);
                    let index = self.sheet.rules.len();
                    self.sheet.rules.push(StyleRule { selector: full.clone(), declarations: Vec::new() });
                    let body = self.items(&full, depth + 1)?;
                    self.sheet.rules[index].declarations = body;
                }
            }
        }
    }

    fn skip_block(&mut self, at: usize) -> Result<(), ScssError> {
        let mut level = 1usize;
        for (i, c) in self.rest().char_indices() {
            match c {
                '{' => level += 1,
                '}' => {
                    level -= 1;
                    if level == 0 {
                        self.pos += i + 1;
                        return Ok(());
                    }
                }
                _ => {}
            }
        }
        Err(self.syntax(at, "unterminated block"))
    }

    /// `.a`, `.a .b` → class names. Other selectors are skipped with a warning.
    fn class_path(&mut self, selector: &str, at: usize) -> Result<Option<Vec<String>>, ScssError> {
        let mut out = Vec::new();
        for part in selector.split_whitespace() {
            let valid = part.len() > 1
                && part.starts_with('.')
                && part[1..].chars().all(|c| c.is_alphanumeric() || c == '-' || c == '_');
            if !valid {
                self.sheet.violations.push(violation(
                    "unsupported-selector",
                    Severity::Warning,
                    format!("skipped rule '{selector}' at line {}", self.line_at(at)),
                    None,
                ));
                return Ok(None);
            }
            let raw = &part[1..];
            let norm = normalize_class(raw);
            if norm != raw {
                self.sheet.violations.push(violation("class-normalized", Severity::Warning, format!("class '{raw}' normalized to '{norm}'"), None));
            }
            out.push(norm);
        }
        if out.is_empty() {
            return Err(self.syntax(at, "empty selector"));
        }
        Ok(Some(out))
    }

    fn substitute(&self, value: &str) -> String {
        let mut out = value.to_string();
        // Longest names first so `$a` does not clobber `$ab`.
        let mut names: Vec<&String> = self.vars.keys().collect();
        names.sort_by_key(|n| std::cmp::Reverse(n.len()));
        for name in names {
            out = out.replace(&format!("${name}"), &self.vars[name]);
        }
        out
    }

    fn declaration(&mut self, text: &str, at: usize) -> Result<Option<Declaration>, ScssError> {
        let line = self.line_at(at);
        let (prop, value) = text.split_once(':').ok_or_else(|| self.syntax(at, format!("expected 'property: value', found '{text}'")))?;
        let property = prop.trim().to_ascii_lowercase();
        let raw = self.substitute(value.trim());
        let raw = raw.trim_end_matches("!important").trim();
        if property.is_empty() || raw.is_empty() {
            return Err(self.syntax(at, "empty property or value"));
        }
        if !KNOWN_PROPERTIES.contains(&property.as_str()) {
            if !IGNORED_PROPERTIES.contains(&property.as_str()) {
                self.sheet.violations.push(violation("unknown-property", Severity::Warning, format!("unknown property '{property}' at line {line}"), None));
            }
            return Ok(Some(Declaration { property, value: StyleValue::Keyword(raw.to_string()), line }));
        }
        let value = if LENGTH_PROPERTIES.contains(&property.as_str()) {
            match parse_length(raw) {
                Length::Int(v) => StyleValue::Px(v),
                Length::Fraction(v) => {
                    self.sheet.violations.push(violation(
                        "non-integer-coordinate",
                        Severity::Error,
                        format!("non-integer coordinate {property}: {raw} at line {line}"),
                        None,
                    ));
                    StyleValue::Px(v.round() as i64)
                }
                Length::Unsupported => {
                    self.sheet.violations.push(violation("non-pixel-length", Severity::Error, format!("{property}: {raw} is not a pixel length (line {line})"), None));
                    return Ok(None);
                }
            }
        } else {
            match property.as_str() {
                "z-index" => match raw.parse::<i64>() {
                    Ok(z) => StyleValue::Int(z),
                    Err(_) => {
                        self.sheet.violations.push(violation("bad-value", Severity::Error, format!("z-index: {raw} is not an integer (line {line})"), None));
                        return Ok(None);
                    }
                },
                "opacity" => match raw.parse::<f64>() {
                    Ok(v) if (0.0..=1.0).contains(&v) => StyleValue::Number(v),
                    _ => {
                        self.sheet.violations.push(violation("bad-value", Severity::Error, format!("opacity: {raw} outside [0, 1] (line {line})"), None));
                        return Ok(None);
                    }
                },
                "background-color" | "color" => match parse_color(raw) {
                    Some(c) => StyleValue::Color(c),
                    None => {
                        self.sheet.violations.push(violation("bad-value", Severity::Warning, format!("unrecognized color '{raw}' (line {line})"), None));
                        return Ok(None);
                    }
                },
                "background-image" => match parse_url(raw) {
                    Some(u) => StyleValue::Url(u),
                    None => {
                        self.sheet.violations.push(violation("bad-value", Severity::Error, format!("background-image must be url(...), found '{raw}' (line {line})"), None));
                        return Ok(None);
                    }
                },
                _ => StyleValue::Keyword(raw.to_string()),
            }
        };
        Ok(Some(Declaration { property, value, line }))
    }
}

enum Length {
    Int(i64),
    Fraction(f64),
    Unsupported,
}

fn parse_length(raw: &str) -> Length {
    let num = raw.strip_suffix("px").unwrap_or(if raw == "0" { "0" } else { "" });
    if num.is_empty() {
        return Length::Unsupported;
    }
    if let Ok(v) = num.parse::<i64>() {
        return Length::Int(v);
    }
    match num.parse::<f64>() {
        Ok(v) if v.is_finite() => {
            if v.fract() == 0.0 {
                Length::Int(v as i64)
            } else {
                Length::Fraction(v)
            }
        }
        _ => Length::Unsupported,
    }
}

fn parse_url(raw: &str) -> Option<String> {
    let inner = raw.strip_prefix("url(")?.strip_suffix(')')?.trim();
    let unquoted = inner
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .or_else(|| inner.strip_prefix('\'').and_then(|s| s.strip_suffix('\'')))
        .unwrap_or(inner);
    if unquoted.is_empty() {
        None
    } else {
        Some(unquoted.to_string())
    }
}

pub(crate) fn parse_color(raw: &str) -> Option<[u8; 4]> {
    let raw = raw.trim().to_ascii_lowercase();
    if let Some(hex) = raw.strip_prefix('#') {
        let digits: Vec<u8> = hex.chars().map(|c| c.to_digit(16).map(|d| d as u8)).collect::<Option<_>>()?;
        return match digits.len() {
            3 => Some([digits[0] * 17, digits[1] * 17, digits[2] * 17, 255]),
            4 => Some([digits[0] * 17, digits[1] * 17, digits[2] * 17, digits[3] * 17]),
            6 => Some([digits[0] * 16 + digits[1], digits[2] * 16 + digits[3], digits[4] * 16 + digits[5], 255]),
            8 => Some([digits[0] * 16 + digits[1], digits[2] * 16 + digits[3], digits[4] * 16 + digits[5], digits[6] * 16 + digits[7]]),
            _ => None,
        };
    }
    if let Some(args) = raw.strip_prefix("rgba(").or_else(|| raw.strip_prefix("rgb(")).and_then(|s| s.strip_suffix(')')) {
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        if parts.len() < 3 || parts.len() > 4 {
            return None;
        }
        let mut c = [0u8, 0, 0, 255];
        for i in 0..3 {
            c[i] = parts[i].parse::<u16>().ok().filter(|v| *v <= 255)? as u8;
        }
        if let Some(a) = parts.get(3) {
            let a: f64 = a.parse().ok()?;
            c[3] = (a.clamp(0.0, 1.0) * 255.0).round() as u8;
        }
        return Some(c);
    }
    Some(match raw.as_str() {
        "white" => [255, 255, 255, 255],
        "black" => [0, 0, 0, 255],
        "red" => [255, 0, 0, 255],
        "green" => [0, 128, 0, 255],
        "blue" => [0, 0, 255, 255],
        "gray" | "grey" => [128, 128, 128, 255],
        "transparent" => [0, 0, 0, 0],
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_rule() {
        let s = parse_scss(".hero { position: absolute; top: 10px; left: 20px; width: 120px; height: 40px; }").unwrap();
        assert_eq!(s.rules.len(), 1);
        assert_eq!(s.rules[0].declarations.len(), 5);
        assert_eq!(s.rules[0].declarations[1].value, StyleValue::Px(10));
        assert!(s.violations.is_empty());
    }

    #[test]
    fn fractional_coordinate_flagged() {
        let s = parse_scss(".a { top: 10.5px; }").unwrap();
        assert_eq!(s.violations.len(), 1);
        assert!(s.violations[0].message.starts_with("non-integer coordinate"));
        assert_eq!(s.violations[0].severity, Severity::Error);
    }

    #[test]
    fn nesting_flattens() {
        let s = parse_scss("// c\n.page { width: 10px; /* x */ .hero { top: 1px } }\n.other{left:0}").unwrap();
        let selectors: Vec<String> = s.rules.iter().map(StyleRule::selector_text).collect();
        assert_eq!(selectors, vec![".page", ".page .hero", ".other"]);
        assert_eq!(s.rules[1].declarations[0].value, StyleValue::Px(1));
    }

    #[test]
    fn too_deep_and_unbalanced() {
        assert!(parse_scss(".a { .b { .c { top: 0; } } }").is_err());
        assert!(parse_scss(".a { top: 0;").is_err());
        assert!(parse_scss(".a { top: 0; } }").is_err());
        assert!(parse_scss("top: 0;").is_err());
    }

    #[test]
    fn variables_urls_colors() {
        let s = parse_scss("$gap: 12px;\n$ink: #336699;\n.a { left: $gap; color: $ink; background-image: url('assets/x.png'); background-color: rgba(0, 0, 0, 0.5); }").unwrap();
        let d = &s.rules[0].declarations;
        assert_eq!(d[0].value, StyleValue::Px(12));
        assert_eq!(d[1].value, StyleValue::Color([0x33, 0x66, 0x99, 255]));
        assert_eq!(d[2].value, StyleValue::Url("assets/x.png".into()));
        assert_eq!(d[3].value, StyleValue::Color([0, 0, 0, 128]));
    }

    #[test]
    fn unknown_property_and_selector_warn() {
        let s = parse_scss(".a { transform: rotate(3deg); }\ndiv > p { top: 0; }\n@media (x) { .a { top: 0; } }").unwrap();
        let codes: Vec<&str> = s.violations.iter().map(|v| v.code.as_str()).collect();
        assert_eq!(codes, vec!["unknown-property", "unsupported-selector", "unsupported-at-rule"]);
        assert!(s.violations.iter().all(|v| v.severity == Severity::Warning));
    }
}
