//! Checks model output: the two fenced blocks, a closed JSX dialect, a small
//! SCSS subset, and the absolute layout they describe.

mod extract;
pub(crate) mod jsx;
pub(crate) mod layout;
pub(crate) mod scss;
mod validate;

use serde::{Deserialize, Serialize};

pub use crate::layers::{Finding as Violation, Severity};
pub use extract::{extract_blocks, GeneratedCode, ProtocolError};
pub use jsx::{parse_jsx, JsxChild, JsxError, JsxNode, JsxTree, ALLOWED_ATTRIBUTES, ALLOWED_TAGS};
pub use layout::{compute_layout, BoxKind, ComputedBox, ComputedLayout, LayoutError};
pub use scss::{parse_scss, Declaration, ScssError, StyleRule, StyleSheet, StyleValue};
pub use validate::{validate, validate_response, PositionDeviation, ValidationReport};

/// Source position, 1-based line and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourcePos {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
}

impl SourcePos {
    pub(crate) fn locate(src: &str, offset: usize) -> Self {
        let offset = offset.min(src.len());
        let before = &src[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rfind('\n').map(|i| before[i + 1..].chars().count()).unwrap_or(before.chars().count()) + 1;
        Self { offset, line, column }
    }
}

impl std::fmt::Display for SourcePos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// Kebab-case form of a class name: `heroBanner`, `Hero_Banner` → `hero-banner`.
pub fn normalize_class(name: &str) -> String {
    let mut out = String::with_capacity(name.len() + 4);
    let mut prev_lower_or_digit = false;
    for c in name.chars() {
        if c == '_' || c == '-' || c.is_whitespace() {
            if !out.ends_with('-') && !out.is_empty() {
                out.push('-');
            }
            prev_lower_or_digit = false;
        } else if c.is_uppercase() {
            if prev_lower_or_digit && !out.ends_with('-') {
                out.push('-');
            }
            out.extend(c.to_lowercase());
            prev_lower_or_digit = false;
        } else {
            out.push(c);
            prev_lower_or_digit = c.is_lowercase() || c.is_ascii_digit();
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    out
}

pub(crate) fn violation(code: &str, severity: Severity, message: impl Into<String>, element: Option<String>) -> Violation {
    Violation { code: code.to_string(), severity, message: message.into(), element }
}
