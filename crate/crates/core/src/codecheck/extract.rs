use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{violation, Severity, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolError {
    #[error("response has no jsx code block")]
    MissingJsx,
    #[error("response has no scss code block")]
    MissingScss,
    #[error("response has more than one jsx or scss block")]
    DuplicateBlock,
}

/// The two code blocks of a response plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCode {
    pub jsx: String,
    pub scss: String,
    #[serde(default)]
    pub source_digest: String,
    #[serde(default)]
    pub backend: String,
    /// Protocol deviations that did not prevent extraction.
    #[serde(default)]
    pub protocol_violations: Vec<Violation>,
}

impl GeneratedCode {
    pub fn new(jsx: impl Into<String>, scss: impl Into<String>) -> Self {
        Self { jsx: jsx.into(), scss: scss.into(), source_digest: String::new(), backend: String::new(), protocol_violations: Vec::new() }
    }

    pub fn with_provenance(mut self, digest: impl Into<String>, backend: impl Into<String>) -> Self {
        self.source_digest = digest.into();
        self.backend = backend.into();
        self
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Lang {
    Jsx,
    Scss,
    Other,
}

fn lang_of(info: &str) -> Lang {
    match info.split_whitespace().next().unwrap_or("").to_ascii_lowercase().as_str() {
        "jsx" | "tsx" | "javascript" | "js" | "react" => Lang::Jsx,
        "scss" | "css" | "sass" => Lang::Scss,
        _ => Lang::Other,
    }
}

/// Pulls exactly one jsx and one scss fenced block out of a response.
///
/// Text outside the fences and unlabelled blocks become warnings; the blocks
/// are still returned.
pub fn extract_blocks(response: &str) -> Result<GeneratedCode, ProtocolError> {
    let mut jsx: Option<String> = None;
    let mut scss: Option<String> = None;
    let mut outside = String::new();
    let mut violations = Vec::new();
    let mut duplicate = false;

    let mut lines = response.lines();
    while let Some(line) = lines.next() {
        let trimmed = line.trim_start();
        let Some(info) = trimmed.strip_prefix("```") else {
            outside.push_str(line);
            outside.push('\n');
            continue;
        };
        let lang = lang_of(info);
        let mut body = Vec::new();
        let mut closed = false;
        for inner in lines.by_ref() {
            if inner.trim() == "```" {
                closed = true;
                break;
            }
            body.push(inner);
        }
        if !closed {
            violations.push(violation("unclosed-fence", Severity::Warning, "code fence is never closed", None));
        }
        let text = body.join("\n");
        let slot = match lang {
            Lang::Jsx => &mut jsx,
            Lang::Scss => &mut scss,
            Lang::Other => {
                violations.push(violation("unlabelled-block", Severity::Warning, format!("ignored code block labelled {:?}", info.trim()), None));
                continue;
            }
        };
        if slot.is_some() {
            duplicate = true;
        }
        *slot = Some(text);
    }

    if duplicate {
        return Err(ProtocolError::DuplicateBlock);
    }
    let jsx = jsx.filter(|s| !s.trim().is_empty()).ok_or(ProtocolError::MissingJsx)?;
    let scss = scss.filter(|s| !s.trim().is_empty()).ok_or(ProtocolError::MissingScss)?;
    if !outside.trim().is_empty() {
        violations.insert(0, violation("extra-text", Severity::Warning, "extra explanatory text outside the code blocks", None));
    }
    Ok(GeneratedCode { protocol_violations: violations, ..GeneratedCode::new(jsx, scss) })
}

#[cfg(test)]
mod tests {
    use super::*;

    const JSX: &str = "```jsx\n<div className=\"page\"/>\n```\n";
    const SCSS: &str = "```scss\n.page { top: 0px; }\n```\n";

    #[test]
    fn two_blocks() {
        let code = extract_blocks(&format!("{JSX}{SCSS}")).unwrap();
        assert_eq!(code.jsx, "<div className=\"page\"/>");
        assert_eq!(code.scss, ".page { top: 0px; }");
        assert!(code.protocol_violations.is_empty());
    }

    #[test]
    fn prose_is_a_warning() {
        let code = extract_blocks(&format!("Here is your code:\n{JSX}{SCSS}Enjoy!")).unwrap();
        assert_eq!(code.protocol_violations.len(), 1);
        assert_eq!(code.protocol_violations[0].message, "extra explanatory text outside the code blocks");
    }

    #[test]
    fn missing_and_duplicate() {
        assert_eq!(extract_blocks(JSX), Err(ProtocolError::MissingScss));
        assert_eq!(extract_blocks(SCSS), Err(ProtocolError::MissingJsx));
        assert_eq!(extract_blocks(&format!("{JSX}{JSX}{SCSS}")), Err(ProtocolError::DuplicateBlock));
    }
}
