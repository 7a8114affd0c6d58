//! Plain-text layer dump.
//!
//! ```text
//! page 780 1760
//! group "list bg" 0 0 300 780 1 1
//!   pixel item_1 0 0 100 780 0.5 1
//!   text title 10 20 40 200 1 1 text="Hello"
//! ```
//!
//! One node per line, two spaces of indentation per nesting level. Fields are
//! `kind name top left bottom right opacity visible [text="..."]`. Names and
//! text may be double-quoted with `\"`, `\\` and `\n` escapes.

use std::fmt::Write as _;
use std::path::Path;

use super::{byte_to_opacity, opacity_to_byte, LayerKind, LayerNode, PsdError, PsdHeader, RawDesignInput, Result, SourceKind};
use crate::geometry::Rect;

pub fn read_layer_dump(path: impl AsRef<Path>) -> Result<RawDesignInput> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut input = parse_layer_dump(&text)?;
    input.source_path = path.to_path_buf();
    Ok(input)
}

pub fn write_layer_dump(input: &RawDesignInput, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, render_layer_dump(input))?;
    Ok(())
}

pub fn render_layer_dump(input: &RawDesignInput) -> String {
    let mut out = format!("page {} {}", input.header.width, input.header.height);
    if input.header.channels != 3 {
        let _ = write!(out, " channels={}", input.header.channels);
    }
    out.push('\n');
    for root in &input.roots {
        render_node(root, 0, &mut out);
    }
    out
}

fn render_node(node: &LayerNode, level: usize, out: &mut String) {
    let b = node.bounds;
    let _ = write!(
        out,
        "{}{} {} {} {} {} {} {} {}",
        "  ".repeat(level),
        node.kind.as_str(),
        quote(&node.name),
        b.top,
        b.left,
        b.bottom,
        b.right,
        opacity_to_byte(node.opacity) as f64 / 255.0,
        if node.visible { 1 } else { 0 }
    );
    if let Some(text) = &node.text_content {
        let _ = write!(out, " text={}", quote_always(text));
    }
    out.push('\n');
    for child in &node.children {
        render_node(child, level + 1, out);
    }
}

fn quote(s: &str) -> String {
    let bare = !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || c == '"' || c == '\\') && !s.starts_with("text=");
    if bare {
        s.to_string()
    } else {
        quote_always(s)
    }
}

fn quote_always(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn err(line: usize, column: usize, message: impl Into<String>) -> PsdError {
    PsdError::Parse { line, column, message: message.into() }
}

struct Token {
    text: String,
    column: usize,
    quoted: bool,
}

/// Splits a line into whitespace-separated tokens; `text="..."` stays one token.
fn tokenize(line: &str, line_no: usize, start_col: usize) -> Result<Vec<Token>> {
    let chars: Vec<char> = line.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let column = start_col + i;
        let mut text = String::new();
        let mut quoted = false;
        while i < chars.len() && !chars[i].is_whitespace() {
            if chars[i] == '"' {
                quoted = true;
                i += 1;
                loop {
                    let Some(&c) = chars.get(i) else {
                        return Err(err(line_no, column, "unterminated quoted string"));
                    };
                    i += 1;
                    match c {
                        '"' => break,
                        '\\' => {
                            let esc = chars.get(i).copied().ok_or_else(|| err(line_no, start_col + i, "dangling escape"))?;
                            i += 1;
                            text.push(match esc {
                                'n' => '\n',
                                'r' => '\r',
                                't' => '\t',
                                '"' => '"',
                                '\\' => '\\',
                                other => return Err(err(line_no, start_col + i - 1, format!("unknown escape \\{other}"))),
                            });
                        }
                        c => text.push(c),
                    }
                }
            } else {
                text.push(chars[i]);
                i += 1;
            }
        }
        tokens.push(Token { text, column, quoted });
    }
    Ok(tokens)
}

pub fn parse_layer_dump(source: &str) -> Result<RawDesignInput> {
    let mut header: Option<PsdHeader> = None;
    let mut flat: Vec<(usize, LayerNode, usize)> = Vec::new();

    for (idx, raw_line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw_line.trim_start_matches(' ');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let indent = raw_line.len() - trimmed.len();
        if trimmed.starts_with('\t') {
            return Err(err(line_no, indent + 1, "tabs are not allowed in indentation"));
        }
        let tokens = tokenize(trimmed, line_no, indent + 1)?;

        if header.is_none() {
            header = Some(parse_header(&tokens, line_no, indent)?);
            continue;
        }
        if indent % 2 != 0 {
            return Err(err(line_no, 1, "indentation must be a multiple of two spaces"));
        }
        let level = indent / 2;
        let node = parse_node(&tokens, line_no)?;
        match flat.last() {
            None if level > 0 => return Err(err(line_no, 1, "first layer must not be indented")),
            Some((prev_level, prev, _)) if level > prev_level + 1 || (level == prev_level + 1 && !prev.is_group()) => {
                return Err(err(line_no, 1, if level == prev_level + 1 { "child indented under a non-group node" } else { "indentation skips a level" }));
            }
            _ => {}
        }
        flat.push((level, node, line_no));
    }

    let header = header.ok_or_else(|| err(1, 1, "missing 'page W H' header line"))?;
    let mut iter = flat.into_iter().peekable();
    let roots = build_level(&mut iter, 0);
    Ok(RawDesignInput {
        header,
        roots,
        source_path: Default::default(),
        source_kind: SourceKind::LayerDump,
        parse_log: Vec::new(),
    })
}

fn build_level<I>(iter: &mut std::iter::Peekable<I>, level: usize) -> Vec<LayerNode>
where
    I: Iterator<Item = (usize, LayerNode, usize)>,
{
    let mut nodes = Vec::new();
    while let Some((l, _, _)) = iter.peek() {
        if *l < level {
            break;
        }
        let (_, mut node, _) = iter.next().expect("peeked");
        if node.is_group() {
            node.children = build_level(iter, level + 1);
        }
        nodes.push(node);
    }
    nodes
}

fn parse_header(tokens: &[Token], line: usize, indent: usize) -> Result<PsdHeader> {
    if indent != 0 || tokens.first().map(|t| t.text.as_str()) != Some("page") || tokens.len() < 3 {
        return Err(err(line, indent + 1, "expected header 'page W H'"));
    }
    let width = parse_num::<u32>(&tokens[1], line)?;
    let height = parse_num::<u32>(&tokens[2], line)?;
    if width == 0 || height == 0 || width > super::MAX_DIMENSION || height > super::MAX_DIMENSION {
        return Err(err(line, tokens[1].column, "page dimensions must be in 1..=30000"));
    }
    let mut header = PsdHeader::rgb(width, height);
    for tok in &tokens[3..] {
        match tok.text.strip_prefix("channels=") {
            Some(v) => header.channels = v.parse().map_err(|_| err(line, tok.column, "bad channel count"))?,
            None => return Err(err(line, tok.column, format!("unexpected header field '{}'", tok.text))),
        }
    }
    Ok(header)
}

fn parse_num<T: std::str::FromStr>(tok: &Token, line: usize) -> Result<T> {
    tok.text.parse().map_err(|_| err(line, tok.column, format!("expected a number, found '{}'", tok.text)))
}

fn parse_node(tokens: &[Token], line: usize) -> Result<LayerNode> {
    if tokens.len() < 8 {
        let col = tokens.last().map(|t| t.column + t.text.len()).unwrap_or(1);
        return Err(err(line, col, "expected 'kind name top left bottom right opacity visible'"));
    }
    let kind = match tokens[0].text.as_str() {
        "pixel" => LayerKind::Pixel,
        "text" => LayerKind::Text,
        "group" => LayerKind::Group,
        other => return Err(err(line, tokens[0].column, format!("unknown layer kind '{other}'"))),
    };
    let name = tokens[1].text.clone();
    let top = parse_num::<i32>(&tokens[2], line)?;
    let left = parse_num::<i32>(&tokens[3], line)?;
    let bottom = parse_num::<i32>(&tokens[4], line)?;
    let right = parse_num::<i32>(&tokens[5], line)?;
    if bottom < top || right < left {
        return Err(err(line, tokens[4].column, "bottom/right must not precede top/left"));
    }
    let opacity = parse_num::<f64>(&tokens[6], line)?;
    if !(0.0..=1.0).contains(&opacity) {
        return Err(err(line, tokens[6].column, "opacity must be within [0, 1]"));
    }
    let visible = match tokens[7].text.as_str() {
        "1" | "true" => true,
        "0" | "false" => false,
        other => return Err(err(line, tokens[7].column, format!("expected visibility 0/1, found '{other}'"))),
    };
    let mut text_content = None;
    for tok in &tokens[8..] {
        match tok.text.strip_prefix("text=") {
            Some(t) if tok.quoted || !t.is_empty() => text_content = Some(t.to_string()),
            _ => return Err(err(line, tok.column, format!("unexpected field '{}'", tok.text))),
        }
    }
    match (kind, &text_content) {
        (LayerKind::Text, None) => text_content = Some(String::new()),
        (LayerKind::Pixel | LayerKind::Group, Some(_)) => {
            return Err(err(line, tokens[8].column, "text= is only valid on text layers"));
        }
        _ => {}
    }
    Ok(LayerNode {
        name,
        bounds: Rect::new(top, left, bottom, right),
        opacity: byte_to_opacity(opacity_to_byte(opacity)),
        visible,
        kind,
        text_content,
        children: Vec::new(),
    })
}
