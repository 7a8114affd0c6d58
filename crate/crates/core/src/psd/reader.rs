use std::path::Path;

use super::{byte_to_opacity, LayerKind, LayerNode, PsdError, PsdHeader, RawDesignInput, Result, SourceKind, COLOR_MODE_RGB, MAX_DIMENSION};
use crate::geometry::Rect;

const SIGNATURE: &[u8; 4] = b"8BPS";
const HIDDEN_FLAG: u8 = 0b0000_0010;

/// Reads a PSD file into its raw layer tree.
pub fn read_psd(path: impl AsRef<Path>) -> Result<RawDesignInput> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let mut input = parse_psd(&bytes)?;
    input.source_path = path.to_path_buf();
    Ok(input)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    /// Offset of `buf[0]` in the whole file, for error messages.
    base: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0, base: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn offset(&self) -> usize {
        self.base + self.pos
    }

    fn take(&mut self, n: usize, context: &'static str) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(PsdError::Truncated { offset: self.offset(), context });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn skip(&mut self, n: usize, context: &'static str) -> Result<()> {
        self.take(n, context).map(|_| ())
    }

    fn u8(&mut self, context: &'static str) -> Result<u8> {
        Ok(self.take(1, context)?[0])
    }

    fn u16(&mut self, context: &'static str) -> Result<u16> {
        let b = self.take(2, context)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn i16(&mut self, context: &'static str) -> Result<i16> {
        Ok(self.u16(context)? as i16)
    }

    fn u32(&mut self, context: &'static str) -> Result<u32> {
        let b = self.take(4, context)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn i32(&mut self, context: &'static str) -> Result<i32> {
        Ok(self.u32(context)? as i32)
    }

    /// Splits off a block of `len` bytes as its own cursor.
    fn block(&mut self, len: usize, context: &'static str) -> Result<Cursor<'a>> {
        let base = self.offset();
        let buf = self.take(len, context)?;
        Ok(Cursor { buf, pos: 0, base })
    }

    fn length_prefixed(&mut self, context: &'static str) -> Result<Cursor<'a>> {
        let len = self.u32(context)? as usize;
        self.block(len, context)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Divider {
    Folder,
    Bounding,
}

struct LayerRecord {
    node: LayerNode,
    divider: Option<Divider>,
}

/// Parses an in-memory PSD.
pub fn parse_psd(bytes: &[u8]) -> Result<RawDesignInput> {
    let mut cur = Cursor::new(bytes);
    let header = read_header(&mut cur)?;
    let mut log = Vec::new();

    let color_data = cur.length_prefixed("color mode data")?;
    if !color_data.buf.is_empty() {
        log.push(format!("skipped {} bytes of color mode data", color_data.buf.len()));
    }
    let resources = cur.length_prefixed("image resources")?;
    if !resources.buf.is_empty() {
        log.push(format!("skipped {} bytes of image resources", resources.buf.len()));
    }

    let mut roots = Vec::new();
    if cur.remaining() > 0 {
        let mut layer_mask = cur.length_prefixed("layer and mask information")?;
        if layer_mask.remaining() > 0 {
            let mut layer_info = layer_mask.length_prefixed("layer info")?;
            if layer_info.remaining() > 0 {
                let records = read_layer_records(&mut layer_info, &mut log)?;
                roots = build_tree(records)?;
            }
        }
    }

    Ok(RawDesignInput {
        header,
        roots,
        source_path: Default::default(),
        source_kind: SourceKind::PsdBinary,
        parse_log: log,
    })
}

fn read_header(cur: &mut Cursor<'_>) -> Result<PsdHeader> {
    if cur.remaining() >= 4 && &cur.buf[..4] != SIGNATURE {
        return Err(PsdError::BadSignature);
    }
    cur.take(4, "signature")?;
    let version = cur.u16("version")?;
    if version != 1 {
        return Err(PsdError::UnsupportedVersion(version));
    }
    cur.skip(6, "reserved header bytes")?;
    let channels = cur.u16("channel count")?;
    let height = cur.u32("height")?;
    let width = cur.u32("width")?;
    let bit_depth = cur.u16("depth")?;
    let color_mode = cur.u16("color mode")?;
    if bit_depth != 8 || color_mode != COLOR_MODE_RGB {
        return Err(PsdError::UnsupportedMode { color_mode, depth: bit_depth });
    }
    if !(1..=MAX_DIMENSION).contains(&width) || !(1..=MAX_DIMENSION).contains(&height) {
        return Err(PsdError::InvalidDimensions { width, height });
    }
    Ok(PsdHeader { width, height, channels, bit_depth, color_mode })
}

fn read_layer_records(cur: &mut Cursor<'_>, log: &mut Vec<String>) -> Result<Vec<LayerRecord>> {
    // A negative count only says the first alpha channel holds merged transparency.
    let count = cur.i16("layer count")?.unsigned_abs() as usize;
    let mut records = Vec::with_capacity(count.min(cur.remaining() / 18 + 1));
    for index in 0..count {
        records.push(read_layer_record(cur, index, log)?);
    }
    Ok(records)
}

fn read_layer_record(cur: &mut Cursor<'_>, index: usize, log: &mut Vec<String>) -> Result<LayerRecord> {
    let top = cur.i32("layer bounds")?;
    let left = cur.i32("layer bounds")?;
    let bottom = cur.i32("layer bounds")?;
    let right = cur.i32("layer bounds")?;
    let channels = cur.u16("layer channel count")? as usize;
    cur.skip(channels * 6, "channel info")?;
    if cur.take(4, "blend mode signature")? != b"8BIM" {
        return Err(PsdError::MalformedRecord { index, reason: "missing 8BIM blend signature".into() });
    }
    cur.skip(4, "blend mode key")?;
    let opacity = cur.u8("opacity")?;
    let _clipping = cur.u8("clipping")?;
    let flags = cur.u8("flags")?;
    let _filler = cur.u8("filler")?;

    let mut extra = cur.length_prefixed("layer extra data")?;
    let mask = extra.length_prefixed("layer mask data")?;
    if !mask.buf.is_empty() {
        log.push(format!("layer {index}: skipped {} bytes of mask data", mask.buf.len()));
    }
    extra.length_prefixed("blending ranges")?;
    let name_len = extra.u8("layer name")? as usize;
    let legacy = extra.take(name_len, "layer name")?;
    let padded = (1 + name_len).div_ceil(4) * 4;
    extra.skip(padded - 1 - name_len, "layer name padding")?;

    let mut name: String = legacy.iter().map(|&b| b as char).collect();
    let mut divider = None;
    let mut text: Option<String> = None;

    while extra.remaining() >= 12 {
        let sig = extra.take(4, "additional info signature")?;
        if sig != b"8BIM" && sig != b"8B64" {
            log.push(format!("layer {index}: unrecognized additional info signature, {} bytes ignored", extra.remaining() + 4));
            break;
        }
        let key: [u8; 4] = extra.take(4, "additional info key")?.try_into().expect("4 bytes");
        let len = extra.u32("additional info length")? as usize;
        let mut data = extra.block(len, "additional info block")?;
        match &key {
            b"luni" => {
                if let Some(unicode) = read_unicode_string(&mut data) {
                    name = unicode;
                }
            }
            b"lsct" | b"lsdk" => {
                let kind = data.u32("section divider type")?;
                divider = match kind {
                    1 | 2 => Some(Divider::Folder),
                    3 => Some(Divider::Bounding),
                    _ => None,
                };
            }
            b"TySh" => {
                text = Some(extract_type_text(data.buf).unwrap_or_default());
            }
            other => {
                log.push(format!("layer {index}: skipped additional info block '{}'", String::from_utf8_lossy(other)));
            }
        }
        // Some writers pad odd-length blocks to even without counting the pad byte.
        if len % 2 == 1 && extra.remaining() > 0 && extra.buf[extra.pos] == 0 {
            extra.skip(1, "additional info padding")?;
        }
    }

    let kind = match (divider, &text) {
        (Some(Divider::Folder), _) => LayerKind::Group,
        (_, Some(_)) => LayerKind::Text,
        _ => LayerKind::Pixel,
    };
    let node = LayerNode {
        name,
        bounds: Rect::new(top, left, bottom.max(top), right.max(left)),
        opacity: byte_to_opacity(opacity),
        visible: flags & HIDDEN_FLAG == 0,
        kind,
        text_content: if kind == LayerKind::Text { text } else { None },
        children: Vec::new(),
    };
    Ok(LayerRecord { node, divider })
}

fn read_unicode_string(cur: &mut Cursor<'_>) -> Option<String> {
    let count = cur.u32("unicode string length").ok()? as usize;
    let raw = cur.take(count.checked_mul(2)?, "unicode string").ok()?;
    let units: Vec<u16> = raw.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    let s = String::from_utf16_lossy(&units);
    Some(s.trim_end_matches('\0').to_string())
}

/// Pulls the text string out of a type-tool block.
///
/// The text descriptor stores the string under the key `Txt ` with OSType
/// `TEXT`; we locate that pair rather than walking the whole descriptor.
fn extract_type_text(data: &[u8]) -> Option<String> {
    const NEEDLE: &[u8] = b"Txt TEXT";
    let at = data.windows(NEEDLE.len()).position(|w| w == NEEDLE)?;
    let mut cur = Cursor::new(&data[at + NEEDLE.len()..]);
    read_unicode_string(&mut cur)
}

/// Rebuilds group nesting from the flat, bottom-first record list.
///
/// A bounding divider opens a group; the matching folder record above its
/// children closes it and carries the group's name and flags.
fn build_tree(records: Vec<LayerRecord>) -> Result<Vec<LayerNode>> {
    let mut stack: Vec<Vec<LayerNode>> = vec![Vec::new()];
    for (index, record) in records.into_iter().enumerate() {
        match record.divider {
            Some(Divider::Bounding) => stack.push(Vec::new()),
            Some(Divider::Folder) => {
                if stack.len() < 2 {
                    return Err(PsdError::MalformedDividers(format!(
                        "folder record {index} ('{}') has no matching bounding divider",
                        record.node.name
                    )));
                }
                let children = stack.pop().expect("checked above");
                let mut group = record.node;
                group.children = children;
                stack.last_mut().expect("non-empty").push(group);
            }
            None => stack.last_mut().expect("non-empty").push(record.node),
        }
    }
    if stack.len() != 1 {
        return Err(PsdError::MalformedDividers(format!("{} group(s) never closed", stack.len() - 1)));
    }
    Ok(stack.pop().expect("root level"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_signature() {
        let mut bytes = b"XXXX".to_vec();
        bytes.extend_from_slice(&[0; 30]);
        assert!(matches!(parse_psd(&bytes), Err(PsdError::BadSignature)));
    }

    #[test]
    fn short_input_is_truncated() {
        assert!(matches!(parse_psd(b"8BP"), Err(PsdError::Truncated { .. })));
        assert!(matches!(parse_psd(b"8BPS\0\x01"), Err(PsdError::Truncated { .. })));
    }

    #[test]
    fn version_two_rejected() {
        let mut bytes = b"8BPS\0\x02".to_vec();
        bytes.extend_from_slice(&[0; 40]);
        assert!(matches!(parse_psd(&bytes), Err(PsdError::UnsupportedVersion(2))));
    }

    #[test]
    fn type_text_needle() {
        let mut data = vec![0u8; 10];
        data.extend_from_slice(b"Txt TEXT");
        data.extend_from_slice(&3u32.to_be_bytes());
        for u in "Hi\0".encode_utf16() {
            data.extend_from_slice(&u.to_be_bytes());
        }
        assert_eq!(extract_type_text(&data).as_deref(), Some("Hi"));
        assert_eq!(extract_type_text(b"nothing here"), None);
    }

    #[test]
    fn unbalanced_folder() {
        let rec = |divider| LayerRecord { node: LayerNode::pixel("g", Rect::default()), divider };
        assert!(matches!(build_tree(vec![rec(Some(Divider::Folder))]), Err(PsdError::MalformedDividers(_))));
        assert!(matches!(build_tree(vec![rec(Some(Divider::Bounding))]), Err(PsdError::MalformedDividers(_))));
    }
}
