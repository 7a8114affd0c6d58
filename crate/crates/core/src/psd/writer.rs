use std::path::Path;

use super::{opacity_to_byte, LayerKind, LayerNode, RawDesignInput, Result};
use crate::geometry::Rect;

/// Writes a minimal PSD holding `input`'s layer tree.
///
/// Every channel is an all-zero RLE plane; only the layer records carry
/// information.
pub fn write_synthetic_psd(input: &RawDesignInput, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_psd(input))?;
    Ok(())
}

enum RecordKind<'a> {
    Leaf(&'a LayerNode),
    Folder(&'a LayerNode),
    Bounding,
}

pub fn encode_psd(input: &RawDesignInput) -> Vec<u8> {
    let header = &input.header;
    let mut out = Vec::new();
    out.extend_from_slice(b"8BPS");
    put_u16(&mut out, 1);
    out.extend_from_slice(&[0; 6]);
    put_u16(&mut out, header.channels);
    put_u32(&mut out, header.height);
    put_u32(&mut out, header.width);
    put_u16(&mut out, header.bit_depth);
    put_u16(&mut out, header.color_mode);
    put_u32(&mut out, 0); // color mode data
    put_u32(&mut out, 0); // image resources

    let mut records = Vec::new();
    for root in &input.roots {
        flatten(root, &mut records);
    }

    let mut layer_info = Vec::new();
    if !records.is_empty() {
        put_u16(&mut layer_info, records.len() as u16);
        let mut channel_data = Vec::new();
        for record in &records {
            encode_record(record, &mut layer_info, &mut channel_data);
        }
        layer_info.extend_from_slice(&channel_data);
        if layer_info.len() % 2 == 1 {
            layer_info.push(0);
        }
    }

    let mut layer_mask = Vec::new();
    put_u32(&mut layer_mask, layer_info.len() as u32);
    layer_mask.extend_from_slice(&layer_info);
    put_u32(&mut layer_mask, 0); // global layer mask info

    put_u32(&mut out, layer_mask.len() as u32);
    out.extend_from_slice(&layer_mask);

    // Merged image: RLE, one row-length table for all channels, then the rows.
    let row = rle_zero_row(header.width as usize);
    let rows = header.channels as usize * header.height as usize;
    put_u16(&mut out, 1);
    for _ in 0..rows {
        put_u16(&mut out, row.len() as u16);
    }
    for _ in 0..rows {
        out.extend_from_slice(&row);
    }
    out
}

fn flatten<'a>(node: &'a LayerNode, out: &mut Vec<RecordKind<'a>>) {
    if node.kind == LayerKind::Group {
        out.push(RecordKind::Bounding);
        for child in &node.children {
            flatten(child, out);
        }
        out.push(RecordKind::Folder(node));
    } else {
        out.push(RecordKind::Leaf(node));
    }
}

fn encode_record(record: &RecordKind<'_>, out: &mut Vec<u8>, channel_data: &mut Vec<u8>) {
    const DIVIDER_NAME: &str = "</Layer group>";
    let (name, bounds, opacity, visible) = match record {
        RecordKind::Leaf(n) | RecordKind::Folder(n) => (n.name.as_str(), n.bounds, opacity_to_byte(n.opacity), n.visible),
        RecordKind::Bounding => (DIVIDER_NAME, Rect::default(), 255, true),
    };

    put_i32(out, bounds.top);
    put_i32(out, bounds.left);
    put_i32(out, bounds.bottom);
    put_i32(out, bounds.right);

    let plane = channel_plane(&bounds);
    let channel_ids: [i16; 4] = [-1, 0, 1, 2];
    put_u16(out, channel_ids.len() as u16);
    for id in channel_ids {
        put_u16(out, id as u16);
        put_u32(out, plane.len() as u32);
        channel_data.extend_from_slice(&plane);
    }

    out.extend_from_slice(b"8BIM");
    out.extend_from_slice(if matches!(record, RecordKind::Leaf(_)) { b"norm" } else { b"pass" });
    out.push(opacity);
    out.push(0);
    out.push(if visible { 0 } else { 0b10 });
    out.push(0);

    let mut extra = Vec::new();
    put_u32(&mut extra, 0); // mask
    put_u32(&mut extra, 0); // blending ranges
    let legacy: Vec<u8> = name.chars().map(|c| if c.is_ascii() { c as u8 } else { b'?' }).take(255).collect();
    extra.push(legacy.len() as u8);
    extra.extend_from_slice(&legacy);
    while (extra.len() - 8) % 4 != 0 {
        extra.push(0);
    }

    let mut luni = Vec::new();
    put_unicode(&mut luni, name, false);
    put_block(&mut extra, b"luni", &luni);

    match record {
        RecordKind::Folder(_) => put_block(&mut extra, b"lsct", &1u32.to_be_bytes()),
        RecordKind::Bounding => put_block(&mut extra, b"lsct", &3u32.to_be_bytes()),
        RecordKind::Leaf(n) if n.kind == LayerKind::Text => {
            put_block(&mut extra, b"TySh", &type_tool_block(n.text_content.as_deref().unwrap_or(""), &bounds))
        }
        RecordKind::Leaf(_) => {}
    }

    put_u32(out, extra.len() as u32);
    out.extend_from_slice(&extra);
}

/// Compression tag plus RLE rows of zeros for a layer-sized plane.
fn channel_plane(bounds: &Rect) -> Vec<u8> {
    let (w, h) = (bounds.width() as usize, bounds.height() as usize);
    let mut plane = Vec::new();
    if w == 0 || h == 0 {
        put_u16(&mut plane, 0);
        return plane;
    }
    put_u16(&mut plane, 1);
    let row = rle_zero_row(w);
    for _ in 0..h {
        put_u16(&mut plane, row.len() as u16);
    }
    for _ in 0..h {
        plane.extend_from_slice(&row);
    }
    plane
}

/// PackBits encoding of `width` zero bytes.
fn rle_zero_row(width: usize) -> Vec<u8> {
    let mut row = Vec::new();
    let mut left = width;
    while left > 0 {
        let run = left.min(128);
        row.push((1i16 - run as i16) as i8 as u8);
        row.push(0);
        left -= run;
    }
    row
}

/// Type-tool block with a one-item text descriptor and an empty warp descriptor.
fn type_tool_block(text: &str, bounds: &Rect) -> Vec<u8> {
    let mut data = Vec::new();
    put_u16(&mut data, 1);
    for v in [1.0f64, 0.0, 0.0, 1.0, bounds.left as f64, bounds.top as f64] {
        data.extend_from_slice(&v.to_be_bytes());
    }
    put_u16(&mut data, 50);
    put_u32(&mut data, 16);
    put_unicode(&mut data, "", true);
    put_id(&mut data, b"TxLr");
    put_u32(&mut data, 1);
    put_id(&mut data, b"Txt ");
    data.extend_from_slice(b"TEXT");
    put_unicode(&mut data, text, true);

    put_u16(&mut data, 1);
    put_u32(&mut data, 16);
    put_unicode(&mut data, "", true);
    put_id(&mut data, b"warp");
    put_u32(&mut data, 0);
    for v in [bounds.left, bounds.top, bounds.right, bounds.bottom] {
        data.extend_from_slice(&(v as f64).to_be_bytes());
    }
    data
}

fn put_block(out: &mut Vec<u8>, key: &[u8; 4], data: &[u8]) {
    out.extend_from_slice(b"8BIM");
    out.extend_from_slice(key);
    let padded = data.len().div_ceil(4) * 4;
    put_u32(out, padded as u32);
    out.extend_from_slice(data);
    out.resize(out.len() + padded - data.len(), 0);
}

fn put_unicode(out: &mut Vec<u8>, s: &str, nul: bool) {
    let mut units: Vec<u16> = s.encode_utf16().collect();
    if nul {
        units.push(0);
    }
    put_u32(out, units.len() as u32);
    for u in units {
        put_u16(out, u);
    }
}

fn put_id(out: &mut Vec<u8>, id: &[u8; 4]) {
    put_u32(out, 0);
    out.extend_from_slice(id);
}

fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_i32(out: &mut Vec<u8>, v: i32) {
    out.extend_from_slice(&v.to_be_bytes());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packbits_runs() {
        assert_eq!(rle_zero_row(1), vec![0, 0]);
        assert_eq!(rle_zero_row(128), vec![0x81, 0]);
        assert_eq!(rle_zero_row(130), vec![0x81, 0, 0xFF, 0]);
    }
}
