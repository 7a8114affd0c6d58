//! 8×16 glyphs: the font8x8 tables with each row doubled.

use font8x8::{UnicodeFonts, BASIC_FONTS, BLOCK_FONTS, BOX_FONTS, GREEK_FONTS, HIRAGANA_FONTS, LATIN_FONTS, MISC_FONTS};

pub const CELL_WIDTH: usize = 8;
pub const CELL_HEIGHT: usize = 16;

/// Outline drawn for characters the font lacks.
const BOX_GLYPH: [u8; 8] = [0x00, 0x7e, 0x42, 0x42, 0x42, 0x42, 0x7e, 0x00];

fn lookup(c: char) -> Option<[u8; 8]> {
    BASIC_FONTS
        .get(c)
        .or_else(|| LATIN_FONTS.get(c))
        .or_else(|| GREEK_FONTS.get(c))
        .or_else(|| BOX_FONTS.get(c))
        .or_else(|| BLOCK_FONTS.get(c))
        .or_else(|| HIRAGANA_FONTS.get(c))
        .or_else(|| MISC_FONTS.get(c))
}

pub fn has_glyph(c: char) -> bool {
    lookup(c).is_some()
}

/// Sixteen rows, least significant bit leftmost.
pub fn glyph_rows(c: char) -> [u8; CELL_HEIGHT] {
    let g = if c.is_whitespace() { [0; 8] } else { lookup(c).unwrap_or(BOX_GLYPH) };
    let mut rows = [0u8; CELL_HEIGHT];
    for (i, r) in g.iter().enumerate() {
        rows[2 * i] = *r;
        rows[2 * i + 1] = *r;
    }
    rows
}
