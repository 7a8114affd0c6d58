//! Deterministic software rendering of a computed layout.

mod font;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets::AssetRecord;
use crate::codecheck::{BoxKind, ComputedBox, ComputedLayout, GeneratedCode};
use crate::design::Dimensions;
pub use font::{glyph_rows, has_glyph, CELL_HEIGHT, CELL_WIDTH};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("cannot decode image {file}: {reason}")]
    AssetDecode { file: String, reason: String },
    #[error("image has zero width or height")]
    EmptyImage,
    #[error("pixel buffer of {got} bytes does not match {width}x{height} RGBA")]
    BufferSize { width: u32, height: u32, got: usize },
    #[error("external renderer failed: {0}")]
    External(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Rgba = [u8; 4];

pub const WHITE: Rgba = [255, 255, 255, 255];
pub const DEFAULT_TEXT_COLOR: Rgba = [0, 0, 0, 255];

/// Row-major 8-bit RGBA.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RasterImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RasterImage({}x{})", self.width, self.height)
    }
}

impl RasterImage {
    pub fn filled(width: u32, height: u32, color: Rgba) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 4);
        for _ in 0..width as usize * height as usize {
            pixels.extend_from_slice(&color);
        }
        Self { width, height, pixels }
    }

    pub fn from_rgba(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if pixels.len() != width as usize * height as usize * 4 {
            return Err(RasterError::BufferSize { width, height, got: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    fn index(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 4
    }

    pub fn get(&self, x: u32, y: u32) -> Rgba {
        let i = self.index(x, y);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2], self.pixels[i + 3]]
    }

    pub fn put(&mut self, x: u32, y: u32, c: Rgba) {
        let i = self.index(x, y);
        self.pixels[i..i + 4].copy_from_slice(&c);
    }

    /// Source-over with an extra opacity factor.
    pub fn blend(&mut self, x: u32, y: u32, src: Rgba, opacity: f64) {
        let a = (f64::from(src[3]) * opacity.clamp(0.0, 1.0)).round() as u32;
        if a == 0 {
            return;
        }
        let i = self.index(x, y);
        if a == 255 {
            self.pixels[i..i + 3].copy_from_slice(&src[..3]);
            self.pixels[i + 3] = 255;
            return;
        }
        for (d, &s) in self.pixels[i..i + 3].iter_mut().zip(&src[..3]) {
            *d = ((u32::from(s) * a + u32::from(*d) * (255 - a) + 127) / 255) as u8;
        }
        let da = u32::from(self.pixels[i + 3]);
        self.pixels[i + 3] = (a + (da * (255 - a) + 127) / 255) as u8;
    }
}

/// Decoded assets keyed by file name.
#[derive(Debug, Clone, Default)]
pub struct AssetStore {
    images: BTreeMap<String, RasterImage>,
}

impl AssetStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, file: impl Into<String>, img: RasterImage) {
        self.images.insert(file.into(), img);
    }

    pub fn get(&self, file: &str) -> Option<&RasterImage> {
        self.images.get(file)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Decodes every record in parallel.
    pub fn load(records: &[AssetRecord]) -> Result<Self, RasterError> {
        let decoded: Result<Vec<(String, RasterImage)>, RasterError> =
            records.par_iter().map(|r| decode_image(&r.path).map(|img| (r.file.clone(), img))).collect();
        Ok(Self { images: decoded?.into_iter().collect() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub image: RasterImage,
    /// Characters drawn as the box glyph.
    pub missing_glyphs: usize,
    /// Referenced assets absent from the store, left unpainted.
    pub missing_assets: Vec<String>,
}

/// Paints `layout` onto a `page`-sized canvas in (z, document order).
pub fn render(layout: &ComputedLayout, assets: &AssetStore, page: Dimensions, background: Rgba) -> Result<Rendered, RasterError> {
    if page.width <= 0 || page.height <= 0 {
        return Err(RasterError::EmptyImage);
    }
    let mut canvas = RasterImage::filled(page.width as u32, page.height as u32, background);
    let mut missing_glyphs = 0;
    let mut missing_assets = Vec::new();
    for b in layout.painting_order() {
        if let Some(color) = b.background_color {
            fill(&mut canvas, b, color);
        }
        if b.kind == BoxKind::Image {
            if let Some(file) = &b.asset {
                match assets.get(file) {
                    Some(img) => stretch(&mut canvas, b, img),
                    None => {
                        if !missing_assets.contains(file) {
                            missing_assets.push(file.clone());
                        }
                    }
                }
            }
        }
        if let Some(text) = &b.text {
            missing_glyphs += draw_text(&mut canvas, b, text);
        }
    }
    Ok(Rendered { image: canvas, missing_glyphs, missing_assets })
}

/// Box pixels clipped to the canvas, as `(x0, y0, x1, y1)` half-open.
fn clip(canvas: &RasterImage, b: &ComputedBox) -> Option<(i64, i64, i64, i64)> {
    let r = &b.rect;
    let x0 = r.x.max(0);
    let y0 = r.y.max(0);
    let x1 = r.right().min(i64::from(canvas.width));
    let y1 = r.bottom().min(i64::from(canvas.height));
    (x0 < x1 && y0 < y1).then_some((x0, y0, x1, y1))
}

fn fill(canvas: &mut RasterImage, b: &ComputedBox, color: Rgba) {
    let Some((x0, y0, x1, y1)) = clip(canvas, b) else { return };
    for y in y0..y1 {
        for x in x0..x1 {
            canvas.blend(x as u32, y as u32, color, b.opacity);
        }
    }
}

/// Nearest-neighbour source index for destination pixel `i` of `dst` pixels.
pub fn nearest(i: i64, dst: i64, src: u32) -> u32 {
    (((2 * i + 1) * i64::from(src)) / (2 * dst)).clamp(0, i64::from(src) - 1) as u32
}

fn stretch(canvas: &mut RasterImage, b: &ComputedBox, img: &RasterImage) {
    if img.is_empty() {
        return;
    }
    let Some((x0, y0, x1, y1)) = clip(canvas, b) else { return };
    let r = &b.rect;
    for y in y0..y1 {
        let sy = nearest(y - r.y, r.height, img.height);
        for x in x0..x1 {
            let sx = nearest(x - r.x, r.width, img.width);
            canvas.blend(x as u32, y as u32, img.get(sx, sy), b.opacity);
        }
    }
}

/// Draws wrapped text from the box origin, clipped to the box. Returns the
/// number of characters without a glyph.
fn draw_text(canvas: &mut RasterImage, b: &ComputedBox, text: &str) -> usize {
    let scale = (b.font_size.unwrap_or(CELL_HEIGHT as i64) / CELL_HEIGHT as i64).max(1);
    let color = b.color.unwrap_or(DEFAULT_TEXT_COLOR);
    let cell_w = CELL_WIDTH as i64 * scale;
    let cell_h = CELL_HEIGHT as i64 * scale;
    let per_line = (b.rect.width / cell_w).max(1);
    let Some((cx0, cy0, cx1, cy1)) = clip(canvas, b) else {
        return text.chars().filter(|c| !c.is_whitespace() && !has_glyph(*c)).count();
    };
    let mut missing = 0;
    for (k, ch) in text.chars().enumerate() {
        let k = k as i64;
        let (gx, gy) = (b.rect.x + (k % per_line) * cell_w, b.rect.y + (k / per_line) * cell_h);
        if !ch.is_whitespace() && !has_glyph(ch) {
            missing += 1;
        }
        if gy >= cy1 {
            continue;
        }
        let rows = glyph_rows(ch);
        for (row, bits) in rows.iter().enumerate() {
            for col in 0..CELL_WIDTH {
                if bits & (1 << col) == 0 {
                    continue;
                }
                for dy in 0..scale {
                    for dx in 0..scale {
                        let x = gx + col as i64 * scale + dx;
                        let y = gy + row as i64 * scale + dy;
                        if x >= cx0 && x < cx1 && y >= cy0 && y < cy1 {
                            canvas.blend(x as u32, y as u32, color, b.opacity);
                        }
                    }
                }
            }
        }
    }
    missing
}

pub fn decode_image(path: impl AsRef<Path>) -> Result<RasterImage, RasterError> {
    let path = path.as_ref();
    let file = path.display().to_string();
    let img = image::open(path).map_err(|e| RasterError::AssetDecode { file: file.clone(), reason: e.to_string() })?;
    let rgba = img.to_rgba8();
    let (width, height) = rgba.dimensions();
    if width == 0 || height == 0 {
        return Err(RasterError::AssetDecode { file, reason: "zero-size image".into() });
    }
    Ok(RasterImage { width, height, pixels: rgba.into_raw() })
}

/// Writes 8-bit RGBA, non-interlaced PNG.
pub fn write_png(img: &RasterImage, path: impl AsRef<Path>) -> Result<(), RasterError> {
    std::fs::write(path, encode_png(img)?)?;
    Ok(())
}

pub fn encode_png(img: &RasterImage) -> Result<Vec<u8>, RasterError> {
    if img.is_empty() {
        return Err(RasterError::EmptyImage);
    }
    if img.pixels.len() != img.width as usize * img.height as usize * 4 {
        return Err(RasterError::BufferSize { width: img.width, height: img.height, got: img.pixels.len() });
    }
    let mut out = Vec::new();
    let encoder = image::codecs::png::PngEncoder::new(&mut out);
    image::ImageEncoder::write_image(encoder, &img.pixels, img.width, img.height, image::ExtendedColorType::Rgba8)
        .map_err(|e| RasterError::Io(std::io::Error::other(e.to_string())))?;
    Ok(out)
}

/// Runs a user-supplied renderer as `cmd <jsx> <scss> <assets_dir>` inside
/// `workdir`; it must exit 0 and leave `screenshot.png` there.
pub fn render_external(command: &str, code: &GeneratedCode, assets_dir: &Path, workdir: &Path) -> Result<RasterImage, RasterError> {
    std::fs::create_dir_all(workdir)?;
    let jsx: PathBuf = workdir.join("index.jsx");
    let scss: PathBuf = workdir.join("index.scss");
    std::fs::write(&jsx, &code.jsx)?;
    std::fs::write(&scss, &code.scss)?;
    let mut parts = command.split_whitespace();
    let program = parts.next().ok_or_else(|| RasterError::External("empty renderer command".into()))?;
    let status = Command::new(program)
        .args(parts)
        .arg(&jsx)
        .arg(&scss)
        .arg(assets_dir)
        .current_dir(workdir)
        .status()
        .map_err(|e| RasterError::External(format!("{program}: {e}")))?;
    if !status.success() {
        return Err(RasterError::External(format!("{program} exited with {status}")));
    }
    decode_image(workdir.join("screenshot.png"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PixelBox;

    fn page(w: i64, h: i64) -> Dimensions {
        Dimensions { width: w, height: h }
    }

    fn bx(order: usize, rect: PixelBox, z: i64) -> ComputedBox {
        ComputedBox {
            class: format!("b{order}"),
            classes: vec![format!("b{order}")],
            rect,
            z,
            order,
            kind: BoxKind::Container,
            asset: None,
            text: None,
            opacity: 1.0,
            background_color: None,
            color: None,
            font_size: None,
            parent: None,
            in_page: true,
        }
    }

    #[test]
    fn empty_layout_is_background() {
        let layout = ComputedLayout { page: page(100, 100), boxes: vec![] };
        let r = render(&layout, &AssetStore::new(), page(100, 100), WHITE).unwrap();
        assert!(r.image.pixels.iter().all(|&v| v == 255));
    }

    #[test]
    fn higher_z_wins_overlap() {
        let mut a = bx(0, PixelBox::new(0, 0, 6, 6), 2);
        a.background_color = Some([255, 0, 0, 255]);
        let mut b = bx(1, PixelBox::new(3, 3, 6, 6), 1);
        b.background_color = Some([0, 0, 255, 255]);
        let layout = ComputedLayout { page: page(10, 10), boxes: vec![a, b] };
        let r = render(&layout, &AssetStore::new(), page(10, 10), WHITE).unwrap();
        assert_eq!(r.image.get(4, 4), [255, 0, 0, 255]);
        assert_eq!(r.image.get(8, 8), [0, 0, 255, 255]);
    }

    #[test]
    fn half_opacity_blend() {
        let mut a = bx(0, PixelBox::new(0, 0, 1, 1), 0);
        a.background_color = Some([0, 0, 0, 255]);
        a.opacity = 0.5;
        let layout = ComputedLayout { page: page(1, 1), boxes: vec![a] };
        let r = render(&layout, &AssetStore::new(), page(1, 1), WHITE).unwrap();
        assert_eq!(r.image.get(0, 0), [127, 127, 127, 255]);
    }

    #[test]
    fn text_and_missing_glyphs() {
        let mut t = bx(0, PixelBox::new(0, 0, 32, 16), 0);
        t.kind = BoxKind::Text;
        t.text = Some("A中".into());
        let layout = ComputedLayout { page: page(32, 16), boxes: vec![t] };
        let r = render(&layout, &AssetStore::new(), page(32, 16), WHITE).unwrap();
        assert_eq!(r.missing_glyphs, 1);
        assert!(r.image.pixels.chunks(4).any(|p| p[0] == 0));
    }

    #[test]
    fn missing_asset_reported() {
        let mut a = bx(0, PixelBox::new(0, 0, 2, 2), 0);
        a.kind = BoxKind::Image;
        a.asset = Some("ghost.png".into());
        let layout = ComputedLayout { page: page(2, 2), boxes: vec![a] };
        let r = render(&layout, &AssetStore::new(), page(2, 2), WHITE).unwrap();
        assert_eq!(r.missing_assets, vec!["ghost.png".to_string()]);
    }

    #[test]
    fn png_round_trip_and_rejects_empty() {
        let dir = tempfile::tempdir().unwrap();
        let img = RasterImage::from_rgba(2, 1, vec![1, 2, 3, 4, 250, 251, 252, 253]).unwrap();
        let p = dir.path().join("x.png");
        write_png(&img, &p).unwrap();
        assert_eq!(decode_image(&p).unwrap(), img);
        assert!(matches!(write_png(&RasterImage::filled(0, 3, WHITE), &p), Err(RasterError::EmptyImage)));
        std::fs::write(&p, b"not a png").unwrap();
        assert!(matches!(decode_image(&p), Err(RasterError::AssetDecode { .. })));
    }

    #[test]
    fn nearest_indices() {
        assert_eq!((0..4).map(|i| nearest(i, 4, 2)).collect::<Vec<_>>(), vec![0, 0, 1, 1]);
        assert_eq!((0..2).map(|i| nearest(i, 2, 4)).collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!((0..3).map(|i| nearest(i, 3, 3)).collect::<Vec<_>>(), vec![0, 1, 2]);
    }
}
