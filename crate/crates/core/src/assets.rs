//! Asset discovery and binding image elements to their true pixel sizes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{DesignDocument, ElementType};

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("corrupt image header in {file}: {reason}")]
    CorruptImage { file: String, reason: &'static str },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Png,
    Jpeg,
}

impl ImageFormat {
    pub fn from_file_name(name: &str) -> Option<Self> {
        let ext = Path::new(name).extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(ImageFormat::Png),
            "jpg" | "jpeg" => Some(ImageFormat::Jpeg),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetRecord {
    pub file: String,
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
    pub format: ImageFormat,
}

impl AssetRecord {
    /// Filename without its extension.
    pub fn stem(&self) -> &str {
        file_stem(&self.file)
    }
}

pub(crate) fn file_stem(file: &str) -> &str {
    match file.rfind('.') {
        Some(i) if i > 0 => &file[..i],
        _ => file,
    }
}

/// Lists every PNG/JPEG in `dir` with dimensions read from its header,
/// ordered by filename.
pub fn scan_assets(dir: impl AsRef<Path>) -> Result<Vec<AssetRecord>, AssetError> {
    let dir = dir.as_ref();
    let io_err = |source| AssetError::Io { path: dir.to_path_buf(), source };
    let mut files: Vec<(String, PathBuf, ImageFormat)> = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err)? {
        let entry = entry.map_err(io_err)?;
        if !entry.file_type().map_err(io_err)?.is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(format) = ImageFormat::from_file_name(&name) {
            files.push((name, entry.path(), format));
        }
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));
    files
        .into_par_iter()
        .map(|(file, path, format)| {
            let bytes = std::fs::read(&path).map_err(|source| AssetError::Io { path: path.clone(), source })?;
            let dims = match format {
                ImageFormat::Png => png_dimensions(&bytes),
                ImageFormat::Jpeg => jpeg_dimensions(&bytes),
            };
            let (width, height) = dims.map_err(|reason| AssetError::CorruptImage { file: file.clone(), reason })?;
            Ok(AssetRecord { file, path, width, height, format })
        })
        .collect()
}

/// Width and height from the IHDR chunk (bytes 16..24).
pub fn png_dimensions(bytes: &[u8]) -> Result<(u32, u32), &'static str> {
    const SIG: &[u8] = b"\x89PNG\r\n\x1a\n";
    if bytes.len() < 8 || &bytes[..8] != SIG {
        return Err("missing PNG signature");
    }
    if bytes.len() < 24 {
        return Err("truncated IHDR");
    }
    if &bytes[12..16] != b"IHDR" {
        return Err("first chunk is not IHDR");
    }
    let width = u32::from_be_bytes(bytes[16..20].try_into().expect("4 bytes"));
    let height = u32::from_be_bytes(bytes[20..24].try_into().expect("4 bytes"));
    if width == 0 || height == 0 {
        return Err("zero dimension");
    }
    Ok((width, height))
}

/// Width and height from the first SOF0/SOF2 frame header.
pub fn jpeg_dimensions(bytes: &[u8]) -> Result<(u32, u32), &'static str> {
    if bytes.len() < 4 || bytes[0] != 0xFF || bytes[1] != 0xD8 {
        return Err("missing JPEG SOI marker");
    }
    let mut pos = 2;
    loop {
        while pos < bytes.len() && bytes[pos] != 0xFF {
            pos += 1;
        }
        while pos < bytes.len() && bytes[pos] == 0xFF {
            pos += 1;
        }
        let Some(&marker) = bytes.get(pos) else {
            return Err("no frame header before end of file");
        };
        let seg = pos - 1;
        pos += 1;
        match marker {
            0xD0..=0xD7 | 0x01 | 0xD8 => continue,
            0xD9 | 0xDA => return Err("no frame header before scan data"),
            _ => {}
        }
        if seg + 4 > bytes.len() {
            return Err("truncated segment length");
        }
        let len = u16::from_be_bytes([bytes[seg + 2], bytes[seg + 3]]) as usize;
        if marker == 0xC0 || marker == 0xC2 {
            if seg + 9 > bytes.len() {
                return Err("truncated frame header");
            }
            let height = u16::from_be_bytes([bytes[seg + 5], bytes[seg + 6]]) as u32;
            let width = u16::from_be_bytes([bytes[seg + 7], bytes[seg + 8]]) as u32;
            if width == 0 || height == 0 {
                return Err("zero dimension");
            }
            return Ok((width, height));
        }
        if len < 2 {
            return Err("invalid segment length");
        }
        pos = seg + 2 + len;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub bound: usize,
    pub resized: usize,
    pub unmatched_elements: Vec<String>,
    pub orphan_assets: Vec<String>,
    /// Stems shared by more than one asset file; PNG wins.
    pub collisions: Vec<String>,
}

/// Binds image elements to assets and overwrites their size with the asset's
/// true dimensions. Positions are left untouched.
///
/// An element keeps a pre-existing `asset_ref` when that file exists;
/// otherwise it binds by filename stem, case-sensitive first, then
/// case-insensitive.
pub fn align(doc: &DesignDocument, assets: &[AssetRecord]) -> (DesignDocument, AlignmentReport) {
    let mut by_stem: BTreeMap<&str, &AssetRecord> = BTreeMap::new();
    let mut by_lower: BTreeMap<String, &AssetRecord> = BTreeMap::new();
    let mut collisions = BTreeSet::new();
    for asset in assets {
        let stem = asset.stem();
        match by_stem.get(stem) {
            Some(existing) => {
                collisions.insert(stem.to_string());
                if existing.format != ImageFormat::Png && asset.format == ImageFormat::Png {
                    by_stem.insert(stem, asset);
                }
            }
            None => {
                by_stem.insert(stem, asset);
            }
        }
        let lower = stem.to_lowercase();
        let keep_existing = by_lower.get(&lower).is_some_and(|e| e.format == ImageFormat::Png || asset.format != ImageFormat::Png);
        if !keep_existing {
            by_lower.insert(lower, asset);
        }
    }
    for stem in &collisions {
        log::info!("asset stem collision for '{stem}', preferring PNG");
    }

    let mut out = doc.clone();
    out.assets = assets.to_vec();
    let mut report = AlignmentReport { collisions: collisions.into_iter().collect(), ..Default::default() };
    let mut used: BTreeSet<String> = BTreeSet::new();

    out.for_each_mut(|e| {
        if e.kind != ElementType::Image {
            return;
        }
        let asset = e
            .asset_ref
            .as_deref()
            .and_then(|file| assets.iter().find(|a| a.file == file))
            .or_else(|| by_stem.get(e.name.as_str()).copied())
            .or_else(|| by_lower.get(&e.name.to_lowercase()).copied());
        match asset {
            Some(a) => {
                report.bound += 1;
                let (w, h) = (a.width as i64, a.height as i64);
                if e.size.width != w || e.size.height != h {
                    report.resized += 1;
                    e.size.width = w;
                    e.size.height = h;
                }
                e.asset_ref = Some(a.file.clone());
                used.insert(a.file.clone());
            }
            None => {
                if let Some(dangling) = e.asset_ref.take() {
                    log::warn!("element {} references missing asset {dangling}", e.id);
                }
                report.unmatched_elements.push(e.id.clone());
            }
        }
    });
    report.orphan_assets = assets.iter().filter(|a| !used.contains(&a.file)).map(|a| a.file.clone()).collect();
    (out, report)
}

/// Fraction of image elements bound to an asset present in the document
/// (1.0 when there are no image elements).
pub fn resource_traceability(doc: &DesignDocument) -> f64 {
    let images: Vec<_> = doc.iter().into_iter().filter(|e| e.kind == ElementType::Image).collect();
    if images.is_empty() {
        return 1.0;
    }
    let bound = images
        .iter()
        .filter(|e| e.asset_ref.as_deref().is_some_and(|f| doc.asset(f).is_some()))
        .count();
    bound as f64 / images.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jpeg_with_sof(marker: u8, w: u16, h: u16) -> Vec<u8> {
        let mut b = vec![0xFF, 0xD8];
        // APP0 segment
        b.extend_from_slice(&[0xFF, 0xE0, 0x00, 0x06, b'J', b'F', b'I', b'F']);
        b.extend_from_slice(&[0xFF, marker, 0x00, 0x0B, 0x08]);
        b.extend_from_slice(&h.to_be_bytes());
        b.extend_from_slice(&w.to_be_bytes());
        b.extend_from_slice(&[0x01, 0x01, 0x11, 0x00]);
        b.extend_from_slice(&[0xFF, 0xD9]);
        b
    }

    #[test]
    fn jpeg_sof0_and_sof2() {
        assert_eq!(jpeg_dimensions(&jpeg_with_sof(0xC0, 640, 480)), Ok((640, 480)));
        assert_eq!(jpeg_dimensions(&jpeg_with_sof(0xC2, 3, 7)), Ok((3, 7)));
        assert!(jpeg_dimensions(&[0xFF, 0xD8, 0xFF, 0xD9]).is_err());
        assert!(jpeg_dimensions(b"not a jpeg").is_err());
    }

    #[test]
    fn png_header_checks() {
        let mut b = b"\x89PNG\r\n\x1a\n\0\0\0\x0dIHDR".to_vec();
        b.extend_from_slice(&120u32.to_be_bytes());
        assert_eq!(png_dimensions(&b), Err("truncated IHDR"));
        b.extend_from_slice(&40u32.to_be_bytes());
        assert_eq!(png_dimensions(&b), Ok((120, 40)));
    }

    #[test]
    fn stems() {
        assert_eq!(file_stem("btn.start.png"), "btn.start");
        assert_eq!(file_stem(".hidden"), ".hidden");
        assert_eq!(file_stem("plain"), "plain");
    }
}
