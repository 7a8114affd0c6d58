//! Seeded synthetic data: random layer trees, random design documents and
//! complete sample corpora (design.psd, assets, screenshot, truth code and
//! recorded replay responses).

use std::path::{Path, PathBuf};

use image::codecs::jpeg::JpegEncoder;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assets::{AssetRecord, ImageFormat};
use crate::codecheck::validate_response;
use crate::design::{DesignDocument, Dimensions, ElementNode, ElementType, Position, Size};
use crate::geometry::Rect;
use crate::llm::{record_fixture, template};
use crate::pipeline::{prepare, prompt_options, RunConfig, SampleLayout, REPLAY_DIR};
use crate::prompt::{build_prompt, Ablation, ConstraintEcho};
use crate::psd::{byte_to_opacity, write_synthetic_psd, LayerNode, PsdHeader, RawDesignInput};
use crate::raster::{render, write_png, AssetStore, RasterImage, WHITE};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const NAME_PARTS: &[&str] = &["hero", "title", "icon", "card", "avatar", "badge", "标题", "按钮", "Überschrift", "price tag", "logo"];
const TEXTS: &[&str] = &["Hello", "限时优惠 50%", "Sign in", "¥ 99.00", "Naïve café", "Line one\nLine two", "quote \"this\" & <that>", "12:30"];

fn random_rect(rng: &mut impl Rng, w: i32, h: i32) -> Rect {
    let left = rng.gen_range(-20..w);
    let top = rng.gen_range(-20..h);
    let width = rng.gen_range(0..=w / 2);
    let height = rng.gen_range(0..=h / 2);
    Rect::new(top, left, top + height, left + width)
}

/// A random layer tree with at most `max_layers` layers and depth at most
/// `max_depth`. Opacities are byte-exact so they survive a PSD round trip.
pub fn random_layer_tree(rng: &mut impl Rng, max_depth: usize, max_layers: usize) -> RawDesignInput {
    let (w, h) = (rng.gen_range(16..=800u32), rng.gen_range(16..=1200u32));
    let mut budget = rng.gen_range(1..=max_layers.max(1));
    let mut roots = Vec::new();
    while budget > 0 {
        roots.push(random_layer(rng, 1, max_depth, &mut budget, w as i32, h as i32));
    }
    RawDesignInput::new(PsdHeader::rgb(w, h), roots)
}

fn random_layer(rng: &mut impl Rng, depth: usize, max_depth: usize, budget: &mut usize, w: i32, h: i32) -> LayerNode {
    *budget -= 1;
    let name = format!("{} {}", NAME_PARTS.choose(rng).expect("non-empty"), rng.gen_range(0..100));
    let bounds = random_rect(rng, w, h);
    let mut node = match rng.gen_range(0..3) {
        0 if depth < max_depth && *budget > 0 => {
            let n = rng.gen_range(0..=(*budget).min(4));
            let mut children = Vec::new();
            for _ in 0..n {
                if *budget == 0 {
                    break;
                }
                children.push(random_layer(rng, depth + 1, max_depth, budget, w, h));
            }
            LayerNode::group(name, bounds, children)
        }
        1 => LayerNode::text(name, bounds, *TEXTS.choose(rng).expect("non-empty")),
        _ => LayerNode::pixel(name, bounds),
    };
    node = node.with_opacity(byte_to_opacity(rng.gen()));
    if rng.gen_bool(0.15) {
        node = node.hidden();
    }
    node
}

/// A random, already aligned document: every image is bound to an asset of
/// exactly its size and every box lies inside the page.
pub fn random_document(rng: &mut impl Rng) -> DesignDocument {
    let page = Dimensions { width: rng.gen_range(120..=480), height: rng.gen_range(160..=960) };
    let mut assets = Vec::new();
    let mut counter = 0;
    let n_roots = rng.gen_range(1..=6);
    let mut elements: Vec<ElementNode> = (0..n_roots).map(|_| random_element(rng, page, 1, &mut counter, &mut assets)).collect();
    for e in &mut elements {
        refit(e);
    }
    let mut doc = DesignDocument { dimensions: page, elements, assets };
    let mut n = 0;
    doc.for_each_mut(|e| {
        n += 1;
        e.id = format!("e{n}");
    });
    doc.renumber_z();
    doc
}

fn random_element(rng: &mut impl Rng, page: Dimensions, depth: usize, counter: &mut usize, assets: &mut Vec<AssetRecord>) -> ElementNode {
    *counter += 1;
    let w = rng.gen_range(4..=page.width / 2);
    let h = rng.gen_range(4..=page.height / 3);
    let x = rng.gen_range(0..=page.width - w);
    let y = rng.gen_range(0..=page.height - h);
    let name = format!("{}-{}", NAME_PARTS.choose(rng).expect("non-empty"), counter);
    let mut e = ElementNode {
        id: String::new(),
        name: name.clone(),
        position: Position { x, y },
        size: Size { width: w, height: h },
        kind: ElementType::Image,
        text_content: None,
        asset_ref: None,
        opacity: if rng.gen_bool(0.2) { f64::from(rng.gen_range(1..=9u8)) / 10.0 } else { 1.0 },
        z_hint: 0,
        children: Vec::new(),
    };
    match rng.gen_range(0..4) {
        0 if depth < 3 => {
            e.kind = ElementType::Container;
            let n = rng.gen_range(1..=3);
            e.children = (0..n).map(|_| random_element(rng, page, depth + 1, counter, assets)).collect();
        }
        1 => {
            e.kind = ElementType::Text;
            e.text_content = Some(TEXTS.choose(rng).expect("non-empty").to_string());
        }
        _ => {
            let file = format!("img_{counter:03}.png");
            assets.push(AssetRecord { file: file.clone(), path: PathBuf::from(&file), width: w as u32, height: h as u32, format: ImageFormat::Png });
            e.asset_ref = Some(file);
        }
    }
    e
}

fn refit(e: &mut ElementNode) -> crate::geometry::PixelBox {
    if e.kind == ElementType::Container {
        let mut it = e.children.iter_mut().map(refit);
        let first = it.next().expect("containers have children");
        let b = it.fold(first, |a, b| a.union(&b));
        e.position = Position { x: b.x, y: b.y };
        e.size = Size { width: b.width, height: b.height };
    }
    e.bbox()
}

/// Deterministic asset pixels: a base colour with a diagonal stripe.
pub fn asset_pixels(rng: &mut impl Rng, width: u32, height: u32) -> RasterImage {
    let base = [rng.gen(), rng.gen(), rng.gen(), 255];
    let stripe = [255 - base[0], 255 - base[1], 255 - base[2], 255];
    let period = rng.gen_range(4..=12);
    let mut img = RasterImage::filled(width, height, base);
    for y in 0..height {
        for x in 0..width {
            if (x + y) % period < 2 {
                img.put(x, y, stripe);
            }
        }
    }
    img
}

fn write_asset(path: &Path, img: &RasterImage) -> std::io::Result<()> {
    let jpeg = path.extension().is_some_and(|e| e == "jpg" || e == "jpeg");
    if jpeg {
        let rgb: Vec<u8> = img.pixels.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect();
        let mut bytes = Vec::new();
        JpegEncoder::new_with_quality(&mut bytes, 90)
            .encode(&rgb, img.width, img.height, image::ExtendedColorType::Rgb8)
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        std::fs::write(path, bytes)
    } else {
        write_png(img, path).map_err(|e| std::io::Error::other(e.to_string()))
    }
}

/// Layer tree of one corpus sample plus the assets it needs
/// (`file`, width, height).
fn sample_design(rng: &mut impl Rng, index: usize) -> (RawDesignInput, Vec<(String, u32, u32)>) {
    let (w, h) = (240i32, 360i32);
    let mut layers = Vec::new();
    let mut assets = Vec::new();
    let bg_ext = if index % 2 == 1 { "jpg" } else { "png" };
    layers.push(LayerNode::pixel("bg-page", Rect::new(0, 0, h, w)));
    assets.push((format!("bg-page.{bg_ext}"), w as u32, h as u32));

    // A banner group completely covered by its art folds into one image
    // named after the group.
    let banner = Rect::new(12, 12, 92, w - 12);
    layers.push(LayerNode::group("banner", banner, vec![LayerNode::pixel("banner-art", banner)]));
    // Asset one pixel narrower than the layer, so alignment has work to do.
    assets.push(("banner.png".into(), banner.width() as u32 - 1, banner.height() as u32));

    layers.push(LayerNode::text("headline", Rect::new(100, 16, 124, 200), format!("Sample {index:03}")));

    let cards = rng.gen_range(1..=3);
    for k in 0..cards {
        let top = 136 + k * 72;
        let icon = Rect::new(top + 8, 20, top + 56, 68);
        let label = Rect::new(top + 20, 80, top + 44, 220);
        let name = format!("card-{k}");
        let icon_name = format!("card-{k}-icon");
        let mut group = LayerNode::group(
            name,
            Rect::new(top, 12, top + 64, w - 12),
            vec![LayerNode::pixel(icon_name.clone(), icon), LayerNode::text(format!("card-{k}-label"), label, format!("Item {k} · {}", rng.gen_range(10..99)))],
        );
        if rng.gen_bool(0.3) {
            group = group.with_opacity(byte_to_opacity(204));
        }
        layers.push(group);
        assets.push((format!("{icon_name}.png"), icon.width() as u32, icon.height() as u32));
    }
    // Removed by the filters: hidden, near-transparent, tiny, default name.
    layers.push(LayerNode::pixel("ghost", Rect::new(10, 10, 50, 50)).hidden());
    layers.push(LayerNode::pixel("haze", Rect::new(0, 0, 100, 100)).with_opacity(byte_to_opacity(5)));
    layers.push(LayerNode::pixel("speck", Rect::new(5, 5, 6, 6)));
    layers.push(LayerNode::pixel("Layer 7", Rect::new(200, 20, 240, 60)));
    (RawDesignInput::new(PsdHeader::rgb(w as u32, h as u32), layers), assets)
}

/// Writes `n` samples under `dir` plus a `_replay` directory holding the
/// template response for every ablation setting of every sample. Returns
/// the sample directories.
pub fn write_corpus(dir: impl AsRef<Path>, n: usize, seed: u64) -> std::io::Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir.join(REPLAY_DIR))?;
    let mut out = Vec::new();
    for i in 0..n {
        let mut rng = rng(seed.wrapping_mul(1_000_003).wrapping_add(i as u64));
        out.push(write_sample(dir, i, &mut rng)?);
    }
    Ok(out)
}

fn other(e: impl std::fmt::Display) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

fn write_sample(corpus: &Path, index: usize, rng: &mut impl Rng) -> std::io::Result<PathBuf> {
    let root = corpus.join(format!("sample_{index:03}"));
    let assets_dir = root.join("assets");
    std::fs::create_dir_all(&assets_dir)?;
    let (design, assets) = sample_design(rng, index);
    write_synthetic_psd(&design, root.join("design.psd")).map_err(other)?;
    for (file, w, h) in &assets {
        write_asset(&assets_dir.join(file), &asset_pixels(rng, *w, *h))?;
    }

    // Truth code and the reference screenshot come from the template path.
    let sample = SampleLayout::discover(&root).map_err(other)?;
    let cfg = RunConfig::default();
    let prepared = prepare(&sample, &cfg).map_err(other)?;
    let echo = ConstraintEcho::from_document(&prepared.doc);
    let (jsx, scss) = template::render_code(&echo);
    let truth = root.join("truth");
    std::fs::create_dir_all(&truth)?;
    std::fs::write(truth.join("index.jsx"), &jsx)?;
    std::fs::write(truth.join("index.scss"), &scss)?;
    let response = template::render_response(&echo);
    let report = validate_response(&response, &prepared.doc);
    let layout = report.layout.ok_or_else(|| other("template output failed to parse"))?;
    let store = AssetStore::load(&prepared.assets).map_err(other)?;
    let shot = render(&layout, &store, prepared.doc.dimensions, WHITE).map_err(other)?;
    write_png(&shot.image, root.join("screenshot.png")).map_err(other)?;

    let sample = SampleLayout::discover(&root).map_err(other)?;
    for ablation in [
        Ablation::default(),
        Ablation { no_structural: true, ..Default::default() },
        Ablation { no_attachments: true, ..Default::default() },
        Ablation { simple_prompt: true, ..Default::default() },
    ] {
        let cfg = RunConfig { ablation, ..RunConfig::default() };
        let bundle = build_prompt(&prepared.doc, &prompt_options(&sample, &cfg)).map_err(other)?;
        record_fixture(&bundle, &response, corpus.join(REPLAY_DIR)).map_err(other)?;
    }
    Ok(root)
}
