//! Turn a small hand-built layer tree into a design document.

use psd2code::geometry::Rect;
use psd2code::layers::{build_document, consistency_check, filter_layers, normalize_coordinates, FilterConfig, PresetLibrary};
use psd2code::psd::{LayerNode, PsdHeader, RawDesignInput};

fn main() {
    let roots = vec![
        LayerNode::pixel("background", Rect::new(0, 0, 640, 360)),
        // One big pixel child plus a drop shadow: folds into a single image.
        LayerNode::group(
            "hero",
            Rect::default(),
            vec![LayerNode::pixel("shadow", Rect::new(24, 24, 40, 300)), LayerNode::pixel("hero-art", Rect::new(20, 20, 220, 340))],
        ),
        LayerNode::group(
            "card",
            Rect::default(),
            vec![LayerNode::pixel("icon", Rect::new(240, 20, 288, 68)), LayerNode::text("title", Rect::new(244, 80, 268, 300), "Spring sale")],
        ),
        LayerNode::pixel("old draft", Rect::new(0, 0, 50, 50)).hidden(),
        LayerNode::pixel("Layer 3", Rect::new(10, 10, 12, 12)),
    ];
    let input = RawDesignInput::new(PsdHeader::rgb(360, 640), roots);

    let cfg = FilterConfig::default();
    let filtered = filter_layers(&input, &cfg);
    for r in &filtered.removed {
        println!("removed {:<14} {:?}", r.path, r.reason);
    }
    let normalized = normalize_coordinates(&filtered.input);
    let doc = build_document(&normalized.input, &cfg, &[], &PresetLibrary::default()).expect("non-empty");

    for e in doc.iter() {
        println!("{:<4} {:<10} {:<9} {:?}", e.id, e.name, e.kind.as_str(), e.bbox());
    }
    println!("findings: {:?}", consistency_check(&doc));
}
