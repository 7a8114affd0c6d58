//! Bind image elements to asset files and adopt their true pixel sizes.

use psd2code::assets::{align, resource_traceability, scan_assets};
use psd2code::fixtures;
use psd2code::raster::write_png;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut rng = fixtures::rng(3);
    let mut doc = fixtures::random_document(&mut rng);

    // Forget the bindings and make every asset one pixel wider than its element.
    let images: Vec<_> = doc.iter().into_iter().filter(|e| e.asset_ref.is_some()).map(|e| (e.name.clone(), e.size)).collect();
    for (name, size) in &images {
        let img = fixtures::asset_pixels(&mut rng, size.width as u32 + 1, size.height as u32);
        write_png(&img, dir.path().join(format!("{name}.png")))?;
    }
    doc.for_each_mut(|e| e.asset_ref = None);
    doc.assets.clear();

    let assets = scan_assets(dir.path())?;
    let (aligned, report) = align(&doc, &assets);
    println!("{report:#?}");
    println!("traceability {:.2}", resource_traceability(&aligned));
    Ok(())
}
