//! Every metric family on small inputs, ending with a paired comparison.

use psd2code::codecheck::{validate, GeneratedCode};
use psd2code::fixtures;
use psd2code::metrics::{codebleu, layout_map, mse, paired_stats, psnr, ssim, traditional_similarity, MetricConfig};
use psd2code::raster::RasterImage;

fn main() {
    let cfg = MetricConfig::default();

    let a = fixtures::asset_pixels(&mut fixtures::rng(1), 32, 32);
    let mut b = a.clone();
    for y in 8..24 {
        for x in 8..24 {
            b.put(x, y, [0, 0, 0, 255]);
        }
    }
    let flat = RasterImage::filled(32, 32, [128, 128, 128, 255]);
    println!("mse {:.2}  psnr {:.2} dB  ssim {:.4}", mse(&a, &b).unwrap(), psnr(&a, &b, cfg.psnr_cap_db).unwrap(), ssim(&a, &b, &cfg.ssim).unwrap());
    println!("ssim against flat grey {:.4}", ssim(&a, &flat, &cfg.ssim).unwrap());

    let truth = GeneratedCode::new(
        "export default function Page() { return (<div className=\"page\"><p className=\"title\">Hi</p></div>); }",
        ".page { width: 100px; height: 50px; }\n.title { left: 4px; top: 4px; width: 60px; height: 16px; }\n",
    );
    let cand = GeneratedCode::new(truth.jsx.clone(), truth.scss.replace("left: 4px", "left: 9px"));
    let cb = codebleu(&cand, &truth, &cfg);
    println!("codebleu {:.4} (ngram {:.3}, weighted {:.3}, ast {:.3}, dataflow {:.3})", cb.score, cb.ngram, cb.weighted_ngram, cb.ast, cb.dataflow);
    println!("traditional {:.4}", traditional_similarity(&cand.scss, &truth.scss));

    let doc = fixtures::random_document(&mut fixtures::rng(2));
    let code = psd2code::llm::template::render_code(&psd2code::prompt::ConstraintEcho::from_document(&doc));
    let layout = validate(&GeneratedCode::new(code.0, code.1), &doc).layout.unwrap();
    println!("template mAP {:.3}", layout_map(&layout, &doc, &cfg).map);

    let s = paired_stats(&[0.71, 0.64, 0.80, 0.77, 0.69], &[0.62, 0.60, 0.71, 0.70, 0.66]).unwrap();
    println!("t = {:.3}, p = {:.4}, d = {:.3}, 95% CI {:?}", s.t_statistic, s.p_value, s.cohens_d, s.ci95);
}
