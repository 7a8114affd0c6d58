use proptest::prelude::*;
use psd2code::codecheck::{extract_blocks, validate};
use psd2code::fixtures;
use psd2code::llm::{BackendKind, Client, GenerationParams};
use psd2code::metrics::{codebleu, layout_map, one_way_anova, paired_stats, ssim, student_t_cdf, student_t_quantile, traditional_similarity, MetricConfig};
use psd2code::prompt::{build_prompt, PromptOptions};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

fn template(seed: u64) -> (psd2code::design::DesignDocument, psd2code::codecheck::GeneratedCode) {
    let doc = fixtures::random_document(&mut fixtures::rng(seed));
    let bundle = build_prompt(&doc, &PromptOptions::default()).unwrap();
    let response = Client::new(BackendKind::Template, GenerationParams::default()).generate(&bundle).unwrap();
    (doc, extract_blocks(&response).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn codebleu_of_unrelated_programs_is_bounded(a in any::<u64>(), b in any::<u64>()) {
        let cfg = MetricConfig::default();
        let ((_, x), (_, y)) = (template(a), template(b));
        let s = codebleu(&x, &y, &cfg);
        for v in [s.score, s.ngram, s.weighted_ngram, s.ast, s.dataflow] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let t = traditional_similarity(&x.scss, &y.scss);
        prop_assert!((0.0..=1.0).contains(&t));
    }

    #[test]
    fn cross_document_layout_map_is_bounded(a in any::<u64>(), b in any::<u64>()) {
        let ((doc_a, _), (_, code_b)) = (template(a), template(b));
        if let Some(layout) = validate(&code_b, &doc_a).layout {
            let m = layout_map(&layout, &doc_a, &MetricConfig::default());
            prop_assert!((0.0..=1.0).contains(&m.map));
        }
    }

    #[test]
    fn ssim_is_symmetric(seed in any::<u64>()) {
        let mut rng = fixtures::rng(seed);
        let a = fixtures::asset_pixels(&mut rng, 24, 20);
        let b = fixtures::asset_pixels(&mut rng, 24, 20);
        let cfg = MetricConfig::default().ssim;
        let (ab, ba) = (ssim(&a, &b, &cfg).unwrap(), ssim(&b, &a, &cfg).unwrap());
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ab <= 1.0);
    }

    #[test]
    fn t_distribution_matches_statrs(t in -12.0f64..12.0, df in 1.0f64..60.0) {
        let oracle = StudentsT::new(0.0, 1.0, df).unwrap();
        prop_assert!((student_t_cdf(t, df) - oracle.cdf(t)).abs() < 1e-9);
        let p = oracle.cdf(t).clamp(1e-6, 1.0 - 1e-6);
        prop_assert!((student_t_cdf(student_t_quantile(p, df), df) - p).abs() < 1e-8);
    }

    #[test]
    fn paired_p_value_matches_statrs(d in proptest::collection::vec(-5.0f64..5.0, 3..30)) {
        let b = vec![0.0; d.len()];
        if let Ok(s) = paired_stats(&d, &b) {
            let oracle = 2.0 * StudentsT::new(0.0, 1.0, s.df).unwrap().cdf(-s.t_statistic.abs());
            prop_assert!((s.p_value - oracle).abs() < 1e-9);
            prop_assert!(s.ci95.0 <= s.mean_diff && s.mean_diff <= s.ci95.1);
        }
    }

    #[test]
    fn anova_p_value_matches_statrs(groups in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 2..12), 2..5)) {
        let refs: Vec<&[f64]> = groups.iter().map(Vec::as_slice).collect();
        if let Ok(r) = one_way_anova(&refs) {
            let oracle = 1.0 - FisherSnedecor::new(r.df_between, r.df_within).unwrap().cdf(r.f);
            prop_assert!((r.p_value - oracle).abs() < 1e-8, "{} vs {}", r.p_value, oracle);
        }
    }
}
