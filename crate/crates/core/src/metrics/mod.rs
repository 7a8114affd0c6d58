//! Evaluation metrics for generated pages and the statistics to compare runs.

mod code;
mod layout;
mod report;
mod stats;
mod visual;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use code::{ast_match, codebleu, dataflow_match, tokenize, traditional_similarity, CodeBleu};
pub use layout::{layout_map, LayoutMetrics};
pub use report::{success_rates, Aggregate, EvaluationReport, MetricRow, SuccessCounts, SuccessRates, CSV_COLUMNS};
pub use stats::{one_way_anova, paired_stats, regularized_incomplete_beta, student_t_cdf, student_t_quantile, AnovaResult, StatsSummary};
pub use visual::{align_images, gaussian_kernel, luma, mse, psnr, ssim};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("image dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("image {width}x{height} is smaller than the {window}x{window} window")]
    ImageTooSmall { width: u32, height: u32, window: usize },
    #[error("no samples")]
    DivisionByZero,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid metric configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsimConfig {
    pub window: usize,
    pub gaussian_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self { window: 11, gaussian_sigma: 1.5, k1: 0.01, k2: 0.03, dynamic_range: 255.0 }
    }
}

impl SsimConfig {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodeBleuWeights {
    pub ngram: f64,
    pub weighted_ngram: f64,
    pub ast: f64,
    pub dataflow: f64,
}

impl Default for CodeBleuWeights {
    fn default() -> Self {
        Self { ngram: 0.25, weighted_ngram: 0.25, ast: 0.25, dataflow: 0.25 }
    }
}

pub const DEFAULT_KEYWORDS: &[&str] = &[
    "position", "absolute", "relative", "background-image", "background-color", "background-size", "z-index", "className", "div", "span",
    "img", "p", "src", "alt", "width", "height", "top", "left", "opacity", "font-size", "color", "url", "px", "import", "export",
    "default", "function", "return",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub ssim: SsimConfig,
    pub psnr_cap_db: f64,
    pub codebleu_weights: CodeBleuWeights,
    pub keyword_list: Vec<String>,
    pub keyword_weight: f64,
    pub iou_thresholds: Vec<f64>,
    pub area_small: i64,
    pub area_medium: i64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            ssim: SsimConfig::default(),
            psnr_cap_db: 99.0,
            codebleu_weights: CodeBleuWeights::default(),
            keyword_list: DEFAULT_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            keyword_weight: 5.0,
            // 0.50, 0.55, ..., 0.95, built from integers to avoid drift.
            iou_thresholds: (0..10).map(|i| f64::from(50 + 5 * i) / 100.0).collect(),
            area_small: 32 * 32,
            area_medium: 96 * 96,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        let w = &self.codebleu_weights;
        let sum = w.ngram + w.weighted_ngram + w.ast + w.dataflow;
        if (sum - 1.0).abs() > 1e-9 || [w.ngram, w.weighted_ngram, w.ast, w.dataflow].iter().any(|v| *v < 0.0) {
            return Err(MetricsError::InvalidConfig(format!("codebleu weights must be non-negative and sum to 1, got {sum}")));
        }
        if self.iou_thresholds.is_empty() || self.iou_thresholds.windows(2).any(|p| p[0] >= p[1]) {
            return Err(MetricsError::InvalidConfig("iou thresholds must be non-empty and strictly increasing".into()));
        }
        if self.iou_thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(MetricsError::InvalidConfig("iou thresholds must lie in [0, 1]".into()));
        }
        if self.ssim.window == 0 || self.ssim.window.is_multiple_of(2) || self.ssim.gaussian_sigma <= 0.0 {
            return Err(MetricsError::InvalidConfig("ssim window must be odd and sigma positive".into()));
        }
        if self.area_small >= self.area_medium {
            return Err(MetricsError::InvalidConfig("area_small must be below area_medium".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = MetricConfig::default();
        c.validate().unwrap();
        assert_eq!(c.iou_thresholds.len(), 10);
        assert_eq!(c.iou_thresholds[0], 0.5);
        assert_eq!(c.iou_thresholds[9], 0.95);
        assert!((c.ssim.c1() - 6.5025).abs() < 1e-12);
        assert!((c.ssim.c2() - 58.5225).abs() < 1e-9);
    }

    #[test]
    fn bad_configs() {
        let mut c = MetricConfig::default();
        c.codebleu_weights.ast = 0.5;
        assert!(c.validate().is_err());
        let c = MetricConfig { iou_thresholds: vec![0.5, 0.5], ..MetricConfig::default() };
        assert!(c.validate().is_err());
    }
}
