use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricConfig;
use crate::codecheck::{BoxKind, ComputedLayout};
use crate::design::{DesignDocument, ElementType};
use crate::geometry::PixelBox;

/// Approximate mAP. Every detection has confidence 1, so AP at a threshold
/// is the F-measure 2·TP / (2·TP + FP + FN).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutMetrics {
    pub map: f64,
    /// `None` when no ground-truth box falls in the stratum.
    pub ap_small: Option<f64>,
    pub ap_medium: Option<f64>,
    pub ap_large: Option<f64>,
    /// Threshold (as a two-decimal string) → AP averaged over classes.
    pub per_threshold: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Stratum {
    Small,
    Medium,
    Large,
}

fn stratum(area: i64, cfg: &MetricConfig) -> Stratum {
    if area < cfg.area_small {
        Stratum::Small
    } else if area < cfg.area_medium {
        Stratum::Medium
    } else {
        Stratum::Large
    }
}

/// Greedy one-to-one matching in descending IoU (ties: truth index, then
/// prediction index). Returns `(truth, pred, iou)` with iou > 0.
fn greedy_match(truth: &[PixelBox], pred: &[PixelBox]) -> Vec<(usize, usize, f64)> {
    let mut pairs = Vec::new();
    for (i, t) in truth.iter().enumerate() {
        for (j, p) in pred.iter().enumerate() {
            let iou = t.iou(p);
            if iou > 0.0 {
                pairs.push((i, j, iou));
            }
        }
    }
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut ut = vec![false; truth.len()];
    let mut up = vec![false; pred.len()];
    let mut out = Vec::new();
    for (i, j, iou) in pairs {
        if !ut[i] && !up[j] {
            ut[i] = true;
            up[j] = true;
            out.push((i, j, iou));
        }
    }
    out
}

/// F-measure AP of one class at one threshold, optionally within a stratum.
/// `None` when undefined (no truth in the stratum, or nothing at all).
fn ap_at(truth: &[PixelBox], pred: &[PixelBox], matches: &[(usize, usize, f64)], t: f64, only: Option<Stratum>, cfg: &MetricConfig) -> Option<f64> {
    let in_s = |b: &PixelBox| only.is_none_or(|s| stratum(b.area(), cfg) == s);
    let n_truth = truth.iter().filter(|b| in_s(b)).count();
    // A prediction belongs to its matched truth's stratum, else its own.
    let mut pred_stratum_ok: Vec<bool> = pred.iter().map(in_s).collect();
    for &(i, j, _) in matches {
        pred_stratum_ok[j] = in_s(&truth[i]);
    }
    let tp = matches.iter().filter(|(i, _, iou)| *iou >= t && in_s(&truth[*i])).count();
    let n_pred = pred_stratum_ok.iter().filter(|v| **v).count();
    if only.is_some() && n_truth == 0 {
        return None;
    }
    if n_truth == 0 && n_pred == 0 {
        return None;
    }
    let fp = n_pred - tp;
    let fn_ = n_truth - tp;
    Some(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64)
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn layout_map(predicted: &ComputedLayout, truth: &DesignDocument, cfg: &MetricConfig) -> LayoutMetrics {
    let classes = [(ElementType::Image, BoxKind::Image), (ElementType::Text, BoxKind::Text)];
    let mut all = Vec::new();
    let mut strata: [Vec<f64>; 3] = Default::default();
    let mut per_threshold: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (et, bk) in classes {
        let t_boxes: Vec<PixelBox> = truth.leaves().into_iter().filter(|e| e.kind == et).map(|e| e.bbox()).collect();
        let p_boxes: Vec<PixelBox> = predicted.leaves().into_iter().filter(|b| b.kind == bk).map(|b| b.rect).collect();
        let m = greedy_match(&t_boxes, &p_boxes);
        for &t in &cfg.iou_thresholds {
            if let Some(ap) = ap_at(&t_boxes, &p_boxes, &m, t, None, cfg) {
                all.push(ap);
                per_threshold.entry(format!("{t:.2}")).or_default().push(ap);
            }
            for (k, s) in [Stratum::Small, Stratum::Medium, Stratum::Large].into_iter().enumerate() {
                if let Some(ap) = ap_at(&t_boxes, &p_boxes, &m, t, Some(s), cfg) {
                    strata[k].push(ap);
                }
            }
        }
    }
    LayoutMetrics {
        // Nothing to detect and nothing detected counts as full agreement.
        map: mean(&all).unwrap_or(1.0),
        ap_small: mean(&strata[0]),
        ap_medium: mean(&strata[1]),
        ap_large: mean(&strata[2]),
        per_threshold: per_threshold.into_iter().map(|(k, v)| (k, mean(&v).unwrap_or(0.0))).collect(),
    }
}
