use serde::{Deserialize, Serialize};

use super::MetricsError;

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = f64::from(m);
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// I_x(a, b).
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Student-t CDF with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Inverse CDF by bisection.
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    let (mut lo, mut hi) = (-1e3, 1e3);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n − 1).
fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub n: usize,
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub t_statistic: f64,
    pub df: f64,
    /// Two-sided.
    pub p_value: f64,
    pub cohens_d: f64,
    pub ci95: (f64, f64),
    /// sd / mean for each series; `None` when the mean is zero.
    pub coefficient_of_variation: (Option<f64>, Option<f64>),
    /// max − min for each series.
    pub range: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub anova_f: Option<f64>,
}

fn cv(v: &[f64]) -> Option<f64> {
    let m = mean(v);
    (m != 0.0).then(|| sd(v) / m)
}

fn range(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min
}

/// Paired t-test of `a` against `b`, with effect size and descriptive stats.
pub fn paired_stats(a: &[f64], b: &[f64]) -> Result<StatsSummary, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::DegenerateInput(format!("series lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(MetricsError::DegenerateInput("need at least two pairs".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(MetricsError::DegenerateInput("non-finite value".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let md = mean(&d);
    let sdd = sd(&d);
    if sdd == 0.0 || !sdd.is_finite() {
        return Err(MetricsError::DegenerateInput("differences have zero variance".into()));
    }
    let se = sdd / n.sqrt();
    let t = md / se;
    let df = n - 1.0;
    let p = regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5);
    let q = student_t_quantile(0.975, df);
    Ok(StatsSummary {
        n: d.len(),
        mean_diff: md,
        sd_diff: sdd,
        t_statistic: t,
        df,
        p_value: p.clamp(0.0, 1.0),
        cohens_d: md / sdd,
        ci95: (md - q * se, md + q * se),
        coefficient_of_variation: (cv(a), cv(b)),
        range: (range(a), range(b)),
        anova_f: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: f64,
    pub df_within: f64,
    pub p_value: f64,
}

/// One-way ANOVA across three or more groups.
pub fn one_way_anova(groups: &[&[f64]]) -> Result<AnovaResult, MetricsError> {
    if groups.len() < 3 {
        return Err(MetricsError::DegenerateInput("ANOVA needs at least three groups".into()));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(MetricsError::DegenerateInput("empty group".into()));
    }
    let total: usize = groups.iter().map(|g| g.len()).sum();
    let k = groups.len() as f64;
    if total as f64 <= k {
        return Err(MetricsError::DegenerateInput("not enough observations".into()));
    }
    let grand = groups.iter().flat_map(|g| g.iter()).sum::<f64>() / total as f64;
    let ss_between: f64 = groups.iter().map(|g| g.len() as f64 * (mean(g) - grand).powi(2)).sum();
    let ss_within: f64 = groups.iter().map(|g| {
        let m = mean(g);
        g.iter().map(|x| (x - m).powi(2)).sum::<f64>()
    }).sum();
    let df_between = k - 1.0;
    let df_within = total as f64 - k;
    if ss_within == 0.0 {
        return Err(MetricsError::DegenerateInput("zero within-group variance".into()));
    }
    let f = (ss_between / df_between) / (ss_within / df_within);
    let x = df_between * f / (df_between * f + df_within);
    let p = 1.0 - regularized_incomplete_beta(x, df_between / 2.0, df_within / 2.0);
    Ok(AnovaResult { f, df_between, df_within, p_value: p.clamp(0.0, 1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let s = paired_stats(&[2.0, 2.0, 2.0, 4.0], &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((s.mean_diff - 1.5).abs() < 1e-12);
        assert!((s.sd_diff - 1.0).abs() < 1e-12);
        assert!((s.t_statistic - 3.0).abs() < 1e-12);
        assert!((s.cohens_d - 1.5).abs() < 1e-12);
        assert!(s.ci95.0 <= s.mean_diff && s.mean_diff <= s.ci95.1);
    }

    #[test]
    fn degenerate() {
        assert!(paired_stats(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(paired_stats(&[1.0], &[0.0]).is_err());
        assert!(one_way_anova(&[&[1.0], &[2.0]]).is_err());
    }

    #[test]
    fn known_quantiles() {
        // t_{0.975, 10} = 2.228138851986...
        assert!((student_t_quantile(0.975, 10.0) - 2.228_138_851_986_274).abs() < 1e-9);
        assert!((student_t_cdf(0.0, 5.0) - 0.5).abs() < 1e-15);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn anova_example() {
        let r = one_way_anova(&[&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0], &[5.0, 6.0, 7.0]]).unwrap();
        // Group means 2, 3, 6; grand 11/3; SSB = 26, SSW = 6.
        assert!((r.f - (26.0 / 2.0) / (6.0 / 6.0)).abs() < 1e-12);
    }
}
