use serde::{Deserialize, Serialize};

use super::MetricsError;

pub const CSV_COLUMNS: &[&str] = &[
    "sample_id", "codebleu", "traditional", "ssim", "psnr_db", "mse", "map", "ap_s", "ap_m", "ap_l", "codegen_ok", "render_ok", "resource_ok", "resized",
];

/// One sample's scores; `None` where the metric could not be computed.
/// Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub sample_id: String,
    pub codebleu: Option<f64>,
    pub traditional: Option<f64>,
    pub ssim: Option<f64>,
    pub psnr_db: Option<f64>,
    pub mse: Option<f64>,
    pub map: Option<f64>,
    pub ap_s: Option<f64>,
    pub ap_m: Option<f64>,
    pub ap_l: Option<f64>,
    pub codegen_ok: bool,
    pub render_ok: bool,
    pub resource_ok: bool,
    pub resized: bool,
}

impl MetricRow {
    pub fn failed(sample_id: impl Into<String>) -> Self {
        Self {
            sample_id: sample_id.into(),
            codebleu: None,
            traditional: None,
            ssim: None,
            psnr_db: None,
            mse: None,
            map: None,
            ap_s: None,
            ap_m: None,
            ap_l: None,
            codegen_ok: false,
            render_ok: false,
            resource_ok: false,
            resized: false,
        }
    }

    fn numeric(&self) -> [(&'static str, Option<f64>); 9] {
        [
            ("codebleu", self.codebleu),
            ("traditional", self.traditional),
            ("ssim", self.ssim),
            ("psnr_db", self.psnr_db),
            ("mse", self.mse),
            ("map", self.map),
            ("ap_s", self.ap_s),
            ("ap_m", self.ap_m),
            ("ap_l", self.ap_l),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub metric: String,
    pub n: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation; `None` below two values.
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SuccessCounts {
    pub n_total: usize,
    pub n_codegen_ok: usize,
    pub n_render_ok: usize,
    pub n_resource_ok: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessRates {
    pub codegen: f64,
    pub render: f64,
    pub resource: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Sorted by sample id.
    pub rows: Vec<MetricRow>,
    pub aggregates: Vec<Aggregate>,
    pub counts: SuccessCounts,
    pub rates: Option<SuccessRates>,
}

pub fn success_rates(report: &EvaluationReport) -> Result<SuccessRates, MetricsError> {
    let c = report.counts;
    if c.n_total == 0 {
        return Err(MetricsError::DivisionByZero);
    }
    let n = c.n_total as f64;
    Ok(SuccessRates { codegen: c.n_codegen_ok as f64 / n, render: c.n_render_ok as f64 / n, resource: c.n_resource_ok as f64 / n })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl EvaluationReport {
    pub fn from_rows(mut rows: Vec<MetricRow>) -> Self {
        rows.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        let counts = SuccessCounts {
            n_total: rows.len(),
            n_codegen_ok: rows.iter().filter(|r| r.codegen_ok).count(),
            n_render_ok: rows.iter().filter(|r| r.render_ok).count(),
            n_resource_ok: rows.iter().filter(|r| r.resource_ok).count(),
        };
        let aggregates = CSV_COLUMNS[1..10]
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let vals: Vec<f64> = rows.iter().filter_map(|r| r.numeric()[k].1).collect();
                let n = vals.len();
                let mean = (n > 0).then(|| vals.iter().sum::<f64>() / n as f64);
                let sd = (n > 1).then(|| {
                    let m = mean.unwrap_or(0.0);
                    (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
                });
                Aggregate { metric: name.to_string(), n, mean, sd }
            })
            .collect();
        let mut report = Self { rows, aggregates, counts, rates: None };
        report.rates = success_rates(&report).ok();
        report
    }

    pub fn aggregate(&self, metric: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.metric == metric)
    }

    /// Values of one numeric column, in row order.
    pub fn column(&self, metric: &str) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.numeric().iter().find(|(n, _)| *n == metric).and_then(|(_, v)| *v)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.sample_id.clone()];
            rec.extend(r.numeric().iter().map(|(_, v)| fmt_opt(*v)));
            rec.extend([r.codegen_ok, r.render_ok, r.resource_ok, r.resized].iter().map(|b| b.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("# Evaluation report\n\n| metric | n | mean | sd |\n|---|---:|---:|---:|\n");
        for a in &self.aggregates {
            s.push_str(&format!("| {} | {} | {} | {} |\n", a.metric, a.n, fmt_opt(a.mean), fmt_opt(a.sd)));
        }
        let c = self.counts;
        s.push_str(&format!(
            "\n| counter | value |\n|---|---:|\n| N_total | {} |\n| N_codegen_ok | {} |\n| N_render_ok | {} |\n| N_resource_ok | {} |\n",
            c.n_total, c.n_codegen_ok, c.n_render_ok, c.n_resource_ok
        ));
        if let Some(r) = self.rates {
            s.push_str(&format!(
                "\nCode generation success: {:.1}%  \nRendering success: {:.1}%  \nResource loading success: {:.1}%\n",
                100.0 * r.codegen,
                100.0 * r.render,
                100.0 * r.resource
            ));
        }
        s.push_str(
            "\nAP is reported in F-measure form, 2·TP/(2·TP+FP+FN), since generated layouts carry no confidence scores. \
             Text is rendered with an embedded bitmap font, so visual scores do not reflect font fidelity.\n",
        );
        s
    }
}
