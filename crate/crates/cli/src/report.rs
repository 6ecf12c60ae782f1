use std::io::Write;
use std::path::Path;

use cover_core::{EvalResult, ScoredSplit};
use serde::Deserialize;

use crate::CliError;

pub const CSV_HEADER: [&str; 4] = ["method", "dataset", "auroc", "fpr95"];

/// One line of a results table, in percent.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub dataset: String,
    #[serde(rename = "auroc")]
    pub auroc_pct: f64,
    #[serde(rename = "fpr95")]
    pub fpr95_pct: f64,
}

impl ReportRow {
    pub fn from_eval(method: &str, dataset: &str, r: &EvalResult) -> Self {
        Self {
            method: method.to_string(),
            dataset: dataset.to_string(),
            auroc_pct: r.auroc * 100.0,
            fpr95_pct: r.fpr_at_tpr * 100.0,
        }
    }

    fn validate(&self) -> Result<(), String> {
        for (name, v) in [("auroc", self.auroc_pct), ("fpr95", self.fpr95_pct)] {
            if !(0.0..=100.0).contains(&v) {
                return Err(format!("{} {}: {name} {v} is not a percentage", self.method, self.dataset));
            }
        }
        Ok(())
    }
}

pub fn read_rows(path: &Path) -> Result<Vec<ReportRow>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(CliError::runtime)?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(CliError::Runtime(format!("{}: header must be `{}`", path.display(), CSV_HEADER.join(","))));
    }
    reader
        .deserialize::<ReportRow>()
        .map(|row| {
            let row = row.map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            row.validate().map_err(CliError::Runtime)?;
            Ok(row)
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[ReportRow], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(CliError::runtime)?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.dataset.clone(),
            format!("{:.2}", r.auroc_pct),
            format!("{:.2}", r.fpr95_pct),
        ])
        .map_err(CliError::runtime)?;
    }
    w.flush().map_err(CliError::runtime)
}

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 220.0;
const MARGIN: f64 = 30.0;

fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    let width = (hi - lo) / bins as f64;
    for v in values {
        let i = if width > 0.0 { ((v - lo) / width) as usize } else { 0 };
        counts[i.min(bins - 1)] += 1.0;
    }
    let n = values.len().max(1) as f64;
    counts.iter().map(|c| c / n).collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Side-by-side ID/OOD score histograms, one panel per split. Bar heights
/// are fractions of each split, so ID and OOD are comparable.
pub fn histogram_svg(panels: &[(&str, &ScoredSplit)], bins: usize) -> String {
    let width = MARGIN + panels.len() as f64 * (PANEL_W + MARGIN);
    let height = PANEL_H + 3.0 * MARGIN;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for (p, (title, split)) in panels.iter().enumerate() {
        let all = split.id_scores.iter().chain(&split.ood_scores);
        let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
        let id = histogram(&split.id_scores, lo, hi, bins);
        let ood = histogram(&split.ood_scores, lo, hi, bins);
        let peak = id.iter().chain(&ood).copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let x0 = MARGIN + p as f64 * (PANEL_W + MARGIN);
        let y0 = 2.0 * MARGIN + PANEL_H;
        let bar_w = PANEL_W / bins as f64;
        svg += &format!("<text x=\"{x0}\" y=\"{}\">{}</text>\n", MARGIN, escape(title));
        for (counts, colour) in [(&id, "#1f77b4"), (&ood, "#ff7f0e")] {
            for (i, c) in counts.iter().enumerate() {
                let h = c / peak * PANEL_H;
                svg += &format!(
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{colour}\" fill-opacity=\"0.5\"/>\n",
                    x0 + i as f64 * bar_w,
                    y0 - h,
                    bar_w,
                    h
                );
            }
        }
        svg += &format!(
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{}\" y2=\"{y0}\" stroke=\"black\"/>\n<text x=\"{x0}\" y=\"{}\">{lo:.3}</text>\n<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{hi:.3}</text>\n",
            x0 + PANEL_W,
            y0 + 15.0,
            x0 + PANEL_W,
            y0 + 15.0
        );
    }
    svg += &format!(
        "<text x=\"{MARGIN}\" y=\"{}\" fill=\"#1f77b4\">ID</text>\n<text x=\"{}\" y=\"{}\" fill=\"#ff7f0e\">OOD</text>\n</svg>\n",
        height - 8.0,
        MARGIN + 30.0,
        height - 8.0
    );
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_render_with_two_decimals() {
        let r = EvalResult { auroc: 1.0, fpr_at_tpr: 0.0, threshold: 0.5, tpr_target: 0.95 };
        let mut buf = Vec::new();
        write_csv(&[ReportRow::from_eval("CoVer", "toy", &r)], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "method,dataset,auroc,fpr95\nCoVer,toy,100.00,0.00\n");
    }

    #[test]
    fn histogram_fractions_sum_to_one() {
        let h = histogram(&[0.0, 0.5, 1.0, 1.0], 0.0, 1.0, 4);
        assert_eq!(h, vec![0.25, 0.0, 0.25, 0.5]);
        let svg = histogram_svg(&[("a<b", &ScoredSplit::new(vec![1.0], vec![1.0]))], 3);
        assert!(svg.starts_with("<svg") && svg.contains("a&lt;b"));
    }
}
