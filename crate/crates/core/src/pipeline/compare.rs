use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{data_volume_report, DataVolumeReport};
use crate::pipeline::dataset::Dataset;
use crate::pipeline::eval::{run_eval, Aggregate, EvalSummary, LPIPS_STATUS};
use crate::pipeline::profile::Split;
use crate::pipeline::train::{run_training, Modality};
use crate::recon::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitRow {
    pub digit: u8,
    pub modality: Modality,
    #[serde(flatten)]
    pub metrics: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub split: Split,
    pub e: EvalSummary,
    pub f: EvalSummary,
    pub e_final_loss: f64,
    pub f_final_loss: f64,
    pub per_digit: Vec<DigitRow>,
    pub data_volume: DataVolumeReport,
    pub lpips: String,
}

fn digit_rows(e: &EvalSummary, f: &EvalSummary) -> Vec<DigitRow> {
    let mut digits: Vec<u8> = e.per_digit.keys().chain(f.per_digit.keys()).copied().collect();
    digits.sort_unstable();
    digits.dedup();
    let mut rows = Vec::new();
    for d in digits {
        for (m, s) in [(Modality::E, e), (Modality::F, f)] {
            rows.push(DigitRow {
                digit: d,
                modality: m,
                metrics: s.per_digit.get(&d).cloned().unwrap_or_default(),
            });
        }
    }
    rows
}

/// Train one model on event features and one on frames with the same
/// config, evaluate both on the test split, and report them side by side
/// with the event/frame data-volume ratio.
pub fn run_compare_ef(dataset: &Dataset, config: &TrainConfig, out_dir: &Path) -> Result<CompareReport> {
    let split = if dataset.samples(Split::Test).is_empty() {
        Split::Train
    } else {
        Split::Test
    };
    let mut summaries = Vec::new();
    let mut losses = Vec::new();
    for m in [Modality::E, Modality::F] {
        let dir = out_dir.join(m.as_str());
        let run = run_training(dataset, config, m, &dir, &format!("model_{}", m.as_str()))?;
        losses.push(run.sidecar.final_loss);
        summaries.push(
            run_eval(
                dataset,
                &run.model,
                m,
                split,
                &dir.join(format!("eval_{}", split.as_str())),
            )?
            .summary,
        );
    }
    let f = summaries.pop().expect("two runs");
    let e = summaries.pop().expect("two runs");
    let totals = &dataset.manifest.totals;
    let report = CompareReport {
        split,
        per_digit: digit_rows(&e, &f),
        e,
        f,
        e_final_loss: losses[0],
        f_final_loss: losses[1],
        data_volume: data_volume_report(totals.events, totals.wall_frames)?,
        lpips: LPIPS_STATUS.into(),
    };
    let json = out_dir.join("compare.json");
    std::fs::write(&json, serde_json::to_string_pretty(&report).expect("report serializes"))
        .map_err(|e| Error::io(&json, e))?;
    let csv = out_dir.join("compare.csv");
    std::fs::write(&csv, compare_csv(&report)).map_err(|e| Error::io(&csv, e))?;
    Ok(report)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn compare_csv(report: &CompareReport) -> String {
    let mut out = String::from("digit,modality,n,psnr_mean,psnr_infinite,ssim_mean,cd_deviation_mean,cd_excluded\n");
    for r in &report.per_digit {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.digit,
            r.modality.as_str(),
            m.n,
            opt(m.psnr_mean),
            m.psnr_infinite,
            opt(m.ssim_mean),
            opt(m.cd_deviation_mean),
            m.cd_excluded
        );
    }
    out
}

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "-".into())
}

fn aggregate_line(label: &str, a: &Aggregate) -> String {
    format!(
        "| {label} | {} | {} | {} | {} |\n",
        a.n,
        cell(a.psnr_mean, 2),
        cell(a.ssim_mean, 4),
        cell(a.cd_deviation_mean, 2)
    )
}

const TABLE_HEAD: &str = "| group | n | PSNR (dB) | SSIM | Cd dev (px) |\n|---|---|---|---|---|\n";

/// Markdown rendering of one evaluation summary.
pub fn format_eval_summary(s: &EvalSummary) -> String {
    let mut out = format!(
        "## {} split, modality {}\n\n",
        s.split.as_str(),
        s.modality.as_str().to_uppercase()
    );
    out.push_str(TABLE_HEAD);
    out.push_str(&aggregate_line("all", &s.overall));
    for (d, a) in &s.per_digit {
        out.push_str(&aggregate_line(&format!("digit {d}"), a));
    }
    for (p, a) in &s.per_position {
        out.push_str(&aggregate_line(&format!("position {p}"), a));
    }
    let _ = writeln!(out, "\nLPIPS: {}", s.lpips);
    out
}

/// Markdown rendering of an E-vs-F comparison.
pub fn format_compare_report(r: &CompareReport) -> String {
    let mut out = format!("## E vs F on the {} split\n\n", r.split.as_str());
    out.push_str("| group | modality | n | PSNR (dB) | SSIM | Cd dev (px) |\n|---|---|---|---|---|---|\n");
    for (m, s) in [("E", &r.e), ("F", &r.f)] {
        let a = &s.overall;
        let _ = writeln!(
            out,
            "| all | {m} | {} | {} | {} | {} |",
            a.n,
            cell(a.psnr_mean, 2),
            cell(a.ssim_mean, 4),
            cell(a.cd_deviation_mean, 2)
        );
    }
    for row in &r.per_digit {
        let a = &row.metrics;
        let _ = writeln!(
            out,
            "| digit {} | {} | {} | {} | {} | {} |",
            row.digit,
            row.modality.as_str().to_uppercase(),
            a.n,
            cell(a.psnr_mean, 2),
            cell(a.ssim_mean, 4),
            cell(a.cd_deviation_mean, 2)
        );
    }
    let _ = writeln!(out, "\nData volume: {}", r.data_volume.summary);
    let _ = writeln!(out, "LPIPS: {}", r.lpips);
    out
}
