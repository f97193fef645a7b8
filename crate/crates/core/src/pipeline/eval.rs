use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{contour_distance, psnr, ssim};
use crate::pgm::Pgm;
use crate::pipeline::dataset::{Dataset, UNIT_SCALE};
use crate::pipeline::profile::Split;
use crate::pipeline::train::{model_input_for, selected_bins, Modality};
use crate::recon::model::LinearReconstructor;

pub const LPIPS_STATUS: &str = "not available";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub id: String,
    pub digit: u8,
    pub variant: usize,
    pub position: usize,
    pub bin_end_us: u64,
    /// `f64::INFINITY` for an exact reconstruction.
    #[serde(with = "inf_as_string")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub cd_recon: Option<f64>,
    pub cd_gt: Option<f64>,
    pub cd_deviation: Option<f64>,
    pub note: Option<String>,
}

mod inf_as_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Num {
            F(f64),
            S(String),
        }
        match Num::deserialize(d)? {
            Num::F(v) => Ok(v),
            Num::S(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Means over a group of samples. Infinite PSNRs are counted, not averaged;
/// samples without a contour distance are counted and excluded from the Cd
/// mean.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub psnr_mean: Option<f64>,
    pub psnr_infinite: usize,
    pub ssim_mean: Option<f64>,
    pub cd_deviation_mean: Option<f64>,
    pub cd_excluded: usize,
}

impl Aggregate {
    pub fn of<'a>(rows: impl IntoIterator<Item = &'a SampleMetrics>) -> Self {
        let mut a = Aggregate::default();
        let (mut psnr_sum, mut psnr_n, mut ssim_sum, mut cd_sum, mut cd_n) = (0.0, 0usize, 0.0, 0.0, 0usize);
        for r in rows {
            a.n += 1;
            if r.psnr_db.is_finite() {
                psnr_sum += r.psnr_db;
                psnr_n += 1;
            } else {
                a.psnr_infinite += 1;
            }
            ssim_sum += r.ssim;
            match r.cd_deviation {
                Some(d) => {
                    cd_sum += d;
                    cd_n += 1;
                }
                None => a.cd_excluded += 1,
            }
        }
        let mean = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
        a.psnr_mean = mean(psnr_sum, psnr_n);
        a.ssim_mean = mean(ssim_sum, a.n);
        a.cd_deviation_mean = mean(cd_sum, cd_n);
        a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub split: Split,
    pub modality: Modality,
    pub overall: Aggregate,
    pub per_digit: BTreeMap<u8, Aggregate>,
    pub per_position: BTreeMap<usize, Aggregate>,
    pub lpips: String,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub rows: Vec<SampleMetrics>,
    pub summary: EvalSummary,
}

pub fn summarize(rows: &[SampleMetrics], split: Split, modality: Modality) -> EvalSummary {
    let mut digits: BTreeMap<u8, Vec<&SampleMetrics>> = BTreeMap::new();
    let mut positions: BTreeMap<usize, Vec<&SampleMetrics>> = BTreeMap::new();
    for r in rows {
        digits.entry(r.digit).or_default().push(r);
        positions.entry(r.position).or_default().push(r);
    }
    EvalSummary {
        split,
        modality,
        overall: Aggregate::of(rows),
        per_digit: digits.into_iter().map(|(k, v)| (k, Aggregate::of(v))).collect(),
        per_position: positions.into_iter().map(|(k, v)| (k, Aggregate::of(v))).collect(),
        lpips: LPIPS_STATUS.into(),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_psnr(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "inf".into()
    }
}

pub const METRICS_CSV_HEADER: &str =
    "id,digit,variant,position,bin_end_us,psnr_db,ssim,cd_recon,cd_gt,cd_deviation,note";

pub fn metrics_csv(rows: &[SampleMetrics]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.id,
            r.digit,
            r.variant,
            r.position,
            r.bin_end_us,
            fmt_psnr(r.psnr_db),
            r.ssim,
            fmt_opt(r.cd_recon),
            fmt_opt(r.cd_gt),
            fmt_opt(r.cd_deviation),
            r.note.as_deref().unwrap_or("")
        );
    }
    out
}

/// Parse a file written by [`metrics_csv`].
pub fn parse_metrics_csv(text: &str) -> Result<Vec<SampleMetrics>> {
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_CSV_HEADER) {
        return Err(Error::ParseError {
            line: 1,
            message: "unexpected metrics header".into(),
        });
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let bad = |what: &str| Error::ParseError {
                line: i + 2,
                message: format!("bad {what}"),
            };
            let f: Vec<&str> = line.splitn(11, ',').collect();
            if f.len() != 11 {
                return Err(bad("field count"));
            }
            let opt = |s: &str, what: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad(what))
                }
            };
            Ok(SampleMetrics {
                id: f[0].to_string(),
                digit: f[1].parse().map_err(|_| bad("digit"))?,
                variant: f[2].parse().map_err(|_| bad("variant"))?,
                position: f[3].parse().map_err(|_| bad("position"))?,
                bin_end_us: f[4].parse().map_err(|_| bad("bin_end_us"))?,
                psnr_db: f[5].parse().map_err(|_| bad("psnr"))?,
                ssim: f[6].parse().map_err(|_| bad("ssim"))?,
                cd_recon: opt(f[7], "cd_recon")?,
                cd_gt: opt(f[8], "cd_gt")?,
                cd_deviation: opt(f[9], "cd_deviation")?,
                note: (!f[10].is_empty()).then(|| f[10].to_string()),
            })
        })
        .collect()
}

/// Reconstruct every sample of `split`, score it against ground truth, and
/// write `metrics.csv`, `summary.json` and `images/` under `out_dir`.
pub fn run_eval(
    dataset: &Dataset,
    model: &LinearReconstructor,
    modality: Modality,
    split: Split,
    out_dir: &Path,
) -> Result<EvalReport> {
    let cfg = &dataset.manifest.config;
    let images = out_dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let mut rows = Vec::new();
    for s in dataset.samples(split) {
        for bin in selected_bins(s, cfg.features.train_bins) {
            let ctx = |e: Error| e.in_sample(&s.id);
            let input = model_input_for(dataset, bin, modality).map_err(ctx)?;
            let recon = model.predict_image(&input).map_err(ctx)?;
            let gt = dataset.read_unit_image(&bin.ground_truth).map_err(ctx)?;
            let stem = format!("{}_{}", s.id, bin.t_end_us);
            Pgm::from_image_u16(&recon, UNIT_SCALE).write(&images.join(format!("{stem}_recon.pgm")))?;
            Pgm::from_image_u16(&gt, UNIT_SCALE).write(&images.join(format!("{stem}_gt.pgm")))?;

            let mut notes = Vec::new();
            let mut cd = |img, which: &str| match contour_distance(img, &cfg.cd) {
                Ok(v) => Ok(Some(v)),
                Err(Error::NoForeground(_)) => {
                    notes.push(format!("no foreground in {which}"));
                    Ok(None)
                }
                Err(e) => Err(e),
            };
            let cd_recon = cd(&recon, "reconstruction")?;
            let cd_gt = cd(&gt, "ground truth")?;
            rows.push(SampleMetrics {
                id: s.id.clone(),
                digit: s.digit,
                variant: s.variant,
                position: s.position,
                bin_end_us: bin.t_end_us,
                psnr_db: psnr(&recon, &gt, 1.0)?,
                ssim: ssim(&recon, &gt, &cfg.eval_ssim)?,
                cd_recon,
                cd_gt,
                cd_deviation: cd_recon.zip(cd_gt).map(|(a, b)| (a - b).abs()),
                note: (!notes.is_empty()).then(|| notes.join("; ")),
            });
        }
    }
    let summary = summarize(&rows, split, modality);
    let csv_path = out_dir.join("metrics.csv");
    std::fs::write(&csv_path, metrics_csv(&rows)).map_err(|e| Error::io(&csv_path, e))?;
    let json_path = out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
    Ok(EvalReport { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, digit: u8, position: usize, psnr_db: f64, ssim: f64, cd: Option<f64>) -> SampleMetrics {
        SampleMetrics {
            id: id.into(),
            digit,
            variant: 0,
            position,
            bin_end_us: 10,
            psnr_db,
            ssim,
            cd_recon: cd,
            cd_gt: cd.map(|_| 0.0),
            cd_deviation: cd,
            note: cd.is_none().then(|| "no foreground in reconstruction".into()),
        }
    }

    #[test]
    fn aggregates_from_csv_match_hand_means() {
        let rows = vec![
            row("a", 1, 0, 10.0, 0.5, Some(1.0)),
            row("b", 1, 1, 20.0, 0.7, None),
            row("c", 2, 0, f64::INFINITY, 1.0, Some(4.0)),
        ];
        let parsed = parse_metrics_csv(&metrics_csv(&rows)).unwrap();
        assert_eq!(parsed, rows);
        let s = summarize(&parsed, Split::Test, Modality::E);
        assert_eq!(s.overall.n, 3);
        assert_eq!(s.overall.psnr_mean, Some(15.0));
        assert_eq!(s.overall.psnr_infinite, 1);
        assert!((s.overall.ssim_mean.unwrap() - 2.2 / 3.0).abs() < 1e-15);
        assert_eq!(s.overall.cd_deviation_mean, Some(2.5));
        assert_eq!(s.overall.cd_excluded, 1);
        assert_eq!(s.per_digit[&1].psnr_mean, Some(15.0));
        assert_eq!(s.per_digit[&2].psnr_mean, None);
        assert_eq!(s.per_position[&0].cd_deviation_mean, Some(2.5));
        assert_eq!(s.lpips, "not available");
    }

    #[test]
    fn infinite_psnr_survives_json() {
        let r = row("a", 0, 0, f64::INFINITY, 1.0, Some(0.0));
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"inf\""));
        let back: SampleMetrics = serde_json::from_str(&text).unwrap();
        assert_eq!(back.psnr_db, f64::INFINITY);
    }
}
