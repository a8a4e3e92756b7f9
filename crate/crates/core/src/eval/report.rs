//! Per-evaluation reports and the cross-case comparison table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::StepMetrics;
use crate::env::{CaseId, PlantKind};
use crate::error::{Error, Result};

const MAGIC: &str = "delayrl-report 1";

#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub case: CaseId,
    pub eval_plant: PlantKind,
    /// Environment seed of the evaluation episode.
    pub seed: u64,
    /// Seed the agent was trained with.
    pub agent_seed: u64,
    pub metrics: StepMetrics,
    pub trajectory_path: PathBuf,
    pub agent_path: Option<PathBuf>,
}

fn fmt_metric(v: f64) -> String {
    if v.is_nan() {
        "unreached".to_string()
    } else {
        format!("{v:?}")
    }
}

impl CaseReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "case = {}", self.case);
        let _ = writeln!(s, "eval_plant = {}", self.eval_plant);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "agent_seed = {}", self.agent_seed);
        if let Some(p) = &self.agent_path {
            let _ = writeln!(s, "agent = {}", p.display());
        }
        let _ = writeln!(s, "trajectory = {}", self.trajectory_path.display());
        for (k, v) in StepMetrics::KEYS.iter().zip(self.metrics.values()) {
            let _ = writeln!(s, "metric.{k} = {}", fmt_metric(v));
        }
        s
    }

    pub fn record(&self) -> ReportRecord {
        ReportRecord {
            case: self.case,
            eval_plant: self.eval_plant,
            seed: self.seed,
            agent_seed: Some(self.agent_seed),
            metrics: StepMetrics::KEYS
                .iter()
                .map(|k| k.to_string())
                .zip(self.metrics.values())
                .collect(),
        }
    }
}

/// A report as read back from disk. Metrics are kept by name so reports
/// written with different metric sets can still be compared on their
/// common columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRecord {
    pub case: CaseId,
    pub eval_plant: PlantKind,
    pub seed: u64,
    pub agent_seed: Option<u64>,
    /// Unreached rise time is NaN.
    pub metrics: BTreeMap<String, f64>,
}

impl ReportRecord {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(MAGIC) {
            return Err(Error::format(path, "header", format!("expected `{MAGIC}`")));
        }
        let mut fields = BTreeMap::new();
        let mut metrics = BTreeMap::new();
        for (n, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format(path, format!("line {}", n + 2), "expected `key = value`"))?;
            let (k, v) = (k.trim(), v.trim());
            if let Some(name) = k.strip_prefix("metric.") {
                let value = if v == "unreached" {
                    f64::NAN
                } else {
                    v.parse()
                        .map_err(|e| Error::format(path, k, format!("cannot parse `{v}`: {e}")))?
                };
                metrics.insert(name.to_string(), value);
            } else {
                fields.insert(k.to_string(), v.to_string());
            }
        }
        let get = |k: &str| fields.get(k).ok_or_else(|| Error::format(path, k, "missing"));
        let wrap = |k: &str, e: Error| Error::format(path, k, e.to_string());
        Ok(ReportRecord {
            case: get("case")?.parse().map_err(|e| wrap("case", e))?,
            eval_plant: get("eval_plant")?.parse().map_err(|e| wrap("eval_plant", e))?,
            seed: get("seed")?
                .parse()
                .map_err(|e| Error::format(path, "seed", format!("{e}")))?,
            agent_seed: fields
                .get("agent_seed")
                .map(|v| v.parse().map_err(|e| Error::format(path, "agent_seed", format!("{e}"))))
                .transpose()?,
            metrics,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ReportRecord::parse(&text, path)
    }
}

/// Aligned metric table across reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub metrics: Vec<String>,
    pub records: Vec<ReportRecord>,
    /// Rise time over the Case I reference; NaN without a reference.
    pub rise_ratio: Vec<f64>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Builds the comparison over the metrics every report shares. The rise-time
/// reference is the median Case I rise time on the delay-free plant, falling
/// back to any Case I report.
pub fn compare_cases(records: &[ReportRecord]) -> Result<Comparison> {
    if records.len() < 2 {
        return Err(Error::invalid("reports", format!("need at least 2, got {}", records.len())));
    }
    let metrics: Vec<String> = records[0]
        .metrics
        .keys()
        .filter(|k| records.iter().all(|r| r.metrics.contains_key(*k)))
        .cloned()
        .collect();
    if metrics.is_empty() {
        return Err(Error::invalid("reports", "no metric is common to all reports"));
    }
    let rise = |r: &ReportRecord| r.metrics.get("rise_time").copied().unwrap_or(f64::NAN);
    let case_i = |plant: Option<PlantKind>| {
        median(
            records
                .iter()
                .filter(|r| r.case == CaseId::CaseI && plant.is_none_or(|p| r.eval_plant == p))
                .map(rise)
                .collect(),
        )
    };
    let reference = case_i(Some(PlantKind::DelayFree)).or_else(|| case_i(None));
    let rise_ratio = records
        .iter()
        .map(|r| reference.map_or(f64::NAN, |base| rise(r) / base))
        .collect();
    Ok(Comparison {
        metrics,
        records: records.to_vec(),
        rise_ratio,
    })
}

fn cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:?}")
    }
}

impl Comparison {
    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["case", "eval_plant", "seed", "agent_seed"].map(String::from).to_vec();
        h.extend(self.metrics.iter().cloned());
        h.push("rise_ratio_vs_case_i".to_string());
        h
    }

    fn rows(&self, fmt: impl Fn(f64) -> String) -> Vec<Vec<String>> {
        self.records
            .iter()
            .zip(&self.rise_ratio)
            .map(|(r, ratio)| {
                let mut row = vec![
                    r.case.to_string(),
                    r.eval_plant.to_string(),
                    r.seed.to_string(),
                    r.agent_seed.map(|s| s.to_string()).unwrap_or_default(),
                ];
                row.extend(self.metrics.iter().map(|m| fmt(r.metrics[m])));
                row.push(fmt(*ratio));
                row
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header()).expect("in-memory write");
        for row in self.rows(cell) {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }

    /// Fixed-width text table.
    pub fn render_text(&self) -> String {
        let header = self.header();
        let rows = self.rows(|v| if v.is_nan() { "-".to_string() } else { format!("{v:.4}") });
        let mut width: Vec<usize> = header.iter().map(String::len).collect();
        for row in &rows {
            for (w, c) in width.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&width)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = line(&header);
        out.push('\n');
        out.push_str(&"-".repeat(out.len() - 1));
        out.push('\n');
        for row in &rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(case: CaseId, plant: PlantKind, rise: f64) -> ReportRecord {
        ReportRecord {
            case,
            eval_plant: plant,
            seed: 0,
            agent_seed: Some(1),
            metrics: [("rise_time".to_string(), rise), ("overshoot".to_string(), 0.1)]
                .into_iter()
                .collect(),
        }
    }

    #[test]
    fn pair_gives_two_rows_with_ratio() {
        let c = compare_cases(&[
            record(CaseId::CaseI, PlantKind::DelayFree, 0.5),
            record(CaseId::CaseIII, PlantKind::Delayed, 0.6),
        ])
        .unwrap();
        assert_eq!(c.to_csv().lines().count(), 3);
        assert!(c.to_csv().lines().next().unwrap().ends_with("rise_ratio_vs_case_i"));
        assert!((c.rise_ratio[1] - 1.2).abs() < 1e-12);
        assert_eq!(c.render_text().lines().count(), 4);
    }

    #[test]
    fn disjoint_metrics_rejected() {
        let a = record(CaseId::CaseI, PlantKind::DelayFree, 0.5);
        let mut b = record(CaseId::CaseII, PlantKind::Delayed, 0.5);
        b.metrics = [("other".to_string(), 1.0)].into_iter().collect();
        assert!(compare_cases(&[a.clone(), b]).is_err());
        assert!(compare_cases(&[a]).is_err());
    }

    #[test]
    fn report_text_round_trip() {
        let r = CaseReport {
            case: CaseId::CaseII,
            eval_plant: PlantKind::Training,
            seed: 3,
            agent_seed: 9,
            metrics: StepMetrics {
                rise_time: None,
                overshoot: 0.25,
                settle_rms_pos: 0.1,
                settle_rms_vel: 0.2,
                settle_amplitude: 0.3,
                action_sign_change_rate: 16.5,
                saturation_duty: 1.0,
                dominant_period: f64::INFINITY,
            },
            trajectory_path: PathBuf::from("t.csv"),
            agent_path: None,
        };
        let back = ReportRecord::parse(&r.to_text(), Path::new("r")).unwrap();
        assert_eq!(back.case, CaseId::CaseII);
        assert!(back.metrics["rise_time"].is_nan());
        assert_eq!(back.metrics["dominant_period"], f64::INFINITY);
        assert_eq!(back.metrics["saturation_duty"], 1.0);
    }
}
