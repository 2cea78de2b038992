//! Run manifests and the CSV / JSON report files.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::metrics::MetricsReport;

pub const CSV_HEADER: [&str; 5] = ["bucket_start_s", "requests", "successes", "avg_ms", "p95_ms"];

/// Everything that determines a load run. Timestamps are recorded but do not
/// contribute to the hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: Value,
    pub scenario: String,
    pub endpoint: String,
    pub seed: u64,
    pub mode: String,
    pub time_scale: f64,
    pub vu_scale: f64,
    /// `embedded` or the base URL of the server under test.
    pub target: String,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
    #[serde(default)]
    pub started_at_us: Option<u64>,
    #[serde(default)]
    pub finished_at_us: Option<u64>,
}

impl RunManifest {
    pub fn hash(&self) -> String {
        let mut stable = self.clone();
        stable.started_at_us = None;
        stable.finished_at_us = None;
        let bytes = serde_json::to_vec(&stable).expect("manifest serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub manifest_hash: String,
    pub manifest: RunManifest,
    #[serde(flatten)]
    pub report: MetricsReport,
}

fn fmt_ms(x: f64) -> String {
    format!("{x:.3}")
}

/// Bucket series as CSV, preceded by a `# manifest=<hash>` comment line.
pub fn render_csv(report: &MetricsReport, manifest_hash: &str) -> String {
    let mut out = Vec::new();
    writeln!(out, "# manifest={manifest_hash}").unwrap();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(CSV_HEADER).unwrap();
        for b in &report.buckets {
            w.write_record([
                b.start_s.to_string(),
                b.requests.to_string(),
                b.successes.to_string(),
                fmt_ms(b.avg_ms),
                fmt_ms(b.p95_ms),
            ])
            .unwrap();
        }
        w.flush().unwrap();
    }
    String::from_utf8(out).expect("csv is utf-8")
}

fn write_file(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)
}

/// Writes the CSV and JSON files named in the manifest.
pub fn write_reports(report: &MetricsReport, manifest: &RunManifest) -> std::io::Result<RunSummary> {
    let hash = manifest.hash();
    write_file(&manifest.csv_path, &render_csv(report, &hash))?;
    let summary = RunSummary { manifest_hash: hash, manifest: manifest.clone(), report: report.clone() };
    write_file(&manifest.json_path, &serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
    Ok(summary)
}

pub fn read_summary(path: impl AsRef<Path>) -> std::io::Result<RunSummary> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::load::metrics::Sample;

    fn manifest() -> RunManifest {
        RunManifest {
            config: serde_json::json!({"mode": "monolith"}),
            scenario: "linear".into(),
            endpoint: "sensors-get".into(),
            seed: 7,
            mode: "monolith".into(),
            time_scale: 0.1,
            vu_scale: 0.2,
            target: "embedded".into(),
            csv_path: "out/run.csv".into(),
            json_path: "out/run.json".into(),
            started_at_us: Some(1),
            finished_at_us: Some(2),
        }
    }

    #[test]
    fn hash_ignores_timestamps_only() {
        let a = manifest();
        let mut b = a.clone();
        b.started_at_us = Some(99);
        b.finished_at_us = None;
        assert_eq!(a.hash(), b.hash());
        b.seed = 8;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn csv_layout() {
        let samples = [Sample { start_s: 12.0, latency_ms: 10.5, status: 200 }];
        let report = MetricsReport::from_samples(&samples, 30.0);
        let text = render_csv(&report, "abc");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# manifest=abc");
        assert_eq!(lines[1], "bucket_start_s,requests,successes,avg_ms,p95_ms");
        assert_eq!(lines[2], "0,0,0,0.000,0.000");
        assert_eq!(lines[3], "10,1,1,10.500,10.500");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn reports_roundtrip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest();
        m.csv_path = dir.path().join("a/run.csv");
        m.json_path = dir.path().join("a/run.json");
        let report = MetricsReport::from_samples(&[], 20.0);
        let written = write_reports(&report, &m).unwrap();
        let read = read_summary(&m.json_path).unwrap();
        assert_eq!(read, written);
        assert!(std::fs::read_to_string(&m.csv_path).unwrap().starts_with("# manifest="));
    }
}
