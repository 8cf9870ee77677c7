//! On-disk formats: protocol documents, delimited tables, evaluation logs.
//!
//! Artifacts are deterministic byte-for-byte given the same configuration and
//! seed; wall-clock information lives only in sidecar `.meta.toml` files.
//! Floating-point values are written in shortest round-trip form except where
//! a fixed digit count is specified (waveform export times).

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

use sli_core::optimizer::{InterferometerOptimization, OptimizationRecord};
use sli_core::protocol::{SegmentLabel, ShakingProtocol, WaveformSegment};

pub const PROTOCOL_FORMAT: &str = "sli-protocol-v1";

/// Serialized shaking protocol plus its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolDocument {
    pub format: String,
    pub config_sha256: String,
    pub seed: u64,
    /// Operating acceleration the waveform was optimized at, m/s².
    pub bias_accel: f64,
    pub interferometer_order: usize,
    pub total_duration: f64,
    pub converged: bool,
    pub half_time_split_error: f64,
    pub recombination_error: f64,
    pub segments: Vec<SegmentDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentDocument {
    pub label: String,
    pub duration: f64,
    pub enveloped: bool,
    pub frequencies: Vec<f64>,
    pub sin_amps: Vec<f64>,
    pub cos_amps: Vec<f64>,
}

fn label_to_str(label: SegmentLabel) -> &'static str {
    label.as_str()
}

fn label_from_str(s: &str, index: usize) -> Result<SegmentLabel> {
    match s {
        "split" => Ok(SegmentLabel::Split),
        "propagate" => Ok(SegmentLabel::Propagate),
        "recombine" => Ok(SegmentLabel::Recombine),
        other => bail!("segment {index}: unknown label {other:?}"),
    }
}

impl ProtocolDocument {
    pub fn from_optimization(
        result: &InterferometerOptimization,
        order: usize,
        config_sha256: &str,
        seed: u64,
        bias_accel: f64,
    ) -> Self {
        let segments = result
            .protocol
            .segments()
            .iter()
            .map(|(label, segment)| SegmentDocument {
                label: label_to_str(*label).to_string(),
                duration: segment.duration(),
                enveloped: segment.enveloped(),
                frequencies: segment.frequencies().to_vec(),
                sin_amps: segment.sin_amps().to_vec(),
                cos_amps: segment.cos_amps().to_vec(),
            })
            .collect();
        Self {
            format: PROTOCOL_FORMAT.to_string(),
            config_sha256: config_sha256.to_string(),
            seed,
            bias_accel,
            interferometer_order: order,
            total_duration: result.protocol.total_duration(),
            converged: result.converged,
            half_time_split_error: result.half_time_split_error,
            recombination_error: result.recombination_error,
            segments,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).context("serializing protocol")?;
        std::fs::write(path, text)
            .with_context(|| format!("writing protocol {}", path.display()))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading protocol {}", path.display()))?;
        let doc: ProtocolDocument = toml::from_str(&text)
            .with_context(|| format!("parsing protocol {}", path.display()))?;
        if doc.format != PROTOCOL_FORMAT {
            bail!("unsupported protocol format {:?}", doc.format);
        }
        Ok(doc)
    }

    /// Rebuild the in-memory protocol, validating every segment.
    pub fn to_protocol(&self) -> Result<ShakingProtocol> {
        let mut segments = Vec::with_capacity(self.segments.len());
        for (index, seg) in self.segments.iter().enumerate() {
            let label = label_from_str(&seg.label, index)?;
            let segment = WaveformSegment::new(
                seg.duration,
                seg.frequencies.clone(),
                seg.sin_amps.clone(),
                seg.cos_amps.clone(),
                seg.enveloped,
            )
            .with_context(|| format!("segment {index} ({})", seg.label))?;
            segments.push((label, segment));
        }
        ShakingProtocol::from_segments(segments).context("stitching protocol")
    }
}

/// Append-only evaluation log: one JSON object per line per evaluation.
pub fn write_optimization_log(
    path: &Path,
    stages: &[OptimizationRecord],
) -> Result<()> {
    let file = std::fs::File::create(path)
        .with_context(|| format!("creating log {}", path.display()))?;
    let mut out = std::io::BufWriter::new(file);
    for (stage_index, stage) in stages.iter().enumerate() {
        for entry in &stage.evaluations {
            let line = serde_json::json!({
                "stage": stage_index,
                "super_iteration": entry.super_iteration,
                "evaluation": entry.evaluation,
                "coefficients": entry.coefficients,
                "error": entry.error,
            });
            writeln!(out, "{line}")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Sidecar metadata: the only artifact allowed to carry wall-clock content.
pub fn write_sidecar_meta(path: &Path, command: &str, duration_secs: f64) -> Result<()> {
    let started = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let text = format!(
        "command = {command:?}\nfinished_unix = {started}\nduration_secs = {duration_secs}\n",
    );
    std::fs::write(path, text)
        .with_context(|| format!("writing sidecar {}", path.display()))?;
    Ok(())
}

/// Tab-separated table with `#`-prefixed header lines.
pub struct TsvWriter {
    buffer: String,
}

impl TsvWriter {
    pub fn new(config_sha256: &str) -> Self {
        let mut buffer = String::new();
        buffer.push_str(&format!("# config_sha256 = {config_sha256}\n"));
        Self { buffer }
    }

    pub fn comment(&mut self, line: &str) {
        self.buffer.push_str(&format!("# {line}\n"));
    }

    pub fn columns(&mut self, names: &[&str]) {
        self.buffer.push_str(&names.join("\t"));
        self.buffer.push('\n');
    }

    pub fn row(&mut self, cells: &[String]) {
        self.buffer.push_str(&cells.join("\t"));
        self.buffer.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.buffer)
            .with_context(|| format!("writing table {}", path.display()))?;
        Ok(())
    }

    pub fn contents(&self) -> &str {
        &self.buffer
    }
}

/// Shortest round-trip decimal form.
pub fn fmt_f64(value: f64) -> String {
    if value.is_finite() {
        format!("{value}")
    } else if value.is_infinite() && value > 0.0 {
        "inf".to_string()
    } else if value.is_infinite() {
        "-inf".to_string()
    } else {
        "nan".to_string()
    }
}

/// Read a two-column `(x, y)` table from a TSV written by this crate,
/// taking the first two columns and skipping comments and the header.
pub fn read_xy_table(path: &Path, x_col: usize, y_col: usize) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading table {}", path.display()))?;
    let mut rows = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        let max_col = x_col.max(y_col);
        if cells.len() <= max_col {
            continue;
        }
        let parse = |cell: &str| -> Option<f64> {
            match cell {
                "inf" => Some(f64::INFINITY),
                "-inf" => Some(f64::NEG_INFINITY),
                other => other.parse().ok(),
            }
        };
        let (Some(x), Some(y)) = (parse(cells[x_col]), parse(cells[y_col])) else {
            continue; // header line
        };
        rows.push((x, y));
    }
    Ok(rows)
}

/// SHA-256 of a file's bytes, hex-encoded.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sli_core::protocol::SEGMENT_DURATION;

    fn sample_doc() -> ProtocolDocument {
        ProtocolDocument {
            format: PROTOCOL_FORMAT.to_string(),
            config_sha256: "deadbeef".into(),
            seed: 3,
            bias_accel: 0.0,
            interferometer_order: 1,
            total_duration: 2.0 * SEGMENT_DURATION,
            converged: true,
            half_time_split_error: 1.0,
            recombination_error: 2.0,
            segments: vec![
                SegmentDocument {
                    label: "split".into(),
                    duration: SEGMENT_DURATION,
                    enveloped: true,
                    frequencies: vec![19.5e3, 24.0e3],
                    sin_amps: vec![0.21, -0.37],
                    cos_amps: vec![0.11, 0.05],
                },
                SegmentDocument {
                    label: "recombine".into(),
                    duration: SEGMENT_DURATION,
                    enveloped: true,
                    frequencies: vec![19.5e3, 24.0e3],
                    sin_amps: vec![-0.18, 0.33],
                    cos_amps: vec![0.15, -0.12],
                },
            ],
        }
    }

    #[test]
    fn protocol_document_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.toml");
        let doc = sample_doc();
        doc.write(&path).unwrap();
        let loaded = ProtocolDocument::read(&path).unwrap();
        assert_eq!(loaded.segments[0].sin_amps, doc.segments[0].sin_amps);
        let protocol = loaded.to_protocol().unwrap();
        assert_eq!(protocol.segments().len(), 2);
        assert_eq!(protocol.total_duration(), 2.0 * SEGMENT_DURATION);

        // writing again produces identical bytes
        let again = dir.path().join("p2.toml");
        loaded.write(&again).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn malformed_protocol_names_offending_segment() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        let mut doc = sample_doc();
        doc.segments[1].sin_amps = vec![9.0, 9.0]; // blows the drive bound
        doc.write(&path).unwrap();
        let err = ProtocolDocument::read(&path).unwrap().to_protocol().unwrap_err();
        assert!(format!("{err:#}").contains("segment 1"), "{err:#}");
    }

    #[test]
    fn xy_table_reader_skips_headers_and_parses_inf() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tsv");
        let mut w = TsvWriter::new("abc");
        w.columns(&["x", "y"]);
        w.row(&[fmt_f64(1.0), fmt_f64(0.5)]);
        w.row(&[fmt_f64(2.0), "inf".into()]);
        w.write(&path).unwrap();
        let rows = read_xy_table(&path, 0, 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], (1.0, 0.5));
        assert!(rows[1].1.is_infinite());
    }
}
