//! On-disk formats: dataset manifest (JSON), grayscale patches (8-bit binary
//! PGM), matrix dumps, assignment/truth CSVs, metrics JSON, and the
//! calibration plot data.
//!
//! All writers go through a temp-file-then-rename step so partially written
//! outputs never appear under the final name. Manifests produced by
//! [`write_manifest`] are canonical: reading one back and writing it again
//! is byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    BoundingBox, Dataset, DatasetRole, Detection, FaceExample, FaceSet, GrayPatch, SequenceRecord,
    SetId,
};
use crate::scalar::Real;

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::io(path.display().to_string(), e)
}

/// Write bytes atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// PGM (binary P5, 8-bit)

pub fn write_pgm(path: &Path, patch: &GrayPatch) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", patch.width, patch.height).into_bytes();
    bytes.extend_from_slice(&patch.pixels);
    write_atomic(path, &bytes)
}

pub fn read_pgm(path: &Path) -> Result<GrayPatch> {
    let mut file = BufReader::new(fs::File::open(path).map_err(|e| io_err(path, e))?);
    let mut data = Vec::new();
    file.read_to_end(&mut data).map_err(|e| io_err(path, e))?;
    let parse = |msg: &str| Error::FileParse {
        path: path.display().to_string(),
        line: 1,
        message: msg.to_string(),
    };
    if data.len() < 2 || &data[..2] != b"P5" {
        return Err(parse("not a binary PGM (missing P5 magic)"));
    }
    // header tokens: width, height, maxval; '#' comments run to end of line
    let mut pos = 2;
    let mut tokens = Vec::new();
    while tokens.len() < 3 && pos < data.len() {
        match data[pos] {
            b'#' => {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
            }
            c if c.is_ascii_whitespace() => pos += 1,
            _ => {
                let start = pos;
                while pos < data.len() && !data[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                let token = std::str::from_utf8(&data[start..pos])
                    .map_err(|_| parse("non-UTF-8 header token"))?;
                tokens.push(
                    token
                        .parse::<usize>()
                        .map_err(|_| parse("non-numeric header token"))?,
                );
            }
        }
    }
    if tokens.len() != 3 {
        return Err(parse("truncated PGM header"));
    }
    let (width, height, maxval) = (tokens[0], tokens[1], tokens[2]);
    if maxval != 255 {
        return Err(parse("only 8-bit PGM (maxval 255) is supported"));
    }
    pos += 1; // single whitespace after maxval
    let expected = width * height;
    if data.len() < pos + expected {
        return Err(parse("pixel data shorter than width*height"));
    }
    Ok(GrayPatch::new(width, height, data[pos..pos + expected].to_vec()))
}

// ---------------------------------------------------------------------------
// Dataset manifest

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
struct ManifestExample<T> {
    example_id: String,
    sequence_id: String,
    frame_index: usize,
    bbox: BoundingBox,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    descriptor: Option<Vec<T>>,
    /// Relative path of an 8-bit grayscale PGM file.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    patch: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    true_identity: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ManifestFaceSet {
    set_id: String,
    sequence_id: String,
    example_ids: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
struct ManifestDetection<T> {
    frame_index: usize,
    bbox: BoundingBox,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    descriptor: Option<Vec<T>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    patch: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
struct Manifest<T> {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    descriptor_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    role: Option<DatasetRole>,
    sequences: Vec<SequenceRecord>,
    face_sets: Vec<ManifestFaceSet>,
    examples: Vec<ManifestExample<T>>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    detections: BTreeMap<String, Vec<ManifestDetection<T>>>,
}

/// Write the manifest JSON plus one PGM per patch under `patches/`.
pub fn write_manifest<T: Real + Serialize>(dataset: &Dataset<T>, path: &Path) -> Result<()> {
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut examples = Vec::new();
    let mut face_sets = Vec::new();
    for fs in &dataset.face_sets {
        face_sets.push(ManifestFaceSet {
            set_id: fs.set_id.clone(),
            sequence_id: fs.sequence_id.clone(),
            example_ids: fs.examples.iter().map(|e| e.example_id.clone()).collect(),
        });
        for ex in &fs.examples {
            let patch_rel = match &ex.patch {
                Some(patch) => {
                    let rel = format!("patches/{}.pgm", ex.example_id);
                    write_pgm(&dir.join(&rel), patch)?;
                    Some(rel)
                }
                None => None,
            };
            examples.push(ManifestExample {
                example_id: ex.example_id.clone(),
                sequence_id: ex.sequence_id.clone(),
                frame_index: ex.frame_index,
                bbox: ex.bbox,
                descriptor: ex.descriptor.clone(),
                patch: patch_rel,
                true_identity: ex.true_identity.clone(),
            });
        }
    }
    let mut detections = BTreeMap::new();
    for (seq, dets) in &dataset.detections {
        let mut out = Vec::with_capacity(dets.len());
        for (k, det) in dets.iter().enumerate() {
            let patch_rel = match &det.patch {
                Some(patch) => {
                    let rel = format!("patches/det-{seq}-{k:04}.pgm");
                    write_pgm(&dir.join(&rel), patch)?;
                    Some(rel)
                }
                None => None,
            };
            out.push(ManifestDetection {
                frame_index: det.frame_index,
                bbox: det.bbox,
                descriptor: det.descriptor.clone(),
                patch: patch_rel,
            });
        }
        detections.insert(seq.clone(), out);
    }
    let manifest = Manifest {
        descriptor_dim: dataset.descriptor_dim,
        role: dataset.role,
        sequences: dataset.sequences.clone(),
        face_sets,
        examples,
        detections,
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write_atomic(path, &json)
}

/// Read a manifest and resolve patch paths into pixel data.
pub fn read_manifest<T: Real + DeserializeOwned>(path: &Path) -> Result<Dataset<T>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let manifest: Manifest<T> = serde_json::from_str(&text).map_err(|e| Error::FileParse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut by_id: BTreeMap<String, FaceExample<T>> = BTreeMap::new();
    for me in manifest.examples {
        let patch = me.patch.as_ref().map(|rel| read_pgm(&dir.join(rel))).transpose()?;
        let ex = FaceExample {
            example_id: me.example_id.clone(),
            sequence_id: me.sequence_id,
            frame_index: me.frame_index,
            bbox: me.bbox,
            patch,
            descriptor: me.descriptor,
            true_identity: me.true_identity,
        };
        if by_id.insert(me.example_id.clone(), ex).is_some() {
            return Err(Error::FileParse {
                path: path.display().to_string(),
                line: 0,
                message: format!("example {} defined twice", me.example_id),
            });
        }
    }
    let mut face_sets = Vec::new();
    for mfs in manifest.face_sets {
        let mut examples = Vec::with_capacity(mfs.example_ids.len());
        for id in &mfs.example_ids {
            let ex = by_id.get(id).cloned().ok_or_else(|| Error::FileParse {
                path: path.display().to_string(),
                line: 0,
                message: format!("face-set {} references unknown example {id}", mfs.set_id),
            })?;
            examples.push(ex);
        }
        face_sets.push(FaceSet {
            set_id: mfs.set_id,
            sequence_id: mfs.sequence_id,
            examples,
        });
    }
    let mut detections = BTreeMap::new();
    for (seq, dets) in manifest.detections {
        let mut out = Vec::with_capacity(dets.len());
        for det in dets {
            let patch = det.patch.as_ref().map(|rel| read_pgm(&dir.join(rel))).transpose()?;
            out.push(Detection {
                frame_index: det.frame_index,
                bbox: det.bbox,
                patch,
                descriptor: det.descriptor,
            });
        }
        detections.insert(seq, out);
    }
    Ok(Dataset {
        sequences: manifest.sequences,
        face_sets,
        descriptor_dim: manifest.descriptor_dim,
        role: manifest.role,
        detections,
    })
}

// ---------------------------------------------------------------------------
// Matrix dump: first line N, then N rows of N space-separated decimals with
// nine mantissa digits. Reload matches within 1e-9; bit-exactness is not
// guaranteed.

pub fn write_matrix<T: Real>(path: &Path, order: usize, values: &[T], ids: Option<&[SetId]>) -> Result<()> {
    assert_eq!(values.len(), order * order);
    let mut out = String::new();
    if let Some(ids) = ids {
        // id comments keep dumps self-describing without changing the format
        out.push_str("# rows/cols: ");
        out.push_str(&ids.join(" "));
        out.push('\n');
    }
    out.push_str(&format!("{order}\n"));
    for i in 0..order {
        let row: Vec<String> = (0..order)
            .map(|j| format!("{:.9e}", values[i * order + j].to_f64().unwrap_or(f64::NAN)))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_matrix(path: &Path) -> Result<(usize, Vec<f64>)> {
    let file = BufReader::new(fs::File::open(path).map_err(|e| io_err(path, e))?);
    let parse_err = |line: usize, message: String| Error::FileParse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut order: Option<usize> = None;
    let mut values: Vec<f64> = Vec::new();
    let mut rows_seen = 0usize;
    for (idx, line) in file.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| parse_err(line_no, e.to_string()))?;
        let content = line.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        match order {
            None => {
                order = Some(
                    content
                        .parse::<usize>()
                        .map_err(|e| parse_err(line_no, format!("bad order: {e}")))?,
                );
            }
            Some(n) => {
                let row: Vec<f64> = content
                    .split_ascii_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(line_no, format!("bad value: {e}")))?;
                if row.len() != n {
                    return Err(parse_err(
                        line_no,
                        format!("expected {n} values in row, got {}", row.len()),
                    ));
                }
                values.extend(row);
                rows_seen += 1;
            }
        }
    }
    let n = order.ok_or_else(|| parse_err(0, "missing order line".into()))?;
    if rows_seen != n {
        return Err(parse_err(0, format!("expected {n} rows, got {rows_seen}")));
    }
    Ok((n, values))
}

// ---------------------------------------------------------------------------
// Two-column CSVs

fn write_two_column_csv(
    path: &Path,
    header: (&str, &str),
    rows: impl Iterator<Item = (String, String)>,
) -> Result<()> {
    let mut out = format!("{},{}\n", header.0, header.1);
    for (a, b) in rows {
        out.push_str(&a);
        out.push(',');
        out.push_str(&b);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

fn read_two_column_csv(path: &Path, header: (&str, &str)) -> Result<Vec<(String, String)>> {
    let file = BufReader::new(fs::File::open(path).map_err(|e| io_err(path, e))?);
    let parse_err = |line: usize, message: String| Error::FileParse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut rows = Vec::new();
    for (idx, line) in file.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| parse_err(line_no, e.to_string()))?;
        let content = line.trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.splitn(2, ',');
        let a = parts.next().unwrap_or("").trim().to_string();
        let b = parts
            .next()
            .ok_or_else(|| parse_err(line_no, "expected two comma-separated fields".into()))?
            .trim()
            .to_string();
        if line_no == 1 && a == header.0 && b == header.1 {
            continue;
        }
        rows.push((a, b));
    }
    Ok(rows)
}

/// Assignment CSV: `set_id,cluster_id`, sorted by set_id.
pub fn write_assignment(path: &Path, labels: &BTreeMap<SetId, usize>) -> Result<()> {
    write_two_column_csv(
        path,
        ("set_id", "cluster_id"),
        labels.iter().map(|(id, label)| (id.clone(), label.to_string())),
    )
}

pub fn read_assignment(path: &Path) -> Result<BTreeMap<SetId, usize>> {
    read_two_column_csv(path, ("set_id", "cluster_id"))?
        .into_iter()
        .map(|(id, label)| {
            let label = label.parse::<usize>().map_err(|e| Error::FileParse {
                path: path.display().to_string(),
                line: 0,
                message: format!("bad cluster id for {id}: {e}"),
            })?;
            Ok((id, label))
        })
        .collect()
}

/// Truth CSV: `set_id,identity`, sorted by set_id.
pub fn write_truth(path: &Path, truth: &BTreeMap<SetId, String>) -> Result<()> {
    write_two_column_csv(
        path,
        ("set_id", "identity"),
        truth.iter().map(|(id, ident)| (id.clone(), ident.clone())),
    )
}

pub fn read_truth(path: &Path) -> Result<BTreeMap<SetId, String>> {
    Ok(read_two_column_csv(path, ("set_id", "identity"))?
        .into_iter()
        .collect())
}

/// Calibration pairs CSV: `set_id_a,set_id_b,same_person`.
pub fn write_calibration_pairs(
    path: &Path,
    pairs: &[crate::calibration::CalibrationPair],
) -> Result<()> {
    let mut out = String::from("set_id_a,set_id_b,same_person\n");
    for p in pairs {
        out.push_str(&format!("{},{},{}\n", p.set_a, p.set_b, p.same_person));
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_calibration_pairs(path: &Path) -> Result<Vec<crate::calibration::CalibrationPair>> {
    let file = BufReader::new(fs::File::open(path).map_err(|e| io_err(path, e))?);
    let parse_err = |line: usize, message: String| Error::FileParse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut pairs = Vec::new();
    for (idx, line) in file.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| parse_err(line_no, e.to_string()))?;
        let content = line.trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        if line_no == 1 && fields == ["set_id_a", "set_id_b", "same_person"] {
            continue;
        }
        if fields.len() != 3 {
            return Err(parse_err(line_no, "expected three comma-separated fields".into()));
        }
        let same_person = match fields[2] {
            "true" | "1" => true,
            "false" | "0" => false,
            other => return Err(parse_err(line_no, format!("bad same_person flag `{other}`"))),
        };
        pairs.push(crate::calibration::CalibrationPair {
            set_a: fields[0].to_string(),
            set_b: fields[1].to_string(),
            same_person,
        });
    }
    Ok(pairs)
}

// ---------------------------------------------------------------------------
// Metrics JSON and plot data

/// The metrics report schema; percentages render the values ×100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsJson {
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    pub nmi_pct: Option<f64>,
    pub ari_pct: Option<f64>,
    pub theta: Option<f64>,
    pub n_face_sets: usize,
}

impl MetricsJson {
    pub fn new(nmi: Option<f64>, ari: Option<f64>, theta: Option<f64>, n_face_sets: usize) -> Self {
        Self {
            nmi,
            ari,
            nmi_pct: nmi.map(|v| v * 100.0),
            ari_pct: ari.map(|v| v * 100.0),
            theta,
            n_face_sets,
        }
    }
}

pub fn write_metrics_json(path: &Path, metrics: &MetricsJson) -> Result<()> {
    let mut json = serde_json::to_vec_pretty(metrics)?;
    json.push(b'\n');
    write_atomic(path, &json)
}

/// Plot data for the threshold-calibration figure: the two labeled value
/// series plus their medians.
pub fn write_plotdata(
    path: &Path,
    delta_s: &[f64],
    delta_d: &[f64],
    theta: f64,
    median_d: Option<f64>,
) -> Result<()> {
    let mut out = String::from("series,value\n");
    for v in delta_s {
        out.push_str(&format!("delta_s,{v}\n"));
    }
    for v in delta_d {
        out.push_str(&format!("delta_d,{v}\n"));
    }
    out.push_str(&format!("median_s,{theta}\n"));
    if let Some(m) = median_d {
        out.push_str(&format!("median_d,{m}\n"));
    }
    write_atomic(path, out.as_bytes())
}

/// Write any serializable value as pretty JSON with a trailing newline.
pub fn write_json_pretty<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    let mut json = serde_json::to_vec_pretty(value)?;
    json.push(b'\n');
    write_atomic(path, &json)
}

/// Read a whole file as bytes.
pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| io_err(path, e))
}
