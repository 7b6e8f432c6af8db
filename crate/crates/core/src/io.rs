//! On-disk formats.
//!
//! * Dataset: newline-delimited JSON, one record per observation:
//!   `{"id": "...", "r": 2, "c": 4, "x": [...], "cluster": 1, "outlier": false}`.
//!   `x` holds the r·c entries in row-major order; `cluster` (1-based) and
//!   `outlier` are optional but must be present on all records or none.
//! * Model: a JSON document with `G`, `r`, `c`, per-component `pi`, `M`, `U`,
//!   `V` (row-major), `loglik` and `normalized`.
//! * Trace: CSV with header `f,removed_id,kl,loglik,n_remaining`.
//! * Labels: CSV with header `id,label,z_1,…,z_G`; label 0 marks a removed
//!   observation, whose responsibilities are left empty.
//!
//! Floats are written in shortest round-trip form, so write → read → write is
//! byte-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::DataSet;
use crate::em::{MixtureModel, Responsibilities};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::matnorm::{ComponentParams, ObsMatrix};
use crate::trimmer::TrimIteration;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub id: String,
    pub r: usize,
    pub c: usize,
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outlier: Option<bool>,
}

pub fn write_dataset<W: Write>(mut w: W, data: &DataSet) -> Result<()> {
    for i in 0..data.len() {
        let rec = DatasetRecord {
            id: data.id(i).to_string(),
            r: data.rows(),
            c: data.cols(),
            x: data.get(i).as_slice().to_vec(),
            cluster: data.clusters().map(|c| c[i]),
            outlier: data.outliers().map(|o| o[i]),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<DataSet> {
    let mut ids = Vec::new();
    let mut obs = Vec::new();
    let mut clusters = Vec::new();
    let mut outliers = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        if rec.x.len() != rec.r * rec.c {
            return Err(Error::Format(format!(
                "line {}: {} entries for a {}x{} matrix",
                lineno + 1,
                rec.x.len(),
                rec.r,
                rec.c
            )));
        }
        obs.push(
            ObsMatrix::new(rec.r, rec.c, rec.x)
                .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?,
        );
        ids.push(rec.id);
        clusters.push(rec.cluster);
        outliers.push(rec.outlier);
    }
    let mut data = DataSet::new(ids, obs)?;
    if let Some(c) = all_or_none(clusters, "cluster")? {
        data = data.with_clusters(c)?;
    }
    if let Some(o) = all_or_none(outliers, "outlier")? {
        data = data.with_outliers(o)?;
    }
    Ok(data)
}

fn all_or_none<T>(values: Vec<Option<T>>, field: &str) -> Result<Option<Vec<T>>> {
    let present = values.iter().filter(|v| v.is_some()).count();
    if present == 0 {
        Ok(None)
    } else if present == values.len() {
        Ok(Some(values.into_iter().flatten().collect()))
    } else {
        Err(Error::Format(format!(
            "field {field:?} is present on only some records"
        )))
    }
}

pub fn write_dataset_file(path: impl AsRef<Path>, data: &DataSet) -> Result<()> {
    write_dataset(BufWriter::new(File::create(path)?), data)
}

pub fn read_dataset_file(path: impl AsRef<Path>) -> Result<DataSet> {
    read_dataset(BufReader::new(File::open(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelComponent {
    pub pi: f64,
    #[serde(rename = "M")]
    pub mean: Vec<f64>,
    #[serde(rename = "U")]
    pub row_cov: Vec<f64>,
    #[serde(rename = "V")]
    pub col_cov: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(rename = "G")]
    pub g: usize,
    pub r: usize,
    pub c: usize,
    pub components: Vec<ModelComponent>,
    pub loglik: Option<f64>,
    pub normalized: bool,
}

impl ModelFile {
    pub fn from_model(model: &MixtureModel, loglik: Option<f64>) -> Self {
        let (r, c) = (model.rows(), model.cols());
        let normalized = model
            .components()
            .iter()
            .all(|p| (p.row_cov.trace() - r as f64).abs() <= 1e-12 * r as f64);
        Self {
            g: model.n_components(),
            r,
            c,
            components: model
                .components()
                .iter()
                .map(|p| ModelComponent {
                    pi: p.weight,
                    mean: p.mean.as_slice().to_vec(),
                    row_cov: p.row_cov.as_slice().to_vec(),
                    col_cov: p.col_cov.as_slice().to_vec(),
                })
                .collect(),
            loglik,
            normalized,
        }
    }

    /// Builds the model, applying the trace(U) = r normalization if the file
    /// is not already normalized.
    pub fn to_model(&self) -> Result<MixtureModel> {
        if self.components.len() != self.g {
            return Err(Error::Format(format!(
                "G={} but {} components",
                self.g,
                self.components.len()
            )));
        }
        let (r, c) = (self.r, self.c);
        let comps = self
            .components
            .iter()
            .map(|mc| {
                let p = ComponentParams::new(
                    Matrix::from_row_major(r, c, mc.mean.clone())?,
                    Matrix::from_row_major(r, r, mc.row_cov.clone())?,
                    Matrix::from_row_major(c, c, mc.col_cov.clone())?,
                    mc.pi,
                )?;
                if self.normalized {
                    let tr = p.row_cov.trace();
                    if (tr - r as f64).abs() > 1e-12 * r as f64 {
                        return Err(Error::Format(format!(
                            "model claims normalization but trace(U) = {tr}"
                        )));
                    }
                    Ok(p)
                } else {
                    p.normalized()
                }
            })
            .collect::<Result<Vec<_>>>()?;
        MixtureModel::new(comps)
    }
}

pub fn write_model<W: Write>(mut w: W, model: &ModelFile) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, model)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(r: R) -> Result<ModelFile> {
    Ok(serde_json::from_reader(r)?)
}

pub fn write_model_file(path: impl AsRef<Path>, model: &ModelFile) -> Result<()> {
    write_model(BufWriter::new(File::create(path)?), model)
}

pub fn read_model_file(path: impl AsRef<Path>) -> Result<ModelFile> {
    read_model(BufReader::new(File::open(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub f: usize,
    pub removed_id: Option<String>,
    pub kl: f64,
    pub loglik: f64,
    pub n_remaining: usize,
}

impl From<&TrimIteration> for TraceRow {
    fn from(t: &TrimIteration) -> Self {
        Self {
            f: t.f,
            removed_id: t.removed_id.clone(),
            kl: t.kl.value,
            loglik: t.loglik,
            n_remaining: t.n_remaining,
        }
    }
}

pub fn write_trace<W: Write>(w: W, rows: &[TraceRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["f", "removed_id", "kl", "loglik", "n_remaining"])?;
    for row in rows {
        out.write_record([
            row.f.to_string(),
            row.removed_id.clone().unwrap_or_default(),
            row.kl.to_string(),
            row.loglik.to_string(),
            row.n_remaining.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(r: R) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["f", "removed_id", "kl", "loglik", "n_remaining"] {
        return Err(Error::Format(format!("unexpected trace header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse_err = |field: &str| Error::Format(format!("bad {field} in trace row {rec:?}"));
        let row = TraceRow {
            f: rec[0].parse().map_err(|_| parse_err("f"))?,
            removed_id: (!rec[1].is_empty()).then(|| rec[1].to_string()),
            kl: rec[2].parse().map_err(|_| parse_err("kl"))?,
            loglik: rec[3].parse().map_err(|_| parse_err("loglik"))?,
            n_remaining: rec[4].parse().map_err(|_| parse_err("n_remaining"))?,
        };
        if rows.last().is_some_and(|p: &TraceRow| p.f >= row.f) {
            return Err(Error::Format("trace f values must increase".into()));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// One row of a labels file.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRow {
    pub id: String,
    pub label: usize,
    pub zhat: Option<Vec<f64>>,
}

/// Rows for a fitted dataset; `removed` ids are appended with label 0.
pub fn label_rows(
    ids: &[String],
    labels: &[usize],
    zhat: &Responsibilities,
    removed: &[String],
) -> Vec<LabelRow> {
    let mut rows: Vec<LabelRow> = ids
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (id, &l))| LabelRow {
            id: id.clone(),
            label: l,
            zhat: Some(zhat.row(i).to_vec()),
        })
        .collect();
    rows.extend(removed.iter().map(|id| LabelRow {
        id: id.clone(),
        label: 0,
        zhat: None,
    }));
    rows
}

pub fn write_labels<W: Write>(w: W, g: usize, rows: &[LabelRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((1..=g).map(|k| format!("z_{k}")));
    out.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.id.clone(), row.label.to_string()];
        match &row.zhat {
            Some(z) => rec.extend(z.iter().map(|v| v.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), g)),
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_labels<R: Read>(r: R) -> Result<Vec<LabelRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::Format(format!("short labels row {rec:?}")));
        }
        let label = rec[1]
            .parse()
            .map_err(|_| Error::Format(format!("bad label in {rec:?}")))?;
        let zs: Vec<&str> = rec.iter().skip(2).collect();
        let zhat = if zs.iter().all(|s| s.is_empty()) {
            None
        } else {
            Some(
                zs.iter()
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Format(format!("bad responsibility in {rec:?}")))?,
            )
        };
        rows.push(LabelRow {
            id: rec[0].to_string(),
            label,
            zhat,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RECORDS: &str = concat!(
        r#"{"id":"a","r":1,"c":2,"x":[0.1,-3.0],"cluster":1,"outlier":false}"#,
        "\n",
        r#"{"id":"b","r":1,"c":2,"x":[1e-300,2.5],"cluster":2,"outlier":true}"#,
        "\n"
    );

    #[test]
    fn dataset_round_trip_is_byte_identical() {
        let data = read_dataset(RECORDS.as_bytes()).unwrap();
        assert_eq!(data.clusters().unwrap(), &[1, 2]);
        assert_eq!(data.outliers().unwrap(), &[false, true]);
        let mut buf = Vec::new();
        write_dataset(&mut buf, &data).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), RECORDS);
    }

    #[test]
    fn dataset_errors() {
        let short = r#"{"id":"a","r":2,"c":2,"x":[1.0]}"#;
        assert!(matches!(
            read_dataset(short.as_bytes()),
            Err(Error::Format(_))
        ));
        let mixed = concat!(
            r#"{"id":"a","r":1,"c":1,"x":[1.0],"cluster":1}"#,
            "\n",
            r#"{"id":"b","r":1,"c":1,"x":[2.0]}"#
        );
        assert!(read_dataset(mixed.as_bytes()).is_err());
        let shapes = concat!(
            r#"{"id":"a","r":1,"c":2,"x":[1.0,2.0]}"#,
            "\n",
            r#"{"id":"b","r":2,"c":1,"x":[2.0,3.0]}"#
        );
        assert!(read_dataset(shapes.as_bytes()).is_err());
        let dup = concat!(
            r#"{"id":"a","r":1,"c":1,"x":[1.0]}"#,
            "\n",
            r#"{"id":"a","r":1,"c":1,"x":[2.0]}"#
        );
        assert!(read_dataset(dup.as_bytes()).is_err());
    }

    #[test]
    fn unnormalized_model_is_normalized_on_load() {
        let file = ModelFile {
            g: 1,
            r: 2,
            c: 1,
            components: vec![ModelComponent {
                pi: 1.0,
                mean: vec![0.0, 1.0],
                row_cov: vec![4.0, 0.0, 0.0, 2.0],
                col_cov: vec![1.0],
            }],
            loglik: None,
            normalized: false,
        };
        let model = file.to_model().unwrap();
        assert!((model.component(0).row_cov.trace() - 2.0).abs() < 1e-15);
        assert!((model.component(0).col_cov[(0, 0)] - 3.0).abs() < 1e-15);
        let bad = ModelFile {
            normalized: true,
            ..file
        };
        assert!(bad.to_model().is_err());
    }

    #[test]
    fn trace_round_trip() {
        let rows = vec![
            TraceRow {
                f: 0,
                removed_id: None,
                kl: 0.123456789,
                loglik: -1234.5,
                n_remaining: 200,
            },
            TraceRow {
                f: 1,
                removed_id: Some("obs0007".into()),
                kl: 0.1,
                loglik: -1200.0,
                n_remaining: 199,
            },
        ];
        let mut buf = Vec::new();
        write_trace(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.starts_with("f,removed_id,kl,loglik,n_remaining\n0,,0.123456789,-1234.5,200\n")
        );
        assert_eq!(read_trace(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn labels_round_trip() {
        let z = Responsibilities::from_row_major(2, 2, vec![0.25, 0.75, 1.0, 0.0]).unwrap();
        let rows = label_rows(&["a".into(), "b".into()], &[2, 1], &z, &["c".into()]);
        let mut buf = Vec::new();
        write_labels(&mut buf, 2, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "id,label,z_1,z_2\na,2,0.25,0.75\nb,1,1,0\nc,0,,\n"
        );
        assert_eq!(read_labels(buf.as_slice()).unwrap(), rows);
    }
}
