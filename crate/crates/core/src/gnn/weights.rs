//! Text weight file shared with external tooling.
//!
//! A single JSON document:
//!
//! ```text
//! { "format_version": "1", "model_type": "gcn" | "gin", "input_dim": d,
//!   "num_classes": c, "readout": "max" | "mean" | "none",
//!   "layers": [ { "weight": [[..]], "bias": [..] }                      // GCN
//!             | { "mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2", "eps" } ],  // GIN
//!   "classifier": { "weight": [[..]], "bias": [..] },
//!   "normalize": true }                                            // optional
//! ```
//!
//! `normalize` is written only when set; it marks models that scale node
//! embeddings to unit L2 norm after every layer.
//!
//! Matrices are row-major `in × out`. Numbers are written with 17
//! significant digits so a save/load cycle reproduces every value exactly.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;
use thiserror::Error;

use super::{LayerSpec, Linear, ModelError, ModelSpec, ModelType, Readout};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum WeightFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed weight file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format_version {0:?}")]
    Version(String),
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Float serialized as a 17-significant-digit JSON number.
#[derive(Clone, Copy, Debug)]
struct Exact(f64);

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        f64::deserialize(deserializer).map(Exact)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearRecord {
    weight: Vec<Vec<Exact>>,
    bias: Vec<Exact>,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<Vec<Vec<Exact>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<Vec<Exact>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mlp_w1: Option<Vec<Vec<Exact>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mlp_b1: Option<Vec<Exact>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mlp_w2: Option<Vec<Vec<Exact>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mlp_b2: Option<Vec<Exact>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps: Option<Exact>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightDocument {
    format_version: String,
    model_type: ModelType,
    input_dim: usize,
    num_classes: usize,
    readout: Readout,
    layers: Vec<LayerRecord>,
    classifier: LinearRecord,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    normalize: bool,
}

fn rows_out(a: &Array2<f64>) -> Vec<Vec<Exact>> {
    a.rows()
        .into_iter()
        .map(|r| r.iter().map(|&v| Exact(v)).collect())
        .collect()
}

fn vec_out(a: &Array1<f64>) -> Vec<Exact> {
    a.iter().map(|&v| Exact(v)).collect()
}

fn matrix_in(name: &str, rows: Vec<Vec<Exact>>) -> Result<Array2<f64>, WeightFileError> {
    let n = rows.len();
    let m = rows.first().map(Vec::len).unwrap_or(0);
    if n == 0 || m == 0 {
        return Err(WeightFileError::Schema(format!("{name}: empty matrix")));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != m) {
        return Err(WeightFileError::Schema(format!(
            "{name}: row {bad} has {} entries, expected {m}",
            rows[bad].len()
        )));
    }
    let flat = rows.into_iter().flatten().map(|e| e.0).collect();
    Ok(Array2::from_shape_vec((n, m), flat).expect("checked shape"))
}

fn vec_in(values: Vec<Exact>) -> Array1<f64> {
    values.into_iter().map(|e| e.0).collect()
}

fn required<T>(name: &str, field: &str, value: Option<T>) -> Result<T, WeightFileError> {
    value.ok_or_else(|| WeightFileError::Schema(format!("{name}: missing `{field}`")))
}

pub fn to_string(model: &ModelSpec) -> String {
    let layers = model
        .layers()
        .iter()
        .map(|layer| match layer {
            LayerSpec::Gcn { weight, bias } => LayerRecord {
                weight: Some(rows_out(weight)),
                bias: bias.as_ref().map(vec_out),
                ..LayerRecord::default()
            },
            LayerSpec::Gin { mlp1, mlp2, eps } => LayerRecord {
                mlp_w1: Some(rows_out(&mlp1.weight)),
                mlp_b1: Some(vec_out(&mlp1.bias)),
                mlp_w2: Some(rows_out(&mlp2.weight)),
                mlp_b2: Some(vec_out(&mlp2.bias)),
                eps: Some(Exact(*eps)),
                ..LayerRecord::default()
            },
        })
        .collect();
    let doc = WeightDocument {
        format_version: FORMAT_VERSION.to_string(),
        model_type: model.model_type(),
        input_dim: model.input_dim(),
        num_classes: model.num_classes(),
        readout: model.readout(),
        layers,
        classifier: LinearRecord {
            weight: rows_out(&model.classifier().weight),
            bias: vec_out(&model.classifier().bias),
        },
        normalize: model.normalizes(),
    };
    let mut text = serde_json::to_string(&doc).expect("weights serialize");
    text.push('\n');
    text
}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T, WeightFileError> {
    Ok(serde_json::from_str(text)?)
}

pub fn from_str(text: &str) -> Result<ModelSpec, WeightFileError> {
    let doc: WeightDocument = parse(text)?;
    if doc.format_version != FORMAT_VERSION {
        return Err(WeightFileError::Version(doc.format_version));
    }
    let mut layers = Vec::with_capacity(doc.layers.len());
    for (i, record) in doc.layers.into_iter().enumerate() {
        let name = format!("layers[{i}]");
        let layer = match doc.model_type {
            ModelType::Gcn => {
                if record.mlp_w1.is_some() || record.mlp_w2.is_some() || record.eps.is_some() {
                    return Err(WeightFileError::Schema(format!("{name}: GIN fields in a GCN layer")));
                }
                LayerSpec::Gcn {
                    weight: matrix_in(&name, required(&name, "weight", record.weight)?)?,
                    bias: record.bias.map(vec_in),
                }
            }
            ModelType::Gin => {
                if record.weight.is_some() || record.bias.is_some() {
                    return Err(WeightFileError::Schema(format!("{name}: GCN fields in a GIN layer")));
                }
                LayerSpec::Gin {
                    mlp1: Linear {
                        weight: matrix_in(&name, required(&name, "mlp_w1", record.mlp_w1)?)?,
                        bias: vec_in(required(&name, "mlp_b1", record.mlp_b1)?),
                    },
                    mlp2: Linear {
                        weight: matrix_in(&name, required(&name, "mlp_w2", record.mlp_w2)?)?,
                        bias: vec_in(required(&name, "mlp_b2", record.mlp_b2)?),
                    },
                    eps: required(&name, "eps", record.eps)?.0,
                }
            }
        };
        layers.push(layer);
    }
    let classifier = Linear {
        weight: matrix_in("classifier", doc.classifier.weight)?,
        bias: vec_in(doc.classifier.bias),
    };
    let model = ModelSpec::new(doc.model_type, layers, doc.readout, classifier)?.with_normalize(doc.normalize);
    if model.input_dim() != doc.input_dim {
        return Err(ModelError::DimensionChain {
            layer: "layers[0]".into(),
            expected: doc.input_dim,
            found: model.input_dim(),
        }
        .into());
    }
    if model.num_classes() != doc.num_classes {
        return Err(ModelError::DimensionChain {
            layer: "classifier".into(),
            expected: doc.num_classes,
            found: model.num_classes(),
        }
        .into());
    }
    Ok(model)
}

pub fn save(model: &ModelSpec, path: &Path) -> Result<(), WeightFileError> {
    fs::write(path, to_string(model)).map_err(|source| WeightFileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: &Path) -> Result<ModelSpec, WeightFileError> {
    let text = fs::read_to_string(path).map_err(|source| WeightFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_str(&text)
}
