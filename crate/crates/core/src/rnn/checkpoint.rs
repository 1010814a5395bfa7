//! JSON checkpoints of trained classifiers.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Mat, Params, RnnConfig, RnnModel};
use crate::dataset::InputMode;
use crate::error::{Error, Result};
use crate::io::{atomic_write, check_version, FORMAT_VERSION};

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    config: RnnConfig,
    #[serde(default)]
    input_mode: Option<InputMode>,
    params: BTreeMap<String, Value>,
}

pub fn to_json(model: &RnnModel) -> Result<String> {
    let mut params = BTreeMap::new();
    for (l, layer) in model.params.layers.iter().enumerate() {
        params.insert(
            format!("layer{l}.w_x"),
            serde_json::to_value(layer.w_x.to_rows())?,
        );
        params.insert(
            format!("layer{l}.w_h"),
            serde_json::to_value(layer.w_h.to_rows())?,
        );
        params.insert(format!("layer{l}.b"), serde_json::to_value(&layer.b)?);
    }
    params.insert("out.w".into(), serde_json::to_value(&model.params.w_out)?);
    params.insert("out.b".into(), serde_json::to_value(&model.params.b_out)?);
    let ckpt = Checkpoint {
        format_version: FORMAT_VERSION,
        config: model.config.clone(),
        input_mode: model.input_mode,
        params,
    };
    Ok(serde_json::to_string(&ckpt)?)
}

pub fn from_json(json: &str) -> Result<RnnModel> {
    let ckpt: Checkpoint = serde_json::from_str(json)?;
    check_version(ckpt.format_version)?;
    ckpt.config.validate()?;
    let expected = Params::zeros(&ckpt.config);
    let take = |name: &str| -> Result<Value> {
        ckpt.params
            .get(name)
            .cloned()
            .ok_or_else(|| Error::InvalidInput(format!("checkpoint is missing parameter {name}")))
    };
    let mut params = expected.clone();
    for (l, layer) in params.layers.iter_mut().enumerate() {
        layer.w_x = matrix(
            take(&format!("layer{l}.w_x"))?,
            &expected.layers[l].w_x,
            l,
            "w_x",
        )?;
        layer.w_h = matrix(
            take(&format!("layer{l}.w_h"))?,
            &expected.layers[l].w_h,
            l,
            "w_h",
        )?;
        layer.b = vector(
            take(&format!("layer{l}.b"))?,
            expected.layers[l].b.len(),
            &format!("layer{l}.b"),
        )?;
    }
    params.w_out = vector(take("out.w")?, expected.w_out.len(), "out.w")?;
    params.b_out = vector(take("out.b")?, 1, "out.b")?;
    if !params.is_finite() {
        return Err(Error::InvalidInput(
            "checkpoint contains non-finite parameters".into(),
        ));
    }
    Ok(RnnModel {
        config: ckpt.config,
        params,
        input_mode: ckpt.input_mode,
    })
}

fn matrix(v: Value, like: &Mat, layer: usize, name: &str) -> Result<Mat> {
    let rows: Vec<Vec<f64>> = serde_json::from_value(v)?;
    match Mat::from_rows(&rows) {
        Some(m) if m.rows == like.rows && m.cols == like.cols => Ok(m),
        _ => Err(Error::InvalidInput(format!(
            "parameter layer{layer}.{name} should be {}x{}",
            like.rows, like.cols
        ))),
    }
}

fn vector(v: Value, len: usize, name: &str) -> Result<Vec<f64>> {
    let out: Vec<f64> = serde_json::from_value(v)?;
    if out.len() != len {
        return Err(Error::InvalidInput(format!(
            "parameter {name} should have {len} entries"
        )));
    }
    Ok(out)
}

pub fn save(model: &RnnModel, path: &Path) -> Result<()> {
    let mut s = to_json(model)?;
    s.push('\n');
    atomic_write(path, s.as_bytes())
}

pub fn load(path: &Path) -> Result<RnnModel> {
    from_json(&std::fs::read_to_string(path)?)
}
