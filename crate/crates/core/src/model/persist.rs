//! JSON model files.
//!
//! ```text
//! { "format_version": 1, "arch": "784,(100,50),(30,10)", "theta": 1.5, "seed": 7,
//!   "units": [ { "layers": [ { "w_shape": [100, 784], "w": [...], "b": [...] } ] } ],
//!   "bp_head": null }
//! ```
//!
//! Values are written as shortest round-trip decimal literals, so a save/load
//! cycle is lossless.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Activation, DenseLayer, Tensor};

use super::{parse_arch_with_depth, HiddenUnit, IntFFModel};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    arch: String,
    theta: f64,
    seed: u64,
    units: Vec<UnitFile>,
    #[serde(default)]
    bp_head: Option<LayerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitFile {
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    w_shape: [usize; 2],
    w: Vec<f64>,
    b: Vec<f64>,
}

fn layer_file(l: &DenseLayer) -> LayerFile {
    LayerFile {
        w_shape: [l.out_width(), l.in_width()],
        w: l.weight.data().to_vec(),
        b: l.bias.data().to_vec(),
    }
}

fn load_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::ModelLoad {
        field: field.into(),
        message: message.into(),
    }
}

fn layer_from_file(f: LayerFile, field: &str, activation: Activation) -> Result<DenseLayer> {
    let [out, inw] = f.w_shape;
    if f.w.len() != out * inw {
        return Err(load_err(
            format!("{field}.w"),
            format!("{} values for shape [{out}, {inw}]", f.w.len()),
        ));
    }
    if f.b.len() != out {
        return Err(load_err(
            format!("{field}.b"),
            format!("{} values for {out} outputs", f.b.len()),
        ));
    }
    let weight = Tensor::matrix(out, inw, f.w).map_err(|e| load_err(format!("{field}.w"), e.to_string()))?;
    let bias = Tensor::vector(f.b).map_err(|e| load_err(format!("{field}.b"), e.to_string()))?;
    Ok(DenseLayer {
        weight,
        bias,
        activation,
    })
}

pub fn model_to_json(model: &IntFFModel) -> String {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        arch: model.arch.to_string(),
        theta: model.theta,
        seed: model.seed,
        units: model
            .units
            .iter()
            .map(|u| UnitFile {
                layers: u.layers.iter().map(layer_file).collect(),
            })
            .collect(),
        bp_head: model.bp_head.as_ref().map(layer_file),
    };
    serde_json::to_string(&file).expect("model serialization cannot fail")
}

pub fn model_from_json(text: &str) -> Result<IntFFModel> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| load_err("<document>", e.to_string()))?;
    match value.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(v) => {
            return Err(load_err(
                "format_version",
                format!("unsupported version {v}, expected {FORMAT_VERSION}"),
            ))
        }
        None => return Err(load_err("format_version", "missing or not an integer")),
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| load_err("<document>", e.to_string()))?;

    let mut arch = parse_arch_with_depth(&file.arch, usize::MAX)
        .map_err(|e| load_err("arch", e.to_string()))?;
    if !(file.theta > 0.0 && file.theta.is_finite()) {
        return Err(load_err("theta", format!("must be positive, got {}", file.theta)));
    }
    if file.units.len() != arch.units.len() {
        return Err(load_err(
            "units",
            format!("{} units stored, arch declares {}", file.units.len(), arch.units.len()),
        ));
    }

    let mut units = Vec::with_capacity(file.units.len());
    for (k, (uf, spec)) in file.units.into_iter().zip(&arch.units).enumerate() {
        if uf.layers.len() != spec.depth() {
            return Err(load_err(
                format!("units[{k}].layers"),
                format!("{} layers stored, arch declares {}", uf.layers.len(), spec.depth()),
            ));
        }
        let mut expected_in = arch.unit_input_width(k);
        let mut layers = Vec::with_capacity(spec.depth());
        for (l, (lf, &width)) in uf.layers.into_iter().zip(&spec.layer_widths).enumerate() {
            let field = format!("units[{k}].layers[{l}]");
            if lf.w_shape != [width, expected_in] {
                return Err(load_err(
                    format!("{field}.w_shape"),
                    format!("{:?} does not match arch [{width}, {expected_in}]", lf.w_shape),
                ));
            }
            layers.push(layer_from_file(lf, &field, Activation::Relu)?);
            expected_in = width;
        }
        units.push(HiddenUnit { layers });
    }

    let bp_head = match file.bp_head {
        None => None,
        Some(h) => {
            let fan_in = arch.units.last().expect("validated").group_width();
            if h.w_shape[1] != fan_in || h.w_shape[0] == 0 {
                return Err(load_err(
                    "bp_head.w_shape",
                    format!("{:?} does not fit group width {fan_in}", h.w_shape),
                ));
            }
            arch.bp_head_width = Some(h.w_shape[0]);
            Some(layer_from_file(h, "bp_head", Activation::Identity)?)
        }
    };

    Ok(IntFFModel {
        arch,
        theta: file.theta,
        seed: file.seed,
        units,
        bp_head,
    })
}

pub fn save_model(model: &IntFFModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(model))
        .map_err(|e| Error::io(format!("writing model {}", path.display()), e))
}

pub fn load_model(path: &Path) -> Result<IntFFModel> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading model {}", path.display()), e))?;
    model_from_json(&text)
}
