//! Compressed-layer artifacts stored in the tensor container.
//!
//! Reserved tensor names:
//!
//! - `weights` (f32) when quantization is disabled, otherwise `codes` (i8,
//!   one code per element) and `scales` (f32)
//! - `mask_packed` (u8): keep flags, 8 per byte, row-major, LSB first
//! - `adapter_left` / `adapter_right` (f32), or for quantized adapters
//!   `adapter_left_codes`, `adapter_left_scales`, `adapter_right_codes`,
//!   `adapter_right_scales`
//! - `__config__` (u8): JSON with the configuration, provenance and the
//!   layout parameters needed to rebuild the layer

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapter::LowRankAdapter;
use crate::error::{Result, SlimError};
use crate::io::container::{self, Tensor, TensorMap};
use crate::pipeline::{CompressedLayer, LayerCompressionConfig, Provenance, StoredWeights};
use crate::pruner::SparsityMask;
use crate::quantizer::{dequantize, ChannelScaling, QuantizedTensor};

const FORMAT: &str = "slim-layer/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuantLayout {
    bits: u32,
    group_size: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdapterLayout {
    rank: usize,
    quantized: Option<QuantLayout>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerMeta {
    format: String,
    config: LayerCompressionConfig,
    provenance: Provenance,
    weights: Option<QuantLayout>,
    adapter: Option<AdapterLayout>,
    channel_scaling: Option<ChannelScaling>,
}

fn schema(msg: impl Into<String>) -> SlimError {
    SlimError::SchemaViolation(msg.into())
}

fn put_quantized(map: &mut TensorMap, prefix: &str, q: &QuantizedTensor) {
    map.insert(
        format!("{prefix}codes"),
        Tensor::i8(vec![q.rows(), q.cols()], q.codes().to_vec()),
    );
    map.insert(
        format!("{prefix}scales"),
        Tensor::f32(vec![q.scales().len()], q.scales().to_vec()),
    );
}

fn layout(q: &QuantizedTensor) -> QuantLayout {
    QuantLayout {
        bits: q.bits(),
        group_size: q.group_size(),
    }
}

pub fn layer_to_tensors(layer: &CompressedLayer) -> TensorMap {
    let mut map = TensorMap::new();
    let weights = match &layer.weights {
        StoredWeights::Dense(m) => {
            map.insert("weights".into(), Tensor::from_matrix(m));
            None
        }
        StoredWeights::Quantized(q) => {
            put_quantized(&mut map, "", q);
            Some(layout(q))
        }
    };
    if let Some(mask) = &layer.mask {
        let packed = mask.pack();
        map.insert("mask_packed".into(), Tensor::u8(vec![packed.len()], packed));
    }
    let adapter = layer.adapter.as_ref().map(|a| {
        let quantized = match &a.quantized {
            Some((ql, qr)) => {
                put_quantized(&mut map, "adapter_left_", ql);
                put_quantized(&mut map, "adapter_right_", qr);
                Some(layout(ql))
            }
            None => {
                map.insert("adapter_left".into(), Tensor::from_matrix(&a.left));
                map.insert("adapter_right".into(), Tensor::from_matrix(&a.right));
                None
            }
        };
        AdapterLayout {
            rank: a.rank(),
            quantized,
        }
    });
    let meta = LayerMeta {
        format: FORMAT.into(),
        config: layer.config.clone(),
        provenance: layer.provenance.clone(),
        weights,
        adapter,
        channel_scaling: layer.channel_scaling.clone(),
    };
    map.insert("__config__".into(), Tensor::json(&meta));
    map
}

struct Reader<'a> {
    map: &'a TensorMap,
    used: Vec<&'a str>,
}

impl<'a> Reader<'a> {
    fn take(&mut self, name: &'a str) -> Result<&'a Tensor> {
        let t = self
            .map
            .get(name)
            .ok_or_else(|| schema(format!("missing tensor '{name}'")))?;
        self.used.push(name);
        Ok(t)
    }

    fn quantized(
        &mut self,
        prefix: &str,
        rows: usize,
        cols: usize,
        layout: &QuantLayout,
    ) -> Result<QuantizedTensor> {
        let codes_name = self.intern(format!("{prefix}codes"));
        let scales_name = self.intern(format!("{prefix}scales"));
        let codes = self.take(codes_name)?;
        if codes.shape() != [rows, cols] {
            return Err(schema(format!(
                "'{codes_name}' has shape {:?}, expected [{rows}, {cols}]",
                codes.shape()
            )));
        }
        let scales = self.take(scales_name)?;
        if scales.shape().len() != 1 {
            return Err(schema(format!("'{scales_name}' must be a vector")));
        }
        QuantizedTensor::from_parts(
            rows,
            cols,
            codes.as_i8()?.to_vec(),
            scales.as_f32()?.to_vec(),
            layout.group_size,
            layout.bits,
        )
    }

    /// Resolves a generated name to the map's own key so borrows outlive it.
    fn intern(&self, name: String) -> &'a str {
        self.map
            .get_key_value(name.as_str())
            .map_or("", |(k, _)| k.as_str())
    }

    fn matrix(&mut self, name: &'a str, rows: usize, cols: usize) -> Result<crate::tensor::Matrix> {
        let t = self.take(name)?;
        if t.shape() != [rows, cols] {
            return Err(schema(format!(
                "'{name}' has shape {:?}, expected [{rows}, {cols}]",
                t.shape()
            )));
        }
        t.to_matrix().map_err(|e| schema(format!("'{name}': {e}")))
    }
}

pub fn layer_from_tensors(map: &TensorMap) -> Result<CompressedLayer> {
    let mut reader = Reader {
        map,
        used: Vec::new(),
    };
    let meta: LayerMeta = reader.take("__config__")?.parse_json()?;
    if meta.format != FORMAT {
        return Err(schema(format!("unknown artifact format '{}'", meta.format)));
    }
    meta.config.validate().map_err(|e| schema(e.to_string()))?;
    let (rows, cols) = (meta.provenance.rows, meta.provenance.cols);

    let weights = match &meta.weights {
        None => StoredWeights::Dense(reader.matrix("weights", rows, cols)?),
        Some(layout) => StoredWeights::Quantized(reader.quantized("", rows, cols, layout)?),
    };

    let mask = if map.contains_key("mask_packed") {
        let bytes = reader.take("mask_packed")?.as_u8()?;
        Some(SparsityMask::unpack(rows, cols, bytes)?)
    } else {
        None
    };
    if mask.is_some() != meta.config.sparsity.is_some() {
        return Err(schema(
            "mask presence does not match the sparsity configuration",
        ));
    }
    if let Some(mask) = &mask {
        let stored = match &weights {
            StoredWeights::Dense(m) => m.clone(),
            StoredWeights::Quantized(q) => dequantize(q),
        };
        let leaked =
            (0..rows).any(|i| (0..cols).any(|j| !mask.is_kept(i, j) && stored.get(i, j) != 0.0));
        if leaked {
            return Err(schema("weights are nonzero where the mask drops"));
        }
    }

    let adapter = match &meta.adapter {
        None => None,
        Some(al) => {
            let r = al.rank;
            let a = match &al.quantized {
                Some(layout) => {
                    let ql = reader.quantized("adapter_left_", rows, r, layout)?;
                    let qr = reader.quantized("adapter_right_", r, cols, layout)?;
                    LowRankAdapter {
                        left: dequantize(&ql),
                        right: dequantize(&qr),
                        quantized: Some((ql, qr)),
                    }
                }
                None => {
                    let left = reader.matrix("adapter_left", rows, r)?;
                    let right = reader.matrix("adapter_right", r, cols)?;
                    LowRankAdapter::new(left, right)?
                }
            };
            if r == 0 || r > rows.min(cols) {
                return Err(schema(format!(
                    "adapter rank {r} invalid for {rows}x{cols}"
                )));
            }
            Some(a)
        }
    };

    if let Some(cs) = &meta.channel_scaling {
        cs.validate(rows)?;
    }

    if let Some(extra) = map.keys().find(|k| !reader.used.contains(&k.as_str())) {
        return Err(schema(format!("unexpected tensor '{extra}'")));
    }

    Ok(CompressedLayer {
        weights,
        mask,
        adapter,
        channel_scaling: meta.channel_scaling,
        config: meta.config,
        provenance: meta.provenance,
    })
}

pub fn serialize_compressed_layer(layer: &CompressedLayer, path: impl AsRef<Path>) -> Result<()> {
    container::write_container(path, &layer_to_tensors(layer))
}

pub fn deserialize_compressed_layer(path: impl AsRef<Path>) -> Result<CompressedLayer> {
    layer_from_tensors(&container::read_container(path)?)
}
