//! Binary checkpoint of a trained model.
//!
//! Layout, all integers little-endian:
//! `b"PVCK"`, format version `u8`, config as `u64` length + TOML text,
//! `u32` network count, then per network: role `u8` (0 encoder, 1 decoder,
//! 2 projector), view `u32`, layer count `u32`, and per layer: `u64` in,
//! `u64` out, activation `u8`, `in * out` weights row-major as `f64`,
//! `out` biases as `f64`. Trailer: `u32` threshold count, each a presence
//! byte followed by an `f64`.

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::nn::{Activation, Layer, Mlp};
use crate::trainer::{Model, TrainConfig};

const MAGIC: &[u8; 4] = b"PVCK";
pub const FORMAT_VERSION: u8 = 1;

const ROLE_ENCODER: u8 = 0;
const ROLE_DECODER: u8 = 1;
const ROLE_PROJECTOR: u8 = 2;

fn put_net(buf: &mut Vec<u8>, role: u8, view: usize, net: &Mlp) {
    buf.push(role);
    buf.extend((view as u32).to_le_bytes());
    buf.extend((net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        let (rows, cols) = layer.weight.dim();
        buf.extend((rows as u64).to_le_bytes());
        buf.extend((cols as u64).to_le_bytes());
        buf.push(layer.activation.code());
        for w in layer.weight.iter().chain(layer.bias.iter()) {
            buf.extend(w.to_le_bytes());
        }
    }
}

pub fn encode(model: &Model, cfg: &TrainConfig) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend(MAGIC);
    buf.push(FORMAT_VERSION);
    let text = cfg.to_toml_string();
    buf.extend((text.len() as u64).to_le_bytes());
    buf.extend(text.as_bytes());
    let n_nets = 2 * model.n_views() + 1;
    buf.extend((n_nets as u32).to_le_bytes());
    for (v, net) in model.encoders.iter().enumerate() {
        put_net(&mut buf, ROLE_ENCODER, v, net);
    }
    for (v, net) in model.decoders.iter().enumerate() {
        put_net(&mut buf, ROLE_DECODER, v, net);
    }
    put_net(&mut buf, ROLE_PROJECTOR, 0, &model.projector);
    buf.extend((model.last_thresholds.len() as u32).to_le_bytes());
    for t in &model.last_thresholds {
        buf.push(t.is_some() as u8);
        buf.extend(t.unwrap_or(0.0).to_le_bytes());
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::InvalidArgument(format!("checkpoint truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::InvalidArgument(format!("checkpoint size field {v} too large")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::InvalidArgument("checkpoint size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn net(&mut self) -> Result<(u8, usize, Mlp)> {
        let role = self.u8()?;
        let view = self.u32()?;
        let n_layers = self.u32()?;
        let mut layers = Vec::with_capacity(n_layers.min(64));
        for _ in 0..n_layers {
            let rows = self.u64()?;
            let cols = self.u64()?;
            let code = self.u8()?;
            let activation = Activation::from_code(code)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown activation code {code}")))?;
            let weight = Array2::from_shape_vec((rows, cols), self.f64s(rows * cols)?)
                .map_err(|e| Error::Shape(e.to_string()))?;
            let bias = Array1::from(self.f64s(cols)?);
            if let Some(prev) = layers.last().map(|l: &Layer| l.weight.ncols()) {
                if prev != rows {
                    return Err(Error::Shape(format!("layer input {rows} does not follow output {prev}")));
                }
            }
            layers.push(Layer { weight, bias, activation });
        }
        if layers.is_empty() {
            return Err(Error::InvalidArgument("checkpoint network without layers".into()));
        }
        Ok((role, view, Mlp::from_layers(layers)))
    }
}

pub fn decode(bytes: &[u8]) -> Result<(Model, TrainConfig)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::InvalidArgument("not a checkpoint file".into()));
    }
    let version = r.u8()?;
    if version != FORMAT_VERSION {
        return Err(Error::InvalidArgument(format!("unsupported checkpoint version {version}")));
    }
    let len = r.u64()?;
    let text = std::str::from_utf8(r.take(len)?).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let cfg = TrainConfig::from_toml_str(text)?;
    let n_nets = r.u32()?;
    let (mut encoders, mut decoders, mut projector) = (Vec::new(), Vec::new(), None);
    for _ in 0..n_nets {
        let (role, view, net) = r.net()?;
        let slot = match role {
            ROLE_ENCODER => &mut encoders,
            ROLE_DECODER => &mut decoders,
            ROLE_PROJECTOR => {
                projector = Some(net);
                continue;
            }
            other => return Err(Error::InvalidArgument(format!("unknown network role {other}"))),
        };
        if view != slot.len() {
            return Err(Error::InvalidArgument(format!("network for view {view} out of order")));
        }
        slot.push(net);
    }
    let projector = projector.ok_or_else(|| Error::InvalidArgument("checkpoint lacks a projector".into()))?;
    if encoders.len() != decoders.len() || encoders.len() < 2 {
        return Err(Error::InvalidArgument("checkpoint needs one encoder and decoder per view".into()));
    }
    let n_thresholds = r.u32()?;
    let mut last_thresholds = Vec::with_capacity(n_thresholds.min(1024));
    for _ in 0..n_thresholds {
        let present = r.u8()? != 0;
        let t = r.f64s(1)?[0];
        last_thresholds.push(present.then_some(t));
    }
    if r.pos != bytes.len() {
        return Err(Error::InvalidArgument("trailing bytes after checkpoint".into()));
    }
    Ok((
        Model {
            encoders,
            decoders,
            projector,
            last_thresholds,
        },
        cfg,
    ))
}

pub fn save(path: &Path, model: &Model, cfg: &TrainConfig) -> Result<()> {
    std::fs::write(path, encode(model, cfg)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(Model, TrainConfig)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::InvalidArgument(msg) | Error::Shape(msg) => Error::data(path, None, msg),
        other => other,
    })
}
