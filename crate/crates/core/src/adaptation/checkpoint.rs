//! `ECOA` adapter checkpoints.
//!
//! Layout, all little-endian: magic `ECOA`, `u32` version (1), `u32`
//! network count (3: discriminator, residual, reconstructor). Each network
//! is `u32` layer count `L`, `L + 1` `u32` sizes, `L` activation bytes
//! (0 identity, 1 relu, 2 sigmoid), then per layer the weights row-major
//! followed by the bias, as `f32`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model::AdaptationModel;
use super::nn::{Activation, Dense, DenseNetwork};
use super::train::{LossPoint, TrainingConfig};
use crate::{Error, Result};

pub const ECOA_MAGIC: &[u8; 4] = b"ECOA";
pub const ECOA_VERSION: u32 = 1;

/// JSON written next to a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdapterManifest {
    pub dim: usize,
    pub config: TrainingConfig,
    pub losses: Vec<LossPoint>,
}

fn put_network(buf: &mut Vec<u8>, net: &DenseNetwork) {
    let layers = net.layers();
    buf.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for s in net.sizes() {
        buf.extend_from_slice(&(s as u32).to_le_bytes());
    }
    buf.extend(layers.iter().map(|l| l.activation.tag()));
    for l in layers {
        for r in 0..l.outputs() {
            for c in 0..l.inputs() {
                buf.extend_from_slice(&(l.weights[(r, c)] as f32).to_le_bytes());
            }
        }
        for b in l.bias.iter() {
            buf.extend_from_slice(&(*b as f32).to_le_bytes());
        }
    }
}

pub fn write_ecoa<W: Write>(mut w: W, model: &AdaptationModel) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(ECOA_MAGIC);
    buf.extend_from_slice(&ECOA_VERSION.to_le_bytes());
    buf.extend_from_slice(&3u32.to_le_bytes());
    for net in [&model.discriminator, &model.residual, &model.reconstructor] {
        put_network(&mut buf, net);
    }
    w.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("ECOA checkpoint truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f64> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()) as f64)
    }
}

fn get_network(cur: &mut Cursor) -> Result<DenseNetwork> {
    let n = cur.u32()? as usize;
    if n == 0 || n > 64 {
        return Err(Error::Format(format!("ECOA network has {n} layers")));
    }
    let sizes = (0..=n)
        .map(|_| cur.u32().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let acts = cur
        .take(n)?
        .iter()
        .map(|&t| Activation::from_tag(t).ok_or_else(|| Error::Format(format!("unknown activation tag {t}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut layers = Vec::with_capacity(n);
    for i in 0..n {
        let (inp, out) = (sizes[i], sizes[i + 1]);
        let count = inp
            .checked_mul(out)
            .filter(|&c| c.saturating_mul(4) <= cur.bytes.len())
            .ok_or_else(|| Error::Format("ECOA layer larger than file".into()))?;
        let vals = (0..count).map(|_| cur.f32()).collect::<Result<Vec<_>>>()?;
        let weights = DMatrix::from_row_slice(out, inp, &vals);
        let bias = DVector::from_vec((0..out).map(|_| cur.f32()).collect::<Result<Vec<_>>>()?);
        layers.push(Dense {
            weights,
            bias,
            activation: acts[i],
        });
    }
    DenseNetwork::new(layers).map_err(|e| Error::Format(format!("ECOA network: {e}")))
}

pub fn read_ecoa<R: Read>(mut r: R) -> Result<AdaptationModel> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(4)? != ECOA_MAGIC {
        return Err(Error::Format("bad ECOA magic".into()));
    }
    let version = cur.u32()?;
    if version != ECOA_VERSION {
        return Err(Error::Format(format!("unsupported ECOA version {version}")));
    }
    let count = cur.u32()?;
    if count != 3 {
        return Err(Error::Format(format!("ECOA holds {count} networks, expected 3")));
    }
    let d = get_network(&mut cur)?;
    let r = get_network(&mut cur)?;
    let g = get_network(&mut cur)?;
    if cur.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after ECOA payload".into()));
    }
    AdaptationModel::from_networks(d, r, g).map_err(|e| Error::Format(format!("ECOA model: {e}")))
}

pub fn write_ecoa_file(path: impl AsRef<Path>, model: &AdaptationModel) -> Result<()> {
    let mut buf = Vec::new();
    write_ecoa(&mut buf, model)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_ecoa_file(path: impl AsRef<Path>) -> Result<AdaptationModel> {
    read_ecoa(fs::File::open(path)?)
}
