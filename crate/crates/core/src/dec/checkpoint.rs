//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "DCPDEC" | version u8
//! config: n_dims u32, dims u64 × n_dims, 3 activation names (u8 len + bytes),
//!         gcn hidden u64, gcn output u64, K u64
//! blocks: count u32, then per block rows u64, cols u64, rows·cols f64
//! ```
//!
//! Blocks follow the order of `ModelState::param_slices_mut(All)`; biases are
//! stored as `1×len` blocks.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{AeConfig, GaeConfig};
use super::model::{ModelState, ParamBlocks};
use crate::error::{Error, Result};
use crate::nn::Activation;

const MAGIC: &[u8; 6] = b"DCPDEC";
const VERSION: u8 = 1;

fn block_shapes(state: &ModelState) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for l in state.encoder.iter().chain(&state.decoder).chain(&state.gcn) {
        v.push(l.weight.shape());
        if let Some(b) = &l.bias {
            v.push((1, b.len()));
        }
    }
    v.push(state.centers_a.matrix().shape());
    v.push(state.centers_g.matrix().shape());
    v
}

pub fn encode(state: &ModelState) -> Result<Vec<u8>> {
    state.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    let ae = &state.ae_config;
    out.extend_from_slice(&(ae.layer_dims.len() as u32).to_le_bytes());
    for &d in &ae.layer_dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for act in [ae.hidden_activation, ae.embedding_activation, ae.output_activation] {
        let name = act.name().as_bytes();
        out.push(name.len() as u8);
        out.extend_from_slice(name);
    }
    for v in [
        state.gae_config.hidden_dim,
        state.gae_config.output_dim,
        state.num_clusters(),
    ] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    let shapes = block_shapes(state);
    out.extend_from_slice(&(shapes.len() as u32).to_le_bytes());
    let mut copy = state.clone();
    for (slice, (r, c)) in copy.param_slices_mut(ParamBlocks::All).into_iter().zip(shapes) {
        out.extend_from_slice(&(r as u64).to_le_bytes());
        out.extend_from_slice(&(c as u64).to_le_bytes());
        for v in slice.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Checkpoint(format!("size {v} too large")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn activation(&mut self) -> Result<Activation> {
        let len = self.u8()? as usize;
        let name = String::from_utf8_lossy(self.take(len)?).into_owned();
        Activation::from_name(&name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown activation `{name}`")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ModelState> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n_dims = r.u32()? as usize;
    if n_dims > 1024 {
        return Err(Error::Checkpoint(format!("implausible layer count {n_dims}")));
    }
    let layer_dims = (0..n_dims).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
    let ae = AeConfig {
        layer_dims,
        hidden_activation: r.activation()?,
        embedding_activation: r.activation()?,
        output_activation: r.activation()?,
    };
    ae.validate()?;
    let gae = GaeConfig::new(r.usize()?, r.usize()?)?;
    let k = r.usize()?;
    let mut state = ModelState::new(ae, gae, k, &mut ChaCha8Rng::seed_from_u64(0))?;
    let shapes = block_shapes(&state);
    let count = r.u32()? as usize;
    if count != shapes.len() {
        return Err(Error::Checkpoint(format!(
            "{count} parameter blocks, config implies {}",
            shapes.len()
        )));
    }
    for (i, (slice, expect)) in state
        .param_slices_mut(ParamBlocks::All)
        .into_iter()
        .zip(shapes)
        .enumerate()
    {
        let got = (r.usize()?, r.usize()?);
        if got != expect {
            return Err(Error::Checkpoint(format!(
                "block {i} has shape {got:?}, expected {expect:?}"
            )));
        }
        for v in slice.iter_mut() {
            *v = r.f64()?;
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    Ok(state)
}

pub fn save_checkpoint(state: &ModelState, path: &Path) -> Result<()> {
    fs::write(path, encode(state)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelState> {
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Loads a checkpoint and requires it to have the same shapes as `like`.
pub fn load_checkpoint_like(path: &Path, like: &ModelState) -> Result<ModelState> {
    let state = load_checkpoint(path)?;
    if block_shapes(&state) != block_shapes(like) || state.ae_config != like.ae_config {
        return Err(Error::Checkpoint(format!(
            "{}: parameter shapes do not match the model",
            path.display()
        )));
    }
    Ok(state)
}
