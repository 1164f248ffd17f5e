//! Binary model checkpoints.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! "NCPD" | version | meta length | meta (UTF-8 TOML) | tensor count
//! per tensor: name length | name (UTF-8) | rank | extents... | f32 LE data
//! ```
//!
//! The meta block records the architecture spec (and the training
//! condition, when known), so a checkpoint is self-describing. Any change
//! to this layout must bump [`VERSION`].

use std::fs;
use std::path::Path;

use ncpdrive::autodiff::ParamStore;
use ncpdrive::data::Condition;
use ncpdrive::models::{ArchitectureSpec, Model};
use ncpdrive::Tensor;
use serde::{Deserialize, Serialize};

pub const MAGIC: [u8; 4] = *b"NCPD";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: magic {found:?}, expected \"NCPD\" format version {VERSION}")]
    BadMagic { found: Vec<u8> },
    #[error("checkpoint format version {found} is not supported (expected {VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("checkpoint truncated at byte {offset}: {needed} more bytes needed")]
    Truncated { offset: usize, needed: usize },
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("invalid UTF-8 in {0}")]
    Utf8(&'static str),
    #[error("invalid checkpoint metadata: {0}")]
    Meta(String),
    #[error("checkpoint does not match its architecture: {0}")]
    Model(#[from] ncpdrive::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Everything in a checkpoint besides the tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_condition: Option<Condition>,
    pub spec: ArchitectureSpec,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("fits in u32").to_le_bytes());
}

/// Serializes a meta block and named tensors.
pub fn encode(meta: &str, params: &ParamStore<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + meta.len() + 4 * params.num_scalars());
    out.extend_from_slice(&MAGIC);
    put_u32(&mut out, VERSION as usize);
    put_u32(&mut out, meta.len());
    out.extend_from_slice(meta.as_bytes());
    put_u32(&mut out, params.len());
    for e in params.iter() {
        put_u32(&mut out, e.name.len());
        out.extend_from_slice(e.name.as_bytes());
        put_u32(&mut out, e.value.shape().len());
        for &d in e.value.shape() {
            put_u32(&mut out, d);
        }
        for v in e.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let rest = self.bytes.len() - self.pos;
        if n > rest {
            return Err(CheckpointError::Truncated {
                offset: self.bytes.len(),
                needed: n - rest,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, CheckpointError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn string(&mut self, what: &'static str) -> Result<&'a str, CheckpointError> {
        let n = self.u32()?;
        std::str::from_utf8(self.take(n)?).map_err(|_| CheckpointError::Utf8(what))
    }
}

/// Inverse of [`encode`]. Tensors come back in file order, unbounded.
pub fn decode(bytes: &[u8]) -> Result<(String, ParamStore<f32>), CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r
        .take(4)
        .map_err(|_| CheckpointError::BadMagic { found: bytes.to_vec() })?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic { found: magic.to_vec() });
    }
    let version = r.u32()? as u32;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion { found: version });
    }
    let meta = r.string("metadata")?.to_string();
    let count = r.u32()?;
    let mut params = ParamStore::new();
    for _ in 0..count {
        let name = r.string("tensor name")?.to_string();
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        let len: usize = shape.iter().product();
        let raw = r.take(
            len.checked_mul(4)
                .ok_or(CheckpointError::Meta("tensor too large".into()))?,
        )?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        params.insert(name, Tensor::new(&shape, data)?)?;
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok((meta, params))
}

pub fn to_bytes(model: &Model, train_condition: Option<Condition>) -> Vec<u8> {
    let meta = CheckpointMeta {
        train_condition,
        spec: model.spec().clone(),
    };
    let text = toml::to_string(&meta).expect("spec serializes to TOML");
    encode(&text, model.params())
}

/// Rebuilds the model; unknown, missing or mis-shaped tensors are errors.
pub fn from_bytes(bytes: &[u8]) -> Result<(Model, CheckpointMeta), CheckpointError> {
    let (text, params) = decode(bytes)?;
    let meta: CheckpointMeta = toml::from_str(&text).map_err(|e| CheckpointError::Meta(e.to_string()))?;
    let model = Model::from_params(meta.spec.clone(), params)?;
    Ok((model, meta))
}

pub fn save_checkpoint(
    model: &Model,
    train_condition: Option<Condition>,
    path: impl AsRef<Path>,
) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, to_bytes(model, train_condition))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Model, CheckpointMeta), CheckpointError> {
    from_bytes(&fs::read(path)?)
}
