use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::TrainState;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::model::ParamStore;

const MAGIC: &[u8; 8] = b"MBGMNCKP";
pub const CHECKPOINT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

/// Training state plus free-form run metadata (the run configuration text).
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub state: TrainState,
    pub meta: String,
}

/// Layout, little endian: magic, version, step, epoch, lr, best, meta,
/// then per parameter name, shape, values, Adam m, Adam v; finally the
/// SHA-256 of everything before it.
pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let s = &ckpt.state;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&s.step.to_le_bytes());
    buf.extend_from_slice(&s.epoch.to_le_bytes());
    buf.extend_from_slice(&s.lr.to_bits().to_le_bytes());
    match s.best {
        Some((epoch, value)) => {
            buf.push(1);
            buf.extend_from_slice(&epoch.to_le_bytes());
            buf.extend_from_slice(&value.to_bits().to_le_bytes());
        }
        None => buf.push(0),
    }
    put_bytes(&mut buf, ckpt.meta.as_bytes());
    buf.extend_from_slice(&(s.params.len() as u64).to_le_bytes());
    for (i, (name, tensor)) in s.params.iter().enumerate() {
        put_bytes(&mut buf, name.as_bytes());
        buf.extend_from_slice(&(tensor.shape().len() as u64).to_le_bytes());
        for &d in tensor.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for t in [tensor, &s.adam_m[i], &s.adam_v[i]] {
            for x in t.data() {
                buf.extend_from_slice(&x.to_bits().to_le_bytes());
            }
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    if bytes.len() < MAGIC.len() + 4 + DIGEST_LEN || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Checkpoint(format!("{} is not a checkpoint", path.display())));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checkpoint(format!("{}: checksum mismatch", path.display())));
    }
    let mut r = Reader { buf: body, pos: MAGIC.len() };
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let step = r.u64()?;
    let epoch = r.u64()?;
    let lr = r.f64()?;
    let best = match r.take(1)?[0] {
        0 => None,
        1 => Some((r.u64()?, r.f64()?)),
        b => return Err(Error::Checkpoint(format!("bad best-metric tag {b}"))),
    };
    let meta = String::from_utf8(r.bytes()?.to_vec()).map_err(|_| Error::Checkpoint("metadata is not UTF-8".into()))?;
    let n = r.u64()? as usize;
    let mut params = ParamStore::new();
    let (mut adam_m, mut adam_v) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let name = String::from_utf8(r.bytes()?.to_vec()).map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?;
        let ndim = r.u64()? as usize;
        let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let len: usize = shape.iter().product();
        let mut read = || -> Result<Tensor> {
            let data = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            Tensor::new(shape.clone(), data)
        };
        let (p, m, v) = (read()?, read()?, read()?);
        params.insert(name, p);
        adam_m.push(m);
        adam_v.push(v);
    }
    if r.pos != body.len() {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    Ok(Checkpoint {
        state: TrainState {
            params,
            adam_m,
            adam_v,
            step,
            epoch,
            lr,
            best,
        },
        meta,
    })
}

fn put_bytes(buf: &mut Vec<u8>, b: &[u8]) {
    buf.extend_from_slice(&(b.len() as u64).to_le_bytes());
    buf.extend_from_slice(b);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u64()? as usize;
        self.take(n)
    }
}
