//! Parameter checkpoints.
//!
//! Little-endian layout:
//!
//! ```text
//! magic   8 bytes  "NVSCKPT\0"
//! version u32      1
//! meta    u64 length + UTF-8 bytes (free-form, e.g. key=value lines)
//! count   u64
//! count x { name: u64 length + UTF-8, trainable: u8, rank: u32, dims: rank x u64, values: f64 each }
//! ```
//!
//! Values are always written as f64, so f64 models round-trip exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::params::ParamStore;
use crate::autodiff::{Real, Tensor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"NVSCKPT\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub metadata: String,
    pub params: ParamStore<f64>,
}

impl Checkpoint {
    /// Copies every stored tensor into `store`, matching by name and shape.
    pub fn load_into<T: Real>(&self, store: &mut ParamStore<T>) -> Result<()> {
        if self.params.len() != store.len() {
            return Err(Error::Malformed(format!(
                "checkpoint has {} tensors, model has {}",
                self.params.len(),
                store.len()
            )));
        }
        for (_, p) in self.params.iter() {
            let id = store
                .find(&p.name)
                .ok_or_else(|| Error::Malformed(format!("model has no parameter {}", p.name)))?;
            let dst = store.get_mut(id);
            if dst.value.shape() != p.value.shape() {
                return Err(Error::shape(
                    "checkpoint",
                    format!("{}: stored {:?}, model {:?}", p.name, p.value.shape(), dst.value.shape()),
                ));
            }
            dst.value = p.value.cast();
        }
        Ok(())
    }
}

pub fn write_checkpoint<T: Real>(store: &ParamStore<T>, metadata: &str, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_checkpoint_to(store, metadata, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_checkpoint_to<T: Real, W: Write>(
    store: &ParamStore<T>,
    metadata: &str,
    w: &mut W,
) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    write_str(w, metadata)?;
    w.write_all(&(store.len() as u64).to_le_bytes())?;
    for (_, p) in store.iter() {
        write_str(w, &p.name)?;
        w.write_all(&[p.trainable as u8])?;
        w.write_all(&(p.value.rank() as u32).to_le_bytes())?;
        for &d in p.value.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in p.value.data() {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint_from(&mut BufReader::new(f))
}

pub fn read_checkpoint_from<R: Read>(r: &mut R) -> Result<Checkpoint> {
    let mut magic = [0u8; 8];
    read_exact(r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Malformed("not a checkpoint file".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Malformed(format!("unsupported checkpoint version {version}")));
    }
    let metadata = read_str(r)?;
    let count = read_u64(r)?;
    let mut params = ParamStore::new();
    for _ in 0..count {
        let name = read_str(r)?;
        let mut flag = [0u8; 1];
        read_exact(r, &mut flag)?;
        let rank = read_u32(r)? as usize;
        if rank > 8 {
            return Err(Error::Malformed(format!("tensor {name} has rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(r)? as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len.min(1 << 24));
        for _ in 0..len {
            let mut b = [0u8; 8];
            read_exact(r, &mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        params.add(name, Tensor::from_vec(shape, data)?, flag[0] != 0);
    }
    Ok(Checkpoint { metadata, params })
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u64).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Malformed("checkpoint truncated".into()))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let n = read_u64(r)? as usize;
    if n > 1 << 30 {
        return Err(Error::Malformed("string length out of range".into()));
    }
    let mut b = vec![0u8; n];
    read_exact(r, &mut b)?;
    String::from_utf8(b).map_err(|_| Error::Malformed("invalid UTF-8 in checkpoint".into()))
}
