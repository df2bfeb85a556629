//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! magic   "FMTLCKPT"
//! version u32
//! digest  [u8; 32]        model config digest
//! count   u32
//! count x { kind u8, owner str, name str, group str, rank u32, dims u64 x rank }
//! values  f64 x (sum of tensor sizes), in manifest order
//! ```
//!
//! `str` is a u32 byte length followed by UTF-8. `kind` is 0 shared, 1 task,
//! 2 global personalized, 3 client personalized; `owner` is the task name or
//! client id (empty otherwise).

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{LayerGroup, ModelConfig, Task};
use crate::params::ParameterStore;
use crate::tensor::Tensor;

use super::state::GlobalState;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"FMTLCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

const KIND_SHARED: u8 = 0;
const KIND_TASK: u8 = 1;
const KIND_PERSONALIZED: u8 = 2;
const KIND_CLIENT: u8 = 3;

struct Entry<'a> {
    kind: u8,
    owner: String,
    name: &'a str,
    group: LayerGroup,
    tensor: &'a Tensor,
}

fn entries(state: &GlobalState) -> Vec<Entry<'_>> {
    let mut out = Vec::new();
    for name in state.order() {
        let p = state.global_param(name).expect("state covers its order");
        let (kind, owner) = match p.group {
            LayerGroup::PreTrained | LayerGroup::Common => (KIND_SHARED, String::new()),
            LayerGroup::TaskSpecific(t) => (KIND_TASK, t.to_string()),
            LayerGroup::Personalized => (KIND_PERSONALIZED, String::new()),
        };
        out.push(Entry { kind, owner, name, group: p.group, tensor: &p.tensor });
    }
    for (client, store) in &state.per_client {
        for (name, p) in store.iter() {
            out.push(Entry {
                kind: KIND_CLIENT,
                owner: client.clone(),
                name,
                group: p.group,
                tensor: &p.tensor,
            });
        }
    }
    out
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

/// Serializes `state` tagged with a model config digest.
pub fn write_checkpoint(state: &GlobalState, digest: &[u8; 32]) -> Vec<u8> {
    let entries = entries(state);
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(digest);
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for e in &entries {
        buf.push(e.kind);
        put_str(&mut buf, &e.owner);
        put_str(&mut buf, e.name);
        put_str(&mut buf, &e.group.to_string());
        let shape = e.tensor.shape();
        buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
    }
    for e in &entries {
        for v in e.tensor.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn save_checkpoint(state: &GlobalState, config: &ModelConfig, path: &Path) -> Result<()> {
    std::fs::write(path, write_checkpoint(state, &config.digest()))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, config: &ModelConfig) -> Result<GlobalState> {
    let bytes = std::fs::read(path)?;
    read_checkpoint(&bytes, &config.digest())
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint("invalid UTF-8 in manifest".into()))
    }
}

/// Parses a checkpoint, refusing it unless its digest equals `digest`.
pub fn read_checkpoint(bytes: &[u8], digest: &[u8; 32]) -> Result<GlobalState> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let found = r.take(32)?;
    if found != digest {
        return Err(Error::Checkpoint(format!(
            "model config digest mismatch: checkpoint {}, config {}",
            hex::encode(found),
            hex::encode(digest)
        )));
    }
    let count = r.u32()? as usize;
    let mut manifest = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let kind = r.u8()?;
        let owner = r.string()?;
        let name = r.string()?;
        let group: LayerGroup = r.string()?.parse()?;
        let rank = r.u32()? as usize;
        let shape = (0..rank)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        manifest.push((kind, owner, name, group, shape));
    }
    let mut order = Vec::new();
    let mut shared = ParameterStore::new();
    let mut per_task: BTreeMap<Task, ParameterStore> = BTreeMap::new();
    let mut personalized = ParameterStore::new();
    let mut per_client: BTreeMap<String, ParameterStore> = BTreeMap::new();
    for (kind, owner, name, group, shape) in manifest {
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let n = n.ok_or_else(|| Error::Checkpoint(format!("tensor {name} is too large")))?;
        let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let tensor = Tensor::new(shape, data).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
        let expected_kind = match group {
            LayerGroup::PreTrained | LayerGroup::Common => KIND_SHARED,
            LayerGroup::TaskSpecific(_) => KIND_TASK,
            LayerGroup::Personalized if kind == KIND_CLIENT => KIND_CLIENT,
            LayerGroup::Personalized => KIND_PERSONALIZED,
        };
        if kind != expected_kind {
            return Err(Error::Checkpoint(format!("tensor {name} has kind {kind} inconsistent with group {group}")));
        }
        match kind {
            KIND_CLIENT => {
                per_client.entry(owner).or_default().insert(name, group, tensor);
                continue;
            }
            KIND_TASK => {
                let t: Task = owner.parse()?;
                if group != LayerGroup::TaskSpecific(t) {
                    return Err(Error::Checkpoint(format!("tensor {name} filed under wrong task")));
                }
                per_task.entry(t).or_default().insert(name.clone(), group, tensor);
            }
            KIND_SHARED => shared.insert(name.clone(), group, tensor),
            _ => personalized.insert(name.clone(), group, tensor),
        }
        order.push(name);
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    GlobalState::from_parts(order, shared, per_task, personalized, per_client)
}
