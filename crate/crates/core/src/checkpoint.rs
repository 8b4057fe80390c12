//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "FTRL" | u32 version | u32 len, metadata JSON
//! u32 tensor count | per tensor: u32 len, name | u32 ndim | u64 dims… | f64 values…
//! u8 storage flag  | [u8 kind | storage payload]
//! 32-byte SHA-256 of everything above
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::continual::{Algorithm, KnowledgeSnapshot, Model, Storage};
use crate::numerics::{Activation, AdamState, Mlp};
use crate::ppo::{PpoAgent, PpoConfig, RolloutMemory};
use crate::sac::{ReplayBuffer, SacAgent, SacConfig};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FTRL";
pub const FORMAT_VERSION: u32 = 1;
const HASH_LEN: usize = 32;

const STORAGE_ROLLOUT: u8 = 1;
const STORAGE_REPLAY: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdamMeta {
    step: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum Counters {
    Ppo {
        config: PpoConfig,
        updates_done: u64,
        total_updates: u64,
    },
    Sac {
        config: SacConfig,
        update_rounds: u64,
    },
}

/// Metadata document stored in front of the tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub algorithm: Algorithm,
    pub captured_at: u64,
    /// Digest of the configuration that produced the snapshot.
    pub config_digest: String,
    pub obs_dim: usize,
    pub act_dim: usize,
    hidden: usize,
    counters: Counters,
    optimizers: Vec<(String, AdamMeta)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub snapshot: KnowledgeSnapshot,
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        v.iter().for_each(|x| self.f64(*x));
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.0.extend_from_slice(b);
    }
    fn tensor(&mut self, name: &str, values: &[f64]) {
        self.bytes(name.as_bytes());
        self.u32(1);
        self.u64(values.len() as u64);
        self.f64s(values);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated payload: need {n} bytes at offset {}", self.pos))
        })?;
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
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("length overflows usize".into()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("length overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }
    fn tensor(&mut self) -> Result<(String, Vec<f64>)> {
        let name = String::from_utf8(self.bytes()?.to_vec()).map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        let ndim = self.u32()? as usize;
        let mut count = 1usize;
        for _ in 0..ndim {
            count = count
                .checked_mul(self.usize()?)
                .ok_or_else(|| Error::Checkpoint("tensor size overflow".into()))?;
        }
        Ok((name, self.f64s(count)?))
    }
}

/// Named flat tensors of a model plus its optimizer metadata.
fn model_tensors(model: &Model) -> (Vec<(String, Vec<f64>)>, Vec<(String, AdamMeta)>) {
    let mut tensors = Vec::new();
    let mut opts = Vec::new();
    let mut net = |name: &str, values: &[f64]| tensors.push((name.to_string(), values.to_vec()));
    let mut adam_list: Vec<(&str, &AdamState)> = Vec::new();
    match model {
        Model::Ppo(a) => {
            net("policy", a.policy.params());
            net("log_std", &a.log_std);
            net("value", a.value.params());
            adam_list.extend([("policy_opt", &a.policy_opt), ("log_std_opt", &a.log_std_opt), ("value_opt", &a.value_opt)]);
        }
        Model::Sac(a) => {
            net("policy", a.policy.params());
            net("q1", a.q1.params());
            net("q2", a.q2.params());
            net("q1_target", a.q1_target.params());
            net("q2_target", a.q2_target.params());
            net("log_alpha", &[a.log_alpha]);
            adam_list.extend([
                ("policy_opt", &a.policy_opt),
                ("q1_opt", &a.q1_opt),
                ("q2_opt", &a.q2_opt),
                ("alpha_opt", &a.alpha_opt),
            ]);
        }
    }
    for (name, s) in adam_list {
        tensors.push((format!("{name}.m"), s.m.clone()));
        tensors.push((format!("{name}.v"), s.v.clone()));
        opts.push((
            name.to_string(),
            AdamMeta {
                step: s.step,
                beta1: s.beta1,
                beta2: s.beta2,
                eps: s.eps,
            },
        ));
    }
    (tensors, opts)
}

fn write_storage(w: &mut Writer, storage: &Storage) {
    match storage {
        Storage::Rollout(m) => {
            w.u8(STORAGE_ROLLOUT);
            for v in [m.capacity(), m.obs_dim(), m.act_dim(), m.len()] {
                w.u64(v as u64);
            }
            w.f64(m.bootstrap_value);
            w.f64s(&m.observations);
            w.f64s(&m.actions);
            w.f64s(&m.rewards);
            m.dones.iter().for_each(|&d| w.u8(d as u8));
            w.f64s(&m.values);
            w.f64s(&m.log_probs);
        }
        Storage::Replay(b) => {
            w.u8(STORAGE_REPLAY);
            for v in [b.capacity(), b.obs_dim(), b.act_dim(), b.cursor(), b.len()] {
                w.u64(v as u64);
            }
            // physical slot order, so the ring resumes exactly where it stopped
            for slot in 0..b.len() {
                let t = b.slot(slot);
                w.f64s(t.observation);
                w.f64s(t.action);
                w.f64(t.reward);
                w.f64s(t.next_observation);
                w.u8(t.done as u8);
            }
        }
    }
}

fn read_bool(r: &mut Reader<'_>) -> Result<bool> {
    match r.u8()? {
        0 => Ok(false),
        1 => Ok(true),
        b => Err(Error::Checkpoint(format!("invalid flag byte {b}"))),
    }
}

fn read_storage(r: &mut Reader<'_>) -> Result<Storage> {
    match r.u8()? {
        STORAGE_ROLLOUT => {
            let (cap, od, ad, len) = (r.usize()?, r.usize()?, r.usize()?, r.usize()?);
            if len > cap {
                return Err(Error::Checkpoint("rollout memory longer than its capacity".into()));
            }
            let mut m = RolloutMemory::new(cap, od, ad);
            m.bootstrap_value = r.f64()?;
            m.observations = r.f64s(len * od)?;
            m.actions = r.f64s(len * ad)?;
            m.rewards = r.f64s(len)?;
            m.dones = (0..len).map(|_| read_bool(r)).collect::<Result<_>>()?;
            m.values = r.f64s(len)?;
            m.log_probs = r.f64s(len)?;
            Ok(Storage::Rollout(m))
        }
        STORAGE_REPLAY => {
            let (cap, od, ad, cursor, len) = (r.usize()?, r.usize()?, r.usize()?, r.usize()?, r.usize()?);
            if cap == 0 || len > cap {
                return Err(Error::Checkpoint("replay buffer longer than its capacity".into()));
            }
            let mut slots = Vec::with_capacity(len);
            for _ in 0..len {
                slots.push((r.f64s(od)?, r.f64s(ad)?, r.f64()?, r.f64s(od)?, read_bool(r)?));
            }
            Ok(Storage::Replay(ReplayBuffer::from_parts(cap, od, ad, cursor, slots)?))
        }
        k => Err(Error::Checkpoint(format!("unknown storage kind {k}"))),
    }
}

pub fn encode(snapshot: &KnowledgeSnapshot, config_digest: &str) -> Vec<u8> {
    let (obs_dim, act_dim) = snapshot.model.dims();
    let (hidden, counters) = match &snapshot.model {
        Model::Ppo(a) => (
            a.policy.sizes()[1],
            Counters::Ppo {
                config: a.config.clone(),
                updates_done: a.updates_done,
                total_updates: a.total_updates,
            },
        ),
        Model::Sac(a) => (
            a.policy.sizes()[1],
            Counters::Sac {
                config: a.config.clone(),
                update_rounds: a.update_rounds,
            },
        ),
    };
    let (tensors, optimizers) = model_tensors(&snapshot.model);
    let meta = CheckpointMeta {
        algorithm: snapshot.model.algorithm(),
        captured_at: snapshot.captured_at,
        config_digest: config_digest.to_string(),
        obs_dim,
        act_dim,
        hidden,
        counters,
        optimizers,
    };
    let mut w = Writer::default();
    w.0.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION);
    w.bytes(&serde_json::to_vec(&meta).expect("metadata serializes"));
    w.u32(tensors.len() as u32);
    for (name, values) in &tensors {
        w.tensor(name, values);
    }
    match &snapshot.storage {
        None => w.u8(0),
        Some(s) => {
            w.u8(1);
            write_storage(&mut w, s);
        }
    }
    let hash = Sha256::digest(&w.0);
    w.0.extend_from_slice(&hash);
    w.0
}

fn take_tensor(map: &mut std::collections::BTreeMap<String, Vec<f64>>, name: &str) -> Result<Vec<f64>> {
    map.remove(name)
        .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name:?}")))
}

fn net(sizes: &[usize], act: Activation, params: &[f64]) -> Result<Mlp> {
    let mut m = Mlp::zeros(sizes, &vec![act; sizes.len() - 2])?;
    m.set_params(params)?;
    Ok(m)
}

fn check_header(bytes: &[u8]) -> Result<()> {
    if bytes.len() < 8 + HASH_LEN {
        return Err(Error::Checkpoint(format!("truncated payload: {} bytes", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes; not a checkpoint".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}; this build reads version {FORMAT_VERSION}. \
             Re-run training with this build to produce a compatible checkpoint."
        )));
    }
    Ok(())
}

/// Reads only the header and metadata of a checkpoint file. The digest over
/// the whole payload is not verified; [`load_checkpoint`] does that.
pub fn read_meta(path: &Path) -> Result<CheckpointMeta> {
    use std::io::Read;
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut head = [0u8; 12];
    file.read_exact(&mut head).map_err(|e| Error::io(path, e))?;
    let mut padded = head.to_vec();
    padded.extend_from_slice(&[0u8; HASH_LEN]);
    check_header(&padded)?;
    let len = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let mut json = vec![0u8; len];
    file.read_exact(&mut json).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&json).map_err(|e| Error::Checkpoint(format!("metadata: {e}")))
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    check_header(bytes)?;
    let (body, hash) = bytes.split_at(bytes.len() - HASH_LEN);
    if Sha256::digest(body).as_slice() != hash {
        return Err(Error::Checkpoint("digest mismatch: the checkpoint is corrupted or truncated".into()));
    }
    let mut r = Reader { buf: body, pos: 8 };
    let meta: CheckpointMeta =
        serde_json::from_slice(r.bytes()?).map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
    let n = r.u32()? as usize;
    let mut tensors = std::collections::BTreeMap::new();
    for _ in 0..n {
        let (name, values) = r.tensor()?;
        tensors.insert(name, values);
    }
    let (o, a, h) = (meta.obs_dim, meta.act_dim, meta.hidden);
    let mut opts = std::collections::BTreeMap::new();
    for (name, am) in &meta.optimizers {
        let m = take_tensor(&mut tensors, &format!("{name}.m"))?;
        let v = take_tensor(&mut tensors, &format!("{name}.v"))?;
        if m.len() != v.len() {
            return Err(Error::Checkpoint(format!("optimizer {name:?} moments differ in length")));
        }
        opts.insert(
            name.clone(),
            AdamState {
                m,
                v,
                step: am.step,
                beta1: am.beta1,
                beta2: am.beta2,
                eps: am.eps,
            },
        );
    }
    let mut opt = |name: &str| {
        opts.remove(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing optimizer {name:?}")))
    };
    let mut get = |name: &str| take_tensor(&mut tensors, name);
    let model = match &meta.counters {
        Counters::Ppo {
            config,
            updates_done,
            total_updates,
        } => {
            let (pol, ls, val) = (get("policy")?, get("log_std")?, get("value")?);
            Model::Ppo(PpoAgent {
                config: config.clone(),
                policy: net(&[o, h, h, a], Activation::Tanh, &pol)?,
                log_std: ls,
                value: net(&[o, h, h, 1], Activation::Tanh, &val)?,
                policy_opt: opt("policy_opt")?,
                log_std_opt: opt("log_std_opt")?,
                value_opt: opt("value_opt")?,
                updates_done: *updates_done,
                total_updates: *total_updates,
            })
        }
        Counters::Sac { config, update_rounds } => {
            let q = [o + a, h, h, 1];
            let (pol, q1, q2, t1, t2, la) = (get("policy")?, get("q1")?, get("q2")?, get("q1_target")?, get("q2_target")?, get("log_alpha")?);
            if la.len() != 1 {
                return Err(Error::Checkpoint("log_alpha must be a scalar".into()));
            }
            Model::Sac(SacAgent {
                config: config.clone(),
                policy: net(&[o, h, h, 2 * a], Activation::Relu, &pol)?,
                q1: net(&q, Activation::Relu, &q1)?,
                q2: net(&q, Activation::Relu, &q2)?,
                q1_target: net(&q, Activation::Relu, &t1)?,
                q2_target: net(&q, Activation::Relu, &t2)?,
                log_alpha: la[0],
                policy_opt: opt("policy_opt")?,
                q1_opt: opt("q1_opt")?,
                q2_opt: opt("q2_opt")?,
                alpha_opt: opt("alpha_opt")?,
                update_rounds: *update_rounds,
            })
        }
    };
    if model.algorithm() != meta.algorithm {
        return Err(Error::Checkpoint("metadata algorithm tag disagrees with its counters".into()));
    }
    let storage = if read_bool(&mut r)? { Some(read_storage(&mut r)?) } else { None };
    if r.pos != body.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes after storage", body.len() - r.pos)));
    }
    let snapshot = KnowledgeSnapshot::new(model, storage, meta.captured_at)?;
    Ok(Checkpoint { meta, snapshot })
}

pub fn save_checkpoint(path: &Path, snapshot: &KnowledgeSnapshot, config_digest: &str) -> Result<()> {
    std::fs::write(path, encode(snapshot, config_digest)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continual::{run_phase1, snapshot, AlgorithmConfig, PhasePlan};
    use crate::envs::{EnvConfig, FaultSpec};

    fn snap(alg: AlgorithmConfig) -> KnowledgeSnapshot {
        let plan = PhasePlan {
            train_steps: 150,
            train_eval_every: 150,
            fault: FaultSpec::frozen_shoulder(),
            adapt_steps: 50,
            adapt_eval_every: 50,
        };
        let p1 = run_phase1(&alg, &EnvConfig::reach_arm(), &plan, 1, 3).unwrap();
        snapshot(&p1.learner, 150)
    }

    fn ppo() -> KnowledgeSnapshot {
        snap(AlgorithmConfig::Ppo(PpoConfig {
            n_steps: 64,
            minibatch_size: 16,
            epochs: 1,
            ..PpoConfig::reach()
        }))
    }

    fn sac() -> KnowledgeSnapshot {
        snap(AlgorithmConfig::Sac(SacConfig {
            buffer_size: 100,
            batch_size: 8,
            min_fill: 40,
            ..SacConfig::reach()
        }))
    }

    #[test]
    fn ppo_round_trip_is_bit_identical() {
        let s = ppo();
        let bytes = encode(&s, "abc");
        let back = decode(&bytes).unwrap();
        assert_eq!(back.snapshot, s);
        assert_eq!(back.meta.config_digest, "abc");
        assert_eq!(encode(&back.snapshot, "abc"), bytes);
    }

    #[test]
    fn sac_round_trip_preserves_ring_order() {
        let s = sac();
        let Some(Storage::Replay(b)) = &s.storage else { panic!() };
        // 150 transitions in a 100-slot ring: cursor sits mid-buffer
        assert_eq!((b.len(), b.cursor()), (100, 50));
        let back = decode(&encode(&s, "d")).unwrap().snapshot;
        assert_eq!(back, s);
    }

    #[test]
    fn absent_storage_loads_as_discarded() {
        let mut s = ppo();
        s.storage = None;
        assert_eq!(decode(&encode(&s, "x")).unwrap().snapshot.storage, None);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = encode(&ppo(), "x");
        let mut bad = bytes.clone();
        let mid = bytes.len() / 2;
        bad[mid] ^= 0x01;
        assert!(decode(&bad).unwrap_err().to_string().contains("digest mismatch"));
        assert!(decode(&bytes[..bytes.len() - 10]).is_err());
        assert!(decode(&bytes[..5]).unwrap_err().to_string().contains("truncated"));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(decode(&magic).unwrap_err().to_string().contains("magic"));
        let mut version = bytes;
        version[4] = 9;
        assert!(decode(&version).unwrap_err().to_string().contains("version 9"));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ftrl");
        let s = sac();
        save_checkpoint(&path, &s, "d").unwrap();
        assert_eq!(load_checkpoint(&path).unwrap().snapshot, s);
        let meta = read_meta(&path).unwrap();
        assert_eq!((meta.algorithm, meta.captured_at, meta.config_digest.as_str()), (Algorithm::Sac, 150, "d"));
    }
}
