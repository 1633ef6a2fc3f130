//! Named weight tensors and the portable `L3CW` weight file.
//!
//! File layout, all integers little-endian:
//!
//! ```text
//! "L3CW"  version:u8
//! scales:u32 channels:u32 hidden:u32 components:u32 max_disparity:u32
//! entries:u32
//! per entry: name_len:u16 name:utf8 rank:u8 extents:u32[rank] values:f32[prod]
//! fnv1a64 of every preceding byte: u64
//! ```
//!
//! Entries are written in name order. The trailing digest doubles as the
//! identity of the weights; containers record it and refuse to decode with
//! any other store.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{param_specs, ModelConfig};
use crate::tensor::Tensor;

pub const WEIGHT_MAGIC: &[u8; 4] = b"L3CW";
pub const WEIGHT_VERSION: u8 = 1;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Immutable set of named tensors matching a [`ModelConfig`].
#[derive(Clone, Debug, PartialEq)]
pub struct WeightStore {
    config: ModelConfig,
    tensors: BTreeMap<String, Tensor>,
    digest: u64,
}

impl WeightStore {
    /// Validates `tensors` against the parameter list of `config`.
    pub fn new(config: ModelConfig, tensors: BTreeMap<String, Tensor>) -> Result<Self> {
        config.validate()?;
        let specs = param_specs(&config);
        if specs.len() != tensors.len() {
            let unexpected: Vec<_> = tensors
                .keys()
                .filter(|k| !specs.iter().any(|(n, _)| n == *k))
                .cloned()
                .collect();
            return Err(Error::shape(format!(
                "weight store has {} tensors, config needs {} (unexpected: {:?})",
                tensors.len(),
                specs.len(),
                unexpected
            )));
        }
        for (name, shape) in &specs {
            let t = tensors
                .get(name)
                .ok_or_else(|| Error::shape(format!("missing weight tensor {name}")))?;
            if t.shape() != shape.as_slice() {
                return Err(Error::shape(format!(
                    "{name}: shape {:?}, config expects {:?}",
                    t.shape(),
                    shape
                )));
            }
        }
        let mut store = WeightStore {
            config,
            tensors,
            digest: 0,
        };
        let bytes = store.body_bytes();
        store.digest = fnv1a64(&bytes);
        Ok(store)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn digest(&self) -> u64 {
        self.digest
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::shape(format!("missing weight tensor {name}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Returns a new store with `name` replaced.
    pub fn with_tensor(&self, name: &str, tensor: Tensor) -> Result<Self> {
        let mut tensors = self.tensors.clone();
        if !tensors.contains_key(name) {
            return Err(Error::shape(format!("unknown weight tensor {name}")));
        }
        tensors.insert(name.to_string(), tensor);
        WeightStore::new(self.config.clone(), tensors)
    }

    /// Returns a new store with every tensor whose name satisfies `select`
    /// passed through `f`.
    pub fn map_tensors(
        &self,
        select: impl Fn(&str) -> bool,
        f: impl Fn(&Tensor) -> Tensor,
    ) -> Result<Self> {
        let tensors = self
            .tensors
            .iter()
            .map(|(k, v)| (k.clone(), if select(k) { f(v) } else { v.clone() }))
            .collect();
        WeightStore::new(self.config.clone(), tensors)
    }

    fn body_bytes(&self) -> Vec<u8> {
        let payload: usize = self.tensors.values().map(|t| t.len() * 4 + 64).sum();
        let mut out = Vec::with_capacity(64 + payload);
        out.extend_from_slice(WEIGHT_MAGIC);
        out.push(WEIGHT_VERSION);
        let c = &self.config;
        for v in [c.scales, c.channels, c.hidden, c.components, c.max_disparity] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.rank() as u8);
            for &e in t.shape() {
                out.extend_from_slice(&(e as u32).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Serialized weight file including the trailing digest.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.body_bytes();
        out.extend_from_slice(&self.digest.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < WEIGHT_MAGIC.len() || &bytes[..4] != WEIGHT_MAGIC {
            return Err(Error::Format("not an L3CW weight file".into()));
        }
        if bytes.len() < 5 {
            return Err(Error::Truncated("weight file header".into()));
        }
        if bytes[4] != WEIGHT_VERSION {
            return Err(Error::UnknownVersion {
                what: "weight file",
                found: bytes[4],
            });
        }
        if bytes.len() < 5 + 8 {
            return Err(Error::Truncated("weight file shorter than header".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().unwrap());

        let mut rd = ByteReader::new(&body[5..]);
        let mut dims = [0usize; 5];
        for d in dims.iter_mut() {
            *d = rd.u32("config block")? as usize;
        }
        let count = rd.u32("entry count")? as usize;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let len = rd.u16("entry name length")? as usize;
            let name = std::str::from_utf8(rd.take(len, "entry name")?)
                .map_err(|_| Error::Format("weight name is not UTF-8".into()))?
                .to_string();
            let rank = rd.u8("entry rank")? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(rd.u32("entry extents")? as usize);
            }
            let n: usize = shape.iter().product();
            let raw = rd.take(n.checked_mul(4).ok_or_else(|| Error::Format("tensor too large".into()))?, "entry values")?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.insert(name, Tensor::new(shape, data)?);
        }
        if rd.remaining() != 0 {
            return Err(Error::Format(format!(
                "{} trailing bytes after weight entries",
                rd.remaining()
            )));
        }
        let computed = fnv1a64(body);
        if computed != stored {
            return Err(Error::DigestMismatch {
                expected: stored,
                found: computed,
            });
        }
        let config = ModelConfig {
            scales: dims[0],
            channels: dims[1],
            hidden: dims[2],
            components: dims[3],
            max_disparity: dims[4],
            ..ModelConfig::default()
        };
        WeightStore::new(config, tensors)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

/// Seeded initialization, uniform in `±1/sqrt(fan_in)` for weights and the
/// biases that follow them. Tensors are drawn in name order.
pub fn init_weights(config: &ModelConfig, seed: u64) -> Result<WeightStore> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: BTreeMap<String, Vec<usize>> = param_specs(config).into_iter().collect();
    let mut tensors = BTreeMap::new();
    for (name, shape) in &specs {
        let fan_in = if let Some(stem) = name.strip_suffix(".b") {
            let w = &specs[&format!("{stem}.w")];
            w[1..].iter().product::<usize>()
        } else {
            shape[1..].iter().product::<usize>()
        };
        let bound = 1.0 / (fan_in.max(1) as f32).sqrt();
        let len: usize = shape.iter().product();
        let data = (0..len).map(|_| rng.gen_range(-bound..bound)).collect();
        tensors.insert(name.clone(), Tensor::new(shape.clone(), data)?);
    }
    WeightStore::new(config.clone(), tensors)
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Truncated(format!("weight file ends inside {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelConfig {
        ModelConfig {
            scales: 2,
            channels: 2,
            hidden: 3,
            components: 2,
            max_disparity: 4,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let a = init_weights(&small(), 11).unwrap();
        let b = init_weights(&small(), 11).unwrap();
        let c = init_weights(&small(), 12).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a, b);
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn bytes_roundtrip_exactly() {
        let a = init_weights(&small(), 3).unwrap();
        let bytes = a.to_bytes();
        let b = WeightStore::from_bytes(&bytes).unwrap();
        assert_eq!(a, b);
        for ((_, x), (_, y)) in a.iter().zip(b.iter()) {
            let xb: Vec<u32> = x.data().iter().map(|v| v.to_bits()).collect();
            let yb: Vec<u32> = y.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
        }
        assert_eq!(b.to_bytes(), bytes);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.l3cw");
        let a = init_weights(&small(), 4).unwrap();
        a.save(&path).unwrap();
        assert_eq!(WeightStore::load(&path).unwrap(), a);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = init_weights(&small(), 5).unwrap().to_bytes();
        for cut in [3, 10, 40, bytes.len() / 2, bytes.len() - 9] {
            assert!(WeightStore::from_bytes(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        let i = bytes.len() - 20;
        flipped[i] ^= 0x40;
        assert!(matches!(
            WeightStore::from_bytes(&flipped),
            Err(Error::DigestMismatch { .. })
        ));
        assert_ne!(fnv1a64(&flipped[..bytes.len() - 8]), fnv1a64(&bytes[..bytes.len() - 8]));

        let mut version = bytes.clone();
        version[4] = 9;
        assert!(matches!(
            WeightStore::from_bytes(&version),
            Err(Error::UnknownVersion { found: 9, .. })
        ));
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(matches!(WeightStore::from_bytes(&magic), Err(Error::Format(_))));
    }

    #[test]
    fn shape_mismatch_is_refused() {
        let a = init_weights(&small(), 6).unwrap();
        assert!(a.with_tensor("fuse1.w", Tensor::zeros(&[1, 1, 1, 1])).is_err());
        assert!(a.with_tensor("nope.w", Tensor::zeros(&[1])).is_err());
    }
}
