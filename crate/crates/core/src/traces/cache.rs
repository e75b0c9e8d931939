//! Compact little-endian binary cache for prefix trees and pair lists.
//!
//! Layout: magic `RMLC`, format version (u32), payload kind (u8), the key
//! (hash length u32 + bytes, depth u32, eps as f64 bits), then the payload.
//! A tree payload is the compression flag (u8), the node count (u32), all
//! parent ids and all states (u32 each, root included). A pair payload is the
//! pair count (u64) followed by `tau, tau_prime, witness state, witness
//! action` as u32 quadruples.

use std::path::Path;

use super::negatives::NegativePair;
use super::tree::{PrefixTree, DEFAULT_NODE_CAP};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"RMLC";
const VERSION: u32 = 1;
const KIND_TREE: u8 = 1;
const KIND_PAIRS: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct CacheKey {
    pub fixture_hash: String,
    pub depth: usize,
    pub eps: f64,
}

fn put_header(buf: &mut Vec<u8>, kind: u8, key: &CacheKey) {
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(kind);
    buf.extend_from_slice(&(key.fixture_hash.len() as u32).to_le_bytes());
    buf.extend_from_slice(key.fixture_hash.as_bytes());
    buf.extend_from_slice(&(key.depth as u32).to_le_bytes());
    buf.extend_from_slice(&key.eps.to_bits().to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::InvalidModel("truncated cache file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
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
}

/// Reads the header; `Ok(false)` when the key does not match.
fn check_header(r: &mut Reader<'_>, kind: u8, key: &CacheKey) -> Result<bool> {
    if r.take(4)? != MAGIC || r.u32()? != VERSION || r.u8()? != kind {
        return Err(Error::InvalidModel("not a cache file of the expected kind".into()));
    }
    let len = r.u32()? as usize;
    let hash = r.take(len)?;
    let depth = r.u32()? as usize;
    let eps = f64::from_bits(r.u64()?);
    Ok(hash == key.fixture_hash.as_bytes() && depth == key.depth && eps.to_bits() == key.eps.to_bits())
}

fn header_len(key: &CacheKey) -> usize {
    4 + 4 + 1 + 4 + key.fixture_hash.len() + 4 + 8
}

/// Byte size of [`encode_tree`] output for a tree with `nodes` nodes (root
/// included).
pub fn tree_cache_len(key: &CacheKey, nodes: usize) -> u128 {
    header_len(key) as u128 + 5 + 8 * nodes as u128
}

/// Byte size of [`encode_pairs`] output for `pairs` pairs.
pub fn pairs_cache_len(key: &CacheKey, pairs: u128) -> u128 {
    header_len(key) as u128 + 8 + 16 * pairs
}

pub fn encode_tree(key: &CacheKey, tree: &PrefixTree) -> Vec<u8> {
    let (parent, state) = tree.raw_parts();
    let mut buf = Vec::with_capacity(64 + 8 * parent.len());
    put_header(&mut buf, KIND_TREE, key);
    buf.push(u8::from(tree.is_compressed()));
    buf.extend_from_slice(&(parent.len() as u32).to_le_bytes());
    for &p in parent {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    for &s in state {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    buf
}

/// `Ok(None)` when the cache was written for a different key.
pub fn decode_tree(bytes: &[u8], key: &CacheKey) -> Result<Option<PrefixTree>> {
    let mut r = Reader { bytes, pos: 0 };
    if !check_header(&mut r, KIND_TREE, key)? {
        return Ok(None);
    }
    let compressed = r.u8()? != 0;
    let n = r.u32()? as usize;
    let parent = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let state = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    PrefixTree::from_parts(parent, state, compressed, DEFAULT_NODE_CAP.max(n)).map(Some)
}

pub fn encode_pairs(key: &CacheKey, pairs: &[NegativePair]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(64 + 16 * pairs.len());
    put_header(&mut buf, KIND_PAIRS, key);
    buf.extend_from_slice(&(pairs.len() as u64).to_le_bytes());
    for p in pairs {
        for v in [p.tau, p.tau_prime, p.witness.0 as u32, p.witness.1 as u32] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn decode_pairs(bytes: &[u8], key: &CacheKey) -> Result<Option<Vec<NegativePair>>> {
    let mut r = Reader { bytes, pos: 0 };
    if !check_header(&mut r, KIND_PAIRS, key)? {
        return Ok(None);
    }
    let n = r.u64()? as usize;
    let mut out = Vec::with_capacity(n.min(bytes.len() / 16));
    for _ in 0..n {
        let (a, b, s, act) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
        out.push(NegativePair { tau: a, tau_prime: b, witness: (s as usize, act as usize) });
    }
    Ok(Some(out))
}

/// Loads a cached tree from `path` if it exists and matches `key`.
pub fn load_tree(path: &Path, key: &CacheKey) -> Result<Option<PrefixTree>> {
    match std::fs::read(path) {
        Ok(bytes) => decode_tree(&bytes, key),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::fixtures;

    fn key() -> CacheKey {
        CacheKey { fixture_hash: fixtures::line3().hash(), depth: 3, eps: 1e-6 }
    }

    #[test]
    fn tree_round_trip() {
        let fx = fixtures::line3();
        let tree = PrefixTree::enumerate(&fx.mdp, 3, false, DEFAULT_NODE_CAP).unwrap();
        let bytes = encode_tree(&key(), &tree);
        assert_eq!(decode_tree(&bytes, &key()).unwrap().unwrap(), tree);
        assert_eq!(tree_cache_len(&key(), tree.len()), bytes.len() as u128);
        let other = CacheKey { depth: 4, ..key() };
        assert!(decode_tree(&bytes, &other).unwrap().is_none());
        assert!(decode_tree(&bytes[..bytes.len() - 3], &key()).is_err());
    }

    #[test]
    fn pairs_round_trip() {
        let pairs = vec![
            NegativePair { tau: 1, tau_prime: 5, witness: (2, 1) },
            NegativePair { tau: 3, tau_prime: 9, witness: (0, 0) },
        ];
        let bytes = encode_pairs(&key(), &pairs);
        assert_eq!(decode_pairs(&bytes, &key()).unwrap().unwrap(), pairs);
        assert_eq!(pairs_cache_len(&key(), 2), bytes.len() as u128);
        assert!(decode_tree(&bytes, &key()).is_err());
    }
}
