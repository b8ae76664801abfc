//! Text embeddings: a file-backed table produced by the exporter, or a
//! deterministic hashing fallback.
//!
//! `EMB1` layout (little-endian): magic `EMB1`, `u32` dim, `u64` count, then
//! `count` records of `u64` text key followed by `dim` f32 values.

use std::collections::HashMap;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hash;
use crate::preprocess::PreprocessedText;

const MAGIC: &[u8; 4] = b"EMB1";
const TOKEN_SALT: u64 = 0x7468_7265_6164_666f;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: Vec<(u64, Vec<f32>)>,
    index: HashMap<u64, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Insert or replace the vector for `key`.
    pub fn insert(&mut self, key: u64, v: Vec<f32>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::EmbeddingWidth {
                expected: self.dim,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid(format!("non-finite embedding for key {key:#018x}")));
        }
        match self.index.get(&key) {
            Some(&i) => self.entries[i].1 = v,
            None => {
                self.index.insert(key, self.entries.len());
                self.entries.push((key, v));
            }
        }
        Ok(())
    }

    pub fn get(&self, key: u64) -> Option<&[f32]> {
        self.index.get(&key).map(|&i| self.entries[i].1.as_slice())
    }

    pub fn keys(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|(k, _)| *k)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.entries.len() * (8 + 4 * self.dim));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for (k, v) in &self.entries {
            out.extend_from_slice(&k.to_le_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::parse("EMB1", msg);
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(bad("bad magic or truncated header"));
        }
        let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        if dim == 0 {
            return Err(bad("dim must be positive"));
        }
        let rec = 8 + 4 * dim;
        let body = &bytes[16..];
        if u64::try_from(body.len()).ok() != count.checked_mul(rec as u64) {
            return Err(bad("record count does not match file length"));
        }
        let mut table = EmbeddingTable::new(dim);
        for chunk in body.chunks_exact(rec) {
            let key = u64::from_le_bytes(chunk[..8].try_into().unwrap());
            let v = chunk[8..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            if table.index.contains_key(&key) {
                return Err(bad(&format!("duplicate key {key:#018x}")));
            }
            table.insert(key, v)?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|e| Error::parse(path.display().to_string(), e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    FileBacked,
    HashFallback,
}

#[derive(Debug, Clone)]
pub enum EmbeddingProvider {
    FileBacked {
        table: EmbeddingTable,
        /// Use the hashing embedding for keys missing from the table.
        fallback_on_miss: bool,
    },
    HashFallback {
        dim: usize,
    },
}

impl EmbeddingProvider {
    pub fn hash_fallback(dim: usize) -> Self {
        EmbeddingProvider::HashFallback { dim }
    }

    pub fn file_backed(table: EmbeddingTable) -> Self {
        EmbeddingProvider::FileBacked {
            table,
            fallback_on_miss: false,
        }
    }

    pub fn kind(&self) -> ProviderKind {
        match self {
            EmbeddingProvider::FileBacked { .. } => ProviderKind::FileBacked,
            EmbeddingProvider::HashFallback { .. } => ProviderKind::HashFallback,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            EmbeddingProvider::FileBacked { table, .. } => table.dim(),
            EmbeddingProvider::HashFallback { dim } => *dim,
        }
    }

    pub fn embed(&self, p: &PreprocessedText) -> Result<Vec<f64>> {
        match self {
            EmbeddingProvider::HashFallback { dim } => Ok(hash_embedding(&p.tokens, *dim)),
            EmbeddingProvider::FileBacked {
                table,
                fallback_on_miss,
            } => {
                let key = p.text_key();
                match table.get(key) {
                    Some(v) => Ok(v.iter().map(|&x| f64::from(x)).collect()),
                    None if *fallback_on_miss => Ok(hash_embedding(&p.tokens, table.dim())),
                    None => Err(Error::MissingEmbedding { key, node: None }),
                }
            }
        }
    }
}

/// Unit vector seeded by the token text.
fn token_vector(token: &str, dim: usize) -> Vec<f64> {
    let mut rng = hash::stream(TOKEN_SALT, &[token.as_bytes()]);
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// L2-normalized sum of per-token unit vectors; zero for no tokens.
pub fn hash_embedding<S: AsRef<str>>(tokens: &[S], dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    for t in tokens {
        for (a, x) in acc.iter_mut().zip(token_vector(t.as_ref(), dim)) {
            *a += x;
        }
    }
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        acc.iter_mut().for_each(|x| *x /= norm);
    }
    acc
}
