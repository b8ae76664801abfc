//! Masked-LM substitution candidates keyed by `(text key, token index)`.
//!
//! `CND1` layout (little-endian): magic `CND1`, `u64` record count, then per
//! record a `u64` text key, `u16` token index, `u8` candidate count `k`, and
//! `k` tokens each written as a `u16` byte length followed by UTF-8 bytes.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CND1";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateTable {
    records: Vec<((u64, u16), Vec<String>)>,
    index: HashMap<(u64, u16), usize>,
}

fn check_token(tok: &str) -> Result<()> {
    if tok.is_empty() || tok.chars().any(char::is_whitespace) {
        return Err(Error::Invalid(format!("candidate {tok:?} is not a single token")));
    }
    if tok.len() > usize::from(u16::MAX) {
        return Err(Error::Invalid("candidate token longer than 65535 bytes".into()));
    }
    Ok(())
}

impl CandidateTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Insert the ranked substitutes for one position, replacing any previous
    /// list.
    pub fn insert(&mut self, text_key: u64, token_index: u16, ranked: Vec<String>) -> Result<()> {
        if ranked.is_empty() || ranked.len() > usize::from(u8::MAX) {
            return Err(Error::Invalid(format!(
                "candidate list for ({text_key:#018x}, {token_index}) must hold 1..=255 tokens"
            )));
        }
        for t in &ranked {
            check_token(t)?;
        }
        let key = (text_key, token_index);
        match self.index.get(&key) {
            Some(&i) => self.records[i].1 = ranked,
            None => {
                self.index.insert(key, self.records.len());
                self.records.push((key, ranked));
            }
        }
        Ok(())
    }

    pub fn get(&self, text_key: u64, token_index: usize) -> Option<&[String]> {
        let idx = u16::try_from(token_index).ok()?;
        self.index.get(&(text_key, idx)).map(|&i| self.records[i].1.as_slice())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for ((key, idx), toks) in &self.records {
            out.extend_from_slice(&key.to_le_bytes());
            out.extend_from_slice(&idx.to_le_bytes());
            out.push(toks.len() as u8);
            for t in toks {
                out.extend_from_slice(&(t.len() as u16).to_le_bytes());
                out.extend_from_slice(t.as_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let end = pos
                .checked_add(n)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| Error::parse(format!("CND1 offset {pos}"), "truncated"))?;
            let s = &bytes[pos..end];
            pos = end;
            Ok(s)
        };
        if take(4)? != MAGIC {
            return Err(Error::parse("CND1", "bad magic"));
        }
        let count = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let mut table = CandidateTable::new();
        for _ in 0..count {
            let key = u64::from_le_bytes(take(8)?.try_into().unwrap());
            let idx = u16::from_le_bytes(take(2)?.try_into().unwrap());
            let k = take(1)?[0] as usize;
            let mut toks = Vec::with_capacity(k);
            for _ in 0..k {
                let len = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
                let s = std::str::from_utf8(take(len)?).map_err(|e| Error::parse("CND1 token", e))?;
                toks.push(s.to_owned());
            }
            if table.index.contains_key(&(key, idx)) {
                return Err(Error::parse("CND1", format!("duplicate record ({key:#018x}, {idx})")));
            }
            table.insert(key, idx, toks).map_err(|e| Error::parse("CND1", e))?;
        }
        if pos != bytes.len() {
            return Err(Error::parse("CND1", "trailing bytes"));
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
