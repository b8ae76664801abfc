//! `CKPT` parameter files: little-endian, magic `CKPT`, `u32` tensor count,
//! then per tensor a `u32` name length, the UTF-8 name, `u32` rows,
//! `u32` cols and `rows * cols` f64 values.

use super::Tensor2;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CKPT";

pub fn encode_checkpoint<'a>(tensors: impl IntoIterator<Item = (&'a str, &'a Tensor2)>) -> Vec<u8> {
    let tensors: Vec<_> = tensors.into_iter().collect();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::parse(format!("checkpoint offset {}", self.pos), "truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Vec<(String, Tensor2)>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::parse("checkpoint header", "bad magic"));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|e| Error::parse("checkpoint tensor name", e))?
            .to_owned();
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let raw = r.take(rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).unwrap_or(usize::MAX))?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        out.push((name, Tensor2::new(rows, cols, data)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::parse("checkpoint trailer", "trailing bytes"));
    }
    Ok(out)
}
