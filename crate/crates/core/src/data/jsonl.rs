//! Canonical `threads.jsonl`: one thread per line, fields in struct order.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{Dataset, LabelScheme, Thread};
use crate::error::{Error, Result};

impl Dataset {
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for t in self.threads() {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    /// Parse canonical lines. `fallback_scheme` applies only when the input
    /// holds no threads.
    pub fn parse_jsonl<R: BufRead>(input: R, fallback_scheme: LabelScheme, origin: &str) -> Result<Dataset> {
        let mut threads = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::parse(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let loc = || format!("{origin}:{}", lineno + 1);
            let t: Thread = serde_json::from_str(&line).map_err(|e| Error::parse(loc(), e))?;
            t.validate().map_err(|e| Error::parse(loc(), e))?;
            threads.push(t);
        }
        let scheme = threads.first().map_or(fallback_scheme, |t| t.label.scheme());
        let d = Dataset::from_threads(scheme, threads)?;
        Ok(d)
    }

    pub fn load_jsonl(path: &Path) -> Result<Dataset> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Dataset::parse_jsonl(BufReader::new(f), LabelScheme::Binary, &path.display().to_string())
    }
}
