use std::collections::HashMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const BUILTIN: &str = include_str!("../../data/emoji_aliases.tsv");

/// Codepoint-sequence to `:alias:` lookup with longest-match semantics.
#[derive(Debug, Clone)]
pub struct EmojiTable {
    aliases: HashMap<String, String>,
    max_len: usize,
}

impl EmojiTable {
    /// The table shipped with the crate (`data/emoji_aliases.tsv`).
    pub fn builtin() -> &'static EmojiTable {
        static TABLE: OnceLock<EmojiTable> = OnceLock::new();
        TABLE.get_or_init(|| EmojiTable::parse(BUILTIN).expect("bundled emoji table is well-formed"))
    }

    /// Parse `HEX[ HEX...]<TAB>:alias:` lines.
    pub fn parse(text: &str) -> Result<EmojiTable> {
        let mut aliases = HashMap::new();
        let mut max_len = 0;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::parse(format!("emoji table line {}", i + 1), msg);
            let (seq, alias) = line.split_once('\t').ok_or_else(|| bad("missing tab"))?;
            if !super::is_alias(alias) {
                return Err(bad("alias must look like :lowercase_name:"));
            }
            let mut s = String::new();
            for hex in seq.split_whitespace() {
                let cp = u32::from_str_radix(hex, 16).map_err(|_| bad("bad codepoint"))?;
                s.push(char::from_u32(cp).ok_or_else(|| bad("codepoint out of range"))?);
            }
            if s.is_empty() {
                return Err(bad("empty codepoint sequence"));
            }
            max_len = max_len.max(s.chars().count());
            aliases.insert(s, alias.to_owned());
        }
        Ok(EmojiTable { aliases, max_len })
    }

    pub fn len(&self) -> usize {
        self.aliases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aliases.is_empty()
    }

    /// Longest emoji starting at `chars[0]`, as `(alias, length in chars)`.
    pub fn longest_match(&self, chars: &[char]) -> Option<(&str, usize)> {
        let first = *chars.first()?;
        // ASCII only starts an emoji as a keycap base.
        if first.is_ascii() && !matches!(chars.get(1), Some('\u{FE0F}' | '\u{20E3}')) {
            return None;
        }
        let mut key = String::new();
        let mut best = None;
        for (n, &c) in chars.iter().take(self.max_len).enumerate() {
            key.push(c);
            if let Some(a) = self.aliases.get(&key) {
                best = Some((a.as_str(), n + 1));
            }
        }
        best
    }
}
