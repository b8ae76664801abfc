//! Tweet text normalization.
//!
//! Tweet-aware tokenization, then URLs become `HTTPURL`, mentions become
//! `@USER`, emoji become `:alias:` tokens, and every remaining non-ASCII
//! character is dropped. Case is preserved. Every output token re-tokenizes
//! to itself, so normalizing the space-joined output is a fixed point.

mod emoji;

use serde::{Deserialize, Serialize};

pub use emoji::EmojiTable;

pub const URL_PLACEHOLDER: &str = "HTTPURL";
pub const USER_PLACEHOLDER: &str = "@USER";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessedText {
    pub tokens: Vec<String>,
    pub keyword_mask: Vec<bool>,
}

impl PreprocessedText {
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let keyword_mask = tokens.iter().map(|t| is_keyword(t)).collect();
        PreprocessedText { tokens, keyword_mask }
    }

    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn keyword_count(&self) -> usize {
        self.keyword_mask.iter().filter(|&&k| k).count()
    }

    /// Positions of tokens that may be substituted.
    pub fn non_keyword_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.keyword_mask.iter().enumerate().filter(|(_, &k)| !k).map(|(i, _)| i)
    }

    /// Join key shared with the embedding exporter.
    pub fn text_key(&self) -> u64 {
        crate::hash::text_key(&self.tokens)
    }
}

/// `:name:` where name is `[a-z0-9_]+` with at least one letter.
pub(crate) fn is_alias(token: &str) -> bool {
    let Some(name) = token.strip_prefix(':').and_then(|t| t.strip_suffix(':')) else {
        return false;
    };
    !name.is_empty()
        && name.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
        && name.bytes().any(|b| b.is_ascii_lowercase())
}

pub fn is_keyword(token: &str) -> bool {
    token == URL_PLACEHOLDER || token == USER_PLACEHOLDER || is_alias(token)
}

pub fn normalize_tweet(text: &str) -> PreprocessedText {
    normalize_with(EmojiTable::builtin(), text)
}

pub fn normalize_with(table: &EmojiTable, text: &str) -> PreprocessedText {
    let mut tokens = Vec::new();
    for raw in tokenize(table, text) {
        match raw {
            RawToken::Url => tokens.push(URL_PLACEHOLDER.to_owned()),
            RawToken::Mention => tokens.push(USER_PLACEHOLDER.to_owned()),
            RawToken::Emoji(alias) => tokens.push(alias),
            RawToken::Text(s) => {
                if s.is_ascii() {
                    tokens.push(s);
                } else {
                    // Stripping can merge or expose pieces; re-split the ASCII
                    // remainder so each token stays a fixed point.
                    let ascii: String = s.chars().filter(char::is_ascii).collect();
                    if !ascii.is_empty() {
                        tokens.extend(normalize_with(table, &ascii).tokens);
                    }
                }
            }
        }
    }
    PreprocessedText::from_tokens(tokens)
}

#[derive(Debug, PartialEq)]
enum RawToken {
    Url,
    Mention,
    Emoji(String),
    /// Words, hashtags, literal aliases and punctuation runs.
    Text(String),
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_handle_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn starts_url(chars: &[char]) -> bool {
    let prefix: String = chars.iter().take(8).collect::<String>().to_ascii_lowercase();
    prefix.starts_with("http://") || prefix.starts_with("https://") || prefix.starts_with("www.")
}

/// Length of a literal `:alias:` at the start of `chars`, if any.
fn alias_len(chars: &[char]) -> Option<usize> {
    if chars.first() != Some(&':') {
        return None;
    }
    let end = chars[1..].iter().position(|&c| c == ':')? + 2;
    let candidate: String = chars[..end].iter().collect();
    is_alias(&candidate).then_some(end)
}

fn tokenize(table: &EmojiTable, text: &str) -> Vec<RawToken> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let cs: Vec<char> = chunk.chars().collect();
        let mut i = 0;
        while i < cs.len() {
            let rest = &cs[i..];
            let c = rest[0];
            if starts_url(rest) {
                out.push(RawToken::Url);
                break;
            }
            if let Some((alias, n)) = table.longest_match(rest) {
                out.push(RawToken::Emoji(alias.to_owned()));
                i += n;
                continue;
            }
            if let Some(n) = alias_len(rest) {
                out.push(RawToken::Text(rest[..n].iter().collect()));
                i += n;
                continue;
            }
            if c == '@' {
                let n = rest[1..].iter().take_while(|&&c| is_handle_char(c)).count();
                if n > 0 {
                    out.push(RawToken::Mention);
                }
                // A bare '@' is dropped.
                i += n + 1;
                continue;
            }
            let word_start = if c == '#' && rest.get(1).is_some_and(|&c| is_word_char(c)) {
                1
            } else if is_word_char(c) {
                0
            } else {
                let n = rest.iter().take_while(|&&x| x == c).count();
                out.push(RawToken::Text(rest[..n].iter().collect()));
                i += n;
                continue;
            };
            let mut j = word_start;
            while j < rest.len() {
                if is_word_char(rest[j]) {
                    j += 1;
                } else if matches!(rest[j], '\'' | '-') && rest.get(j + 1).is_some_and(|&c| is_word_char(c)) {
                    j += 2;
                } else {
                    break;
                }
            }
            out.push(RawToken::Text(rest[..j].iter().collect()));
            i += j;
        }
    }
    out
}
