// SPDX-License-Identifier: MIT OR Apache-2.0

//! Byte-level BPE in the GPT-2 convention.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use unicode_general_category::{get_general_category, GeneralCategory as Gc};

use crate::error::{Error, Result};

/// The reversible byte → printable-char table used by GPT-2 vocabularies.
pub fn bytes_to_unicode() -> [char; 256] {
    let mut table = ['\0'; 256];
    let mut extra = 0u32;
    for b in 0..256u32 {
        let printable = (0x21..=0x7e).contains(&b) || (0xa1..=0xac).contains(&b) || (0xae..=0xff).contains(&b);
        let cp = if printable {
            b
        } else {
            extra += 1;
            255 + extra
        };
        table[b as usize] = char::from_u32(cp).unwrap_or('\u{fffd}');
    }
    table
}

#[derive(Debug, Clone)]
pub struct Tokenizer {
    byte_encoder: [char; 256],
    byte_decoder: BTreeMap<char, u8>,
    vocab: BTreeMap<String, u32>,
    id_to_token: BTreeMap<u32, String>,
    ranks: BTreeMap<(String, String), usize>,
}

impl Tokenizer {
    /// `merges` are in rank order, lowest rank merged first.
    pub fn new(vocab: BTreeMap<String, u32>, merges: Vec<(String, String)>) -> Result<Self> {
        let byte_encoder = bytes_to_unicode();
        let mut byte_decoder = BTreeMap::new();
        for (b, c) in byte_encoder.iter().enumerate() {
            byte_decoder.insert(*c, b as u8);
            let mut buf = [0u8; 4];
            let s: &str = c.encode_utf8(&mut buf);
            if !vocab.contains_key(s) {
                return Err(Error::Tokenizer(format!("byte symbol {s:?} missing from vocabulary")));
            }
        }
        let mut id_to_token = BTreeMap::new();
        for (tok, id) in &vocab {
            if id_to_token.insert(*id, tok.clone()).is_some() {
                return Err(Error::Tokenizer(format!("duplicate id {id}")));
            }
        }
        let mut ranks = BTreeMap::new();
        for (rank, (l, r)) in merges.into_iter().enumerate() {
            for part in [&l, &r] {
                if !vocab.contains_key(part.as_str()) {
                    return Err(Error::Tokenizer(format!("merge part {part:?} not in vocabulary")));
                }
            }
            let joined = format!("{l}{r}");
            if !vocab.contains_key(&joined) {
                return Err(Error::Tokenizer(format!("merge result {joined:?} not in vocabulary")));
            }
            ranks.entry((l, r)).or_insert(rank);
        }
        Ok(Self { byte_encoder, byte_decoder, vocab, id_to_token, ranks })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.vocab.get(token).copied()
    }

    pub fn token_str(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(&id).map(String::as_str)
    }

    /// Largest id plus one.
    pub fn id_bound(&self) -> u32 {
        self.id_to_token.keys().next_back().map_or(0, |m| m + 1)
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        for piece in pretokenize(text) {
            let mapped: String = piece.bytes().map(|b| self.byte_encoder[b as usize]).collect();
            for sym in self.bpe(&mapped) {
                // every symbol is a byte symbol or a merge result, both checked in `new`
                ids.push(self.vocab[&sym]);
            }
        }
        ids
    }

    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut bytes = Vec::new();
        for id in ids {
            let tok = self
                .id_to_token
                .get(id)
                .ok_or_else(|| Error::Tokenizer(format!("unknown id {id}")))?;
            for c in tok.chars() {
                let b = self
                    .byte_decoder
                    .get(&c)
                    .ok_or_else(|| Error::Tokenizer(format!("token {tok:?} is not byte-level")))?;
                bytes.push(*b);
            }
        }
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }

    fn bpe(&self, word: &str) -> Vec<String> {
        let mut syms: Vec<String> = word.chars().map(String::from).collect();
        while syms.len() > 1 {
            let best = syms
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())).map(|r| (*r, w)))
                .min_by_key(|(r, _)| *r);
            let Some((_, pair)) = best else { break };
            let (l, r) = (pair[0].clone(), pair[1].clone());
            let mut next = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == l && syms[i + 1] == r {
                    next.push(format!("{l}{r}"));
                    i += 2;
                } else {
                    next.push(core::mem::take(&mut syms[i]));
                    i += 1;
                }
            }
            syms = next;
        }
        syms
    }
}

fn is_letter(c: char) -> bool {
    matches!(
        get_general_category(c),
        Gc::UppercaseLetter | Gc::LowercaseLetter | Gc::TitlecaseLetter | Gc::ModifierLetter | Gc::OtherLetter
    )
}

fn is_number(c: char) -> bool {
    matches!(get_general_category(c), Gc::DecimalNumber | Gc::LetterNumber | Gc::OtherNumber)
}

fn is_other(c: char) -> bool {
    !c.is_whitespace() && !is_letter(c) && !is_number(c)
}

/// Splits text the way the GPT-2 pattern
/// `'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+`
/// does, without a regex engine.
pub fn pretokenize(text: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let at = |i: usize| if i < n { chars[i].0 } else { text.len() };
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let c = chars[i].1;
        let end = if let Some(len) = contraction(&chars[i..]) {
            i + len
        } else if !c.is_whitespace() || (c == ' ' && i + 1 < n && !chars[i + 1].1.is_whitespace()) {
            let start = if c == ' ' { i + 1 } else { i };
            let first = chars[start].1;
            let class: fn(char) -> bool = if is_letter(first) {
                is_letter
            } else if is_number(first) {
                is_number
            } else {
                is_other
            };
            let mut j = start + 1;
            while j < n && class(chars[j].1) {
                j += 1;
            }
            j
        } else {
            let mut j = i;
            while j < n && chars[j].1.is_whitespace() {
                j += 1;
            }
            if j < n && j - i >= 2 {
                j - 1
            } else {
                j
            }
        };
        out.push(&text[at(i)..at(end)]);
        i = end;
    }
    out
}

fn contraction(rest: &[(usize, char)]) -> Option<usize> {
    if rest.first()?.1 != '\'' {
        return None;
    }
    let a = rest.get(1).map(|p| p.1);
    let b = rest.get(2).map(|p| p.1);
    match (a, b) {
        (Some('r'), Some('e')) | (Some('v'), Some('e')) | (Some('l'), Some('l')) => Some(3),
        (Some('s' | 't' | 'm' | 'd'), _) => Some(2),
        _ => None,
    }
}
