// SPDX-License-Identifier: MIT OR Apache-2.0

//! File helpers: atomic writes, JSON, JSONL and tokenizer files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use gapscope_core::Tokenizer;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_string(path)?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(value).expect("serializable value");
    s.push(b'\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &to_json_pretty(value))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = read_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(line).map_err(|source| Error::JsonLine { path: path.to_path_buf(), line: i + 1, source })?;
        out.push(v);
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it).expect("serializable value");
        out.push(b'\n');
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&read_bytes(path)?))
}

/// Reads a `vocab.json` token → id map and a rank-ordered merges file.
pub fn read_tokenizer(vocab: &Path, merges: &Path) -> Result<Tokenizer> {
    let map: BTreeMap<String, u32> = read_json(vocab)?;
    let text = read_string(merges)?;
    let mut rules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with("#version") || line.trim().is_empty() {
            continue;
        }
        let (a, b) = line
            .split_once(' ')
            .ok_or_else(|| Error::Usage(format!("{}:{}: merge line `{line}` is not `left right`", merges.display(), i + 1)))?;
        rules.push((a.to_string(), b.to_string()));
    }
    Ok(Tokenizer::new(map, rules)?)
}

pub fn write_tokenizer(vocab_path: &Path, merges_path: &Path, vocab: &BTreeMap<String, u32>, merges: &[(String, String)]) -> Result<()> {
    write_json(vocab_path, vocab)?;
    let mut text = String::from("#version: 0.2\n");
    for (a, b) in merges {
        text.push_str(a);
        text.push(' ');
        text.push_str(b);
        text.push('\n');
    }
    write_atomic(merges_path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        let items = vec![(1, "a".to_string()), (2, "b\nc".to_string())];
        write_atomic(&p, &to_jsonl(&items)).unwrap();
        assert_eq!(read_jsonl::<(i32, String)>(&p).unwrap(), items);
        std::fs::write(&p, "[1,\"a\"]\n\n{oops\n").unwrap();
        assert!(matches!(read_jsonl::<(i32, String)>(&p), Err(Error::JsonLine { line: 3, .. })));
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"hello").unwrap();
        write_atomic(&p, b"bye").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"bye");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn tokenizer_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (v, m) = (dir.path().join("vocab.json"), dir.path().join("merges.txt"));
        let mut vocab: BTreeMap<String, u32> = gapscope_core::transformer::bytes_to_unicode().iter().enumerate().map(|(i, c)| (c.to_string(), i as u32)).collect();
        vocab.insert("ab".into(), 256);
        let merges = vec![("a".to_string(), "b".to_string())];
        write_tokenizer(&v, &m, &vocab, &merges).unwrap();
        let tok = read_tokenizer(&v, &m).unwrap();
        assert_eq!(tok.encode("ab"), vec![256]);
        std::fs::write(&m, "#version: 0.2\nab\n").unwrap();
        assert!(read_tokenizer(&v, &m).is_err());
    }
}
