//! Sidecar metadata files: the `key = value` companion written next to every
//! tensor artifact, carrying the fingerprint needed to interpret it.

use std::collections::BTreeMap;
use std::path::Path;

use super::{parse_kv, write_text_atomic, IoError};

/// Writes metadata pairs in the given order, one `key = value` per line.
pub fn write_meta(path: &Path, pairs: &[(&str, String)]) -> Result<(), IoError> {
    let mut text = String::new();
    for (key, value) in pairs {
        text.push_str(key);
        text.push_str(" = ");
        text.push_str(value);
        text.push('\n');
    }
    write_text_atomic(path, &text)
}

/// Reads a sidecar file into a key → value map; duplicate keys are errors.
pub fn read_meta(path: &Path) -> Result<BTreeMap<String, String>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut map = BTreeMap::new();
    for (key, value, _line) in parse_kv(&text, path)? {
        if map.insert(key.clone(), value).is_some() {
            return Err(IoError::DuplicateKey {
                path: path.to_path_buf(),
                key,
            });
        }
    }
    Ok(map)
}
