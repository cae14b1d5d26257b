//! Run manifests: one `key = value` file naming every tensor a benchmark
//! run needs.
//!
//! Keys:
//!
//! ```text
//! weights      = path              # classifier weight matrix, D×C (required)
//! id_features  = path              # in-distribution eval features, N×D (required)
//! ood_feature  = name:path         # one per OOD set, at least one (required)
//! id_logits    = path              # optional precomputed logits, N×C
//! ood_logits   = name:path         # optional, names must match ood_feature
//! alpha        = 0.9               # (0, 1], default 0.9
//! normalize    = true              # default true
//! ```
//!
//! Relative paths resolve against the manifest's own directory. Dimension
//! consistency across the referenced tensors is checked when they are
//! loaded, not here.

use std::path::{Path, PathBuf};

use super::{parse_kv, IoError};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub weights: PathBuf,
    pub id_features: PathBuf,
    pub ood_features: Vec<(String, PathBuf)>,
    pub id_logits: Option<PathBuf>,
    pub ood_logits: Vec<(String, PathBuf)>,
    pub alpha: f64,
    pub normalize: bool,
}

fn bad_value(path: &Path, key: &str, value: &str, reason: &str) -> IoError {
    IoError::BadValue {
        path: path.to_path_buf(),
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn split_named(path: &Path, key: &str, value: &str) -> Result<(String, String), IoError> {
    match value.split_once(':') {
        Some((name, p)) if !name.trim().is_empty() && !p.trim().is_empty() => {
            Ok((name.trim().to_string(), p.trim().to_string()))
        }
        _ => Err(bad_value(path, key, value, "expected `name:path`")),
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let resolve = |p: &str| base.join(p);

    let mut weights: Option<PathBuf> = None;
    let mut id_features: Option<PathBuf> = None;
    let mut id_logits: Option<PathBuf> = None;
    let mut ood_features: Vec<(String, PathBuf)> = Vec::new();
    let mut ood_logits: Vec<(String, PathBuf)> = Vec::new();
    let mut alpha: Option<f64> = None;
    let mut normalize: Option<bool> = None;

    let set_path = |slot: &mut Option<PathBuf>,
                    key: &str,
                    value: &str|
     -> Result<(), IoError> {
        if slot.is_some() {
            return Err(IoError::DuplicateKey {
                path: path.to_path_buf(),
                key: key.to_string(),
            });
        }
        *slot = Some(base.join(value));
        Ok(())
    };

    for (key, value, _line) in parse_kv(&text, path)? {
        match key.as_str() {
            "weights" => set_path(&mut weights, "weights", &value)?,
            "id_features" => set_path(&mut id_features, "id_features", &value)?,
            "id_logits" => set_path(&mut id_logits, "id_logits", &value)?,
            "ood_feature" => {
                let (name, p) = split_named(path, "ood_feature", &value)?;
                if ood_features.iter().any(|(n, _)| n == &name) {
                    return Err(bad_value(path, "ood_feature", &value, "duplicate set name"));
                }
                ood_features.push((name, resolve(&p)));
            }
            "ood_logits" => {
                let (name, p) = split_named(path, "ood_logits", &value)?;
                if ood_logits.iter().any(|(n, _)| n == &name) {
                    return Err(bad_value(path, "ood_logits", &value, "duplicate set name"));
                }
                ood_logits.push((name, resolve(&p)));
            }
            "alpha" => {
                if alpha.is_some() {
                    return Err(IoError::DuplicateKey {
                        path: path.to_path_buf(),
                        key,
                    });
                }
                let parsed = value
                    .parse::<f64>()
                    .ok()
                    .filter(|a| *a > 0.0 && *a <= 1.0)
                    .ok_or_else(|| bad_value(path, "alpha", &value, "must be a real in (0, 1]"))?;
                alpha = Some(parsed);
            }
            "normalize" => {
                if normalize.is_some() {
                    return Err(IoError::DuplicateKey {
                        path: path.to_path_buf(),
                        key,
                    });
                }
                normalize = Some(match value.as_str() {
                    "true" => true,
                    "false" => false,
                    _ => return Err(bad_value(path, "normalize", &value, "must be true or false")),
                });
            }
            _ => {
                return Err(IoError::UnknownKey {
                    path: path.to_path_buf(),
                    key,
                })
            }
        }
    }

    let missing = |key: &'static str| IoError::MissingKey {
        path: path.to_path_buf(),
        key,
    };
    let manifest = DatasetManifest {
        weights: weights.ok_or_else(|| missing("weights"))?,
        id_features: id_features.ok_or_else(|| missing("id_features"))?,
        id_logits,
        ood_features,
        ood_logits,
        alpha: alpha.unwrap_or(0.9),
        normalize: normalize.unwrap_or(true),
    };
    if manifest.ood_features.is_empty() {
        return Err(missing("ood_feature"));
    }
    for (name, _) in &manifest.ood_logits {
        if !manifest.ood_features.iter().any(|(n, _)| n == name) {
            return Err(bad_value(
                path,
                "ood_logits",
                name,
                "no matching ood_feature set",
            ));
        }
    }
    Ok(manifest)
}
