//! Sidecar metadata next to every tensor the CLI writes: `<file>.meta`
//! carries the fingerprint needed to interpret the tensor later, so
//! downstream commands can refuse artifacts that were produced under
//! different settings instead of silently comparing incomparable scores.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clafr_core::io::{read_matrix, read_meta, write_meta, IoError};
use clafr_core::metrics::Fingerprint;
use clafr_core::subspace::Subspace;
use clafr_core::Vector;

use crate::commands::{input, CliError};

pub fn meta_path(tensor_path: &Path) -> PathBuf {
    let mut name = tensor_path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| "out".into());
    name.push(".meta");
    tensor_path.with_file_name(name)
}

fn parse_value<T: FromStr>(path: &Path, key: &str, raw: &str) -> Result<T, CliError> {
    raw.parse()
        .map_err(|_| input(format!("{}: bad value {raw:?} for {key}", path.display())))
}

fn require<'a>(
    meta: &'a BTreeMap<String, String>,
    path: &Path,
    key: &str,
) -> Result<&'a str, CliError> {
    meta.get(key)
        .map(String::as_str)
        .ok_or_else(|| input(format!("{}: missing key {key}", path.display())))
}

fn check_kind(meta: &BTreeMap<String, String>, path: &Path, want: &str) -> Result<(), CliError> {
    match meta.get("kind") {
        Some(kind) if kind != want => Err(input(format!(
            "{}: this is a {kind} artifact, expected {want}",
            path.display()
        ))),
        _ => Ok(()),
    }
}

pub fn write_subspace_meta(tensor_path: &Path, sub: &Subspace) -> Result<(), IoError> {
    let sigma = sub
        .sigma
        .data()
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",");
    write_meta(
        &meta_path(tensor_path),
        &[
            ("kind", "subspace".to_string()),
            ("alpha", sub.alpha_used.to_string()),
            ("m", sub.m.to_string()),
            ("sigma", sigma),
            ("weights", sub.weight_fingerprint.clone()),
        ],
    )
}

/// Reloads a subspace written by `decompose`: the basis tensor plus its
/// sidecar. The sidecar is not optional — without alpha, sigma, and the
/// weight hash the basis cannot produce comparable fingerprints.
pub fn read_subspace(tensor_path: &Path) -> Result<Subspace, CliError> {
    let u_m = read_matrix(tensor_path)?;
    let mpath = meta_path(tensor_path);
    let meta = read_meta(&mpath)?;
    check_kind(&meta, &mpath, "subspace")?;
    let alpha_used: f64 = parse_value(&mpath, "alpha", require(&meta, &mpath, "alpha")?)?;
    let stored_m: usize = parse_value(&mpath, "m", require(&meta, &mpath, "m")?)?;
    let sigma: Vec<f64> = require(&meta, &mpath, "sigma")?
        .split(',')
        .map(|t| parse_value(&mpath, "sigma", t.trim()))
        .collect::<Result<_, _>>()?;
    let weight_fingerprint = require(&meta, &mpath, "weights")?.to_string();

    let m = u_m.cols();
    if stored_m != m {
        return Err(input(format!(
            "{}: sidecar says m = {stored_m} but the basis has {m} columns",
            mpath.display()
        )));
    }
    if m == 0 || m > sigma.len() {
        return Err(input(format!(
            "{}: m = {m} outside [1, {}]",
            mpath.display(),
            sigma.len()
        )));
    }
    Ok(Subspace {
        u_m,
        m,
        alpha_used,
        sigma: Vector::from_vec(sigma)?,
        weight_fingerprint,
    })
}

pub fn write_scores_meta(tensor_path: &Path, fp: &Fingerprint) -> Result<(), IoError> {
    let mut pairs: Vec<(&str, String)> = vec![
        ("kind", "scores".to_string()),
        ("method", fp.method.clone()),
    ];
    if let Some(alpha) = fp.alpha {
        pairs.push(("alpha", alpha.to_string()));
    }
    if let Some(m) = fp.m {
        pairs.push(("m", m.to_string()));
    }
    if let Some(normalize) = fp.normalize {
        pairs.push(("normalize", normalize.to_string()));
    }
    if let Some(k) = fp.k {
        pairs.push(("k", k.to_string()));
    }
    if let Some(hash) = &fp.weight_hash {
        pairs.push(("weights", hash.clone()));
    }
    write_meta(&meta_path(tensor_path), &pairs)
}

/// Fingerprint for a score file. A missing sidecar is not an error: raw
/// score vectors from outside this tool evaluate fine against each other,
/// they just all carry the same "unknown" fingerprint.
pub fn read_scores_fingerprint(tensor_path: &Path) -> Result<Fingerprint, CliError> {
    let mpath = meta_path(tensor_path);
    if !mpath.exists() {
        return Ok(Fingerprint::bare("unknown"));
    }
    let meta = read_meta(&mpath)?;
    check_kind(&meta, &mpath, "scores")?;
    let mut fp = Fingerprint::bare(meta.get("method").map(String::as_str).unwrap_or("unknown"));
    if let Some(raw) = meta.get("alpha") {
        fp.alpha = Some(parse_value(&mpath, "alpha", raw)?);
    }
    if let Some(raw) = meta.get("m") {
        fp.m = Some(parse_value(&mpath, "m", raw)?);
    }
    if let Some(raw) = meta.get("normalize") {
        fp.normalize = Some(parse_value(&mpath, "normalize", raw)?);
    }
    if let Some(raw) = meta.get("k") {
        fp.k = Some(parse_value(&mpath, "k", raw)?);
    }
    if let Some(hash) = meta.get("weights") {
        fp.weight_hash = Some(hash.clone());
    }
    Ok(fp)
}
