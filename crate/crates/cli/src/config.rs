//! Validated run parameters and the run identifier.

use crate::output::to_canonical_json;
use crate::CliError;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use superchannel::catalog::{lookup, SystemSpec};
use superchannel::schema::SystemJson;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemSource {
    Catalog(String),
    /// Identified by content so that the run id does not depend on where the
    /// file lives.
    File { sha256: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_drift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSource>,
    pub params: Params,
    /// Excluded from the run id.
    #[serde(skip)]
    pub out: PathBuf,
}

impl RunConfig {
    /// First 16 hex digits of the SHA-256 of the canonical JSON.
    pub fn run_id(&self) -> String {
        let digest = Sha256::digest(to_canonical_json(self));
        hex::encode(digest)[..16].to_string()
    }
}

/// Resolves `--system` / `--system-file` into a specification and its source
/// tag.
pub fn load_system(name: Option<&str>, file: Option<&Path>) -> Result<(SystemSpec, SystemSource), CliError> {
    match (name, file) {
        (Some(n), None) => Ok((lookup(n)?, SystemSource::Catalog(n.to_string()))),
        (None, Some(p)) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            let spec = SystemJson::parse(&text)?.to_spec()?;
            let sha256 = hex::encode(Sha256::digest(text.as_bytes()));
            Ok((spec, SystemSource::File { sha256 }))
        }
        _ => Err(CliError::usage("--system", "exactly one of --system NAME or --system-file PATH")),
    }
}

pub fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("expected a positive number, got {v}")),
        Err(_) => Err(format!("expected a positive number, got `{s}`")),
    }
}

pub fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a non-negative number, got `{s}`")),
    }
}

pub fn finite(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a finite number, got `{s}`")),
    }
}

/// `ABS,REL`.
pub fn tolerances(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected ABS,REL, got `{s}`"));
    }
    Ok((positive(parts[0].trim())?, positive(parts[1].trim())?))
}

/// `NθxNI`, both at least 2.
pub fn grid(s: &str) -> Result<(usize, usize), String> {
    let err = || format!("expected NTHETAxNI with integers >= 2, got `{s}`");
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(err)?;
    let a: usize = a.trim().parse().map_err(|_| err())?;
    let b: usize = b.trim().parse().map_err(|_| err())?;
    if a < 2 || b < 2 {
        return Err(err());
    }
    Ok((a, b))
}

pub fn steps(s: &str) -> Result<u8, String> {
    match s {
        "1" => Ok(1),
        "2" => Ok(2),
        _ => Err(format!("expected 1 or 2, got `{s}`")),
    }
}
