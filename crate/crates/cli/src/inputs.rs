use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use grasp_core::geometry::{parse_object_config, GeometryConfig};
use grasp_core::{HandConfig, HandModel, ObjectModel, SamplerConfig};

use crate::error::{config_err, CliError, CliResult};

/// One input file and its git-style blob hash.
#[derive(Debug, Clone, serde::Serialize)]
pub struct InputFile {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Hashes `"blob <len>\0" ++ bytes`, the same framing git uses for blobs.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

fn read(path: &Path, role: &str, files: &mut Vec<InputFile>) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read {role} config {}: {e}", path.display())))?;
    files.push(InputFile { role: role.into(), path: path.display().to_string(), sha256: blob_hash(&bytes) });
    String::from_utf8(bytes).map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))
}

fn json_err(kind: &str, path: &Path, e: serde_json::Error) -> CliError {
    CliError::Config(format!("{kind} config {}: line {} column {}: {e}", path.display(), e.line(), e.column()))
}

pub fn load_hand(path: &Path, files: &mut Vec<InputFile>) -> CliResult<HandModel> {
    let text = read(path, "hand", files)?;
    let cfg: HandConfig = serde_json::from_str(&text).map_err(|e| json_err("hand", path, e))?;
    HandModel::from_config(&cfg).map_err(config_err)
}

pub fn load_object(path: &Path, files: &mut Vec<InputFile>) -> CliResult<ObjectModel> {
    let text = read(path, "object", files)?;
    let cfg = parse_object_config(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    if let GeometryConfig::Mesh { path: mesh, .. } = &cfg.geometry {
        read(&base.join(mesh), "mesh", files)?;
    }
    ObjectModel::from_config(&cfg, &base).map_err(config_err)
}

pub fn load_sampler(path: Option<&Path>, files: &mut Vec<InputFile>) -> CliResult<SamplerConfig> {
    let Some(path) = path else {
        return Ok(SamplerConfig::default());
    };
    let text = read(path, "sampler", files)?;
    let cfg: SamplerConfig = serde_json::from_str(&text).map_err(|e| json_err("sampler", path, e))?;
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

/// Combined hash over the roles and contents of all inputs, independent of
/// where the files live.
pub fn inputs_hash(files: &[InputFile]) -> String {
    let mut h = Sha256::new();
    for f in files {
        h.update(format!("{} {}\n", f.role, f.sha256).as_bytes());
    }
    hex::encode(h.finalize())
}
