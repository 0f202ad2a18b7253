//! Versioned binary policy checkpoints with an embedded config digest.
//!
//! Layout: magic, format version, SHA-256 of the learner config JSON, then
//! the flat little-endian f64 parameter vector.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::learner::{LearnerConfig, TqcLearner};

const MAGIC: &[u8; 8] = b"SBPKCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("checkpoint was written for a different learner config")]
    ConfigMismatch,
    #[error("checkpoint is truncated")]
    Truncated,
}

/// SHA-256 digest of the canonical JSON encoding of a learner config.
pub fn config_digest(config: &LearnerConfig) -> [u8; 32] {
    let json = serde_json::to_vec(config).expect("learner config serializes");
    let mut hasher = Sha256::new();
    hasher.update(&json);
    hasher.finalize().into()
}

/// Writes the learner's parameters to `path`.
pub fn save(learner: &TqcLearner, path: &Path) -> Result<(), CheckpointError> {
    let digest = config_digest(&learner.config);
    let params = learner.flatten_params();
    let mut file = File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&VERSION.to_le_bytes())?;
    file.write_all(&digest)?;
    file.write_all(&(params.len() as u64).to_le_bytes())?;
    for value in &params {
        file.write_all(&value.to_le_bytes())?;
    }
    file.flush()?;
    Ok(())
}

/// Restores parameters into a learner built from the same config.
pub fn load(learner: &mut TqcLearner, path: &Path) -> Result<(), CheckpointError> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic).map_err(|_| CheckpointError::Truncated)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut word = [0u8; 4];
    file.read_exact(&mut word).map_err(|_| CheckpointError::Truncated)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let mut digest = [0u8; 32];
    file.read_exact(&mut digest).map_err(|_| CheckpointError::Truncated)?;
    if digest != config_digest(&learner.config) {
        return Err(CheckpointError::ConfigMismatch);
    }
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes).map_err(|_| CheckpointError::Truncated)?;
    let len = u64::from_le_bytes(len_bytes) as usize;
    let mut params = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        file.read_exact(&mut buf).map_err(|_| CheckpointError::Truncated)?;
        params.push(f64::from_le_bytes(buf));
    }
    learner.restore_params(&params);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn config() -> LearnerConfig {
        LearnerConfig {
            obs_dim: 3,
            act_dim: 2,
            hidden: vec![8, 8],
            ..LearnerConfig::default()
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("policy.ckpt");
        let learner = TqcLearner::new(config(), 1);
        save(&learner, &path).unwrap();
        let mut other = TqcLearner::new(config(), 2);
        assert_ne!(other.flatten_params(), learner.flatten_params());
        load(&mut other, &path).unwrap();
        assert_eq!(other.flatten_params(), learner.flatten_params());
    }

    #[test]
    fn config_mismatch_is_detected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("policy.ckpt");
        let learner = TqcLearner::new(config(), 1);
        save(&learner, &path).unwrap();
        let mut cfg = config();
        cfg.hidden = vec![16, 16];
        let mut other = TqcLearner::new(cfg, 2);
        assert!(matches!(
            load(&mut other, &path),
            Err(CheckpointError::ConfigMismatch)
        ));
    }

    #[test]
    fn garbage_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"definitely not a checkpoint").unwrap();
        let mut learner = TqcLearner::new(config(), 1);
        assert!(matches!(load(&mut learner, &path), Err(CheckpointError::BadMagic)));
    }
}
