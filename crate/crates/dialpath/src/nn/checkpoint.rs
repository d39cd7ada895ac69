//! Versioned binary container for named f64 arrays with a JSON header.
//! Used for model checkpoints (magic `DPCK`) and visual feature grids
//! (magic `DPVG`).
//!
//! Byte layout, all integers little-endian:
//!
//! ```text
//! offset 0   magic          4 bytes
//! offset 4   format version u32 (currently 1)
//! offset 8   header length  u64
//! offset 16  header         UTF-8 JSON: {"hyperparams": ...,
//!                            "arrays": [{"name", "rows", "cols"}, ...]}
//! then       payload        arrays in header order, row-major f64
//! ```
//!
//! No wall-clock metadata is written, so identical inputs produce
//! identical bytes.

use super::params::ParamSet;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;
pub const CHECKPOINT_MAGIC: [u8; 4] = *b"DPCK";
pub const GRID_MAGIC: [u8; 4] = *b"DPVG";

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    BadVersion(u32),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("payload truncated: array {name} needs {needed} more bytes")]
    Truncated { name: String, needed: usize },
    #[error("array {name}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("array {0} missing from container")]
    MissingArray(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct ArrayMeta {
    name: String,
    rows: u64,
    cols: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    hyperparams: serde_json::Value,
    arrays: Vec<ArrayMeta>,
}

/// An in-memory container: hyperparameters plus named arrays.
#[derive(Debug, Clone)]
pub struct Container {
    pub hyperparams: serde_json::Value,
    pub arrays: Vec<(String, usize, usize, Vec<f64>)>,
}

impl Container {
    pub fn array(&self, name: &str) -> Option<(&[f64], usize, usize)> {
        self.arrays
            .iter()
            .find(|(n, _, _, _)| n == name)
            .map(|(_, r, c, d)| (d.as_slice(), *r, *c))
    }
}

pub fn write_container(
    path: &Path,
    magic: [u8; 4],
    hyperparams: &serde_json::Value,
    arrays: &[(String, usize, usize, Vec<f64>)],
) -> Result<(), ContainerError> {
    let io_err = |source| ContainerError::Io {
        path: path.display().to_string(),
        source,
    };
    let header = Header {
        hyperparams: hyperparams.clone(),
        arrays: arrays
            .iter()
            .map(|(name, rows, cols, data)| {
                assert_eq!(data.len(), rows * cols, "array {name} shape mismatch");
                ArrayMeta {
                    name: name.clone(),
                    rows: *rows as u64,
                    cols: *cols as u64,
                }
            })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header).expect("serializable header");
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    file.write_all(&magic).map_err(io_err)?;
    file.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io_err)?;
    file.write_all(&(header_bytes.len() as u64).to_le_bytes())
        .map_err(io_err)?;
    file.write_all(&header_bytes).map_err(io_err)?;
    for (_, _, _, data) in arrays {
        for v in data {
            file.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    file.flush().map_err(io_err)?;
    Ok(())
}

pub fn read_container(path: &Path, expected_magic: [u8; 4]) -> Result<Container, ContainerError> {
    let io_err = |source| ContainerError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = std::io::BufReader::new(std::fs::File::open(path).map_err(io_err)?);
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic).map_err(io_err)?;
    if magic != expected_magic {
        return Err(ContainerError::BadMagic {
            expected: expected_magic,
            found: magic,
        });
    }
    let mut word = [0u8; 4];
    file.read_exact(&mut word).map_err(io_err)?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(ContainerError::BadVersion(version));
    }
    let mut long = [0u8; 8];
    file.read_exact(&mut long).map_err(io_err)?;
    let header_len = u64::from_le_bytes(long) as usize;
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes).map_err(io_err)?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| ContainerError::Header(e.to_string()))?;

    let mut arrays = Vec::with_capacity(header.arrays.len());
    for meta in &header.arrays {
        let count = (meta.rows * meta.cols) as usize;
        let mut bytes = vec![0u8; count * 8];
        file.read_exact(&mut bytes)
            .map_err(|_| ContainerError::Truncated {
                name: meta.name.clone(),
                needed: count * 8,
            })?;
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        arrays.push((meta.name.clone(), meta.rows as usize, meta.cols as usize, data));
    }
    Ok(Container {
        hyperparams: header.hyperparams,
        arrays,
    })
}

/// Save every parameter of a set as a checkpoint.
pub fn save_params(
    path: &Path,
    params: &ParamSet,
    hyperparams: &serde_json::Value,
) -> Result<(), ContainerError> {
    let arrays: Vec<(String, usize, usize, Vec<f64>)> = params
        .iter()
        .map(|(name, p)| (name.clone(), p.rows(), p.cols(), p.values()))
        .collect();
    write_container(path, CHECKPOINT_MAGIC, hyperparams, &arrays)
}

/// Load a checkpoint into an existing parameter set (names and shapes must
/// match); returns the stored hyperparameters.
pub fn load_params(path: &Path, params: &ParamSet) -> Result<serde_json::Value, ContainerError> {
    let container = read_container(path, CHECKPOINT_MAGIC)?;
    for (name, param) in params.iter() {
        let (data, rows, cols) = container
            .array(name)
            .ok_or_else(|| ContainerError::MissingArray(name.clone()))?;
        if (rows, cols) != (param.rows(), param.cols()) {
            return Err(ContainerError::ShapeMismatch {
                name: name.clone(),
                expected: (param.rows(), param.cols()),
                found: (rows, cols),
            });
        }
        param.set_values(data.to_vec());
    }
    Ok(container.hyperparams)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_params() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.dpck");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut ps = ParamSet::new();
        ps.add("a.w", 3, 4, &mut rng);
        ps.add("b.w", 2, 2, &mut rng);
        let hp = serde_json::json!({"d": 4, "heads": 2});
        save_params(&path, &ps, &hp).unwrap();

        let mut ps2 = ParamSet::new();
        let a2 = ps2.add_const("a.w", 3, 4, 0.0);
        let b2 = ps2.add_const("b.w", 2, 2, 0.0);
        let hp2 = load_params(&path, &ps2).unwrap();
        assert_eq!(hp2, hp);
        assert_eq!(a2.values(), ps.get("a.w").unwrap().values());
        assert_eq!(b2.values(), ps.get("b.w").unwrap().values());
    }

    #[test]
    fn deterministic_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.dpck");
        let p2 = dir.path().join("b.dpck");
        let arrays = vec![("x".to_string(), 2, 2, vec![1.0, -0.5, 3.25, 0.0])];
        let hp = serde_json::json!({"seed": 7});
        write_container(&p1, CHECKPOINT_MAGIC, &hp, &arrays).unwrap();
        write_container(&p2, CHECKPOINT_MAGIC, &hp, &arrays).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        write_container(&path, GRID_MAGIC, &serde_json::json!({}), &[]).unwrap();
        assert!(matches!(
            read_container(&path, CHECKPOINT_MAGIC),
            Err(ContainerError::BadMagic { .. })
        ));
    }

    #[test]
    fn truncated_payload_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        write_container(
            &path,
            CHECKPOINT_MAGIC,
            &serde_json::json!({}),
            &[("w".to_string(), 1, 4, vec![1.0, 2.0, 3.0, 4.0])],
        )
        .unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(
            read_container(&path, CHECKPOINT_MAGIC),
            Err(ContainerError::Truncated { .. })
        ));
    }
}
