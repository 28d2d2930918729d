//! Weight container: `manifest.toml` plus one little-endian f32 blob.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::arch::{Architecture, TensorShape};

pub const WEIGHTS_FORMAT: &str = "mbci-cnn-weights";
pub const WEIGHTS_VERSION: u32 = 1;
pub const WEIGHTS_MANIFEST: &str = "manifest.toml";
pub const WEIGHTS_BLOB: &str = "weights.bin";
const DTYPE: &str = "f32-le";
const DEFAULT_BN_EPSILON: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("weight container not found at {0}")]
    NotFound(String),
    #[error("i/o error on weight container: {0}")]
    Io(#[from] std::io::Error),
    #[error("weight manifest does not parse: {0}")]
    Manifest(String),
    #[error("unsupported weight format {0:?}")]
    UnsupportedFormat(String),
    #[error("unknown weight container version {0}")]
    UnknownVersion(u32),
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("shape mismatch in layer {layer}: tensor {tensor} is {found:?}, expected {expected:?}")]
    ShapeMismatch {
        layer: String,
        tensor: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("tensor {0} missing from container")]
    MissingTensor(String),
    #[error("unexpected tensor {0} in container")]
    UnexpectedTensor(String),
    #[error("corrupt weight payload: {0}")]
    CorruptPayload(String),
    #[error("blob checksum mismatch: manifest {expected}, blob {actual}")]
    ChecksumMismatch { expected: String, actual: String },
    #[error("invalid value in {tensor}: {reason}")]
    InvalidValue { tensor: String, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    /// Layer a tensor belongs to: the part of its name before the first dot.
    pub fn layer(&self) -> &str {
        self.name.split('.').next().unwrap_or(&self.name)
    }
}

/// Validated weights for the multiscale CNN. Immutable once loaded; share
/// between threads behind an `Arc`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights {
    pub architecture: Architecture,
    pub batch_norm_epsilon: f64,
    pub classes: Vec<String>,
    tensors: Vec<NamedTensor>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    dtype: String,
    blob: String,
    blob_bytes: u64,
    blob_sha256: String,
    batch_norm_epsilon: f64,
    classes: Vec<String>,
    layer_order: Vec<String>,
    architecture: Architecture,
    tensor: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
    bytes: u64,
}

impl ModelWeights {
    /// All-zero weights with unit batch-norm variance.
    pub fn zeros(architecture: Architecture) -> Result<Self, WeightsError> {
        architecture.validate().map_err(WeightsError::Architecture)?;
        let tensors = architecture
            .tensor_shapes()
            .into_iter()
            .map(|TensorShape { name, dims }| {
                let fill = if name.ends_with("bn.variance") || name.ends_with("bn.gamma") {
                    1.0
                } else {
                    0.0
                };
                NamedTensor {
                    data: vec![fill; dims.iter().product()],
                    name,
                    shape: dims,
                }
            })
            .collect();
        Ok(ModelWeights {
            architecture,
            batch_norm_epsilon: DEFAULT_BN_EPSILON,
            classes: vec!["not_mindful".into(), "mindful".into()],
            tensors,
        })
    }

    /// Every tensor zero, including batch-norm scale; the network outputs
    /// equal logits for any input.
    pub fn all_zero(architecture: Architecture) -> Result<Self, WeightsError> {
        let mut w = Self::zeros(architecture)?;
        for t in &mut w.tensors {
            if t.name.ends_with("bn.gamma") {
                t.data.fill(0.0);
            }
        }
        Ok(w)
    }

    /// He-normal kernels (sd = sqrt(2 / fan_in)), zero biases, identity
    /// batch-norm. Same seed, same bytes.
    pub fn init_random(architecture: Architecture, seed: u64) -> Result<Self, WeightsError> {
        let mut w = Self::zeros(architecture)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in &mut w.tensors {
            if !t.name.ends_with("kernel") {
                continue;
            }
            let fan_in: usize = t.shape[..t.shape.len() - 1].iter().product();
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive sd");
            for v in &mut t.data {
                *v = normal.sample(&mut rng) as f32;
            }
        }
        Ok(w)
    }

    pub fn tensors(&self) -> &[NamedTensor] {
        &self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Mutable data of a tensor. Shapes stay fixed.
    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f32]> {
        self.tensors.iter_mut().find(|t| t.name == name).map(|t| t.data.as_mut_slice())
    }

    pub(crate) fn data(&self, name: &str) -> &[f32] {
        &self.tensor(name).unwrap_or_else(|| panic!("validated weights lack {name}")).data
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    /// Checks values that shapes alone cannot: finiteness and positive
    /// running variances.
    pub fn validate_values(&self) -> Result<(), WeightsError> {
        for t in &self.tensors {
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(WeightsError::InvalidValue {
                    tensor: t.name.clone(),
                    reason: "non-finite value".into(),
                });
            }
            if t.name.ends_with("bn.variance") && t.data.iter().any(|&v| v <= 0.0) {
                return Err(WeightsError::InvalidValue {
                    tensor: t.name.clone(),
                    reason: "running variance must be positive".into(),
                });
            }
        }
        if !(self.batch_norm_epsilon.is_finite() && self.batch_norm_epsilon >= 0.0) {
            return Err(WeightsError::InvalidValue {
                tensor: "batch_norm_epsilon".into(),
                reason: "must be finite and non-negative".into(),
            });
        }
        Ok(())
    }

    fn blob(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.parameter_count() * 4);
        for t in &self.tensors {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    fn manifest(&self, blob: &[u8]) -> Manifest {
        let mut offset = 0u64;
        let tensor = self
            .tensors
            .iter()
            .map(|t| {
                let bytes = 4 * t.data.len() as u64;
                let e = TensorEntry {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    offset,
                    bytes,
                };
                offset += bytes;
                e
            })
            .collect();
        Manifest {
            format: WEIGHTS_FORMAT.into(),
            version: WEIGHTS_VERSION,
            dtype: DTYPE.into(),
            blob: WEIGHTS_BLOB.into(),
            blob_bytes: blob.len() as u64,
            blob_sha256: hex::encode(Sha256::digest(blob)),
            batch_norm_epsilon: self.batch_norm_epsilon,
            classes: self.classes.clone(),
            layer_order: self.architecture.layer_order(),
            architecture: self.architecture.clone(),
            tensor,
        }
    }

    /// Writes the container into directory `dir`, creating it if needed.
    /// Each file is written to a temporary name and renamed into place.
    pub fn save(&self, dir: &Path) -> Result<(), WeightsError> {
        fs::create_dir_all(dir)?;
        let blob = self.blob();
        let manifest = toml::to_string(&self.manifest(&blob)).map_err(|e| WeightsError::Manifest(e.to_string()))?;
        write_atomic(&dir.join(WEIGHTS_BLOB), &blob)?;
        write_atomic(&dir.join(WEIGHTS_MANIFEST), manifest.as_bytes())?;
        Ok(())
    }

    /// Loads and fully validates a container. Nothing is returned unless every
    /// tensor checks out.
    pub fn load(dir: &Path) -> Result<Self, WeightsError> {
        let manifest_path = dir.join(WEIGHTS_MANIFEST);
        if !manifest_path.is_file() {
            return Err(WeightsError::NotFound(dir.display().to_string()));
        }
        let text = fs::read_to_string(&manifest_path)?;
        let manifest: Manifest = toml::from_str(&text).map_err(|e| WeightsError::Manifest(e.to_string()))?;
        if manifest.format != WEIGHTS_FORMAT {
            return Err(WeightsError::UnsupportedFormat(manifest.format));
        }
        if manifest.version != WEIGHTS_VERSION {
            return Err(WeightsError::UnknownVersion(manifest.version));
        }
        if manifest.dtype != DTYPE {
            return Err(WeightsError::UnsupportedFormat(format!("dtype {}", manifest.dtype)));
        }
        let arch = manifest.architecture;
        arch.validate().map_err(WeightsError::Architecture)?;
        if manifest.layer_order != arch.layer_order() {
            return Err(WeightsError::Architecture(format!(
                "layer order {:?} does not match architecture",
                manifest.layer_order
            )));
        }
        if manifest.classes.len() != arch.classes {
            return Err(WeightsError::Architecture("class labels do not match output width".into()));
        }

        let blob_path = dir.join(&manifest.blob);
        let blob = fs::read(&blob_path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => WeightsError::CorruptPayload(format!("blob {} missing", manifest.blob)),
            _ => WeightsError::Io(e),
        })?;
        if blob.len() as u64 != manifest.blob_bytes {
            return Err(WeightsError::CorruptPayload(format!(
                "blob is {} bytes, manifest declares {}",
                blob.len(),
                manifest.blob_bytes
            )));
        }
        let actual = hex::encode(Sha256::digest(&blob));
        if actual != manifest.blob_sha256 {
            return Err(WeightsError::ChecksumMismatch {
                expected: manifest.blob_sha256,
                actual,
            });
        }

        let expected = arch.tensor_shapes();
        if let Some(extra) = manifest.tensor.iter().find(|e| !expected.iter().any(|s| s.name == e.name)) {
            return Err(WeightsError::UnexpectedTensor(extra.name.clone()));
        }
        let mut tensors = Vec::with_capacity(expected.len());
        for shape in expected {
            let entry = manifest
                .tensor
                .iter()
                .find(|e| e.name == shape.name)
                .ok_or_else(|| WeightsError::MissingTensor(shape.name.clone()))?;
            if entry.shape != shape.dims {
                return Err(WeightsError::ShapeMismatch {
                    layer: shape.name.split('.').next().unwrap_or_default().to_string(),
                    tensor: shape.name,
                    expected: shape.dims,
                    found: entry.shape.clone(),
                });
            }
            let n: usize = shape.dims.iter().product();
            let end = entry.offset.checked_add(entry.bytes);
            if entry.bytes != 4 * n as u64 || end.is_none_or(|e| e > blob.len() as u64) {
                return Err(WeightsError::CorruptPayload(format!(
                    "tensor {} spans bytes {}+{} of a {}-byte blob",
                    entry.name,
                    entry.offset,
                    entry.bytes,
                    blob.len()
                )));
            }
            let bytes = &blob[entry.offset as usize..(entry.offset + entry.bytes) as usize];
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.push(NamedTensor {
                name: shape.name,
                shape: shape.dims,
                data,
            });
        }
        let weights = ModelWeights {
            architecture: arch,
            batch_norm_epsilon: manifest.batch_norm_epsilon,
            classes: manifest.classes,
            tensors,
        };
        weights.validate_values()?;
        Ok(weights)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), WeightsError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
