//! The packed tensor the generative model operates on, plus its file format.
//!
//! A primitive set with K = W^2 payloads of resolution S packs into one
//! row-major [W*S][W*S][7*S] grid of f64. The seven depth channels per cell
//! are red, green, blue, density, and the three log scale corrections.
//! Values are stored normalized so every channel is comparable to unit
//! Gaussian noise.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 7;
const MAGIC: [u8; 4] = *b"PKT1";

/// Dense packed tensor. `data[(a * side + b) * depth + c]` with
/// side = grid_width * payload_res and depth = 7 * payload_res.
#[derive(Clone, Debug, PartialEq)]
pub struct PackedTensor {
    grid_width: usize,
    payload_res: usize,
    data: Vec<f64>,
}

impl PackedTensor {
    pub fn zeros(grid_width: usize, payload_res: usize) -> Result<PackedTensor> {
        if grid_width < 1 || payload_res < 1 {
            return Err(Error::validation(format!(
                "packed tensor needs positive dimensions, got grid {grid_width} payload {payload_res}"
            )));
        }
        let side = grid_width * payload_res;
        let len = side * side * CHANNELS * payload_res;
        Ok(PackedTensor { grid_width, payload_res, data: vec![0.0; len] })
    }

    pub fn grid_width(&self) -> usize {
        self.grid_width
    }

    pub fn payload_res(&self) -> usize {
        self.payload_res
    }

    /// Edge length of the two spatial axes, W * S.
    pub fn side(&self) -> usize {
        self.grid_width * self.payload_res
    }

    /// Length of the channel axis, 7 * S.
    pub fn depth(&self) -> usize {
        CHANNELS * self.payload_res
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn index(&self, a: usize, b: usize, c: usize) -> usize {
        debug_assert!(a < self.side() && b < self.side() && c < self.depth());
        (a * self.side() + b) * self.depth() + c
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[self.index(a, b, c)]
    }

    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        let i = self.index(a, b, c);
        self.data[i] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &PackedTensor) -> bool {
        self.grid_width == other.grid_width && self.payload_res == other.payload_res
    }

    pub fn validate(&self) -> Result<()> {
        let side = self.grid_width * self.payload_res;
        let expect = side * side * CHANNELS * self.payload_res;
        if self.grid_width < 1 || self.payload_res < 1 || self.data.len() != expect {
            return Err(Error::validation(format!(
                "packed tensor holds {} values, expected {expect}",
                self.data.len()
            )));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("packed tensor has non-finite value at {i}")));
        }
        Ok(())
    }
}

/// Maps between physical payload values and the normalized tensor range.
/// Colors and densities land in [-1, 1]; scale corrections are stored as
/// scaled logs so the identity correction packs to zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub sigma_max: f64,
    pub delta_log_scale: f64,
}

impl Default for Normalization {
    fn default() -> Normalization {
        Normalization { sigma_max: crate::fitting::SIGMA_MAX, delta_log_scale: 1.0 }
    }
}

impl Normalization {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_max.is_finite() && self.sigma_max > 0.0) {
            return Err(Error::validation(format!("sigma_max {} must be positive", self.sigma_max)));
        }
        if !(self.delta_log_scale.is_finite() && self.delta_log_scale > 0.0) {
            return Err(Error::validation(format!(
                "delta_log_scale {} must be positive",
                self.delta_log_scale
            )));
        }
        Ok(())
    }

    pub fn color_to_norm(&self, c: f64) -> f64 {
        2.0 * c - 1.0
    }

    pub fn color_from_norm(&self, n: f64) -> f64 {
        ((n + 1.0) / 2.0).clamp(0.0, 1.0)
    }

    pub fn density_to_norm(&self, sigma: f64) -> f64 {
        2.0 * sigma / self.sigma_max - 1.0
    }

    pub fn density_from_norm(&self, n: f64) -> f64 {
        ((n + 1.0) / 2.0 * self.sigma_max).clamp(0.0, self.sigma_max)
    }

    pub fn delta_to_norm(&self, delta: f64) -> f64 {
        delta.ln() * self.delta_log_scale
    }

    pub fn delta_from_norm(&self, n: f64) -> f64 {
        (n / self.delta_log_scale).exp()
    }
}

/// Writes the tensor as magic "PKT1", little-endian u32 grid width and
/// payload resolution, then the values as little-endian f32 in storage
/// order. The normalization lands in a JSON sidecar at `path` + ".json".
pub fn save_packed_tensor(
    path: impl AsRef<Path>,
    tensor: &PackedTensor,
    norm: &Normalization,
) -> Result<()> {
    let path = path.as_ref();
    tensor.validate()?;
    norm.validate()?;
    let mut bytes = Vec::with_capacity(12 + tensor.len() * 4);
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&(tensor.grid_width as u32).to_le_bytes());
    bytes.extend_from_slice(&(tensor.payload_res as u32).to_le_bytes());
    for &v in tensor.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    crate::fsutil::atomic_write(path, &bytes)?;
    let sidecar = sidecar_path(path);
    let text =
        serde_json::to_string_pretty(norm).map_err(|e| Error::format(&sidecar, e.to_string()))?;
    crate::fsutil::atomic_write(&sidecar, text.as_bytes())
}

/// Reads a tensor written by `save_packed_tensor`. The sidecar is required;
/// a tensor without its normalization cannot be unpacked meaningfully.
pub fn load_packed_tensor(path: impl AsRef<Path>) -> Result<(PackedTensor, Normalization)> {
    let path = path.as_ref();
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = [0u8; 12];
    file.read_exact(&mut header).map_err(|e| Error::io(path, e))?;
    if header[..4] != MAGIC {
        return Err(Error::format(path, "bad magic, expected \"PKT1\""));
    }
    let grid_width = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let payload_res = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let mut tensor = PackedTensor::zeros(grid_width, payload_res)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut raw = vec![0u8; tensor.len() * 4];
    file.read_exact(&mut raw).map_err(|e| Error::io(path, e))?;
    let mut trailing = [0u8; 1];
    if file.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::format(path, "trailing bytes after tensor data"));
    }
    for (dst, src) in tensor.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
        *dst = f32::from_le_bytes(src.try_into().unwrap()) as f64;
    }
    tensor.validate().map_err(|e| Error::format(path, e.to_string()))?;
    let sidecar = sidecar_path(path);
    let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let norm: Normalization =
        serde_json::from_str(&text).map_err(|e| Error::format(&sidecar, e.to_string()))?;
    norm.validate()?;
    Ok((tensor, norm))
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    std::path::PathBuf::from(os)
}
