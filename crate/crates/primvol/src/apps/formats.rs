//! On-disk formats: primitive sets, float and preview images, camera rigs,
//! pose sequences, and loss traces. Binary payloads are little-endian f32;
//! in-memory f64 values quantize on save, so only data that already
//! round-tripped through f32 reproduces bitwise.

use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::body::Pose;
use crate::error::{Error, Result};
use crate::fitting::LossRow;
use crate::fsutil::atomic_write;
use crate::math::{Mat3, Quat, Vec3};
use crate::renderer::{Camera, PrimitiveSet};

const SET_MAGIC: [u8; 4] = *b"PRM1";

struct ByteWriter(Vec<u8>);

impl ByteWriter {
    fn f32(&mut self, v: f64) {
        self.0.extend_from_slice(&(v as f32).to_le_bytes());
    }

    fn vec3(&mut self, v: Vec3) {
        self.f32(v.x);
        self.f32(v.y);
        self.f32(v.z);
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at + n;
        if end > self.bytes.len() {
            return Err(Error::format(self.path, "file is truncated"));
        }
        let slice = &self.bytes[self.at..end];
        self.at = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f64> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()) as f64)
    }

    fn vec3(&mut self) -> Result<Vec3> {
        Ok(Vec3::new(self.f32()?, self.f32()?, self.f32()?))
    }

    fn done(&self) -> Result<()> {
        if self.at != self.bytes.len() {
            return Err(Error::format(self.path, "trailing bytes after payload data"));
        }
        Ok(())
    }
}

/// Binary layout: "PRM1", u32 K, u32 S, u32 W, then per primitive the
/// translation, rotation quaternion (w x y z), base scale, and scale
/// correction as f32 triples/quads, then the color block (K*3*S^3) and
/// density block (K*S^3) in payload order.
pub fn save_primitive_set(path: impl AsRef<Path>, set: &PrimitiveSet) -> Result<()> {
    let path = path.as_ref();
    set.validate()?;
    let mut w = ByteWriter(Vec::with_capacity(
        16 + set.count() * 13 * 4 + (set.color.len() + set.density.len()) * 4,
    ));
    w.0.extend_from_slice(&SET_MAGIC);
    w.0.extend_from_slice(&(set.count() as u32).to_le_bytes());
    w.0.extend_from_slice(&(set.payload_res as u32).to_le_bytes());
    w.0.extend_from_slice(&(set.grid_width as u32).to_le_bytes());
    for kin in &set.kin {
        w.vec3(kin.translation);
        w.f32(kin.rotation.w);
        w.f32(kin.rotation.x);
        w.f32(kin.rotation.y);
        w.f32(kin.rotation.z);
        w.vec3(kin.base_scale);
        w.vec3(kin.delta_scale);
    }
    for &c in &set.color {
        w.f32(c);
    }
    for &d in &set.density {
        w.f32(d);
    }
    atomic_write(path, &w.0)
}

pub fn load_primitive_set(path: impl AsRef<Path>) -> Result<PrimitiveSet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = ByteReader { bytes: &bytes, at: 0, path };
    if r.take(4)? != SET_MAGIC {
        return Err(Error::format(path, "bad magic, expected \"PRM1\""));
    }
    let count = r.u32()? as usize;
    let payload_res = r.u32()? as usize;
    let grid_width = r.u32()? as usize;
    let mut kin = Vec::with_capacity(count);
    for _ in 0..count {
        let translation = r.vec3()?;
        let rotation = Quat::new(r.f32()?, r.f32()?, r.f32()?, r.f32()?);
        let base_scale = r.vec3()?;
        let delta_scale = r.vec3()?;
        kin.push(crate::body::PrimitiveKinematics {
            translation,
            rotation,
            base_scale,
            delta_scale,
        });
    }
    let s3 = payload_res.pow(3);
    let mut color = Vec::with_capacity(count * 3 * s3);
    for _ in 0..count * 3 * s3 {
        color.push(r.f32()?);
    }
    let mut density = Vec::with_capacity(count * s3);
    for _ in 0..count * s3 {
        density.push(r.f32()?);
    }
    r.done()?;
    let set = PrimitiveSet { grid_width, payload_res, kin, color, density };
    set.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(set)
}

/// Quantizes every stored value through f32 so that a save/load round trip
/// reproduces the set bitwise. Rendering the quantized set is the ground
/// truth the file format can actually represent.
pub fn quantize_set(set: &PrimitiveSet) -> PrimitiveSet {
    let q = |v: f64| v as f32 as f64;
    let qv = |v: Vec3| Vec3::new(q(v.x), q(v.y), q(v.z));
    let mut out = set.clone();
    for kin in &mut out.kin {
        kin.translation = qv(kin.translation);
        kin.rotation = Quat::new(q(kin.rotation.w), q(kin.rotation.x), q(kin.rotation.y), q(kin.rotation.z));
        kin.base_scale = qv(kin.base_scale);
        kin.delta_scale = qv(kin.delta_scale);
    }
    for c in &mut out.color {
        *c = q(*c);
    }
    for d in &mut out.density {
        *d = q(*d);
    }
    out
}

/// Float image: "PF" (3 channels) or "Pf" (1 channel), dimensions, then a
/// negative scale marking little-endian f32 rows stored bottom-to-top.
/// In memory row 0 is the top row.
pub fn save_pfm(path: impl AsRef<Path>, width: usize, height: usize, data: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let channels = if data.len() == width * height * 3 {
        3
    } else if data.len() == width * height {
        1
    } else {
        return Err(Error::validation(format!(
            "image has {} values, expected {} (gray) or {} (color)",
            data.len(),
            width * height,
            width * height * 3
        )));
    };
    let mut bytes = Vec::with_capacity(32 + data.len() * 4);
    bytes.extend_from_slice(if channels == 3 { b"PF\n" } else { b"Pf\n" });
    bytes.extend_from_slice(format!("{width} {height}\n-1.0\n").as_bytes());
    for row in (0..height).rev() {
        let start = row * width * channels;
        for &v in &data[start..start + width * channels] {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    atomic_write(path, &bytes)
}

/// Loads a PFM image; returns (width, height, channels, top-down data).
pub fn load_pfm(path: impl AsRef<Path>) -> Result<(usize, usize, usize, Vec<f64>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut header_end = 0;
    let mut newlines = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'\n' {
            newlines += 1;
            if newlines == 3 {
                header_end = i + 1;
                break;
            }
        }
    }
    if newlines != 3 {
        return Err(Error::format(path, "missing PFM header"));
    }
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::format(path, "PFM header is not UTF-8"))?;
    let mut lines = header.lines();
    let channels = match lines.next() {
        Some("PF") => 3,
        Some("Pf") => 1,
        _ => return Err(Error::format(path, "bad PFM type, expected PF or Pf")),
    };
    let dims = lines.next().unwrap_or("");
    let mut parts = dims.split_whitespace();
    let width: usize = parts
        .next()
        .and_then(|p| p.parse().ok())
        .ok_or_else(|| Error::format(path, "bad PFM dimensions"))?;
    let height: usize = parts
        .next()
        .and_then(|p| p.parse().ok())
        .ok_or_else(|| Error::format(path, "bad PFM dimensions"))?;
    let scale: f64 = lines
        .next()
        .and_then(|p| p.trim().parse().ok())
        .ok_or_else(|| Error::format(path, "bad PFM scale"))?;
    if scale >= 0.0 {
        return Err(Error::format(path, "big-endian PFM is not supported"));
    }
    let expect = width * height * channels * 4;
    let raw = &bytes[header_end..];
    if raw.len() != expect {
        return Err(Error::format(
            path,
            format!("PFM data holds {} bytes, expected {expect}", raw.len()),
        ));
    }
    let mut data = vec![0.0; width * height * channels];
    for (bottom_row, chunk) in raw.chunks_exact(width * channels * 4).enumerate() {
        let row = height - 1 - bottom_row;
        let start = row * width * channels;
        for (dst, src) in data[start..start + width * channels].iter_mut().zip(chunk.chunks_exact(4)) {
            *dst = f32::from_le_bytes(src.try_into().unwrap()) as f64;
        }
    }
    Ok((width, height, channels, data))
}

/// 8-bit preview PNG from [0,1] values; 3 channels per pixel.
pub fn save_png(path: impl AsRef<Path>, width: usize, height: usize, rgb: &[f64]) -> Result<()> {
    let path = path.as_ref();
    if rgb.len() != width * height * 3 {
        return Err(Error::validation(format!(
            "image has {} values, expected {}",
            rgb.len(),
            width * height * 3
        )));
    }
    let pixels: Vec<u8> =
        rgb.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    let img = image::RgbImage::from_raw(width as u32, height as u32, pixels)
        .expect("buffer length checked above");
    let mut bytes = std::io::Cursor::new(Vec::new());
    img.write_to(&mut bytes, image::ImageFormat::Png)
        .map_err(|e| Error::format(path, e.to_string()))?;
    atomic_write(path, &bytes.into_inner())
}

#[derive(Serialize, Deserialize)]
struct CameraFile {
    width: usize,
    height: usize,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    /// Camera axes in world space, one array per column.
    rotation_cols: [[f64; 3]; 3],
    position: [f64; 3],
    near: f64,
    far: f64,
}

impl CameraFile {
    fn from_camera(c: &Camera) -> CameraFile {
        CameraFile {
            width: c.width,
            height: c.height,
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            rotation_cols: [
                c.rotation.cols[0].to_array(),
                c.rotation.cols[1].to_array(),
                c.rotation.cols[2].to_array(),
            ],
            position: c.position.to_array(),
            near: c.near,
            far: c.far,
        }
    }

    fn into_camera(self) -> Camera {
        Camera {
            width: self.width,
            height: self.height,
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            rotation: Mat3::from_cols(
                Vec3::from_array(self.rotation_cols[0]),
                Vec3::from_array(self.rotation_cols[1]),
                Vec3::from_array(self.rotation_cols[2]),
            ),
            position: Vec3::from_array(self.position),
            near: self.near,
            far: self.far,
        }
    }
}

pub fn save_cameras(path: impl AsRef<Path>, cameras: &[Camera]) -> Result<()> {
    let path = path.as_ref();
    let files: Vec<CameraFile> = cameras.iter().map(CameraFile::from_camera).collect();
    let text = serde_json::to_string_pretty(&files).map_err(|e| Error::format(path, e.to_string()))?;
    atomic_write(path, text.as_bytes())
}

pub fn load_cameras(path: impl AsRef<Path>) -> Result<Vec<Camera>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let files: Vec<CameraFile> =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let cameras: Vec<Camera> = files.into_iter().map(CameraFile::into_camera).collect();
    for c in &cameras {
        c.validate()?;
    }
    Ok(cameras)
}

#[derive(Serialize, Deserialize)]
struct PoseSeqFile {
    poses: Vec<PoseEntry>,
}

#[derive(Serialize, Deserialize)]
struct PoseEntry {
    angles: Vec<f64>,
    root_translation: [f64; 3],
}

/// A JSON pose sequence for animation: per frame, flat per-joint angles
/// (3 each) and a root offset.
pub fn save_pose_sequence(path: impl AsRef<Path>, poses: &[Pose]) -> Result<()> {
    let path = path.as_ref();
    let file = PoseSeqFile {
        poses: poses
            .iter()
            .map(|p| PoseEntry {
                angles: p.angles.iter().flat_map(|a| a.to_array()).collect(),
                root_translation: p.root_translation.to_array(),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::format(path, e.to_string()))?;
    atomic_write(path, text.as_bytes())
}

pub fn load_pose_sequence(path: impl AsRef<Path>) -> Result<Vec<Pose>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: PoseSeqFile =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let mut poses = Vec::with_capacity(file.poses.len());
    for (i, entry) in file.poses.into_iter().enumerate() {
        if entry.angles.len() % 3 != 0 {
            return Err(Error::format(
                path,
                format!("pose {i} has {} angle floats, expected a multiple of 3", entry.angles.len()),
            ));
        }
        poses.push(Pose {
            angles: entry.angles.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect(),
            root_translation: Vec3::from_array(entry.root_translation),
        });
    }
    Ok(poses)
}

/// CSV loss trace, one row per iteration.
pub fn save_loss_trace(path: impl AsRef<Path>, rows: &[LossRow]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from("iteration,total,l_rgb,l_sil,l_vol\n");
    for row in rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            row.iteration, row.total, row.rgb, row.sil, row.vol
        ));
    }
    atomic_write(path, text.as_bytes())
}

pub fn load_loss_trace(path: impl AsRef<Path>) -> Result<Vec<LossRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != "iteration,total,l_rgb,l_sil,l_vol" {
        return Err(Error::format(path, "unexpected loss trace header"));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::format(path, format!("row {i} has {} fields", fields.len())));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::format(path, format!("bad number {s:?} in row {i}")))
        };
        rows.push(LossRow {
            iteration: fields[0]
                .parse()
                .map_err(|_| Error::format(path, format!("bad iteration in row {i}")))?,
            total: parse(fields[1])?,
            rgb: parse(fields[2])?,
            sil: parse(fields[3])?,
            vol: parse(fields[4])?,
        });
    }
    Ok(rows)
}

/// Reads a whole file; small convenience used by manifest re-runs.
pub fn read_bytes(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

pub(crate) fn listed_files(dir: &Path, extension: &str) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().is_some_and(|e| e == extension) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}
