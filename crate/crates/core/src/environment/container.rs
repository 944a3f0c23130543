//! Environment container: a directory holding `manifest.toml` and five raw
//! little-endian blobs.
//!
//! | file         | type | axis order                 |
//! |--------------|------|----------------------------|
//! | `mean.bin`   | f32  | `[t][y][x][component]`     |
//! | `modes.bin`  | f32  | `[m][t][y][x][component]`  |
//! | `coeffs.bin` | f32  | `[t][r][m]`                |
//! | `scalar.bin` | f32  | `[t][y][x]`                |
//! | `mask.bin`   | u8   | `[t][y][x]`, 1 = restricted |

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DoVelocityField, Environment, GridSpec, ObstacleMask, ScalarMeanField};
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.toml";
pub const FORMAT: &str = "oceanmdp-environment";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub endianness: String,
    pub grid: GridSpec,
    pub n_modes: usize,
    pub n_realizations: usize,
    pub files: BlobNames,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobNames {
    pub mean: String,
    pub modes: String,
    pub coeffs: String,
    pub scalar: String,
    pub mask: String,
}

impl Default for BlobNames {
    fn default() -> Self {
        Self {
            mean: "mean.bin".into(),
            modes: "modes.bin".into(),
            coeffs: "coeffs.bin".into(),
            scalar: "scalar.bin".into(),
            mask: "mask.bin".into(),
        }
    }
}

pub(crate) fn f32_bytes(data: &[f32]) -> Vec<u8> {
    data.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub(crate) fn f32_from_bytes(path: &Path, bytes: &[u8], expected: usize) -> Result<Vec<f32>> {
    if bytes.len() != 4 * expected {
        return Err(Error::format(
            path,
            format!("expected {} bytes ({expected} f32), found {}", 4 * expected, bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes `env` into directory `dir`, creating it if needed.
pub fn save(env: &Environment, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = BlobNames::default();
    let v = &env.velocity;
    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        endianness: "little".into(),
        grid: *env.grid(),
        n_modes: v.n_modes(),
        n_realizations: v.n_realizations(),
        files: files.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    write_file(&dir.join(MANIFEST), text.as_bytes())?;
    write_file(&dir.join(&files.mean), &f32_bytes(v.mean()))?;
    write_file(&dir.join(&files.modes), &f32_bytes(v.modes()))?;
    write_file(&dir.join(&files.coeffs), &f32_bytes(v.coeffs()))?;
    write_file(&dir.join(&files.scalar), &f32_bytes(env.scalar.values()))?;
    let mask: Vec<u8> = env.obstacles.cells().iter().map(|&b| b as u8).collect();
    write_file(&dir.join(&files.mask), &mask)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if manifest.format != FORMAT || manifest.version != VERSION {
        return Err(Error::format(
            &path,
            format!("unsupported container {} v{}", manifest.format, manifest.version),
        ));
    }
    if manifest.endianness != "little" {
        return Err(Error::format(&path, format!("unsupported endianness {}", manifest.endianness)));
    }
    manifest.grid.validate()?;
    Ok(manifest)
}

pub fn load(dir: &Path) -> Result<Environment> {
    let m = read_manifest(dir)?;
    let g = m.grid;
    let ng = g.n_states();
    let blob = |name: &str| -> (PathBuf, Result<Vec<u8>>) {
        let p = dir.join(name);
        let bytes = read_file(&p);
        (p, bytes)
    };

    let (p, b) = blob(&m.files.mean);
    let mean = f32_from_bytes(&p, &b?, 2 * ng)?;
    let (p, b) = blob(&m.files.modes);
    let modes = f32_from_bytes(&p, &b?, 2 * ng * m.n_modes)?;
    let (p, b) = blob(&m.files.coeffs);
    let coeffs = f32_from_bytes(&p, &b?, g.nt * m.n_realizations * m.n_modes)?;
    let (p, b) = blob(&m.files.scalar);
    let scalar = f32_from_bytes(&p, &b?, ng)?;
    let (p, b) = blob(&m.files.mask);
    let mask = b?;
    if mask.len() != ng {
        return Err(Error::format(&p, format!("expected {ng} mask bytes, found {}", mask.len())));
    }
    if let Some(k) = mask.iter().position(|&x| x > 1) {
        return Err(Error::format(&p, format!("mask byte {k} is {} (expected 0 or 1)", mask[k])));
    }

    let velocity = DoVelocityField::new(g, m.n_modes, m.n_realizations, mean, modes, coeffs)?;
    let scalar = ScalarMeanField::new(g, scalar)?;
    let obstacles = ObstacleMask::new(g, mask.into_iter().map(|x| x == 1).collect())?;
    Environment::new(velocity, scalar, obstacles)
}
