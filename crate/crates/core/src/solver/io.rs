//! Policy file, little-endian:
//!
//! ```text
//! magic     4 bytes  "OPOL"
//! version   u32      1
//! n_states  u32      N_g + 1 (sink included)
//! values    f32 x n_states
//! actions   u16 x (n_states - 1)
//! ```

use std::path::Path;

use super::PolicyValue;
use crate::environment::container::{read_file, write_file};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OPOL";
pub const VERSION: u32 = 1;

/// Values and actions as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyFile {
    pub values: Vec<f32>,
    pub actions: Vec<u16>,
}

impl PolicyFile {
    pub fn from_policy(pv: &PolicyValue) -> Self {
        Self {
            values: pv.values.iter().map(|&v| v as f32).collect(),
            actions: pv.actions.clone(),
        }
    }
}

pub fn to_bytes(pv: &PolicyValue) -> Result<Vec<u8>> {
    if pv.actions.len() + 1 != pv.values.len() {
        return Err(Error::Contract(format!(
            "policy has {} actions for {} values; extract the policy before writing",
            pv.actions.len(),
            pv.values.len()
        )));
    }
    let mut out = Vec::with_capacity(12 + 4 * pv.values.len() + 2 * pv.actions.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(pv.values.len() as u32).to_le_bytes());
    pv.values
        .iter()
        .for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes()));
    pv.actions.iter().for_each(|a| out.extend_from_slice(&a.to_le_bytes()));
    Ok(out)
}

pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<PolicyFile> {
    if bytes.len() < 12 || &bytes[0..4] != MAGIC {
        return Err(Error::format(path, "bad magic (not a policy file)"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported policy version {version}")));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if n == 0 || bytes.len() != 12 + 4 * n + 2 * (n - 1) {
        return Err(Error::format(
            path,
            format!("{} bytes do not match n_states = {n}", bytes.len()),
        ));
    }
    let (vals, acts) = bytes[12..].split_at(4 * n);
    Ok(PolicyFile {
        values: vals
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        actions: acts
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    })
}

pub fn write(pv: &PolicyValue, path: &Path) -> Result<()> {
    write_file(path, &to_bytes(pv)?)
}

pub fn read(path: &Path) -> Result<PolicyFile> {
    from_bytes(&read_file(path)?, path)
}
