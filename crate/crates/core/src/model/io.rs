//! Binary model file, all little-endian:
//!
//! ```text
//! magic      4 bytes  "OMDP"
//! version    u32      1
//! n_states   u32      N_g + 1 (sink included)
//! n_actions  u32
//! nt         u32
//! nnz_total  u64
//! offsets    u64 x (n_actions * nt + 1)   entry offset of block (a, t) at a*nt + t
//! blocks     per block: rows u32 x nnz, cols u32 x nnz, vals f32 x nnz
//! rewards    f32 x (n_actions * N_g)      action-major, then state
//! ```

use std::path::Path;

use super::{CooBlock, SparseModel};
use crate::environment::container::{read_file, write_file};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OMDP";
pub const VERSION: u32 = 1;

pub fn to_bytes(model: &SparseModel) -> Vec<u8> {
    let nb = model.n_actions() * model.nt();
    let nnz = model.nnz();
    let mut out = Vec::with_capacity(28 + 8 * (nb + 1) + 12 * nnz + 4 * model.rewards().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(model.n_states() as u32).to_le_bytes());
    out.extend_from_slice(&(model.n_actions() as u32).to_le_bytes());
    out.extend_from_slice(&(model.nt() as u32).to_le_bytes());
    out.extend_from_slice(&(nnz as u64).to_le_bytes());
    let mut offset = 0u64;
    out.extend_from_slice(&offset.to_le_bytes());
    for b in model.blocks() {
        offset += b.nnz() as u64;
        out.extend_from_slice(&offset.to_le_bytes());
    }
    for b in model.blocks() {
        b.rows().iter().for_each(|r| out.extend_from_slice(&r.to_le_bytes()));
        b.cols().iter().for_each(|c| out.extend_from_slice(&c.to_le_bytes()));
        b.vals().iter().for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes()));
    }
    model
        .rewards()
        .iter()
        .for_each(|r| out.extend_from_slice(&(*r as f32).to_le_bytes()));
    out
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(self.path, format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn u32s(&mut self, n: usize, what: &str) -> Result<Vec<u32>> {
        Ok(self
            .take(4 * n, what)?
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        Ok(self
            .take(4 * n, what)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }
}

/// Parses a model file image. Only the layout is checked here; see
/// [`SparseModel::check`] for the probabilistic invariants.
pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<SparseModel> {
    let mut rd = Reader { path, bytes, pos: 0 };
    if rd.take(4, "magic")? != MAGIC {
        return Err(Error::format(path, "bad magic (not a model file)"));
    }
    let version = rd.u32("version")?;
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported model version {version}")));
    }
    let n_states = rd.u32("n_states")? as usize;
    let n_actions = rd.u32("n_actions")? as usize;
    let nt = rd.u32("nt")? as usize;
    let nnz_total = rd.u64("nnz_total")? as usize;
    if n_states < 2 || nt == 0 || n_actions == 0 || (n_states - 1) % nt != 0 {
        return Err(Error::format(
            path,
            format!("inconsistent header: n_states={n_states}, n_actions={n_actions}, nt={nt}"),
        ));
    }
    let n_cells = (n_states - 1) / nt;
    let nb = n_actions * nt;
    let offsets = (0..=nb)
        .map(|k| rd.u64(&format!("offset {k}")).map(|o| o as usize))
        .collect::<Result<Vec<_>>>()?;
    if offsets[0] != 0 || offsets[nb] != nnz_total || offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::format(path, "block offsets are not a prefix sum of nnz_total"));
    }
    let mut blocks = Vec::with_capacity(nb);
    for k in 0..nb {
        let n = offsets[k + 1] - offsets[k];
        let rows = rd.u32s(n, "block rows")?;
        let cols = rd.u32s(n, "block cols")?;
        let vals = rd.f32s(n, "block vals")?;
        if let Some(&c) = cols.iter().chain(&rows).find(|&&c| c as usize >= n_states) {
            return Err(Error::format(path, format!("index {c} out of range in block {k}")));
        }
        blocks.push(CooBlock::from_parts(rows, cols, vals));
    }
    let rewards = rd.f32s(n_actions * (n_states - 1), "rewards")?;
    if rd.pos != bytes.len() {
        return Err(Error::format(path, format!("{} trailing bytes", bytes.len() - rd.pos)));
    }
    SparseModel::from_parts(n_cells, nt, n_actions, blocks, rewards)
}

pub fn write(model: &SparseModel, path: &Path) -> Result<()> {
    write_file(path, &to_bytes(model))
}

pub fn read(path: &Path) -> Result<SparseModel> {
    from_bytes(&read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> SparseModel {
        let b0 = CooBlock::from_parts(vec![0, 0, 1], vec![2, 4, 3], vec![0.25, 0.75, 1.0]);
        let b1 = CooBlock::from_parts(vec![2, 3], vec![4, 4], vec![1.0, 1.0]);
        let b2 = CooBlock::from_parts(vec![0, 1], vec![4, 4], vec![1.0, 1.0]);
        let b3 = CooBlock::from_parts(vec![2, 3], vec![4, 4], vec![1.0, 1.0]);
        SparseModel::from_parts(2, 2, 2, vec![b0, b1, b2, b3], vec![-1.0, 2.5, 0.0, -3.0, 1.0, 1.0, 1.0, 1.0])
            .unwrap()
    }

    #[test]
    fn round_trip_exact_for_f32_representable_values() {
        let m = model();
        let bytes = to_bytes(&m);
        assert_eq!(from_bytes(&bytes, Path::new("mem")).unwrap(), m);
    }

    #[test]
    fn header_layout() {
        let bytes = to_bytes(&model());
        assert_eq!(&bytes[0..4], b"OMDP");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 5);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[20..28].try_into().unwrap()), 9);
        // offsets 0, 3, 5, 7, 9
        let offs: Vec<u64> = bytes[28..68]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(offs, vec![0, 3, 5, 7, 9]);
        assert_eq!(bytes.len(), 68 + 12 * 9 + 4 * 8);
    }

    #[test]
    fn corrupted_images_are_rejected() {
        let bytes = to_bytes(&model());
        let p = Path::new("mem");
        assert!(from_bytes(&bytes[..bytes.len() - 1], p).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(&bad, p).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(from_bytes(&extra, p).is_err());
        let mut oob = bytes;
        // first col of block 0 -> 99
        let col0 = 68 + 3 * 4;
        oob[col0..col0 + 4].copy_from_slice(&99u32.to_le_bytes());
        assert!(from_bytes(&oob, p).is_err());
    }
}
