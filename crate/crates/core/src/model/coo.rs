/// One transition block `P_{a,t}` in coordinate format.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CooBlock {
    rows: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl CooBlock {
    pub fn from_parts(rows: Vec<u32>, cols: Vec<u32>, vals: Vec<f64>) -> Self {
        assert!(rows.len() == cols.len() && cols.len() == vals.len(), "COO arrays differ in length");
        Self { rows, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn rows(&self) -> &[u32] {
        &self.rows
    }

    pub fn cols(&self) -> &[u32] {
        &self.cols
    }

    pub fn vals(&self) -> &[f64] {
        &self.vals
    }

    /// Stored entries: row, column and value per nonzero.
    pub fn memory_entries(&self) -> usize {
        3 * self.nnz()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.rows
            .iter()
            .zip(&self.cols)
            .zip(&self.vals)
            .map(|((&r, &c), &v)| (r, c, v))
    }

    /// Rows ascending and, within a row, strictly ascending columns.
    pub fn is_canonical(&self) -> bool {
        self.rows
            .windows(2)
            .zip(self.cols.windows(2))
            .all(|(r, c)| r[0] < r[1] || (r[0] == r[1] && c[0] < c[1]))
    }

    /// `(row, sum of values)` for every row present, in row order.
    pub fn row_sums(&self) -> Vec<(u32, f64)> {
        let mut out: Vec<(u32, f64)> = Vec::new();
        for (r, _, v) in self.iter() {
            match out.last_mut() {
                Some((last, sum)) if *last == r => *sum += v,
                _ => out.push((r, v)),
            }
        }
        out
    }

    /// Offsets of each row `first_row..first_row + n_rows` into the entry
    /// arrays, or `None` if some row in that range has no entries or an
    /// entry lies outside it.
    pub(crate) fn row_offsets(&self, first_row: u32, n_rows: usize) -> Option<Vec<u32>> {
        let mut ptr = vec![0u32; n_rows + 1];
        for &r in &self.rows {
            let local = r.checked_sub(first_row)? as usize;
            if local >= n_rows {
                return None;
            }
            ptr[local + 1] += 1;
        }
        for k in 0..n_rows {
            if ptr[k + 1] == 0 {
                return None;
            }
            ptr[k + 1] += ptr[k];
        }
        Some(ptr)
    }
}
