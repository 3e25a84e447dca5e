//! Compressed sparse row storage and the kernels the solver pipeline needs:
//! products, transposes, block extraction and the Galerkin triple product.

use super::LinalgError;

/// Real sparse matrix in compressed-row form.
///
/// Column indices are strictly increasing inside every row and no explicit
/// zeros are stored once a matrix has been built through one of the
/// constructors below.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, checking the structural invariants.
    pub fn new(
        nrows: usize,
        ncols: usize,
        offsets: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, LinalgError> {
        if offsets.len() != nrows + 1 || offsets[0] != 0 {
            return Err(LinalgError::Structure("row offsets length/start".into()));
        }
        if indices.len() != values.len() || *offsets.last().unwrap() != indices.len() {
            return Err(LinalgError::Structure("offsets do not match entry count".into()));
        }
        for row in 0..nrows {
            let (lo, hi) = (offsets[row], offsets[row + 1]);
            if hi < lo {
                return Err(LinalgError::Structure(format!("offsets decrease at row {row}")));
            }
            for k in lo..hi {
                if indices[k] >= ncols {
                    return Err(LinalgError::Structure(format!(
                        "column {} out of range in row {row}",
                        indices[k]
                    )));
                }
                if k > lo && indices[k] <= indices[k - 1] {
                    return Err(LinalgError::Structure(format!(
                        "columns not strictly increasing in row {row}"
                    )));
                }
            }
        }
        Ok(Self { nrows, ncols, offsets, indices, values })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            offsets: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            offsets: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Assembles from (row, col, value) triplets. Duplicates are summed and
    /// entries that sum to exactly zero are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(LinalgError::Structure(format!(
                    "triplet ({i}, {j}) outside {nrows}x{ncols}"
                )));
            }
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            cols[cursor[i]] = j;
            vals[cursor[i]] = v;
            cursor[i] += 1;
        }

        let mut offsets = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        offsets.push(0);
        let mut row_buf: Vec<(usize, f64)> = Vec::new();
        for i in 0..nrows {
            row_buf.clear();
            row_buf.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            // stable sort keeps the summation order deterministic
            row_buf.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < row_buf.len() {
                let j = row_buf[k].0;
                let mut sum = 0.0;
                while k < row_buf.len() && row_buf[k].0 == j {
                    sum += row_buf[k].1;
                    k += 1;
                }
                if sum != 0.0 {
                    indices.push(j);
                    values.push(sum);
                }
            }
            offsets.push(indices.len());
        }
        Ok(Self { nrows, ncols, offsets, indices, values })
    }

    /// Converts a dense row-major matrix, keeping only nonzero entries.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        Self { nrows, ncols, offsets, indices, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of one row.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `y = A x`, accumulated left to right inside each row.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<(), LinalgError> {
        if x.len() != self.ncols || y.len() != self.nrows {
            return Err(LinalgError::DimensionMismatch {
                op: "spmv",
                expected: (self.nrows, self.ncols),
                found: (y.len(), x.len()),
            });
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            *yi = acc;
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut cursor = counts.clone();
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                indices[cursor[j]] = i;
                values[cursor[j]] = v;
                cursor[j] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            offsets: counts,
            indices,
            values,
        }
    }

    /// Sparse product `self * rhs` (row-by-row Gustavson). No drop tolerance;
    /// only entries that cancel to exactly zero are omitted.
    pub fn matmul(&self, rhs: &CsrMatrix) -> Result<Self, LinalgError> {
        if self.ncols != rhs.nrows {
            return Err(LinalgError::DimensionMismatch {
                op: "matmul",
                expected: (self.ncols, self.ncols),
                found: (rhs.nrows, rhs.ncols),
            });
        }
        let mut acc = vec![0.0; rhs.ncols];
        let mut marker = vec![usize::MAX; rhs.ncols];
        let mut pattern: Vec<usize> = Vec::new();
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.nrows {
            pattern.clear();
            let (acols, avals) = self.row(i);
            for (&k, &a) in acols.iter().zip(avals) {
                let (bcols, bvals) = rhs.row(k);
                for (&j, &b) in bcols.iter().zip(bvals) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = 0.0;
                        pattern.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            pattern.sort_unstable();
            for &j in &pattern {
                if acc[j] != 0.0 {
                    indices.push(j);
                    values.push(acc[j]);
                }
            }
            offsets.push(indices.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: rhs.ncols,
            offsets,
            indices,
            values,
        })
    }

    /// `alpha * self + beta * rhs`.
    pub fn add_scaled(&self, alpha: f64, rhs: &CsrMatrix, beta: f64) -> Result<Self, LinalgError> {
        if self.nrows != rhs.nrows || self.ncols != rhs.ncols {
            return Err(LinalgError::DimensionMismatch {
                op: "add",
                expected: (self.nrows, self.ncols),
                found: (rhs.nrows, rhs.ncols),
            });
        }
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.nrows {
            let (ac, av) = self.row(i);
            let (bc, bv) = rhs.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ac.len() || q < bc.len() {
                let (j, v) = if q == bc.len() || (p < ac.len() && ac[p] < bc[q]) {
                    p += 1;
                    (ac[p - 1], alpha * av[p - 1])
                } else if p == ac.len() || bc[q] < ac[p] {
                    q += 1;
                    (bc[q - 1], beta * bv[q - 1])
                } else {
                    p += 1;
                    q += 1;
                    (ac[p - 1], alpha * av[p - 1] + beta * bv[q - 1])
                };
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: self.ncols,
            offsets,
            indices,
            values,
        })
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out.drop_zeros();
        out
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut offsets = vec![0];
        let mut indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        self.offsets = offsets;
        self.indices = indices;
        self.values = values;
    }

    /// Copies the sub-block `rows x cols` (half-open ranges).
    pub fn submatrix(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Self {
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in rows.clone() {
            let (rc, rv) = self.row(i);
            let lo = rc.partition_point(|&j| j < cols.start);
            let hi = rc.partition_point(|&j| j < cols.end);
            for k in lo..hi {
                indices.push(rc[k] - cols.start);
                values.push(rv[k]);
            }
            offsets.push(indices.len());
        }
        Self {
            nrows: rows.len(),
            ncols: cols.len(),
            offsets,
            indices,
            values,
        }
    }

    /// Places blocks at the given (row, col) offsets of an `nrows x ncols`
    /// matrix, summing where blocks overlap.
    pub fn from_blocks(
        nrows: usize,
        ncols: usize,
        blocks: &[(usize, usize, &CsrMatrix)],
    ) -> Result<Self, LinalgError> {
        let mut triplets = Vec::with_capacity(blocks.iter().map(|b| b.2.nnz()).sum());
        for &(r0, c0, block) in blocks {
            triplets.extend(block.triplets().map(|(i, j, v)| (r0 + i, c0 + j, v)));
        }
        Self::from_triplets(nrows, ncols, &triplets)
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let t = self.transpose();
        match self.add_scaled(1.0, &t, -1.0) {
            Ok(d) => d.max_abs(),
            Err(_) => f64::INFINITY,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            out[i][j] = v;
        }
        out
    }

    /// Kronecker product with the `dim x dim` identity, i.e. every scalar
    /// entry becomes `a_ij * I`.
    pub fn kron_identity(&self, dim: usize) -> Self {
        let mut offsets = vec![0];
        let mut indices = Vec::with_capacity(self.nnz() * dim);
        let mut values = Vec::with_capacity(self.nnz() * dim);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for c in 0..dim {
                for (&j, &v) in cols.iter().zip(vals) {
                    indices.push(dim * j + c);
                    values.push(v);
                }
                offsets.push(indices.len());
            }
        }
        Self {
            nrows: self.nrows * dim,
            ncols: self.ncols * dim,
            offsets,
            indices,
            values,
        }
    }
}

/// Galerkin triple product `F A F^T`, computed exactly and then symmetrized
/// by averaging with its transpose.
pub fn sparse_triple_product(f: &CsrMatrix, a: &CsrMatrix) -> Result<CsrMatrix, LinalgError> {
    if f.ncols() != a.nrows() || a.nrows() != a.ncols() {
        return Err(LinalgError::DimensionMismatch {
            op: "triple product",
            expected: (f.ncols(), f.ncols()),
            found: (a.nrows(), a.ncols()),
        });
    }
    let fa = f.matmul(a)?;
    let fat = fa.matmul(&f.transpose())?;
    let t = fat.transpose();
    fat.add_scaled(0.5, &t, 0.5)
}
