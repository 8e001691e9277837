use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Compressed sparse row matrix.
///
/// Column indices are strictly increasing within each row and explicit zeros
/// are allowed but never produced by the constructors here.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Validates raw CSR arrays.
    pub fn try_new(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != rows + 1 || indptr[0] != 0 {
            return Err(Error::Parameter(format!(
                "row pointer must have {} entries starting at 0",
                rows + 1
            )));
        }
        if indices.len() != values.len() || *indptr.last().unwrap() != values.len() {
            return Err(Error::Parameter(
                "index, value and row pointer lengths disagree".into(),
            ));
        }
        for r in 0..rows {
            let (lo, hi) = (indptr[r], indptr[r + 1]);
            if lo > hi {
                return Err(Error::Parameter(format!("row pointer decreases at row {r}")));
            }
            let row = &indices[lo..hi];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Parameter(format!(
                    "column indices not strictly increasing in row {r}"
                )));
            }
            if row.last().is_some_and(|&c| c >= cols) {
                return Err(Error::Parameter(format!("column index out of range in row {r}")));
            }
        }
        Ok(SparseMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut trips: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, _) in &trips {
            if r >= rows || c >= cols {
                return Err(Error::Parameter(format!(
                    "entry ({r}, {c}) outside a {rows}x{cols} matrix"
                )));
            }
        }
        trips.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(trips.len());
        let mut values: Vec<f64> = Vec::with_capacity(trips.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trips {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(SparseMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    /// Stores every nonzero entry of a dense matrix.
    pub fn from_dense(d: &DenseMatrix) -> Self {
        let mut indptr = Vec::with_capacity(d.rows() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..d.rows() {
            for (j, &v) in d.row(i).iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(values.len());
        }
        SparseMatrix {
            rows: d.rows(),
            cols: d.cols(),
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn density(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        self.nnz() as f64 / (self.rows as f64 * self.cols as f64)
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column indices and values of row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            d[(r, c)] = v;
        }
        d
    }

    /// `self · d`, streaming each row once: O(nnz · d.cols()).
    pub fn mul_dense(&self, d: &DenseMatrix) -> Result<DenseMatrix> {
        if d.rows() != self.cols {
            return Err(Error::shape(
                "spmm",
                format!("dense operand with {} rows", self.cols),
                format!("{} rows", d.rows()),
            ));
        }
        let k = d.cols();
        let mut out = DenseMatrix::zeros(self.rows, k);
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let orow = out.row_mut(r);
            for (&c, &v) in cols.iter().zip(vals) {
                for (o, x) in orow.iter_mut().zip(d.row(c)) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · d` by scattering rows; no transposed copy is formed.
    pub fn t_mul_dense(&self, d: &DenseMatrix) -> Result<DenseMatrix> {
        if d.rows() != self.rows {
            return Err(Error::shape(
                "spmm_t",
                format!("dense operand with {} rows", self.rows),
                format!("{} rows", d.rows()),
            ));
        }
        let k = d.cols();
        let mut out = DenseMatrix::zeros(self.cols, k);
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let drow = d.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                for (o, x) in out.row_mut(c).iter_mut().zip(drow) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }

    fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            *o = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    fn t_mul_vec(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, &yr) in y.iter().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[c] += v * yr;
            }
        }
    }

    /// Sparse · sparse product (row-by-row accumulation with a dense scratch row).
    pub fn mul_sparse(&self, rhs: &SparseMatrix) -> Result<SparseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::shape(
                "mul_sparse",
                format!("rhs with {} rows", self.cols),
                format!("{} rows", rhs.rows),
            ));
        }
        let mut acc = vec![0.0; rhs.cols];
        let mut mark = vec![usize::MAX; rhs.cols];
        let mut touched: Vec<usize> = Vec::new();
        let mut indptr = Vec::with_capacity(self.rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in 0..self.rows {
            touched.clear();
            let (acols, avals) = self.row(r);
            for (&k, &a) in acols.iter().zip(avals) {
                let (bcols, bvals) = rhs.row(k);
                for (&c, &b) in bcols.iter().zip(bvals) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                if acc[c] != 0.0 {
                    indices.push(c);
                    values.push(acc[c]);
                }
            }
            indptr.push(values.len());
        }
        Ok(SparseMatrix {
            rows: self.rows,
            cols: rhs.cols,
            indptr,
            indices,
            values,
        })
    }

    /// Elementwise sum of two equally shaped matrices.
    pub fn add(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::shape(
                "sparse add",
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let mut indptr = Vec::with_capacity(self.rows + 1);
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        indptr.push(0);
        for r in 0..self.rows {
            let (ac, av) = self.row(r);
            let (bc, bv) = other.row(r);
            let (mut i, mut j) = (0, 0);
            while i < ac.len() || j < bc.len() {
                let (c, v) = if j >= bc.len() || (i < ac.len() && ac[i] < bc[j]) {
                    i += 1;
                    (ac[i - 1], av[i - 1])
                } else if i >= ac.len() || bc[j] < ac[i] {
                    j += 1;
                    (bc[j - 1], bv[j - 1])
                } else {
                    i += 1;
                    j += 1;
                    (ac[i - 1], av[i - 1] + bv[j - 1])
                };
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(values.len());
        }
        Ok(SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        })
    }

    /// Horizontal concatenation `[self, other]`.
    pub fn hstack(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "hstack",
                format!("{} rows", self.rows),
                format!("{} rows", other.rows),
            ));
        }
        let mut indptr = Vec::with_capacity(self.rows + 1);
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        indptr.push(0);
        for r in 0..self.rows {
            let (ac, av) = self.row(r);
            indices.extend_from_slice(ac);
            values.extend_from_slice(av);
            let (bc, bv) = other.row(r);
            indices.extend(bc.iter().map(|c| c + self.cols));
            values.extend_from_slice(bv);
            indptr.push(values.len());
        }
        Ok(SparseMatrix {
            rows: self.rows,
            cols: self.cols + other.cols,
            indptr,
            indices,
            values,
        })
    }

    /// Keeps only the listed columns, renumbered in the given (sorted) order.
    pub fn select_columns(&self, keep: &[usize]) -> SparseMatrix {
        let mut map = vec![usize::MAX; self.cols];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut indptr = Vec::with_capacity(self.rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let mut row: Vec<(usize, f64)> = cols
                .iter()
                .zip(vals)
                .filter(|(&c, _)| map[c] != usize::MAX)
                .map(|(&c, &v)| (map[c], v))
                .collect();
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                indices.push(c);
                values.push(v);
            }
            indptr.push(values.len());
        }
        SparseMatrix {
            rows: self.rows,
            cols: keep.len(),
            indptr,
            indices,
            values,
        }
    }
}

/// One data view `X_i` (L × M_i) with a cached Lipschitz constant of the
/// least-squares gradient, `λ_max(X_iᵀ X_i)`.
#[derive(Clone, Debug)]
pub struct ViewMatrix {
    pub id: usize,
    pub matrix: SparseMatrix,
    pub lipschitz: Option<f64>,
}

/// Relative inflation applied to the power-iteration estimate before it is cached.
pub const LIPSCHITZ_INFLATION: f64 = 1.01;
pub const LIPSCHITZ_TOL: f64 = 1e-6;
pub const LIPSCHITZ_MAX_ITERS: usize = 500;

impl ViewMatrix {
    pub fn new(id: usize, matrix: SparseMatrix) -> Self {
        ViewMatrix {
            id,
            matrix,
            lipschitz: None,
        }
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    /// Returns the cached (inflated) Lipschitz constant, estimating it first if needed.
    pub fn ensure_lipschitz(&mut self, seed: u64) -> f64 {
        if let Some(l) = self.lipschitz {
            return l;
        }
        let est = estimate_lipschitz(self, LIPSCHITZ_TOL, LIPSCHITZ_MAX_ITERS, seed)
            .expect("tolerance constant is positive");
        let l = est * LIPSCHITZ_INFLATION;
        self.lipschitz = Some(l);
        l
    }
}

/// `X_i · D`
pub fn spmm(view: &ViewMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
    view.matrix.mul_dense(d)
}

/// `X_iᵀ · D`
pub fn spmm_t(view: &ViewMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
    view.matrix.t_mul_dense(d)
}

/// Power iteration on `v ↦ Xᵀ(Xv)` for `λ_max(XᵀX)`.
///
/// Stops once the Rayleigh quotient changes by less than `tol` relative.
/// The returned value is the Rayleigh quotient of the final iterate, so it
/// never exceeds the true eigenvalue.
pub fn estimate_lipschitz(view: &ViewMatrix, tol: f64, max_iters: usize, seed: u64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("power-iteration tolerance must be positive, got {tol}")));
    }
    let x = &view.matrix;
    if x.nnz() == 0 || x.cols() == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..x.cols()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut xv = vec![0.0; x.rows()];
    let mut w = vec![0.0; x.cols()];
    normalize(&mut v);
    let mut lambda = 0.0;
    for it in 0..max_iters.max(1) {
        x.mul_vec(&v, &mut xv);
        x.t_mul_vec(&xv, &mut w);
        let next: f64 = xv.iter().map(|a| a * a).sum();
        if next == 0.0 {
            // started orthogonal to the row space; the seeded start makes this measure-zero
            return Ok(0.0);
        }
        let converged = it > 0 && (next - lambda).abs() <= tol * next;
        lambda = next;
        if converged {
            break;
        }
        v.copy_from_slice(&w);
        normalize(&mut v);
    }
    Ok(lambda)
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|a| *a /= n);
    }
}

/// The I views of one problem, all sharing the row count L.
#[derive(Clone, Debug)]
pub struct ViewCollection {
    views: Vec<ViewMatrix>,
}

impl ViewCollection {
    pub fn new(views: Vec<ViewMatrix>) -> Result<Self> {
        let first = views
            .first()
            .ok_or_else(|| Error::Parameter("at least one view is required".into()))?;
        let l = first.rows();
        if let Some(bad) = views.iter().find(|v| v.rows() != l) {
            return Err(Error::shape(
                "ViewCollection",
                format!("{l} rows in every view"),
                format!("{} rows in view {}", bad.rows(), bad.id),
            ));
        }
        Ok(ViewCollection { views })
    }

    pub fn from_matrices(mats: Vec<SparseMatrix>) -> Result<Self> {
        Self::new(
            mats.into_iter()
                .enumerate()
                .map(|(i, m)| ViewMatrix::new(i, m))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.views[0].rows()
    }

    pub fn views(&self) -> &[ViewMatrix] {
        &self.views
    }

    pub fn views_mut(&mut self) -> &mut [ViewMatrix] {
        &mut self.views
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ViewMatrix> {
        self.views.iter()
    }

    /// Estimates and caches every missing Lipschitz constant.
    pub fn ensure_lipschitz(&mut self, seed: u64) -> Vec<f64> {
        self.views
            .iter_mut()
            .map(|v| {
                let s = seed ^ (v.id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                v.ensure_lipschitz(s)
            })
            .collect()
    }
}

impl std::ops::Index<usize> for ViewCollection {
    type Output = ViewMatrix;

    fn index(&self, i: usize) -> &ViewMatrix {
        &self.views[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view(m: SparseMatrix) -> ViewMatrix {
        ViewMatrix::new(0, m)
    }

    #[test]
    fn spmm_identity_and_single_entry() {
        let d = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(spmm(&view(SparseMatrix::identity(2)), &d).unwrap(), d);

        let x = SparseMatrix::from_triplets(2, 2, [(0, 1, 3.0)]).unwrap();
        let out = spmm(&view(x), &DenseMatrix::from_rows(&[[1.0], [2.0]])).unwrap();
        assert_eq!(out, DenseMatrix::from_rows(&[[6.0], [0.0]]));
    }

    #[test]
    fn spmm_t_identity_and_single_entry() {
        let d = DenseMatrix::from_rows(&[[1.0, -2.0], [0.5, 4.0]]);
        assert_eq!(spmm_t(&view(SparseMatrix::identity(2)), &d).unwrap(), d);

        let x = SparseMatrix::from_triplets(2, 2, [(0, 1, 3.0)]).unwrap();
        let out = spmm_t(&view(x), &DenseMatrix::from_rows(&[[1.0], [1.0]])).unwrap();
        assert_eq!(out, DenseMatrix::from_rows(&[[0.0], [3.0]]));
    }

    #[test]
    fn spmm_rejects_mismatched_operand() {
        let v = view(SparseMatrix::identity(3));
        assert!(matches!(spmm(&v, &DenseMatrix::zeros(2, 1)), Err(Error::Shape { .. })));
        assert!(matches!(spmm_t(&v, &DenseMatrix::zeros(4, 1)), Err(Error::Shape { .. })));
    }

    #[test]
    fn lipschitz_of_diagonal_and_zero() {
        let x = SparseMatrix::from_triplets(2, 2, [(0, 0, 2.0), (1, 1, 1.0)]).unwrap();
        let l = estimate_lipschitz(&view(x), 1e-14, 10_000, 3).unwrap();
        assert!((l - 4.0).abs() <= 1e-8, "{l}");

        let z = SparseMatrix::zeros(3, 2);
        assert_eq!(estimate_lipschitz(&view(z), 1e-6, 100, 3).unwrap(), 0.0);
    }

    #[test]
    fn lipschitz_rejects_nonpositive_tolerance() {
        let v = view(SparseMatrix::identity(2));
        assert!(estimate_lipschitz(&v, 0.0, 10, 1).is_err());
    }

    #[test]
    fn triplets_sum_duplicates_and_validate() {
        let m = SparseMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 0, 1.0), (1, 0, -1.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.to_dense(), DenseMatrix::from_rows(&[[2.0, 0.0], [-1.0, 0.0]]));
        assert!(SparseMatrix::from_triplets(2, 2, [(2, 0, 1.0)]).is_err());
        assert!(SparseMatrix::try_new(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn sparse_products_match_dense() {
        let a = SparseMatrix::from_triplets(3, 2, [(0, 0, 1.0), (1, 1, 2.0), (2, 0, -1.0), (2, 1, 3.0)]).unwrap();
        let b = SparseMatrix::from_triplets(2, 3, [(0, 2, 4.0), (1, 0, 1.0), (1, 1, -2.0)]).unwrap();
        let prod = a.mul_sparse(&b).unwrap().to_dense();
        let want = a.to_dense().matmul(&b.to_dense()).unwrap();
        assert_eq!(prod, want);
        let sum = a.add(&a).unwrap().to_dense();
        assert_eq!(sum, a.to_dense().scaled(2.0));
        let h = a.hstack(&a).unwrap();
        assert_eq!(h.cols(), 4);
        assert_eq!(h.select_columns(&[2, 3]).to_dense(), a.to_dense());
    }

    #[test]
    fn view_collection_requires_equal_rows() {
        let r = ViewCollection::from_matrices(vec![SparseMatrix::zeros(3, 2), SparseMatrix::zeros(4, 2)]);
        assert!(r.is_err());
        assert!(ViewCollection::from_matrices(vec![]).is_err());
    }
}
