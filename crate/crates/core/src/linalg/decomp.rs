use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Largest matrix order the dense oracle routines accept by default.
pub const DEFAULT_DENSE_CAP: usize = 4000;

/// Economy-size SVD `A = U diag(S) Vᵀ` of a tall matrix.
#[derive(Clone, Debug)]
pub struct EconSvd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

/// Thin SVD of an `L × K` matrix with `L ≥ K`; singular values descending.
pub fn econ_svd(a: &DenseMatrix) -> Result<EconSvd> {
    let (l, k) = a.shape();
    if l < k {
        return Err(Error::shape("econ_svd", format!("rows >= {k}"), format!("{l} rows")));
    }
    if k == 0 {
        return Ok(EconSvd {
            u: DenseMatrix::zeros(l, 0),
            s: Vec::new(),
            v: DenseMatrix::zeros(0, 0),
        });
    }
    let svd = a.to_nalgebra().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s = order.iter().map(|&i| svd.singular_values[i].max(0.0)).collect();
    let u = DenseMatrix::from_fn(l, k, |r, c| u[(r, order[c])]);
    let v = DenseMatrix::from_fn(k, k, |r, c| vt[(order[c], r)]);
    Ok(EconSvd { u, s, v })
}

/// Orthonormal polar factor `U Vᵀ` of a tall matrix, with its singular values.
pub fn polar_factor(a: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>)> {
    let svd = econ_svd(a)?;
    let g = svd.u.matmul(&svd.v.transpose())?;
    Ok((g, svd.s))
}

/// Top-`k` eigenvectors of a symmetric matrix and its full spectrum (both descending).
#[derive(Clone, Debug)]
pub struct SymEig {
    pub vectors: DenseMatrix,
    pub values: Vec<f64>,
}

/// Dense symmetric eigen-decomposition; `m` is symmetrized as `(M + Mᵀ)/2`.
pub fn sym_eig_topk(m: &DenseMatrix, k: usize) -> Result<SymEig> {
    sym_eig_topk_capped(m, k, DEFAULT_DENSE_CAP)
}

pub fn sym_eig_topk_capped(m: &DenseMatrix, k: usize, cap: usize) -> Result<SymEig> {
    let (n, c) = m.shape();
    if n != c {
        return Err(Error::shape("sym_eig_topk", "square matrix", format!("{n}x{c}")));
    }
    if n > cap {
        return Err(Error::Oversize { order: n, cap });
    }
    if k > n {
        return Err(Error::Parameter(format!("requested {k} eigenpairs of a {n}x{n} matrix")));
    }
    let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DenseMatrix::from_fn(n, k, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SymEig { vectors, values })
}

/// Largest singular value.
pub fn spectral_norm(a: &DenseMatrix) -> f64 {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return 0.0;
    }
    let m = if r >= c { a.to_nalgebra() } else { a.transpose().to_nalgebra() };
    m.singular_values().iter().fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Orthonormalized i.i.d. standard-normal `L × K` draw.
pub fn random_orthonormal(l: usize, k: usize, seed: u64) -> Result<DenseMatrix> {
    if l < k {
        return Err(Error::shape("random_orthonormal", format!("L >= K = {k}"), format!("L = {l}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = DMatrix::from_fn(l, k, |_, _| StandardNormal.sample(&mut rng));
    let q = draw.qr().q();
    Ok(DenseMatrix::from_fn(l, k, |i, j| q[(i, j)]))
}

/// Solves `A X = B` for symmetric positive definite `A` by Cholesky.
///
/// Fails with a conditioning error when `A` is not numerically positive definite.
pub fn spd_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    if a.cols() != n || b.rows() != n {
        return Err(Error::shape("spd_solve", format!("{n}x{n} system"), format!("{}x{} with rhs {} rows", a.rows(), a.cols(), b.rows())));
    }
    let chol = a
        .to_nalgebra()
        .cholesky()
        .ok_or_else(|| Error::Conditioning("matrix is not positive definite".into()))?;
    let diag: Vec<f64> = (0..n).map(|i| chol.l_dirty()[(i, i)]).collect();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    // squared pivot ratio approximates the reciprocal condition number
    if n > 0 && (lo / hi).powi(2) < 1e-15 {
        return Err(Error::Conditioning(format!(
            "reciprocal condition estimate {:.2e} below 1e-15",
            (lo / hi).powi(2)
        )));
    }
    let x = chol.solve(&b.to_nalgebra());
    Ok(DenseMatrix::from_nalgebra(&x))
}
