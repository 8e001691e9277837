//! Exact eigen-decomposition solution, the rank-truncated MVLSA baseline,
//! and the subspace-distance / linear-rate diagnostics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    econ_svd, polar_factor, spd_solve, spectral_norm, sym_eig_topk_capped, DenseMatrix, SparseMatrix,
    ViewCollection, DEFAULT_DENSE_CAP,
};
use crate::regularizers::{reg_value, RegularizerKind, RegularizerSpec};

/// Randomized truncated SVD: block power iterations.
pub const RSVD_POWER_ITERS: usize = 20;
/// Randomized truncated SVD: extra columns beyond the target rank.
pub const RSVD_OVERSAMPLE: usize = 10;

#[derive(Clone, Debug)]
pub struct EigenOracleResult {
    pub g_opt: DenseMatrix,
    pub u1: DenseMatrix,
    /// Full spectrum of `M`, descending.
    pub eigvals: Vec<f64>,
    pub f_opt: f64,
    /// `λ_{K+1} / λ_K` (zero when `K = L`).
    pub ratio: f64,
    /// `Q_i = (X_iᵀX_i + μ_i I)⁻¹ X_iᵀ G_opt`
    pub q_opt: Vec<DenseMatrix>,
}

fn ridge_weights(regs: &[RegularizerSpec], views: usize) -> Result<Vec<f64>> {
    if regs.len() != 1 && regs.len() != views {
        return Err(Error::Parameter(format!("expected 1 or {views} regularizers, got {}", regs.len())));
    }
    (0..views)
        .map(|i| {
            let r = if regs.len() == 1 { &regs[0] } else { &regs[i] };
            match r.kind {
                RegularizerKind::None => Ok(0.0),
                RegularizerKind::Ridge => Ok(r.mu),
                other => Err(Error::Parameter(format!(
                    "closed-form solution needs ridge or no regularization, got {other:?}"
                ))),
            }
        })
        .collect()
}

/// `(XᵀX + μI)⁻¹ Xᵀ B` via a dense Cholesky solve.
fn ridge_solve(x: &SparseMatrix, mu: f64, b: &DenseMatrix, cap: usize) -> Result<DenseMatrix> {
    if x.cols() > cap {
        return Err(Error::Oversize { order: x.cols(), cap });
    }
    let xd = x.to_dense();
    let mut gram = xd.t_matmul(&xd)?;
    let n = gram.cols();
    for j in 0..n {
        gram.as_mut_slice()[j * n + j] += mu;
    }
    let rhs = x.t_mul_dense(b)?;
    spd_solve(&gram, &rhs)
}

fn ridge_objective(views: &ViewCollection, mus: &[f64], g: &DenseMatrix, q: &[DenseMatrix]) -> Result<f64> {
    let mut f = 0.0;
    for ((v, qi), &mu) in views.iter().zip(q).zip(mus) {
        f += 0.5 * v.matrix.mul_dense(qi)?.dist_sq(g)?;
        f += reg_value(&RegularizerSpec::ridge(mu), qi);
    }
    Ok(f)
}

/// Global solution of the ridge-regularized problem from the top-`K`
/// eigenvectors of `M = Σ_i X_i (X_iᵀX_i + μ_i I)⁻¹ X_iᵀ`.
///
/// `M` is formed densely, so `L` (and each `M_i`) must stay under the dense cap.
pub fn eigen_maxvar(views: &ViewCollection, regs: &[RegularizerSpec], k: usize) -> Result<EigenOracleResult> {
    eigen_maxvar_capped(views, regs, k, DEFAULT_DENSE_CAP)
}

pub fn eigen_maxvar_capped(
    views: &ViewCollection,
    regs: &[RegularizerSpec],
    k: usize,
    cap: usize,
) -> Result<EigenOracleResult> {
    let l = views.rows();
    if l > cap {
        return Err(Error::Oversize { order: l, cap });
    }
    if k == 0 || k > l {
        return Err(Error::Parameter(format!("K must satisfy 1 <= K <= L = {l}, got {k}")));
    }
    let mus = ridge_weights(regs, views.len())?;
    let parts = views
        .views()
        .par_iter()
        .zip(&mus)
        .map(|(v, &mu)| {
            let x = &v.matrix;
            let eye = DenseMatrix::identity(l);
            let w = ridge_solve(x, mu, &eye, cap)?;
            x.mul_dense(&w)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut m = DenseMatrix::zeros(l, l);
    for p in &parts {
        m.axpy(1.0, p)?;
    }
    drop(parts);
    let eig = sym_eig_topk_capped(&m, k, cap)?;
    let u1 = eig.vectors;
    let g_opt = u1.clone();
    let q_opt = views
        .iter()
        .zip(&mus)
        .map(|(v, &mu)| ridge_solve(&v.matrix, mu, &g_opt, cap))
        .collect::<Result<Vec<_>>>()?;
    let f_opt = ridge_objective(views, &mus, &g_opt, &q_opt)?;
    let ratio = if k < l { eig.values[k] / eig.values[k - 1] } else { 0.0 };
    Ok(EigenOracleResult {
        g_opt,
        u1,
        eigvals: eig.values,
        f_opt,
        ratio,
        q_opt,
    })
}

/// Best ridge `Q_i` for a fixed `G` and the objective there.
pub fn ridge_refit(
    views: &ViewCollection,
    regs: &[RegularizerSpec],
    g: &DenseMatrix,
) -> Result<(f64, Vec<DenseMatrix>)> {
    let mus = ridge_weights(regs, views.len())?;
    let q = views
        .iter()
        .zip(&mus)
        .map(|(v, &mu)| ridge_solve(&v.matrix, mu, g, DEFAULT_DENSE_CAP))
        .collect::<Result<Vec<_>>>()?;
    let f = ridge_objective(views, &mus, g, &q)?;
    Ok((f, q))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MvlsaConfig {
    /// Per-view truncation rank.
    pub p: usize,
    pub mu: f64,
    pub seed: u64,
}

/// Rank-`p` left singular pairs of `x`: dense SVD when both dimensions fit
/// under `cap`, randomized block power iteration otherwise.
pub fn truncated_svd(x: &SparseMatrix, p: usize, seed: u64, cap: usize) -> Result<(DenseMatrix, Vec<f64>)> {
    let (l, m) = (x.rows(), x.cols());
    if p == 0 || p > l.min(m) {
        return Err(Error::Parameter(format!("truncation rank {p} outside 1..={}", l.min(m))));
    }
    if l <= cap && m <= cap {
        let svd = x.to_dense().to_nalgebra().svd(true, false);
        let u = svd.u.expect("requested U");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let s = order[..p].iter().map(|&i| svd.singular_values[i]).collect();
        return Ok((DenseMatrix::from_fn(l, p, |r, c| u[(r, order[c])]), s));
    }
    randomized_svd(x, p, seed)
}

fn orthonormal_basis(a: &DenseMatrix) -> DenseMatrix {
    let q = a.to_nalgebra().qr().q();
    DenseMatrix::from_nalgebra(&q)
}

fn randomized_svd(x: &SparseMatrix, p: usize, seed: u64) -> Result<(DenseMatrix, Vec<f64>)> {
    let (l, m) = (x.rows(), x.cols());
    let width = (p + RSVD_OVERSAMPLE).min(l.min(m));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DenseMatrix::from_fn(m, width, |_, _| StandardNormal.sample(&mut rng));
    let mut y = orthonormal_basis(&x.mul_dense(&omega)?);
    for _ in 0..RSVD_POWER_ITERS {
        let z = orthonormal_basis(&x.t_mul_dense(&y)?);
        y = orthonormal_basis(&x.mul_dense(&z)?);
    }
    // Xᵀ Y = W S Vᵀ  ⇒  X ≈ (Y V) S Wᵀ
    let bt = x.t_mul_dense(&y)?;
    let svd = econ_svd(&bt)?;
    let u = y.matmul(&svd.v)?;
    Ok((u.leading_columns(p), svd.s[..p].to_vec()))
}

/// MVLSA: truncate each view to rank `P`, then take the top-`K` left singular
/// vectors of `W = [U_1 D_1^{1/2}, …, U_I D_I^{1/2}]`, `(D_i)_pp = s_p² / (s_p² + μ)`.
pub fn mvlsa(views: &ViewCollection, config: &MvlsaConfig, k: usize) -> Result<DenseMatrix> {
    mvlsa_capped(views, config, k, DEFAULT_DENSE_CAP)
}

pub fn mvlsa_capped(views: &ViewCollection, config: &MvlsaConfig, k: usize, cap: usize) -> Result<DenseMatrix> {
    let p = config.p;
    if p < k || k == 0 {
        return Err(Error::Parameter(format!("MVLSA needs 1 <= K <= P, got K = {k}, P = {p}")));
    }
    if !(config.mu >= 0.0) {
        return Err(Error::Parameter(format!("MVLSA ridge weight must be >= 0, got {}", config.mu)));
    }
    let l = views.rows();
    for v in views.iter() {
        if p > l.min(v.cols()) {
            return Err(Error::Parameter(format!(
                "P = {p} exceeds min(L, M_{}) = {}",
                v.id,
                l.min(v.cols())
            )));
        }
    }
    let factors = views
        .views()
        .par_iter()
        .enumerate()
        .map(|(i, v)| truncated_svd(&v.matrix, p, config.seed.wrapping_add(i as u64), cap))
        .collect::<Result<Vec<_>>>()?;
    let width = p * views.len();
    let mut w = DenseMatrix::zeros(l, width);
    for (i, (u, s)) in factors.iter().enumerate() {
        let d: Vec<f64> = s
            .iter()
            .map(|&sv| {
                let s2 = sv * sv;
                if s2 + config.mu > 0.0 {
                    (s2 / (s2 + config.mu)).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        for r in 0..l {
            let dst = &mut w.row_mut(r)[i * p..(i + 1) * p];
            for (c, slot) in dst.iter_mut().enumerate() {
                *slot = u[(r, c)] * d[c];
            }
        }
    }
    // top-K left singular vectors via the small Gram matrix WᵀW
    let gram = w.t_matmul(&w)?;
    let eig = sym_eig_topk_capped(&gram, k, usize::MAX)?;
    let mut g = w.matmul(&eig.vectors)?;
    for (c, &lam) in eig.values[..k].iter().enumerate() {
        if !(lam > 0.0) {
            return Err(Error::RankDeficient {
                sigma_min: lam.max(0.0).sqrt(),
                sigma_max: eig.values[0].max(0.0).sqrt(),
            });
        }
        let inv = 1.0 / lam.sqrt();
        for r in 0..l {
            g.row_mut(r)[c] *= inv;
        }
    }
    Ok(polar_factor(&g)?.0)
}

/// `‖(I − U1 U1ᵀ) G‖_2`, the sine of the largest principal angle.
pub fn subspace_distance(g: &DenseMatrix, u1: &DenseMatrix) -> Result<f64> {
    if g.shape() != u1.shape() {
        return Err(Error::shape(
            "subspace_distance",
            format!("{}x{}", u1.rows(), u1.cols()),
            format!("{}x{}", g.rows(), g.cols()),
        ));
    }
    let proj = u1.matmul(&u1.t_matmul(g)?)?;
    Ok(spectral_norm(&g.sub(&proj)?))
}

/// Geometric-decay fit of a subspace-distance series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Fitted `d/dr log(dist − floor)`.
    pub slope: f64,
    pub intercept: f64,
    pub floor: f64,
    /// Number of points in the fitted segment.
    pub points: usize,
}

impl RateFit {
    /// `|slope − log ratio| / |log ratio|`
    pub fn relative_error(&self, ratio: f64) -> f64 {
        let target = ratio.ln();
        (self.slope - target).abs() / target.abs()
    }
}

/// Minimum pre-floor points `rate_fit` accepts.
pub const RATE_FIT_MIN_POINTS: usize = 10;

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares fit of `log(dist⁽ʳ⁾ − floor)` against `r` over the pre-floor segment.
///
/// The floor is the median of the terminal plateau: the longest suffix (at
/// least three points) whose successive ratios stay within 5% of one. Without
/// a plateau the floor is zero. The segment starts at the first point with
/// `dist ≤ 0.5` and ends at the last point still ten times above the floor.
pub fn rate_fit(series: &[f64]) -> Result<RateFit> {
    let n = series.len();
    let mut start = n;
    while start >= 2 {
        let (a, b) = (series[start - 2], series[start - 1]);
        let ratio = b / a;
        if a > 0.0 && (0.95..=1.05).contains(&ratio) {
            start -= 1;
        } else {
            break;
        }
    }
    let plateau_len = n - start + 1;
    let floor = if start < n && plateau_len >= 3 {
        let begin = start - 1;
        median(&mut series[begin..].to_vec())
    } else {
        0.0
    };

    let first = series.iter().position(|&d| d <= 0.5).unwrap_or(n);
    let last = series
        .iter()
        .rposition(|&d| d - floor > 10.0 * floor && d - floor > 0.0)
        .map_or(0, |i| i + 1);
    let segment: Vec<(f64, f64)> = (first..last.max(first))
        .filter(|&r| series[r] - floor > 0.0)
        .map(|r| (r as f64, (series[r] - floor).ln()))
        .collect();
    if segment.len() < RATE_FIT_MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "rate fit needs at least {RATE_FIT_MIN_POINTS} pre-floor points, found {}",
            segment.len()
        )));
    }
    let m = segment.len() as f64;
    let mx = segment.iter().map(|p| p.0).sum::<f64>() / m;
    let my = segment.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = segment.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = segment.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        floor,
        points: segment.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_orthonormal;

    fn random_views(l: usize, m: &[usize], seed: u64) -> ViewCollection {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mats = m
            .iter()
            .map(|&mi| {
                let d = DenseMatrix::from_fn(l, mi, |_, _| StandardNormal.sample(&mut rng));
                SparseMatrix::from_dense(&d)
            })
            .collect();
        ViewCollection::from_matrices(mats).unwrap()
    }

    #[test]
    fn oracle_on_identity_view() {
        let views = ViewCollection::from_matrices(vec![SparseMatrix::identity(5)]).unwrap();
        let res = eigen_maxvar(&views, &[RegularizerSpec::none()], 2).unwrap();
        assert!((res.eigvals[0] - 1.0).abs() < 1e-12 && (res.eigvals[1] - 1.0).abs() < 1e-12);
        assert!(res.f_opt.abs() < 1e-20);
        assert!(res.u1.orthonormality_defect() < 1e-10);
    }

    #[test]
    fn oracle_objective_matches_spectrum_identity() {
        let views = random_views(30, &[8, 6, 10], 3);
        let k = 3;
        for mu in [0.0, 0.5] {
            let res = eigen_maxvar(&views, &[RegularizerSpec::ridge(mu)], k).unwrap();
            let closed = 0.5 * (3.0 * k as f64 - res.eigvals[..k].iter().sum::<f64>());
            assert!((res.f_opt - closed).abs() < 1e-8, "mu={mu}: {} vs {closed}", res.f_opt);
            assert!(res.eigvals.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn oracle_rejects_structured_and_oversize() {
        let views = random_views(10, &[4], 1);
        assert!(eigen_maxvar(&views, &[RegularizerSpec::row_sparse(1.0)], 2).is_err());
        assert!(matches!(
            eigen_maxvar_capped(&views, &[RegularizerSpec::none()], 2, 5),
            Err(Error::Oversize { order: 10, cap: 5 })
        ));
        let wide = random_views(4, &[6], 2);
        assert!(matches!(
            eigen_maxvar(&wide, &[RegularizerSpec::none()], 2),
            Err(Error::Conditioning(_))
        ));
    }

    #[test]
    fn subspace_distance_cases() {
        let u1 = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]]);
        assert!(subspace_distance(&u1, &u1).unwrap() < 1e-15);
        let comp = DenseMatrix::from_rows(&[[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!((subspace_distance(&comp, &u1).unwrap() - 1.0).abs() < 1e-14);
        let rot = random_orthonormal(2, 2, 4).unwrap();
        assert!(subspace_distance(&u1.matmul(&rot).unwrap(), &u1).unwrap() < 1e-14);
        assert!(subspace_distance(&DenseMatrix::zeros(4, 1), &u1).is_err());
    }

    #[test]
    fn mvlsa_full_rank_matches_oracle() {
        let views = random_views(40, &[6, 6, 6], 5);
        let oracle = eigen_maxvar(&views, &[RegularizerSpec::none()], 3).unwrap();
        let cfg = MvlsaConfig { p: 6, mu: 0.0, seed: 1 };
        let g = mvlsa(&views, &cfg, 3).unwrap();
        assert!(subspace_distance(&g, &oracle.u1).unwrap() < 1e-6);
    }

    #[test]
    fn mvlsa_single_view_spans_top_singular_subspace() {
        let views = random_views(20, &[8], 6);
        let g = mvlsa(&views, &MvlsaConfig { p: 3, mu: 0.3, seed: 0 }, 3).unwrap();
        let (u, _) = truncated_svd(&views[0].matrix, 3, 0, DEFAULT_DENSE_CAP).unwrap();
        assert!(subspace_distance(&g, &u).unwrap() < 1e-10);
    }

    #[test]
    fn mvlsa_parameter_checks() {
        let views = random_views(10, &[4], 7);
        assert!(mvlsa(&views, &MvlsaConfig { p: 5, mu: 0.0, seed: 0 }, 2).is_err());
        assert!(mvlsa(&views, &MvlsaConfig { p: 2, mu: 0.0, seed: 0 }, 3).is_err());
    }

    #[test]
    fn randomized_svd_matches_dense() {
        let views = random_views(60, &[30], 8);
        let x = &views[0].matrix;
        let (ud, sd) = truncated_svd(x, 4, 0, DEFAULT_DENSE_CAP).unwrap();
        let (ur, sr) = truncated_svd(x, 4, 0, 10).unwrap();
        for (a, b) in sd.iter().zip(&sr) {
            assert!((a - b).abs() < 1e-8 * a);
        }
        assert!(subspace_distance(&ur, &ud).unwrap() < 1e-5);
    }

    #[test]
    fn rate_fit_geometric() {
        let s: Vec<f64> = (0..200).map(|r| 0.9_f64.powi(r)).collect();
        let fit = rate_fit(&s).unwrap();
        assert!((fit.slope - 0.9_f64.ln()).abs() < 1e-6);
        assert_eq!(fit.floor, 0.0);
        assert!(fit.relative_error(0.9) < 1e-6);
    }

    #[test]
    fn rate_fit_with_floor() {
        let s: Vec<f64> = (0..400).map(|r| 0.9_f64.powi(r) + 1e-8).collect();
        let fit = rate_fit(&s).unwrap();
        assert!(fit.floor > 1e-9 && fit.floor < 1e-7, "floor {}", fit.floor);
        assert!((fit.slope - 0.9_f64.ln()).abs() < 1e-3 * 0.9_f64.ln().abs());
    }

    #[test]
    fn rate_fit_short_series() {
        let s: Vec<f64> = (0..8).map(|r| 0.5_f64.powi(r)).collect();
        assert!(matches!(rate_fit(&s), Err(Error::InsufficientData(_))));
    }
}
