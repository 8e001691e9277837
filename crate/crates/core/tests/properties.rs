use proptest::prelude::*;

use maxvar::baselines::subspace_distance;
use maxvar::io::{
    read_dense_tsv, read_embeddings, read_matrix_market, write_dense_tsv, write_embeddings, write_matrix_market,
};
use maxvar::linalg::{random_orthonormal, DenseMatrix, SparseMatrix};
use maxvar::regularizers::{prox, reg_value, RegularizerKind, RegularizerSpec};
use maxvar::wordsim::spearman;

fn dense(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-5.0f64..5.0, rows * cols).prop_map(move |v| DenseMatrix::from_vec(rows, cols, v).unwrap())
}

fn sparse(rows: usize, cols: usize) -> impl Strategy<Value = SparseMatrix> {
    prop::collection::vec((0..rows, 0..cols, -3.0f64..3.0), 0..(rows * cols))
        .prop_map(move |t| SparseMatrix::from_triplets(rows, cols, t).unwrap())
}

fn shaped_pair() -> impl Strategy<Value = (SparseMatrix, DenseMatrix)> {
    (1usize..12, 1usize..10, 1usize..5).prop_flat_map(|(l, m, k)| (sparse(l, m), dense(m, k)))
}

fn any_kind() -> impl Strategy<Value = RegularizerKind> {
    prop::sample::select(RegularizerKind::ALL.to_vec())
}

fn assert_close(a: &DenseMatrix, b: &DenseMatrix, tol: f64) {
    assert_eq!(a.shape(), b.shape());
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        assert!((x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())), "{x} vs {y}");
    }
}

proptest! {
    #[test]
    fn sparse_products_match_dense((x, d) in shaped_pair()) {
        let xd = x.to_dense();
        assert_close(&x.mul_dense(&d).unwrap(), &xd.matmul(&d).unwrap(), 1e-12);
        let e = DenseMatrix::from_fn(x.rows(), d.cols(), |i, j| (i as f64 - j as f64).sin());
        assert_close(&x.t_mul_dense(&e).unwrap(), &xd.transpose().matmul(&e).unwrap(), 1e-12);
    }

    #[test]
    fn prox_is_nonexpansive(
        kind in any_kind(),
        h1 in dense(4, 3),
        h2 in dense(4, 3),
        alpha in 0.01f64..3.0,
        mu in 0.0f64..2.0,
    ) {
        let spec = RegularizerSpec::new(kind, if kind.uses_weight() { mu } else { 0.0 }).unwrap();
        let p1 = prox(&spec, &h1, alpha).unwrap();
        let p2 = prox(&spec, &h2, alpha).unwrap();
        prop_assert!(p1.dist_sq(&p2).unwrap() <= h1.dist_sq(&h2).unwrap() * (1.0 + 1e-12) + 1e-24);
        prop_assert!(reg_value(&spec, &p1).is_finite());
    }

    #[test]
    fn prox_beats_convex_combinations(
        kind in any_kind(),
        h in dense(3, 3),
        other in dense(3, 3),
        alpha in 0.01f64..3.0,
        mu in 0.0f64..2.0,
        t in 0.0f64..1.0,
    ) {
        let spec = RegularizerSpec::new(kind, if kind.uses_weight() { mu } else { 0.0 }).unwrap();
        let p = prox(&spec, &h, alpha).unwrap();
        let phi = |q: &DenseMatrix| 0.5 * q.dist_sq(&h).unwrap() + alpha * reg_value(&spec, q);
        let mut feasible = prox(&spec, &other, alpha).unwrap();
        feasible.scale(t);
        feasible.axpy(1.0 - t, &p).unwrap();
        prop_assert!(phi(&p) <= phi(&feasible) + 1e-10);
    }

    #[test]
    fn spearman_ignores_monotone_maps(
        a in prop::collection::vec(-100.0f64..100.0, 2..40),
        shift in -5.0f64..5.0,
        scale in 0.1f64..10.0,
    ) {
        let b: Vec<f64> = a.iter().map(|x| (x * 0.37).sin() + x * 0.01).collect();
        let Ok(base) = spearman(&a, &b) else { return Ok(()) };
        let ta: Vec<f64> = a.iter().map(|x| (x / 50.0).exp() * scale + shift).collect();
        let tb: Vec<f64> = b.iter().map(|x| x.powi(3) * scale).collect();
        prop_assert_eq!(spearman(&ta, &tb).unwrap(), base);
    }

    #[test]
    fn subspace_distance_ignores_rotation(seed in 0u64..1000, l in 4usize..20, k in 1usize..4) {
        prop_assume!(k <= l);
        let g = random_orthonormal(l, k, seed).unwrap();
        let u = random_orthonormal(l, k, seed + 1).unwrap();
        let rot = random_orthonormal(k, k, seed + 2).unwrap();
        let d0 = subspace_distance(&g, &u).unwrap();
        let d1 = subspace_distance(&g.matmul(&rot).unwrap(), &u).unwrap();
        prop_assert!((d0 - d1).abs() <= 1e-10);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&d0));
    }

    #[test]
    fn matrix_market_round_trip(x in (1usize..15, 1usize..15).prop_flat_map(|(r, c)| sparse(r, c))) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.mtx");
        write_matrix_market(&p, &x).unwrap();
        prop_assert_eq!(read_matrix_market(&p).unwrap(), x);
    }

    #[test]
    fn tsv_round_trip_is_bit_exact(v in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 1..40), cols in 1usize..5) {
        let rows = v.len() / cols;
        prop_assume!(rows > 0);
        let a = DenseMatrix::from_vec(rows, cols, v[..rows * cols].to_vec()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.tsv");
        write_dense_tsv(&p, &a).unwrap();
        let b = read_dense_tsv(&p).unwrap();
        prop_assert_eq!(a.shape(), b.shape());
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn embeddings_round_trip(words in prop::collection::btree_set("[a-z]{1,8}", 1..10), k in 1usize..5, seed in 0u64..100) {
        let words: Vec<String> = words.into_iter().collect();
        let vecs = DenseMatrix::from_fn(words.len(), k, |i, j| ((i * 7 + j) as f64 + seed as f64).sin() * 1e3);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.txt");
        write_embeddings(&p, &words, &vecs).unwrap();
        let (w, v) = read_embeddings(&p).unwrap();
        prop_assert_eq!(w, words);
        prop_assert_eq!(v, vecs);
    }
}
