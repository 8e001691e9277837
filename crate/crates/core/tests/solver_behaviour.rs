use maxvar::baselines::{eigen_maxvar, mvlsa, MvlsaConfig};
use maxvar::linalg::{DenseMatrix, ViewCollection};
use maxvar::regularizers::{RegularizerKind, RegularizerSpec};
use maxvar::solver::{objective, solve, Init, Solver, SolverConfig};
use maxvar::synth::{feature_metrics, gen, SynthConfig};
use maxvar::wordsim::{evaluate, Embeddings};
use maxvar::io::SimilarityPair;
use maxvar::Error;

fn small(seed: u64) -> ViewCollection {
    let cfg = SynthConfig {
        l: 100,
        m: 20,
        n: 15,
        i: 3,
        sigma: 0.5,
        rho: None,
        outliers: None,
        seed,
    };
    gen(&cfg).unwrap().views
}

#[test]
fn oracle_lower_bounds_every_run() {
    let ridge = vec![RegularizerSpec::ridge(0.1)];
    for seed in 0..3 {
        let views = small(seed);
        let oracle = eigen_maxvar(&views, &ridge, 4).unwrap();
        for (t, gamma) in [(1, 1.0), (5, 0.5), (20, 0.99)] {
            let mut cfg = SolverConfig::new(4, ridge.clone());
            cfg.inner_steps = t;
            cfg.gamma = gamma;
            cfg.seed = seed;
            cfg.max_outer = 200;
            let out = solve(&views, cfg).unwrap();
            let f = out.diagnostics.last().unwrap().objective;
            assert!(oracle.f_opt <= f + 1e-8, "seed {seed}: {} > {f}", oracle.f_opt);
        }
    }
}

#[test]
fn reported_objective_matches_direct_evaluation() {
    let views = small(4);
    let regs = vec![RegularizerSpec::row_sparse(0.3)];
    let mut cfg = SolverConfig::new(3, regs.clone());
    cfg.max_outer = 20;
    let out = solve(&views, cfg).unwrap();
    let direct = objective(&views, &out.state, &regs).unwrap();
    let reported = out.diagnostics.last().unwrap().objective;
    assert!((direct - reported).abs() <= 1e-10 * direct.max(1.0));
    assert!(out.state.g.orthonormality_defect() < 1e-10);
}

#[test]
fn each_block_step_decreases_by_its_bound() {
    let views = small(5);
    for kind in RegularizerKind::ALL {
        let spec = RegularizerSpec::new(kind, if kind.uses_weight() { 0.2 } else { 0.0 }).unwrap();
        let mut cfg = SolverConfig::new(3, vec![spec]);
        cfg.gamma = 0.9;
        cfg.inner_steps = 3;
        let mut solver = Solver::new(&views, cfg).unwrap();
        for _ in 0..25 {
            let rep = solver.step().unwrap();
            let slack = 1e-9 * rep.objective_before.max(1.0);
            assert!(rep.objective_before - rep.objective_after_q >= rep.q_decrease_bound - slack, "{kind:?} Q step");
            assert!(
                rep.objective_after_q - rep.diagnostics.objective >= rep.g_decrease_bound - slack,
                "{kind:?} G step"
            );
        }
    }
}

#[test]
fn runs_are_reproducible() {
    let views = small(6);
    let run = || {
        let mut cfg = SolverConfig::new(3, vec![RegularizerSpec::entry_sparse(0.1)]);
        cfg.seed = 42;
        cfg.max_outer = 30;
        solve(&views, cfg).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.state.g, b.state.g);
    assert_eq!(a.state.q, b.state.q);
    let objs = |o: &maxvar::SolveOutput| o.diagnostics.iter().map(|d| d.objective.to_bits()).collect::<Vec<_>>();
    assert_eq!(objs(&a), objs(&b));
}

#[test]
fn warm_start_from_oracle_stays_put() {
    let views = small(7);
    let ridge = vec![RegularizerSpec::ridge(0.1)];
    let oracle = eigen_maxvar(&views, &ridge, 3).unwrap();
    let mut cfg = SolverConfig::new(3, ridge);
    cfg.init = Init::Warm {
        g: oracle.g_opt.clone(),
        q: Some(oracle.q_opt.clone()),
    };
    cfg.max_outer = 5;
    let out = solve(&views, cfg).unwrap();
    assert!(out.converged);
    assert!((out.diagnostics[0].objective - oracle.f_opt).abs() < 1e-9);
}

#[test]
fn mvlsa_warm_start_beats_random_early() {
    let data = gen(&SynthConfig::fig3(3)).unwrap();
    let ridge = vec![RegularizerSpec::ridge(0.1)];
    let run = |init: Init| {
        let mut cfg = SolverConfig::new(5, ridge.clone());
        cfg.init = init;
        cfg.max_outer = 10;
        cfg.tol_objective = 0.0;
        solve(&data.views, cfg).unwrap().diagnostics.last().unwrap().objective
    };
    let g0 = mvlsa(&data.views, &MvlsaConfig { p: 8, mu: 0.1, seed: 0 }, 5).unwrap();
    assert!(run(Init::Warm { g: g0, q: None }) < run(Init::Random));
}

#[test]
fn row_sparse_penalty_drops_outlying_rows() {
    let data = gen(&SynthConfig::table1(2)).unwrap();
    let g0 = mvlsa(&data.views, &MvlsaConfig { p: 50, mu: 0.0, seed: 2 }, 10).unwrap();
    let mut cfg = SolverConfig::new(10, vec![RegularizerSpec::row_sparse(1.0)]);
    cfg.init = Init::Warm { g: g0, q: None };
    cfg.max_outer = 3000;
    let out = solve(&data.views, cfg).unwrap();
    let m = feature_metrics(&data, &out.state.q, &out.state.g).unwrap();
    let eig = eigen_maxvar(&data.views, &[RegularizerSpec::none()], 10).unwrap();
    let me = feature_metrics(&data, &eig.q_opt, &eig.g_opt).unwrap();
    assert!(m.metric2 < 0.1 * me.metric2);
    for i in 0..3 {
        assert!(m.outlier_row_norm[i] < 0.2 * m.clean_row_norm[i]);
    }
}

#[test]
fn certificate_is_vacuous_without_proximal_term() {
    let views = small(8);
    let mut cfg = SolverConfig::new(3, vec![RegularizerSpec::ridge(0.1)]);
    cfg.gamma = 1.0;
    let out = solve(&views, cfg).unwrap();
    assert_eq!(out.certificate.c, 0.0);
    assert!(out.certificate.v.is_infinite());
    assert!(out.certificate.holds());
}

#[test]
fn zero_target_is_rank_deficient_at_gamma_one() {
    let views = small(9);
    let mut cfg = SolverConfig::new(3, vec![RegularizerSpec::entry_sparse(1e9)]);
    cfg.gamma = 1.0;
    let err = solve(&views, cfg).unwrap_err();
    assert!(matches!(err, Error::RankDeficient { .. }));
}

#[test]
fn word_similarity_is_order_independent() {
    let words: Vec<String> = (0..30).map(|i| format!("w{i}")).collect();
    let vecs = DenseMatrix::from_fn(30, 4, |r, c| ((r * 13 + c * 7) as f64).sin());
    let emb = Embeddings::new(words, vecs, true).unwrap();
    let pairs: Vec<SimilarityPair> = (0..29)
        .map(|i| SimilarityPair {
            word1: format!("w{i}"),
            word2: format!("w{}", (i * 11 + 3) % 30),
            score: ((i * 5) % 7) as f64,
        })
        .collect();
    let base = evaluate(&emb, "t", &pairs).unwrap();
    let perm = maxvar::synth::permutation(pairs.len(), 1);
    let shuffled: Vec<SimilarityPair> = perm.iter().map(|&i| pairs[i].clone()).collect();
    assert_eq!(evaluate(&emb, "t", &shuffled).unwrap(), base);
    let mut reversed = pairs.clone();
    reversed.reverse();
    assert_eq!(evaluate(&emb, "t", &reversed).unwrap(), base);
}

#[test]
fn random_embeddings_score_near_zero() {
    let n = 200;
    let mut total = 0.0;
    for seed in 0..10u64 {
        let words: Vec<String> = (0..2 * n).map(|i| format!("w{i}")).collect();
        let vecs = DenseMatrix::from_fn(2 * n, 8, |r, c| (((r * 31 + c * 17) as f64) * (seed as f64 + 1.3)).sin());
        let emb = Embeddings::new(words, vecs, false).unwrap();
        let pairs: Vec<SimilarityPair> = (0..n)
            .map(|i| SimilarityPair {
                word1: format!("w{}", 2 * i),
                word2: format!("w{}", 2 * i + 1),
                score: ((i as f64) * 0.618).fract(),
            })
            .collect();
        total += evaluate(&emb, "null", &pairs).unwrap().spearman;
    }
    assert!((total / 10.0).abs() < 0.2);
}
