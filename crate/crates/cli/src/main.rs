use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use maxvar::io::{
    read_dense_tsv, read_embeddings, read_manifest, read_matrix_market, read_wordsim_task, write_dense_tsv,
    write_manifest, write_matrix_market, DiagnosticsWriter, Manifest,
};
use maxvar::synth::{feature_metrics_for, OutlierSpec};
use maxvar::wordsim::report_table;
use maxvar::{
    eigen_maxvar, evaluate, gen, mvlsa, DenseMatrix, Embeddings, Error, Init, MvlsaConfig, RegularizerSpec, Solver,
    SolverConfig, SynthConfig, ViewCollection,
};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_MAX_ITER: u8 = 4;
const EXIT_INVARIANT: u8 = 5;

#[derive(Parser)]
#[command(name = "maxvar", version, about = "MAX-VAR generalized CCA by alternating optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic views as Matrix Market files plus a manifest
    Gen(GenArgs),
    /// Run the alternating solver
    Solve(SolveArgs),
    /// Compute a reference solution (exact eigen-decomposition or MVLSA)
    Baseline(BaselineArgs),
    /// Feature-selection metrics for a solved model
    Metrics(MetricsArgs),
    /// Score embeddings on word-similarity tasks
    EvalWordsim(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Fig3,
    Table1,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    i: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Target density of each view
    #[arg(long)]
    rho: Option<f64>,
    /// Outlying columns appended to every view
    #[arg(long)]
    outliers: Option<usize>,
    /// Keep raw outlier scale instead of matching the clean block's power
    #[arg(long)]
    raw_outliers: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ViewSource {
    /// Manifest written by `gen`
    #[arg(long, conflicts_with = "views")]
    manifest: Option<PathBuf>,
    /// Matrix Market view files
    #[arg(long, num_args = 1..)]
    views: Vec<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: ViewSource,
    #[arg(long)]
    k: usize,
    /// Proximal-gradient steps per outer iteration
    #[arg(long, default_value_t = 1)]
    t: usize,
    /// Defaults to 1 for ridge/none penalties and 0.99 otherwise
    #[arg(long)]
    gamma: Option<f64>,
    /// Regularizer (`none`, `ridge:μ`, `l21:μ`, `l11:μ`, `nonneg`, `nonneg+l11:μ`); once, or once per view
    #[arg(long = "reg")]
    regs: Vec<RegularizerSpec>,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 0.99)]
    step_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `random`, `warm:<G.tsv>` or `mvlsa:<P>`
    #[arg(long, default_value = "random")]
    init: String,
    /// Top-K eigenvectors to log subspace distances against
    #[arg(long)]
    oracle: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    out_g: Option<PathBuf>,
    /// Q files are written as `<prefix><view>.tsv`
    #[arg(long)]
    out_q_prefix: Option<String>,
    #[arg(long)]
    diag: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineKind {
    Eigen,
    Mvlsa,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(value_enum)]
    kind: BaselineKind,
    #[command(flatten)]
    source: ViewSource,
    #[arg(long)]
    k: usize,
    /// Per-view truncation rank (mvlsa)
    #[arg(long)]
    p: Option<usize>,
    /// Ridge penalty for eigen; once, or once per view
    #[arg(long = "reg")]
    regs: Vec<RegularizerSpec>,
    /// Ridge weight for mvlsa
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// Manifest written by `gen`, carrying the outlier index sets
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    g: PathBuf,
    /// Q files are read as `<prefix><view>.tsv`
    #[arg(long)]
    q_prefix: String,
    /// Write the report as JSON here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long = "task", required = true)]
    tasks: Vec<PathBuf>,
    /// Match words exactly instead of lowercasing both sides
    #[arg(long)]
    case_sensitive: bool,
    /// Write the reports as JSON here
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parameter(_) => EXIT_USAGE,
        Error::Monotonicity { .. } | Error::StepSize { .. } | Error::RankDeficient { .. } => EXIT_INVARIANT,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::EvalWordsim(a) => cmd_eval_wordsim(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn ensure_dir(dir: &Path) -> maxvar::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn cmd_gen(a: GenArgs) -> maxvar::Result<u8> {
    let mut cfg = match a.preset {
        Some(Preset::Fig3) => SynthConfig::fig3(a.seed),
        Some(Preset::Table1) => SynthConfig::table1(a.seed),
        None => {
            let (Some(l), Some(m), Some(n), Some(i)) = (a.l, a.m, a.n, a.i) else {
                return Err(Error::Parameter("without --preset, --l, --m, --n and --i are required".into()));
            };
            SynthConfig {
                l,
                m,
                n,
                i,
                sigma: 1.0,
                rho: None,
                outliers: None,
                seed: a.seed,
            }
        }
    };
    cfg.l = a.l.unwrap_or(cfg.l);
    cfg.m = a.m.unwrap_or(cfg.m);
    cfg.n = a.n.unwrap_or(cfg.n);
    cfg.i = a.i.unwrap_or(cfg.i);
    cfg.sigma = a.sigma.unwrap_or(cfg.sigma);
    cfg.rho = a.rho.or(cfg.rho);
    if let Some(count) = a.outliers {
        cfg.outliers = Some(OutlierSpec {
            count,
            matched_power: true,
        });
    }
    if a.raw_outliers {
        if let Some(o) = cfg.outliers.as_mut() {
            o.matched_power = false;
        }
    }

    let data = gen(&cfg)?;
    ensure_dir(&a.out)?;
    let mut files = Vec::new();
    for (i, v) in data.views.iter().enumerate() {
        let name = PathBuf::from(format!("view_{i}.mtx"));
        write_matrix_market(a.out.join(&name), &v.matrix)?;
        files.push(name);
    }
    let manifest = Manifest {
        command: "gen".into(),
        config: serde_json::to_value(&cfg)?,
        seeds: vec![cfg.seed],
        view_files: files,
        clean_cols: Some(data.clean_cols.clone()),
        outlier_cols: Some(data.outlier_cols.clone()),
        realized_density: data.realized_density.clone(),
        ..Default::default()
    };
    write_manifest(a.out.join("manifest.json"), &manifest)?;
    println!("wrote {} views to {}", data.views.len(), a.out.display());
    Ok(0)
}

fn load_views(src: &ViewSource) -> maxvar::Result<(ViewCollection, Vec<PathBuf>)> {
    let paths = match &src.manifest {
        Some(m) => read_manifest(m)?.resolve(m),
        None if !src.views.is_empty() => src.views.clone(),
        None => return Err(Error::Parameter("either --manifest or --views is required".into())),
    };
    let mats = paths.iter().map(read_matrix_market).collect::<maxvar::Result<Vec<_>>>()?;
    let abs = paths
        .iter()
        .map(|p| std::fs::canonicalize(p).unwrap_or_else(|_| p.clone()))
        .collect();
    Ok((ViewCollection::from_matrices(mats)?, abs))
}

fn regs_or_default(regs: &[RegularizerSpec]) -> Vec<RegularizerSpec> {
    if regs.is_empty() {
        vec![RegularizerSpec::none()]
    } else {
        regs.to_vec()
    }
}

fn q_path(prefix: &str, i: usize) -> PathBuf {
    PathBuf::from(format!("{prefix}{i}.tsv"))
}

fn cmd_solve(a: SolveArgs) -> maxvar::Result<u8> {
    if a.t == 0 {
        return Err(Error::Parameter("--t must be at least 1".into()));
    }
    let (views, files) = load_views(&a.source)?;
    let regs = regs_or_default(&a.regs);
    let mut cfg = SolverConfig::new(a.k, regs.clone());
    cfg.inner_steps = a.t;
    cfg.gamma = a.gamma.unwrap_or(cfg.gamma);
    cfg.tol_objective = a.tol;
    cfg.max_outer = a.max_iter;
    cfg.step_scale = a.step_scale;
    cfg.seed = a.seed;
    cfg.init = parse_init(&a.init, &views, &regs, a.k, a.seed)?;
    if let Some(o) = &a.oracle {
        cfg.track_oracle = Some(read_dense_tsv(o)?);
    }
    let config_echo = json!({
        "k": cfg.k,
        "t": cfg.inner_steps,
        "gamma": cfg.gamma,
        "regs": regs.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
        "tol": cfg.tol_objective,
        "max_iter": cfg.max_outer,
        "step_scale": cfg.step_scale,
        "init": a.init,
    });

    ensure_dir(&a.out)?;
    let diag_path = a.diag.clone().unwrap_or_else(|| a.out.join("diagnostics.jsonl"));
    let mut diag = DiagnosticsWriter::create(&diag_path)?;
    let mut write_err = None;
    let solver = Solver::new(&views, cfg)?;
    let run = solver.run_with(|rep| {
        if write_err.is_none() {
            write_err = diag.write(&rep.diagnostics).err();
        }
    });
    diag.finish()?;
    if let Some(e) = write_err {
        return Err(e);
    }
    let out = run?;

    let g_path = a.out_g.clone().unwrap_or_else(|| a.out.join("G.tsv"));
    write_dense_tsv(&g_path, &out.state.g)?;
    let prefix = a
        .out_q_prefix
        .clone()
        .unwrap_or_else(|| a.out.join("Q_").to_string_lossy().into_owned());
    for (i, q) in out.state.q.iter().enumerate() {
        write_dense_tsv(q_path(&prefix, i), q)?;
    }
    let last = out.diagnostics.last();
    let mut results = serde_json::Map::new();
    results.insert("iterations".into(), json!(out.diagnostics.len()));
    results.insert("converged".into(), json!(out.converged));
    results.insert("objective".into(), json!(last.map(|d| d.objective)));
    results.insert("certificate".into(), serde_json::to_value(&out.certificate)?);
    let manifest = Manifest {
        command: "solve".into(),
        config: config_echo,
        seeds: vec![a.seed],
        view_files: files,
        results,
        ..Default::default()
    };
    write_manifest(a.out.join("manifest.json"), &manifest)?;
    match last {
        Some(d) => println!(
            "{} after {} iterations, objective {:.10e}",
            if out.converged { "converged" } else { "stopped at max-iter" },
            out.diagnostics.len(),
            d.objective
        ),
        None => println!("no iterations run"),
    }
    Ok(if out.converged { 0 } else { EXIT_MAX_ITER })
}

fn parse_init(
    spec: &str,
    views: &ViewCollection,
    regs: &[RegularizerSpec],
    k: usize,
    seed: u64,
) -> maxvar::Result<Init> {
    if spec == "random" {
        return Ok(Init::Random);
    }
    if let Some(path) = spec.strip_prefix("warm:") {
        return Ok(Init::Warm {
            g: read_dense_tsv(path)?,
            q: None,
        });
    }
    if let Some(p) = spec.strip_prefix("mvlsa:") {
        let p: usize = p
            .parse()
            .map_err(|_| Error::Parameter(format!("invalid MVLSA rank '{p}'")))?;
        let mu = regs.first().and_then(|r| r.ridge_weight()).unwrap_or(0.0);
        let g = mvlsa(views, &MvlsaConfig { p, mu, seed }, k)?;
        return Ok(Init::Warm { g, q: None });
    }
    Err(Error::Parameter(format!(
        "--init must be 'random', 'warm:<file>' or 'mvlsa:<P>', got '{spec}'"
    )))
}

fn cmd_baseline(a: BaselineArgs) -> maxvar::Result<u8> {
    let (views, files) = load_views(&a.source)?;
    ensure_dir(&a.out)?;
    let mut results = serde_json::Map::new();
    let config;
    let g = match a.kind {
        BaselineKind::Eigen => {
            let regs = regs_or_default(&a.regs);
            let res = eigen_maxvar(&views, &regs, a.k)?;
            for (i, q) in res.q_opt.iter().enumerate() {
                write_dense_tsv(a.out.join(format!("Q_{i}.tsv")), q)?;
            }
            let top = (a.k + 1).min(res.eigvals.len());
            results.insert("eigvals".into(), json!(res.eigvals[..top]));
            results.insert("f_opt".into(), json!(res.f_opt));
            results.insert("ratio".into(), json!(res.ratio));
            println!("F_opt = {:.10e}, eigenvalue ratio = {:.6}", res.f_opt, res.ratio);
            config = json!({
                "kind": "eigen",
                "k": a.k,
                "regs": regs.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
            });
            res.g_opt
        }
        BaselineKind::Mvlsa => {
            let p = a
                .p
                .ok_or_else(|| Error::Parameter("mvlsa needs --p".into()))?;
            let g = mvlsa(&views, &MvlsaConfig { p, mu: a.mu, seed: a.seed }, a.k)?;
            config = json!({ "kind": "mvlsa", "k": a.k, "p": p, "mu": a.mu });
            g
        }
    };
    write_dense_tsv(a.out.join("G.tsv"), &g)?;
    let manifest = Manifest {
        command: "baseline".into(),
        config,
        seeds: vec![a.seed],
        view_files: files,
        results,
        ..Default::default()
    };
    write_manifest(a.out.join("manifest.json"), &manifest)?;
    Ok(0)
}

fn cmd_metrics(a: MetricsArgs) -> maxvar::Result<u8> {
    let manifest = read_manifest(&a.manifest)?;
    let (Some(clean), Some(outliers)) = (manifest.clean_cols.clone(), manifest.outlier_cols.clone()) else {
        return Err(Error::InsufficientData(format!(
            "{} has no clean/outlier index sets",
            a.manifest.display()
        )));
    };
    let mats = manifest
        .resolve(&a.manifest)
        .iter()
        .map(read_matrix_market)
        .collect::<maxvar::Result<Vec<_>>>()?;
    let views = ViewCollection::from_matrices(mats)?;
    let g = read_dense_tsv(&a.g)?;
    let q = (0..views.len())
        .map(|i| read_dense_tsv(q_path(&a.q_prefix, i)))
        .collect::<maxvar::Result<Vec<DenseMatrix>>>()?;
    let m = feature_metrics_for(&views, &clean, &outliers, &q, &g)?;
    println!("metric1 = {:.6e}", m.metric1);
    println!("metric2 = {:.6e}", m.metric2);
    for (i, (c, o)) in m.clean_row_norm.iter().zip(&m.outlier_row_norm).enumerate() {
        println!("view {i}: mean row norm clean {c:.6e}, outlying {o:.6e}");
    }
    if let Some(out) = &a.out {
        write_json(out, &serde_json::to_value(&m)?)?;
    }
    Ok(0)
}

fn write_json(path: &Path, v: &Value) -> maxvar::Result<()> {
    let text = serde_json::to_string_pretty(v)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn cmd_eval_wordsim(a: EvalArgs) -> maxvar::Result<u8> {
    let (words, vectors) = read_embeddings(&a.embeddings)?;
    let emb = Embeddings::new(words, vectors, !a.case_sensitive)?;
    let mut reports = Vec::new();
    for t in &a.tasks {
        let pairs = read_wordsim_task(t)?;
        let name = t
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| t.display().to_string());
        reports.push(evaluate(&emb, &name, &pairs)?);
    }
    print!("{}", report_table(&reports));
    if let Some(out) = &a.out {
        write_json(out, &serde_json::to_value(&reports)?)?;
    }
    Ok(0)
}
