//! Alternating optimization for regularized MAX-VAR GCCA.
//!
//! Each outer iteration takes `T` proximal-gradient steps on every `Q_i`
//! (with `G` fixed), then replaces `G` by the orthonormal polar factor of
//! `R = γ Σ_i X_i Q_i / I + (1 − γ) G`. For `γ < 1` the `G` step minimizes
//! the objective plus `ω ‖G − G_prev‖_F²` with `ω = (1 − γ) I / (2γ)`.
//!
//! Every iteration records the objective, the stationarity potential `Z`
//! and the step norms; [`Theorem1Certificate`] checks the cumulative
//! sufficient-decrease bound `Σ_{r<J} c·Z⁽ʳ⁺¹⁾ ≤ F⁽⁰⁾ − F⁽ᴶ⁾` as the run goes.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::subspace_distance;
use crate::error::{Error, Result};
use crate::linalg::{
    econ_svd, estimate_lipschitz, random_orthonormal, DenseMatrix, ViewCollection, ViewMatrix,
    LIPSCHITZ_INFLATION, LIPSCHITZ_MAX_ITERS, LIPSCHITZ_TOL,
};
use crate::regularizers::{prox_in_place, reg_value, RegularizerKind, RegularizerSpec};

/// Relative change below which the inner loop stops before `T` steps.
pub const INNER_REL_TOL: f64 = 1e-10;
/// Slack (relative to `max(1, |F|)`) tolerated before an objective increase is an error.
pub const MONOTONE_SLACK: f64 = 1e-9;
/// `σ_K(R) / σ_1(R)` below this makes the Procrustes step ill-posed.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub enum Init {
    Random,
    /// Start from `G₀` (re-orthonormalized if needed) and optional `Q₀`; `Q` defaults to zero.
    Warm {
        g: DenseMatrix,
        q: Option<Vec<DenseMatrix>>,
    },
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub k: usize,
    /// Proximal-gradient steps per outer iteration (`T ≥ 1`).
    pub inner_steps: usize,
    pub gamma: f64,
    /// One entry shared by all views, or one per view.
    pub regs: Vec<RegularizerSpec>,
    /// `α_i = step_scale / L_i`.
    pub step_scale: f64,
    pub max_outer: usize,
    /// Stop once `|F⁽ʳ⁾ − F⁽ʳ⁺¹⁾|` drops below this.
    pub tol_objective: f64,
    pub seed: u64,
    pub init: Init,
    /// Reference top-K eigenvectors; enables subspace-distance logging.
    pub track_oracle: Option<DenseMatrix>,
}

impl SolverConfig {
    /// Defaults: `T = 1`, `step_scale = 0.99`, `tol = 1e-4`, `γ = 1` for ridge/none
    /// penalties and `γ = 0.99` otherwise.
    pub fn new(k: usize, regs: Vec<RegularizerSpec>) -> Self {
        let gamma = default_gamma(&regs);
        SolverConfig {
            k,
            inner_steps: 1,
            gamma,
            regs,
            step_scale: 0.99,
            max_outer: 1000,
            tol_objective: 1e-4,
            seed: 0,
            init: Init::Random,
            track_oracle: None,
        }
    }

    /// `ω = (1 − γ) I / (2γ)`
    pub fn omega(&self, views: usize) -> f64 {
        (1.0 - self.gamma) * views as f64 / (2.0 * self.gamma)
    }

    pub fn reg_for(&self, view: usize) -> &RegularizerSpec {
        if self.regs.len() == 1 {
            &self.regs[0]
        } else {
            &self.regs[view]
        }
    }

    pub fn validate(&self, views: &ViewCollection) -> Result<()> {
        let l = views.rows();
        if self.k == 0 || self.k > l {
            return Err(Error::Parameter(format!("K must satisfy 1 <= K <= L = {l}, got {}", self.k)));
        }
        if self.inner_steps == 0 {
            return Err(Error::Parameter("T (inner steps) must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Parameter(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.step_scale > 0.0 && self.step_scale < 1.0) {
            return Err(Error::Parameter(format!("step_scale must lie in (0, 1), got {}", self.step_scale)));
        }
        if self.regs.len() != 1 && self.regs.len() != views.len() {
            return Err(Error::Parameter(format!(
                "expected 1 or {} regularizers, got {}",
                views.len(),
                self.regs.len()
            )));
        }
        if !(self.tol_objective >= 0.0) {
            return Err(Error::Parameter("objective tolerance must be >= 0".into()));
        }
        if let Some(u1) = &self.track_oracle {
            if u1.shape() != (l, self.k) {
                return Err(Error::shape("track_oracle", format!("{l}x{}", self.k), format!("{}x{}", u1.rows(), u1.cols())));
            }
        }
        if let Init::Warm { g, q } = &self.init {
            if g.shape() != (l, self.k) {
                return Err(Error::shape("warm G", format!("{l}x{}", self.k), format!("{}x{}", g.rows(), g.cols())));
            }
            if let Some(q) = q {
                if q.len() != views.len() {
                    return Err(Error::Parameter(format!("warm start has {} Q blocks for {} views", q.len(), views.len())));
                }
                for (qi, v) in q.iter().zip(views.iter()) {
                    if qi.shape() != (v.cols(), self.k) {
                        return Err(Error::shape("warm Q", format!("{}x{}", v.cols(), self.k), format!("{}x{}", qi.rows(), qi.cols())));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `γ = 1` when every penalty is ridge/none, `0.99` otherwise.
pub fn default_gamma(regs: &[RegularizerSpec]) -> f64 {
    let smooth = regs
        .iter()
        .all(|r| matches!(r.kind, RegularizerKind::None | RegularizerKind::Ridge));
    if smooth {
        1.0
    } else {
        0.99
    }
}

#[derive(Clone, Debug)]
pub struct SolverState {
    pub g: DenseMatrix,
    pub q: Vec<DenseMatrix>,
    pub r: usize,
}

/// One record per outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateDiagnostics {
    pub r: usize,
    pub objective: f64,
    pub z_potential: f64,
    pub q_step_norms: Vec<f64>,
    pub g_step_norm: f64,
    pub subspace_dist: Option<f64>,
    pub wall_ms: f64,
}

/// Running check of the sublinear-rate bound.
///
/// `c = min{ω γ², min_i (1/(2α_i) − L_i/2) α_i²}` and `v = (F⁽⁰⁾ − F̄)/c` with
/// `F̄ = 0`. `cumulative_ok[J−1]` records `Σ_{r<J} c Z⁽ʳ⁺¹⁾ ≤ F⁽⁰⁾ − F⁽ᴶ⁾ + 1e-6`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Theorem1Certificate {
    pub c: f64,
    pub v: f64,
    pub initial_objective: f64,
    pub cumulative_ok: Vec<bool>,
}

impl Theorem1Certificate {
    pub fn holds(&self) -> bool {
        self.cumulative_ok.iter().all(|&ok| ok)
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub state: SolverState,
    pub diagnostics: Vec<IterateDiagnostics>,
    pub certificate: Theorem1Certificate,
    pub converged: bool,
}

/// Everything one outer iteration reports, including the intermediate
/// objective `F(Q⁽ʳ⁺¹⁾, G⁽ʳ⁾)` used by the sufficient-decrease checks.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub diagnostics: IterateDiagnostics,
    pub objective_before: f64,
    pub objective_after_q: f64,
    /// `Σ_i (1/(2α_i) − L_i/2) Σ_t ‖ΔQ_i⁽ᵗ⁾‖_F²`
    pub q_decrease_bound: f64,
    /// `ω ‖ΔG‖_F²`
    pub g_decrease_bound: f64,
    pub inner_steps_taken: Vec<usize>,
}

/// `Σ_i ½‖X_i Q_i − G‖_F² + Σ_i g_i(Q_i)`.
pub fn objective(views: &ViewCollection, state: &SolverState, regs: &[RegularizerSpec]) -> Result<f64> {
    if state.q.len() != views.len() {
        return Err(Error::Parameter(format!("{} Q blocks for {} views", state.q.len(), views.len())));
    }
    let mut f = 0.0;
    for (i, (v, q)) in views.iter().zip(&state.q).enumerate() {
        let xq = v.matrix.mul_dense(q)?;
        f += 0.5 * xq.dist_sq(&state.g)?;
        let reg = if regs.len() == 1 { &regs[0] } else { &regs[i] };
        f += reg_value(reg, q);
    }
    Ok(f)
}

struct InnerOutcome {
    q: DenseMatrix,
    xq: DenseMatrix,
    step_norm_sum: f64,
    steps: usize,
    surrogate: f64,
}

fn inner_loop(
    view: &ViewMatrix,
    q0: DenseMatrix,
    xq0: Option<DenseMatrix>,
    g: &DenseMatrix,
    reg: &RegularizerSpec,
    alpha: f64,
    t_max: usize,
) -> Result<InnerOutcome> {
    let x = &view.matrix;
    let mut q = q0;
    let mut xq = match xq0 {
        Some(xq) => xq,
        None => x.mul_dense(&q)?,
    };
    let mut f_prev = 0.5 * xq.dist_sq(g)? + reg_value(reg, &q);
    let mut step_norm_sum = 0.0;
    let mut steps = 0;
    for t in 0..t_max {
        let resid = xq.sub(g)?;
        let grad = x.t_mul_dense(&resid)?;
        let mut next = q.clone();
        next.axpy(-alpha, &grad)?;
        prox_in_place(reg, &mut next, alpha)?;
        let dq = next.dist_sq(&q)?;
        let xq_next = x.mul_dense(&next)?;
        let f_next = 0.5 * xq_next.dist_sq(g)? + reg_value(reg, &next);
        if f_next > f_prev + MONOTONE_SLACK * (1.0 + f_prev.abs()) {
            return Err(Error::StepSize {
                step: t,
                before: f_prev,
                after: f_next,
            });
        }
        q = next;
        xq = xq_next;
        f_prev = f_next;
        step_norm_sum += dq;
        steps += 1;
        if dq.sqrt() <= INNER_REL_TOL * (1.0 + q.frobenius_norm()) {
            break;
        }
    }
    Ok(InnerOutcome {
        q,
        xq,
        step_norm_sum,
        steps,
        surrogate: f_prev,
    })
}

/// `T` proximal-gradient steps `Q ← prox_{αg}(Q − α(XᵀXQ − XᵀG))` from `q0`.
///
/// Returns the final iterate and `Σ_t ‖Q⁽ᵗ⁺¹⁾ − Q⁽ᵗ⁾‖_F²`. Stops early once a
/// step moves less than `1e-10 (1 + ‖Q‖_F)`. An increase of the subproblem
/// objective means `α` exceeded `1/L` and is reported as an error.
pub fn q_inner_loop(
    view: &ViewMatrix,
    q0: &DenseMatrix,
    g: &DenseMatrix,
    reg: &RegularizerSpec,
    alpha: f64,
    t: usize,
) -> Result<(DenseMatrix, f64)> {
    if q0.rows() != view.cols() || g.rows() != view.rows() || q0.cols() != g.cols() {
        return Err(Error::shape(
            "q_inner_loop",
            format!("Q {}x{} and G {}x{}", view.cols(), g.cols(), view.rows(), q0.cols()),
            format!("Q {}x{} and G {}x{}", q0.rows(), q0.cols(), g.rows(), g.cols()),
        ));
    }
    let out = inner_loop(view, q0.clone(), None, g, reg, alpha, t)?;
    Ok((out.q, out.step_norm_sum))
}

/// Polar factor of `R`, refusing targets whose `K`-th singular value has collapsed.
fn procrustes(r: &DenseMatrix) -> Result<DenseMatrix> {
    let svd = econ_svd(r)?;
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let smin = svd.s.last().copied().unwrap_or(0.0);
    if !(smax > 0.0) || smin < RANK_TOL * smax {
        return Err(Error::RankDeficient {
            sigma_min: smin,
            sigma_max: smax,
        });
    }
    Ok(svd.u.matmul(&svd.v.transpose())?)
}

fn procrustes_target(xq: &[DenseMatrix], g_prev: &DenseMatrix, gamma: f64) -> Result<DenseMatrix> {
    let mut r = g_prev.scaled(1.0 - gamma);
    let w = gamma / xq.len() as f64;
    for p in xq {
        r.axpy(w, p)?;
    }
    Ok(r)
}

/// `G = U_R V_Rᵀ` for `R = γ Σ_i X_i Q_i / I + (1 − γ) G_prev`.
pub fn g_update(views: &ViewCollection, q_next: &[DenseMatrix], g_prev: &DenseMatrix, gamma: f64) -> Result<DenseMatrix> {
    if q_next.len() != views.len() {
        return Err(Error::Parameter(format!("{} Q blocks for {} views", q_next.len(), views.len())));
    }
    let xq = views
        .iter()
        .zip(q_next)
        .map(|(v, q)| v.matrix.mul_dense(q))
        .collect::<Result<Vec<_>>>()?;
    procrustes(&procrustes_target(&xq, g_prev, gamma)?)
}

/// `Z = ‖ΔG‖_F² / γ² + Σ_i Σ_t ‖ΔQ_i⁽ᵗ⁾‖_F² / α_i²`.
pub fn z_potential(gamma: f64, g_step_norm: f64, alphas: &[f64], q_step_norms: &[f64]) -> f64 {
    g_step_norm / (gamma * gamma)
        + alphas
            .iter()
            .zip(q_step_norms)
            .map(|(a, s)| s / (a * a))
            .sum::<f64>()
}

/// State with `G = G₀` (re-orthonormalized when `G₀ᵀG₀ ≠ I`) and `Q_i = 0`.
pub fn warm_start_from(g0: &DenseMatrix, views: &ViewCollection) -> Result<SolverState> {
    if g0.rows() != views.rows() {
        return Err(Error::shape("warm_start_from", format!("{} rows", views.rows()), format!("{} rows", g0.rows())));
    }
    let g = orthonormalize_if_needed(g0)?;
    let q = views.iter().map(|v| DenseMatrix::zeros(v.cols(), g.cols())).collect();
    Ok(SolverState { g, q, r: 0 })
}

fn orthonormalize_if_needed(g0: &DenseMatrix) -> Result<DenseMatrix> {
    let defect = g0.orthonormality_defect();
    if defect <= 1e-8 {
        return Ok(g0.clone());
    }
    log::warn!("warm-start G is not orthonormal (‖GᵀG − I‖_F = {defect:.3e}); using its polar factor");
    procrustes(g0)
}

/// Stepwise driver; [`solve`] runs it to completion.
pub struct Solver<'a> {
    views: &'a ViewCollection,
    config: SolverConfig,
    regs: Vec<RegularizerSpec>,
    lipschitz: Vec<f64>,
    alphas: Vec<f64>,
    state: SolverState,
    xq: Vec<DenseMatrix>,
    objective: f64,
}

impl<'a> Solver<'a> {
    pub fn new(views: &'a ViewCollection, config: SolverConfig) -> Result<Self> {
        config.validate(views)?;
        let lipschitz: Vec<f64> = views
            .iter()
            .map(|v| match v.lipschitz {
                Some(l) => Ok(l),
                None => {
                    let seed = config.seed ^ (v.id as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                    Ok(estimate_lipschitz(v, LIPSCHITZ_TOL, LIPSCHITZ_MAX_ITERS, seed)? * LIPSCHITZ_INFLATION)
                }
            })
            .collect::<Result<_>>()?;
        let alphas = lipschitz
            .iter()
            .map(|&l| config.step_scale / l.max(f64::EPSILON))
            .collect();
        let regs: Vec<RegularizerSpec> = (0..views.len()).map(|i| *config.reg_for(i)).collect();
        let state = match &config.init {
            Init::Random => {
                let g = random_orthonormal(views.rows(), config.k, config.seed)?;
                let q = views.iter().map(|v| DenseMatrix::zeros(v.cols(), config.k)).collect();
                SolverState { g, q, r: 0 }
            }
            Init::Warm { g, q } => {
                let mut s = warm_start_from(g, views)?;
                if let Some(q) = q {
                    s.q = q.clone();
                }
                s
            }
        };
        let xq = views
            .iter()
            .zip(&state.q)
            .map(|(v, q)| v.matrix.mul_dense(q))
            .collect::<Result<Vec<_>>>()?;
        let objective = fitted_objective(&xq, &state.g, &state.q, &regs)?;
        Ok(Solver {
            views,
            config,
            regs,
            lipschitz,
            alphas,
            state,
            xq,
            objective,
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn into_state(self) -> SolverState {
        self.state
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Lipschitz constants actually used (inflated estimates or cached values).
    pub fn lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    /// `c` of the sublinear-rate bound; zero when `γ = 1`.
    pub fn certificate_constant(&self) -> f64 {
        let g = self.config.gamma;
        let omega_term = self.config.omega(self.views.len()) * g * g;
        self.alphas
            .iter()
            .zip(&self.lipschitz)
            .map(|(&a, &l)| (0.5 / a - 0.5 * l) * a * a)
            .fold(omega_term, f64::min)
            .max(0.0)
    }

    /// One outer iteration.
    pub fn step(&mut self) -> Result<StepReport> {
        let start = Instant::now();
        let t_max = self.config.inner_steps;
        let g_prev = &self.state.g;
        let outcomes: Vec<InnerOutcome> = self
            .views
            .views()
            .par_iter()
            .enumerate()
            .map(|(i, v)| {
                inner_loop(
                    v,
                    self.state.q[i].clone(),
                    Some(self.xq[i].clone()),
                    g_prev,
                    &self.regs[i],
                    self.alphas[i],
                    t_max,
                )
            })
            .collect::<Result<_>>()?;

        let objective_after_q: f64 = outcomes.iter().map(|o| o.surrogate).sum();
        let xq: Vec<DenseMatrix> = outcomes.iter().map(|o| o.xq.clone()).collect();
        let target = procrustes_target(&xq, g_prev, self.config.gamma)?;
        let g_next = procrustes(&target)?;
        let g_step_norm = g_next.dist_sq(g_prev)?;

        let q_step_norms: Vec<f64> = outcomes.iter().map(|o| o.step_norm_sum).collect();
        let inner_steps_taken = outcomes.iter().map(|o| o.steps).collect();
        let q_next: Vec<DenseMatrix> = outcomes.into_iter().map(|o| o.q).collect();
        let f_next = fitted_objective(&xq, &g_next, &q_next, &self.regs)?;
        let f_prev = self.objective;
        let r = self.state.r;
        if f_next > f_prev + MONOTONE_SLACK * f_prev.abs().max(1.0) {
            return Err(Error::Monotonicity {
                iteration: r,
                before: f_prev,
                after: f_next,
            });
        }

        let q_decrease_bound = self
            .alphas
            .iter()
            .zip(&self.lipschitz)
            .zip(&q_step_norms)
            .map(|((&a, &l), &s)| (0.5 / a - 0.5 * l) * s)
            .sum();
        let g_decrease_bound = self.config.omega(self.views.len()) * g_step_norm;
        let z = z_potential(self.config.gamma, g_step_norm, &self.alphas, &q_step_norms);
        let subspace_dist = match &self.config.track_oracle {
            Some(u1) => Some(subspace_distance(&g_next, u1)?),
            None => None,
        };

        self.state = SolverState {
            g: g_next,
            q: q_next,
            r: r + 1,
        };
        self.xq = xq;
        self.objective = f_next;

        Ok(StepReport {
            diagnostics: IterateDiagnostics {
                r,
                objective: f_next,
                z_potential: z,
                q_step_norms,
                g_step_norm,
                subspace_dist,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            },
            objective_before: f_prev,
            objective_after_q,
            q_decrease_bound,
            g_decrease_bound,
            inner_steps_taken,
        })
    }

    /// Runs to the stopping rule, handing each record to `on_iter` as it is produced.
    pub fn run_with(mut self, mut on_iter: impl FnMut(&StepReport)) -> Result<SolveOutput> {
        let c = self.certificate_constant();
        let f0 = self.objective;
        let v = if c > 0.0 { f0 / c } else { f64::INFINITY };
        let mut cumulative = 0.0;
        let mut cumulative_ok = Vec::new();
        let mut diagnostics = Vec::new();
        let mut converged = false;
        for _ in 0..self.config.max_outer {
            let f_prev = self.objective;
            let report = self.step()?;
            on_iter(&report);
            cumulative += c * report.diagnostics.z_potential;
            cumulative_ok.push(cumulative <= f0 - report.diagnostics.objective + 1e-6);
            let change = (f_prev - report.diagnostics.objective).abs();
            diagnostics.push(report.diagnostics);
            if change < self.config.tol_objective {
                converged = true;
                break;
            }
        }
        Ok(SolveOutput {
            state: self.state,
            diagnostics,
            certificate: Theorem1Certificate {
                c,
                v,
                initial_objective: f0,
                cumulative_ok,
            },
            converged,
        })
    }

    pub fn run(self) -> Result<SolveOutput> {
        self.run_with(|_| {})
    }
}

fn fitted_objective(xq: &[DenseMatrix], g: &DenseMatrix, q: &[DenseMatrix], regs: &[RegularizerSpec]) -> Result<f64> {
    let mut f = 0.0;
    for ((p, qi), reg) in xq.iter().zip(q).zip(regs) {
        f += 0.5 * p.dist_sq(g)? + reg_value(reg, qi);
    }
    Ok(f)
}

/// Runs the alternating optimization until `|ΔF| < tol_objective` or `max_outer`.
pub fn solve(views: &ViewCollection, config: SolverConfig) -> Result<SolveOutput> {
    Solver::new(views, config)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseMatrix;

    fn identity_views(l: usize, i: usize) -> ViewCollection {
        ViewCollection::from_matrices((0..i).map(|_| SparseMatrix::identity(l)).collect()).unwrap()
    }

    #[test]
    fn objective_at_zero_q_is_half_ik() {
        let views = identity_views(4, 3);
        let g = random_orthonormal(4, 2, 1).unwrap();
        let state = SolverState { g, q: vec![DenseMatrix::zeros(4, 2); 3], r: 0 };
        let f = objective(&views, &state, &[RegularizerSpec::none()]).unwrap();
        assert!((f - 3.0).abs() < 1e-12);
    }

    #[test]
    fn objective_vanishes_at_perfect_fit() {
        let views = identity_views(5, 2);
        let g = random_orthonormal(5, 3, 2).unwrap();
        let state = SolverState { g: g.clone(), q: vec![g.clone(), g], r: 0 };
        assert!(objective(&views, &state, &[RegularizerSpec::none()]).unwrap().abs() < 1e-28);
    }

    #[test]
    fn inner_loop_fixed_point_and_hand_step() {
        let views = identity_views(3, 1);
        let g = random_orthonormal(3, 2, 5).unwrap();
        let (q, s) = q_inner_loop(&views[0], &g, &g, &RegularizerSpec::none(), 0.5, 4).unwrap();
        assert_eq!(q, g);
        assert_eq!(s, 0.0);

        let e1 = DenseMatrix::from_rows(&[[1.0], [0.0], [0.0]]);
        let (q, s) = q_inner_loop(&views[0], &DenseMatrix::zeros(3, 1), &e1, &RegularizerSpec::none(), 0.5, 1).unwrap();
        assert_eq!(q, e1.scaled(0.5));
        assert!((s - 0.25).abs() < 1e-15);
    }

    #[test]
    fn inner_loop_flags_oversized_step() {
        let x = SparseMatrix::from_triplets(2, 2, [(0, 0, 3.0), (1, 1, 1.0)]).unwrap();
        let views = ViewCollection::from_matrices(vec![x]).unwrap();
        let g = DenseMatrix::from_rows(&[[1.0], [0.0]]);
        // α = 1 > 1/L = 1/9 overshoots along the first coordinate
        let err = q_inner_loop(&views[0], &DenseMatrix::zeros(2, 1), &g, &RegularizerSpec::none(), 1.0, 3);
        assert!(matches!(err, Err(Error::StepSize { .. })));
    }

    #[test]
    fn g_update_cases() {
        let views = identity_views(3, 1);
        let e12 = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]);
        let g = g_update(&views, &[e12.scaled(2.0)], &random_orthonormal(3, 2, 0).unwrap(), 1.0).unwrap();
        assert!(g.dist_sq(&e12).unwrap() < 1e-28);

        let zero = DenseMatrix::zeros(3, 2);
        let err = g_update(&views, &[zero.clone()], &e12, 1.0);
        assert!(matches!(err, Err(Error::RankDeficient { .. })));
        // the proximal term keeps R full rank
        let g = g_update(&views, &[zero], &e12, 0.5).unwrap();
        assert!(g.dist_sq(&e12).unwrap() < 1e-28);
    }

    #[test]
    fn z_potential_cases() {
        assert_eq!(z_potential(0.9, 0.0, &[0.1, 0.2], &[0.0, 0.0]), 0.0);
        assert_eq!(z_potential(1.0, 0.37, &[0.1], &[0.0]), 0.37);
        let z = z_potential(0.5, 0.2, &[0.1, 0.5], &[0.01, 0.04]);
        assert!((z - (0.8 + 1.0 + 0.16)).abs() < 1e-12);
    }

    #[test]
    fn identity_views_fit_exactly() {
        let views = identity_views(4, 1);
        let mut cfg = SolverConfig::new(4, vec![RegularizerSpec::none()]);
        cfg.tol_objective = 1e-14;
        cfg.max_outer = 50;
        let out = solve(&views, cfg).unwrap();
        assert!(out.diagnostics.last().unwrap().objective < 1e-12);
        // G never moves: it is already the polar factor of the fitted target
        assert!(out.diagnostics.iter().all(|d| d.g_step_norm < 1e-20));
    }

    #[test]
    fn config_validation() {
        let views = identity_views(4, 2);
        let mut cfg = SolverConfig::new(2, vec![RegularizerSpec::none()]);
        cfg.inner_steps = 0;
        assert!(cfg.validate(&views).is_err());
        let mut cfg = SolverConfig::new(2, vec![RegularizerSpec::none()]);
        cfg.gamma = 0.0;
        assert!(cfg.validate(&views).is_err());
        let mut cfg = SolverConfig::new(5, vec![RegularizerSpec::none()]);
        assert!(cfg.validate(&views).is_err());
        cfg.k = 2;
        cfg.regs = vec![RegularizerSpec::none(); 3];
        assert!(cfg.validate(&views).is_err());
        assert_eq!(default_gamma(&[RegularizerSpec::ridge(0.1)]), 1.0);
        assert_eq!(default_gamma(&[RegularizerSpec::ridge(0.1), RegularizerSpec::row_sparse(1.0)]), 0.99);
    }

    #[test]
    fn warm_start_reorthonormalizes() {
        let views = identity_views(4, 2);
        let g0 = DenseMatrix::from_rows(&[[2.0, 0.0], [0.0, 1.0], [0.0, 0.5], [0.0, 0.0]]);
        let s = warm_start_from(&g0, &views).unwrap();
        assert!(s.g.orthonormality_defect() < 1e-12);
        assert!(s.q.iter().all(|q| q.frobenius_sq() == 0.0));
        let g1 = random_orthonormal(4, 2, 9).unwrap();
        assert_eq!(warm_start_from(&g1, &views).unwrap().g, g1);
    }
}
