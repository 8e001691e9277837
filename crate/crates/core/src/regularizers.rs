//! Structure-promoting penalties `g_i(Q_i)` and their proximity operators.
//!
//! The ridge penalty is `(μ/2)‖Q‖_F²`, so that with ridge weights the
//! eigen-decomposition of `Σ X_i (X_iᵀX_i + μ_i I)⁻¹ X_iᵀ` is the exact
//! minimizer of the regularized objective.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RegularizerKind {
    None,
    /// `(μ/2)‖Q‖_F²`
    Ridge,
    /// `μ Σ_m ‖Q(m,:)‖₂`
    RowSparse,
    /// `μ Σ |Q(m,k)|`
    EntrySparse,
    /// indicator of `Q ≥ 0`
    NonNeg,
    /// indicator of `Q ≥ 0` plus `μ Σ |Q(m,k)|`
    NonNegEntrySparse,
}

impl RegularizerKind {
    pub const ALL: [RegularizerKind; 6] = [
        RegularizerKind::None,
        RegularizerKind::Ridge,
        RegularizerKind::RowSparse,
        RegularizerKind::EntrySparse,
        RegularizerKind::NonNeg,
        RegularizerKind::NonNegEntrySparse,
    ];

    pub fn uses_weight(self) -> bool {
        !matches!(self, RegularizerKind::None | RegularizerKind::NonNeg)
    }

    pub fn requires_nonneg(self) -> bool {
        matches!(self, RegularizerKind::NonNeg | RegularizerKind::NonNegEntrySparse)
    }
}

/// A penalty choice and its weight `μ ≥ 0` (ignored by `none` and `nonneg`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RegularizerSpec {
    pub kind: RegularizerKind,
    pub mu: f64,
}

impl RegularizerSpec {
    pub fn new(kind: RegularizerKind, mu: f64) -> Result<Self> {
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::Parameter(format!("regularization weight must be finite and >= 0, got {mu}")));
        }
        Ok(RegularizerSpec { kind, mu })
    }

    pub fn none() -> Self {
        RegularizerSpec { kind: RegularizerKind::None, mu: 0.0 }
    }

    pub fn ridge(mu: f64) -> Self {
        RegularizerSpec { kind: RegularizerKind::Ridge, mu }
    }

    pub fn row_sparse(mu: f64) -> Self {
        RegularizerSpec { kind: RegularizerKind::RowSparse, mu }
    }

    pub fn entry_sparse(mu: f64) -> Self {
        RegularizerSpec { kind: RegularizerKind::EntrySparse, mu }
    }

    pub fn nonneg() -> Self {
        RegularizerSpec { kind: RegularizerKind::NonNeg, mu: 0.0 }
    }

    pub fn nonneg_entry_sparse(mu: f64) -> Self {
        RegularizerSpec { kind: RegularizerKind::NonNegEntrySparse, mu }
    }

    /// Ridge weight when the penalty is ridge or none; `None` for structured kinds.
    pub fn ridge_weight(&self) -> Option<f64> {
        match self.kind {
            RegularizerKind::None => Some(0.0),
            RegularizerKind::Ridge => Some(self.mu),
            _ => None,
        }
    }
}

impl fmt::Display for RegularizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            RegularizerKind::None => write!(f, "none"),
            RegularizerKind::Ridge => write!(f, "ridge:{}", self.mu),
            RegularizerKind::RowSparse => write!(f, "l21:{}", self.mu),
            RegularizerKind::EntrySparse => write!(f, "l11:{}", self.mu),
            RegularizerKind::NonNeg => write!(f, "nonneg"),
            RegularizerKind::NonNegEntrySparse => write!(f, "nonneg+l11:{}", self.mu),
        }
    }
}

impl FromStr for RegularizerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, weight) = match s.split_once(':') {
            Some((n, w)) => (n, Some(w)),
            None => (s, None),
        };
        let kind = match name {
            "none" => RegularizerKind::None,
            "ridge" => RegularizerKind::Ridge,
            "l21" => RegularizerKind::RowSparse,
            "l11" => RegularizerKind::EntrySparse,
            "nonneg" => RegularizerKind::NonNeg,
            "nonneg+l11" => RegularizerKind::NonNegEntrySparse,
            other => return Err(Error::Parameter(format!("unknown regularizer '{other}'"))),
        };
        let mu = match (kind.uses_weight(), weight) {
            (true, Some(w)) => w
                .parse::<f64>()
                .map_err(|_| Error::Parameter(format!("bad regularizer weight '{w}'")))?,
            (true, None) => return Err(Error::Parameter(format!("regularizer '{name}' needs a weight, e.g. {name}:0.1"))),
            (false, Some(_)) => return Err(Error::Parameter(format!("regularizer '{name}' takes no weight"))),
            (false, None) => 0.0,
        };
        RegularizerSpec::new(kind, mu)
    }
}

impl TryFrom<String> for RegularizerSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RegularizerSpec> for String {
    fn from(r: RegularizerSpec) -> String {
        r.to_string()
    }
}

/// `g(Q)`; `+∞` outside the feasible set of the indicator kinds.
pub fn reg_value(spec: &RegularizerSpec, q: &DenseMatrix) -> f64 {
    let mu = spec.mu;
    let l1 = || q.as_slice().iter().map(|v| v.abs()).sum::<f64>();
    let feasible = || q.as_slice().iter().all(|&v| v >= 0.0);
    match spec.kind {
        RegularizerKind::None => 0.0,
        RegularizerKind::Ridge => 0.5 * mu * q.frobenius_sq(),
        RegularizerKind::RowSparse => mu * q.row_norms().iter().sum::<f64>(),
        RegularizerKind::EntrySparse => mu * l1(),
        RegularizerKind::NonNeg => {
            if feasible() {
                0.0
            } else {
                f64::INFINITY
            }
        }
        RegularizerKind::NonNegEntrySparse => {
            if feasible() {
                mu * l1()
            } else {
                f64::INFINITY
            }
        }
    }
}

/// `argmin_Q ½‖Q − H‖_F² + α g(Q)`.
pub fn prox(spec: &RegularizerSpec, h: &DenseMatrix, alpha: f64) -> Result<DenseMatrix> {
    let mut q = h.clone();
    prox_in_place(spec, &mut q, alpha)?;
    Ok(q)
}

/// In-place form of [`prox`]: overwrites `h` with the proximal point.
pub fn prox_in_place(spec: &RegularizerSpec, h: &mut DenseMatrix, alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Parameter(format!("prox step must be positive, got {alpha}")));
    }
    let t = alpha * spec.mu;
    match spec.kind {
        RegularizerKind::None => {}
        RegularizerKind::Ridge => h.scale(1.0 / (1.0 + t)),
        RegularizerKind::RowSparse => {
            for i in 0..h.rows() {
                let row = h.row_mut(i);
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                let shrink = if norm <= t { 0.0 } else { 1.0 - t / norm };
                row.iter_mut().for_each(|v| *v *= shrink);
            }
        }
        RegularizerKind::EntrySparse => {
            h.as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = v.signum() * (v.abs() - t).max(0.0));
        }
        RegularizerKind::NonNeg => h.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0)),
        RegularizerKind::NonNegEntrySparse => {
            h.as_mut_slice().iter_mut().for_each(|v| *v = (*v - t).max(0.0))
        }
    }
    Ok(())
}

/// Rows whose Euclidean norm exceeds `tol`.
pub fn row_support(q: &DenseMatrix, tol: f64) -> BTreeSet<usize> {
    q.row_norms()
        .into_iter()
        .enumerate()
        .filter(|&(_, n)| n > tol)
        .map(|(i, _)| i)
        .collect()
}

/// Scale-free default threshold for [`row_support`]: `1e-6 · max_m ‖Q(m,:)‖₂`.
pub fn default_support_tol(q: &DenseMatrix) -> f64 {
    1e-6 * q.row_norms().into_iter().fold(0.0, f64::max)
}
