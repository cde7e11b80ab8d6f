//! Wasserstein worst-case expectations of max-affine losses.
//!
//! The ambiguity set is the ball of radius `ε` (1-norm ground metric) around
//! the empirical distribution of the training samples, restricted to the
//! support polytope `Ξ = {ξ : Hξ <= d}`. For a loss
//! `ℓ(ξ) = max_k ⟨a_k, ξ⟩ + b_k` the worst-case expectation scaled by `ρ` is
//!
//! ```text
//! inf  λε + (1/N) Σᵢ sᵢ
//! s.t. ρ(b_k + ⟨a_k, ξ̂ᵢ⟩ + ⟨ςᵢₖ, d − Hξ̂ᵢ⟩) <= sᵢ
//!      ‖Hᵀςᵢₖ − ρ a_k‖_∞ <= λ
//!      ςᵢₖ >= 0                            for all i, k
//! ```
//!
//! where `a_k`, `b_k` may be affine in decision variables, so the block drops
//! straight into a larger [`ConvexProgram`](crate::program::ConvexProgram).

mod cvar;
pub mod format;
mod oracle;
mod saa;
mod wasserstein;

pub use cvar::{cvar_to_max_affine, empirical_cvar, empirical_cvar_epigraph, empirical_var};
pub use oracle::{box_grid, transport_lp_oracle};
pub use saa::{saa_cvar_constraint, SaaCvar, SampleLoss};
pub use wasserstein::{
    wc_cvar_epigraph, wc_expectation_epigraph, wc_expectation_value, wc_expectation_value_with, worst_case_cvar, DroCertificate,
    DroTerm,
};

use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, Error, Result};
use crate::program::AffExpr;

/// Slack allowed when checking that training samples lie in the support.
pub const SUPPORT_TOL: f64 = 1e-9;

/// Forecast-error training samples, one row per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl SampleSet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        let names = (0..dim).map(|j| format!("xi{j}")).collect();
        Self::with_names(names, rows)
    }

    pub fn with_names(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Data("sample set needs at least one sample".into()));
        }
        if names.is_empty() {
            return Err(Error::Data("sample set needs at least one component".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != names.len() {
                return Err(Error::Dimension(format!("sample {i} has {} components, expected {}", r.len(), names.len())));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("sample {i} has a non-finite entry")));
            }
        }
        Ok(Self { names, rows })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    /// Sample mean per component.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.dim()).map(|j| self.rows.iter().map(|r| r[j]).sum::<f64>() / n).collect()
    }

    /// Sample standard deviation per component (divisor `N`).
    pub fn std(&self) -> Vec<f64> {
        let mean = self.mean();
        let n = self.len() as f64;
        (0..self.dim())
            .map(|j| (self.rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
            .collect()
    }
}

/// Support polytope `{ξ : Hξ <= d}`; no rows means unbounded support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportPolytope {
    dim: usize,
    h: Vec<Vec<f64>>,
    d: Vec<f64>,
}

impl SupportPolytope {
    pub fn new(dim: usize, h: Vec<Vec<f64>>, d: Vec<f64>) -> Result<Self> {
        if h.len() != d.len() {
            return Err(Error::Dimension(format!("support has {} rows in H but {} entries in d", h.len(), d.len())));
        }
        if let Some((i, _)) = h.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::Dimension(format!("support row {i} has {} columns, expected {dim}", h[i].len())));
        }
        if h.iter().flatten().chain(&d).any(|v| !v.is_finite()) {
            return Err(Error::Data("support polytope has a non-finite entry".into()));
        }
        Ok(Self { dim, h, d })
    }

    pub fn unbounded(dim: usize) -> Self {
        Self { dim, h: Vec::new(), d: Vec::new() }
    }

    /// Axis-aligned box `lo <= ξ <= hi`.
    pub fn boxed(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension("box bounds differ in length".into()));
        }
        let dim = lo.len();
        let mut h = Vec::with_capacity(2 * dim);
        let mut d = Vec::with_capacity(2 * dim);
        for j in 0..dim {
            let mut up = vec![0.0; dim];
            up[j] = 1.0;
            h.push(up);
            d.push(hi[j]);
            let mut down = vec![0.0; dim];
            down[j] = -1.0;
            h.push(down);
            d.push(-lo[j]);
        }
        Self::new(dim, h, d)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.h.len()
    }

    pub fn is_unbounded(&self) -> bool {
        self.h.is_empty()
    }

    pub fn h(&self) -> &[Vec<f64>] {
        &self.h
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn contains(&self, xi: &[f64], tol: f64) -> bool {
        self.h.iter().zip(&self.d).all(|(row, &d)| row.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>() <= d + tol)
    }
}

/// Wasserstein ball around the empirical distribution of `data`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguitySet {
    data: SampleSet,
    support: SupportPolytope,
    radius: f64,
}

impl AmbiguitySet {
    pub fn new(data: SampleSet, support: SupportPolytope, radius: f64) -> Result<Self> {
        check_nonneg("epsilon", radius)?;
        if support.dim() != data.dim() {
            return Err(Error::Dimension(format!("support dimension {} differs from sample dimension {}", support.dim(), data.dim())));
        }
        if let Some(i) = data.rows().iter().position(|r| !support.contains(r, SUPPORT_TOL)) {
            return Err(Error::Data(format!("sample {i} lies outside the support polytope")));
        }
        Ok(Self { data, support, radius })
    }

    /// Ball with unbounded support.
    pub fn unbounded(data: SampleSet, radius: f64) -> Result<Self> {
        let dim = data.dim();
        Self::new(data, SupportPolytope::unbounded(dim), radius)
    }

    pub fn data(&self) -> &SampleSet {
        &self.data
    }

    pub fn support(&self) -> &SupportPolytope {
        &self.support
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        check_nonneg("epsilon", radius)?;
        Ok(Self { radius, ..self.clone() })
    }
}

/// Scalar loss `⟨a, ξ⟩ + b` whose coefficients may be affine in decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineLoss {
    pub a: Vec<AffExpr>,
    pub b: AffExpr,
}

impl AffineLoss {
    pub fn numeric(a: &[f64], b: f64) -> Self {
        Self { a: a.iter().map(|&v| AffExpr::constant(v)).collect(), b: AffExpr::constant(b) }
    }

    pub fn zero(dim: usize) -> Self {
        Self { a: vec![AffExpr::zero(); dim], b: AffExpr::zero() }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn is_numeric(&self) -> bool {
        self.b.is_constant() && self.a.iter().all(AffExpr::is_constant)
    }

    /// Decision-affine value at a fixed `ξ`.
    pub fn at(&self, xi: &[f64]) -> AffExpr {
        let mut e = self.b.clone();
        for (a, &x) in self.a.iter().zip(xi) {
            e.add_scaled(a, x);
        }
        e
    }

    /// Value at `ξ` given a primal point `x` for the decision variables.
    pub fn eval(&self, xi: &[f64], x: &[f64]) -> f64 {
        self.b.eval(x) + self.a.iter().zip(xi).map(|(a, &v)| a.eval(x) * v).sum::<f64>()
    }

    /// Numeric copy with decisions fixed at `x`.
    pub fn fix(&self, x: &[f64]) -> AffineLoss {
        AffineLoss {
            a: self.a.iter().map(|e| AffExpr::constant(e.eval(x))).collect(),
            b: AffExpr::constant(self.b.eval(x)),
        }
    }

    pub fn scaled(&self, c: f64) -> AffineLoss {
        AffineLoss { a: self.a.iter().map(|e| e.scaled(c)).collect(), b: self.b.scaled(c) }
    }
}

/// Pointwise maximum of affine pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxAffineLoss {
    pieces: Vec<AffineLoss>,
}

impl MaxAffineLoss {
    pub fn new(pieces: Vec<AffineLoss>) -> Result<Self> {
        let first = pieces.first().ok_or_else(|| Error::Construction("max-affine loss needs at least one piece".into()))?;
        let dim = first.dim();
        if pieces.iter().any(|p| p.dim() != dim) {
            return Err(Error::Dimension("max-affine pieces differ in dimension".into()));
        }
        Ok(Self { pieces })
    }

    /// Numeric loss from `(a_k, b_k)` pairs.
    pub fn numeric(pieces: &[(Vec<f64>, f64)]) -> Result<Self> {
        Self::new(pieces.iter().map(|(a, b)| AffineLoss::numeric(a, *b)).collect())
    }

    pub fn pieces(&self) -> &[AffineLoss] {
        &self.pieces
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].dim()
    }

    pub fn is_numeric(&self) -> bool {
        self.pieces.iter().all(AffineLoss::is_numeric)
    }

    /// Value at `ξ` given decisions `x` (empty slice for numeric losses).
    pub fn eval(&self, xi: &[f64], x: &[f64]) -> f64 {
        self.pieces.iter().map(|p| p.eval(xi, x)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `‖a_k‖_∞` of a numeric loss.
    pub fn lipschitz(&self) -> f64 {
        self.pieces
            .iter()
            .flat_map(|p| p.a.iter().map(|e| e.constant.abs()))
            .fold(0.0, f64::max)
    }

    pub fn fix(&self, x: &[f64]) -> MaxAffineLoss {
        MaxAffineLoss { pieces: self.pieces.iter().map(|p| p.fix(x)).collect() }
    }

    /// Empirical mean `(1/N) Σᵢ max_k ⟨a_k, ξ̂ᵢ⟩ + b_k` of a numeric loss.
    pub fn sample_mean(&self, data: &SampleSet) -> f64 {
        data.rows().iter().map(|r| self.eval(r, &[])).sum::<f64>() / data.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_set_validation() {
        assert!(SampleSet::new(vec![]).is_err());
        assert!(SampleSet::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(SampleSet::new(vec![vec![f64::NAN]]).is_err());
        let s = SampleSet::new(vec![vec![0.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert_eq!(s.mean(), vec![1.0, 3.0]);
        assert_eq!(s.std(), vec![1.0, 1.0]);
    }

    #[test]
    fn ambiguity_rejects_outside_samples_and_negative_radius() {
        let s = SampleSet::new(vec![vec![2.0]]).unwrap();
        let sup = SupportPolytope::boxed(&[-1.0], &[1.0]).unwrap();
        assert!(AmbiguitySet::new(s.clone(), sup, 0.1).is_err());
        assert!(AmbiguitySet::unbounded(s.clone(), -0.1).is_err());
        let sup = SupportPolytope::boxed(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        assert!(matches!(AmbiguitySet::new(s, sup, 0.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn max_affine_eval() {
        let l = MaxAffineLoss::numeric(&[(vec![1.0], 0.0), (vec![0.0], 0.0)]).unwrap();
        assert_eq!(l.eval(&[-2.0], &[]), 0.0);
        assert_eq!(l.eval(&[3.0], &[]), 3.0);
        assert_eq!(l.lipschitz(), 1.0);
        assert!(MaxAffineLoss::new(vec![]).is_err());
    }
}
